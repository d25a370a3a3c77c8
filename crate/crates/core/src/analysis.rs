//! Shape certificates for `G = sqrt(H)`, gap structure of the grid
//! distances, and asymptotic diameter constants.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite_field::detect_prime_power;
use crate::format::real;
use crate::profile::{grid_angle, CoefficientSpec, DistanceProfile, ProfileCurve};

pub const DEFAULT_GRID: usize = 100_000;

/// `(pi/16)(pi - sqrt(pi^2 - 4))`, the largest `epsilon` keeping the
/// one-frequency profile concave.
pub fn eps_star() -> f64 {
    PI / 16.0 * (PI - (PI * PI - 4.0).sqrt())
}

/// `sin(theta) - theta cos(theta)`.
pub fn phi(theta: f64) -> f64 {
    theta.sin() - theta * theta.cos()
}

/// The one-frequency concavity numerator in factored form,
/// `-a^2 + 2 a eps phi(theta) - eps^2 (1 - cos theta)^2` with `a = pi/4`.
pub fn eps_numerator_factored(theta: f64, epsilon: f64) -> f64 {
    let a = PI / 4.0;
    let c = 1.0 - theta.cos();
    -a * a + 2.0 * a * epsilon * phi(theta) - epsilon * epsilon * c * c
}

/// Extra data for the one-frequency family: the bound
/// `2HH'' - H'^2 <= -eps^2 (1 - cos theta)^2`, which holds for `eps <= 1/8`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticBound {
    pub epsilon: f64,
    /// Max over the grid of `2HH'' - H'^2 + eps^2 (1 - cos theta)^2`.
    pub margin: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityCertificate {
    pub grid_size: usize,
    /// The numerator must be `<= -required_margin` (strictly negative when 0).
    pub required_margin: f64,
    pub min_h: f64,
    pub min_hprime: f64,
    pub max_numerator: f64,
    pub argmax_theta: f64,
    pub analytic: Option<AnalyticBound>,
    pub pass: bool,
}

#[derive(Clone, Copy)]
struct GridStats {
    min_h: f64,
    min_h1: f64,
    max_num: f64,
    argmax: f64,
    max_analytic: f64,
}

impl GridStats {
    fn identity() -> Self {
        GridStats {
            min_h: f64::INFINITY,
            min_h1: f64::INFINITY,
            max_num: f64::NEG_INFINITY,
            argmax: f64::NAN,
            max_analytic: f64::NEG_INFINITY,
        }
    }

    fn merge(self, o: GridStats) -> GridStats {
        // ties go to the smaller angle so the reduction order does not matter
        let take_other = o.max_num > self.max_num
            || (o.max_num == self.max_num && o.argmax < self.argmax);
        GridStats {
            min_h: self.min_h.min(o.min_h),
            min_h1: self.min_h1.min(o.min_h1),
            max_num: if take_other { o.max_num } else { self.max_num },
            argmax: if take_other { o.argmax } else { self.argmax },
            max_analytic: self.max_analytic.max(o.max_analytic),
        }
    }
}

pub fn concavity_certificate(spec: &CoefficientSpec, grid_size: usize) -> Result<ConcavityCertificate> {
    concavity_certificate_with_margin(spec, grid_size, 0.0)
}

/// Evaluates `H`, `H'` and `2HH'' - H'^2` at `theta_k = pi k / grid_size`,
/// `k = 1..grid_size-1`.
pub fn concavity_certificate_with_margin(
    spec: &CoefficientSpec,
    grid_size: usize,
    margin: f64,
) -> Result<ConcavityCertificate> {
    if grid_size < 1000 {
        return Err(Error::GridTooCoarse(grid_size));
    }
    spec.validate()?;
    let curve = spec.curve();
    let eps = spec.is_eps_family().then_some(spec.epsilon);
    let stats = (1..grid_size)
        .into_par_iter()
        .map(|k| {
            let theta = PI * k as f64 / grid_size as f64;
            let (h, h1, h2) = (curve.h(theta), curve.h1(theta), curve.h2(theta));
            let num = 2.0 * h * h2 - h1 * h1;
            let analytic = eps.map_or(f64::NEG_INFINITY, |e| {
                let c = 1.0 - theta.cos();
                num + e * e * c * c
            });
            GridStats {
                min_h: h,
                min_h1: h1,
                max_num: num,
                argmax: theta,
                max_analytic: analytic,
            }
        })
        .reduce(GridStats::identity, GridStats::merge);
    let concave = if margin > 0.0 {
        stats.max_num <= -margin
    } else {
        stats.max_num < 0.0
    };
    Ok(ConcavityCertificate {
        grid_size,
        required_margin: margin,
        min_h: stats.min_h,
        min_hprime: stats.min_h1,
        max_numerator: stats.max_num,
        argmax_theta: stats.argmax,
        analytic: eps.map(|epsilon| AnalyticBound {
            epsilon,
            margin: stats.max_analytic,
            holds: stats.max_analytic <= 0.0,
        }),
        pass: stats.min_h > 0.0 && stats.min_h1 > 0.0 && concave,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// `gaps[s - 1] = d_{s+1} - d_s`.
    pub gaps: Vec<f64>,
    pub increasing: bool,
    pub strictly_decreasing: bool,
    /// `min_s (g_s - g_{s+1})`; positive when the gaps strictly decrease.
    pub worst_margin: f64,
    /// The `s` attaining `worst_margin`.
    pub worst_at: u64,
    /// Index `s` of the smallest gap `d_{s+1} - d_s`.
    pub min_gap_at: u64,
    /// Every `s` with `g_s <= g_{s+1}`.
    pub violations: Vec<u64>,
}

pub fn gap_report(profile: &DistanceProfile) -> Result<GapReport> {
    if profile.pairs() < 3 {
        return Err(Error::ProfileTooShort(profile.pairs(), 3));
    }
    let gaps: Vec<f64> = profile.d.windows(2).map(|w| w[1] - w[0]).collect();
    let mut worst_margin = f64::INFINITY;
    let mut worst_at = 0;
    let mut violations = Vec::new();
    for (i, w) in gaps.windows(2).enumerate() {
        let margin = w[0] - w[1];
        if margin < worst_margin {
            worst_margin = margin;
            worst_at = i as u64 + 1;
        }
        if !(margin > 0.0) {
            violations.push(i as u64 + 1);
        }
    }
    let min_gap_at = gaps
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i as u64 + 1)
        .unwrap_or(0);
    Ok(GapReport {
        increasing: gaps.iter().all(|&g| g > 0.0),
        strictly_decreasing: violations.is_empty(),
        worst_margin,
        worst_at,
        min_gap_at,
        violations,
        gaps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsConstant {
    pub value: f64,
    /// False when `epsilon > eps_star()`: the formula is returned but the
    /// profile is no longer concave, so the construction does not apply.
    pub certified: bool,
}

/// `1 - 8 eps / pi^2`.
pub fn asymptotic_constant_eps(epsilon: f64) -> Result<EpsConstant> {
    if !epsilon.is_finite() || !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::EpsilonOutOfRange(epsilon));
    }
    Ok(EpsConstant {
        value: 1.0 - 8.0 * epsilon / (PI * PI),
        certified: epsilon <= eps_star(),
    })
}

/// `lim diam / m = G(pi) / (2 pi G'(pi-)) = H(pi) / (pi H'(pi))`.
pub fn asymptotic_constant_general(spec: &CoefficientSpec) -> Result<f64> {
    limit_of_curve(&spec.curve())
}

/// Every frequency is odd, so at `pi` each cosine is `-1` and each sine
/// vanishes; both values are taken exactly rather than through `cos`/`sin`.
pub(crate) fn limit_of_curve(curve: &ProfileCurve) -> Result<f64> {
    let slope = curve.slope;
    if !(slope > 0.0) {
        return Err(Error::NonPositiveSlope(slope));
    }
    let h_pi = curve
        .terms
        .iter()
        .fold(slope * PI, |acc, &(_, d)| acc + 2.0 * d);
    Ok(h_pi / (PI * slope))
}

/// One line of the convergence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRow {
    pub q: u64,
    pub m: u64,
    pub n: u64,
    pub d_n: f64,
    pub gap: f64,
    pub diam: f64,
    pub diam_over_m: f64,
    pub diam_over_n2: f64,
    pub limit: f64,
    /// `|diam/m - limit|`.
    pub deviation: f64,
    /// `|diam/n^2 - limit|`.
    pub deviation_n2: f64,
}

/// Diameter of the scaled construction, `d_N / (d_N - d_{N-1})`, from the
/// closed-form profile.
pub fn scaled_diameter(m: u64, curve: &ProfileCurve) -> Result<(f64, f64, f64)> {
    let half = (m - 1) / 2;
    let eval = |s: u64| {
        let theta = grid_angle(s, m);
        let h = curve.h(theta);
        if h > 0.0 {
            Ok(h.sqrt())
        } else {
            Err(Error::NonPositiveH { theta, value: h })
        }
    };
    let d_n = eval(half)?;
    let gap = d_n - eval(half - 1)?;
    if !(gap > 0.0) {
        return Err(Error::DegenerateGap(gap));
    }
    Ok((d_n, gap, d_n / gap))
}

pub fn convergence_table(qs: &[u64], spec: &CoefficientSpec) -> Result<Vec<AsymptoticRow>> {
    spec.validate()?;
    let curve = spec.curve();
    let limit = limit_of_curve(&curve)?;
    qs.par_iter()
        .map(|&q| {
            let pp = detect_prime_power(q)?;
            let (d_n, gap, diam) = scaled_diameter(pp.m, &curve)?;
            let diam_over_m = diam / pp.m as f64;
            let diam_over_n2 = diam / (pp.n * pp.n) as f64;
            Ok(AsymptoticRow {
                q,
                m: pp.m,
                n: pp.n,
                d_n,
                gap,
                diam,
                diam_over_m,
                diam_over_n2,
                limit,
                deviation: (diam_over_m - limit).abs(),
                deviation_n2: (diam_over_n2 - limit).abs(),
            })
        })
        .collect()
}

pub fn write_table_csv<W: Write>(rows: &[AsymptoticRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "q",
        "m",
        "n",
        "d_N",
        "gap",
        "diam",
        "diam_over_m",
        "diam_over_n2",
        "deviation",
        "limit",
        "deviation_n2",
    ])?;
    for r in rows {
        w.write_record([
            r.q.to_string(),
            r.m.to_string(),
            r.n.to_string(),
            real(r.d_n),
            real(r.gap),
            real(r.diam),
            real(r.diam_over_m),
            real(r.diam_over_n2),
            real(r.deviation),
            real(r.limit),
            real(r.deviation_n2),
        ])?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(())
}

/// Eliminates the leading `h^order` error term from consecutive samples
/// `(h_i, f_i)`, returning one limit estimate per adjacent pair.
pub fn richardson(samples: &[(f64, f64)], order: i32) -> Vec<f64> {
    samples
        .windows(2)
        .map(|w| {
            let (h1, f1) = w[0];
            let (h2, f2) = w[1];
            let (a, b) = (h1.powi(order), h2.powi(order));
            (a * f2 - b * f1) / (a - b)
        })
        .collect()
}

/// Value at `h = 0` of the interpolating polynomial through all samples
/// (Neville's scheme).
pub fn polynomial_extrapolate(samples: &[(f64, f64)]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut p: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let n = samples.len();
    for level in 1..n {
        for i in 0..n - level {
            let (hi, hj) = (samples[i].0, samples[i + level].0);
            p[i] = (hj * p[i] - hi * p[i + 1]) / (hj - hi);
        }
    }
    Some(p[0])
}

/// Range of `G'` over `[theta_{N-1}, theta_N]` and the secant slope
/// `(d_N - d_{N-1}) m / (2 pi)`, which must lie inside it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeBracket {
    pub min_slope: f64,
    pub max_slope: f64,
    pub secant: f64,
}

pub fn slope_bracket(spec: &CoefficientSpec, m: u64) -> Result<SlopeBracket> {
    let curve = spec.curve();
    let half = (m - 1) / 2;
    let (lo, hi) = (grid_angle(half - 1, m), grid_angle(half, m));
    let samples = 1000;
    let (mut min_slope, mut max_slope) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..=samples {
        let theta = lo + (hi - lo) * k as f64 / samples as f64;
        let g1 = curve.g1(theta);
        min_slope = min_slope.min(g1);
        max_slope = max_slope.max(g1);
    }
    let (_, gap, _) = scaled_diameter(m, &curve)?;
    Ok(SlopeBracket {
        min_slope,
        max_slope,
        secant: gap * m as f64 / (2.0 * PI),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{distance_profile, Tail};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eighth_passes_with_analytic_bound() {
        let cert = concavity_certificate(&CoefficientSpec::default(), 10_000).unwrap();
        assert!(cert.pass);
        assert!(cert.min_hprime >= PI / 4.0 - 0.125 - 1e-12);
        assert!((PI / 4.0 - 0.125 - 0.66040).abs() < 1e-5);
        let bound = cert.analytic.unwrap();
        assert!(bound.holds && bound.margin <= 0.0);
    }

    #[test]
    fn epsilon_above_threshold_fails_near_pi() {
        for eps in [0.18, 0.2] {
            let cert = concavity_certificate(&CoefficientSpec::eps_family(eps), 10_000).unwrap();
            assert!(!cert.pass);
            assert!(cert.max_numerator > 0.0);
            assert!(cert.argmax_theta > 3.0);
            // direct evaluation of the factored numerator just below pi
            assert!(eps_numerator_factored(PI - 1e-3, eps) > 0.0);
        }
    }

    #[test]
    fn between_eighth_and_threshold_is_concave_without_the_easy_bound() {
        let cert = concavity_certificate(&CoefficientSpec::eps_family(0.14), 10_000).unwrap();
        assert!(cert.pass);
        assert!(!cert.analytic.unwrap().holds);
    }

    #[test]
    fn coarse_grid_rejected() {
        assert_eq!(
            concavity_certificate(&CoefficientSpec::default(), 999).unwrap_err(),
            Error::GridTooCoarse(999)
        );
    }

    #[test]
    fn factored_numerator_matches_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &eps in &[0.01, 0.125, eps_star(), 0.3] {
            let curve = CoefficientSpec::eps_family(eps).curve();
            for _ in 0..200 {
                let theta = rng.gen_range(1e-6..PI);
                let direct = curve.concavity_numerator(theta);
                let factored = eps_numerator_factored(theta, eps);
                assert!((direct - factored).abs() <= 1e-12 * direct.abs().max(1.0));
            }
        }
    }

    #[test]
    fn phi_is_increasing_to_pi() {
        let n = 10_000;
        let vals: Vec<f64> = (1..=n).map(|k| phi(PI * k as f64 / n as f64)).collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
        assert!((phi(PI) - PI).abs() < 1e-12);
        assert!(phi(1e-3) > 0.0);
    }

    #[test]
    fn second_derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let curve = CoefficientSpec::default().curve();
        let h = 1e-5;
        for _ in 0..50 {
            let theta = rng.gen_range(0.1..PI - 0.1);
            let fd = (curve.g(theta + h) - 2.0 * curve.g(theta) + curve.g(theta - h)) / (h * h);
            assert!((fd - curve.g2(theta)).abs() <= 1e-4, "theta={theta}");
        }
    }

    #[test]
    fn eps_star_value() {
        let e = eps_star();
        assert!((e - 0.1411490).abs() < 1e-6);
        assert!(e > 0.125);
        let c = asymptotic_constant_eps(e).unwrap();
        assert!(c.certified);
        assert!((c.value - 0.885589).abs() < 1e-6);
        assert!((c.value - (PI + (PI * PI - 4.0).sqrt()) / (2.0 * PI)).abs() < 1e-15);
        // the numerator vanishes at pi exactly at the threshold
        assert!(eps_numerator_factored(PI, e).abs() < 1e-14);
    }

    #[test]
    fn eps_constants() {
        let c = asymptotic_constant_eps(0.125).unwrap();
        assert!((c.value - (1.0 - 1.0 / (PI * PI))).abs() < 1e-15);
        assert!((c.value - 0.898679).abs() < 1e-6);
        assert_eq!(asymptotic_constant_eps(0.0).unwrap().value, 1.0);
        let beyond = asymptotic_constant_eps(0.2).unwrap();
        assert!(!beyond.certified);
        assert!(asymptotic_constant_eps(-0.1).is_err());
        assert!(asymptotic_constant_eps(f64::NAN).is_err());
    }

    #[test]
    fn general_constant_agrees_with_eps_formula() {
        for eps in [0.01, 0.125, eps_star()] {
            let g = asymptotic_constant_general(&CoefficientSpec::eps_family(eps)).unwrap();
            let e = asymptotic_constant_eps(eps).unwrap().value;
            assert!((g - e).abs() <= 1e-14);
        }
        assert!((asymptotic_constant_general(&CoefficientSpec::eps_family(0.0)).unwrap() - 1.0).abs() < 1e-15);
        let flat = CoefficientSpec {
            epsilon: 0.0,
            overrides: Default::default(),
            tail: Tail::Zero,
        };
        assert!(matches!(
            asymptotic_constant_general(&flat),
            Err(Error::NonPositiveSlope(_))
        ));
    }

    #[test]
    fn gaps_decrease_for_default_profile() {
        for m in [7u64, 13, 21, 31, 57, 73, 273, 1057] {
            let r = gap_report(&distance_profile(m, &CoefficientSpec::default()).unwrap()).unwrap();
            assert!(r.increasing && r.strictly_decreasing, "m={m}");
            assert!(r.worst_margin > 0.0);
            assert_eq!(r.min_gap_at, (m - 1) / 2 - 1);
        }
        let r = gap_report(&distance_profile(7, &CoefficientSpec::default()).unwrap()).unwrap();
        assert_eq!(r.gaps.len(), 2);
        assert!(r.gaps[0] > r.gaps[1]);
    }

    #[test]
    fn flat_profile_reported() {
        let flat = DistanceProfile {
            m: 9,
            d: vec![1.0; 4],
            source: crate::profile::ProfileSource::ClosedForm,
        };
        let r = gap_report(&flat).unwrap();
        assert!(!r.strictly_decreasing && !r.increasing);
        assert_eq!(r.violations, vec![1, 2]);
        let short = DistanceProfile { m: 5, d: vec![1.0, 2.0], ..flat };
        assert_eq!(gap_report(&short).unwrap_err(), Error::ProfileTooShort(2, 3));
    }

    #[test]
    fn secant_slope_lies_in_bracket() {
        for q in [2u64, 3, 4, 8, 16, 32, 64] {
            let m = q * q + q + 1;
            let b = slope_bracket(&CoefficientSpec::default(), m).unwrap();
            assert!(b.min_slope <= b.secant && b.secant <= b.max_slope, "q={q} {b:?}");
        }
    }

    #[test]
    fn richardson_removes_linear_term() {
        let samples: Vec<(f64, f64)> = [10.0f64, 20.0, 40.0]
            .iter()
            .map(|&m| (1.0 / m, 0.5 + 3.0 / m))
            .collect();
        for v in richardson(&samples, 1) {
            assert!((v - 0.5).abs() < 1e-14);
        }
        let quad: Vec<(f64, f64)> = [1.0f64, 0.5, 0.25]
            .iter()
            .map(|&h| (h, 2.0 - h + 4.0 * h * h))
            .collect();
        assert!((polynomial_extrapolate(&quad).unwrap() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn table_rows_and_csv() {
        let rows = convergence_table(&[4, 8], &CoefficientSpec::default()).unwrap();
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert!((r.diam - r.d_n / r.gap).abs() < 1e-12 * r.diam);
            assert!((r.diam_over_n2 - r.diam / (r.n * r.n) as f64).abs() < 1e-15);
        }
        assert!(convergence_table(&[6], &CoefficientSpec::default()).is_err());
        let mut buf = Vec::new();
        write_table_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("q,m,n,d_N,gap,diam,diam_over_m,diam_over_n2,deviation,limit"));
        assert_eq!(text.lines().count(), 3);
    }
}
