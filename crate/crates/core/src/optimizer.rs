//! Search over a few low odd-frequency coefficients for the smallest
//! asymptotic constant that keeps `G = sqrt(H)` increasing and concave.
//!
//! Write `c_j = 1/j^2 + delta_j` for the optimized frequencies. The constant
//! is `1 + 8 sum(delta_j) / pi^2`, so the search looks for the feasible
//! `delta` with the most negative sum. Directions are normalized to
//! `sum(u) = -1`; along `delta = t u` the concavity numerator at each grid
//! angle is a quadratic in `t`, which gives the exact (grid) feasibility
//! boundary `t*(u)` in one pass. Nelder–Mead then maximizes `t*` over
//! directions.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{asymptotic_constant_general, concavity_certificate_with_margin, ConcavityCertificate, DEFAULT_GRID};
use crate::error::{Error, Result};
use crate::format::real;
use crate::pipeline::{construct, ConstructOptions, ConstructionSummary};
use crate::profile::CoefficientSpec;

pub const MAX_FREQUENCY: u64 = 10_001;
pub const MAX_FREQUENCIES: usize = 32;

fn default_frequencies() -> Vec<u64> {
    vec![1, 3, 5, 7, 9, 11]
}
fn default_grid() -> usize {
    DEFAULT_GRID
}
fn default_margin() -> f64 {
    1e-6
}
fn default_max_iterations() -> usize {
    3000
}
fn default_restarts() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "default_frequencies")]
    pub frequencies: Vec<u64>,
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    /// Required `2HH'' - H'^2 <= -margin` on the grid.
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Simplex iterations per restart.
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            frequencies: default_frequencies(),
            grid_size: default_grid(),
            margin: default_margin(),
            max_iterations: default_max_iterations(),
            restarts: default_restarts(),
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let mut seen = BTreeSet::new();
        for &j in &self.frequencies {
            if j % 2 == 0 || j > MAX_FREQUENCY {
                return bad(format!("frequency {j} must be odd and at most {MAX_FREQUENCY}"));
            }
            if !seen.insert(j) {
                return bad(format!("frequency {j} listed twice"));
            }
        }
        if self.frequencies.len() > MAX_FREQUENCIES {
            return bad(format!("at most {MAX_FREQUENCIES} frequencies"));
        }
        if !(1000..=10_000_000).contains(&self.grid_size) {
            return bad(format!("grid size {} not in [1000, 10^7]", self.grid_size));
        }
        if !self.margin.is_finite() || self.margin < 0.0 {
            return bad(format!("margin {} must be finite and nonnegative", self.margin));
        }
        if self.restarts == 0 || self.max_iterations == 0 {
            return bad("restarts and max_iterations must be positive".into());
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let config: OptimizerConfig = serde_json::from_str(s)?;
        config.validate()?;
        Ok(config)
    }
}

/// `H(pi) / (pi H'(pi))` for a spec with `c_j >= 0` that passes the
/// concavity certificate (margin 0, grid `10^5`); `+inf` otherwise.
pub fn objective(spec: &CoefficientSpec) -> f64 {
    let feasible = spec.validate().is_ok()
        && spec.is_nonnegative()
        && concavity_certificate_with_margin(spec, DEFAULT_GRID, 0.0).is_ok_and(|c| c.pass);
    if !feasible {
        return f64::INFINITY;
    }
    asymptotic_constant_general(spec).unwrap_or(f64::INFINITY)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub nonnegative: bool,
    /// Absent when the spec is structurally invalid.
    pub certificate: Option<ConcavityCertificate>,
}

pub fn feasibility(spec: &CoefficientSpec, config: &OptimizerConfig) -> Feasibility {
    let nonnegative = spec.validate().is_ok() && spec.is_nonnegative();
    let certificate = concavity_certificate_with_margin(spec, config.grid_size, config.margin).ok();
    Feasibility {
        feasible: nonnegative && certificate.as_ref().is_some_and(|c| c.pass),
        nonnegative,
        certificate,
    }
}

/// Per-angle data for the ray boundary computation.
struct RayTables {
    freqs: Vec<f64>,
    /// Row-major, one row of `k` values per grid angle.
    one_minus_cos: Vec<f64>,
    j2_cos: Vec<f64>,
    j_sin: Vec<f64>,
    a0: Vec<f64>,
    margin: f64,
}

impl RayTables {
    fn new(freqs: &[u64], grid: usize, margin: f64) -> Self {
        let k = freqs.len();
        let mut t = RayTables {
            freqs: freqs.iter().map(|&j| j as f64).collect(),
            one_minus_cos: Vec::with_capacity(k * grid),
            j2_cos: Vec::with_capacity(k * grid),
            j_sin: Vec::with_capacity(k * grid),
            a0: Vec::with_capacity(grid),
            margin,
        };
        for i in 1..grid {
            let theta = PI * i as f64 / grid as f64;
            t.a0.push(PI / 4.0 * theta);
            for &j in &t.freqs {
                let (s, c) = (j * theta).sin_cos();
                t.one_minus_cos.push(1.0 - c);
                t.j2_cos.push(j * j * c);
                t.j_sin.push(j * s);
            }
        }
        t
    }

    /// Largest `t` such that `delta = t u` keeps `c_j >= 0`, `H > 0`,
    /// `H' > 0` and the numerator below `-margin` at every grid angle.
    fn boundary(&self, u: &[f64]) -> f64 {
        let k = self.freqs.len();
        let p0 = PI / 4.0;
        let c = self.margin - p0 * p0;
        if c >= 0.0 {
            return 0.0;
        }
        let mut t = f64::INFINITY;
        for (&j, &ui) in self.freqs.iter().zip(u) {
            if ui < 0.0 {
                t = t.min(1.0 / (j * j * -ui));
            }
        }
        for (row, &a0) in self.a0.iter().enumerate() {
            let span = row * k..(row + 1) * k;
            let (mut a1, mut b1, mut p1) = (0.0, 0.0, 0.0);
            for (i, &ui) in u.iter().enumerate() {
                a1 += ui * self.one_minus_cos[span.start + i];
                b1 += ui * self.j2_cos[span.start + i];
                p1 += ui * self.j_sin[span.start + i];
            }
            debug_assert_eq!(span.len(), u.len());
            if a1 < 0.0 {
                t = t.min(-a0 / a1);
            }
            if p1 < 0.0 {
                t = t.min(-p0 / p1);
            }
            // numerator + margin = A t^2 + B t + C, negative at t = 0
            let a = 2.0 * a1 * b1 - p1 * p1;
            let b = 2.0 * (a0 * b1 - p0 * p1);
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                let den = b + disc.sqrt();
                if den > 0.0 {
                    t = t.min(-2.0 * c / den);
                }
            }
        }
        t
    }
}

fn constant_from_t(t: f64) -> f64 {
    1.0 - 8.0 * t / (PI * PI)
}

/// `u` from the free coordinates: the first frequency takes `-1 - sum(x)`.
fn direction(x: &[f64]) -> Vec<f64> {
    let mut u = Vec::with_capacity(x.len() + 1);
    u.push(-1.0 - x.iter().sum::<f64>());
    u.extend_from_slice(x);
    u
}

struct Simplex {
    best_x: Vec<f64>,
    best_f: f64,
    iterations: usize,
    evaluations: usize,
}

/// Nelder–Mead with dimension-adapted coefficients, restarted from the best
/// vertex after each convergence until a restart stops improving.
fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    steps: &[f64],
    max_iterations: usize,
    mut on_iteration: impl FnMut(f64),
) -> Simplex {
    let d = x0.len();
    let dn = d as f64;
    let (alpha, beta, gamma, shrink) = if d <= 2 {
        (1.0, 2.0, 0.5, 0.5)
    } else {
        (1.0, 1.0 + 2.0 / dn, 0.75 - 1.0 / (2.0 * dn), 1.0 - 1.0 / dn)
    };
    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        f(x)
    };
    let mut best_x = x0.to_vec();
    let mut best_f = eval(x0);
    let mut iterations = 0;
    let mut scale = 1.0;
    while iterations < max_iterations {
        let start_f = best_f;
        let mut pts: Vec<(Vec<f64>, f64)> = vec![(best_x.clone(), best_f)];
        for i in 0..d {
            let mut x = best_x.clone();
            x[i] += scale * steps[i];
            let fx = eval(&x);
            pts.push((x, fx));
        }
        loop {
            pts.sort_by(|a, b| a.1.total_cmp(&b.1));
            if pts[0].1 < best_f {
                best_f = pts[0].1;
                best_x = pts[0].0.clone();
            }
            let spread = pts[d].1 - pts[0].1;
            let size = pts[1..]
                .iter()
                .flat_map(|p| p.0.iter().zip(&pts[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if iterations >= max_iterations || (spread <= 1e-15 && size <= 1e-9) {
                break;
            }
            iterations += 1;
            on_iteration(best_f);
            let centroid: Vec<f64> = (0..d)
                .map(|i| pts[..d].iter().map(|p| p.0[i]).sum::<f64>() / dn)
                .collect();
            let along = |coef: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&pts[d].0)
                    .map(|(c, w)| c + coef * (c - w))
                    .collect()
            };
            let xr = along(alpha);
            let fr = eval(&xr);
            if fr < pts[0].1 {
                let xe = along(alpha * beta);
                let fe = eval(&xe);
                pts[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < pts[d - 1].1 {
                pts[d] = (xr, fr);
            } else {
                let (xc, fc) = if fr < pts[d].1 {
                    let xc = along(alpha * gamma);
                    let fc = eval(&xc);
                    (xc, fc)
                } else {
                    let xc = along(-gamma);
                    let fc = eval(&xc);
                    (xc, fc)
                };
                if fc < pts[d].1.min(fr) {
                    pts[d] = (xc, fc);
                } else {
                    let x_best = pts[0].0.clone();
                    for p in pts.iter_mut().skip(1) {
                        let x: Vec<f64> = x_best.iter().zip(&p.0).map(|(b, v)| b + shrink * (v - b)).collect();
                        let fx = eval(&x);
                        *p = (x, fx);
                    }
                }
            }
        }
        if !(best_f < start_f - 1e-14) && scale < 1.0 {
            break;
        }
        scale *= 0.25;
        if scale < 1e-6 {
            break;
        }
    }
    Simplex {
        best_x,
        best_f,
        iterations,
        evaluations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub restart: usize,
    /// Best constant found so far, over all restarts up to this point.
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyCoefficient {
    pub j: u64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub config: OptimizerConfig,
    pub spec: CoefficientSpec,
    pub coefficients: Vec<FrequencyCoefficient>,
    pub constant: f64,
    pub certificate: ConcavityCertificate,
    pub best_restart: usize,
    pub iterations: usize,
    pub evaluations: usize,
    pub trace: Vec<TraceEntry>,
}

impl OptimizationResult {
    /// Columns `iteration,restart,objective`.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "restart", "objective"])?;
        for e in &self.trace {
            w.write_record([e.iteration.to_string(), e.restart.to_string(), real(e.objective)])?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(())
    }
}

fn spec_from_deltas(freqs: &[u64], deltas: &[f64]) -> CoefficientSpec {
    let mut spec = CoefficientSpec::eps_family(0.0);
    let mut overrides = BTreeMap::new();
    for (&j, &d) in freqs.iter().zip(deltas) {
        if j == 1 && d <= 0.0 {
            spec.epsilon = -d;
        } else {
            overrides.insert(j, (1.0 / (j as f64 * j as f64) + d).max(0.0));
        }
    }
    spec.overrides = overrides;
    spec
}

struct Run {
    x: Vec<f64>,
    t: f64,
    trace: Vec<f64>,
    iterations: usize,
    evaluations: usize,
}

pub fn optimize(config: &OptimizerConfig) -> Result<OptimizationResult> {
    config.validate()?;
    let mut freqs = config.frequencies.clone();
    freqs.sort_unstable();
    if freqs.is_empty() {
        let spec = CoefficientSpec::eps_family(0.0);
        let certificate = concavity_certificate_with_margin(&spec, config.grid_size, config.margin)?;
        if !certificate.pass {
            return Err(Error::NoFeasiblePoint("the base profile fails the margin".into()));
        }
        return Ok(OptimizationResult {
            config: config.clone(),
            constant: asymptotic_constant_general(&spec)?,
            spec,
            coefficients: Vec::new(),
            certificate,
            best_restart: 0,
            iterations: 0,
            evaluations: 0,
            trace: Vec::new(),
        });
    }
    let tables = RayTables::new(&freqs, config.grid_size, config.margin);
    if config.margin >= PI * PI / 16.0 {
        return Err(Error::NoFeasiblePoint("the base profile fails the margin".into()));
    }
    let dim = freqs.len() - 1;
    let steps: Vec<f64> = freqs[1..].iter().map(|&j| 0.1 / j as f64).collect();
    let runs: Vec<Run> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let x0: Vec<f64> = if r == 0 {
                vec![0.0; dim]
            } else {
                steps.iter().map(|s| rng.gen_range(-2.0..2.0) * s).collect()
            };
            if dim == 0 {
                return Run {
                    t: tables.boundary(&direction(&x0)),
                    x: x0,
                    trace: Vec::new(),
                    iterations: 0,
                    evaluations: 1,
                };
            }
            let mut trace = Vec::new();
            let s = nelder_mead(
                |x| -tables.boundary(&direction(x)),
                &x0,
                &steps,
                config.max_iterations,
                |f| trace.push(constant_from_t(-f)),
            );
            Run {
                x: s.best_x,
                t: -s.best_f,
                trace,
                iterations: s.iterations,
                evaluations: s.evaluations,
            }
        })
        .collect();

    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.t > runs[best].t {
            best = i;
        }
    }
    let mut trace = Vec::new();
    let mut running = f64::INFINITY;
    for (r, run) in runs.iter().enumerate() {
        for &v in &run.trace {
            running = running.min(v);
            trace.push(TraceEntry {
                iteration: trace.len() + 1,
                restart: r,
                objective: running,
            });
        }
    }
    let u = direction(&runs[best].x);
    let t_star = runs[best].t;
    // step back inside the boundary until the independent certificate agrees
    for backoff in [1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5] {
        let t = t_star * (1.0 - backoff);
        let deltas: Vec<f64> = u.iter().map(|ui| t * ui).collect();
        let spec = spec_from_deltas(&freqs, &deltas);
        let feas = feasibility(&spec, config);
        if !feas.feasible {
            continue;
        }
        let constant = asymptotic_constant_general(&spec)?;
        let coefficients = freqs
            .iter()
            .map(|&j| FrequencyCoefficient { j, c: spec.coefficient(j) })
            .collect();
        return Ok(OptimizationResult {
            config: config.clone(),
            spec,
            coefficients,
            constant,
            certificate: feas.certificate.expect("feasible specs have a certificate"),
            best_restart: best,
            iterations: runs.iter().map(|r| r.iterations).sum(),
            evaluations: runs.iter().map(|r| r.evaluations).sum(),
            trace,
        });
    }
    Err(Error::NoFeasiblePoint("no certified point near the search optimum".into()))
}

/// Runs the whole construction at `q` with the optimized spec.
pub fn end_to_end_validate(result: &OptimizationResult, q: u64) -> Result<ConstructionSummary> {
    Ok(construct(q, &result.spec, &ConstructOptions::default())?.summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::eps_star;

    fn quick(frequencies: Vec<u64>, margin: f64) -> OptimizerConfig {
        OptimizerConfig {
            frequencies,
            grid_size: 20_000,
            margin,
            max_iterations: 400,
            restarts: 2,
            seed: 7,
        }
    }

    #[test]
    fn objective_examples() {
        assert!((objective(&CoefficientSpec::default()) - 0.898679).abs() < 1e-6);
        assert!((objective(&CoefficientSpec::eps_family(eps_star() - 1e-12)) - 0.885589).abs() < 1e-6);
        assert_eq!(objective(&CoefficientSpec::eps_family(0.0)), 1.0);
        assert_eq!(objective(&CoefficientSpec::eps_family(0.18)), f64::INFINITY);
        let mut neg = CoefficientSpec::default();
        neg.overrides.insert(3, -0.01);
        assert_eq!(objective(&neg), f64::INFINITY);
    }

    #[test]
    fn feasibility_examples() {
        let config = OptimizerConfig::default();
        assert!(feasibility(&CoefficientSpec::default(), &config).feasible);
        assert!(feasibility(&CoefficientSpec::eps_family(0.14), &config).feasible);
        assert!(!feasibility(&CoefficientSpec::eps_family(0.18), &config).feasible);
        let mut neg = CoefficientSpec::default();
        neg.overrides.insert(5, -1e-9);
        let f = feasibility(&neg, &config);
        assert!(!f.feasible && !f.nonnegative);
    }

    #[test]
    fn boundary_matches_direct_scan() {
        // along a fixed direction, t* separates certified and failing specs
        let freqs = [1u64, 3, 5];
        let tables = RayTables::new(&freqs, 20_000, 1e-6);
        let u = [-0.9, -0.05, -0.05];
        let t = tables.boundary(&u);
        assert!(t > 0.0 && t.is_finite());
        let at = |s: f64| {
            let spec = spec_from_deltas(&freqs, &u.map(|x| s * x));
            concavity_certificate_with_margin(&spec, 20_000, 1e-6).unwrap().pass && spec.is_nonnegative()
        };
        assert!(at(t * (1.0 - 1e-9)));
        assert!(!at(t * (1.0 + 1e-6)));
    }

    #[test]
    fn single_frequency_recovers_threshold() {
        let r = optimize(&quick(vec![1], 0.0)).unwrap();
        assert!((r.spec.epsilon - eps_star()).abs() < 1e-6);
        let closed = 1.0 - 8.0 * eps_star() / (PI * PI);
        assert!((r.constant - closed).abs() < 1e-8, "{}", r.constant - closed);
        assert!(r.certificate.pass);
    }

    #[test]
    fn empty_frequency_set_is_the_base_profile() {
        let r = optimize(&quick(vec![], 1e-6)).unwrap();
        assert_eq!(r.constant, 1.0);
        assert!(r.trace.is_empty());
    }

    #[test]
    fn two_frequencies_beat_one_and_are_reproducible() {
        let config = quick(vec![1, 3], 1e-6);
        let a = optimize(&config).unwrap();
        let b = optimize(&config).unwrap();
        assert_eq!(a, b);
        assert!(a.constant < 0.8856);
        assert!(a.certificate.pass && a.certificate.required_margin == 1e-6);
        assert!(a.trace.windows(2).all(|w| w[1].objective <= w[0].objective));
        assert!(a.constant < 1.0);
        // the certificate is recomputed from the spec alone
        let fresh = concavity_certificate_with_margin(&a.spec, config.grid_size, config.margin).unwrap();
        assert_eq!(fresh, a.certificate);
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        for bad in [
            r#"{"frequencies":[2]}"#,
            r#"{"frequencies":[1,1]}"#,
            r#"{"margin":-1}"#,
            r#"{"grid_size":10}"#,
            r#"{"restarts":0}"#,
            r#"{"unknown":1}"#,
        ] {
            assert!(OptimizerConfig::from_json_str(bad).is_err(), "{bad}");
        }
        let c = OptimizerConfig::from_json_str(r#"{"frequencies":[1,3],"seed":4}"#).unwrap();
        assert_eq!(c.frequencies, vec![1, 3]);
        assert_eq!(c.grid_size, DEFAULT_GRID);
    }

    #[test]
    fn oversized_margin_has_no_feasible_point() {
        let config = quick(vec![1, 3], 1.0);
        assert!(matches!(optimize(&config), Err(Error::NoFeasiblePoint(_))));
    }
}
