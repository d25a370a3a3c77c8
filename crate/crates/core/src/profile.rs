//! Odd-frequency coefficient families, the squared-distance profile `H`, its
//! closed forms, the residue-class weights `W_r` and the grid distances
//! `d_s = sqrt(H(2 pi s / m))`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::real;

pub const DEFAULT_EPSILON: f64 = 0.125;

/// Coefficients used for odd frequencies that are not overridden.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    /// `c_j = 1/j^2`.
    #[default]
    InverseSquare,
    /// `c_j = 0`.
    Zero,
}

/// The coefficients `c_j` for odd `j`: `c_1 = 1 - epsilon`, the tail rule for
/// `j >= 3`, and explicit overrides on top of both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub overrides: BTreeMap<u64, f64>,
    #[serde(default)]
    pub tail: Tail,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl Default for CoefficientSpec {
    fn default() -> Self {
        Self::eps_family(DEFAULT_EPSILON)
    }
}

impl CoefficientSpec {
    pub fn eps_family(epsilon: f64) -> Self {
        CoefficientSpec {
            epsilon,
            overrides: BTreeMap::new(),
            tail: Tail::InverseSquare,
        }
    }

    /// `1/j^2` tail with the given overrides (epsilon is 0, so `c_1 = 1`
    /// unless overridden).
    pub fn with_overrides(overrides: BTreeMap<u64, f64>) -> Self {
        CoefficientSpec {
            epsilon: 0.0,
            overrides,
            tail: Tail::InverseSquare,
        }
    }

    pub fn tail_coefficient(&self, j: u64) -> f64 {
        match self.tail {
            Tail::InverseSquare if j % 2 == 1 => 1.0 / (j as f64 * j as f64),
            _ => 0.0,
        }
    }

    pub fn coefficient(&self, j: u64) -> f64 {
        if j % 2 == 0 {
            return 0.0;
        }
        if let Some(&c) = self.overrides.get(&j) {
            return c;
        }
        if j == 1 {
            return 1.0 - self.epsilon;
        }
        self.tail_coefficient(j)
    }

    /// True for the plain one-parameter family: no overrides, `1/j^2` tail.
    pub fn is_eps_family(&self) -> bool {
        self.overrides.is_empty() && self.tail == Tail::InverseSquare
    }

    pub fn max_override(&self) -> u64 {
        self.overrides.keys().next_back().copied().unwrap_or(0)
    }

    /// Structural checks: finite epsilon in `[0, 1]`, odd override indices,
    /// finite override values. Signs are checked by [`Self::is_nonnegative`].
    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_finite() || !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidSpec(format!("epsilon {} not in [0, 1]", self.epsilon)));
        }
        for (&j, &c) in &self.overrides {
            if j % 2 == 0 {
                return Err(Error::InvalidSpec(format!("override index {j} is not odd")));
            }
            if !c.is_finite() {
                return Err(Error::InvalidSpec(format!("override c_{j} is not finite")));
            }
        }
        Ok(())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.coefficient(1) >= 0.0 && self.overrides.values().all(|&c| c >= 0.0)
    }

    /// Parses and fully validates the JSON form, including `c_j >= 0`.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: CoefficientSpec = serde_json::from_str(s)?;
        spec.validate()?;
        if !spec.is_nonnegative() {
            return Err(Error::InvalidSpec("negative coefficient".into()));
        }
        Ok(spec)
    }

    /// Finite representation of `H` and its derivatives.
    pub fn curve(&self) -> ProfileCurve {
        let mut terms = Vec::new();
        let c1 = self.coefficient(1) - self.tail_coefficient(1);
        if c1 != 0.0 {
            terms.push((1.0, c1));
        }
        for (&j, &c) in &self.overrides {
            if j != 1 {
                let delta = c - self.tail_coefficient(j);
                if delta != 0.0 {
                    terms.push((j as f64, delta));
                }
            }
        }
        ProfileCurve {
            slope: match self.tail {
                Tail::InverseSquare => PI / 4.0,
                Tail::Zero => 0.0,
            },
            terms,
        }
    }
}

/// `H(theta) = slope * theta + sum_j delta_j (1 - cos(j theta))` on `[0, pi]`.
///
/// With the `1/j^2` tail, `slope = pi/4` comes from summing the odd part of
/// `sum (1 - cos k theta)/k^2`, and each `delta_j = c_j - 1/j^2` is the
/// deviation from that base profile. With the zero tail, `slope = 0` and
/// `delta_j = c_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCurve {
    pub slope: f64,
    /// `(j, delta_j)` pairs.
    pub terms: Vec<(f64, f64)>,
}

impl ProfileCurve {
    pub fn h(&self, theta: f64) -> f64 {
        self.terms
            .iter()
            .fold(self.slope * theta, |acc, &(j, d)| acc + d * (1.0 - (j * theta).cos()))
    }

    pub fn h1(&self, theta: f64) -> f64 {
        self.terms
            .iter()
            .fold(self.slope, |acc, &(j, d)| acc + d * j * (j * theta).sin())
    }

    pub fn h2(&self, theta: f64) -> f64 {
        self.terms
            .iter()
            .fold(0.0, |acc, &(j, d)| acc + d * j * j * (j * theta).cos())
    }

    pub fn h3(&self, theta: f64) -> f64 {
        self.terms
            .iter()
            .fold(0.0, |acc, &(j, d)| acc - d * j * j * j * (j * theta).sin())
    }

    /// `2 H H'' - H'^2`; `G = sqrt(H)` is strictly concave where this is negative.
    pub fn concavity_numerator(&self, theta: f64) -> f64 {
        let (h, h1, h2) = (self.h(theta), self.h1(theta), self.h2(theta));
        2.0 * h * h2 - h1 * h1
    }

    pub fn g(&self, theta: f64) -> f64 {
        self.h(theta).sqrt()
    }

    pub fn g1(&self, theta: f64) -> f64 {
        self.h1(theta) / (2.0 * self.g(theta))
    }

    pub fn g2(&self, theta: f64) -> f64 {
        self.concavity_numerator(theta) / (4.0 * self.h(theta).powf(1.5))
    }
}

fn check_domain(theta: f64, upper: f64) -> Result<()> {
    if theta.is_nan() || !(0.0..=upper).contains(&theta) {
        return Err(Error::DomainError { theta, upper });
    }
    Ok(())
}

/// `pi theta / 4 - epsilon (1 - cos theta)` for `theta` in `[0, pi]`.
pub fn h_closed(theta: f64, epsilon: f64) -> Result<f64> {
    check_domain(theta, PI)?;
    Ok(PI * theta / 4.0 - epsilon * (1.0 - theta.cos()))
}

/// `pi theta / 2 - theta^2 / 4`, the sum of `(1 - cos k theta)/k^2` over
/// `k >= 1`, for `theta` in `[0, 2 pi]`.
pub fn f_closed(theta: f64) -> Result<f64> {
    check_domain(theta, 2.0 * PI)?;
    Ok(PI * theta / 2.0 - theta * theta / 4.0)
}

/// A truncated series value with a rigorous bound on the omitted tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    pub tail_bound: f64,
}

/// Upper bound on `sum_{odd j > depth} 1/j^2`: each term is at most half the
/// integral of `1/x^2` over `[j-1, j+1]`, and those intervals lie in
/// `[depth, inf)` without overlap.
pub fn inverse_square_tail_bound(depth: u64) -> f64 {
    1.0 / (2.0 * depth as f64)
}

/// Partial sum of `c_j (1 - cos j theta)` over odd `j <= depth`.
pub fn h_series(theta: f64, spec: &CoefficientSpec, depth: u64) -> Result<SeriesValue> {
    check_domain(theta, PI)?;
    if depth < spec.max_override().max(1) {
        return Err(Error::TruncationTooShallow {
            depth,
            needed: spec.max_override().max(1),
        });
    }
    let top = if depth % 2 == 1 { depth } else { depth - 1 };
    let value = (1..=top)
        .rev()
        .step_by(2)
        .map(|j| spec.coefficient(j) * (1.0 - (j as f64 * theta).cos()))
        .sum();
    let tail_bound = match spec.tail {
        Tail::InverseSquare => 2.0 * inverse_square_tail_bound(depth),
        Tail::Zero => 0.0,
    };
    Ok(SeriesValue { value, tail_bound })
}

/// `|sum_{odd j <= depth} (1 - cos j theta)/j^2 - pi theta / 4|`.
pub fn odd_part_identity_check(theta: f64, depth: u64) -> Result<f64> {
    let partial = h_series(theta, &CoefficientSpec::eps_family(0.0), depth)?;
    Ok((partial.value - PI * theta / 4.0).abs())
}

/// Angle of grid index `s` on the `m`-gon, `2 pi s / m`.
pub fn grid_angle(s: u64, m: u64) -> f64 {
    2.0 * PI * s as f64 / m as f64
}

/// Residue-class weights `W_r = sum_{odd j = ±r mod m} c_j` for `r = 1..(m-1)/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub m: u64,
    /// `weights[r - 1] = W_r`.
    pub weights: Vec<f64>,
    /// Bound on the per-entry error from the omitted frequencies.
    pub truncation_bound: f64,
    /// Frequencies up to this depth are summed term by term.
    pub depth: u64,
}

impl WeightVector {
    pub fn is_degenerate(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0)
    }

    pub fn strictly_positive(&self) -> bool {
        self.weights.iter().all(|&w| w > 0.0)
    }

    pub fn get(&self, r: u64) -> f64 {
        self.weights[(r - 1) as usize]
    }
}

/// Default summation depth for `m`: `max(10^6, 100 m)`.
pub fn default_depth(m: u64) -> u64 {
    (100 * m).max(1_000_000)
}

/// `sum_{k >= 0} 1/(k + x)^2` for `x >= 1` by Euler-Maclaurin through the
/// `B_6` term, with a bound on the remainder.
fn inverse_square_shifted_sum(x: f64) -> (f64, f64) {
    let x2 = x * x;
    let x3 = x2 * x;
    let x5 = x3 * x2;
    let x7 = x5 * x2;
    let value = 1.0 / x + 1.0 / (2.0 * x2) + 1.0 / (6.0 * x3) - 1.0 / (30.0 * x5) + 1.0 / (42.0 * x7);
    // 2 zeta(7) / (2 pi)^7 * 7! / x^8 < 0.026 / x^8
    let remainder = 0.03 / (x7 * x);
    (value, remainder)
}

/// Bucket-sums `c_j` for odd `j <= depth` into `r = min(j mod m, m - j mod m)`,
/// skipping multiples of `m`. Frequencies above `depth` follow the tail rule;
/// for the `1/j^2` tail they are added per residue class mod `2m` in closed
/// summation form, so `truncation_bound` reflects only that remainder.
pub fn build_weights(spec: &CoefficientSpec, m: u64, depth: u64) -> Result<WeightVector> {
    if m < 3 || m % 2 == 0 {
        return Err(Error::InvalidModulus(m));
    }
    let needed = m.max(spec.max_override());
    if depth < needed {
        return Err(Error::TruncationTooShallow { depth, needed });
    }
    let half = ((m - 1) / 2) as usize;
    let mut weights = vec![0.0f64; half];
    let bucket = |j: u64| -> Option<usize> {
        let k = j % m;
        (k != 0).then(|| (k.min(m - k) - 1) as usize)
    };

    let mut truncation_bound = 0.0;
    if spec.tail == Tail::InverseSquare {
        let period = 2 * m;
        let mut per_entry = vec![0.0f64; half];
        for a in (1..period).step_by(2) {
            let Some(r) = bucket(a) else { continue };
            // first j > depth with j = a (mod 2m)
            let j0 = depth + 1 + (a + period - (depth + 1) % period) % period;
            let x = j0 as f64 / period as f64;
            let scale = 1.0 / (period as f64 * period as f64);
            let (sum, rem) = inverse_square_shifted_sum(x);
            weights[r] += scale * sum;
            per_entry[r] += scale * rem;
        }
        truncation_bound = per_entry.into_iter().fold(0.0, f64::max);
    }

    // smallest terms first
    let top = if depth % 2 == 1 { depth } else { depth - 1 };
    for j in (1..=top).rev().step_by(2) {
        if let Some(r) = bucket(j) {
            weights[r] += spec.coefficient(j);
        }
    }
    Ok(WeightVector {
        m,
        weights,
        truncation_bound,
        depth,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSource {
    ClosedForm,
    Weights,
}

/// Target distances `d_1, ..., d_N` for separations `s = 1..N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceProfile {
    pub m: u64,
    /// `d[s - 1] = d_s`.
    pub d: Vec<f64>,
    pub source: ProfileSource,
}

impl DistanceProfile {
    pub fn pairs(&self) -> usize {
        self.d.len()
    }

    pub fn get(&self, s: u64) -> f64 {
        self.d[(s - 1) as usize]
    }

    pub fn last(&self) -> f64 {
        *self.d.last().expect("profile is nonempty")
    }

    /// `d_N - d_{N-1}`.
    pub fn last_gap(&self) -> Option<f64> {
        let n = self.d.len();
        (n >= 2).then(|| self.d[n - 1] - self.d[n - 2])
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.d.windows(2).all(|w| w[1] > w[0])
    }

    /// Columns `s,theta,d_s`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["s", "theta", "d_s"])?;
        for (i, &d) in self.d.iter().enumerate() {
            let s = i as u64 + 1;
            w.write_record([s.to_string(), real(grid_angle(s, self.m)), real(d)])?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(())
    }

    /// `d_s = sqrt(sum_r W_r (1 - cos(2 pi r s / m)))`, the profile actually
    /// carried by the weights.
    pub fn from_weights(weights: &WeightVector) -> Self {
        let m = weights.m;
        let d = (1..=weights.weights.len() as u64)
            .map(|s| {
                weights
                    .weights
                    .iter()
                    .enumerate()
                    .map(|(i, &w)| {
                        let k = (i as u64 + 1) * s % m;
                        w * (1.0 - grid_angle(k, m).cos())
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        DistanceProfile {
            m,
            d,
            source: ProfileSource::Weights,
        }
    }
}

/// `d_s = sqrt(H(2 pi s / m))` from the finite closed form of `H`.
pub fn distance_profile(m: u64, spec: &CoefficientSpec) -> Result<DistanceProfile> {
    if m < 3 || m % 2 == 0 {
        return Err(Error::InvalidModulus(m));
    }
    let curve = spec.curve();
    let d = (1..=(m - 1) / 2)
        .map(|s| {
            let theta = grid_angle(s, m);
            let h = curve.h(theta);
            if h > 0.0 {
                Ok(h.sqrt())
            } else {
                Err(Error::NonPositiveH { theta, value: h })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DistanceProfile {
        m,
        d,
        source: ProfileSource::ClosedForm,
    })
}
