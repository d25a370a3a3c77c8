//! The full construction for one `q`: difference set, weights, points,
//! scaling and separation check.

use serde::{Deserialize, Serialize};

use crate::analysis::{asymptotic_constant_general, gap_report};
use crate::embedding::{
    build_points, diameter, pairwise_distances, scale_to_unit_separation, verify_separation, PairwiseDistances,
    PointSet, SeparationReport,
};
use crate::error::Result;
use crate::finite_field::{detect_prime_power, DEFAULT_TABLE_BOUND};
use crate::profile::{build_weights, default_depth, distance_profile, CoefficientSpec, DistanceProfile, WeightVector};
use crate::singer::{singer_difference_set_with_bound, DifferenceSet, SeparationIndex};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstructOptions {
    /// Truncation depth for the weights; `None` uses [`default_depth`].
    pub depth: Option<u64>,
    pub table_bound: u64,
    pub tolerance: f64,
    /// When false the unscaled points are kept, and the separation check
    /// is expected to fail.
    pub scale: bool,
}

impl Default for ConstructOptions {
    fn default() -> Self {
        ConstructOptions {
            depth: None,
            table_bound: DEFAULT_TABLE_BOUND,
            tolerance: DEFAULT_TOLERANCE,
            scale: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionSummary {
    pub q: u64,
    pub m: u64,
    pub n: u64,
    pub pairs: u64,
    pub dimension: usize,
    pub scale: f64,
    pub d_n: f64,
    pub gap: f64,
    /// `d_N / (d_N - d_{N-1})` from the closed-form profile.
    pub predicted_diameter: f64,
    /// Largest measured distance among the (possibly scaled) points.
    pub measured_diameter: f64,
    pub diameter_separation: u64,
    pub diam_over_m: f64,
    pub diam_over_n2: f64,
    /// Asymptotic constant of the spec, when it has one.
    pub limit: Option<f64>,
    /// `|diam/m - limit|`.
    pub deviation: Option<f64>,
    pub separation_pass: bool,
    pub min_difference: Option<f64>,
    pub min_location: Option<(u64, u64)>,
    pub violations: usize,
    pub gaps_strictly_decreasing: bool,
    pub weights_positive: bool,
    pub truncation_bound: f64,
}

#[derive(Debug, Clone)]
pub struct Construction {
    pub set: DifferenceSet,
    pub index: SeparationIndex,
    pub weights: WeightVector,
    pub profile: DistanceProfile,
    /// Scaled so that sorted distances are at least one apart, unless
    /// scaling was turned off.
    pub points: PointSet,
    pub distances: PairwiseDistances,
    pub separation: SeparationReport,
    pub summary: ConstructionSummary,
}

pub fn construct(q: u64, spec: &CoefficientSpec, options: &ConstructOptions) -> Result<Construction> {
    let pp = detect_prime_power(q)?;
    spec.validate()?;
    let set = singer_difference_set_with_bound(&pp, options.table_bound)?;
    let index = set.separation_index()?;
    let weights = build_weights(spec, pp.m, options.depth.unwrap_or_else(|| default_depth(pp.m)))?;
    let profile = distance_profile(pp.m, spec)?;
    let raw = build_points(&set, &weights)?;
    let points = if options.scale {
        scale_to_unit_separation(&raw, &profile)?
    } else {
        raw
    };
    let distances = pairwise_distances(&points, &index)?;
    let separation = verify_separation(&distances, options.tolerance);
    let gaps = gap_report(&profile)?;
    let (measured_diameter, diameter_separation) = diameter(&distances).unwrap_or((0.0, 0));
    let d_n = profile.last();
    let gap = profile.last_gap().unwrap_or(0.0);
    let predicted_diameter = d_n / gap;
    let limit = asymptotic_constant_general(spec).ok();
    let diam_over_m = predicted_diameter / pp.m as f64;
    let summary = ConstructionSummary {
        q,
        m: pp.m,
        n: pp.n,
        pairs: pp.pairs,
        dimension: points.dim(),
        scale: points.scale,
        d_n,
        gap,
        predicted_diameter,
        measured_diameter,
        diameter_separation,
        diam_over_m,
        diam_over_n2: predicted_diameter / (pp.n * pp.n) as f64,
        limit,
        deviation: limit.map(|c| (diam_over_m - c).abs()),
        separation_pass: separation.pass,
        min_difference: separation.min_difference,
        min_location: separation.min_location,
        violations: separation.violations.len(),
        gaps_strictly_decreasing: gaps.strictly_decreasing,
        weights_positive: weights.strictly_positive(),
        truncation_bound: weights.truncation_bound,
    };
    Ok(Construction {
        set,
        index,
        weights,
        profile,
        points,
        distances,
        separation,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::convergence_table;

    #[test]
    fn default_spec_small_q() {
        for q in [2u64, 3, 4, 5, 7, 8, 9] {
            let c = construct(q, &CoefficientSpec::default(), &ConstructOptions::default()).unwrap();
            let s = &c.summary;
            assert!(s.separation_pass, "q={q}");
            assert!(s.gaps_strictly_decreasing && s.weights_positive);
            assert_eq!(c.points.len() as u64, q + 1);
            assert_eq!(s.diameter_separation, (s.m - 1) / 2);
            assert!((s.measured_diameter - s.predicted_diameter).abs() <= 1e-9 * s.predicted_diameter);
            assert!((s.min_difference.unwrap() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn matches_convergence_row() {
        let spec = CoefficientSpec::default();
        let c = construct(16, &spec, &ConstructOptions::default()).unwrap();
        let row = &convergence_table(&[16], &spec).unwrap()[0];
        assert_eq!(c.summary.predicted_diameter, row.diam);
        assert_eq!(c.summary.diam_over_m, row.diam_over_m);
        assert_eq!(c.summary.deviation, Some(row.deviation));
    }

    #[test]
    fn unscaled_points_keep_unit_scale() {
        let options = ConstructOptions {
            scale: false,
            ..ConstructOptions::default()
        };
        let c = construct(2, &CoefficientSpec::default(), &options).unwrap();
        assert_eq!(c.summary.scale, 1.0);
        assert!(!c.summary.separation_pass);
        assert!((c.summary.measured_diameter - c.summary.d_n).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_prime_power() {
        assert!(construct(6, &CoefficientSpec::default(), &ConstructOptions::default()).is_err());
    }
}
