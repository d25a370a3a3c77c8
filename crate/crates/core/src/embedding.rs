//! Points on a weighted product of regular `m`-gons.
//!
//! Residue `t` maps to the vector whose `r`-th planar block is
//! `sqrt(W_r / 2) (cos(2 pi r t / m), sin(2 pi r t / m))`, so the squared
//! distance between two labels depends only on their cyclic separation `s`:
//! `sum_r W_r (1 - cos(2 pi r s / m))`.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite_field::PrimePowerSpec;
use crate::format::real;
use crate::profile::{grid_angle, DistanceProfile, WeightVector};
use crate::singer::{DifferenceSet, SeparationIndex};

/// `n` labelled points in `R^{2N}`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub spec: PrimePowerSpec,
    pub labels: Vec<u64>,
    coords: Vec<f64>,
    dim: usize,
    pub weights: WeightVector,
    /// Factor applied to the unscaled embedding; 1 before scaling.
    pub scale: f64,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_of(&self, label: u64) -> Option<&[f64]> {
        self.labels.iter().position(|&t| t == label).map(|i| self.row(i))
    }

    pub fn is_degenerate(&self) -> bool {
        self.weights.is_degenerate()
    }

    /// One row per point: label then coordinates. The first line is a
    /// `# q=.. m=.. n=.. scale=..` comment.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        PointTable {
            q: self.spec.q,
            m: self.spec.m,
            scale: self.scale,
            labels: self.labels.clone(),
            rows: (0..self.len()).map(|i| self.row(i).to_vec()).collect(),
        }
        .write_csv(out)
    }
}

/// Squared Euclidean distance.
fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn build_points(set: &DifferenceSet, weights: &WeightVector) -> Result<PointSet> {
    let m = set.m();
    if weights.m != m {
        return Err(Error::ModulusMismatch(weights.m, m));
    }
    if let Some((i, &w)) = weights.weights.iter().enumerate().find(|(_, &w)| !(w >= 0.0)) {
        return Err(Error::NegativeWeight { r: i + 1, value: w });
    }
    let radii: Vec<f64> = weights.weights.iter().map(|w| (w / 2.0).sqrt()).collect();
    let dim = 2 * radii.len();
    let mut coords = Vec::with_capacity(dim * set.elements().len());
    for &t in set.elements() {
        for (i, &rad) in radii.iter().enumerate() {
            // reduce r t mod m exactly before taking the angle
            let angle = grid_angle((i as u64 + 1) * t % m, m);
            coords.push(rad * angle.cos());
            coords.push(rad * angle.sin());
        }
    }
    Ok(PointSet {
        spec: *set.spec(),
        labels: set.elements().to_vec(),
        coords,
        dim,
        weights: weights.clone(),
        scale: 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceEntry {
    pub s: u64,
    pub t: u64,
    pub u: u64,
    pub distance: f64,
}

/// All pairwise distances, one per separation, ordered by `s`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairwiseDistances {
    pub entries: Vec<DistanceEntry>,
}

pub fn pairwise_distances(points: &PointSet, index: &SeparationIndex) -> Result<PairwiseDistances> {
    if index.m() != points.spec.m {
        return Err(Error::ModulusMismatch(index.m(), points.spec.m));
    }
    let pairs: Vec<(u64, (u64, u64))> = index.iter().collect();
    let entries = pairs
        .par_iter()
        .map(|&(s, (t, u))| {
            let a = points.row_of(t).ok_or_else(|| Error::Parse(format!("label {t} not in point set")))?;
            let b = points.row_of(u).ok_or_else(|| Error::Parse(format!("label {u} not in point set")))?;
            Ok(DistanceEntry {
                s,
                t,
                u,
                distance: dist2(a, b).sqrt(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PairwiseDistances { entries })
}

/// Multiplies every coordinate by `1 / (d_N - d_{N-1})` from the closed-form
/// profile.
pub fn scale_to_unit_separation(points: &PointSet, profile: &DistanceProfile) -> Result<PointSet> {
    if profile.m != points.spec.m {
        return Err(Error::ModulusMismatch(profile.m, points.spec.m));
    }
    let gap = profile
        .last_gap()
        .ok_or(Error::ProfileTooShort(profile.pairs(), 2))?;
    if !(gap > 0.0) {
        return Err(Error::DegenerateGap(gap));
    }
    let lambda = 1.0 / gap;
    let mut out = points.clone();
    out.coords.iter_mut().for_each(|c| *c *= lambda);
    out.scale = points.scale * lambda;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Separations of the two adjacent distances, in sorted order.
    pub lower: u64,
    pub upper: u64,
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub pass: bool,
    pub tolerance: f64,
    pub entries: usize,
    /// Smallest difference between consecutive sorted distances.
    pub min_difference: Option<f64>,
    /// Separations `(lower, upper)` where the minimum occurs.
    pub min_location: Option<(u64, u64)>,
    pub violations: Vec<Violation>,
}

/// Checks that consecutive sorted distances differ by at least `1 - tol`.
pub fn verify_separation(dists: &PairwiseDistances, tol: f64) -> SeparationReport {
    let mut sorted = dists.entries.clone();
    sorted.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.s.cmp(&b.s)));
    let mut min: Option<(f64, (u64, u64))> = None;
    let mut violations = Vec::new();
    for w in sorted.windows(2) {
        let diff = w[1].distance - w[0].distance;
        if min.map_or(true, |(m, _)| diff < m) {
            min = Some((diff, (w[0].s, w[1].s)));
        }
        if !(diff >= 1.0 - tol) {
            violations.push(Violation {
                lower: w[0].s,
                upper: w[1].s,
                difference: diff,
            });
        }
    }
    SeparationReport {
        pass: violations.is_empty(),
        tolerance: tol,
        entries: sorted.len(),
        min_difference: min.map(|m| m.0),
        min_location: min.map(|m| m.1),
        violations,
    }
}

/// Largest pairwise distance and the separation where it occurs.
pub fn diameter(dists: &PairwiseDistances) -> Option<(f64, u64)> {
    dists
        .entries
        .iter()
        .max_by(|a, b| a.distance.total_cmp(&b.distance).then(b.s.cmp(&a.s)))
        .map(|e| (e.distance, e.s))
}

impl PairwiseDistances {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Multiplies every distance by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        PairwiseDistances {
            entries: self
                .entries
                .iter()
                .map(|e| DistanceEntry {
                    distance: e.distance * factor,
                    ..*e
                })
                .collect(),
        }
    }

    /// Columns `s,t,u,distance`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["s", "t", "u", "distance"])?;
        for e in &self.entries {
            w.write_record([e.s.to_string(), e.t.to_string(), e.u.to_string(), real(e.distance)])?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(())
    }

    /// Reads the `s,t,u,distance` layout. Distances must be finite and
    /// nonnegative and each separation may appear only once.
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["s", "t", "u", "distance"] {
            return Err(Error::Parse(format!("unexpected header {:?}", headers)));
        }
        let mut entries: Vec<DistanceEntry> = Vec::new();
        for rec in rdr.deserialize() {
            let e: DistanceEntry = rec?;
            if !e.distance.is_finite() || e.distance < 0.0 {
                return Err(Error::Parse(format!("bad distance {} at s={}", e.distance, e.s)));
            }
            entries.push(e);
        }
        let mut seen: Vec<u64> = entries.iter().map(|e| e.s).collect();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Parse("repeated separation".into()));
        }
        entries.sort_by_key(|e| e.s);
        Ok(PairwiseDistances { entries })
    }
}

/// Plain coordinate table as written to / read from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PointTable {
    pub q: u64,
    pub m: u64,
    pub scale: f64,
    pub labels: Vec<u64>,
    pub rows: Vec<Vec<f64>>,
}

impl PointTable {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Parse(e.to_string());
        writeln!(
            out,
            "# q={} m={} n={} scale={}",
            self.q,
            self.m,
            self.labels.len(),
            real(self.scale)
        )
        .map_err(io)?;
        let mut w = csv::Writer::from_writer(out);
        let dim = self.rows.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((1..=dim).map(|k| format!("x{k}")));
        w.write_record(&header)?;
        for (t, row) in self.labels.iter().zip(&self.rows) {
            let mut rec = vec![t.to_string()];
            rec.extend(row.iter().map(|&x| real(x)));
            w.write_record(&rec)?;
        }
        w.flush().map_err(io)?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(mut input: R) -> Result<Self> {
        let mut first = String::new();
        input
            .read_line(&mut first)
            .map_err(|e| Error::Parse(e.to_string()))?;
        let meta = first
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| Error::Parse("missing '# q=.. m=..' line".into()))?;
        let (mut q, mut m, mut n, mut scale) = (None, None, None, None);
        for field in meta.split_whitespace() {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header field {field:?}")))?;
            let bad = |_| Error::Parse(format!("bad value for {k}"));
            match k {
                "q" => q = Some(v.parse::<u64>().map_err(|e| bad(e.to_string()))?),
                "m" => m = Some(v.parse::<u64>().map_err(|e| bad(e.to_string()))?),
                "n" => n = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "scale" => scale = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                _ => return Err(Error::Parse(format!("unknown header field {k}"))),
            }
        }
        let (Some(q), Some(m), Some(n), Some(scale)) = (q, m, n, scale) else {
            return Err(Error::Parse("header needs q, m, n and scale".into()));
        };
        let mut rdr = csv::ReaderBuilder::new().from_reader(input);
        let dim = rdr.headers()?.len().saturating_sub(1);
        let mut labels = Vec::new();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != dim + 1 {
                return Err(Error::Parse("ragged row".into()));
            }
            labels.push(
                rec[0]
                    .parse::<u64>()
                    .map_err(|e| Error::Parse(e.to_string()))?,
            );
            let row = rec
                .iter()
                .skip(1)
                .map(|x| x.parse::<f64>().map_err(|e| Error::Parse(e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        if labels.len() != n {
            return Err(Error::Parse(format!("header says n={n}, found {} rows", labels.len())));
        }
        Ok(PointTable {
            q,
            m,
            scale,
            labels,
            rows,
        })
    }

    /// Distances between labelled rows, annotated with their separations.
    pub fn distances(&self, index: &SeparationIndex) -> Result<PairwiseDistances> {
        let row = |t: u64| {
            self.labels
                .iter()
                .position(|&l| l == t)
                .map(|i| &self.rows[i])
                .ok_or_else(|| Error::Parse(format!("label {t} missing from point table")))
        };
        let entries = index
            .iter()
            .map(|(s, (t, u))| {
                Ok(DistanceEntry {
                    s,
                    t,
                    u,
                    distance: dist2(row(t)?, row(u)?).sqrt(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PairwiseDistances { entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite_field::detect_prime_power;
    use crate::profile::{build_weights, default_depth, distance_profile, h_closed, CoefficientSpec, Tail};
    use crate::singer::singer_difference_set;

    fn pipeline(q: u64) -> (DifferenceSet, SeparationIndex, WeightVector, PointSet) {
        let spec = detect_prime_power(q).unwrap();
        let set = singer_difference_set(&spec).unwrap();
        let index = set.separation_index().unwrap();
        let weights = build_weights(&CoefficientSpec::default(), spec.m, default_depth(spec.m)).unwrap();
        let points = build_points(&set, &weights).unwrap();
        (set, index, weights, points)
    }

    #[test]
    fn q2_shape_and_origin_row() {
        let (set, _, weights, points) = pipeline(2);
        assert_eq!(points.len(), 3);
        assert_eq!(points.dim(), 6);
        assert_eq!(points.scale, 1.0);
        assert!(set.elements().contains(&0));
        let row = points.row_of(0).unwrap();
        for r in 0..3 {
            assert_eq!(row[2 * r], (weights.weights[r] / 2.0).sqrt());
            assert_eq!(row[2 * r + 1], 0.0);
        }
    }

    #[test]
    fn q2_distances_increase_with_separation() {
        let (_, index, _, points) = pipeline(2);
        let d = pairwise_distances(&points, &index).unwrap();
        assert_eq!(d.len(), 3);
        assert!(d.entries.windows(2).all(|w| w[0].s < w[1].s && w[0].distance < w[1].distance));
    }

    #[test]
    fn squared_distances_match_closed_form() {
        for q in [2u64, 3, 4, 5, 8] {
            let (_, index, weights, points) = pipeline(q);
            let m = points.spec.m;
            for e in pairwise_distances(&points, &index).unwrap().entries {
                let h = h_closed(grid_angle(e.s, m), 0.125).unwrap();
                let tol = weights.truncation_bound * m as f64 + 1e-10 * h;
                assert!((e.distance.powi(2) - h).abs() <= tol, "q={q} s={}", e.s);
            }
        }
    }

    #[test]
    fn zero_weights_collapse_to_the_origin() {
        let spec = detect_prime_power(2).unwrap();
        let set = singer_difference_set(&spec).unwrap();
        let zero = CoefficientSpec {
            epsilon: 1.0,
            overrides: Default::default(),
            tail: Tail::Zero,
        };
        let w = build_weights(&zero, 7, 100).unwrap();
        let points = build_points(&set, &w).unwrap();
        assert!(points.is_degenerate());
        assert!((0..points.len()).all(|i| points.row(i).iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn rejects_bad_weights() {
        let spec = detect_prime_power(2).unwrap();
        let set = singer_difference_set(&spec).unwrap();
        let mut w = build_weights(&CoefficientSpec::default(), 7, 1000).unwrap();
        w.weights[1] = -0.5;
        assert!(matches!(build_points(&set, &w), Err(Error::NegativeWeight { r: 2, .. })));
        let w13 = build_weights(&CoefficientSpec::default(), 13, 1000).unwrap();
        assert_eq!(build_points(&set, &w13).unwrap_err(), Error::ModulusMismatch(13, 7));
    }

    #[test]
    fn scaling_makes_the_last_gap_one() {
        let (_, index, _, points) = pipeline(8);
        let profile = distance_profile(73, &CoefficientSpec::default()).unwrap();
        let scaled = scale_to_unit_separation(&points, &profile).unwrap();
        let lambda = scaled.scale;
        assert!((lambda - 1.0 / profile.last_gap().unwrap()).abs() < 1e-12 * lambda);
        let before = pairwise_distances(&points, &index).unwrap();
        let after = pairwise_distances(&scaled, &index).unwrap();
        for (a, b) in before.entries.iter().zip(&after.entries) {
            assert!((b.distance - lambda * a.distance).abs() <= 1e-12 * b.distance);
        }
        let report = verify_separation(&after, 1e-9);
        assert!(report.pass);
        assert!((report.min_difference.unwrap() - 1.0).abs() <= 1e-9);
        assert_eq!(report.min_location, Some((35, 36)));
        let (diam, s) = diameter(&after).unwrap();
        assert_eq!(s, 36);
        let expected = profile.last() / profile.last_gap().unwrap();
        assert!((diam - expected).abs() <= 1e-8 * expected);
    }

    #[test]
    fn unscaled_small_set_fails_separation() {
        let (_, index, _, points) = pipeline(2);
        let report = verify_separation(&pairwise_distances(&points, &index).unwrap(), 1e-9);
        assert!(!report.pass);
        assert_eq!(report.violations.len(), 2);
    }

    #[test]
    fn degenerate_gap_is_rejected() {
        let (_, _, _, points) = pipeline(2);
        let flat = DistanceProfile {
            m: 7,
            d: vec![1.0, 1.0, 1.0],
            source: crate::profile::ProfileSource::ClosedForm,
        };
        assert_eq!(
            scale_to_unit_separation(&points, &flat).unwrap_err(),
            Error::DegenerateGap(0.0)
        );
    }

    #[test]
    fn vacuous_and_guard_cases() {
        let one = PairwiseDistances {
            entries: vec![DistanceEntry { s: 1, t: 0, u: 1, distance: 3.0 }],
        };
        let r = verify_separation(&one, 1e-9);
        assert!(r.pass && r.min_difference.is_none());
        let twins = PairwiseDistances {
            entries: vec![
                DistanceEntry { s: 1, t: 0, u: 1, distance: 0.0 },
                DistanceEntry { s: 2, t: 0, u: 2, distance: 0.0 },
            ],
        };
        assert_eq!(diameter(&twins), Some((0.0, 1)));
        assert!(!verify_separation(&twins, 1e-9).pass);
        assert_eq!(diameter(&PairwiseDistances::default()), None);
    }

    #[test]
    fn rotation_leaves_distances_unchanged() {
        let spec = detect_prime_power(5).unwrap();
        let set = singer_difference_set(&spec).unwrap();
        let weights = build_weights(&CoefficientSpec::default(), spec.m, default_depth(spec.m)).unwrap();
        let base = pairwise_distances(&build_points(&set, &weights).unwrap(), &set.separation_index().unwrap()).unwrap();
        for c in [1u64, 7, 30] {
            let shifted: Vec<u64> = set.elements().iter().map(|x| (x + c) % spec.m).collect();
            let set2 = DifferenceSet::from_residues(spec, &shifted).unwrap();
            let d2 = pairwise_distances(&build_points(&set2, &weights).unwrap(), &set2.separation_index().unwrap()).unwrap();
            for (a, b) in base.entries.iter().zip(&d2.entries) {
                assert_eq!(a.s, b.s);
                assert!((a.distance - b.distance).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn csv_round_trips() {
        let (set, index, _, points) = pipeline(3);
        let d = pairwise_distances(&points, &index).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(PairwiseDistances::read_csv(buf.as_slice()).unwrap(), d);

        let mut buf = Vec::new();
        points.write_csv(&mut buf).unwrap();
        let table = PointTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!((table.q, table.m, table.scale), (3, 13, 1.0));
        assert_eq!(table.labels, set.elements());
        assert_eq!(table.distances(&index).unwrap(), d);
    }

    #[test]
    fn csv_rejections() {
        assert!(PairwiseDistances::read_csv("s,t,u,distance\n1,0,1,-2\n".as_bytes()).is_err());
        assert!(PairwiseDistances::read_csv("s,t,u,distance\n1,0,1,NaN\n".as_bytes()).is_err());
        assert!(PairwiseDistances::read_csv("s,t,u,distance\n1,0,1,2\n1,0,3,4\n".as_bytes()).is_err());
        assert!(PairwiseDistances::read_csv("a,b\n1,2\n".as_bytes()).is_err());
        assert!(PointTable::read_csv("t,x1\n0,1\n".as_bytes()).is_err());
        assert!(PointTable::read_csv("# q=2 m=7 n=2 scale=1\nt,x1\n0,1\n".as_bytes()).is_err());
        assert!(PointTable::read_csv("# q=2 m=7 n=1 scale=1\nt,x1\n0,1,2\n".as_bytes()).is_err());
    }
}
