//! Singer perfect difference sets and the cyclic-separation pair index.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite_field::{detect_prime_power, FieldContext, PrimePowerSpec, DEFAULT_TABLE_BOUND};

/// A cyclic `(m, q+1, 1)` difference set, stored sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DifferenceSet {
    spec: PrimePowerSpec,
    elements: Vec<u64>,
}

/// On-disk form: `{ "q", "m", "n", "elements": [...] }`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DifferenceSetJson {
    pub q: u64,
    pub m: u64,
    pub n: u64,
    pub elements: Vec<u64>,
}

impl DifferenceSet {
    /// Wraps residues for `spec` without checking the difference property.
    /// Residues are reduced mod `m` and sorted; duplicates are rejected.
    pub fn from_residues(spec: PrimePowerSpec, residues: &[u64]) -> Result<Self> {
        let set: BTreeSet<u64> = residues.iter().map(|r| r % spec.m).collect();
        if set.len() != residues.len() {
            return Err(Error::Parse("repeated residue".into()));
        }
        Ok(DifferenceSet {
            spec,
            elements: set.into_iter().collect(),
        })
    }

    pub fn spec(&self) -> &PrimePowerSpec {
        &self.spec
    }

    pub fn m(&self) -> u64 {
        self.spec.m
    }

    pub fn elements(&self) -> &[u64] {
        &self.elements
    }

    pub fn verify(&self) -> DifferenceReport {
        verify_difference_set(&self.elements, self.spec.m)
    }

    pub fn separation_index(&self) -> Result<SeparationIndex> {
        build_separation_index(&self.elements, self.spec.m)
    }

    pub fn to_json(&self) -> DifferenceSetJson {
        DifferenceSetJson {
            q: self.spec.q,
            m: self.spec.m,
            n: self.spec.n,
            elements: self.elements.clone(),
        }
    }

    /// Parses the JSON form. Checks that `q` is a prime power within the
    /// default field table bound, that `m` and `n` match it and that there
    /// are `n` distinct residues below `m`; the difference property itself
    /// is left to [`DifferenceSet::verify`].
    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: DifferenceSetJson = serde_json::from_str(s)?;
        let spec = detect_prime_power(raw.q)?;
        // only sets the field tables could have produced
        if spec.q.pow(3) > DEFAULT_TABLE_BOUND {
            return Err(Error::TooLarge(spec.q));
        }
        if raw.m != spec.m || raw.n != spec.n {
            return Err(Error::Parse(format!(
                "m={} n={} do not match q={}",
                raw.m, raw.n, raw.q
            )));
        }
        if raw.elements.len() as u64 != spec.n {
            return Err(Error::Parse(format!(
                "expected {} elements, found {}",
                spec.n,
                raw.elements.len()
            )));
        }
        if let Some(&bad) = raw.elements.iter().find(|&&e| e >= spec.m) {
            return Err(Error::Parse(format!("residue {bad} is not below m={}", spec.m)));
        }
        Self::from_residues(spec, &raw.elements)
    }
}

/// Builds `D = { log_g(x) mod m : x in span{1, g} \ {0} }` inside GF(q^3).
pub fn singer_difference_set(spec: &PrimePowerSpec) -> Result<DifferenceSet> {
    singer_difference_set_with_bound(spec, DEFAULT_TABLE_BOUND)
}

pub fn singer_difference_set_with_bound(spec: &PrimePowerSpec, bound: u64) -> Result<DifferenceSet> {
    let ctx = FieldContext::for_cube(spec, bound)?;
    Ok(singer_from_context(spec, &ctx))
}

pub fn singer_from_context(spec: &PrimePowerSpec, ctx: &FieldContext) -> DifferenceSet {
    let m = spec.m;
    // GF(q)* is generated by g^m; store logs so the products below stay cheap.
    let subfield_logs: Vec<u64> = (0..spec.q - 1).map(|k| k * m).collect();
    let mut residues = BTreeSet::new();
    // lambda = 0: mu * g runs over g^(1 + km)
    for &mu in &subfield_logs {
        residues.insert((mu + 1) % m);
    }
    for &lambda in &subfield_logs {
        let lambda_el = ctx.exp(lambda);
        // mu = 0
        residues.insert(lambda % m);
        for &mu in &subfield_logs {
            let x = ctx.add(lambda_el, ctx.exp(mu + 1));
            if let Some(l) = ctx.log(x) {
                residues.insert(l % m);
            }
        }
    }
    assert_eq!(
        residues.len() as u64,
        spec.n,
        "the span of 1 and g meets exactly q + 1 points of the projective plane"
    );
    DifferenceSet {
        spec: *spec,
        elements: residues.into_iter().collect(),
    }
}

/// Outcome of the exact difference check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifferenceReport {
    pub m: u64,
    pub size: usize,
    pub valid: bool,
    /// Nonzero residues with no representation.
    pub missing: Vec<u64>,
    /// Nonzero residues with more than one representation, with their counts.
    pub duplicated: Vec<(u64, u64)>,
    /// Set when two listed elements coincide mod m.
    pub repeated_element: bool,
}

/// Uses O(m) memory; `m = 0` is reported as invalid.
pub fn verify_difference_set(elements: &[u64], m: u64) -> DifferenceReport {
    if m == 0 {
        return DifferenceReport {
            m,
            size: elements.len(),
            valid: false,
            missing: Vec::new(),
            duplicated: Vec::new(),
            repeated_element: false,
        };
    }
    let mut counts = vec![0u64; m as usize];
    let mut repeated_element = false;
    for (i, &a) in elements.iter().enumerate() {
        for (j, &b) in elements.iter().enumerate() {
            if i == j {
                continue;
            }
            let r = sub_mod(a, b, m);
            if r == 0 {
                repeated_element = true;
            } else {
                counts[r as usize] += 1;
            }
        }
    }
    let missing: Vec<u64> = (1..m).filter(|&r| counts[r as usize] == 0).collect();
    let duplicated: Vec<(u64, u64)> = (1..m)
        .filter(|&r| counts[r as usize] > 1)
        .map(|r| (r, counts[r as usize]))
        .collect();
    DifferenceReport {
        m,
        size: elements.len(),
        valid: missing.is_empty() && duplicated.is_empty() && !repeated_element && m > 1,
        missing,
        duplicated,
        repeated_element,
    }
}

fn sub_mod(a: u64, b: u64, m: u64) -> u64 {
    let (a, b) = (a % m, b % m);
    if a >= b {
        a - b
    } else {
        m - (b - a)
    }
}

/// The `s` in `[1, (m-1)/2]` with `t - u = ±s (mod m)`.
pub fn separation(t: u64, u: u64, m: u64) -> Result<u64> {
    if m < 3 || m % 2 == 0 {
        return Err(Error::InvalidModulus(m));
    }
    let d = sub_mod(t, u, m);
    if d == 0 {
        return Err(Error::EqualResidues(t, u, m));
    }
    Ok(d.min(m - d))
}

/// Unordered pairs of a perfect difference set indexed by cyclic separation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeparationIndex {
    m: u64,
    /// Entry `s - 1` is the pair `(a, b)`, `a < b`, at separation `s`.
    pairs: Vec<(u64, u64)>,
    by_pair: HashMap<(u64, u64), u64>,
}

impl SeparationIndex {
    pub fn m(&self) -> u64 {
        self.m
    }

    /// Number of separations, `(m-1)/2`.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pair(&self, s: u64) -> Option<(u64, u64)> {
        s.checked_sub(1).and_then(|i| self.pairs.get(i as usize)).copied()
    }

    pub fn separation_of(&self, a: u64, b: u64) -> Option<u64> {
        self.by_pair.get(&(a.min(b), a.max(b))).copied()
    }

    /// `(s, (a, b))` in increasing `s`.
    pub fn iter(&self) -> impl Iterator<Item = (u64, (u64, u64))> + '_ {
        self.pairs.iter().enumerate().map(|(i, &p)| (i as u64 + 1, p))
    }
}

pub fn build_separation_index(elements: &[u64], m: u64) -> Result<SeparationIndex> {
    if m < 3 || m % 2 == 0 {
        return Err(Error::InvalidModulus(m));
    }
    let half = (m - 1) / 2;
    // keyed by separation so memory follows the input, not m
    let mut slots: HashMap<u64, (u64, u64)> = HashMap::new();
    let mut sorted = elements.to_vec();
    sorted.sort_unstable();
    for (i, &a) in sorted.iter().enumerate() {
        for &b in &sorted[i + 1..] {
            let s = separation(a, b, m)?;
            if let Some(&first) = slots.get(&s) {
                return Err(Error::IndexClash {
                    s,
                    first,
                    second: (a, b),
                });
            }
            slots.insert(s, (a, b));
        }
    }
    if (slots.len() as u64) < half {
        let missing = (1..=half).find(|s| !slots.contains_key(s)).unwrap_or(half);
        return Err(Error::IndexIncomplete(missing));
    }
    let pairs: Vec<(u64, u64)> = (1..=half).map(|s| slots[&s]).collect();
    let by_pair = pairs
        .iter()
        .enumerate()
        .map(|(i, &p)| (p, i as u64 + 1))
        .collect();
    Ok(SeparationIndex { m, pairs, by_pair })
}
