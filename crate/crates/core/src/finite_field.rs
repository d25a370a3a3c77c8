//! Arithmetic in GF(p^d) built directly over the prime field.
//!
//! Elements are packed as base-`p` integers with the constant coefficient in
//! the least significant digit, so `0` is the zero element, `1` the identity
//! and (for `d > 1`) `p` is the class of `x`. Everything here is deterministic:
//! the modulus is the first irreducible polynomial in packed order and the
//! generator is the first primitive element in packed order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default ceiling on the number of discrete-log table entries.
pub const DEFAULT_TABLE_BOUND: u64 = 20_000_000;

/// A prime power `q = p^e` together with the parameters of the construction
/// derived from it: `m = q^2 + q + 1`, `n = q + 1` and `pairs = (m - 1) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrimePowerSpec {
    pub q: u64,
    pub p: u64,
    pub e: u32,
    pub m: u64,
    pub n: u64,
    /// Number of unordered pairs, `n(n-1)/2 = (m-1)/2`.
    pub pairs: u64,
}

impl PrimePowerSpec {
    /// Degree of GF(q^3) over its prime field.
    pub fn cube_degree(&self) -> usize {
        3 * self.e as usize
    }
}

/// Largest `q` accepted; keeps `q^3` comfortably inside `u64`.
const MAX_Q: u64 = 1 << 20;

pub fn detect_prime_power(q: u64) -> Result<PrimePowerSpec> {
    if q < 2 {
        return Err(Error::NotAPrimePower(q));
    }
    if q > MAX_Q {
        return Err(Error::TooLarge(q));
    }
    let p = smallest_prime_factor(q);
    let mut rest = q;
    let mut e = 0u32;
    while rest % p == 0 {
        rest /= p;
        e += 1;
    }
    if rest != 1 {
        return Err(Error::NotAPrimePower(q));
    }
    let m = q * q + q + 1;
    Ok(PrimePowerSpec {
        q,
        p,
        e,
        m,
        n: q + 1,
        pairs: (m - 1) / 2,
    })
}

pub fn smallest_prime_factor(n: u64) -> u64 {
    debug_assert!(n >= 2);
    if n % 2 == 0 {
        return 2;
    }
    let mut f = 3;
    while f * f <= n {
        if n % f == 0 {
            return f;
        }
        f += 2;
    }
    n
}

pub fn is_prime(n: u64) -> bool {
    n >= 2 && smallest_prime_factor(n) == n
}

/// Distinct prime factors in increasing order, by trial division.
pub fn distinct_prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut f = 2;
    while f * f <= n {
        if n % f == 0 {
            out.push(f);
            while n % f == 0 {
                n /= f;
            }
        }
        f += if f == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push(n);
    }
    out
}

fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1 % p;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        exp >>= 1;
    }
    acc
}

fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

/// Dense polynomials over GF(p), coefficient vectors with the constant term
/// first. The zero polynomial is the empty vector.
mod poly {
    use super::inv_mod;

    pub fn trim(mut a: Vec<u64>) -> Vec<u64> {
        while a.last() == Some(&0) {
            a.pop();
        }
        a
    }

    pub fn mul(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        let mut out = vec![0u64; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                out[i + j] = (out[i + j] + x * y) % p;
            }
        }
        trim(out)
    }

    /// Remainder of `a` modulo a nonzero `f`.
    pub fn rem(a: &[u64], f: &[u64], p: u64) -> Vec<u64> {
        let mut r = trim(a.to_vec());
        let df = f.len() - 1;
        let lead_inv = inv_mod(f[df], p);
        while r.len() > df {
            let top = r.len() - 1;
            let c = r[top] * lead_inv % p;
            let shift = top - df;
            for (k, &fk) in f.iter().enumerate() {
                r[shift + k] = (r[shift + k] + p - c * fk % p) % p;
            }
            r = trim(r);
        }
        r
    }

    pub fn mulmod(a: &[u64], b: &[u64], f: &[u64], p: u64) -> Vec<u64> {
        rem(&mul(a, b, p), f, p)
    }

    pub fn sub(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
        let len = a.len().max(b.len());
        let out = (0..len)
            .map(|i| {
                let x = a.get(i).copied().unwrap_or(0);
                let y = b.get(i).copied().unwrap_or(0);
                (x + p - y) % p
            })
            .collect();
        trim(out)
    }

    pub fn gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
        let mut x = trim(a.to_vec());
        let mut y = trim(b.to_vec());
        while !y.is_empty() {
            let r = rem(&x, &y, p);
            x = y;
            y = r;
        }
        x
    }

    /// `a^p mod f` by square-and-multiply.
    pub fn pow_p(a: &[u64], f: &[u64], p: u64) -> Vec<u64> {
        let mut acc = vec![1u64];
        let mut base = rem(a, f, p);
        let mut e = p;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(&acc, &base, f, p);
            }
            base = mulmod(&base, &base, f, p);
            e >>= 1;
        }
        acc
    }
}

/// Ben-Or test: a monic `f` of degree `d` is irreducible iff
/// `gcd(f, x^{p^k} - x) = 1` for every `1 <= k <= d/2`.
pub fn is_irreducible(f: &[u64], p: u64) -> bool {
    let f = poly::trim(f.to_vec());
    if f.len() < 2 {
        return false;
    }
    let d = f.len() - 1;
    let x = vec![0, 1];
    let mut frob = x.clone();
    for _ in 1..=d / 2 {
        frob = poly::pow_p(&frob, &f, p);
        let g = poly::gcd(&f, &poly::sub(&frob, &x, p), p);
        if g.len() != 1 {
            return false;
        }
    }
    true
}

/// First monic irreducible polynomial of degree `d` over GF(p), scanning the
/// lower coefficients in packed order (constant term least significant).
/// Returns `d + 1` coefficients, constant term first.
pub fn find_irreducible(p: u64, d: usize) -> Vec<u64> {
    assert!(d >= 1, "degree must be positive");
    assert!(is_prime(p), "characteristic must be prime");
    let mut lower = vec![0u64; d];
    loop {
        let mut f = lower.clone();
        f.push(1);
        if is_irreducible(&f, p) {
            return f;
        }
        // increment the base-p counter
        let mut i = 0;
        loop {
            lower[i] += 1;
            if lower[i] < p {
                break;
            }
            lower[i] = 0;
            i += 1;
            assert!(i < d, "an irreducible polynomial of every degree exists");
        }
    }
}

/// An element of GF(p^d) in the polynomial basis, constant coefficient first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldElement {
    coeffs: Vec<u64>,
}

impl FieldElement {
    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }
}

/// Field arithmetic without the log tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldArith {
    p: u64,
    degree: usize,
    modulus: Vec<u64>,
    order: u64,
}

impl FieldArith {
    pub fn new(p: u64, degree: usize) -> Self {
        Self::with_modulus(p, find_irreducible(p, degree))
    }

    pub fn with_modulus(p: u64, modulus: Vec<u64>) -> Self {
        assert_eq!(modulus.last(), Some(&1), "modulus must be monic");
        let degree = modulus.len() - 1;
        let order = p.checked_pow(degree as u32).expect("field order overflows u64");
        FieldArith {
            p,
            degree,
            modulus,
            order,
        }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn modulus(&self) -> &[u64] {
        &self.modulus
    }

    /// Number of field elements, `p^degree`.
    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn element(&self, packed: u64) -> FieldElement {
        FieldElement {
            coeffs: self.unpack(packed),
        }
    }

    pub fn packed(&self, x: &FieldElement) -> u64 {
        self.pack(&x.coeffs)
    }

    pub fn unpack(&self, mut packed: u64) -> Vec<u64> {
        debug_assert!(packed < self.order);
        let mut out = vec![0; self.degree];
        for c in out.iter_mut() {
            *c = packed % self.p;
            packed /= self.p;
        }
        out
    }

    pub fn pack(&self, coeffs: &[u64]) -> u64 {
        coeffs.iter().rev().fold(0, |acc, &c| acc * self.p + c)
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        if self.p == 2 {
            return a ^ b;
        }
        let (mut a, mut b) = (a, b);
        let mut out = 0;
        let mut place = 1;
        while a > 0 || b > 0 {
            out += (a % self.p + b % self.p) % self.p * place;
            a /= self.p;
            b /= self.p;
            place *= self.p;
        }
        out
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        let prod = poly::mulmod(&self.unpack(a), &self.unpack(b), &self.modulus, self.p);
        self.pack(&prod)
    }

    pub fn pow(&self, base: u64, mut exp: u64) -> u64 {
        let mut acc = 1;
        let mut base = base;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via `a^(order-2)`; `None` for zero.
    pub fn inv(&self, a: u64) -> Option<u64> {
        (a != 0).then(|| self.pow(a, self.order - 2))
    }
}

/// First element in packed order whose multiplicative order is `p^d - 1`.
pub fn find_primitive(arith: &FieldArith) -> FieldElement {
    let group = arith.order() - 1;
    if group == 1 {
        return arith.element(1);
    }
    let cofactors: Vec<u64> = distinct_prime_factors(group)
        .into_iter()
        .map(|l| group / l)
        .collect();
    (2..arith.order())
        .find(|&g| cofactors.iter().all(|&c| arith.pow(g, c) != 1))
        .map(|g| arith.element(g))
        .expect("the multiplicative group of a finite field is cyclic")
}

/// Dense discrete-log and antilog tables for a fixed generator.
#[derive(Debug, Clone)]
pub struct LogTable {
    /// `log[x]` for packed `x`; entry 0 is unused.
    log: Vec<u32>,
    /// `exp[i] = g^i` for `0 <= i < order - 1`.
    exp: Vec<u32>,
}

impl LogTable {
    pub fn len(&self) -> usize {
        self.exp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exp.is_empty()
    }

    pub fn log(&self, packed: u64) -> Option<u64> {
        (packed != 0).then(|| self.log[packed as usize] as u64)
    }

    pub fn exp(&self, i: u64) -> u64 {
        self.exp[(i % self.exp.len() as u64) as usize] as u64
    }
}

pub fn build_log_table(arith: &FieldArith, generator: &FieldElement, bound: u64) -> Result<LogTable> {
    let entries = arith.order() - 1;
    if entries > bound || entries > u32::MAX as u64 {
        return Err(Error::CapacityExceeded {
            order: arith.order(),
            entries,
            bound,
        });
    }
    let d = arith.degree();
    let p = arith.p();
    // Rows of the GF(p)-linear map y -> g*y on the basis x^i.
    let g = arith.packed(generator);
    let basis_images: Vec<Vec<u64>> = (0..d)
        .map(|i| arith.unpack(arith.mul(g, p.pow(i as u32))))
        .collect();

    let mut log = vec![u32::MAX; arith.order() as usize];
    let mut exp = Vec::with_capacity(entries as usize);
    let mut cur = vec![0u64; d];
    cur[0] = 1;
    let mut next = vec![0u64; d];
    for i in 0..entries {
        let packed = arith.pack(&cur) as usize;
        assert_eq!(log[packed], u32::MAX, "generator is not primitive");
        log[packed] = i as u32;
        exp.push(packed as u32);
        next.iter_mut().for_each(|c| *c = 0);
        for (ci, row) in cur.iter().zip(&basis_images) {
            if *ci == 0 {
                continue;
            }
            for (acc, r) in next.iter_mut().zip(row) {
                *acc += ci * r;
            }
        }
        for (c, n) in cur.iter_mut().zip(&next) {
            *c = n % p;
        }
    }
    assert_eq!(arith.pack(&cur), 1, "generator order mismatch");
    Ok(LogTable { log, exp })
}

/// GF(p^d) with a fixed primitive element and full log tables. Immutable once
/// built.
#[derive(Debug, Clone)]
pub struct FieldContext {
    arith: FieldArith,
    generator: FieldElement,
    table: LogTable,
}

/// Serializable summary of a context, for debugging dumps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSummary {
    pub p: u64,
    pub degree: usize,
    pub order: u64,
    pub modulus: Vec<u64>,
    pub generator: Vec<u64>,
}

impl FieldContext {
    pub fn new(p: u64, degree: usize, bound: u64) -> Result<Self> {
        let entries = p
            .checked_pow(degree as u32)
            .map(|o| o - 1)
            .unwrap_or(u64::MAX);
        if entries > bound {
            return Err(Error::CapacityExceeded {
                order: entries.saturating_add(1),
                entries,
                bound,
            });
        }
        let arith = FieldArith::new(p, degree);
        let generator = find_primitive(&arith);
        let table = build_log_table(&arith, &generator, bound)?;
        Ok(FieldContext {
            arith,
            generator,
            table,
        })
    }

    /// GF(q^3) for the given prime power, as a degree-3e extension of GF(p).
    pub fn for_cube(spec: &PrimePowerSpec, bound: u64) -> Result<Self> {
        Self::new(spec.p, spec.cube_degree(), bound)
    }

    pub fn arith(&self) -> &FieldArith {
        &self.arith
    }

    pub fn generator(&self) -> &FieldElement {
        &self.generator
    }

    pub fn table(&self) -> &LogTable {
        &self.table
    }

    pub fn log(&self, packed: u64) -> Option<u64> {
        self.table.log(packed)
    }

    pub fn exp(&self, i: u64) -> u64 {
        self.table.exp(i)
    }

    pub fn group_order(&self) -> u64 {
        self.arith.order() - 1
    }

    /// Product through the log tables.
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        match (self.log(a), self.log(b)) {
            (Some(x), Some(y)) => self.exp(x + y),
            _ => 0,
        }
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        self.arith.add(a, b)
    }

    pub fn summary(&self) -> FieldSummary {
        FieldSummary {
            p: self.arith.p(),
            degree: self.arith.degree(),
            order: self.arith.order(),
            modulus: self.arith.modulus().to_vec(),
            generator: self.generator.coeffs().to_vec(),
        }
    }
}
