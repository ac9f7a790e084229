use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Coefficients below this magnitude are dropped.
pub const PRUNE: f64 = 1e-14;

/// Polynomial evaluated through per-variable power tables.
#[derive(Clone, Debug)]
pub struct Polynomial {
    n: usize,
    max_deg: Vec<usize>,
    exps: Vec<u16>,
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n);
        let powers: Vec<Vec<f64>> = x
            .iter()
            .zip(&self.max_deg)
            .map(|(v, &d)| {
                let mut p = Vec::with_capacity(d + 1);
                p.push(1.0);
                for k in 0..d {
                    p.push(p[k] * v);
                }
                p
            })
            .collect();
        self.coeffs
            .iter()
            .zip(self.exps.chunks_exact(self.n.max(1)))
            .map(|(c, e)| e.iter().enumerate().fold(*c, |acc, (i, &k)| acc * powers[i][k as usize]))
            .sum()
    }
}

/// Variables of a series ring and its truncation rule: a monomial
/// `Π v_i^e_i` is kept iff `Σ w_i e_i ≤ order`. Unit weights give the usual
/// total-degree truncation; a zero weight leaves that variable untruncated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ring {
    names: Vec<String>,
    weights: Vec<u32>,
    order: u32,
}

impl Ring {
    pub fn new(names: &[&str], order: u32) -> Arc<Self> {
        Self::weighted(names, &vec![1; names.len()], order)
    }

    pub fn weighted(names: &[&str], weights: &[u32], order: u32) -> Arc<Self> {
        assert_eq!(names.len(), weights.len());
        Arc::new(Self {
            names: names.iter().map(|s| s.to_string()).collect(),
            weights: weights.to_vec(),
            order,
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn weight(&self, e: &[u16]) -> u32 {
        e.iter().zip(&self.weights).map(|(a, w)| *a as u32 * w).sum()
    }

    fn keeps(&self, e: &[u16]) -> bool {
        self.weight(e) <= self.order
    }
}

/// Multivariate polynomial truncated by the rule of its [`Ring`].
#[derive(Clone, PartialEq)]
pub struct TruncatedSeries {
    ring: Arc<Ring>,
    terms: BTreeMap<Vec<u16>, f64>,
}

impl fmt::Debug for TruncatedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for TruncatedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for (i, k) in e.iter().enumerate() {
                match k {
                    0 => {}
                    1 => write!(f, "*{}", self.ring.names[i])?,
                    _ => write!(f, "*{}^{k}", self.ring.names[i])?,
                }
            }
        }
        Ok(())
    }
}

impl TruncatedSeries {
    pub fn zero(ring: &Arc<Ring>) -> Self {
        Self {
            ring: ring.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(ring: &Arc<Ring>, c: f64) -> Self {
        let mut s = Self::zero(ring);
        s.add_term(vec![0; ring.len()], c);
        s
    }

    pub fn var(ring: &Arc<Ring>, i: usize) -> Self {
        let mut e = vec![0; ring.len()];
        e[i] = 1;
        let mut s = Self::zero(ring);
        s.add_term(e, 1.0);
        s
    }

    pub fn named(ring: &Arc<Ring>, name: &str) -> Self {
        Self::var(ring, ring.index(name).unwrap_or_else(|| panic!("no variable {name}")))
    }

    pub fn from_terms(ring: &Arc<Ring>, terms: impl IntoIterator<Item = (Vec<u16>, f64)>) -> Self {
        let mut s = Self::zero(ring);
        for (e, c) in terms {
            s.add_term(e, c);
        }
        s
    }

    pub fn ring(&self) -> &Arc<Ring> {
        &self.ring
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u16>, &f64)> {
        self.terms.iter()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, e: Vec<u16>, c: f64) {
        if !self.ring.keeps(&e) {
            return;
        }
        match self.terms.entry(e) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().abs() < PRUNE {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                if c.abs() >= PRUNE {
                    v.insert(c);
                }
            }
        }
    }

    pub fn coeff(&self, e: &[u16]) -> f64 {
        self.terms.get(e).copied().unwrap_or(0.0)
    }

    /// Coefficient addressed by `(name, power)` pairs, other powers zero.
    pub fn coeff_of(&self, powers: &[(&str, u16)]) -> f64 {
        let mut e = vec![0; self.ring.len()];
        for (n, k) in powers {
            e[self.ring.index(n).unwrap_or_else(|| panic!("no variable {n}"))] = *k;
        }
        self.coeff(&e)
    }

    pub fn constant_term(&self) -> f64 {
        self.coeff(&vec![0; self.ring.len()])
    }

    fn same_ring(&self, o: &Self) {
        assert!(
            Arc::ptr_eq(&self.ring, &o.ring) || self.ring == o.ring,
            "series from different rings"
        );
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::from_terms(&self.ring, self.terms.iter().map(|(e, c)| (e.clone(), c * k)))
    }

    pub fn add_const(&self, k: f64) -> Self {
        self + &Self::constant(&self.ring, k)
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::constant(&self.ring, 1.0);
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }

    /// Re-truncates at a lower order.
    pub fn truncate(&self, order: u32) -> Self {
        let mut s = self.clone();
        s.terms.retain(|e, _| self.ring.weight(e) <= order);
        s
    }

    /// Drops terms whose power of variable `i` exceeds `k`.
    pub fn truncate_in(&self, i: usize, k: u16) -> Self {
        let mut s = self.clone();
        s.terms.retain(|e, _| e[i] <= k);
        s
    }

    /// Highest power of variable `i` present.
    pub fn degree_in(&self, i: usize) -> u16 {
        self.terms.keys().map(|e| e[i]).max().unwrap_or(0)
    }

    pub fn derivative(&self, i: usize) -> Self {
        Self::from_terms(
            &self.ring,
            self.terms.iter().filter(|(e, _)| e[i] > 0).map(|(e, c)| {
                let mut e2 = e.clone();
                e2[i] -= 1;
                (e2, c * e[i] as f64)
            }),
        )
    }

    /// Antiderivative in variable `i` vanishing at `v_i = 0`.
    pub fn integral(&self, i: usize) -> Self {
        Self::from_terms(
            &self.ring,
            self.terms.iter().map(|(e, c)| {
                let mut e2 = e.clone();
                e2[i] += 1;
                let k = e2[i] as f64;
                (e2, c / k)
            }),
        )
    }

    /// Exact division by variable `i`; fails if a term has no factor `v_i`.
    pub fn divide_by_var(&self, i: usize) -> Result<Self> {
        let mut out = Self::zero(&self.ring);
        for (e, c) in &self.terms {
            if e[i] == 0 {
                return Err(Error::CannotSolve(format!(
                    "series not divisible by {}: constant-in-variable term {c:e}",
                    self.ring.names[i]
                )));
            }
            let mut e2 = e.clone();
            e2[i] -= 1;
            out.terms.insert(e2, *c);
        }
        Ok(out)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.ring.len());
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .zip(x)
                    .fold(*c, |acc, (k, v)| if *k == 0 { acc } else { acc * v.powi(*k as i32) })
            })
            .sum()
    }

    /// Flat form for repeated numeric evaluation.
    pub fn compile(&self) -> Polynomial {
        let n = self.ring.len();
        let max_deg = (0..n).map(|i| self.degree_in(i) as usize).collect();
        Polynomial {
            n,
            max_deg,
            exps: self.terms.keys().flat_map(|e| e.iter().copied()).collect(),
            coeffs: self.terms.values().copied().collect(),
        }
    }

    /// Substitutes every variable `i` by `subs[i]` (all in one target ring).
    pub fn compose(&self, subs: &[TruncatedSeries]) -> Self {
        assert_eq!(subs.len(), self.ring.len());
        let target = subs[0].ring.clone();
        let mut powers: Vec<Vec<TruncatedSeries>> = subs
            .iter()
            .map(|s| vec![TruncatedSeries::constant(&target, 1.0), s.clone()])
            .collect();
        let mut out = TruncatedSeries::zero(&target);
        for (e, c) in &self.terms {
            let mut term = TruncatedSeries::constant(&target, *c);
            for (i, k) in e.iter().enumerate() {
                let k = *k as usize;
                if k == 0 {
                    continue;
                }
                while powers[i].len() <= k {
                    let next = &powers[i][powers[i].len() - 1] * &subs[i];
                    powers[i].push(next);
                }
                term = &term * &powers[i][k];
            }
            out = &out + &term;
        }
        out
    }

    /// Substitutes variable `i` only.
    pub fn substitute(&self, i: usize, s: &TruncatedSeries) -> Self {
        let subs: Vec<TruncatedSeries> = (0..self.ring.len())
            .map(|j| if j == i { s.clone() } else { Self::var(&self.ring, j) })
            .collect();
        self.compose(&subs)
    }

    /// Re-expresses the series in another ring, mapping variable `i` to
    /// `target` variable `map[i]`.
    pub fn embed(&self, target: &Arc<Ring>, map: &[usize]) -> Self {
        let subs: Vec<TruncatedSeries> = map.iter().map(|j| Self::var(target, *j)).collect();
        self.compose(&subs)
    }

    /// `1/self`, needs a nonzero constant term and a ring where every
    /// variable has positive weight.
    pub fn recip(&self) -> Result<Self> {
        let c0 = self.constant_term();
        if c0.abs() < PRUNE {
            return Err(Error::Pole(format!("constant term {c0:e} of a denominator")));
        }
        // 1/(c0 (1 + r)) = (1/c0) Σ (−r)^k, finite when every term of r
        // carries positive weight.
        let r = self.add_const(-c0).scale(1.0 / c0);
        if r.terms.keys().any(|e| self.ring.weight(e) == 0) {
            return Err(Error::Unsupported(
                "inverse of a series with non-constant untruncated part".into(),
            ));
        }
        let minus_r = -&r;
        let mut acc = Self::constant(&self.ring, 1.0);
        let mut pw = acc.clone();
        for _ in 0..=self.ring.order {
            pw = &pw * &minus_r;
            if pw.is_zero() {
                break;
            }
            acc = &acc + &pw;
        }
        Ok(acc.scale(1.0 / c0))
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }
}

impl Add for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn add(self, o: &TruncatedSeries) -> TruncatedSeries {
        self.same_ring(o);
        let mut s = self.clone();
        for (e, c) in &o.terms {
            s.add_term(e.clone(), *c);
        }
        s
    }
}

impl Sub for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn sub(self, o: &TruncatedSeries) -> TruncatedSeries {
        self.same_ring(o);
        let mut s = self.clone();
        for (e, c) in &o.terms {
            s.add_term(e.clone(), -*c);
        }
        s
    }
}

impl Mul for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn mul(self, o: &TruncatedSeries) -> TruncatedSeries {
        self.same_ring(o);
        let mut acc: BTreeMap<Vec<u16>, f64> = BTreeMap::new();
        for (ea, ca) in &self.terms {
            let wa = self.ring.weight(ea);
            for (eb, cb) in &o.terms {
                if wa + self.ring.weight(eb) > self.ring.order {
                    continue;
                }
                let e: Vec<u16> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                *acc.entry(e).or_insert(0.0) += ca * cb;
            }
        }
        acc.retain(|_, c| c.abs() >= PRUNE);
        TruncatedSeries {
            ring: self.ring.clone(),
            terms: acc,
        }
    }
}

impl Neg for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn neg(self) -> TruncatedSeries {
        self.scale(-1.0)
    }
}

macro_rules! owned_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr for TruncatedSeries {
            type Output = TruncatedSeries;
            fn $m(self, o: TruncatedSeries) -> TruncatedSeries {
                (&self).$m(&o)
            }
        }
        impl $tr<&TruncatedSeries> for TruncatedSeries {
            type Output = TruncatedSeries;
            fn $m(self, o: &TruncatedSeries) -> TruncatedSeries {
                (&self).$m(o)
            }
        }
        impl $tr<TruncatedSeries> for &TruncatedSeries {
            type Output = TruncatedSeries;
            fn $m(self, o: TruncatedSeries) -> TruncatedSeries {
                self.$m(&o)
            }
        }
    )*};
}
owned_ops!(Add add, Sub sub, Mul mul);

impl Neg for TruncatedSeries {
    type Output = TruncatedSeries;
    fn neg(self) -> TruncatedSeries {
        self.scale(-1.0)
    }
}

/// Poisson bracket `{f, g} = Σ ∂f/∂q_i ∂g/∂p_i − ∂f/∂p_i ∂g/∂q_i` on a
/// ring whose first `n` variables are `q` and next `n` are `p`.
pub fn poisson(f: &TruncatedSeries, g: &TruncatedSeries, n: usize) -> TruncatedSeries {
    let mut out = TruncatedSeries::zero(f.ring());
    for i in 0..n {
        out = out + f.derivative(i) * g.derivative(n + i) - f.derivative(n + i) * g.derivative(i);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_and_product() {
        let r = Ring::new(&["t", "s"], 2);
        let t = TruncatedSeries::var(&r, 0);
        let s = TruncatedSeries::var(&r, 1);
        let p = (&t + &s).pow(2);
        assert_eq!(p.coeff(&[1, 1]), 2.0);
        assert!((&p * &t).is_zero());
    }

    #[test]
    fn weighted_truncation_keeps_symbols() {
        let r = Ring::weighted(&["t", "w"], &[1, 0], 1);
        let t = TruncatedSeries::var(&r, 0);
        let w = TruncatedSeries::var(&r, 1);
        let p = (&t + &w).pow(3);
        assert_eq!(p.coeff(&[0, 3]), 1.0);
        assert_eq!(p.coeff(&[1, 2]), 3.0);
        assert_eq!(p.coeff(&[2, 1]), 0.0);
    }

    #[test]
    fn compiled_matches_eval() {
        let r = Ring::new(&["x", "y"], 6);
        let x = TruncatedSeries::var(&r, 0);
        let y = TruncatedSeries::var(&r, 1);
        let f = (&x * &y).pow(2) + x.pow(5).scale(-3.0) + y.add_const(0.5);
        let pt = [0.7, -1.3];
        assert!((f.compile().eval(&pt) - f.eval(&pt)).abs() < 1e-14);
    }

    #[test]
    fn reciprocal() {
        let r = Ring::new(&["x"], 6);
        let x = TruncatedSeries::var(&r, 0);
        let inv = x.add_const(1.0).recip().unwrap();
        for k in 0..=6u16 {
            assert_eq!(inv.coeff(&[k]), if k % 2 == 0 { 1.0 } else { -1.0 });
        }
        assert!(matches!(x.recip(), Err(Error::Pole(_))));
    }

    #[test]
    fn compose_and_calculus() {
        let r = Ring::new(&["x", "y"], 5);
        let x = TruncatedSeries::var(&r, 0);
        let y = TruncatedSeries::var(&r, 1);
        let f = &x * &x + y.scale(3.0);
        let g = f.substitute(0, &(&y + &y));
        assert_eq!(g.coeff(&[0, 2]), 4.0);
        assert_eq!(g.coeff(&[0, 1]), 3.0);
        assert_eq!(f.derivative(0).integral(0), &x * &x);
        assert!((f.eval(&[2.0, 1.0]) - 7.0).abs() < 1e-15);
    }

    #[test]
    fn canonical_poisson() {
        let r = Ring::new(&["q", "p"], 8);
        let q = TruncatedSeries::var(&r, 0);
        let p = TruncatedSeries::var(&r, 1);
        assert_eq!(poisson(&q, &p, 1), TruncatedSeries::constant(&r, 1.0));
    }
}
