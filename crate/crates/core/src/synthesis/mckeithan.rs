//! Closed-form strata of the McKeithan target `x = d` in `(y, v)`.
//!
//! On the target both `n̂·[G,F] = 0` and `n̂·F = 0` are quadratic in `y`, so
//! their branches are explicit functions of `v`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liealg::Frame;
use crate::linalg::Vec3;
use crate::models::McKeithanSystem;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchSample {
    pub v: f64,
    pub y: f64,
    /// 0 for the `−√Δ` root, 1 for `+√Δ`.
    pub branch: usize,
    pub discriminant: f64,
    /// Residual of the defining quadratic.
    pub residual: f64,
}

impl BranchSample {
    pub fn state(&self, d: f64) -> Vec3 {
        [d, self.y, self.v]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormLocus {
    pub samples: Vec<BranchSample>,
    /// Smallest discriminant met over the `v` samples.
    pub min_discriminant: f64,
}

fn check(sys: &McKeithanSystem, v_range: (f64, f64, usize)) -> Result<Vec<f64>> {
    if !(sys.d > 0.0) {
        return Err(Error::InvalidInput(format!("d = {} must be positive", sys.d)));
    }
    if !(v_range.0 > 0.0 && v_range.1 > 0.0) {
        return Err(Error::InvalidInput("v range must be positive".into()));
    }
    let n = v_range.2.max(1);
    Ok((0..n)
        .map(|i| if n == 1 { v_range.0 } else { v_range.0 + (v_range.1 - v_range.0) * i as f64 / (n - 1) as f64 })
        .collect())
}

/// Both roots of `a y² + b y + c`, ordered as (`−√Δ`, `+√Δ`) for `a > 0`,
/// without cancellation.
fn quadratic(a: f64, b: f64, c: f64) -> Option<[f64; 2]> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let q = -0.5 * (b + b.signum() * s);
    let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    Some(if r1 <= r2 { [r1, r2] } else { [r2, r1] })
}

/// `α₂β₂ d v^{α₂−1} + α₃β₃ d v^{α₃−1} + dδ₃ − δ₄ − d² + y(δ₃ − 2d) − y²`
pub fn singular_residual(sys: &McKeithanSystem, y: f64, v: f64) -> f64 {
    let [a2, a3, _] = sys.alpha;
    let [b2, b3, _] = sys.beta;
    let d = sys.d;
    let (d3, d4) = (sys.delta3(), sys.delta4());
    a2 * b2 * d * v.powf(a2 - 1.0) + a3 * b3 * d * v.powf(a3 - 1.0) + d * d3 - d4 - d * d + y * (d3 - 2.0 * d) - y * y
}

/// `−β₂ d v^{α₂} − β₃ d v^{α₃} + d²v − dδ₃v + y(2dv − δ₃v) + δ₄v + v y²`
pub fn exceptional_residual(sys: &McKeithanSystem, y: f64, v: f64) -> f64 {
    let [a2, a3, _] = sys.alpha;
    let [b2, b3, _] = sys.beta;
    let d = sys.d;
    let (d3, d4) = (sys.delta3(), sys.delta4());
    -b2 * d * v.powf(a2) - b3 * d * v.powf(a3) + d * d * v - d * d3 * v + y * (2.0 * d * v - d3 * v) + d4 * v + v * y * y
}

/// `(δ₁ − δ₂)² + 4d(α₂β₂ v^{α₂−1} + α₃β₃ v^{α₃−1})`
pub fn singular_discriminant(sys: &McKeithanSystem, v: f64) -> f64 {
    let [a2, a3, _] = sys.alpha;
    let [b2, b3, _] = sys.beta;
    let dd = sys.delta[0] - sys.delta[1];
    dd * dd + 4.0 * sys.d * (a2 * b2 * v.powf(a2 - 1.0) + a3 * b3 * v.powf(a3 - 1.0))
}

/// `v(4d(β₂ v^{α₂} + β₃ v^{α₃}) + v(δ₁ − δ₂)²)`
pub fn exceptional_discriminant(sys: &McKeithanSystem, v: f64) -> f64 {
    let [a2, a3, _] = sys.alpha;
    let [b2, b3, _] = sys.beta;
    let dd = sys.delta[0] - sys.delta[1];
    v * (4.0 * sys.d * (b2 * v.powf(a2) + b3 * v.powf(a3)) + v * dd * dd)
}

fn in_box(sys: &McKeithanSystem, y: f64) -> bool {
    (0.0..=sys.delta[1]).contains(&y)
}

/// Branches `y(v)` of `𝒮` on `x = d`, kept where `0 ≤ y ≤ δ₂`.
pub fn mckeithan_singular_locus(sys: &McKeithanSystem, v_range: (f64, f64, usize)) -> Result<ClosedFormLocus> {
    let vs = check(sys, v_range)?;
    let (d, d3, d4) = (sys.d, sys.delta3(), sys.delta4());
    let [a2, a3, _] = sys.alpha;
    let [b2, b3, _] = sys.beta;
    let mut out = ClosedFormLocus { samples: Vec::new(), min_discriminant: f64::INFINITY };
    for v in vs {
        let disc = singular_discriminant(sys, v);
        out.min_discriminant = out.min_discriminant.min(disc);
        // y² − (δ₃ − 2d) y − C = 0
        let c = a2 * b2 * d * v.powf(a2 - 1.0) + a3 * b3 * d * v.powf(a3 - 1.0) + d * d3 - d4 - d * d;
        let Some(roots) = quadratic(1.0, -(d3 - 2.0 * d), -c) else { continue };
        for (branch, y) in roots.into_iter().enumerate() {
            if in_box(sys, y) {
                out.samples.push(BranchSample { v, y, branch, discriminant: disc, residual: singular_residual(sys, y, v) });
            }
        }
    }
    Ok(out)
}

/// Branches `y(v)` of `ℰ` on `x = d`, kept where `0 ≤ y ≤ δ₂`.
pub fn mckeithan_exceptional_locus(sys: &McKeithanSystem, v_range: (f64, f64, usize)) -> Result<ClosedFormLocus> {
    let vs = check(sys, v_range)?;
    let (d, d3, d4) = (sys.d, sys.delta3(), sys.delta4());
    let [a2, a3, _] = sys.alpha;
    let [b2, b3, _] = sys.beta;
    let mut out = ClosedFormLocus { samples: Vec::new(), min_discriminant: f64::INFINITY };
    for v in vs {
        let disc = exceptional_discriminant(sys, v);
        out.min_discriminant = out.min_discriminant.min(disc);
        // divided by v: y² + (2d − δ₃) y + d² − dδ₃ + δ₄ − d(β₂ v^{α₂−1} + β₃ v^{α₃−1})
        let c = d * d - d * d3 + d4 - d * (b2 * v.powf(a2 - 1.0) + b3 * v.powf(a3 - 1.0));
        let Some(roots) = quadratic(1.0, 2.0 * d - d3, c) else { continue };
        for (branch, y) in roots.into_iter().enumerate() {
            if in_box(sys, y) {
                out.samples.push(BranchSample { v, y, branch, discriminant: disc, residual: exceptional_residual(sys, y, v) });
            }
        }
    }
    Ok(out)
}

/// Smallest distance in `(y, v)` between two sample sets.
pub fn locus_separation(a: &[BranchSample], b: &[BranchSample]) -> Option<f64> {
    a.iter()
        .flat_map(|p| b.iter().map(move |q| (p.y - q.y).hypot(p.v - q.v)))
        .min_by(f64::total_cmp)
}

/// A semi-bridge value of `v` with the `𝒮` points above it and the AD
/// residual of `n̂·[[G,F],G]` at each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiBridgePoint {
    pub v: f64,
    pub points: Vec<(Vec3, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiBridges {
    pub points: Vec<SemiBridgePoint>,
    /// Why the list is empty, when it is.
    pub reason: Option<String>,
}

/// Solves `v^{α₃−α₂} = −((α₂−1)α₂β₂)/((α₃−1)α₃β₃)`.
pub fn semi_bridge_points(sys: &McKeithanSystem) -> Result<SemiBridges> {
    let [a2, a3, _] = sys.alpha;
    let [b2, b3, _] = sys.beta;
    if a2 == a3 {
        return Err(Error::InvalidInput("semi-bridge condition needs α₂ ≠ α₃".into()));
    }
    let rhs = -((a2 - 1.0) * a2 * b2) / ((a3 - 1.0) * a3 * b3);
    if !(rhs > 0.0) || !rhs.is_finite() {
        return Ok(SemiBridges { points: Vec::new(), reason: Some("no positive solution".into()) });
    }
    let v = rhs.powf(1.0 / (a3 - a2));
    let branches = if sys.d > 0.0 { mckeithan_singular_locus(sys, (v, v, 1))?.samples } else { Vec::new() };
    let points = branches
        .iter()
        .map(|b| {
            let q = b.state(sys.d);
            (q, Frame::<f64>::at(sys, &q).gfg[0])
        })
        .collect();
    Ok(SemiBridges { points: vec![SemiBridgePoint { v, points }], reason: None })
}
