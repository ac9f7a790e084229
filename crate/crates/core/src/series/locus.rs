use std::sync::Arc;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::flow::{bc_flow, lie_series_flow, ControlLaw, PolynomialSystem};
use super::truncated::{Polynomial, Ring, TruncatedSeries as Ts};
use crate::error::{Error, Result};
use crate::liealg::ControlAffine;
use crate::linalg::Vec3;
use crate::models::Tutorial;
use crate::singular::{integrate_singular, SingularArc};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 50 }
    }
}

/// Damped Newton: full step, halved until the residual norm decreases.
/// `f` returns the residual and its Jacobian.
pub fn newton<F>(f: F, x0: &[f64], opts: &NewtonOptions) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> (Vec<f64>, DMatrix<f64>),
{
    newton_deflated(f, x0, &[], opts)
}

/// Newton on `m(v)·f(v)` with `m(v) = 1 + Σ 1/‖v − r‖²`, which steers the
/// iteration away from the already known roots `r`. Convergence is tested
/// on `f` itself.
pub fn newton_deflated<F>(f: F, x0: &[f64], known: &[Vec<f64>], opts: &NewtonOptions) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> (Vec<f64>, DMatrix<f64>),
{
    let deflated = |x: &DVector<f64>| -> (DVector<f64>, DMatrix<f64>, f64) {
        let (r, j) = f(x.as_slice());
        let r = DVector::from_vec(r);
        let raw = r.norm();
        let mut m = 1.0;
        let mut grad = DVector::zeros(x.len());
        for k in known {
            let d = x - DVector::from_column_slice(k);
            let n2 = d.norm_squared();
            m += 1.0 / n2;
            grad -= d * (2.0 / (n2 * n2));
        }
        let jg = j * m + &r * grad.transpose();
        (r * m, jg, raw)
    };
    let mut x = DVector::from_column_slice(x0);
    let (mut r, mut j, mut raw) = deflated(&x);
    let mut norm = r.norm();
    let mut stalled = 0;
    for _ in 0..opts.max_iter {
        if raw < opts.tol {
            return Ok(x.as_slice().to_vec());
        }
        let step = j
            .clone()
            .lu()
            .solve(&r)
            .ok_or_else(|| Error::CannotSolve("singular Jacobian".into()))?;
        let mut lambda = 1.0;
        loop {
            let trial = &x - &step * lambda;
            let (rt, jt, rawt) = deflated(&trial);
            let nt = rt.norm();
            if lambda < 1e-4 && !(nt < norm) {
                stalled += 1;
                if stalled > 3 || !nt.is_finite() {
                    return Err(Error::CannotSolve(format!("Newton stalled (residual {raw:e})")));
                }
            }
            if nt.is_finite() && (nt < norm || lambda < 1e-4) {
                x = trial;
                r = rt;
                j = jt;
                raw = rawt;
                norm = nt;
                break;
            }
            lambda *= 0.5;
        }
    }
    if raw < opts.tol {
        Ok(x.as_slice().to_vec())
    } else {
        Err(Error::CannotSolve(format!("Newton did not converge (residual {raw:e})")))
    }
}

/// Bang flow `(t, z) ↦ φ_t(z)` as series in `t` with every phase
/// coordinate kept symbolic, together with its partial derivatives.
#[derive(Clone, Debug)]
pub struct FlowMap {
    pub eps: f64,
    pub coords: [Ts; 6],
    values: Vec<Polynomial>,
    grads: Vec<[Polynomial; 7]>,
}

impl FlowMap {
    pub fn new<M: PolynomialSystem>(model: &M, eps: f64, ord: u16) -> Result<Self> {
        let ring = Ring::weighted(&["t", "x", "y", "z", "p1", "p2", "p3"], &[1, 0, 0, 0, 0, 0, 0], ord as u32);
        let init: [Ts; 6] = std::array::from_fn(|i| Ts::var(&ring, i + 1));
        let coords = lie_series_flow(model, ControlLaw::Bang(eps), &init, 0, ord)?.coords;
        let grads = coords
            .iter()
            .map(|c| std::array::from_fn(|k| c.derivative(k).compile()))
            .collect();
        let values = coords.iter().map(Ts::compile).collect();
        Ok(Self { eps, coords, values, grads })
    }

    fn args(t: f64, z: &[f64; 6]) -> [f64; 7] {
        [t, z[0], z[1], z[2], z[3], z[4], z[5]]
    }

    pub fn eval(&self, t: f64, z: &[f64; 6]) -> [f64; 6] {
        let a = Self::args(t, z);
        std::array::from_fn(|i| self.values[i].eval(&a))
    }

    /// Row `i` holds `(∂φ_i/∂t, ∂φ_i/∂z_1, …, ∂φ_i/∂z_6)`.
    pub fn jacobian(&self, t: f64, z: &[f64; 6]) -> [[f64; 7]; 6] {
        let a = Self::args(t, z);
        std::array::from_fn(|i| std::array::from_fn(|k| self.grads[i][k].eval(&a)))
    }
}

/// Boundary flow `(t, w0, s0)` with its gradients and `p₃/t`.
struct BcMap {
    coords: Vec<Polynomial>,
    p3_over_t: Polynomial,
    grads: Vec<[Polynomial; 3]>,
}

impl BcMap {
    fn new<M: PolynomialSystem>(model: &M, eps: f64, ord: u16) -> Result<Self> {
        let f = bc_flow(model, eps, ord + 1)?;
        let p3_over_t = f.coords[5].divide_by_var(0)?.truncate_in(0, ord);
        let coords: [Ts; 6] = std::array::from_fn(|i| f.coords[i].truncate_in(0, ord));
        let mut grads: Vec<[Polynomial; 3]> = coords
            .iter()
            .map(|c| std::array::from_fn(|k| c.derivative(k).compile()))
            .collect();
        grads.push(std::array::from_fn(|k| p3_over_t.derivative(k).compile()));
        Ok(Self {
            coords: coords.iter().map(Ts::compile).collect(),
            p3_over_t: p3_over_t.compile(),
            grads,
        })
    }

    fn eval(&self, t: f64, w0: f64, s0: f64) -> [f64; 6] {
        std::array::from_fn(|i| self.coords[i].eval(&[t, w0, s0]))
    }

    fn grad(&self, i: usize, t: f64, w0: f64, s0: f64) -> [f64; 3] {
        std::array::from_fn(|k| self.grads[i][k].eval(&[t, w0, s0]))
    }

    fn switch(&self, t: f64, w0: f64, s0: f64) -> f64 {
        self.p3_over_t.eval(&[t, w0, s0])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocusKind {
    /// `σ₋ ∩ σ₊`
    C1,
    /// `σ₊σ₋ ∩ σ₋`
    C12,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocusGrid {
    pub w0: (f64, f64, usize),
    pub s0: (f64, f64, usize),
    /// Seeds for the common time. Negative values flow backward from the
    /// target.
    pub t_seeds: Vec<f64>,
    /// Roots with `|t|`, or a C12 stage, shorter than this are treated as
    /// the trivial intersection.
    pub t_min: f64,
    /// Roots with `|t|` above this lie outside the range where the
    /// truncated series are trusted.
    pub t_max: f64,
    pub newton: NewtonOptions,
}

impl Default for LocusGrid {
    fn default() -> Self {
        Self {
            w0: (-0.05, 0.05, 11),
            s0: (-0.3, 0.3, 13),
            t_seeds: vec![-0.3, -0.2, -0.1, -0.05],
            t_min: 1e-3,
            t_max: 0.2,
            newton: NewtonOptions::default(),
        }
    }
}

fn linspace((lo, hi, n): (f64, f64, usize)) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Equal-time intersection point of two extremal families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocusSample {
    pub kind: LocusKind,
    pub index: (usize, usize),
    pub w0: f64,
    pub s0: f64,
    pub t: f64,
    pub w0p: f64,
    pub s0p: f64,
    /// Switching time on the second chain (C12 only).
    pub ss1: Option<f64>,
    pub point: Vec3,
    /// Every bang stage keeps `sign p₃ = u` on the interior of its span.
    pub extremal: bool,
    pub residual: f64,
}

/// Splitting-locus samples over a `(w0, s0)` grid. Nodes where Newton
/// fails are skipped.
pub fn splitting_locus<M: PolynomialSystem + Sync>(
    model: &M,
    ord: u16,
    kind: LocusKind,
    grid: &LocusGrid,
) -> Result<Vec<LocusSample>> {
    let minus = BcMap::new(model, -1.0, ord)?;
    let plus = match kind {
        LocusKind::C1 => Some(BcMap::new(model, 1.0, ord)?),
        LocusKind::C12 => None,
    };
    let second = match kind {
        LocusKind::C12 => Some(FlowMap::new(model, 1.0, ord)?),
        LocusKind::C1 => None,
    };
    let ws = linspace(grid.w0);
    let ss = linspace(grid.s0);
    let nodes: Vec<(usize, usize)> = (0..ws.len()).flat_map(|i| (0..ss.len()).map(move |j| (i, j))).collect();
    let mut out: Vec<(usize, LocusSample)> = nodes
        .par_iter()
        .enumerate()
        .filter_map(|(n, &(i, j))| {
            let (w0, s0) = (ws[i], ss[j]);
            let found = match kind {
                LocusKind::C1 => c1_node(&minus, plus.as_ref().unwrap(), w0, s0, grid),
                LocusKind::C12 => c12_node(&minus, second.as_ref().unwrap(), w0, s0, grid),
            };
            match found {
                Some(mut s) => {
                    s.index = (i, j);
                    Some((n, s))
                }
                None => {
                    debug!("{kind:?}: no nontrivial root at w0={w0}, s0={s0}");
                    None
                }
            }
        })
        .collect();
    out.sort_by_key(|(n, _)| *n);
    Ok(out.into_iter().map(|(_, s)| s).collect())
}

const CONSISTENCY_SAMPLES: usize = 32;

/// Control `ε` agrees with `sign p₃` on the open span `(t, 0)`, so the arc
/// is an extremal bang arc up to its endpoint.
fn consistent(map: &BcMap, eps: f64, t: f64, w0: f64, s0: f64) -> bool {
    (1..CONSISTENCY_SAMPLES).all(|k| {
        let tau = t * k as f64 / CONSISTENCY_SAMPLES as f64;
        eps * tau * map.switch(tau, w0, s0) > -1e-14
    })
}

fn best_by_time(cands: impl Iterator<Item = LocusSample>, grid: &LocusGrid) -> Option<LocusSample> {
    cands
        .filter(|s| s.t.is_finite() && s.t.abs() > grid.t_min && s.t.abs() <= grid.t_max)
        .min_by(|a, b| a.t.abs().total_cmp(&b.t.abs()))
}

fn c1_node(minus: &BcMap, plus: &BcMap, w0: f64, s0: f64, grid: &LocusGrid) -> Option<LocusSample> {
    let f = |v: &[f64]| {
        let (t, w0p, s0p) = (v[0], v[1], v[2]);
        let a = minus.eval(t, w0, s0);
        let b = plus.eval(t, w0p, s0p);
        let r = (0..3).map(|i| a[i] - b[i]).collect();
        let mut j = DMatrix::zeros(3, 3);
        for i in 0..3 {
            let ga = minus.grad(i, t, w0, s0);
            let gb = plus.grad(i, t, w0p, s0p);
            j[(i, 0)] = ga[0] - gb[0];
            j[(i, 1)] = -gb[1];
            j[(i, 2)] = -gb[2];
        }
        (r, j)
    };
    let cands = grid.t_seeds.iter().filter_map(|&t0| {
        // Start from the z-balance s0′ = s0 − 2t.
        let x0 = [t0, w0 + t0 * t0, s0 - 2.0 * t0];
        let v = newton(f, &x0, &grid.newton).ok()?;
        let extremal = consistent(minus, -1.0, v[0], w0, s0) && consistent(plus, 1.0, v[0], v[1], v[2]);
        let q = minus.eval(v[0], w0, s0);
        Some(LocusSample {
            kind: LocusKind::C1,
            index: (0, 0),
            w0,
            s0,
            t: v[0],
            w0p: v[1],
            s0p: v[2],
            ss1: None,
            point: [q[0], q[1], q[2]],
            extremal,
            residual: DVector::from_vec(f(&v).0).norm(),
        })
    });
    best_by_time(cands, grid)
}

fn c12_node(minus: &BcMap, plus: &FlowMap, w0: f64, s0: f64, grid: &LocusGrid) -> Option<LocusSample> {
    // Unknowns (t, ss1, ss2, w0′, s0′).
    let f = |v: &[f64]| {
        let (t, ss1, ss2, w0p, s0p) = (v[0], v[1], v[2], v[3], v[4]);
        let a = minus.eval(t, w0, s0);
        let mid = minus.eval(ss1, w0p, s0p);
        let b = plus.eval(ss2, &mid);
        let jb = plus.jacobian(ss2, &mid);
        let mut r = vec![0.0; 5];
        let mut j = DMatrix::zeros(5, 5);
        let gm: Vec<[f64; 3]> = (0..6).map(|k| minus.grad(k, ss1, w0p, s0p)).collect();
        for i in 0..3 {
            r[i] = a[i] - b[i];
            j[(i, 0)] = minus.grad(i, t, w0, s0)[0];
            j[(i, 2)] = -jb[i][0];
            // chain rule through the switching point
            for (k, g) in gm.iter().enumerate() {
                j[(i, 1)] -= jb[i][k + 1] * g[0];
                j[(i, 3)] -= jb[i][k + 1] * g[1];
                j[(i, 4)] -= jb[i][k + 1] * g[2];
            }
        }
        r[3] = ss1 + ss2 - t;
        j[(3, 0)] = -1.0;
        j[(3, 1)] = 1.0;
        j[(3, 2)] = 1.0;
        r[4] = minus.switch(ss1, w0p, s0p);
        let gs = minus.grad(6, ss1, w0p, s0p);
        j[(4, 1)] = gs[0];
        j[(4, 3)] = gs[1];
        j[(4, 4)] = gs[2];
        (r, j)
    };
    let cands = grid.t_seeds.iter().flat_map(|&t0| {
        [0.25, 0.5, 0.75].into_iter().filter_map(move |frac| {
            let ss1 = frac * t0;
            // Put the seed on the switching surface of the second chain.
            let sw = |u: &[f64]| {
                let g = minus.grad(6, ss1, u[0], s0);
                (vec![minus.switch(ss1, u[0], s0)], DMatrix::from_element(1, 1, g[1]))
            };
            let w0p = newton(sw, &[w0], &grid.newton).map(|u| u[0]).unwrap_or(w0);
            let x0 = [t0, ss1, t0 - ss1, w0p, s0];
            let mut known: Vec<Vec<f64>> = Vec::new();
            let mut v = newton(f, &x0, &grid.newton).ok()?;
            // A collapsed stage is the switching point of the first chain
            // itself: deflate it and retry.
            while known.len() < 3 && v[1].abs().min(v[2].abs()) < grid.t_min {
                known.push(v.clone());
                v = newton_deflated(f, &x0, &known, &grid.newton).ok()?;
            }
            // Both stages run in the direction of t and are not collapsed.
            if v[1] * v[0] < 0.0 || v[2] * v[0] < 0.0 || v[1].abs().min(v[2].abs()) < grid.t_min {
                return None;
            }
            let mid = minus.eval(v[1], v[3], v[4]);
            let second_ok = (1..CONSISTENCY_SAMPLES).all(|k| {
                let tau = v[2] * k as f64 / CONSISTENCY_SAMPLES as f64;
                plus.eval(tau, &mid)[5] > -1e-14
            });
            let extremal =
                second_ok && consistent(minus, -1.0, v[0], w0, s0) && consistent(minus, -1.0, v[1], v[3], v[4]);
            let q = minus.eval(v[0], w0, s0);
            Some(LocusSample {
                kind: LocusKind::C12,
                index: (0, 0),
                w0,
                s0,
                t: v[0],
                w0p: v[3],
                s0p: v[4],
                ss1: Some(v[1]),
                point: [q[0], q[1], q[2]],
                extremal,
                residual: DVector::from_vec(f(&v).0).norm(),
            })
        })
    });
    best_by_time(cands, grid)
}

/// Point `(x, y, z)` of the singular leaf through `(0, z0², z0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafSample {
    pub z0: f64,
    pub z: f64,
    pub x: f64,
    pub y: f64,
    /// `|u_s| ≤ 1` at this point.
    pub admissible: bool,
}

/// Closed-form leaf of the tutorial model, as exact polynomials in `(z, z0)`.
#[derive(Clone, Debug)]
pub struct SingularLeaf {
    pub model: Tutorial,
    pub x: Ts,
    pub y: Ts,
}

impl SingularLeaf {
    /// `dy/dz = z/u_s` and `dx/dz = F₁/u_s` with `u_s = a/(6cz)`,
    /// integrated from `z0`.
    pub fn new(model: &Tutorial) -> Self {
        let ring: Arc<Ring> = Ring::new(&["z", "z0"], 16);
        let (a, c) = (model.a, model.c);
        let z = Ts::var(&ring, 0);
        let z0 = Ts::var(&ring, 1);
        let dy = z.pow(2).scale(6.0 * c / a);
        let y = dy.integral(0) - dy.integral(0).substitute(0, &z0) + z0.pow(2);
        let f1 = (y.scale(a) - (&y * &z).scale(3.0 * c) + z.pow(3).scale(c)).add_const(1.0);
        let dx = &f1 * &z.scale(6.0 * c / a);
        let xi = dx.integral(0);
        let x = &xi - &xi.substitute(0, &z0);
        Self { model: *model, x, y }
    }

    pub fn at(&self, z0: f64, z: f64) -> LeafSample {
        let v = [z, z0];
        LeafSample {
            z0,
            z,
            x: self.x.eval(&v),
            y: self.y.eval(&v),
            admissible: z.abs() >= self.model.z_sat(),
        }
    }

    /// Leaf `x` from the alternative closed form `g(z) − g(z0)`. It does
    /// not match the integrated leaf and is kept for comparison only.
    pub fn alternate_x(&self, z0: f64, z: f64) -> f64 {
        let (a, c) = (self.model.a, self.model.c);
        let g = |z: f64| {
            3.0 * c * z * z / (5.0 * a * a)
                * (2.0 * a * (2.0 * c + 1.0) * z.powi(3)
                    + 30.0 * c * z0 * z0 * (a - 2.0 * c * z0) * z
                    + 30.0 * c * c * z.powi(4)
                    + 5.0 * a * (a * z0 * z0 - 2.0 * c * z0.powi(3) + 1.0))
        };
        g(z) - g(z0)
    }
}

/// Leaf samples of the tutorial model on a `(z0, z)` grid.
pub fn singular_leaf(model: &Tutorial, z0s: &[f64], zs: &[f64]) -> Vec<LeafSample> {
    let leaf = SingularLeaf::new(model);
    z0s.iter()
        .flat_map(|&z0| zs.iter().map(move |&z| (z0, z)))
        .map(|(z0, z)| leaf.at(z0, z))
        .collect()
}

/// Numeric leaf for models without a separable quadrature: singular arcs
/// integrated from seed points of the singular locus.
pub fn singular_leaf_numeric<M: ControlAffine + Sync>(sys: &M, seeds: &[Vec3], horizon: f64) -> Vec<SingularArc> {
    seeds
        .par_iter()
        .filter_map(|q0| match integrate_singular(sys, q0, horizon, true) {
            Ok(arc) => Some(arc),
            Err(e) => {
                warn!("singular leaf seed {q0:?} skipped: {e}");
                None
            }
        })
        .collect()
}
