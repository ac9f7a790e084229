use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::truncated::{poisson, Ring, TruncatedSeries as Ts};
use crate::error::{Error, Result};
use crate::liealg::ControlAffine;
use crate::models::{HyperbolicUnfolding, SemiNormalForm, Tutorial};

/// Model whose fields are polynomials, so they can be evaluated on series.
pub trait PolynomialSystem: ControlAffine {
    fn drift_series(&self, q: &[Ts; 3]) -> [Ts; 3];
    fn control_series(&self, q: &[Ts; 3]) -> [Ts; 3];
}

fn unit(ring: &Arc<Ring>, i: usize) -> [Ts; 3] {
    std::array::from_fn(|j| Ts::constant(ring, if i == j { 1.0 } else { 0.0 }))
}

impl PolynomialSystem for Tutorial {
    fn drift_series(&self, q: &[Ts; 3]) -> [Ts; 3] {
        let [_, y, z] = q;
        let r = y.ring();
        let x_dot = (y.scale(self.a) - (y * z).scale(3.0 * self.c) + z.pow(3).scale(self.c)).add_const(1.0);
        [x_dot, z.clone(), Ts::zero(r)]
    }

    fn control_series(&self, q: &[Ts; 3]) -> [Ts; 3] {
        unit(q[0].ring(), 2)
    }
}

impl PolynomialSystem for SemiNormalForm {
    fn drift_series(&self, q: &[Ts; 3]) -> [Ts; 3] {
        let [x, y, z] = q;
        let z2 = z * z;
        let x_dot = (z2.scale(self.a)
            + (x * &(y * y)).scale(self.alpha[0])
            + (y * &z2).scale(self.alpha[1])
            + (x * &z2).scale(self.alpha[2]))
        .add_const(1.0);
        let z_dot = (z.scale(self.c) - x.scale(self.usx) - y.scale(self.usy)).add_const(-self.us0);
        [x_dot, z.scale(self.b), z_dot]
    }

    fn control_series(&self, q: &[Ts; 3]) -> [Ts; 3] {
        unit(q[0].ring(), 2)
    }
}

impl PolynomialSystem for HyperbolicUnfolding {
    fn drift_series(&self, q: &[Ts; 3]) -> [Ts; 3] {
        let r = q[0].ring();
        [
            (&q[1] * &q[1]).scale(self.a).add_const(1.0),
            Ts::constant(r, -self.us0),
            Ts::zero(r),
        ]
    }

    fn control_series(&self, q: &[Ts; 3]) -> [Ts; 3] {
        unit(q[0].ring(), 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ControlLaw {
    Bang(f64),
    /// `u = −D′/D`
    Singular,
}

/// Series of `(x, y, z, p₁, p₂, p₃)` along the flow.
#[derive(Clone, Debug)]
pub struct FlowExpansion {
    pub coords: [Ts; 6],
    pub law: ControlLaw,
    pub time_var: usize,
}

impl FlowExpansion {
    pub fn state(&self) -> [Ts; 3] {
        std::array::from_fn(|i| self.coords[i].clone())
    }

    pub fn p3(&self) -> &Ts {
        &self.coords[5]
    }

    pub fn eval(&self, x: &[f64]) -> [f64; 6] {
        std::array::from_fn(|i| self.coords[i].eval(x))
    }
}

/// Exact phase-space polynomials on `(x, y, z, p₁, p₂, p₃)`.
pub fn phase_ring() -> Arc<Ring> {
    Ring::new(&["x", "y", "z", "p1", "p2", "p3"], 64)
}

fn phase_vars(ring: &Arc<Ring>) -> [Ts; 6] {
    std::array::from_fn(|i| Ts::var(ring, i))
}

fn dot3(a: &[Ts], b: &[Ts]) -> Ts {
    let mut s = Ts::zero(a[0].ring());
    for (x, y) in a.iter().zip(b) {
        s = s + x * y;
    }
    s
}

/// Lie brackets on polynomial fields, `[X,Y] = (∂X/∂q) Y − (∂Y/∂q) X`.
fn poly_bracket(x: &[Ts; 3], y: &[Ts; 3]) -> [Ts; 3] {
    std::array::from_fn(|i| {
        let mut s = Ts::zero(x[0].ring());
        for j in 0..3 {
            s = s + x[i].derivative(j) * &y[j] - y[i].derivative(j) * &x[j];
        }
        s
    })
}

fn det_cols(a: &[Ts; 3], b: &[Ts; 3], c: &[Ts; 3]) -> Ts {
    &a[0] * &(&b[1] * &c[2] - &b[2] * &c[1]) + &a[1] * &(&b[2] * &c[0] - &b[0] * &c[2])
        + &a[2] * &(&b[0] * &c[1] - &b[1] * &c[0])
}

/// `D` and `D′` as polynomials on the phase ring.
pub fn determinant_polys<M: PolynomialSystem>(model: &M, ring: &Arc<Ring>) -> (Ts, Ts) {
    let v = phase_vars(ring);
    let q = [v[0].clone(), v[1].clone(), v[2].clone()];
    let f = model.drift_series(&q);
    let g = model.control_series(&q);
    let gf = poly_bracket(&g, &f);
    let gfg = poly_bracket(&gf, &g);
    let gff = poly_bracket(&gf, &f);
    (det_cols(&g, &gf, &gfg), det_cols(&g, &gf, &gff))
}

/// Lie series `Σ_{k ≤ ord} t^k/k! ad_H^k(z_i)` of the extremal flow for a
/// bang control, evaluated at the (possibly symbolic) initial point `init`.
/// For the singular feedback, whose Hamiltonian is rational, the same
/// Taylor expansion is produced by Picard iteration on series.
pub fn lie_series_flow<M: PolynomialSystem>(
    model: &M,
    law: ControlLaw,
    init: &[Ts; 6],
    time_var: usize,
    ord: u16,
) -> Result<FlowExpansion> {
    if ord == 0 {
        return Err(Error::InvalidInput("series order must be at least 1".into()));
    }
    let coords = match law {
        ControlLaw::Bang(eps) => bang_series(model, eps, init, time_var, ord),
        ControlLaw::Singular => singular_series(model, init, time_var, ord)?,
    };
    Ok(FlowExpansion { coords, law, time_var })
}

fn bang_series<M: PolynomialSystem>(model: &M, eps: f64, init: &[Ts; 6], tv: usize, ord: u16) -> [Ts; 6] {
    let pr = phase_ring();
    let v = phase_vars(&pr);
    let q = [v[0].clone(), v[1].clone(), v[2].clone()];
    let f = model.drift_series(&q);
    let g = model.control_series(&q);
    let field: Vec<Ts> = (0..3).map(|i| &f[i] + &g[i].scale(eps)).collect();
    let h = dot3(&v[3..], &field);
    let target = init[0].ring();
    let t = Ts::var(target, tv);
    std::array::from_fn(|i| {
        let mut a = v[i].clone();
        let mut tk = Ts::constant(target, 1.0);
        let mut fact = 1.0;
        let mut out = Ts::zero(target);
        for k in 0..=ord {
            if k > 0 {
                a = poisson(&a, &h, 3);
                tk = &tk * &t;
                fact *= k as f64;
            }
            if a.is_zero() {
                break;
            }
            out = out + (a.compose(init) * &tk).scale(1.0 / fact);
        }
        out.truncate_in(tv, ord)
    })
}

fn singular_series<M: PolynomialSystem>(model: &M, init: &[Ts; 6], tv: usize, ord: u16) -> Result<[Ts; 6]> {
    let pr = phase_ring();
    let v = phase_vars(&pr);
    let q = [v[0].clone(), v[1].clone(), v[2].clone()];
    let f = model.drift_series(&q);
    let g = model.control_series(&q);
    let pf = dot3(&v[3..], &f);
    let pg = dot3(&v[3..], &g);
    let (d, dp) = determinant_polys(model, &pr);
    let d0 = d.compose(init);
    if d0.constant_term().abs() < 1e-14 {
        return Err(Error::Pole(format!("D vanishes at the expansion point ({:e})", d0.constant_term())));
    }
    let rhs = |z: &[Ts; 6]| -> Result<[Ts; 6]> {
        let dz = d.compose(z);
        let inv = dz.recip()?;
        let u = -(dp.compose(z) * &inv);
        let pgz = pg.compose(z);
        let mut out: [Ts; 6] = std::array::from_fn(|_| Ts::zero(z[0].ring()));
        for i in 0..3 {
            out[i] = f[i].compose(z) + &u * &g[i].compose(z);
            // ∂u/∂q_i = −(D′_i D − D′ D_i)/D²
            let du = -((dp.derivative(i) * &d - &dp * &d.derivative(i)).compose(z) * &inv * &inv);
            out[3 + i] = -(pf.derivative(i).compose(z) + &u * &pg.derivative(i).compose(z) + &pgz * &du);
        }
        Ok(out)
    };
    let mut z = init.clone();
    for _ in 0..=ord {
        let dz = rhs(&z)?;
        z = std::array::from_fn(|i| (&init[i] + &dz[i].integral(tv)).truncate_in(tv, ord));
    }
    Ok(z)
}

/// Ring `(t, w0, s0)` truncated in `t` only.
pub fn symbolic_ring(ord: u16) -> Arc<Ring> {
    Ring::weighted(&["t", "w0", "s0"], &[1, 0, 0], ord as u32)
}

/// Initial point `(d, w0, s0; n̂)` on the target `x = d` of a model.
pub fn target_init<M: PolynomialSystem>(model: &M, ring: &Arc<Ring>) -> [Ts; 6] {
    let tg = model.target();
    let w0 = Ts::named(ring, "w0");
    let s0 = Ts::named(ring, "s0");
    [
        Ts::constant(ring, tg.level),
        w0,
        s0,
        Ts::constant(ring, tg.normal[0]),
        Ts::constant(ring, tg.normal[1]),
        Ts::constant(ring, tg.normal[2]),
    ]
}

/// Flow of BC-extremals leaving the target point `(0, w0, s0)` with `u = ε`.
pub fn bc_flow<M: PolynomialSystem>(model: &M, eps: f64, ord: u16) -> Result<FlowExpansion> {
    let ring = symbolic_ring(ord);
    lie_series_flow(model, ControlLaw::Bang(eps), &target_init(model, &ring), 0, ord)
}

/// `Γ_ε(0, w0, s0)`: the `(x, y, z)` components of [`bc_flow`].
pub fn gamma_surface<M: PolynomialSystem>(model: &M, eps: f64, ord: u16) -> Result<[Ts; 3]> {
    Ok(bc_flow(model, eps, ord)?.state())
}

/// Switching surface `K_ε(t, s0)` together with `Γ_ε` and the solved
/// `w0(t, s0)`.
#[derive(Clone, Debug)]
pub struct SwitchingSurface {
    pub eps: f64,
    pub gamma: [Ts; 3],
    pub w0: Ts,
    pub k: [Ts; 3],
}

/// Solves `p₃ = 0` for `w0` as a series in `(t, s0)` and substitutes it
/// into `Γ_ε`.
pub fn switching_surface_series<M: PolynomialSystem>(model: &M, eps: f64, ord: u16) -> Result<SwitchingSurface> {
    // One extra order so that p3/t keeps order `ord`.
    let flow = bc_flow(model, eps, ord + 1)?;
    let ring = flow.coords[0].ring().clone();
    let iw = ring.index("w0").unwrap();
    let q = flow.p3().divide_by_var(0)?;
    let w = solve_for(&q, iw)?;
    let k: [Ts; 3] = std::array::from_fn(|i| flow.coords[i].substitute(iw, &w).truncate_in(0, ord));
    let gamma: [Ts; 3] = std::array::from_fn(|i| flow.coords[i].truncate_in(0, ord));
    Ok(SwitchingSurface {
        eps,
        gamma,
        w0: w.truncate_in(0, ord),
        k,
    })
}

/// Series root `v(other vars)` of `q(…, v, …) = 0` by Newton iteration on
/// series. The slope `∂q/∂v` must have an invertible leading part.
pub fn solve_for(q: &Ts, var: usize) -> Result<Ts> {
    let ring = q.ring().clone();
    let dq = q.derivative(var);
    let mut w = Ts::zero(&ring);
    let iters = ring.order() as usize + 4;
    for _ in 0..iters {
        let slope = dq.substitute(var, &w);
        let inv = slope.recip().map_err(|e| match e {
            Error::Pole(_) | Error::Unsupported(_) => {
                Error::CannotSolve(format!("degenerate linear coefficient in {}", ring.names()[var]))
            }
            other => other,
        })?;
        let next = &w - &(q.substitute(var, &w) * &inv);
        if (&next - &w).is_zero() {
            return Ok(next);
        }
        w = next;
    }
    let res = q.substitute(var, &w);
    if res.max_abs_coeff() > 1e-10 {
        return Err(Error::CannotSolve(format!("series Newton residual {:e}", res.max_abs_coeff())));
    }
    Ok(w)
}

fn at_t0(s: &Ts, s0: f64, w0: f64) -> f64 {
    s.eval(&[0.0, w0, s0])
}

/// `det(∂K_ε/∂t, ∂K_ε/∂s0, ∂Γ_ε/∂t)` at `t = 0`.
pub fn crossing_test(surface: &SwitchingSurface, s0: f64) -> f64 {
    let w0 = at_t0(&surface.w0, s0, 0.0);
    let kt: [f64; 3] = std::array::from_fn(|i| at_t0(&surface.k[i].derivative(0), s0, 0.0));
    let ks: [f64; 3] = std::array::from_fn(|i| at_t0(&surface.k[i].derivative(2), s0, 0.0));
    let gt: [f64; 3] = std::array::from_fn(|i| at_t0(&surface.gamma[i].derivative(0), s0, w0));
    crate::linalg::det3(&kt, &ks, &gt)
}


#[cfg(test)]
mod tutorial_forms {
    use super::*;

    #[test]
    fn p3_closed_form() {
        let (a, c) = (1.3, 0.7);
        let m = Tutorial::new(a, c).unwrap();
        for eps in [1.0, -1.0] {
            let f = bc_flow(&m, eps, 6).unwrap();
            for &(t, w0, s0) in &[(0.1, 0.2, -0.3), (-0.2, 0.5, 0.4)] {
                let want = 0.5 * t * (-2.0 * c * t * t + (a - 6.0 * c * eps * s0) * t - 6.0 * c * s0 * s0 + 6.0 * c * w0);
                let got = f.p3().eval(&[t, w0, s0]);
                assert!((got - want).abs() < 1e-13, "{eps}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn switching_surface_y_component() {
        let (a, c) = (1.0, 1.0);
        let m = Tutorial::new(a, c).unwrap();
        for eps in [1.0, -1.0] {
            let k = switching_surface_series(&m, eps, 4).unwrap();
            for &(t, s0) in &[(0.01, 0.3), (-0.02, -0.2)] {
                let want = s0 * s0 + t * ((eps + 1.0) * s0 - a / (6.0 * c)) + (3.0 * eps + 2.0) * t * t / 6.0;
                let got = k.k[1].eval(&[t, 0.0, s0]);
                assert!((got - want).abs() < 1e-12, "{eps}: {got} vs {want}");
            }
            for s0 in [0.5, 0.2] {
                let big_a = a * s0 * s0 - 2.0 * c * s0.powi(3) + 1.0;
                let want = big_a * (6.0 * c * eps * s0 - a) / (6.0 * c);
                assert!((crossing_test(&k, s0) - want).abs() < 1e-12);
            }
        }
    }
}
