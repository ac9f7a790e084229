//! Vector fields on ℝ³, Lie and Poisson brackets, and the determinants
//! `D`, `D′`, `D″` of a single-input control-affine system.
//!
//! Bracket convention: `[X, Y](q) = (∂X/∂q) Y − (∂Y/∂q) X`. With it the
//! switching function `Φ = p·G` satisfies `Φ̇ = p·[G, F]`.
//!
//! Derivatives come from forward-mode AD (see [`crate::ad`]). A bracket is
//! itself a [`SmoothField`], so nested brackets and their Jacobians are
//! evaluated on nested dual numbers and stay exact to rounding.

use serde::{Deserialize, Serialize};

use crate::ad::{lift, real_parts, seed, tangents, Dual, Scalar};
use crate::error::{Error, Result};
use crate::linalg::{det3, dot, mat_vec, norm, sub, Mat3, Vec3};

/// A vector field on ℝ³ that can be evaluated on any [`Scalar`].
pub trait SmoothField {
    fn eval<S: Scalar>(&self, q: &[S; 3]) -> [S; 3];
}

impl<T: SmoothField + ?Sized> SmoothField for &T {
    fn eval<S: Scalar>(&self, q: &[S; 3]) -> [S; 3] {
        (**self).eval(q)
    }
}

/// Jacobian `J[i][j] = ∂X_i/∂q_j`.
pub fn jacobian<X: SmoothField + ?Sized, S: Scalar>(x: &X, q: &[S; 3]) -> Mat3<S> {
    let mut cols = [[S::zero(); 3]; 3];
    for (j, col) in cols.iter_mut().enumerate() {
        *col = tangents(&x.eval(&seed(q, j)));
    }
    std::array::from_fn(|i| std::array::from_fn(|j| cols[j][i]))
}

/// Directional derivative `(∂X/∂q) v`.
pub fn directional<X: SmoothField + ?Sized, S: Scalar>(x: &X, q: &[S; 3], v: &[S; 3]) -> [S; 3] {
    let qd: [Dual<S>; 3] = std::array::from_fn(|i| Dual::new(q[i], v[i]));
    tangents(&x.eval(&qd))
}

/// Second derivatives: `h[i][j][k] = ∂²X_i/∂q_j∂q_k`.
pub fn hessian<X: SmoothField + ?Sized>(x: &X, q: &[f64; 3]) -> [[[f64; 3]; 3]; 3] {
    let mut h = [[[0.0; 3]; 3]; 3];
    for j in 0..3 {
        for k in 0..3 {
            let qq: [Dual<Dual<f64>>; 3] = std::array::from_fn(|i| {
                Dual::new(
                    Dual::new(q[i], if i == j { 1.0 } else { 0.0 }),
                    Dual::new(if i == k { 1.0 } else { 0.0 }, 0.0),
                )
            });
            let out = x.eval(&qq);
            for i in 0..3 {
                h[i][j][k] = out[i].d.d;
            }
        }
    }
    h
}

/// Central finite-difference Jacobian, used only for self-checks.
pub fn jacobian_fd<X: SmoothField + ?Sized>(x: &X, q: &[f64; 3], step: f64) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for j in 0..3 {
        let h = step * q[j].abs().max(1.0);
        let mut qp = *q;
        let mut qm = *q;
        qp[j] += h;
        qm[j] -= h;
        let (fp, fm) = (x.eval(&qp), x.eval(&qm));
        for i in 0..3 {
            m[i][j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    m
}

/// Lazily evaluated bracket `[X, Y]`.
#[derive(Clone, Copy, Debug)]
pub struct Bracket<X, Y>(pub X, pub Y);

impl<X: SmoothField, Y: SmoothField> SmoothField for Bracket<X, Y> {
    fn eval<S: Scalar>(&self, q: &[S; 3]) -> [S; 3] {
        let xv = self.0.eval(q);
        let yv = self.1.eval(q);
        sub(&directional(&self.0, q, &yv), &directional(&self.1, q, &xv))
    }
}

/// Constant vector field.
#[derive(Clone, Copy, Debug)]
pub struct ConstantField(pub [f64; 3]);

impl SmoothField for ConstantField {
    fn eval<S: Scalar>(&self, _q: &[S; 3]) -> [S; 3] {
        lift(&self.0)
    }
}

pub fn lie_bracket<X: SmoothField, Y: SmoothField>(x: &X, y: &Y, q: &[f64; 3]) -> [f64; 3] {
    Bracket(x, y).eval(q)
}

/// `H_X(q, p) = p·X(q)`.
pub fn hamiltonian_lift<X: SmoothField>(x: &X, q: &[f64; 3], p: &Costate) -> f64 {
    dot(&p.0, &x.eval(q))
}

/// `{H_X, H_Y}(q, p) = p·[X, Y](q)`.
pub fn poisson_bracket<X: SmoothField, Y: SmoothField>(
    x: &X,
    y: &Y,
    q: &[f64; 3],
    p: &Costate,
) -> f64 {
    dot(&p.0, &lie_bracket(x, y, q))
}

/// Adjoint vector; never zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Costate(pub [f64; 3]);

impl Costate {
    pub fn new(p: [f64; 3]) -> Result<Self> {
        if norm(&p) > 0.0 && p.iter().all(|x| x.is_finite()) {
            Ok(Self(p))
        } else {
            Err(Error::InvalidInput("costate must be a finite nonzero vector".into()))
        }
    }
}

/// Affine target `{q : n̂·q = level}` with outward unit normal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub normal: [f64; 3],
    pub level: f64,
}

impl Target {
    pub fn new(normal: [f64; 3], level: f64) -> Result<Self> {
        let n = norm(&normal);
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("target normal must have unit norm, got {n}")));
        }
        Ok(Self { normal, level })
    }

    /// The plane `x = level`.
    pub fn x_level(level: f64) -> Self {
        Self {
            normal: [1.0, 0.0, 0.0],
            level,
        }
    }

    /// Signed distance `n̂·q − level`.
    pub fn gap(&self, q: &[f64; 3]) -> f64 {
        dot(&self.normal, q) - self.level
    }
}

/// Single-input control-affine system `q̇ = F(q) + u G(q)` with `|u| ≤ 1`
/// and a codimension-one affine target.
pub trait ControlAffine: Sync {
    fn drift<S: Scalar>(&self, q: &[S; 3]) -> [S; 3];

    fn control<S: Scalar>(&self, q: &[S; 3]) -> [S; 3];

    fn target(&self) -> Target;

    fn name(&self) -> &str;

    /// Rejects states outside the model's domain of definition.
    fn check_domain(&self, _q: &[f64; 3]) -> Result<()> {
        Ok(())
    }
}

/// The drift `F` of a system, as a field.
#[derive(Debug)]
pub struct Drift<'a, M: ?Sized>(pub &'a M);

/// The control field `G` of a system, as a field.
#[derive(Debug)]
pub struct Control<'a, M: ?Sized>(pub &'a M);

impl<M: ?Sized> Clone for Drift<'_, M> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<M: ?Sized> Copy for Drift<'_, M> {}

impl<M: ?Sized> Clone for Control<'_, M> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<M: ?Sized> Copy for Control<'_, M> {}

impl<M: ControlAffine> SmoothField for Drift<'_, M> {
    fn eval<S: Scalar>(&self, q: &[S; 3]) -> [S; 3] {
        self.0.drift(q)
    }
}

impl<M: ControlAffine> SmoothField for Control<'_, M> {
    fn eval<S: Scalar>(&self, q: &[S; 3]) -> [S; 3] {
        self.0.control(q)
    }
}

/// `F`, `G` and the brackets needed for singular-arc computations, all at
/// one point.
#[derive(Clone, Copy, Debug)]
pub struct Frame<S> {
    pub f: [S; 3],
    pub g: [S; 3],
    /// `[G, F]`
    pub gf: [S; 3],
    /// `[[G, F], G]`
    pub gfg: [S; 3],
    /// `[[G, F], F]`
    pub gff: [S; 3],
}

impl<S: Scalar> Frame<S> {
    pub fn at<M: ControlAffine>(sys: &M, q: &[S; 3]) -> Self {
        let fd = Drift(sys);
        let gd = Control(sys);
        let gf_field = Bracket(gd, fd);
        Self {
            f: fd.eval(q),
            g: gd.eval(q),
            gf: gf_field.eval(q),
            gfg: Bracket(gf_field, gd).eval(q),
            gff: Bracket(gf_field, fd).eval(q),
        }
    }

    /// `D = det(G, [G,F], [[G,F],G])`
    pub fn d(&self) -> S {
        det3(&self.g, &self.gf, &self.gfg)
    }

    /// `D′ = det(G, [G,F], [[G,F],F])`
    pub fn d_prime(&self) -> S {
        det3(&self.g, &self.gf, &self.gff)
    }

    /// `D″ = det(G, [G,F], F)`
    pub fn d_second(&self) -> S {
        det3(&self.g, &self.gf, &self.f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Determinants {
    pub d: f64,
    pub d_prime: f64,
    pub d_second: f64,
}

/// `(D, D′, D″)` at `q`.
pub fn determinants<M: ControlAffine>(sys: &M, q: &[f64; 3]) -> Determinants {
    let fr = Frame::<f64>::at(sys, q);
    Determinants {
        d: fr.d(),
        d_prime: fr.d_prime(),
        d_second: fr.d_second(),
    }
}

/// Dimension-checked variant for callers holding a dynamic state.
pub fn determinants_dyn<M: ControlAffine>(sys: &M, q: &[f64]) -> Result<Determinants> {
    let q: [f64; 3] = q
        .try_into()
        .map_err(|_| Error::Unsupported(format!("determinants need n = 3, got n = {}", q.len())))?;
    Ok(determinants(sys, &q))
}

/// Magnitude used to make bracket tolerances scale-free: the product of the
/// norms of the three columns entering `D`.
pub fn frame_scale(fr: &Frame<f64>) -> f64 {
    (norm(&fr.g) * norm(&fr.gf) * norm(&fr.gfg).max(norm(&fr.gff))).max(f64::MIN_POSITIVE)
}

/// Jacobian of a system's field `F + u G` at a real point.
pub fn closed_loop_jacobian<M: ControlAffine>(sys: &M, q: &[f64; 3], u: f64) -> Mat3 {
    let jf = jacobian(&Drift(sys), q);
    let jg = jacobian(&Control(sys), q);
    std::array::from_fn(|i| std::array::from_fn(|j| jf[i][j] + u * jg[i][j]))
}

/// `F(q) + u G(q)`.
pub fn closed_loop<M: ControlAffine>(sys: &M, q: &[f64; 3], u: f64) -> Vec3 {
    let f = sys.drift(q);
    let g = sys.control(q);
    [f[0] + u * g[0], f[1] + u * g[1], f[2] + u * g[2]]
}

/// Relative error between AD and finite-difference Jacobians.
pub fn jacobian_check<X: SmoothField>(x: &X, q: &[f64; 3]) -> f64 {
    let ad = jacobian(x, q);
    let fd = jacobian_fd(x, q, 1e-5);
    let mut num = 0.0_f64;
    let mut den = 0.0_f64;
    for i in 0..3 {
        for j in 0..3 {
            num = num.max((ad[i][j] - fd[i][j]).abs());
            den = den.max(ad[i][j].abs());
        }
    }
    num / den.max(1.0)
}

/// `∂X/∂q · v` on a real point, via one dual evaluation.
pub fn apply_jacobian<X: SmoothField>(x: &X, q: &[f64; 3], v: &[f64; 3]) -> [f64; 3] {
    directional(x, q, v)
}

/// Re-export of the point conversion used by callers mixing scalar types.
pub fn to_real<S: Scalar>(q: &[S; 3]) -> [f64; 3] {
    real_parts(q)
}

/// `J v` for an explicit Jacobian.
pub fn jv(m: &Mat3, v: &Vec3) -> Vec3 {
    mat_vec(m, v)
}
