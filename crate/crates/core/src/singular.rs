//! Singular feedback, hyperbolic/elliptic/exceptional classification,
//! singular-arc integration and conjugate/focal point detection.

use serde::{Deserialize, Serialize};

use crate::ad::{Dual, Scalar};
use crate::error::{Error, Result};
use crate::liealg::{jacobian, Bracket, Control, ControlAffine, Costate, Drift, Frame, SmoothField};
use crate::linalg::{cross, det3, dot, mat_vec, norm, Mat3, Vec3};
use crate::ode::{integrate, EventFn, OdeOptions, Stop, Trajectory};

/// Relative thresholds for degeneracy (`D ≈ 0`) and exceptionality
/// (`D″ ≈ 0`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularTolerances {
    pub deg: f64,
    pub exc: f64,
}

impl Default for SingularTolerances {
    fn default() -> Self {
        Self { deg: 1e-9, exc: 1e-9 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SingularKind {
    Hyperbolic,
    Elliptic,
    Exceptional,
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularClassification {
    pub kind: SingularKind,
    pub d: f64,
    pub d_prime: f64,
    pub d_second: f64,
    /// `−D′/D`, absent when degenerate.
    pub u_s: Option<f64>,
}

fn scales(fr: &Frame<f64>) -> (f64, f64) {
    let base = norm(&fr.g) * norm(&fr.gf);
    let d_scale = base * norm(&fr.gfg).max(norm(&fr.gff)).max(1.0);
    let e_scale = base * norm(&fr.f).max(1.0);
    (d_scale.max(f64::MIN_POSITIVE), e_scale.max(f64::MIN_POSITIVE))
}

pub fn classify_with<M: ControlAffine>(sys: &M, q: &[f64; 3], tol: &SingularTolerances) -> SingularClassification {
    let fr = Frame::<f64>::at(sys, q);
    let (d, dp, dpp) = (fr.d(), fr.d_prime(), fr.d_second());
    let (ds, es) = scales(&fr);
    let degenerate = d.abs() <= tol.deg * ds;
    let kind = if degenerate {
        SingularKind::Degenerate
    } else if dpp.abs() <= tol.exc * es {
        SingularKind::Exceptional
    } else if d * dpp > 0.0 {
        SingularKind::Hyperbolic
    } else {
        SingularKind::Elliptic
    };
    SingularClassification {
        kind,
        d,
        d_prime: dp,
        d_second: dpp,
        u_s: (!degenerate).then(|| -dp / d),
    }
}

pub fn classify<M: ControlAffine>(sys: &M, q: &[f64; 3]) -> SingularClassification {
    classify_with(sys, q, &SingularTolerances::default())
}

/// `u_s = −D′/D`.
pub fn singular_control<M: ControlAffine>(sys: &M, q: &[f64; 3]) -> Result<f64> {
    let c = classify(sys, q);
    c.u_s.ok_or(Error::DegenerateSingular { d: c.d })
}

/// Singular field `X_s = F − (D′/D) G` as a differentiable field.
#[derive(Debug)]
pub struct SingularField<'a, M>(pub &'a M);

/// Desingularized field `D F − D′ G`.
#[derive(Debug)]
pub struct Desingularized<'a, M>(pub &'a M);

impl<M: ControlAffine> SmoothField for SingularField<'_, M> {
    fn eval<S: Scalar>(&self, q: &[S; 3]) -> [S; 3] {
        let fr = Frame::at(self.0, q);
        let k = fr.d_prime() / fr.d();
        std::array::from_fn(|i| fr.f[i] - k * fr.g[i])
    }
}

impl<M: ControlAffine> SmoothField for Desingularized<'_, M> {
    fn eval<S: Scalar>(&self, q: &[S; 3]) -> [S; 3] {
        let fr = Frame::at(self.0, q);
        let (d, dp) = (fr.d(), fr.d_prime());
        std::array::from_fn(|i| d * fr.f[i] - dp * fr.g[i])
    }
}

pub fn singular_field<M: ControlAffine>(sys: &M, q: &[f64; 3]) -> Result<Vec3> {
    singular_control(sys, q)?;
    Ok(SingularField(sys).eval(q))
}

pub fn desingularized_field<M: ControlAffine>(sys: &M, q: &[f64; 3]) -> Vec3 {
    Desingularized(sys).eval(q)
}

/// Time derivative of `u_s` along the singular flow.
pub fn singular_control_rate<M: ControlAffine>(sys: &M, q: &[f64; 3]) -> Result<f64> {
    let xs = singular_field(sys, q)?;
    let qd: [Dual<f64>; 3] = std::array::from_fn(|i| Dual::new(q[i], xs[i]));
    let fr = Frame::at(sys, &qd);
    Ok((-(fr.d_prime() / fr.d())).d)
}

/// Costate annihilating `G` and `[G, F]`, unit norm, oriented so that
/// `p·F ≥ 0`.
pub fn singular_costate<M: ControlAffine>(sys: &M, q: &[f64; 3]) -> Result<Costate> {
    let fr = Frame::<f64>::at(sys, q);
    let p = cross(&fr.g, &fr.gf);
    let n = norm(&p);
    if !(n > 0.0) {
        return Err(Error::DegenerateSingular { d: 0.0 });
    }
    let s = if dot(&p, &fr.f) < 0.0 { -1.0 / n } else { 1.0 / n };
    Costate::new([p[0] * s, p[1] * s, p[2] * s])
}

/// `p·([[G,F],F] + u_s [[G,F],G])` with the reconstructed costate; zero on
/// a genuine singular extremal.
pub fn constraint_residual<M: ControlAffine>(sys: &M, q: &[f64; 3]) -> Result<f64> {
    let p = singular_costate(sys, q)?.0;
    let u = singular_control(sys, q)?;
    let fr = Frame::<f64>::at(sys, q);
    Ok(dot(&p, &fr.gff) + u * dot(&p, &fr.gfg))
}

/// `{{H_G, H_F}, H_G} = p·[[G,F],G]` with the reconstructed costate.
pub fn legendre_clebsch<M: ControlAffine>(sys: &M, q: &[f64; 3]) -> Result<f64> {
    let p = singular_costate(sys, q)?.0;
    Ok(dot(&p, &Frame::<f64>::at(sys, q).gfg))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ArcStop {
    Horizon,
    Saturated { t: f64 },
    Degenerate { t: f64 },
    SaturatedAtStart,
    DegenerateAtStart,
}

#[derive(Clone, Debug)]
pub struct SingularArc {
    pub q0: [f64; 3],
    pub times: Vec<f64>,
    pub states: Vec<[f64; 3]>,
    pub controls: Vec<f64>,
    pub kinds: Vec<SingularKind>,
    pub admissible: Vec<bool>,
    pub stop: ArcStop,
    trajectory: Option<Trajectory>,
}

impl SingularArc {
    fn empty(q0: [f64; 3], stop: ArcStop) -> Self {
        Self {
            q0,
            times: vec![0.0],
            states: vec![q0],
            controls: Vec::new(),
            kinds: Vec::new(),
            admissible: Vec::new(),
            stop,
            trajectory: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.trajectory.is_none()
    }

    /// Signed duration.
    pub fn duration(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn end_state(&self) -> [f64; 3] {
        *self.states.last().unwrap()
    }

    pub fn saturation_time(&self) -> Option<f64> {
        match self.stop {
            ArcStop::Saturated { t } => Some(t),
            _ => None,
        }
    }

    pub fn state_at(&self, t: f64) -> [f64; 3] {
        match &self.trajectory {
            Some(tr) => to3(&tr.at(t)),
            None => self.q0,
        }
    }
}

fn to3(v: &[f64]) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

/// Integrates `q̇ = X_s(q)` for a signed `horizon`. With `admissibility`
/// the arc stops where `|u_s|` reaches 1. It always stops where `D`
/// vanishes.
pub fn integrate_singular<M: ControlAffine>(
    sys: &M,
    q0: &[f64; 3],
    horizon: f64,
    admissibility: bool,
) -> Result<SingularArc> {
    integrate_singular_with(sys, q0, horizon, admissibility, &OdeOptions::default(), &SingularTolerances::default())
}

pub fn integrate_singular_with<M: ControlAffine>(
    sys: &M,
    q0: &[f64; 3],
    horizon: f64,
    admissibility: bool,
    opts: &OdeOptions,
    tol: &SingularTolerances,
) -> Result<SingularArc> {
    sys.check_domain(q0)?;
    let c0 = classify_with(sys, q0, tol);
    let Some(u0) = c0.u_s else {
        return Ok(SingularArc::empty(*q0, ArcStop::DegenerateAtStart));
    };
    if admissibility && u0.abs() >= 1.0 - 1e-12 {
        return Ok(SingularArc::empty(*q0, ArcStop::SaturatedAtStart));
    }
    let field = SingularField(sys);
    let d_sign = c0.d.signum();
    let mut events: Vec<EventFn> = vec![Box::new(move |_, y: &[f64]| {
        let fr = Frame::<f64>::at(sys, &to3(y));
        d_sign * fr.d() - tol.deg * scales(&fr).0
    })];
    if admissibility {
        events.push(Box::new(|_, y: &[f64]| {
            let fr = Frame::<f64>::at(sys, &to3(y));
            1.0 - (fr.d_prime() / fr.d()).abs()
        }));
    }
    let mut opts = *opts;
    opts.event_tol = opts.event_tol.min(1e-12);
    let sol = integrate(
        |_, y, dy| dy.copy_from_slice(&field.eval(&to3(y))),
        0.0,
        q0,
        horizon,
        &opts,
        &mut events,
    )?;
    let stop = match sol.stop {
        Stop::Completed => ArcStop::Horizon,
        Stop::Event { index: 0, t } => ArcStop::Degenerate { t },
        Stop::Event { t, .. } => ArcStop::Saturated { t },
    };
    let tr = sol.trajectory;
    let mut arc = SingularArc::empty(*q0, stop);
    arc.times.clear();
    arc.states.clear();
    for (t, y) in tr.ts.iter().zip(&tr.ys) {
        let q = to3(y);
        let c = classify_with(sys, &q, tol);
        let u = c.u_s.unwrap_or(f64::NAN);
        arc.times.push(*t);
        arc.states.push(q);
        arc.controls.push(u);
        arc.kinds.push(c.kind);
        arc.admissible.push(u.abs() <= 1.0 + 1e-9);
    }
    arc.trajectory = Some(tr);
    Ok(arc)
}

/// What the conjugate and focal tests need from a singular flow.
pub trait SingularDynamics: Sync {
    fn singular_vector(&self, q: &[f64; 3]) -> Vec3;
    /// `∂X_s/∂q`
    fn singular_jacobian(&self, q: &[f64; 3]) -> Mat3;
    fn control_field(&self, q: &[f64; 3]) -> Vec3;
    fn drift_field(&self, q: &[f64; 3]) -> Vec3;
    fn bracket_gf(&self, q: &[f64; 3]) -> Vec3;

    fn d_second(&self, q: &[f64; 3]) -> f64 {
        det3(&self.control_field(q), &self.bracket_gf(q), &self.drift_field(q))
    }
}

/// [`SingularDynamics`] of a control-affine model, derivatives by AD.
pub struct AdSingular<'a, M>(pub &'a M);

impl<M: ControlAffine> SingularDynamics for AdSingular<'_, M> {
    fn singular_vector(&self, q: &[f64; 3]) -> Vec3 {
        SingularField(self.0).eval(q)
    }

    fn singular_jacobian(&self, q: &[f64; 3]) -> Mat3 {
        jacobian(&SingularField(self.0), q)
    }

    fn control_field(&self, q: &[f64; 3]) -> Vec3 {
        self.0.control(q)
    }

    fn drift_field(&self, q: &[f64; 3]) -> Vec3 {
        self.0.drift(q)
    }

    fn bracket_gf(&self, q: &[f64; 3]) -> Vec3 {
        Bracket(Control(self.0), Drift(self.0)).eval(q)
    }
}

/// Initial Jacobi field for focal points, `W₀ = λ₁ G(q₀) + λ₂ [G,F](q₀)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FocalInit {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl FocalInit {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        if lambda1 == 0.0 || !lambda1.is_finite() || !lambda2.is_finite() {
            return Err(Error::InvalidFocalInit("λ1 must be finite and nonzero".into()));
        }
        if lambda2 == 0.0 {
            return Err(Error::InvalidFocalInit(
                "W0 collinear to G gives a structural zero at t = 0; use the conjugate test".into(),
            ));
        }
        Ok(Self { lambda1, lambda2 })
    }

    /// Least-squares decomposition of a tangent vector on the frame
    /// `(G, [G,F])`; the residual must stay below `1e-8` relative.
    pub fn from_tangent<D: SingularDynamics>(dynamics: &D, q0: &[f64; 3], tangent: &Vec3) -> Result<Self> {
        let g = dynamics.control_field(q0);
        let gf = dynamics.bracket_gf(q0);
        let (gg, gh, hh) = (dot(&g, &g), dot(&g, &gf), dot(&gf, &gf));
        let det = gg * hh - gh * gh;
        if !(det.abs() > 1e-300) {
            return Err(Error::InvalidFocalInit("G and [G,F] are collinear".into()));
        }
        let (bg, bh) = (dot(&g, tangent), dot(&gf, tangent));
        let l1 = (hh * bg - gh * bh) / det;
        let l2 = (gg * bh - gh * bg) / det;
        let res: Vec3 = std::array::from_fn(|i| tangent[i] - l1 * g[i] - l2 * gf[i]);
        if norm(&res) > 1e-8 * norm(tangent).max(1e-300) {
            return Err(Error::InvalidFocalInit(format!(
                "tangent is not in span(G, [G,F]): residual {:e}",
                norm(&res)
            )));
        }
        Self::new(l1, l2)
    }

    pub fn vector<D: SingularDynamics>(&self, dynamics: &D, q0: &[f64; 3]) -> Vec3 {
        let g = dynamics.control_field(q0);
        let gf = dynamics.bracket_gf(q0);
        std::array::from_fn(|i| self.lambda1 * g[i] + self.lambda2 * gf[i])
    }
}

/// Singular flow together with a Jacobi field `V`.
pub fn jacobi_flow<D: SingularDynamics>(
    dynamics: &D,
    q0: &[f64; 3],
    v0: &Vec3,
    horizon: f64,
    opts: &OdeOptions,
) -> Result<Trajectory> {
    let y0 = [q0[0], q0[1], q0[2], v0[0], v0[1], v0[2]];
    let sol = integrate(
        |_, y, dy| {
            let q = to3(y);
            let xs = dynamics.singular_vector(&q);
            let jv = mat_vec(&dynamics.singular_jacobian(&q), &[y[3], y[4], y[5]]);
            dy[..3].copy_from_slice(&xs);
            dy[3..].copy_from_slice(&jv);
        },
        0.0,
        &y0,
        horizon,
        opts,
        &mut [],
    )?;
    Ok(sol.trajectory)
}

fn collinearity<D: SingularDynamics>(dynamics: &D, y: &[f64]) -> f64 {
    let q = to3(y);
    det3(&[y[3], y[4], y[5]], &dynamics.control_field(&q), &dynamics.drift_field(&q))
}

/// First time after an exclusion radius where `det(V, G, F)` changes sign.
fn first_collinearity<D: SingularDynamics>(dynamics: &D, tr: &Trajectory, exclusion: f64) -> Result<Option<f64>> {
    let t0 = tr.t_start();
    let dir = (tr.t_end() - t0).signum();
    let mut prev: Option<(f64, f64, f64)> = None;
    for (t, y) in tr.ts.iter().zip(&tr.ys) {
        let q = to3(y);
        let dpp = dynamics.d_second(&q);
        if let Some((tp, _, dp)) = prev {
            if dp * dpp < 0.0 {
                return Err(Error::ClassificationChange { t: 0.5 * (tp + t) });
            }
        }
        let c = collinearity(dynamics, y);
        let past = (t - t0) * dir > exclusion;
        if let Some((tp, cp, _)) = prev {
            if past && cp != 0.0 && (cp * c <= 0.0) {
                let (mut a, mut b, mut fa) = (tp, *t, cp);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    let fm = collinearity(dynamics, &tr.at(m));
                    if fm == 0.0 {
                        return Ok(Some(m));
                    }
                    if (fa < 0.0) == (fm < 0.0) {
                        a = m;
                        fa = fm;
                    } else {
                        b = m;
                    }
                    if (b - a).abs() < 1e-13 * t.abs().max(1.0) {
                        break;
                    }
                }
                return Ok(Some(0.5 * (a + b)));
            }
        }
        prev = Some((*t, c, dpp));
    }
    Ok(None)
}

fn detection_options(horizon: f64) -> OdeOptions {
    OdeOptions::with_tol(1e-12, 1e-14).h_max(horizon.abs() / 200.0)
}

/// First conjugate time of the singular arc from `q0`, searched on a
/// signed `horizon`: the first zero of `det(V(t), G, F)` with
/// `V(0) = G(q0)`.
pub fn conjugate_time_with<D: SingularDynamics>(dynamics: &D, q0: &[f64; 3], horizon: f64) -> Result<Option<f64>> {
    let v0 = dynamics.control_field(q0);
    let tr = jacobi_flow(dynamics, q0, &v0, horizon, &detection_options(horizon))?;
    let exclusion = 10.0 * (tr.ts.get(1).copied().unwrap_or(0.0) - tr.ts[0]).abs();
    first_collinearity(dynamics, &tr, exclusion)
}

pub fn conjugate_time<M: ControlAffine>(sys: &M, arc: &SingularArc) -> Result<Option<f64>> {
    if arc.is_empty() {
        return Ok(None);
    }
    conjugate_time_with(&AdSingular(sys), &arc.q0, arc.duration())
}

/// First focal time: the first zero of `det(W(t), G, F)` with `W(0) = W₀`.
pub fn focal_time_with<D: SingularDynamics>(
    dynamics: &D,
    q0: &[f64; 3],
    horizon: f64,
    init: &FocalInit,
) -> Result<Option<f64>> {
    let w0 = init.vector(dynamics, q0);
    let tr = jacobi_flow(dynamics, q0, &w0, horizon, &detection_options(horizon))?;
    first_collinearity(dynamics, &tr, 0.0)
}

pub fn focal_time<M: ControlAffine>(sys: &M, arc: &SingularArc, init: &FocalInit) -> Result<Option<f64>> {
    if arc.is_empty() {
        return Ok(None);
    }
    focal_time_with(&AdSingular(sys), &arc.q0, arc.duration(), init)
}
