//! Extremals of the maximum principle: state/costate integration, the
//! switching function, fold classification and backward sweeps from the
//! target.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liealg::{jacobian, Bracket, Control, ControlAffine, Drift, Frame, SmoothField};
use crate::linalg::{dot, mat_t_vec, norm};
use crate::ode::{integrate, EventFn, OdeOptions, Stop, Trajectory};
use crate::singular::{classify, SingularKind};

/// Control applied along an arc.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ArcLabel {
    Plus,
    Minus,
    Singular,
}

impl ArcLabel {
    pub fn bang(eps: f64) -> Self {
        if eps > 0.0 {
            ArcLabel::Plus
        } else {
            ArcLabel::Minus
        }
    }

    pub fn sign(&self) -> Option<f64> {
        match self {
            ArcLabel::Plus => Some(1.0),
            ArcLabel::Minus => Some(-1.0),
            ArcLabel::Singular => None,
        }
    }

    pub fn symbol(&self) -> &'static str {
        match self {
            ArcLabel::Plus => "+",
            ArcLabel::Minus => "-",
            ArcLabel::Singular => "s",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremalPoint {
    pub t: f64,
    pub q: [f64; 3],
    pub p: [f64; 3],
    pub u: f64,
    pub label: ArcLabel,
    /// `p·(F + uG)`
    pub h: f64,
    /// `p·F + |p·G|`
    pub m: f64,
}

impl ExtremalPoint {
    pub fn new<M: ControlAffine>(sys: &M, t: f64, q: [f64; 3], p: [f64; 3], label: ArcLabel) -> Self {
        let f = sys.drift(&q);
        let g = sys.control(&q);
        let u = match label.sign() {
            Some(e) => e,
            None => crate::singular::classify(sys, &q).u_s.unwrap_or(f64::NAN),
        };
        let (pf, pg) = (dot(&p, &f), dot(&p, &g));
        Self {
            t,
            q,
            p,
            u,
            label,
            h: pf + u * pg,
            m: pf + pg.abs(),
        }
    }
}

/// `(∂H/∂p, −∂H/∂q)` for `H = p·(F + uG)`.
pub fn extremal_rhs<M: ControlAffine>(sys: &M, q: &[f64; 3], p: &[f64; 3], u: f64) -> [f64; 6] {
    let f = sys.drift(q);
    let g = sys.control(q);
    let jf = jacobian(&Drift(sys), q);
    let jg = jacobian(&Control(sys), q);
    let pf = mat_t_vec(&jf, p);
    let pg = mat_t_vec(&jg, p);
    [
        f[0] + u * g[0],
        f[1] + u * g[1],
        f[2] + u * g[2],
        -(pf[0] + u * pg[0]),
        -(pf[1] + u * pg[1]),
        -(pf[2] + u * pg[2]),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SwitchKind {
    Ordinary,
    FoldParabolic,
    FoldHyperbolic,
    FoldElliptic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchingRecord {
    pub t: f64,
    pub q: [f64; 3],
    pub p: [f64; 3],
    pub phi: f64,
    pub phi_dot: f64,
    pub phi_ddot_plus: f64,
    pub phi_ddot_minus: f64,
    pub kind: SwitchKind,
}

/// `Φ`, `Φ̇` and `Φ̈±` at `(q, p)`.
pub fn switching_data<M: ControlAffine>(sys: &M, q: &[f64; 3], p: &[f64; 3]) -> [f64; 4] {
    let fr = Frame::<f64>::at(sys, q);
    let a = dot(p, &fr.gff);
    let b = dot(p, &fr.gfg);
    [dot(p, &fr.g), dot(p, &fr.gf), a + b, a - b]
}

fn switch_scale<M: ControlAffine>(sys: &M, q: &[f64; 3], p: &[f64; 3]) -> f64 {
    (norm(p) * norm(&sys.control(q))).max(f64::MIN_POSITIVE)
}

/// Builds a switching record, tagging it ordinary or by fold kind.
pub fn switching_record<M: ControlAffine>(sys: &M, t: f64, q: [f64; 3], p: [f64; 3], tol: f64) -> Result<SwitchingRecord> {
    let [phi, phi_dot, pp, pm] = switching_data(sys, &q, &p);
    let scale = switch_scale(sys, &q, &p);
    let mut rec = SwitchingRecord {
        t,
        q,
        p,
        phi,
        phi_dot,
        phi_ddot_plus: pp,
        phi_ddot_minus: pm,
        kind: SwitchKind::Ordinary,
    };
    if phi_dot.abs() <= tol * scale * norm(&Bracket(Control(sys), Drift(sys)).eval(&q)).max(1.0) {
        rec.kind = classify_fold_with(&rec, tol * scale)?;
    }
    Ok(rec)
}

/// Sign table of the second derivatives at a fold.
pub fn classify_fold(record: &SwitchingRecord) -> Result<SwitchKind> {
    classify_fold_with(record, 1e-12)
}

fn classify_fold_with(record: &SwitchingRecord, tol: f64) -> Result<SwitchKind> {
    let (p, m) = (record.phi_ddot_plus, record.phi_ddot_minus);
    if p.abs() <= tol || m.abs() <= tol {
        return Err(Error::DegenerateFold { plus: p, minus: m });
    }
    Ok(if p * m > 0.0 {
        SwitchKind::FoldParabolic
    } else if p > 0.0 {
        SwitchKind::FoldHyperbolic
    } else {
        SwitchKind::FoldElliptic
    })
}

fn split6(y: &[f64]) -> ([f64; 3], [f64; 3]) {
    ([y[0], y[1], y[2]], [y[3], y[4], y[5]])
}

/// Integrates state and costate with `u = eps`, or with the singular
/// feedback when `eps` is `None`.
pub fn extremal_flow<M: ControlAffine>(
    sys: &M,
    q0: &[f64; 3],
    p0: &[f64; 3],
    eps: Option<f64>,
    t_end: f64,
    opts: &OdeOptions,
    events: &mut [EventFn],
) -> Result<crate::ode::Solution> {
    let y0 = [q0[0], q0[1], q0[2], p0[0], p0[1], p0[2]];
    integrate(
        |_, y, dy| {
            let (q, p) = split6(y);
            let u = match eps {
                Some(e) => e,
                None => classify(sys, &q).u_s.unwrap_or(f64::NAN),
            };
            dy.copy_from_slice(&extremal_rhs(sys, &q, &p, u));
        },
        0.0,
        &y0,
        t_end,
        opts,
        events,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ArcEnd {
    Horizon,
    Switch,
    LeftBox,
    Saturated,
    Degenerate,
    Failed,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtremalArc {
    pub label: ArcLabel,
    pub t0: f64,
    pub t1: f64,
    pub points: Vec<ExtremalPoint>,
    pub end: ArcEnd,
    #[serde(skip)]
    trajectory: Option<Trajectory>,
}

impl ExtremalArc {
    pub fn start(&self) -> &ExtremalPoint {
        &self.points[0]
    }

    pub fn end_point(&self) -> &ExtremalPoint {
        self.points.last().unwrap()
    }

    /// `(q, p)` at absolute time `t` on the arc.
    pub fn at(&self, t: f64) -> ([f64; 3], [f64; 3]) {
        match &self.trajectory {
            Some(tr) => split6(&tr.at(t - self.t0)),
            None => (self.points[0].q, self.points[0].p),
        }
    }
}

/// Bang arc plus the switching records met on it.
#[derive(Clone, Debug)]
pub struct BangArc {
    pub arc: ExtremalArc,
    pub records: Vec<SwitchingRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArcOptions {
    pub ode: OdeOptions,
    /// Relative tolerance on `Φ`, `Φ̇` for switch and fold detection.
    pub switch_tol: f64,
    /// Axis-aligned box outside of which integration stops.
    pub bounds: Option<([f64; 3], [f64; 3])>,
    /// Sampling of the stored points.
    pub samples: usize,
}

impl Default for ArcOptions {
    fn default() -> Self {
        Self {
            ode: OdeOptions::with_tol(1e-11, 1e-13).h_max(1e-2),
            switch_tol: 1e-9,
            bounds: None,
            samples: 64,
        }
    }
}

fn box_event<'a>(bounds: ([f64; 3], [f64; 3])) -> EventFn<'a> {
    Box::new(move |_, y: &[f64]| {
        (0..3)
            .map(|i| (y[i] - bounds.0[i]).min(bounds.1[i] - y[i]))
            .fold(f64::INFINITY, f64::min)
    })
}

fn sample_arc<M: ControlAffine>(sys: &M, label: ArcLabel, t0: f64, tr: &Trajectory, n: usize) -> Vec<ExtremalPoint> {
    let mut pts: Vec<ExtremalPoint> = tr
        .resample(n.max(1))
        .into_iter()
        .map(|(t, y)| {
            let (q, p) = split6(&y);
            ExtremalPoint::new(sys, t0 + t, q, p, label)
        })
        .collect();
    let (q, p) = split6(tr.last());
    let last = pts.len() - 1;
    pts[last] = ExtremalPoint::new(sys, t0 + tr.t_end(), q, p, label);
    pts
}

/// Bang arc with `u = eps` over the signed span `t_span`, starting at time
/// `t0`. Stops at the first zero of `Φ` unless `through` is set, in which
/// case every zero is recorded and integration continues.
pub fn integrate_bang<M: ControlAffine>(
    sys: &M,
    t0: f64,
    q0: &[f64; 3],
    p0: &[f64; 3],
    eps: f64,
    t_span: f64,
    through: bool,
    opts: &ArcOptions,
) -> Result<BangArc> {
    sys.check_domain(q0)?;
    let label = ArcLabel::bang(eps);
    let mut records = Vec::new();
    let [phi0, phid0, _, _] = switching_data(sys, q0, p0);
    let sc0 = switch_scale(sys, q0, p0);
    if phi0.abs() <= opts.switch_tol * sc0 && phid0.abs() <= opts.switch_tol * sc0 {
        records.push(switching_record(sys, t0, *q0, *p0, opts.switch_tol)?);
    }
    let mut events: Vec<EventFn> = Vec::new();
    if let Some(b) = opts.bounds {
        events.push(box_event(b));
    }
    if !through {
        events.push(Box::new(move |t, y: &[f64]| {
            let (q, p) = split6(y);
            let phi = eps * dot(&p, &sys.control(&q));
            // Values at round-off level right at the start count as zero, and
            // so does a wrong sign left over from locating the previous switch.
            if phi.abs() <= 1e-14 * switch_scale(sys, &q, &p) || (phi < 0.0 && t.abs() <= 1e-10) {
                0.0
            } else {
                phi
            }
        }));
    }
    let sol = extremal_flow(sys, q0, p0, Some(eps), t_span, &opts.ode, &mut events)?;
    let tr = sol.trajectory;
    let has_box = opts.bounds.is_some();
    let end = match sol.stop {
        Stop::Completed => ArcEnd::Horizon,
        Stop::Event { index: 0, .. } if has_box => ArcEnd::LeftBox,
        Stop::Event { .. } => ArcEnd::Switch,
    };
    if end == ArcEnd::Switch {
        let (q, p) = split6(tr.last());
        records.push(switching_record(sys, t0 + tr.t_end(), q, p, opts.switch_tol)?);
    }
    if through {
        records.extend(scan_switches(sys, t0, &tr, opts.switch_tol)?);
    }
    Ok(BangArc {
        arc: ExtremalArc {
            label,
            t0,
            t1: t0 + tr.t_end(),
            points: sample_arc(sys, label, t0, &tr, opts.samples),
            end,
            trajectory: Some(tr),
        },
        records,
    })
}

fn scan_switches<M: ControlAffine>(sys: &M, t0: f64, tr: &Trajectory, tol: f64) -> Result<Vec<SwitchingRecord>> {
    let phi_at = |y: &[f64]| {
        let (q, p) = split6(y);
        let v = dot(&p, &sys.control(&q));
        if v.abs() <= 1e-14 * switch_scale(sys, &q, &p) {
            0.0
        } else {
            v
        }
    };
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for (t, y) in tr.ts.iter().zip(&tr.ys) {
        let v = phi_at(y);
        if let Some((tp, vp)) = prev {
            if vp != 0.0 && vp * v < 0.0 {
                let (mut a, mut b, mut fa) = (tp, *t, vp);
                while (b - a).abs() > 1e-14 * a.abs().max(1.0) {
                    let m = 0.5 * (a + b);
                    let fm = phi_at(&tr.at(m));
                    if (fm < 0.0) == (fa < 0.0) {
                        a = m;
                        fa = fm;
                    } else {
                        b = m;
                    }
                }
                let tm = 0.5 * (a + b);
                let (q, p) = split6(&tr.at(tm));
                out.push(switching_record(sys, t0 + tm, q, p, tol)?);
            }
        }
        if v != 0.0 || prev.is_none() {
            prev = Some((*t, v));
        }
    }
    Ok(out)
}

/// Singular extremal arc from `(q0, p0)` with the feedback `u_s`, stopping
/// at saturation or degeneracy.
pub fn integrate_singular_extremal<M: ControlAffine>(
    sys: &M,
    t0: f64,
    q0: &[f64; 3],
    p0: &[f64; 3],
    t_span: f64,
    opts: &ArcOptions,
) -> Result<ExtremalArc> {
    sys.check_domain(q0)?;
    let c0 = classify(sys, q0);
    let Some(u0) = c0.u_s else {
        return Err(Error::DegenerateSingular { d: c0.d });
    };
    let mut events: Vec<EventFn> = Vec::new();
    if let Some(b) = opts.bounds {
        events.push(box_event(b));
    }
    let n_box = events.len();
    events.push(Box::new(|_, y: &[f64]| {
        let q = [y[0], y[1], y[2]];
        1.0 - classify(sys, &q).u_s.map_or(f64::INFINITY, f64::abs)
    }));
    let d_sign = c0.d.signum();
    events.push(Box::new(move |_, y: &[f64]| d_sign * Frame::<f64>::at(sys, &[y[0], y[1], y[2]]).d()));
    let end0 = if u0.abs() >= 1.0 - 1e-12 { Some(ArcEnd::Saturated) } else { None };
    let (tr, end) = if let Some(e) = end0 {
        let sol = extremal_flow(sys, q0, p0, None, 0.0, &opts.ode, &mut [])?;
        (sol.trajectory, e)
    } else {
        let sol = extremal_flow(sys, q0, p0, None, t_span, &opts.ode, &mut events)?;
        let end = match sol.stop {
            Stop::Completed => ArcEnd::Horizon,
            Stop::Event { index, .. } if index < n_box => ArcEnd::LeftBox,
            Stop::Event { index, .. } if index == n_box => ArcEnd::Saturated,
            Stop::Event { .. } => ArcEnd::Degenerate,
        };
        (sol.trajectory, end)
    };
    Ok(ExtremalArc {
        label: ArcLabel::Singular,
        t0,
        t1: t0 + tr.t_end(),
        points: sample_arc(sys, ArcLabel::Singular, t0, &tr, opts.samples),
        end,
        trajectory: Some(tr),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ChainStop {
    Horizon,
    LeftBox,
    MaxArcs,
    Saturated,
    DegenerateFold,
    Degenerate,
    Failed,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtremalArcChain {
    pub sample: usize,
    /// Arcs in integration order; for backward sweeps the first arc is the
    /// one ending on the target.
    pub arcs: Vec<ExtremalArc>,
    pub switches: Vec<SwitchingRecord>,
    pub stop: ChainStop,
    pub reason: Option<String>,
}

impl ExtremalArcChain {
    pub fn total_time(&self) -> f64 {
        self.arcs.iter().map(|a| (a.t1 - a.t0).abs()).sum()
    }

    /// Labels in forward-time order.
    pub fn forward_labels(&self) -> Vec<ArcLabel> {
        let backward = self.arcs.first().map_or(false, |a| a.t1 < a.t0);
        let mut l: Vec<ArcLabel> = self.arcs.iter().map(|a| a.label).collect();
        if backward {
            l.reverse();
        }
        l
    }

    pub fn pattern(&self) -> String {
        self.forward_labels().iter().map(|l| l.symbol()).collect()
    }

    /// Largest relative change of `M` over all stored points.
    pub fn m_drift(&self) -> f64 {
        let Some(m0) = self.arcs.first().map(|a| a.start().m) else {
            return 0.0;
        };
        self.arcs
            .iter()
            .flat_map(|a| a.points.iter())
            .map(|p| (p.m - m0).abs() / m0.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }

    /// Largest `(q, p)` jump between consecutive arcs.
    pub fn junction_gap(&self) -> f64 {
        self.arcs
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0].end_point(), w[1].start());
                (0..3)
                    .map(|i| (a.q[i] - b.q[i]).abs().max((a.p[i] - b.p[i]).abs()))
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepOptions {
    pub arc: ArcOptions,
    /// Positive duration of the backward integration.
    pub horizon: f64,
    pub max_arcs: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            arc: ArcOptions::default(),
            horizon: 1.0,
            max_arcs: 4,
        }
    }
}

/// Continues a chain backward with bang arcs through ordinary switches.
fn continue_bang<M: ControlAffine>(
    sys: &M,
    chain: &mut ExtremalArcChain,
    t0: f64,
    q0: [f64; 3],
    p0: [f64; 3],
    mut eps: f64,
    opts: &SweepOptions,
) {
    let (mut t, mut q, mut p) = (t0, q0, p0);
    loop {
        if chain.arcs.len() >= opts.max_arcs {
            chain.stop = ChainStop::MaxArcs;
            return;
        }
        let remaining = -opts.horizon - t;
        if remaining >= 0.0 {
            chain.stop = ChainStop::Horizon;
            return;
        }
        let res = integrate_bang(sys, t, &q, &p, eps, remaining, false, &opts.arc);
        let bang = match res {
            Ok(b) => b,
            Err(Error::DegenerateFold { .. }) => {
                chain.stop = ChainStop::DegenerateFold;
                return;
            }
            Err(e) => {
                chain.stop = ChainStop::Failed;
                chain.reason = Some(e.to_string());
                return;
            }
        };
        let end = bang.arc.end;
        let last = *bang.arc.end_point();
        chain.arcs.push(bang.arc);
        // The fold record at t0 (if any) was already stored by the caller.
        chain.switches.extend(bang.records.into_iter().filter(|r| r.t != t));
        match end {
            ArcEnd::Switch => {
                let rec = chain.switches.last().unwrap();
                if rec.kind != SwitchKind::Ordinary {
                    chain.stop = ChainStop::DegenerateFold;
                    return;
                }
                t = last.t;
                q = last.q;
                p = last.p;
                eps = -eps;
            }
            ArcEnd::LeftBox => {
                chain.stop = ChainStop::LeftBox;
                return;
            }
            _ => {
                chain.stop = ChainStop::Horizon;
                return;
            }
        }
    }
}

/// Terminal costate for a time-minimal BC-extremal on the target.
pub fn terminal_costate<M: ControlAffine>(sys: &M) -> [f64; 3] {
    sys.target().normal
}

/// Backward BC-extremals from target points.
///
/// Off the singular locus one chain is produced, ending with the bang arc
/// `σ_ε`, `ε = −sign(n̂·[G,F])`. On the singular locus the chain branches:
/// the singular continuation (if non-degenerate) and every bang arc
/// compatible with the fold signs.
pub fn backward_bc_sweep<M: ControlAffine>(
    sys: &M,
    samples: &[[f64; 3]],
    opts: &SweepOptions,
) -> Vec<ExtremalArcChain> {
    let p0 = terminal_costate(sys);
    let per_sample: Vec<Vec<ExtremalArcChain>> = samples
        .par_iter()
        .enumerate()
        .map(|(k, q0)| sweep_one(sys, k, q0, &p0, opts))
        .collect();
    per_sample.into_iter().flatten().collect()
}

fn new_chain(sample: usize) -> ExtremalArcChain {
    ExtremalArcChain {
        sample,
        arcs: Vec::new(),
        switches: Vec::new(),
        stop: ChainStop::Horizon,
        reason: None,
    }
}

fn sweep_one<M: ControlAffine>(
    sys: &M,
    k: usize,
    q0: &[f64; 3],
    p0: &[f64; 3],
    opts: &SweepOptions,
) -> Vec<ExtremalArcChain> {
    if let Err(e) = sys.check_domain(q0) {
        let mut c = new_chain(k);
        c.stop = ChainStop::Failed;
        c.reason = Some(e.to_string());
        return vec![c];
    }
    let [_, phi_dot, pp, pm] = switching_data(sys, q0, p0);
    let scale = switch_scale(sys, q0, p0) * norm(&Bracket(Control(sys), Drift(sys)).eval(q0)).max(1.0);
    if phi_dot.abs() > opts.arc.switch_tol * scale {
        let mut c = new_chain(k);
        continue_bang(sys, &mut c, 0.0, *q0, *p0, -phi_dot.signum(), opts);
        return vec![c];
    }
    let fold = match switching_record(sys, 0.0, *q0, *p0, opts.arc.switch_tol) {
        Ok(r) => r,
        Err(e) => {
            let mut c = new_chain(k);
            c.stop = ChainStop::DegenerateFold;
            c.reason = Some(e.to_string());
            return vec![c];
        }
    };
    let mut out = Vec::new();
    let cls = classify(sys, q0);
    if matches!(cls.kind, SingularKind::Hyperbolic | SingularKind::Elliptic) {
        let mut c = new_chain(k);
        c.switches.push(fold);
        match integrate_singular_extremal(sys, 0.0, q0, p0, -opts.horizon, &opts.arc) {
            Ok(arc) => {
                c.stop = match arc.end {
                    ArcEnd::Saturated => ChainStop::Saturated,
                    ArcEnd::Degenerate => ChainStop::Degenerate,
                    ArcEnd::LeftBox => ChainStop::LeftBox,
                    _ => ChainStop::Horizon,
                };
                c.arcs.push(arc);
            }
            Err(e) => {
                c.stop = ChainStop::Failed;
                c.reason = Some(e.to_string());
            }
        }
        out.push(c);
    }
    // Backward bang ε is consistent iff sign(Φ̈_ε) = ε.
    for (eps, dd) in [(1.0, pp), (-1.0, pm)] {
        if dd * eps > 0.0 {
            let mut c = new_chain(k);
            c.switches.push(fold);
            continue_bang(sys, &mut c, 0.0, *q0, *p0, eps, opts);
            out.push(c);
        }
    }
    if out.is_empty() {
        let mut c = new_chain(k);
        c.switches.push(fold);
        c.stop = ChainStop::Degenerate;
        c.reason = Some("no BC-extremal terminates at this fold".into());
        out.push(c);
    }
    out
}

/// Bang extremal leaving a singular arc at absolute time `t_exit`, run
/// backward for `span` (negative).
pub fn bang_from_singular<M: ControlAffine>(
    sys: &M,
    singular: &ExtremalArc,
    t_exit: f64,
    eps: f64,
    span: f64,
    opts: &ArcOptions,
) -> Result<BangArc> {
    let (q, p) = singular.at(t_exit);
    integrate_bang(sys, t_exit, &q, &p, eps, span, false, opts)
}
