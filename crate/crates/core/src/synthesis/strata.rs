//! Stratification of the target plane `{n̂·q = d}`: singular locus `𝒮`,
//! exceptional locus `ℰ`, and the saturation, semi-bridge and `u_s = 3`
//! points on `𝒮`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ad::{lift, Dual, Scalar};
use crate::liealg::{ControlAffine, Frame};
use crate::linalg::{cross, dot, normalized, Vec3};
use crate::singular::{classify, SingularClassification};

/// Affine parametrization `q = d n̂ + u e₀ + w e₁` of the target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetPlane {
    pub normal: Vec3,
    pub level: f64,
    pub e: [Vec3; 2],
}

impl TargetPlane {
    /// For `n̂ = e₁` the in-plane basis is `(e₂, e₃)`.
    pub fn of<M: ControlAffine>(sys: &M) -> Self {
        let t = sys.target();
        let n = t.normal;
        let mut i = 0;
        for k in 1..3 {
            if n[k].abs() < n[i].abs() {
                i = k;
            }
        }
        let mut a = [0.0; 3];
        a[i] = 1.0;
        let k = dot(&n, &a);
        let e0 = normalized(&[a[0] - k * n[0], a[1] - k * n[1], a[2] - k * n[2]]);
        let e1 = cross(&n, &e0);
        Self { normal: n, level: t.level, e: [e0, e1] }
    }

    pub fn point(&self, c: [f64; 2]) -> Vec3 {
        std::array::from_fn(|i| self.level * self.normal[i] + c[0] * self.e[0][i] + c[1] * self.e[1][i])
    }

    pub fn coords(&self, q: &Vec3) -> [f64; 2] {
        [dot(q, &self.e[0]), dot(q, &self.e[1])]
    }
}

/// Scalar functions on the target whose zero sets form the strata.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LocusFn {
    /// `n̂·[G,F]`
    Singular,
    /// `n̂·F`
    Exceptional,
    /// `n̂·[[G,F],G]`
    SemiBridge,
    /// `D′² − D²`, zero where `|u_s| = 1`.
    Saturation,
    /// `D′ + 3D`, zero where `u_s = 3`.
    Bifurcation,
}

fn locus_value<M: ControlAffine, S: Scalar>(sys: &M, n: &Vec3, q: &[S; 3], f: LocusFn) -> S {
    let fr = Frame::<S>::at(sys, q);
    let n: [S; 3] = lift(n);
    match f {
        LocusFn::Singular => dot(&n, &fr.gf),
        LocusFn::Exceptional => dot(&n, &fr.f),
        LocusFn::SemiBridge => dot(&n, &fr.gfg),
        LocusFn::Saturation => {
            let (d, dp) = (fr.d(), fr.d_prime());
            dp * dp - d * d
        }
        LocusFn::Bifurcation => fr.d_prime() + S::from_f64(3.0) * fr.d(),
    }
}

/// Value and in-plane gradient of `f`; `None` outside the model's domain.
pub fn locus_value_grad<M: ControlAffine>(
    sys: &M,
    plane: &TargetPlane,
    c: [f64; 2],
    f: LocusFn,
) -> Option<(f64, [f64; 2])> {
    let q = plane.point(c);
    sys.check_domain(&q).ok()?;
    let mut v = 0.0;
    let mut g = [0.0; 2];
    for k in 0..2 {
        let qd: [Dual<f64>; 3] = std::array::from_fn(|i| Dual::new(q[i], plane.e[k][i]));
        let r = locus_value(sys, &plane.normal, &qd, f);
        v = r.v;
        g[k] = r.d;
    }
    (v.is_finite() && g.iter().all(|x| x.is_finite())).then_some((v, g))
}

fn locus_at<M: ControlAffine>(sys: &M, plane: &TargetPlane, c: [f64; 2], f: LocusFn) -> Option<f64> {
    let q = plane.point(c);
    sys.check_domain(&q).ok()?;
    let v = locus_value(sys, &plane.normal, &q, f);
    v.is_finite().then_some(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrataTolerances {
    /// Distance-to-locus threshold `|f| ≤ tol · max(‖∇f‖, 1)` for the
    /// `𝒮`, `ℰ` and semi-bridge tags.
    pub locus: f64,
    /// `||u_s| − 1|` threshold for the saturated tag, also used for `u_s = 3`.
    pub saturation: f64,
    /// Bracket width at which bisection stops.
    pub bisection: f64,
}

impl Default for StrataTolerances {
    fn default() -> Self {
        Self {
            locus: 1e-9,
            saturation: 1e-7,
            bisection: 1e-12,
        }
    }
}

/// A point of the target with its stratum tags.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratumSample {
    pub q: Vec3,
    pub coords: [f64; 2],
    /// `n̂·[G,F](q)`
    pub phi_dot: f64,
    /// `n̂·F(q)`
    pub n_f: f64,
    /// `n̂·[[G,F],G](q)`
    pub n_gfg: f64,
    pub on_singular: bool,
    pub on_exceptional: bool,
    pub classification: SingularClassification,
    pub u_s: Option<f64>,
    pub admissible: bool,
    pub saturated: bool,
    pub semi_bridge: bool,
    /// Terminal control `−sign(n̂·[G,F])` of the BC-extremal off `𝒮`.
    pub eps: Option<f64>,
}

fn near_zero(vg: Option<(f64, [f64; 2])>, tol: f64) -> (f64, bool) {
    match vg {
        Some((v, g)) => (v, v.abs() <= tol * g[0].hypot(g[1]).max(1.0)),
        None => (f64::NAN, false),
    }
}

impl StratumSample {
    pub fn at<M: ControlAffine>(sys: &M, plane: &TargetPlane, c: [f64; 2], tol: &StrataTolerances) -> Self {
        let q = plane.point(c);
        let (phi_dot, on_singular) = near_zero(locus_value_grad(sys, plane, c, LocusFn::Singular), tol.locus);
        let (n_f, on_exceptional) = near_zero(locus_value_grad(sys, plane, c, LocusFn::Exceptional), tol.locus);
        let (n_gfg, sb) = near_zero(locus_value_grad(sys, plane, c, LocusFn::SemiBridge), tol.locus);
        let classification = classify(sys, &q);
        let u_s = classification.u_s;
        Self {
            q,
            coords: c,
            phi_dot,
            n_f,
            n_gfg,
            on_singular,
            on_exceptional,
            classification,
            u_s,
            admissible: u_s.is_some_and(|u| u.abs() <= 1.0 + tol.saturation),
            saturated: u_s.is_some_and(|u| (u.abs() - 1.0).abs() <= tol.saturation),
            semi_bridge: on_singular && sb,
            eps: (!on_singular && phi_dot.is_finite()).then(|| -phi_dot.signum()),
        }
    }

    pub fn from_state<M: ControlAffine>(sys: &M, q: &Vec3, tol: &StrataTolerances) -> Self {
        let plane = TargetPlane::of(sys);
        Self::at(sys, &plane, plane.coords(q), tol)
    }

    /// Off `𝒮`: the BC-extremal ends with a bang arc.
    pub fn is_ordinary(&self) -> bool {
        self.eps.is_some()
    }
}

/// Rectangular grid in target coordinates, `(lo, hi, n)` per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetGrid {
    pub u: (f64, f64, usize),
    pub w: (f64, f64, usize),
}

impl TargetGrid {
    pub fn centered(c: [f64; 2], half: f64, n: usize) -> Self {
        Self {
            u: (c[0] - half, c[0] + half, n),
            w: (c[1] - half, c[1] + half, n),
        }
    }

    fn axis(r: (f64, f64, usize)) -> Vec<f64> {
        let n = r.2.max(2);
        (0..n).map(|i| r.0 + (r.1 - r.0) * i as f64 / (n - 1) as f64).collect()
    }

    pub fn nodes(&self) -> Vec<[f64; 2]> {
        let (us, ws) = (Self::axis(self.u), Self::axis(self.w));
        ws.iter().flat_map(|&w| us.iter().map(move |&u| [u, w])).collect()
    }

    fn spacing(&self) -> f64 {
        let s = |r: (f64, f64, usize)| (r.1 - r.0).abs() / (r.2.max(2) - 1) as f64;
        s(self.u).min(s(self.w))
    }

    fn contains(&self, c: [f64; 2]) -> bool {
        let inside = |x: f64, r: (f64, f64, usize)| x >= r.0.min(r.1) && x <= r.0.max(r.1);
        inside(c[0], self.u) && inside(c[1], self.w)
    }
}

/// Output of [`stratify_target`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Stratification {
    pub plane: TargetPlane,
    pub grid: Vec<StratumSample>,
    /// Roots of `n̂·[G,F]` on grid lines.
    pub singular: Vec<StratumSample>,
    /// Roots of `n̂·F` on grid lines.
    pub exceptional: Vec<StratumSample>,
    /// Connected pieces of `𝒮` traced by continuation.
    pub singular_curves: Vec<Vec<StratumSample>>,
    pub exceptional_curves: Vec<Vec<StratumSample>>,
    /// Points of `𝒮` with `|u_s| = 1`.
    pub saturation: Vec<StratumSample>,
    pub semi_bridges: Vec<StratumSample>,
    /// Points of `𝒮` with `u_s = 3`.
    pub bifurcations: Vec<StratumSample>,
}

/// Sign-change roots of `f` along one line `c(s) = a + s (b − a)`, `s ∈ [0, 1]`,
/// sampled at `n` nodes and refined by bisection.
fn line_roots<M: ControlAffine>(
    sys: &M,
    plane: &TargetPlane,
    f: LocusFn,
    a: [f64; 2],
    b: [f64; 2],
    n: usize,
    tol: f64,
) -> Vec<[f64; 2]> {
    let at = |s: f64| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
    let len = (b[0] - a[0]).hypot(b[1] - a[1]).max(f64::MIN_POSITIVE);
    let n = n.max(2);
    let vals: Vec<Option<f64>> = (0..n).map(|i| locus_at(sys, plane, at(i as f64 / (n - 1) as f64), f)).collect();
    let mut out = Vec::new();
    for i in 0..n {
        let s0 = i as f64 / (n - 1) as f64;
        let Some(f0) = vals[i] else { continue };
        if f0 == 0.0 {
            out.push(at(s0));
            continue;
        }
        let Some(Some(f1)) = vals.get(i + 1) else { continue };
        if f0 * f1 >= 0.0 {
            continue;
        }
        let (mut lo, mut hi, mut flo) = (s0, (i + 1) as f64 / (n - 1) as f64, f0);
        for _ in 0..200 {
            if (hi - lo) * len <= tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let Some(fm) = locus_at(sys, plane, at(mid), f) else { break };
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if fm * flo < 0.0 {
                hi = mid;
            } else {
                lo = mid;
                flo = fm;
            }
        }
        let pick = match (locus_at(sys, plane, at(lo), f), locus_at(sys, plane, at(hi), f)) {
            (Some(x), Some(y)) if y.abs() < x.abs() => hi,
            _ => lo,
        };
        out.push(at(pick));
    }
    out
}

fn grid_roots<M: ControlAffine>(sys: &M, plane: &TargetPlane, grid: &TargetGrid, f: LocusFn, tol: f64) -> Vec<[f64; 2]> {
    let (us, ws) = (TargetGrid::axis(grid.u), TargetGrid::axis(grid.w));
    let mut lines: Vec<([f64; 2], [f64; 2], usize)> = Vec::new();
    for &w in &ws {
        lines.push(([grid.u.0, w], [grid.u.1, w], us.len()));
    }
    for &u in &us {
        lines.push(([u, grid.w.0], [u, grid.w.1], ws.len()));
    }
    lines
        .par_iter()
        .map(|&(a, b, n)| line_roots(sys, plane, f, a, b, n, tol))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Newton projection of `c` onto the zero set of `f` along the gradient.
fn project<M: ControlAffine>(sys: &M, plane: &TargetPlane, f: LocusFn, mut c: [f64; 2]) -> Option<[f64; 2]> {
    for _ in 0..30 {
        let (v, g) = locus_value_grad(sys, plane, c, f)?;
        let gg = g[0] * g[0] + g[1] * g[1];
        if gg == 0.0 {
            return None;
        }
        if v.abs() <= 1e-15 * gg.sqrt().max(1.0) {
            return Some(c);
        }
        let k = v / gg;
        c = [c[0] - k * g[0], c[1] - k * g[1]];
        if (k * gg.sqrt()).abs() <= 1e-15 * (1.0 + c[0].abs() + c[1].abs()) {
            return Some(c);
        }
    }
    let (v, g) = locus_value_grad(sys, plane, c, f)?;
    (v.abs() <= 1e-10 * g[0].hypot(g[1]).max(1.0)).then_some(c)
}

/// Pseudo-arclength continuation of the zero set of `f` through `seed`,
/// both directions, until the curve leaves the grid rectangle, closes, or
/// the corrector fails.
pub fn trace_locus<M: ControlAffine>(
    sys: &M,
    plane: &TargetPlane,
    f: LocusFn,
    seed: [f64; 2],
    step: f64,
    grid: &TargetGrid,
    max_steps: usize,
) -> Vec<[f64; 2]> {
    let Some(start) = project(sys, plane, f, seed) else {
        return Vec::new();
    };
    let tangent = |c: [f64; 2]| -> Option<[f64; 2]> {
        let (_, g) = locus_value_grad(sys, plane, c, f)?;
        let n = g[0].hypot(g[1]);
        (n > 0.0).then(|| [-g[1] / n, g[0] / n])
    };
    let mut halves: Vec<Vec<[f64; 2]>> = Vec::new();
    let mut closed = false;
    for dir in [1.0, -1.0] {
        let mut pts = vec![start];
        let Some(t0) = tangent(start) else { break };
        let mut prev_t = [dir * t0[0], dir * t0[1]];
        let mut c = start;
        for _ in 0..max_steps {
            let Some(mut t) = tangent(c) else { break };
            if t[0] * prev_t[0] + t[1] * prev_t[1] < 0.0 {
                t = [-t[0], -t[1]];
            }
            let mut h = step;
            let mut next = None;
            for _ in 0..6 {
                let pred = [c[0] + h * t[0], c[1] + h * t[1]];
                if let Some(p) = project(sys, plane, f, pred) {
                    let jump = (p[0] - pred[0]).hypot(p[1] - pred[1]);
                    let adv = (p[0] - c[0]) * t[0] + (p[1] - c[1]) * t[1];
                    if jump <= 0.5 * h && adv > 0.0 {
                        next = Some(p);
                        break;
                    }
                }
                h *= 0.5;
            }
            let Some(p) = next else { break };
            if !grid.contains(p) {
                break;
            }
            prev_t = t;
            c = p;
            pts.push(p);
            if pts.len() > 3 && (p[0] - start[0]).hypot(p[1] - start[1]) < 0.75 * step {
                closed = true;
                break;
            }
        }
        halves.push(pts);
        if closed {
            break;
        }
    }
    let mut out: Vec<[f64; 2]> = Vec::new();
    if let Some(back) = halves.get(1) {
        out.extend(back.iter().skip(1).rev());
    }
    if let Some(fwd) = halves.first() {
        out.extend(fwd.iter());
    }
    out
}

/// Newton on `(f, g) = 0` in target coordinates.
pub fn intersect_loci<M: ControlAffine>(
    sys: &M,
    plane: &TargetPlane,
    f: LocusFn,
    g: LocusFn,
    mut c: [f64; 2],
) -> Option<[f64; 2]> {
    for _ in 0..60 {
        let (a, ga) = locus_value_grad(sys, plane, c, f)?;
        let (b, gb) = locus_value_grad(sys, plane, c, g)?;
        let det = ga[0] * gb[1] - ga[1] * gb[0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dx = (a * gb[1] - b * ga[1]) / det;
        let dy = (ga[0] * b - gb[0] * a) / det;
        c = [c[0] - dx, c[1] - dy];
        if dx.hypot(dy) <= 1e-15 * (1.0 + c[0].abs() + c[1].abs()) {
            break;
        }
    }
    let (a, ga) = locus_value_grad(sys, plane, c, f)?;
    let (b, gb) = locus_value_grad(sys, plane, c, g)?;
    let ok = a.abs() <= 1e-10 * ga[0].hypot(ga[1]).max(1.0) && b.abs() <= 1e-10 * gb[0].hypot(gb[1]).max(1.0);
    ok.then_some(c)
}

fn trace_all<M: ControlAffine>(
    sys: &M,
    plane: &TargetPlane,
    f: LocusFn,
    grid: &TargetGrid,
    seeds: &[[f64; 2]],
) -> Vec<Vec<[f64; 2]>> {
    let step = 0.25 * grid.spacing();
    let max_steps = 64 * (grid.u.2 + grid.w.2);
    let mut covered = vec![false; seeds.len()];
    let mut curves = Vec::new();
    for i in 0..seeds.len() {
        if covered[i] {
            continue;
        }
        let curve = trace_locus(sys, plane, f, seeds[i], step, grid, max_steps);
        covered[i] = true;
        if curve.len() < 2 {
            continue;
        }
        for (j, s) in seeds.iter().enumerate() {
            if !covered[j] && curve.iter().any(|p| (p[0] - s[0]).hypot(p[1] - s[1]) <= step) {
                covered[j] = true;
            }
        }
        curves.push(curve);
    }
    curves
}

/// Points of a traced curve where `g` changes sign, refined to `f = g = 0`.
fn curve_events<M: ControlAffine>(
    sys: &M,
    plane: &TargetPlane,
    f: LocusFn,
    g: LocusFn,
    curve: &[[f64; 2]],
) -> Vec<[f64; 2]> {
    let vals: Vec<Option<f64>> = curve.iter().map(|c| locus_at(sys, plane, *c, g)).collect();
    let mut out: Vec<[f64; 2]> = Vec::new();
    for i in 0..curve.len().saturating_sub(1) {
        let (Some(a), Some(b)) = (vals[i], vals[i + 1]) else { continue };
        if a * b > 0.0 || (b == 0.0 && i + 2 < curve.len()) {
            continue;
        }
        let (p, q) = (curve[i], curve[i + 1]);
        let s = if a == b { 0.5 } else { a / (a - b) };
        let mid = [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
        let seg = (q[0] - p[0]).hypot(q[1] - p[1]);
        if let Some(r) = intersect_loci(sys, plane, f, g, mid) {
            let near = (r[0] - mid[0]).hypot(r[1] - mid[1]) <= 2.0 * seg.max(1e-12);
            let fresh = out.iter().all(|o| (o[0] - r[0]).hypot(o[1] - r[1]) > 1e-8);
            if near && fresh {
                out.push(r);
            }
        }
    }
    out
}

fn dedup(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[1].total_cmp(&b[1]).then(a[0].total_cmp(&b[0])));
    let mut out: Vec<[f64; 2]> = Vec::new();
    for p in pts {
        if out.iter().all(|o| (o[0] - p[0]).hypot(o[1] - p[1]) > 1e-8) {
            out.push(p);
        }
    }
    out
}

/// Tags every grid node and locates `𝒮`, `ℰ` and the special points of `𝒮`.
pub fn stratify_target<M: ControlAffine>(sys: &M, grid: &TargetGrid, tol: &StrataTolerances) -> Stratification {
    let plane = TargetPlane::of(sys);
    let tag = |cs: &[[f64; 2]]| -> Vec<StratumSample> {
        cs.par_iter().map(|c| StratumSample::at(sys, &plane, *c, tol)).collect()
    };
    let nodes = grid.nodes();
    let s_roots = grid_roots(sys, &plane, grid, LocusFn::Singular, tol.bisection);
    let e_roots = grid_roots(sys, &plane, grid, LocusFn::Exceptional, tol.bisection);
    let s_curves = trace_all(sys, &plane, LocusFn::Singular, grid, &s_roots);
    let e_curves = trace_all(sys, &plane, LocusFn::Exceptional, grid, &e_roots);
    let events = |g: LocusFn| -> Vec<[f64; 2]> {
        dedup(
            s_curves
                .iter()
                .flat_map(|c| curve_events(sys, &plane, LocusFn::Singular, g, c))
                .filter(|c| grid.contains(*c))
                .collect(),
        )
    };
    let saturation = events(LocusFn::Saturation);
    let semi = events(LocusFn::SemiBridge);
    let bif = events(LocusFn::Bifurcation);
    let mut semi_bridges = tag(&semi);
    for s in &mut semi_bridges {
        // refined to both zero sets, so the tag does not depend on the tolerance
        s.semi_bridge = s.on_singular;
    }
    Stratification {
        plane,
        grid: tag(&nodes),
        singular: tag(&s_roots),
        exceptional: tag(&e_roots),
        singular_curves: s_curves.iter().map(|c| tag(c)).collect(),
        exceptional_curves: e_curves.iter().map(|c| tag(c)).collect(),
        saturation: tag(&saturation),
        semi_bridges,
        bifurcations: tag(&bif)
            .into_iter()
            .filter(|s| s.u_s.is_some_and(|u| (u - 3.0).abs() < 1e-6))
            .collect(),
    }
}
