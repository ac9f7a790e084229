//! Exhaustive search over short arc sequences with gridded switching times.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extremal::ArcLabel;
use crate::liealg::{closed_loop, ControlAffine, Target};
use crate::linalg::Vec3;
use crate::singular::classify;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    /// Switching-time grid step.
    pub dt: f64,
    /// RK4 steps per grid step.
    pub substeps: usize,
    pub horizon: f64,
    pub max_arcs: usize,
    pub alphabet: Vec<ArcLabel>,
    pub bounds: Option<(Vec3, Vec3)>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            substeps: 4,
            horizon: 1.0,
            max_arcs: 3,
            alphabet: vec![ArcLabel::Plus, ArcLabel::Minus, ArcLabel::Singular],
            bounds: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Hitting time of the target.
    pub time: f64,
    pub sequence: Vec<ArcLabel>,
    /// Start times of the arcs after the first.
    pub switch_times: Vec<f64>,
    pub end: Vec3,
    /// Candidates that reached the target.
    pub candidates: usize,
}

impl OracleResult {
    pub fn pattern(&self) -> String {
        self.sequence.iter().map(|l| l.symbol()).collect()
    }
}

struct Search<'a, M, U> {
    sys: &'a M,
    feedback: &'a U,
    opts: &'a OracleOptions,
    target: Target,
    h: f64,
    side: f64,
}

#[derive(Default)]
struct Best {
    hit: Option<(f64, Vec<(ArcLabel, f64)>, Vec3)>,
    count: usize,
}

impl Best {
    fn time(&self) -> f64 {
        self.hit.as_ref().map_or(f64::INFINITY, |h| h.0)
    }
}

impl<M: ControlAffine, U: Fn(&Vec3) -> Option<f64>> Search<'_, M, U> {
    fn control(&self, label: ArcLabel, q: &Vec3) -> Option<f64> {
        match label.sign() {
            Some(e) => Some(e),
            None => (self.feedback)(q).filter(|u| u.abs() <= 1.0 + 1e-9),
        }
    }

    fn rhs(&self, label: ArcLabel, q: &Vec3) -> Option<Vec3> {
        let u = self.control(label, q)?;
        let f = closed_loop(self.sys, q, u);
        f.iter().all(|x| x.is_finite()).then_some(f)
    }

    fn rk4(&self, label: ArcLabel, q: &Vec3) -> Option<Vec3> {
        let h = self.h;
        let ax = |a: &Vec3, k: &Vec3, s: f64| -> Vec3 { std::array::from_fn(|i| a[i] + s * k[i]) };
        let k1 = self.rhs(label, q)?;
        let k2 = self.rhs(label, &ax(q, &k1, 0.5 * h))?;
        let k3 = self.rhs(label, &ax(q, &k2, 0.5 * h))?;
        let k4 = self.rhs(label, &ax(q, &k3, h))?;
        let out: Vec3 = std::array::from_fn(|i| q[i] + h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]));
        self.sys.check_domain(&out).ok()?;
        if let Some((lo, hi)) = self.opts.bounds {
            if (0..3).any(|i| out[i] < lo[i] || out[i] > hi[i]) {
                return None;
            }
        }
        Some(out)
    }

    fn arc(&self, q0: Vec3, t0: f64, label: ArcLabel, prefix: &mut Vec<(ArcLabel, f64)>, best: &mut Best) {
        let m = self.opts.substeps.max(1);
        let (mut q, mut t, mut k) = (q0, t0, 0usize);
        loop {
            if t >= self.opts.horizon || t > best.time() + 1e-12 {
                return;
            }
            if k > 0 && k % m == 0 && prefix.len() < self.opts.max_arcs {
                for &next in &self.opts.alphabet {
                    if next != label {
                        prefix.push((next, t));
                        self.arc(q, t, next, prefix, best);
                        prefix.pop();
                    }
                }
            }
            let Some(qn) = self.rk4(label, &q) else { return };
            let (g0, g1) = (self.target.gap(&q), self.target.gap(&qn));
            if g1 * self.side >= 0.0 {
                let s = if g0 == g1 { 1.0 } else { g0 / (g0 - g1) };
                let th = t + s * self.h;
                best.count += 1;
                let shorter = best.hit.as_ref().map_or(true, |h| prefix.len() < h.1.len());
                if th < best.time() - 1e-12 || (th <= best.time() + 1e-12 && shorter) {
                    let end = std::array::from_fn(|i| q[i] + s * (qn[i] - q[i]));
                    best.hit = Some((th, prefix.clone(), end));
                }
                return;
            }
            q = qn;
            t = t0 + (k + 1) as f64 * self.h;
            k += 1;
        }
    }
}

/// Minimum hitting time of the target over sequences of at most
/// `max_arcs` arcs from the alphabet, switching on the `dt` grid. The
/// singular arc uses `u_s = −D′/D` and ends where `|u_s| > 1`.
pub fn brute_force_oracle<M: ControlAffine>(sys: &M, q_start: &Vec3, opts: &OracleOptions) -> Result<OracleResult> {
    brute_force_oracle_with(sys, q_start, opts, &|q: &Vec3| classify(sys, q).u_s)
}

/// As [`brute_force_oracle`] with a given singular feedback.
pub fn brute_force_oracle_with<M, U>(sys: &M, q_start: &Vec3, opts: &OracleOptions, feedback: &U) -> Result<OracleResult>
where
    M: ControlAffine,
    U: Fn(&Vec3) -> Option<f64> + Sync,
{
    if !(opts.dt > 0.0 && opts.horizon > 0.0) || opts.max_arcs == 0 || opts.alphabet.is_empty() {
        return Err(Error::InvalidInput("oracle needs dt, horizon > 0 and a nonempty alphabet".into()));
    }
    sys.check_domain(q_start)?;
    let target = sys.target();
    let g0 = target.gap(q_start);
    if g0 == 0.0 {
        return Ok(OracleResult { time: 0.0, sequence: Vec::new(), switch_times: Vec::new(), end: *q_start, candidates: 1 });
    }
    let search = Search {
        sys,
        feedback,
        opts,
        target,
        h: opts.dt / opts.substeps.max(1) as f64,
        side: -g0.signum(),
    };
    let results: Vec<Best> = opts
        .alphabet
        .par_iter()
        .map(|&first| {
            let mut best = Best::default();
            let mut prefix = vec![(first, 0.0)];
            search.arc(*q_start, 0.0, first, &mut prefix, &mut best);
            best
        })
        .collect();
    let candidates = results.iter().map(|b| b.count).sum();
    let mut winner: Option<(f64, Vec<(ArcLabel, f64)>, Vec3)> = None;
    for b in results {
        if let Some(h) = b.hit {
            let better = match &winner {
                None => true,
                Some(w) => h.0 < w.0 - 1e-12 || ((h.0 - w.0).abs() <= 1e-12 && h.1.len() < w.1.len()),
            };
            if better {
                winner = Some(h);
            }
        }
    }
    let Some((time, seq, end)) = winner else {
        return Err(Error::CannotSolve(format!(
            "unreachable: no sequence of at most {} arcs reaches the target within {}",
            opts.max_arcs, opts.horizon
        )));
    };
    Ok(OracleResult {
        time,
        sequence: seq.iter().map(|s| s.0).collect(),
        switch_times: seq.iter().skip(1).map(|s| s.1).collect(),
        end,
        candidates,
    })
}
