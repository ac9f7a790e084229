//! Dormand–Prince 5(4) integrator with continuous output and event location.
//!
//! Integration runs forward or backward (`t_end < t0`). Events are scalar
//! functions `g(t, y)`; the first sign change on an accepted step is refined
//! by bisection on the dense interpolant and terminates the run.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest allowed |h|; `f64::INFINITY` for none.
    pub h_max: f64,
    pub h_init: Option<f64>,
    /// Steps below this magnitude abort the run.
    pub h_min: f64,
    pub max_steps: usize,
    /// Absolute time accuracy of event localization.
    pub event_tol: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_max: f64::INFINITY,
            h_init: None,
            h_min: 1e-14,
            max_steps: 200_000,
            event_tol: 1e-13,
        }
    }
}

impl OdeOptions {
    pub fn with_tol(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    pub fn h_max(mut self, h: f64) -> Self {
        self.h_max = h;
        self
    }
}

/// Continuous extension over one accepted step.
#[derive(Debug, Clone)]
struct Segment {
    t0: f64,
    h: f64,
    r: [Vec<f64>; 5],
}

impl Segment {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.r[0][i]
                + th * (self.r[1][i]
                    + th1 * (self.r[2][i] + th * (self.r[3][i] + th1 * self.r[4][i])));
        }
    }

    fn contains(&self, t: f64) -> bool {
        let (a, b) = if self.h >= 0.0 {
            (self.t0, self.t0 + self.h)
        } else {
            (self.t0 + self.h, self.t0)
        };
        t >= a - 1e-15 * a.abs().max(1.0) && t <= b + 1e-15 * b.abs().max(1.0)
    }
}

/// Accepted steps plus their dense interpolants.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub ts: Vec<f64>,
    pub ys: Vec<Vec<f64>>,
    segments: Vec<Segment>,
}

impl Trajectory {
    pub fn t_start(&self) -> f64 {
        self.ts[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.ts.last().unwrap()
    }

    pub fn last(&self) -> &[f64] {
        self.ys.last().unwrap()
    }

    pub fn dim(&self) -> usize {
        self.ys[0].len()
    }

    /// Dense-output state at `t`, clamped to the integrated interval.
    pub fn at(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        if self.segments.is_empty() {
            out.copy_from_slice(&self.ys[0]);
            return out;
        }
        let forward = self.t_end() >= self.t_start();
        let idx = self
            .segments
            .partition_point(|s| if forward { s.t0 + s.h < t } else { s.t0 + s.h > t })
            .min(self.segments.len() - 1);
        let seg = &self.segments[idx];
        let tc = if seg.contains(t) {
            t
        } else if (forward && t < seg.t0) || (!forward && t > seg.t0) {
            seg.t0
        } else {
            seg.t0 + seg.h
        };
        seg.eval(tc, &mut out);
        out
    }

    /// States at `n + 1` equally spaced times over the integrated interval.
    pub fn resample(&self, n: usize) -> Vec<(f64, Vec<f64>)> {
        let (a, b) = (self.t_start(), self.t_end());
        (0..=n)
            .map(|k| {
                let t = if n == 0 { a } else { a + (b - a) * k as f64 / n as f64 };
                (t, self.at(t))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stop {
    /// The requested end time was reached.
    Completed,
    /// Event `index` fired at time `t`.
    Event { index: usize, t: f64 },
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub trajectory: Trajectory,
    pub stop: Stop,
    pub steps: usize,
}

pub type EventFn<'a> = Box<dyn FnMut(f64, &[f64]) -> f64 + 'a>;

/// Integrates `y' = f(t, y)` from `t0` to `t_end`.
///
/// An event whose value is exactly zero at `t0` is armed at its first nonzero
/// value, so structural zeros at the starting point are skipped.
pub fn integrate<F>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &OdeOptions,
    events: &mut [EventFn<'_>],
) -> Result<Solution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut traj = Trajectory {
        ts: vec![t0],
        ys: vec![y0.to_vec()],
        segments: Vec::new(),
    };
    if t_end == t0 {
        return Ok(Solution {
            trajectory: traj,
            stop: Stop::Completed,
            steps: 0,
        });
    }
    let dir = (t_end - t0).signum();
    let span = (t_end - t0).abs();

    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    f(t, &y, &mut k[0]);
    check_finite(&k[0], t, &y)?;

    let mut prev_g: Vec<Option<f64>> = events
        .iter_mut()
        .map(|g| {
            let v = g(t0, y0);
            if v == 0.0 { None } else { Some(v) }
        })
        .collect();

    let mut h = opts
        .h_init
        .unwrap_or_else(|| initial_step(&mut f, t0, &y, &k[0], dir, opts))
        .abs()
        .min(opts.h_max)
        .min(span)
        * dir;

    let mut steps = 0usize;
    let mut reject_prev = false;
    loop {
        if steps >= opts.max_steps {
            return Err(Error::Integration {
                reason: format!("maximum step count {} exceeded", opts.max_steps),
                t,
                state: y,
            });
        }
        let remaining = t_end - t;
        if remaining * dir <= 0.0 {
            break;
        }
        if (h.abs() - remaining.abs()) > -1e-14 * span.max(1.0) {
            h = remaining;
        }
        if h.abs() < opts.h_min && remaining.abs() > opts.h_min {
            return Err(Error::Integration {
                reason: format!("step size underflow (|h| = {:e})", h.abs()),
                t,
                state: y,
            });
        }

        // stages
        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k[0][i];
        }
        f(t + C2 * h, &ytmp, &mut k[1]);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
        }
        f(t + C3 * h, &ytmp, &mut k[2]);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
        }
        f(t + C4 * h, &ytmp, &mut k[3]);
        for i in 0..n {
            ytmp[i] =
                y[i] + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
        }
        f(t + C5 * h, &ytmp, &mut k[4]);
        for i in 0..n {
            ytmp[i] = y[i]
                + h * (A61 * k[0][i]
                    + A62 * k[1][i]
                    + A63 * k[2][i]
                    + A64 * k[3][i]
                    + A65 * k[4][i]);
        }
        f(t + h, &ytmp, &mut k[5]);
        for i in 0..n {
            ynew[i] = y[i]
                + h * (A71 * k[0][i]
                    + A73 * k[2][i]
                    + A74 * k[3][i]
                    + A75 * k[4][i]
                    + A76 * k[5][i]);
        }
        f(t + h, &ynew, &mut k[6]);
        steps += 1;

        let mut err = 0.0;
        let mut finite = true;
        for i in 0..n {
            let e = h
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                    + E7 * k[6][i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            let r = e / sc;
            err += r * r;
            finite &= ynew[i].is_finite() && k[6][i].is_finite();
        }
        let err = (err / n as f64).sqrt();
        if !finite || !err.is_finite() {
            h *= 0.25;
            reject_prev = true;
            continue;
        }

        if err <= 1.0 {
            let seg = dense_segment(t, h, &y, &ynew, &k);
            let t_new = t + h;

            // event scan on the accepted step
            let mut fired: Option<(usize, f64)> = None;
            for (idx, g) in events.iter_mut().enumerate() {
                let g1 = g(t_new, &ynew);
                // interior samples catch pairs of close roots inside one step,
                // and arm an event that started at zero
                let mut ta = t;
                if let Some((tk, gk)) = first_sign_change(&mut **g, &seg, t, t_new, prev_g[idx], n) {
                    ta = tk;
                    prev_g[idx] = Some(gk);
                }
                match prev_g[idx] {
                    Some(g0) if g0 * g1 <= 0.0 && g1 != g0 => {
                        let te = locate(&mut **g, &seg, ta, t_new, g0, opts.event_tol, n);
                        let better = match fired {
                            None => true,
                            Some((_, tf)) => (te - tf) * dir < 0.0,
                        };
                        if better {
                            fired = Some((idx, te));
                        }
                    }
                    _ => {}
                }
                prev_g[idx] = if g1 == 0.0 { prev_g[idx] } else { Some(g1) };
            }

            if let Some((index, te)) = fired {
                let mut ye = vec![0.0; n];
                seg.eval(te, &mut ye);
                traj.segments.push(seg);
                traj.ts.push(te);
                traj.ys.push(ye);
                return Ok(Solution {
                    trajectory: traj,
                    stop: Stop::Event { index, t: te },
                    steps,
                });
            }

            traj.segments.push(seg);
            traj.ts.push(t_new);
            traj.ys.push(ynew.clone());
            t = t_new;
            std::mem::swap(&mut y, &mut ynew);
            k.swap(0, 6);

            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 10.0);
            if reject_prev {
                fac = fac.min(1.0);
            }
            reject_prev = false;
            h = (h * fac).abs().min(opts.h_max) * dir;
        } else {
            let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            h *= fac;
            reject_prev = true;
        }
    }

    Ok(Solution {
        trajectory: traj,
        stop: Stop::Completed,
        steps,
    })
}

fn check_finite(v: &[f64], t: f64, y: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Integration {
            reason: "non-finite right-hand side".into(),
            t,
            state: y.to_vec(),
        })
    }
}

fn dense_segment(t: f64, h: f64, y: &[f64], ynew: &[f64], k: &[Vec<f64>; 7]) -> Segment {
    let n = y.len();
    let mut r: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
    for i in 0..n {
        let ydiff = ynew[i] - y[i];
        let bspl = h * k[0][i] - ydiff;
        r[0][i] = y[i];
        r[1][i] = ydiff;
        r[2][i] = bspl;
        r[3][i] = ydiff - h * k[6][i] - bspl;
        r[4][i] = h
            * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i]
                + D7 * k[6][i]);
    }
    Segment { t0: t, h, r }
}

/// Interior samples of an event on one step, starting from the value `g0`
/// at `ta` (`None` while unarmed). Returns the last sample before the first
/// sign change, or the last nonzero sample when the sign never changes.
fn first_sign_change(
    g: &mut dyn FnMut(f64, &[f64]) -> f64,
    seg: &Segment,
    ta: f64,
    tb: f64,
    g0: Option<f64>,
    n: usize,
) -> Option<(f64, f64)> {
    const SAMPLES: usize = 16;
    let mut buf = vec![0.0; n];
    let mut armed: Option<(f64, f64)> = g0.map(|v| (ta, v));
    for i in 1..SAMPLES {
        let tm = ta + (tb - ta) * i as f64 / SAMPLES as f64;
        seg.eval(tm, &mut buf);
        let v = g(tm, &buf);
        if v == 0.0 {
            continue;
        }
        match armed {
            None => armed = Some((tm, v)),
            Some((_, a)) if a * v < 0.0 => return armed,
            Some(_) => armed = Some((tm, v)),
        }
    }
    armed
}

fn locate(
    g: &mut dyn FnMut(f64, &[f64]) -> f64,
    seg: &Segment,
    ta: f64,
    tb: f64,
    ga: f64,
    tol: f64,
    n: usize,
) -> f64 {
    let mut buf = vec![0.0; n];
    let (mut a, mut b, mut fa) = (ta, tb, ga);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        seg.eval(m, &mut buf);
        let fm = g(m, &buf);
        if fm == 0.0 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

fn initial_step<F>(f: &mut F, t0: f64, y0: &[f64], f0: &[f64], dir: f64, opts: &OdeOptions) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let sc: Vec<f64> = y0.iter().map(|y| opts.atol + opts.rtol * y.abs()).collect();
    let rms = |v: &[f64]| -> f64 {
        (v.iter().zip(&sc).map(|(x, s)| (x / s).powi(2)).sum::<f64>() / n as f64).sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(opts.h_max);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, k)| y + dir * h0 * k).collect();
    let mut f1 = vec![0.0; n];
    f(t0 + dir * h0, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(opts.h_max)
}
