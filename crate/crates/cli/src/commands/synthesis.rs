use serde::Serialize;
use serde_json::{json, Value};

use crnsynth::extremal::{backward_bc_sweep, ArcLabel, ExtremalArcChain};
use crnsynth::liealg::closed_loop;
use crnsynth::ode::{integrate, OdeOptions};
use crnsynth::series::{LocusGrid, PolynomialSystem};
use crnsynth::singular::classify;
use crnsynth::synthesis::{
    attach_splitting_loci, brute_force_oracle_with, local_synthesis, CatalogLabel, LocusPoint, OracleOptions,
    StratumSample, SynthesisOptions, SynthesisReport,
};
use crnsynth::ControlAffine;

use super::{strata_tolerances, with_control_model};
use crate::config::{Model, RunConfig};
use crate::output::{Emitter, Table};
use crate::CliError;

/// Outcome of the brute-force check at one anchor.
#[derive(Debug, Serialize)]
struct Verdict {
    start: Option<[f64; 3]>,
    predicted_pattern: String,
    predicted_time: f64,
    oracle_pattern: Option<String>,
    oracle_time: Option<f64>,
    pattern_match: bool,
    time_match: bool,
    pass: bool,
    note: Option<String>,
}

impl Verdict {
    fn skipped(note: String) -> Self {
        Self {
            start: None,
            predicted_pattern: String::new(),
            predicted_time: f64::NAN,
            oracle_pattern: None,
            oracle_time: None,
            pattern_match: false,
            time_match: false,
            pass: false,
            note: Some(note),
        }
    }
}

fn default_anchors(model: &Model) -> Result<Vec<[f64; 3]>, CliError> {
    match model {
        Model::Tutorial(t) => {
            let zs = t.z_sat();
            Ok(vec![[0.0, 0.0025, -0.05], [0.0, zs * zs, -zs]])
        }
        Model::Unfolding(_) => Ok(vec![[0.0, 0.0, 0.0]]),
        _ => Err(CliError::Config("this model needs explicit anchors in the config".into())),
    }
}

pub fn run(cfg: &RunConfig, model: &Model, oracle: bool, em: &mut Emitter) -> Result<(), CliError> {
    let anchors = if cfg.anchors.is_empty() { default_anchors(model)? } else { cfg.anchors.clone() };
    // The unfolding's singular control is constant by construction.
    let fixed = match model {
        Model::Unfolding(u) => Some(u.singular_control()),
        _ => None,
    };
    let mut reports = with_control_model!(model, m => synthesize(cfg, m, &anchors))?;
    match model {
        Model::Tutorial(m) => splitting(cfg, m, &mut reports)?,
        Model::Seminf(m) => splitting(cfg, m, &mut reports)?,
        _ => {}
    }
    let verdicts = if oracle {
        Some(with_control_model!(model, m => Ok::<_, CliError>(
            reports.iter().map(|r| check(cfg, m, &r.anchor, fixed)).collect::<Vec<_>>()
        ))?)
    } else {
        None
    };

    let doc: Vec<Value> = reports
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let mut v = serde_json::to_value(r).unwrap_or(Value::Null);
            if let Some(vs) = &verdicts {
                v["oracle"] = serde_json::to_value(&vs[k]).unwrap_or(Value::Null);
            }
            v
        })
        .collect();
    em.json("synthesis_report.json", &json!({ "model": cfg.model, "anchors": doc }))?;

    let mut t = Table::new(&["anchor", "label", "locus", "x", "y", "z", "t", "eps"]);
    for (k, r) in reports.iter().enumerate() {
        let l = &r.loci;
        let sets: [(&str, &Vec<LocusPoint>); 6] = [
            ("Wp", &l.w_plus),
            ("Wm", &l.w_minus),
            ("Ws", &l.w_s),
            ("Gs", &l.gamma_s),
            ("C1", &l.c1),
            ("C12", &l.c12),
        ];
        for (name, pts) in sets {
            for p in pts {
                t.push(vec![
                    k.into(),
                    r.label.name().into(),
                    name.into(),
                    p.q[0].into(),
                    p.q[1].into(),
                    p.q[2].into(),
                    p.t.into(),
                    p.eps.into(),
                ]);
            }
        }
    }
    em.csv("loci.csv", &t)?;

    let chains = with_control_model!(model, m => Ok::<_, CliError>(anchor_chains(cfg, m, &reports)))?;
    let mut t = Table::new(&["anchor", "chain", "pattern", "stop", "arc", "label", "t", "x", "y", "z", "p1", "p2", "p3", "u"]);
    for (k, cs) in chains.iter().enumerate() {
        for (j, c) in cs.iter().enumerate() {
            let stop = format!("{:?}", c.stop);
            for (a, arc) in c.arcs.iter().enumerate() {
                for p in &arc.points {
                    t.push(vec![
                        k.into(),
                        j.into(),
                        c.pattern().into(),
                        stop.clone().into(),
                        a.into(),
                        arc.label.symbol().into(),
                        p.t.into(),
                        p.q[0].into(),
                        p.q[1].into(),
                        p.q[2].into(),
                        p.p[0].into(),
                        p.p[1].into(),
                        p.p[2].into(),
                        p.u.into(),
                    ]);
                }
            }
        }
    }
    em.csv("chains.csv", &t)?;

    if let Some(vs) = &verdicts {
        let mut t = Table::new(&["anchor", "predicted", "oracle", "predicted_time", "oracle_time", "pass", "note"]);
        for (k, v) in vs.iter().enumerate().flat_map(|(k, v)| v.iter().map(move |v| (k, v))) {
            t.push(vec![
                k.into(),
                v.predicted_pattern.clone().into(),
                v.oracle_pattern.clone().unwrap_or_default().into(),
                v.predicted_time.into(),
                v.oracle_time.into(),
                v.pass.into(),
                v.note.clone().unwrap_or_default().into(),
            ]);
        }
        em.csv("oracle.csv", &t)?;
    }
    Ok(())
}

fn options(cfg: &RunConfig) -> SynthesisOptions {
    let mut o = SynthesisOptions { tol: strata_tolerances(cfg), ..SynthesisOptions::default() };
    o.sweep.horizon = cfg.horizon;
    o
}

fn synthesize<M: ControlAffine + Serialize + Sync>(
    cfg: &RunConfig,
    m: &M,
    anchors: &[[f64; 3]],
) -> Result<Vec<SynthesisReport>, CliError> {
    let opts = options(cfg);
    let tg = m.target();
    anchors
        .iter()
        .map(|q| {
            let gap = tg.gap(q);
            if gap.abs() > 1e-9 * (1.0 + tg.level.abs()) {
                return Err(CliError::Config(format!("anchor {q:?} is off the target (gap {gap:e})")));
            }
            m.check_domain(q)?;
            let anchor = StratumSample::from_state(m, q, &opts.tol);
            Ok(local_synthesis(m, &anchor, &opts))
        })
        .collect()
}

/// Cut loci from the series engine for elliptic folds.
fn splitting<M: PolynomialSystem + Sync>(cfg: &RunConfig, m: &M, reports: &mut [SynthesisReport]) -> Result<(), CliError> {
    for r in reports.iter_mut().filter(|r| r.label == CatalogLabel::EllipticFold) {
        let [u, w] = r.anchor.coords;
        let span = |a: f64, b: f64| (a.min(b), a.max(b));
        let (w0a, w0b) = span(0.0, 2.5 * u);
        let (s0a, s0b) = span(0.0, 2.0 * w);
        let grid = LocusGrid { w0: (w0a, w0b, 5), s0: (s0a, s0b, 9), ..LocusGrid::default() };
        attach_splitting_loci(r, m, cfg.order, &grid)?;
    }
    Ok(())
}

fn anchor_chains<M: ControlAffine + Sync>(cfg: &RunConfig, m: &M, reports: &[SynthesisReport]) -> Vec<Vec<ExtremalArcChain>> {
    let sweep = options(cfg).sweep;
    reports.iter().map(|r| backward_bc_sweep(m, &[r.anchor.q], &sweep)).collect()
}

/// Backward run from `q` for a signed `t` with feedback `u`.
fn flow<M: ControlAffine, U: Fn(&[f64; 3]) -> f64>(m: &M, q: &[f64; 3], t: f64, u: U) -> Result<[f64; 3], CliError> {
    let sol = integrate(
        |_, y, dy| {
            let s = [y[0], y[1], y[2]];
            dy.copy_from_slice(&closed_loop(m, &s, u(&s)))
        },
        0.0,
        q,
        t,
        &OdeOptions::with_tol(1e-12, 1e-14),
        &mut [],
    )?;
    let l = sol.trajectory.last();
    Ok([l[0], l[1], l[2]])
}

/// Starts the oracle a fixed time before the anchor on each predicted
/// chain and compares the returned pattern and time.
fn check<M: ControlAffine + Sync>(cfg: &RunConfig, m: &M, anchor: &StratumSample, fixed: Option<f64>) -> Vec<Verdict> {
    let lead = cfg.oracle.lead;
    let feedback = |q: &[f64; 3]| fixed.or_else(|| classify(m, q).u_s);
    let mut starts = Vec::new();
    if anchor.on_singular {
        match anchor.u_s.or(fixed) {
            Some(u) if u.abs() < 1.0 => {
                let s = match flow(m, &anchor.q, -lead, |q| feedback(q).unwrap_or(f64::NAN)) {
                    Ok(s) => s,
                    Err(e) => return vec![Verdict::skipped(format!("singular arc: {e}"))],
                };
                // Both bangs enter an admissible singular arc.
                for eps in [1.0, -1.0] {
                    match flow(m, &s, -lead, |_| eps) {
                        Ok(q) => starts.push((q, format!("{}s", ArcLabel::bang(eps).symbol()), 2.0 * lead)),
                        Err(e) => return vec![Verdict::skipped(format!("bang arc: {e}"))],
                    }
                }
            }
            _ => return vec![Verdict::skipped("singular control is not admissible at the anchor".into())],
        }
    } else if let Some(eps) = anchor.eps {
        match flow(m, &anchor.q, -lead, |_| eps) {
            Ok(q) => starts.push((q, ArcLabel::bang(eps).symbol().to_string(), lead)),
            Err(e) => return vec![Verdict::skipped(format!("bang arc: {e}"))],
        }
    } else {
        return vec![Verdict::skipped("no predicted chain at an exceptional anchor".into())];
    }
    let o = &cfg.oracle;
    starts
        .into_iter()
        .map(|(start, predicted, time)| {
            let opts = OracleOptions {
                dt: o.dt,
                substeps: o.substeps,
                max_arcs: o.max_arcs,
                horizon: 1.5 * time + 4.0 * o.dt,
                ..OracleOptions::default()
            };
            let base = Verdict {
                start: Some(start),
                predicted_pattern: predicted.clone(),
                predicted_time: time,
                ..Verdict::skipped(String::new())
            };
            match brute_force_oracle_with(m, &start, &opts, &feedback) {
                Ok(r) => {
                    let pattern_match = r.pattern() == predicted;
                    let time_match = (r.time - time).abs() <= 2.0 * o.dt;
                    Verdict {
                        oracle_pattern: Some(r.pattern()),
                        oracle_time: Some(r.time),
                        pattern_match,
                        time_match,
                        pass: pattern_match && time_match,
                        note: None,
                        ..base
                    }
                }
                Err(e) => Verdict { note: Some(e.to_string()), ..base },
            }
        })
        .collect()
}
