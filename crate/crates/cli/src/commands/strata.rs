use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crnsynth::models::McKeithanSystem;
use crnsynth::synthesis::{
    mckeithan_exceptional_locus, mckeithan_singular_locus, semi_bridge_points, stratify_target, ClosedFormLocus,
    StratumSample, TargetPlane,
};
use crnsynth::ControlAffine;

use super::{strata_tolerances, target_grid, with_control_model};
use crate::config::{Model, RunConfig};
use crate::output::{Cell, Emitter, Table};
use crate::CliError;

const SAMPLE_COLUMNS: [&str; 18] = [
    "kind", "curve", "u", "w", "x", "y", "z", "phi_dot", "n_f", "n_gfg", "on_singular", "on_exceptional",
    "classification", "u_s", "admissible", "saturated", "semi_bridge", "eps",
];

fn sample_row(kind: &str, curve: Option<usize>, s: &StratumSample) -> Vec<Cell> {
    vec![
        kind.into(),
        curve.map_or(Cell::Empty, Cell::from),
        s.coords[0].into(),
        s.coords[1].into(),
        s.q[0].into(),
        s.q[1].into(),
        s.q[2].into(),
        s.phi_dot.into(),
        s.n_f.into(),
        s.n_gfg.into(),
        s.on_singular.into(),
        s.on_exceptional.into(),
        format!("{:?}", s.classification.kind).into(),
        s.u_s.into(),
        s.admissible.into(),
        s.saturated.into(),
        s.semi_bridge.into(),
        s.eps.into(),
    ]
}

pub fn run(cfg: &RunConfig, model: &Model, em: &mut Emitter) -> Result<(), CliError> {
    with_control_model!(model, m => strata(cfg, m, em))?;
    if let Model::McKeithan { sys, .. } = model {
        closed_forms(cfg, sys, em)?;
    }
    Ok(())
}

fn strata<M: ControlAffine + Sync>(cfg: &RunConfig, m: &M, em: &mut Emitter) -> Result<(), CliError> {
    let grid = target_grid(cfg);
    let tol = strata_tolerances(cfg);
    let st = stratify_target(m, &grid, &tol);
    log::info!(
        "{} singular roots, {} curves; {} exceptional roots",
        st.singular.len(),
        st.singular_curves.len(),
        st.exceptional.len()
    );

    let mut all = Table::new(&SAMPLE_COLUMNS);
    for s in &st.grid {
        all.push(sample_row("grid", None, s));
    }
    for s in &st.singular {
        all.push(sample_row("singular", None, s));
    }
    for s in &st.exceptional {
        all.push(sample_row("exceptional", None, s));
    }
    if cfg.probes > 0 {
        let plane = TargetPlane::of(m);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for _ in 0..cfg.probes {
            let c = [rng.gen_range(grid.u.0..=grid.u.1), rng.gen_range(grid.w.0..=grid.w.1)];
            all.push(sample_row("probe", None, &StratumSample::at(m, &plane, c, &tol)));
        }
    }
    em.csv("strata.csv", &all)?;

    let mut markers = Table::new(&SAMPLE_COLUMNS);
    for (kind, v) in [("saturation", &st.saturation), ("semi_bridge", &st.semi_bridges), ("bifurcation", &st.bifurcations)] {
        for s in v.iter() {
            markers.push(sample_row(kind, None, s));
        }
    }
    em.csv("markers.csv", &markers)?;

    for (name, kind, curves) in [("loci_S.csv", "singular", &st.singular_curves), ("loci_E.csv", "exceptional", &st.exceptional_curves)] {
        let mut t = Table::new(&SAMPLE_COLUMNS);
        for (k, c) in curves.iter().enumerate() {
            for s in c {
                t.push(sample_row(kind, Some(k), s));
            }
        }
        em.csv(name, &t)?;
    }
    Ok(())
}

fn closed_forms(cfg: &RunConfig, sys: &McKeithanSystem, em: &mut Emitter) -> Result<(), CliError> {
    let grid = target_grid(cfg);
    let vr = cfg.v_range.unwrap_or((grid.w.0.max(1e-6), grid.w.1, 50));
    let table = |l: &ClosedFormLocus| {
        let mut t = Table::new(&["v", "y", "branch", "discriminant", "residual"]);
        for s in &l.samples {
            t.push(vec![s.v.into(), s.y.into(), s.branch.into(), s.discriminant.into(), s.residual.into()]);
        }
        t
    };
    em.csv("closed_S.csv", &table(&mckeithan_singular_locus(sys, vr)?))?;
    em.csv("closed_E.csv", &table(&mckeithan_exceptional_locus(sys, vr)?))?;
    let sb = match semi_bridge_points(sys) {
        Ok(sb) => json!({
            "points": sb.points.iter().map(|p| json!({
                "v": p.v,
                "states": p.points.iter().map(|(q, r)| json!({"q": q, "residual": r})).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "reason": sb.reason,
        }),
        Err(e) => json!({ "points": [], "reason": e.to_string() }),
    };
    em.json("semi_bridge.json", &sb)?;
    Ok(())
}
