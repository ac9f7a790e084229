use crnsynth::extremal::extremal_flow;
use crnsynth::ode::OdeOptions;
use crnsynth::series::{bc_flow, crossing_test, switching_surface_series, PolynomialSystem, TruncatedSeries};

use crate::config::{Model, RunConfig};
use crate::output::{Cell, Emitter, Table};
use crate::CliError;

const COORDS: [&str; 6] = ["x", "y", "z", "p1", "p2", "p3"];

pub fn run(cfg: &RunConfig, model: &Model, em: &mut Emitter) -> Result<(), CliError> {
    match model {
        Model::Tutorial(m) => series(cfg, m, em),
        Model::Seminf(m) => series(cfg, m, em),
        Model::Unfolding(m) => series(cfg, m, em),
        _ => Err(CliError::Config("series needs a polynomial model (tutorial, seminf or unfolding)".into())),
    }
}

fn coefficient_table(rows: &[(f64, &str, &TruncatedSeries)]) -> Table {
    let names: Vec<String> = rows.first().map_or(Vec::new(), |r| r.2.ring().names().to_vec());
    let mut header = vec!["eps".to_string(), "series".to_string()];
    header.extend(names.iter().map(|n| format!("pow_{n}")));
    header.push("coeff".into());
    let mut t = Table::new(&header);
    for (eps, name, s) in rows {
        for (e, c) in s.terms() {
            let mut row: Vec<Cell> = vec![(*eps).into(), (*name).into()];
            row.extend(e.iter().map(|&k| Cell::from(k as usize)));
            row.push((*c).into());
            t.push(row);
        }
    }
    t
}

fn series<M: PolynomialSystem + Sync>(cfg: &RunConfig, m: &M, em: &mut Emitter) -> Result<(), CliError> {
    let ord = cfg.order;
    let flows = [bc_flow(m, 1.0, ord)?, bc_flow(m, -1.0, ord)?];
    let mut rows = Vec::new();
    for (eps, f) in [1.0, -1.0].iter().zip(&flows) {
        for (k, c) in f.coords.iter().enumerate() {
            rows.push((*eps, COORDS[k], c));
        }
    }
    em.csv("series_flow.csv", &coefficient_table(&rows))?;

    let surfaces = [switching_surface_series(m, 1.0, ord)?, switching_surface_series(m, -1.0, ord)?];
    let mut rows = Vec::new();
    for s in &surfaces {
        rows.push((s.eps, "w0", &s.w0));
        for (k, c) in s.k.iter().enumerate() {
            rows.push((s.eps, ["Kx", "Ky", "Kz"][k], c));
        }
    }
    em.csv("series_surface.csv", &coefficient_table(&rows))?;

    let (lo, hi, n) = cfg.series.s0;
    let mut t = Table::new(&["s0", "det_plus", "det_minus"]);
    for i in 0..n {
        let s0 = if n == 1 { 0.5 * (lo + hi) } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
        t.push(vec![s0.into(), crossing_test(&surfaces[0], s0).into(), crossing_test(&surfaces[1], s0).into()]);
    }
    em.csv("series_crossing.csv", &t)?;

    // Truncation error against the integrated extremal at each order.
    let tg = m.target();
    let [w0, s0] = cfg.series.probe;
    let q0 = [tg.level, w0, s0];
    let ode = OdeOptions::with_tol(cfg.tolerances.ode.min(1e-10), 1e-14);
    let mut t = Table::new(&["order", "eps", "t", "residual"]);
    for eps in [1.0, -1.0] {
        let numeric: Vec<[f64; 6]> = cfg
            .series
            .times
            .iter()
            .map(|&time| {
                let sol = extremal_flow(m, &q0, &tg.normal, Some(eps), time, &ode, &mut [])?;
                let l = sol.trajectory.last();
                Ok(std::array::from_fn(|i| l[i]))
            })
            .collect::<Result<_, CliError>>()?;
        for k in 1..=ord {
            let f = bc_flow(m, eps, k)?;
            for (&time, z) in cfg.series.times.iter().zip(&numeric) {
                let s = f.eval(&[time, w0, s0]);
                let r = (0..6).map(|i| (s[i] - z[i]).abs()).fold(0.0, f64::max);
                t.push(vec![(k as usize).into(), eps.into(), time.into(), r.into()]);
            }
        }
    }
    em.csv("series_residuals.csv", &t)?;
    Ok(())
}
