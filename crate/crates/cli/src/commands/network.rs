use serde_json::json;

use crnsynth::crn::{McKeithanParams, ReactionNetwork};

use crate::config::{Model, RunConfig};
use crate::output::{Cell, Emitter, Table};
use crate::CliError;

pub fn run(cfg: &RunConfig, model: &Model, em: &mut Emitter) -> Result<(), CliError> {
    let (net, v): (ReactionNetwork, Option<f64>) = match model {
        Model::Network(n) => (n.clone(), None),
        Model::McKeithan { sys, v } => (McKeithanParams::new(sys.alpha, sys.beta, sys.delta)?.network(*v)?, Some(*v)),
        _ => return Err(CliError::Config("network needs a reaction network file or the mckeithan model".into())),
    };
    let info = json!({
        "species": net.species(),
        "complexes": net.complexes(),
        "deficiency": net.deficiency(),
        "strongly_connected": net.strongly_connected(),
        "conservation_basis": net.conservation_basis(),
        "v": v,
    });
    em.json("network_info.json", &info)?;
    if let Some(sim) = &cfg.simulation {
        if sim.samples == 0 || !(sim.t_end > 0.0) {
            return Err(CliError::Config("simulation needs samples >= 1 and t_end > 0".into()));
        }
        let s = net.simulate(&sim.c0, sim.temperature, sim.t_end, cfg.tolerances.ode, sim.samples)?;
        let mut header = vec!["t".to_string()];
        header.extend(net.species().iter().cloned());
        let mut t = Table::new(&header);
        for (time, state) in s.times.iter().zip(&s.states) {
            let mut row: Vec<Cell> = vec![(*time).into()];
            row.extend(state.iter().map(|&c| Cell::from(c)));
            t.push(row);
        }
        em.csv("simulation.csv", &t)?;
    }
    Ok(())
}
