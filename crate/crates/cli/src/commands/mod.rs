pub mod network;
pub mod series;
pub mod strata;
pub mod synthesis;

use crnsynth::synthesis::{StrataTolerances, TargetGrid};

use crate::config::{GridSpec, RunConfig};

/// Grid used when the config gives none.
pub fn default_grid(model: &str) -> GridSpec {
    match model {
        "mckeithan" => GridSpec { u: [0.0, 1.2], w: [0.05, 1.5], n: [25, 30] },
        "unfolding" => GridSpec { u: [-0.5, 0.5], w: [-0.5, 0.5], n: [21, 21] },
        _ => GridSpec { u: [-0.05, 0.3], w: [-0.5, 0.5], n: [36, 51] },
    }
}

pub fn target_grid(cfg: &RunConfig) -> TargetGrid {
    let g = cfg.grid.clone().unwrap_or_else(|| default_grid(&cfg.model));
    TargetGrid { u: (g.u[0], g.u[1], g.n[0]), w: (g.w[0], g.w[1], g.n[1]) }
}

pub fn strata_tolerances(cfg: &RunConfig) -> StrataTolerances {
    StrataTolerances {
        locus: cfg.tolerances.locus,
        saturation: cfg.tolerances.saturation,
        ..StrataTolerances::default()
    }
}

/// Runs `$body` with `$m` bound to the control system of a model.
macro_rules! with_control_model {
    ($model:expr, $m:ident => $body:expr) => {
        match $model {
            $crate::config::Model::Tutorial($m) => $body,
            $crate::config::Model::Seminf($m) => $body,
            $crate::config::Model::McKeithan { sys: $m, .. } => $body,
            $crate::config::Model::Unfolding($m) => $body,
            $crate::config::Model::Network(_) => Err($crate::CliError::Config(
                "this command needs a control model, not a reaction network".into(),
            )),
        }
    };
}
pub(crate) use with_control_model;
