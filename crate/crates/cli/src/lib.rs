//! Experiment harness: computes the corrector constant, sweeps the system
//! size with `k` frozen to it, locates the nucleation threshold, and runs the
//! pyramid-construction scaling checks. Results go to plot-ready CSV files.

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod error;
mod output;
mod runs;

pub use config::{default_material, Modes, RunConfig, SweepSpec};
pub use error::{CliError, Result};
pub use output::{
    emit_outputs, write_circulation_csv, write_corrector_csv, write_divergence_csv, write_height_csv, write_refinement_csv,
    write_sweep_csv, RunOutputs, Summary, SWEEP_HEADER,
};
pub use runs::{
    asymptotic_errors, circulation_samples, corrector_mesh, corrector_tensor, crossover_bracket, dislocations_win, find_crossover,
    run_corrector, run_corrector_finest, run_divergence, run_pyramid_scaling, run_theta_sweep, sweep_record,
    CirculationSample, CorrectorLevel, CorrectorRun, Crossover, ExperimentRecord, PyramidRun, RefinementStep,
    SweepReport, ARRAY_SIDES, CROSSOVER_REL_WIDTH, DIVERGENCE_EPS, REFINEMENT_LEVELS, THETA_AGREEMENT,
};

use log::info;

/// Runs the stages selected in `cfg.modes`. The sweep and the crossover use
/// `cfg.k` when set, and otherwise the finest corrector constant, solving the
/// corrector if no stage has done so yet.
pub fn run(cfg: &RunConfig) -> Result<RunOutputs> {
    cfg.validate()?;
    let modes = cfg.modes;
    let mut out = RunOutputs::default();
    if modes.corrector {
        out.corrector = Some(run_corrector(cfg)?);
    }
    if modes.sweep || modes.crossover {
        let k = match (cfg.k, &out.corrector) {
            (Some(k), _) => k,
            (None, Some(c)) => c.c_el_estimate(),
            (None, None) => {
                let c = run_corrector_finest(cfg)?;
                let k = c.c_el_estimate();
                out.corrector = Some(c);
                k
            }
        };
        info!("using k = {k:.10e}");
        if modes.sweep {
            out.sweep = Some(run_theta_sweep(cfg, k)?);
        }
        if modes.crossover {
            out.crossover = Some(find_crossover(cfg, k)?);
        }
    }
    if modes.pyramid {
        out.pyramid = Some(run_pyramid_scaling(cfg)?);
    }
    if modes.diverge {
        out.divergence = Some(run_divergence(cfg)?);
    }
    Ok(out)
}
