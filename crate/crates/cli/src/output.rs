//! CSV and summary writers. Every float is written with 17 significant digits.

use crate::error::{CliError, Result};
use crate::runs::{CirculationSample, CorrectorLevel, CorrectorRun, Crossover, ExperimentRecord, PyramidRun, RefinementStep, SweepReport};
use misfit_core::pyramid::DivergenceReport;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

pub const SWEEP_HEADER: &str =
    "R,theta_star,E_el,E_pl,E_tot,E_el_asym,E_pl_asym,rel_err_el,rel_err_pl,crossover_flag";

pub fn write_sweep_csv<W: Write>(records: &[ExperimentRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            r.big_r,
            r.theta_star,
            r.e_el,
            r.e_pl,
            r.e_tot,
            r.e_el_asym,
            r.e_pl_asym,
            r.rel_err_el,
            r.rel_err_pl,
            u8::from(r.crossover_flag)
        )?;
    }
    Ok(())
}

pub fn write_corrector_csv<W: Write>(levels: &[CorrectorLevel], mut out: W) -> io::Result<()> {
    writeln!(out, "n,nx,ny,nz,free_dofs,C_el,iterations,residual")?;
    for l in levels {
        writeln!(
            out,
            "{},{},{},{},{},{:.16e},{},{:.16e}",
            l.n, l.cells[0], l.cells[1], l.cells[2], l.free_dofs, l.c_el, l.iterations, l.residual
        )?;
    }
    Ok(())
}

pub fn write_height_csv<W: Write>(rows: &[(f64, f64)], mut out: W) -> io::Result<()> {
    writeln!(out, "h,C_el")?;
    for (h, c) in rows {
        writeln!(out, "{h:.16e},{c:.16e}")?;
    }
    Ok(())
}

pub fn write_refinement_csv<W: Write>(steps: &[RefinementStep], mut out: W) -> io::Result<()> {
    writeln!(out, "levels,points,cell_energy,E_hat")?;
    for s in steps {
        writeln!(out, "{},{},{:.16e},{:.16e}", s.levels, s.points, s.cell_energy, s.e_hat)?;
    }
    Ok(())
}

pub fn write_circulation_csv<W: Write>(samples: &[CirculationSample], mut out: W) -> io::Result<()> {
    writeln!(out, "segment,expected_x,expected_y,expected_z,measured_x,measured_y,measured_z,rel_error")?;
    for s in samples {
        let (e, m) = (s.expected, s.measured);
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            s.segment, e.x, e.y, e.z, m.x, m.y, m.z, s.rel_error
        )?;
    }
    Ok(())
}

pub fn write_divergence_csv<W: Write>(report: &DivergenceReport, mut out: W) -> io::Result<()> {
    writeln!(out, "eps,integral,local_slope")?;
    for (i, (e, v)) in report.eps.iter().zip(&report.integrals).enumerate() {
        // the first cut has no preceding interval
        match i.checked_sub(1).map(|j| report.local_slopes[j]) {
            Some(s) => writeln!(out, "{e:.16e},{v:.16e},{s:.16e}")?,
            None => writeln!(out, "{e:.16e},{v:.16e},")?,
        }
    }
    Ok(())
}

/// `name = value` lines, one per fitted constant.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub lines: Vec<(String, String)>,
}

impl Summary {
    pub fn push(&mut self, name: &str, value: f64) {
        self.lines.push((name.to_string(), format!("{value:.16e}")));
    }

    pub fn push_text(&mut self, name: &str, value: String) {
        self.lines.push((name.to_string(), value));
    }

    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (name, value) in &self.lines {
            writeln!(out, "{name} = {value}")?;
        }
        Ok(())
    }
}

/// Everything one invocation computed.
#[derive(Debug, Clone, Default)]
pub struct RunOutputs {
    pub corrector: Option<CorrectorRun>,
    pub sweep: Option<SweepReport>,
    pub crossover: Option<Crossover>,
    pub pyramid: Option<PyramidRun>,
    pub divergence: Option<DivergenceReport>,
}

impl RunOutputs {
    pub fn summary(&self) -> Summary {
        let mut s = Summary::default();
        if let Some(c) = &self.corrector {
            s.push("C_el", c.c_el_estimate());
            if let Some((order, limit)) = c.richardson {
                s.push("C_el_extrapolated", limit);
                s.push("corrector_order", order);
            }
            if let Some(spread) = c.height_spread() {
                s.push("C_el_height_spread", spread);
            }
        }
        if let Some(sw) = &self.sweep {
            s.push("k", sw.k);
            s.push("sweep_el_slope", sw.el_slope);
            s.push("sweep_pl_limit", sw.pl_limit);
        }
        if let Some(c) = &self.crossover {
            match c.r_star() {
                Some(r) => s.push("R_star", r),
                None => s.push_text("R_star", format!("not found in [{:.16e}, {:.16e}]", c.lo, c.hi)),
            }
        }
        if let Some(p) = &self.pyramid {
            s.push("pyramid_slope", p.report.slope);
            s.push("E_alpha_hat", p.e_hat);
            s.push("sigma_alpha_theta", p.sigma_alpha_theta);
            s.push("m_hat", p.report.m_hat);
        }
        if let Some(d) = &self.divergence {
            s.push("divergence_slope", d.slope);
        }
        s
    }
}

fn write_file(dir: &Path, name: &str, written: &mut Vec<PathBuf>, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<()> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let mut out = BufWriter::new(file);
    f(&mut out).and_then(|_| out.flush()).map_err(|e| CliError::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Writes the files for every stage that ran, plus `summary.txt`, and returns
/// their paths. Existing files of the same name are replaced.
pub fn emit_outputs(outputs: &RunOutputs, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();
    if let Some(c) = &outputs.corrector {
        write_file(dir, "corrector.csv", &mut written, |w| write_corrector_csv(&c.levels, w))?;
        write_file(dir, "corrector_nodes.csv", &mut written, |w| c.finest.write_node_table(w))?;
        if !c.height_sensitivity.is_empty() {
            write_file(dir, "corrector_height.csv", &mut written, |w| write_height_csv(&c.height_sensitivity, w))?;
        }
    }
    if let Some(sw) = &outputs.sweep {
        write_file(dir, "sweep.csv", &mut written, |w| write_sweep_csv(&sw.records, w))?;
    }
    if let Some(p) = &outputs.pyramid {
        write_file(dir, "pyramid.csv", &mut written, |w| p.report.write_csv(w))?;
        write_file(dir, "pyramid_refinement.csv", &mut written, |w| write_refinement_csv(&p.refinement, w))?;
        write_file(dir, "circulation.csv", &mut written, |w| write_circulation_csv(&p.circulation, w))?;
    }
    if let Some(d) = &outputs.divergence {
        write_file(dir, "diverge.csv", &mut written, |w| write_divergence_csv(d, w))?;
    }
    write_file(dir, "summary.txt", &mut written, |w| outputs.summary().write(w))?;
    Ok(written)
}
