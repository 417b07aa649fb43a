use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::sweep::{ConvergenceRow, SummaryRow, TrialRecord};
use super::Scheme;
use crate::error::Result;
use crate::scenario::InstanceDoc;
use crate::sco::{ScoResult, StopReason};
use crate::solver::KktResidual;

pub const SWEEP_HEADER: &str =
    "trial,seed,scheme,pmax_dbm,r,lambda,wsee_bit_per_joule,wsr_bit_per_s,iterations,converged,kkt_residual,wall_ms";

pub const SUMMARY_HEADER: &str =
    "scheme,pmax_dbm,r,lambda,trials,converged,wsee_mean,wsee_median,wsee_std,wsr_mean,wsr_median,wsr_std";

pub const CONVERGENCE_HEADER: &str = "trial,seed,r,lambda,iteration,wsee_bit_per_joule";

/// 17 significant digits, '.' decimal point.
fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn write_rows<W: Write>(w: W, header: &str, rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(header.split(','))?;
    for row in rows {
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(w: W, records: &[TrialRecord]) -> Result<()> {
    write_rows(
        w,
        SWEEP_HEADER,
        records.iter().map(|r| {
            vec![
                r.trial.to_string(),
                r.seed.to_string(),
                r.scheme.to_string(),
                num(r.pmax_dbm),
                num(r.r),
                num(r.lambda),
                num(r.wsee),
                num(r.wsr),
                r.iterations.to_string(),
                r.converged.to_string(),
                num(r.kkt_residual),
                num(r.wall_ms),
            ]
        }),
    )
}

pub fn write_summary_csv<W: Write>(w: W, rows: &[SummaryRow]) -> Result<()> {
    write_rows(
        w,
        SUMMARY_HEADER,
        rows.iter().map(|r| {
            vec![
                r.scheme.to_string(),
                num(r.pmax_dbm),
                num(r.r),
                num(r.lambda),
                r.trials.to_string(),
                r.converged.to_string(),
                num(r.wsee_mean),
                num(r.wsee_median),
                num(r.wsee_std),
                num(r.wsr_mean),
                num(r.wsr_median),
                num(r.wsr_std),
            ]
        }),
    )
}

pub fn write_convergence_csv<W: Write>(w: W, rows: &[ConvergenceRow]) -> Result<()> {
    write_rows(
        w,
        CONVERGENCE_HEADER,
        rows.iter().map(|r| {
            vec![
                r.trial.to_string(),
                r.seed.to_string(),
                num(r.r),
                num(r.lambda),
                r.iteration.to_string(),
                num(r.wsee),
            ]
        }),
    )
}

/// Result document of a single solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveOutput {
    pub scheme: Scheme,
    pub p: Vec<f64>,
    pub wsee: f64,
    pub wsr: f64,
    pub ee: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
    pub history: Vec<f64>,
    pub kkt: KktResidual,
}

pub fn solve_output(scheme: Scheme, res: &ScoResult) -> SolveOutput {
    SolveOutput {
        scheme,
        p: res.p.clone(),
        wsee: res.wsee,
        wsr: res.wsr,
        ee: res.ee.clone(),
        iterations: res.iterations,
        converged: res.converged,
        stop: res.stop,
        history: res.history.clone(),
        kkt: res.kkt,
    }
}

/// Parse an instance document. Parse errors carry line and column.
pub fn read_instance(path: &Path) -> Result<InstanceDoc> {
    let text = std::fs::read_to_string(path)?;
    InstanceDoc::from_json(&text)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}
