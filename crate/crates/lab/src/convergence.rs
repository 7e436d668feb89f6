use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use threefield_core::spectrum::oracle::ReferenceEigen;
use threefield_core::spectrum::rate::estimate_rate;
use threefield_core::{MeshFamily, SolveOptions};

use crate::config::ExperimentConfig;
use crate::error::{LabError, LabResult};
use crate::output::{num, write_file, write_json};
use crate::pipeline::{solve_case, Case, CaseRecord};
use crate::svg;

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub gamma1: f64,
    pub err: f64,
    /// Slope against the previous row; absent on the first.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub family: MeshFamily,
    pub lambda: f64,
    pub mu: f64,
    pub reference: ReferenceEigen,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `log err` against `log h`.
    pub rate: Option<f64>,
    pub complete: bool,
    pub failure: Option<String>,
    pub cases: Vec<CaseRecord>,
}

impl ConvergenceReport {
    pub fn csv(&self) -> String {
        let mut s = String::from("N,h,gamma1,err,rate\n");
        for r in &self.rows {
            let rate = r.rate.map(num).unwrap_or_default();
            s.push_str(&format!("{},{},{},{},{}\n", r.n, num(r.h), num(r.gamma1), num(r.err), rate));
        }
        s
    }

    pub fn svg(&self) -> String {
        let pts: Vec<(f64, f64)> = self.rows.iter().map(|r| (r.h, r.err)).collect();
        let note = self.rate.map(|r| format!("rate {r:.2}")).unwrap_or_default();
        let title = format!("first eigenvalue, {} lambda = {:e}", self.family, self.lambda);
        svg::loglog(&title, "h", "|gamma1 - reference|", &pts, &note)
    }
}

/// Runs every N of the study (in parallel on the current pool) and builds the
/// report. The error of the first failing N, if any, is returned beside the
/// report, which then holds the rows before it.
pub fn run_convergence(
    cfg: &ExperimentConfig,
    reference: &ReferenceEigen,
) -> LabResult<(ConvergenceReport, Option<(usize, threefield_core::Error)>)> {
    let lambda = match cfg.lambda_list.as_slice() {
        [l] => *l,
        other => return Err(LabError::Usage(format!("a convergence study takes one lambda, got {other:?}"))),
    };
    let opts = SolveOptions { route: cfg.route, filter_ratio: cfg.filter_ratio, ..Default::default() };
    let cases: Vec<Case> = cfg.n_list.iter().map(|&n| Case::from_config(cfg, n, lambda)).collect::<LabResult<_>>()?;
    let results: Vec<_> = cases
        .par_iter()
        .map(|c| {
            let s = solve_case(c, &opts)?;
            let g = s.spectrum.first_eigenvalue()?;
            Ok((g, CaseRecord::new(&s, cfg.n_eigs_report)))
        })
        .collect();

    let mut rows: Vec<ConvergenceRow> = Vec::new();
    let mut records = Vec::new();
    let mut failure = None;
    for (case, res) in cases.iter().zip(results) {
        match res {
            Ok((g, rec)) => {
                let h = 1.0 / case.n as f64;
                let err = (g - reference.value).abs();
                let rate = rows.last().map(|p| (p.err / err).ln() / (p.h / h).ln());
                rows.push(ConvergenceRow { n: case.n, h, gamma1: g, err, rate });
                records.push(rec);
            }
            Err(e) => {
                failure = Some((case.n, e));
                break;
            }
        }
    }
    let samples: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.err)).collect();
    let rate = if samples.len() >= 2 { estimate_rate(&samples).ok().map(|r| r.slope) } else { None };
    let report = ConvergenceReport {
        family: cfg.mesh_family,
        lambda,
        mu: cfg.mu,
        reference: reference.clone(),
        rows,
        rate,
        complete: failure.is_none(),
        failure: failure.as_ref().map(|(n, e)| format!("N = {n}: {e}")),
        cases: records,
    };
    Ok((report, failure))
}

pub fn write_convergence(dir: &Path, report: &ConvergenceReport) -> LabResult<()> {
    write_json(&dir.join("report.json"), report)?;
    write_file(&dir.join("report.csv"), &report.csv())?;
    write_file(&dir.join("rate.svg"), &report.svg())
}
