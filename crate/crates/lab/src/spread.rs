use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use threefield_core::SolveOptions;

use crate::config::{lambda_tag, ExperimentConfig};
use crate::error::LabResult;
use crate::output::{spectrum_csv, write_file, write_json};
use crate::pipeline::{solve_case, Case, CaseRecord};
use crate::svg::{self, Range, Series};

#[derive(Debug, Clone, Serialize)]
pub struct SpreadReport {
    pub cases: Vec<CaseRecord>,
    /// `[x_min, x_max, y_min, y_max]` shared by the fixed-axis plots.
    pub fixed_axes: [f64; 4],
}

pub fn spectrum_file(n: usize, lambda: f64) -> String {
    format!("spectrum_N{n}_lam{}.csv", lambda_tag(lambda))
}

/// Solves every (N, λ) of the config, writes one spectrum CSV per job, one
/// auto-scaled and one fixed-axis scatter plot per λ, and `report.json`.
pub fn run_spread(cfg: &ExperimentConfig, dir: &Path) -> LabResult<SpreadReport> {
    let opts = SolveOptions { route: cfg.route, filter_ratio: cfg.filter_ratio, ..Default::default() };
    let mut cases = Vec::new();
    for &lambda in &cfg.lambda_list {
        for &n in &cfg.n_list {
            cases.push(Case::from_config(cfg, n, lambda)?);
        }
    }
    let solved: Vec<_> = cases
        .par_iter()
        .map(|c| {
            let s = solve_case(c, &opts)?;
            let pts: Vec<(f64, f64)> = s.spectrum.finite_eigs.iter().map(|z| (z.re, z.im)).collect();
            Ok((spectrum_csv(&s.spectrum), pts, CaseRecord::new(&s, cfg.n_eigs_report)))
        })
        .collect::<threefield_core::Result<Vec<_>>>()?;

    for (case, (csv, _, _)) in cases.iter().zip(&solved) {
        write_file(&dir.join(spectrum_file(case.n, case.params.lambda)), csv)?;
    }
    let all = || solved.iter().flat_map(|(_, p, _)| p.iter());
    let fx = Range::covering(all().map(|p| p.0));
    let fy = Range::covering(all().map(|p| p.1));
    for &lambda in &cfg.lambda_list {
        let series: Vec<Series> = cases
            .iter()
            .zip(&solved)
            .filter(|(c, _)| c.params.lambda == lambda)
            .map(|(c, (_, pts, _))| Series { label: format!("N = {}", c.n), points: pts.clone() })
            .collect();
        let title = format!("spectrum, {} lambda = {lambda:e}", cfg.mesh_family);
        let tag = lambda_tag(lambda);
        let auto = svg::scatter(&title, "Re gamma", "Im gamma", &series, None, None);
        write_file(&dir.join(format!("spread_lam{tag}.svg")), &auto)?;
        let fixed = svg::scatter(&title, "Re gamma", "Im gamma", &series, Some(fx), Some(fy));
        write_file(&dir.join(format!("spread_lam{tag}_fixed.svg")), &fixed)?;
    }
    let report = SpreadReport {
        cases: solved.into_iter().map(|(_, _, r)| r).collect(),
        fixed_axes: [fx.min, fx.max, fy.min, fy.max],
    };
    write_json(&dir.join("report.json"), &report)?;
    Ok(report)
}
