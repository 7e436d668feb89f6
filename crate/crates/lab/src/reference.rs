//! Reference eigenvalue files: written by the `oracle` subcommand, required by
//! convergence studies.

use std::path::Path;

use threefield_core::spectrum::oracle::{reference_eigenvalue, OracleOptions, ReferenceEigen};
use threefield_core::Domain;

use crate::error::{LabError, LabResult};

pub fn compute_reference(
    domain: Domain,
    mu: f64,
    lambda: f64,
    index: usize,
    ns: &[usize],
) -> LabResult<ReferenceEigen> {
    let ns: [usize; 3] = ns
        .try_into()
        .map_err(|_| LabError::Usage(format!("oracle needs exactly three mesh sizes, got {ns:?}")))?;
    let params = threefield_core::ElasticParams::new(mu, lambda)?;
    if lambda > 1e2 {
        log::warn!("the primal oracle locks for large lambda; a reference at lambda = {lambda:e} is unreliable");
    }
    Ok(reference_eigenvalue(domain, &params, index, ns, &OracleOptions::default())?)
}

pub fn load_reference(path: &Path) -> LabResult<ReferenceEigen> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        LabError::MissingReference(format!(
            "cannot read reference file {}: {e}; generate one with `threefield oracle`",
            path.display()
        ))
    })?;
    let r: ReferenceEigen = serde_json::from_str(&text)
        .map_err(|e| LabError::MissingReference(format!("{}: not a reference file: {e}", path.display())))?;
    if r.provenance.trim().is_empty() {
        return Err(LabError::MissingReference(format!("{}: reference carries no provenance", path.display())));
    }
    if !(r.value.is_finite() && r.uncertainty > 0.0) {
        return Err(LabError::MissingReference(format!(
            "{}: reference value {} with uncertainty {} is not usable",
            path.display(),
            r.value,
            r.uncertainty
        )));
    }
    Ok(r)
}

/// Checks that a reference belongs to the study's domain and material.
pub fn check_reference(r: &ReferenceEigen, domain: Domain, mu: f64, lambda: f64) -> LabResult<()> {
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    if r.domain != domain || !same(r.mu, mu) || !same(r.lambda, lambda) {
        return Err(LabError::MissingReference(format!(
            "reference is for {:?} with mu = {}, lambda = {}; the study needs {:?} with mu = {mu}, lambda = {lambda}",
            r.domain, r.mu, r.lambda, domain
        )));
    }
    if r.index != 1 {
        return Err(LabError::MissingReference(format!(
            "reference is eigenvalue {} but convergence studies track the first",
            r.index
        )));
    }
    Ok(())
}
