//! JSON records for fit results.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use crate::model::FitResult;

#[derive(Serialize)]
struct ParamRecord {
    value: f64,
    stderr: f64,
    free: bool,
}

#[derive(Serialize)]
struct FitRecord<'a> {
    model: &'a str,
    params: BTreeMap<&'a str, ParamRecord>,
    free_order: Vec<&'a str>,
    covariance: &'a [Vec<f64>],
    chi2: f64,
    dof: usize,
    reduced_chi2: f64,
    converged: bool,
    n_iter: usize,
}

/// `{model, params: {name: {value, stderr, free}}, covariance, chi2, dof,
/// reduced_chi2, converged, n_iter}` with keys in a fixed order.
pub fn fit_result_value(r: &FitResult) -> Value {
    let rec = FitRecord {
        model: &r.model,
        params: r
            .params
            .iter()
            .map(|p| {
                (
                    p.name.as_str(),
                    ParamRecord {
                        value: p.value,
                        stderr: p.stderr,
                        free: p.free,
                    },
                )
            })
            .collect(),
        free_order: r
            .params
            .iter()
            .filter(|p| p.free)
            .map(|p| p.name.as_str())
            .collect(),
        covariance: &r.covariance,
        chi2: r.chi2,
        dof: r.dof,
        reduced_chi2: r.reduced_chi2(),
        converged: r.converged,
        n_iter: r.n_iter,
    };
    serde_json::to_value(rec).expect("fit records always serialize")
}

pub fn fit_result_json(r: &FitResult) -> String {
    let mut s =
        serde_json::to_string_pretty(&fit_result_value(r)).expect("fit records always serialize");
    s.push('\n');
    s
}
