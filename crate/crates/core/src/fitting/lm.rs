//! Damped least squares (Levenberg-Marquardt) over box-bounded parameters.
//!
//! Bounds are removed by a smooth change of variables: two-sided bounds use
//! a logistic map, one-sided bounds an exponential map. The damped
//! Gauss-Newton iteration runs on the unconstrained variables, while the
//! Jacobian is taken by central differences in the physical parameters and
//! pushed through the map analytically.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    /// Chosen from the bounds.
    Auto,
    Identity,
    /// Requires a finite lower bound; the parameter is `lower + exp(z)`.
    Log,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub free: bool,
    pub transform: Transform,
}

impl ParamSpec {
    pub fn free(name: &str, value: f64) -> Self {
        ParamSpec {
            name: name.to_string(),
            value,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            free: true,
            transform: Transform::Auto,
        }
    }

    pub fn positive(name: &str, value: f64) -> Self {
        ParamSpec {
            lower: 0.0,
            ..Self::free(name, value)
        }
    }

    pub fn fixed(name: &str, value: f64) -> Self {
        ParamSpec {
            free: false,
            ..Self::free(name, value)
        }
    }

    fn resolved_transform(&self) -> Transform {
        match self.transform {
            Transform::Auto => {
                if self.lower.is_finite() || self.upper.is_finite() {
                    Transform::Log
                } else {
                    Transform::Identity
                }
            }
            t => t,
        }
    }

    pub(crate) fn check(&self) -> Result<()> {
        if !(self.lower < self.upper) {
            return Err(Error::InvalidParams(format!(
                "{}: lower bound {} is not below upper bound {}",
                self.name, self.lower, self.upper
            )));
        }
        if self.free && !(self.value > self.lower && self.value < self.upper) {
            return Err(Error::InvalidParams(format!(
                "{}: initial value {} outside ({}, {})",
                self.name, self.value, self.lower, self.upper
            )));
        }
        if !self.value.is_finite() {
            return Err(Error::InvalidParams(format!(
                "{}: non-finite value",
                self.name
            )));
        }
        Ok(())
    }

    /// Physical value from the unconstrained variable.
    fn to_physical(&self, z: f64) -> f64 {
        match self.resolved_transform() {
            Transform::Identity => z,
            _ => match (self.lower.is_finite(), self.upper.is_finite()) {
                (true, true) => self.lower + (self.upper - self.lower) / (1.0 + (-z).exp()),
                (true, false) => self.lower + z.exp(),
                (false, true) => self.upper - z.exp(),
                (false, false) => z.exp(),
            },
        }
    }

    fn to_internal(&self, p: f64) -> f64 {
        match self.resolved_transform() {
            Transform::Identity => p,
            _ => match (self.lower.is_finite(), self.upper.is_finite()) {
                (true, true) => {
                    let u = (p - self.lower) / (self.upper - self.lower);
                    (u / (1.0 - u)).ln()
                }
                (true, false) => (p - self.lower).ln(),
                (false, true) => (self.upper - p).ln(),
                (false, false) => p.ln(),
            },
        }
    }

    /// dp/dz at internal value `z`.
    fn derivative(&self, z: f64) -> f64 {
        match self.resolved_transform() {
            Transform::Identity => 1.0,
            _ => match (self.lower.is_finite(), self.upper.is_finite()) {
                (true, true) => {
                    let s = 1.0 / (1.0 + (-z).exp());
                    (self.upper - self.lower) * s * (1.0 - s)
                }
                (true, false) | (false, false) => z.exp(),
                (false, true) => -z.exp(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Converged when an accepted step lowers chi^2 by less than this fraction.
    pub chi2_rtol: f64,
    /// Converged when the step is smaller than this fraction of the parameters.
    pub step_rtol: f64,
    pub lambda0: f64,
    pub fd_rel_step: f64,
    pub fd_abs_floor: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iter: 200,
            chi2_rtol: 1e-10,
            step_rtol: 1e-8,
            lambda0: 1e-6,
            fd_rel_step: 1e-6,
            fd_abs_floor: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmReport {
    /// All parameters, frozen ones included, in input order.
    pub values: Vec<f64>,
    /// Indices of the free parameters.
    pub free: Vec<usize>,
    /// Covariance of the free parameters, already scaled by chi^2/dof.
    pub covariance: DMatrix<f64>,
    pub chi2: f64,
    pub dof: usize,
    pub converged: bool,
    pub n_iter: usize,
    /// chi^2 after every accepted step, starting with the initial value.
    pub chi2_history: Vec<f64>,
}

/// Minimizes the sum of squared residuals returned by `residuals`, which
/// receives the full parameter vector (frozen entries included).
pub fn minimize<F>(
    residuals: F,
    params: &[ParamSpec],
    n_obs: usize,
    opts: &LmOptions,
) -> Result<LmReport>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    for p in params {
        p.check()?;
    }
    let free: Vec<usize> = (0..params.len()).filter(|&i| params[i].free).collect();
    if free.is_empty() {
        return Err(Error::InvalidParams(
            "at least one parameter must be free".into(),
        ));
    }
    if n_obs <= free.len() {
        return Err(Error::InsufficientData(format!(
            "{} samples for {} free parameters",
            n_obs,
            free.len()
        )));
    }
    let dof = n_obs - free.len();
    let nf = free.len();

    let mut full: Vec<f64> = params.iter().map(|p| p.value).collect();
    let typical: Vec<f64> = params.iter().map(|p| p.value.abs()).collect();
    let mut z = DVector::from_iterator(
        nf,
        free.iter().map(|&i| params[i].to_internal(params[i].value)),
    );

    let expand = |z: &DVector<f64>, full: &mut Vec<f64>| {
        for (k, &i) in free.iter().enumerate() {
            full[i] = params[i].to_physical(z[k]);
        }
    };
    let chi2_of = |r: &[f64]| -> f64 {
        let s: f64 = r.iter().map(|x| x * x).sum();
        if s.is_finite() {
            s
        } else {
            f64::INFINITY
        }
    };
    let phys_jacobian = |full: &[f64], r0_len: usize| -> DMatrix<f64> {
        let mut jac = DMatrix::<f64>::zeros(r0_len, nf);
        let mut work = full.to_vec();
        for (k, &i) in free.iter().enumerate() {
            let p = full[i];
            let h = (opts.fd_rel_step * p.abs())
                .max(opts.fd_rel_step * 1e-3 * typical[i])
                .max(opts.fd_abs_floor);
            work[i] = p + h;
            let rp = residuals(&work);
            work[i] = p - h;
            let rm = residuals(&work);
            work[i] = p;
            for row in 0..r0_len.min(rp.len()).min(rm.len()) {
                jac[(row, k)] = (rp[row] - rm[row]) / (2.0 * h);
            }
        }
        jac
    };

    expand(&z, &mut full);
    let mut r = residuals(&full);
    if r.len() != n_obs {
        return Err(Error::InvalidParams(
            "residual length does not match samples".into(),
        ));
    }
    let mut chi2 = chi2_of(&r);
    if !chi2.is_finite() {
        return Err(Error::InvalidParams(
            "model is not finite at the initial parameters".into(),
        ));
    }
    let mut history = vec![chi2];
    let mut lambda = opts.lambda0;
    let mut converged = chi2 == 0.0;
    let mut n_iter = 0;

    while !converged && n_iter < opts.max_iter {
        n_iter += 1;
        let jp = phys_jacobian(&full, r.len());
        let mut jz = jp;
        for k in 0..nf {
            let d = params[free[k]].derivative(z[k]);
            jz.column_mut(k).scale_mut(d);
        }
        let rv = DVector::from_column_slice(&r);
        let a = jz.transpose() * &jz;
        let g = jz.transpose() * &rv;
        let diag: Vec<f64> = (0..nf).map(|k| a[(k, k)].max(1e-300)).collect();

        let mut accepted = false;
        for _ in 0..40 {
            let mut damped = a.clone();
            for k in 0..nf {
                damped[(k, k)] += lambda * diag[k];
            }
            let step = match damped.cholesky() {
                Some(ch) => -ch.solve(&g),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let z_new = &z + &step;
            let mut trial = full.clone();
            expand(&z_new, &mut trial);
            let r_new = residuals(&trial);
            let chi2_new = if r_new.len() == n_obs {
                chi2_of(&r_new)
            } else {
                f64::INFINITY
            };
            let step_rel = step.norm() / (z.norm() + 1e-12);
            if chi2_new < chi2 {
                let decrease = (chi2 - chi2_new) / chi2;
                z = z_new;
                full = trial;
                r = r_new;
                chi2 = chi2_new;
                history.push(chi2);
                lambda = (lambda / 10.0).max(1e-15);
                accepted = true;
                if decrease < opts.chi2_rtol || step_rel < opts.step_rtol || chi2 == 0.0 {
                    converged = true;
                }
                break;
            }
            if step_rel < opts.step_rtol {
                // No representable improvement left.
                converged = true;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted && !converged {
            break;
        }
    }

    let covariance = covariance(&phys_jacobian(&full, r.len()), chi2, dof, &free, params)?;
    Ok(LmReport {
        values: full,
        free,
        covariance,
        chi2,
        dof,
        converged,
        n_iter,
        chi2_history: history,
    })
}

fn covariance(
    jac: &DMatrix<f64>,
    chi2: f64,
    dof: usize,
    free: &[usize],
    params: &[ParamSpec],
) -> Result<DMatrix<f64>> {
    let nf = free.len();
    let names = |idx: Vec<usize>| -> String {
        idx.iter()
            .map(|&k| params[free[k]].name.clone())
            .collect::<Vec<_>>()
            .join(", ")
    };
    let norms: Vec<f64> = (0..nf).map(|k| jac.column(k).norm()).collect();
    let dead: Vec<usize> = (0..nf)
        .filter(|&k| !(norms[k] > 0.0) || !norms[k].is_finite())
        .collect();
    if !dead.is_empty() {
        return Err(Error::SingularJacobian(format!(
            "model does not depend on {}",
            names(dead)
        )));
    }
    // Normalize columns so the conditioning test is scale-free.
    let mut scaled = jac.clone();
    for (k, n) in norms.iter().enumerate() {
        scaled.column_mut(k).scale_mut(1.0 / n);
    }
    let corr = scaled.transpose() * &scaled;
    let eig = SymmetricEigen::new(corr.clone());
    let (kmin, &emin) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    if emin < 1e-13 {
        let v = eig.eigenvectors.column(kmin);
        let involved: Vec<usize> = (0..nf).filter(|&k| v[k].abs() > 0.1).collect();
        return Err(Error::SingularJacobian(format!(
            "{} are not separately determined",
            names(involved)
        )));
    }
    let inv_corr = corr
        .try_inverse()
        .ok_or_else(|| Error::SingularJacobian(names((0..nf).collect())))?;
    let s2 = if dof > 0 { chi2 / dof as f64 } else { 0.0 };
    let mut cov = DMatrix::<f64>::zeros(nf, nf);
    for i in 0..nf {
        for j in 0..nf {
            cov[(i, j)] = inv_corr[(i, j)] / (norms[i] * norms[j]) * s2;
        }
    }
    // Symmetrize round-off.
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(cov)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transforms_round_trip() {
        let specs = [
            ParamSpec::free("a", 3.0),
            ParamSpec::positive("b", 3.0),
            ParamSpec {
                lower: 1.0,
                upper: 5.0,
                ..ParamSpec::free("c", 3.5)
            },
            ParamSpec {
                upper: 5.0,
                ..ParamSpec::free("d", -2.0)
            },
        ];
        for s in &specs {
            let z = s.to_internal(s.value);
            assert!((s.to_physical(z) - s.value).abs() < 1e-12);
            let h = 1e-6;
            let fd = (s.to_physical(z + h) - s.to_physical(z - h)) / (2.0 * h);
            assert!((fd - s.derivative(z)).abs() < 1e-6 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn rejects_init_outside_bounds() {
        let p = [ParamSpec::positive("x", -1.0)];
        assert!(minimize(|v| vec![v[0]; 3], &p, 3, &LmOptions::default()).is_err());
    }

    #[test]
    fn fits_an_exponential() {
        let t: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| 2.5 * (-t / 0.7).exp()).collect();
        let p = [ParamSpec::free("amp", 1.0), ParamSpec::positive("tau", 2.0)];
        let rep = minimize(
            |v| {
                t.iter()
                    .zip(&y)
                    .map(|(t, y)| y - v[0] * (-t / v[1]).exp())
                    .collect()
            },
            &p,
            t.len(),
            &LmOptions::default(),
        )
        .unwrap();
        assert!(rep.converged);
        assert!((rep.values[0] - 2.5).abs() < 1e-9);
        assert!((rep.values[1] - 0.7).abs() < 1e-9);
        assert!(rep.chi2_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn degenerate_pair_is_reported() {
        let t: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let p = [ParamSpec::free("a", 1.0), ParamSpec::free("b", 1.0)];
        // y = (a + b) t: only the sum is determined.
        let err = minimize(
            |v| t.iter().map(|t| 3.0 * t - (v[0] + v[1]) * t).collect(),
            &p,
            t.len(),
            &LmOptions::default(),
        )
        .unwrap_err();
        match err {
            Error::SingularJacobian(msg) => assert!(msg.contains('a') && msg.contains('b')),
            e => panic!("unexpected {e:?}"),
        }
    }
}
