use std::fmt;

use crate::autodiff::tape::{Tape, TapeParams, Var};
use crate::error::Result;
use crate::params::ParameterStore;
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct FiniteDiffOptions {
    pub h: f64,
    pub tol: f64,
    /// Check at most this many evenly spaced entries per parameter.
    pub max_entries_per_param: Option<usize>,
    /// Negate the adjoint of this op (checker sanity runs).
    pub corrupt_op: Option<String>,
}

impl Default for FiniteDiffOptions {
    fn default() -> Self {
        Self {
            h: 1e-5,
            tol: 1e-4,
            max_entries_per_param: None,
            corrupt_op: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_err: f64,
    pub checked: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradReport {
    pub tol: f64,
    pub params: Vec<ParamCheck>,
}

impl GradReport {
    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.passed)
    }

    pub fn worst(&self) -> Option<&ParamCheck> {
        self.params
            .iter()
            .max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
    }

    pub fn failures(&self) -> impl Iterator<Item = &ParamCheck> {
        self.params.iter().filter(|p| !p.passed)
    }
}

impl fmt::Display for GradReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self
            .params
            .iter()
            .map(|p| p.name.len())
            .max()
            .unwrap_or(4)
            .max(9);
        writeln!(
            f,
            "{:<width$}  {:>7}  {:>12}  status",
            "parameter", "checked", "max_rel_err"
        )?;
        for p in &self.params {
            writeln!(
                f,
                "{:<width$}  {:>7}  {:>12.3e}  {}",
                p.name,
                p.checked,
                p.max_rel_err,
                if p.passed { "ok" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn evaluate<T, F>(store: &ParameterStore<T>, loss_fn: &F) -> Result<f64>
where
    T: Scalar,
    F: Fn(&mut Tape<T>, &TapeParams) -> Result<Var>,
{
    let mut tape = Tape::new();
    let bound = tape.bind_store(store)?;
    let loss = loss_fn(&mut tape, &bound)?;
    Ok(tape.scalar_value(loss).as_f64())
}

fn entry_indices(len: usize, limit: Option<usize>) -> Vec<usize> {
    match limit {
        Some(k) if k < len => (0..k).map(|i| i * len / k).collect(),
        _ => (0..len).collect(),
    }
}

/// Compares tape gradients against central differences with step `h`.
/// Failures are reported in the returned [`GradReport`], not as errors.
pub fn finite_diff_check<T, F>(
    store: &ParameterStore<T>,
    loss_fn: F,
    opts: &FiniteDiffOptions,
) -> Result<GradReport>
where
    T: Scalar,
    F: Fn(&mut Tape<T>, &TapeParams) -> Result<Var>,
{
    let analytic = {
        let mut tape = Tape::new();
        if let Some(op) = &opts.corrupt_op {
            tape.corrupt_adjoint(op.clone());
        }
        let bound = tape.bind_store(store)?;
        let loss = loss_fn(&mut tape, &bound)?;
        tape.backward(loss)?
    };

    let mut work = store.clone();
    let names: Vec<String> = store.names().map(str::to_string).collect();
    let mut params = Vec::with_capacity(names.len());
    for name in names {
        let g = analytic.get(&name)?.clone();
        let idx = entry_indices(g.len(), opts.max_entries_per_param);
        let mut worst = 0.0f64;
        for &i in &idx {
            let orig = work.get(&name)?.data()[i];
            work.get_mut(&name)?.data_mut()[i] = orig + T::from_f64(opts.h);
            let plus = evaluate(&work, &loss_fn)?;
            work.get_mut(&name)?.data_mut()[i] = orig - T::from_f64(opts.h);
            let minus = evaluate(&work, &loss_fn)?;
            work.get_mut(&name)?.data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * opts.h);
            let err = relative_error(g.data()[i].as_f64(), numeric);
            worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
        }
        params.push(ParamCheck {
            name,
            max_rel_err: worst,
            checked: idx.len(),
            passed: worst <= opts.tol,
        });
    }
    Ok(GradReport {
        tol: opts.tol,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Exec;
    use crate::params::Binder;
    use crate::tensor::Tensor;

    fn store() -> ParameterStore<f64> {
        let mut s = ParameterStore::new();
        s.insert("w", Tensor::from_vec(&[3], vec![0.3, -1.2, 2.0]).unwrap())
            .unwrap();
        s
    }

    fn cube_loss(tape: &mut Tape<f64>, p: &TapeParams) -> Result<Var> {
        let w = p.get("w")?;
        let sq = tape.mul(&w, &w)?;
        let cube = tape.mul(&sq, &w)?;
        tape.sum(&cube)
    }

    #[test]
    fn smooth_function_passes() {
        let r = finite_diff_check(&store(), cube_loss, &FiniteDiffOptions::default()).unwrap();
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn negated_adjoint_is_caught() {
        let opts = FiniteDiffOptions {
            corrupt_op: Some("mul".into()),
            ..Default::default()
        };
        let r = finite_diff_check(&store(), cube_loss, &opts).unwrap();
        assert!(!r.passed());
        assert!(r.worst().unwrap().max_rel_err > 0.5);
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1.0, 0.5) - 0.5).abs() < 1e-15);
    }
}
