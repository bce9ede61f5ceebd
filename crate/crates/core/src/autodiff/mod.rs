//! Reverse-mode differentiation and its finite-difference verification.

mod gradcheck;
mod tape;

pub use gradcheck::{finite_diff_check, relative_error, FiniteDiffOptions, GradReport, ParamCheck};
pub use tape::{Gradients, SpecVar, Tape, TapeParams, Var};

use crate::error::Result;
use crate::params::ParameterStore;
use crate::scalar::Scalar;

/// Evaluates `loss_fn` on a fresh tape with every parameter of `store` bound
/// as a leaf, then returns the loss value and its gradient per parameter.
pub fn grad<T, F>(store: &ParameterStore<T>, loss_fn: F) -> Result<(T, Gradients<T>)>
where
    T: Scalar,
    F: FnOnce(&mut Tape<T>, &TapeParams) -> Result<Var>,
{
    let mut tape = Tape::new();
    let bound = tape.bind_store(store)?;
    let loss = loss_fn(&mut tape, &bound)?;
    let value = tape.scalar_value(loss);
    Ok((value, tape.backward(loss)?))
}
