//! Thread-local operation counters fed by the instrumented kernels.
//!
//! Counts are bulk-incremented once per kernel invocation, so they are exact
//! functions of the input shapes and independent of timing.

use std::cell::Cell;

thread_local! {
    static ARITH: Cell<u64> = const { Cell::new(0) };
    static TOKEN_PAIRS: Cell<u64> = const { Cell::new(0) };
}

/// Snapshot of both counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounts {
    /// Multiply-accumulates, FFT butterflies and elementwise work.
    pub arith: u64,
    /// Query/key pairs scored by dot-product attention.
    pub token_pairs: u64,
}

#[inline]
pub fn add_arith(n: usize) {
    ARITH.with(|c| c.set(c.get() + n as u64));
}

#[inline]
pub fn add_token_pairs(n: usize) {
    TOKEN_PAIRS.with(|c| c.set(c.get() + n as u64));
}

pub fn reset() {
    ARITH.with(|c| c.set(0));
    TOKEN_PAIRS.with(|c| c.set(0));
}

pub fn snapshot() -> OpCounts {
    OpCounts {
        arith: ARITH.with(Cell::get),
        token_pairs: TOKEN_PAIRS.with(Cell::get),
    }
}

/// Runs `f` and returns the counts it accumulated on this thread.
pub fn measure<R>(f: impl FnOnce() -> R) -> (R, OpCounts) {
    let before = snapshot();
    let out = f();
    let after = snapshot();
    (
        out,
        OpCounts {
            arith: after.arith - before.arith,
            token_pairs: after.token_pairs - before.token_pairs,
        },
    )
}
