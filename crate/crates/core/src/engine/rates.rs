//! Per-tick amounts of rate expressions.
//!
//! A rate is value per unit of scenario time, so the amount moved in a tick
//! is the rate integrated over that tick. For a ramp `a + b·t` over tick
//! `k` (covering `[k·dt, (k+1)·dt)`) the integral is `a·dt + b·dt²·(k + ½)`,
//! which is exact in micro-units up to one final rounding.

use crate::ledger::{div_round_half_even, Coefficient, LedgerError, ValueAmount, MICRO};

type Result<T> = std::result::Result<T, LedgerError>;

fn narrow(v: i128) -> Result<ValueAmount> {
    i64::try_from(v)
        .map(ValueAmount::from_micro)
        .map_err(|_| LedgerError::Overflow)
}

/// `rate·dt`.
pub fn const_amount(rate: ValueAmount, dt: Coefficient) -> Result<ValueAmount> {
    rate.scale(dt)
}

/// Integral of `a + b·t` over tick `tick`.
pub fn ramp_amount(a: ValueAmount, b: ValueAmount, tick: u64, dt: Coefficient) -> Result<ValueAmount> {
    let m = i128::from(MICRO);
    let dt = i128::from(dt.micro());
    let steps = i128::from(tick)
        .checked_mul(2)
        .and_then(|v| v.checked_add(1))
        .ok_or(LedgerError::Overflow)?;
    let level = i128::from(a.micro())
        .checked_mul(dt)
        .and_then(|v| v.checked_mul(2 * m))
        .ok_or(LedgerError::Overflow)?;
    let slope = i128::from(b.micro())
        .checked_mul(dt)
        .and_then(|v| v.checked_mul(dt))
        .and_then(|v| v.checked_mul(steps))
        .ok_or(LedgerError::Overflow)?;
    let numerator = level.checked_add(slope).ok_or(LedgerError::Overflow)?;
    narrow(div_round_half_even(numerator, 2 * m * m))
}

/// `k·level·dt`.
pub fn prop_amount(k: Coefficient, level: ValueAmount, dt: Coefficient) -> Result<ValueAmount> {
    let m = i128::from(MICRO);
    let n = i128::from(k.micro())
        .checked_mul(i128::from(level.micro()))
        .and_then(|v| v.checked_mul(i128::from(dt.micro())))
        .ok_or(LedgerError::Overflow)?;
    narrow(div_round_half_even(n, m * m))
}
