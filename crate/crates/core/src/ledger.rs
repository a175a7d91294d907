//! Exact conservation accounting.
//!
//! Every amount is an integer count of micro-units (10⁻⁶ of one unit of
//! value), so `va + ve == vl + vg` is checked with integer equality and never
//! with a tolerance.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Micro-units per whole unit.
pub const MICRO: i64 = 1_000_000;

/// Number of fractional digits in the text form.
pub const FRACTION_DIGITS: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("value overflow")]
    Overflow,
    #[error("snapshot owner mismatch: '{initial}' vs '{last}'")]
    OwnerMismatch { initial: String, last: String },
    #[error("invalid decimal '{0}'")]
    InvalidDecimal(String),
    #[error("decimal '{0}' has more than 6 fractional digits")]
    TooPrecise(String),
}

pub type Result<T, E = LedgerError> = std::result::Result<T, E>;

/// How to treat input digits beyond the sixth fractional place.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rounding {
    /// Reject the input.
    Exact,
    /// Round half to even.
    HalfEven,
}

/// Divides `n` by a positive `d`, rounding half to even.
pub(crate) fn div_round_half_even(n: i128, d: i128) -> i128 {
    debug_assert!(d > 0);
    let q = n.div_euclid(d);
    let r = n.rem_euclid(d);
    match (2 * r).cmp(&d) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => {
            if q % 2 == 0 {
                q
            } else {
                q + 1
            }
        }
    }
}

fn to_i64(v: i128) -> Result<i64> {
    i64::try_from(v).map_err(|_| LedgerError::Overflow)
}

/// Parses `[+-]D*[.D*]` into micro-units.
pub(crate) fn parse_micro(text: &str, rounding: Rounding) -> Result<i64> {
    let invalid = || LedgerError::InvalidDecimal(text.to_string());
    let s = text.trim();
    let (negative, body) = match s.as_bytes().first() {
        Some(b'-') => (true, &s[1..]),
        Some(b'+') => (false, &s[1..]),
        _ => (false, s),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(invalid());
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return Err(invalid());
    }
    if frac_part.len() > FRACTION_DIGITS && rounding == Rounding::Exact {
        return Err(LedgerError::TooPrecise(text.to_string()));
    }

    let mut int_value: i128 = 0;
    for b in int_part.bytes() {
        int_value = int_value
            .checked_mul(10)
            .and_then(|v| v.checked_add(i128::from(b - b'0')))
            .ok_or(LedgerError::Overflow)?;
        if int_value > i128::from(i64::MAX) {
            return Err(LedgerError::Overflow);
        }
    }
    let mut micro = int_value * i128::from(MICRO);
    let (kept, dropped) = frac_part.split_at(frac_part.len().min(FRACTION_DIGITS));
    let mut frac: i128 = 0;
    for b in kept.bytes() {
        frac = frac * 10 + i128::from(b - b'0');
    }
    for _ in kept.len()..FRACTION_DIGITS {
        frac *= 10;
    }
    micro += frac;
    if !dropped.is_empty() {
        // Half-even on the dropped tail: compare it against "5000…".
        let first = dropped.as_bytes()[0] - b'0';
        let rest_nonzero = dropped.bytes().skip(1).any(|b| b != b'0');
        let round_up = match first.cmp(&5) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => rest_nonzero || micro % 2 == 1,
        };
        if round_up {
            micro += 1;
        }
    }
    if negative {
        micro = -micro;
    }
    to_i64(micro)
}

pub(crate) fn fmt_micro(micro: i64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let sign = if micro < 0 { "-" } else { "" };
    let abs = micro.unsigned_abs();
    let scale = MICRO as u64;
    write!(f, "{sign}{}.{:06}", abs / scale, abs % scale)
}

/// An exact, signed quantity of value in micro-units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ValueAmount(i64);

impl ValueAmount {
    pub const ZERO: ValueAmount = ValueAmount(0);

    pub const fn from_micro(micro: i64) -> Self {
        ValueAmount(micro)
    }

    pub fn from_units(units: i64) -> Result<Self> {
        units.checked_mul(MICRO).map(ValueAmount).ok_or(LedgerError::Overflow)
    }

    pub const fn micro(self) -> i64 {
        self.0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn checked_add(self, other: Self) -> Result<Self> {
        self.0
            .checked_add(other.0)
            .map(ValueAmount)
            .ok_or(LedgerError::Overflow)
    }

    pub fn checked_sub(self, other: Self) -> Result<Self> {
        self.0
            .checked_sub(other.0)
            .map(ValueAmount)
            .ok_or(LedgerError::Overflow)
    }

    pub fn checked_neg(self) -> Result<Self> {
        self.0.checked_neg().map(ValueAmount).ok_or(LedgerError::Overflow)
    }

    /// Multiplies by a six-decimal coefficient, rounding half to even.
    pub fn scale(self, factor: Coefficient) -> Result<Self> {
        let product = i128::from(self.0) * i128::from(factor.micro());
        to_i64(div_round_half_even(product, i128::from(MICRO))).map(ValueAmount)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / MICRO as f64
    }

    /// Nearest micro-unit, ties to even. Non-finite input is an overflow.
    pub fn from_f64(x: f64) -> Result<Self> {
        let scaled = x * MICRO as f64;
        if !scaled.is_finite() || scaled.abs() >= 9.2e18 {
            return Err(LedgerError::Overflow);
        }
        Ok(ValueAmount(scaled.round_ties_even() as i64))
    }

    pub fn parse(text: &str, rounding: Rounding) -> Result<Self> {
        parse_micro(text, rounding).map(ValueAmount)
    }

    pub fn sum<I: IntoIterator<Item = ValueAmount>>(items: I) -> Result<Self> {
        items
            .into_iter()
            .try_fold(ValueAmount::ZERO, |acc, x| acc.checked_add(x))
    }
}

impl fmt::Display for ValueAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_micro(self.0, f)
    }
}

/// External decimal input: extra digits are rounded half to even.
impl FromStr for ValueAmount {
    type Err = LedgerError;

    fn from_str(s: &str) -> Result<Self> {
        ValueAmount::parse(s, Rounding::HalfEven)
    }
}

impl Serialize for ValueAmount {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ValueAmount {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// A dimensionless six-decimal number (rates, proportionality factors, time
/// steps). Shares the fixed-point text form of [`ValueAmount`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coefficient(i64);

impl Coefficient {
    pub const ZERO: Coefficient = Coefficient(0);
    pub const ONE: Coefficient = Coefficient(MICRO);

    pub const fn from_micro(micro: i64) -> Self {
        Coefficient(micro)
    }

    pub const fn micro(self) -> i64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / MICRO as f64
    }

    pub fn parse(text: &str, rounding: Rounding) -> Result<Self> {
        parse_micro(text, rounding).map(Coefficient)
    }

    /// Product of two coefficients, rounded half to even.
    pub fn checked_mul(self, other: Coefficient) -> Result<Coefficient> {
        let product = i128::from(self.0) * i128::from(other.0);
        to_i64(div_round_half_even(product, i128::from(MICRO))).map(Coefficient)
    }

    pub fn is_integer(self) -> bool {
        self.0 % MICRO == 0
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_micro(self.0, f)
    }
}

impl FromStr for Coefficient {
    type Err = LedgerError;

    fn from_str(s: &str) -> Result<Self> {
        Coefficient::parse(s, Rounding::HalfEven)
    }
}

impl Serialize for Coefficient {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// One tick's (or one accumulation's) four flows.
///
/// `vg` is the balancing item: engine-produced flows always satisfy
/// `va + ve == vl + vg`. Imported flows may not, which is what
/// [`conservation_residual`] measures.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct TickFlows {
    pub va: ValueAmount,
    pub ve: ValueAmount,
    pub vl: ValueAmount,
    pub vg: ValueAmount,
}

impl TickFlows {
    /// Builds the flows with `vg = va + ve - vl`.
    pub fn balanced(va: ValueAmount, ve: ValueAmount, vl: ValueAmount) -> Result<Self> {
        let vg = va.checked_add(ve)?.checked_sub(vl)?;
        Ok(TickFlows { va, ve, vl, vg })
    }

    pub fn checked_add(&self, other: &TickFlows) -> Result<TickFlows> {
        Ok(TickFlows {
            va: self.va.checked_add(other.va)?,
            ve: self.ve.checked_add(other.ve)?,
            vl: self.vl.checked_add(other.vl)?,
            vg: self.vg.checked_add(other.vg)?,
        })
    }

    /// Negative flows are legal (debt, net-loss ticks) but worth flagging.
    pub fn has_negative(&self) -> bool {
        [self.va, self.ve, self.vl, self.vg].iter().any(|x| x.is_negative())
    }
}

/// `(va + ve) - (vl + vg)`. Saturates at the `i64` range for pathological
/// imported values.
pub fn conservation_residual(flows: &TickFlows) -> ValueAmount {
    let lhs = i128::from(flows.va.micro()) + i128::from(flows.ve.micro());
    let rhs = i128::from(flows.vl.micro()) + i128::from(flows.vg.micro());
    let r = (lhs - rhs).clamp(i128::from(i64::MIN), i128::from(i64::MAX));
    ValueAmount::from_micro(r as i64)
}

/// Running totals of a single cycle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CycleLedger {
    pub cycle_id: String,
    cumulative: TickFlows,
    tick_count: u64,
}

impl CycleLedger {
    pub fn new(cycle_id: impl Into<String>) -> Self {
        CycleLedger {
            cycle_id: cycle_id.into(),
            cumulative: TickFlows::default(),
            tick_count: 0,
        }
    }

    /// A ledger read from outside the engine; its totals need not balance.
    pub fn from_parts(cycle_id: impl Into<String>, cumulative: TickFlows, tick_count: u64) -> Self {
        CycleLedger {
            cycle_id: cycle_id.into(),
            cumulative,
            tick_count,
        }
    }

    pub fn cumulative(&self) -> &TickFlows {
        &self.cumulative
    }

    pub fn tick_count(&self) -> u64 {
        self.tick_count
    }

    /// Records one tick. Leaves the ledger untouched on overflow.
    pub fn record_tick(&mut self, va: ValueAmount, ve: ValueAmount, vl: ValueAmount) -> Result<TickFlows> {
        let flows = TickFlows::balanced(va, ve, vl)?;
        self.cumulative = self.cumulative.checked_add(&flows)?;
        self.tick_count += 1;
        Ok(flows)
    }
}

/// Field-wise totals over a group of cycles (a market, an economy).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AggregateLedger {
    pub member_count: usize,
    pub totals: TickFlows,
}

impl AggregateLedger {
    pub fn residual(&self) -> ValueAmount {
        conservation_residual(&self.totals)
    }
}

pub fn merge_ledgers(members: &[CycleLedger]) -> Result<AggregateLedger> {
    let totals = members
        .iter()
        .try_fold(TickFlows::default(), |acc, m| acc.checked_add(m.cumulative()))?;
    Ok(AggregateLedger {
        member_count: members.len(),
        totals,
    })
}

/// A stock reading for one owner at one tick.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StockSnapshot {
    pub owner: String,
    pub amount: ValueAmount,
    pub tick: u64,
}

/// Value gained between two readings of the same owner's stock.
pub fn value_gained(initial: &StockSnapshot, last: &StockSnapshot) -> Result<ValueAmount> {
    if initial.owner != last.owner {
        return Err(LedgerError::OwnerMismatch {
            initial: initial.owner.clone(),
            last: last.owner.clone(),
        });
    }
    last.amount.checked_sub(initial.amount)
}
