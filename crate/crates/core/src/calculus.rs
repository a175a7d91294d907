//! Marginal value (V′), speed of marginal value (V″) and jolt (V‴) by finite
//! differences, motion classification, and the zero-crossing detectors for
//! the optimum, stable-market, subsidy-withdrawal and government-optimum
//! conditions.
//!
//! Detectors run after the fact over recorded series, so they can use
//! central stencils. Boundary points get one-sided stencils, are flagged,
//! and are never scanned by a detector.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::ledger::ValueAmount;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalculusError {
    #[error("invalid sampling grid: {0}")]
    InvalidGrid(String),
    #[error("order-{order} derivative needs at least {needed} samples, got {len}")]
    TooShort { order: u8, needed: usize, len: usize },
    #[error("unsupported derivative order {0} (expected 1, 2 or 3)")]
    UnsupportedOrder(u8),
    #[error("series are not on the same sampling grid")]
    GridMismatch,
}

pub type Result<T, E = CalculusError> = std::result::Result<T, E>;

/// Uniformly sampled values: `values[i]` is taken at `t0 + i·dt`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Series {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(CalculusError::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        if !t0.is_finite() {
            return Err(CalculusError::InvalidGrid(format!("t0 must be finite, got {t0}")));
        }
        if values.is_empty() {
            return Err(CalculusError::InvalidGrid("series is empty".into()));
        }
        Ok(Series { t0, dt, values })
    }

    /// Samples `f` at `t0 + i·dt` for `i < len`.
    pub fn sample(t0: f64, dt: f64, len: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..len).map(|i| f(t0 + i as f64 * dt)).collect();
        Series::new(t0, dt, values)
    }

    pub fn from_amounts(t0: f64, dt: f64, amounts: &[ValueAmount]) -> Result<Self> {
        Series::new(t0, dt, amounts.iter().map(|a| a.to_f64()).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, index: usize) -> f64 {
        self.t0 + index as f64 * self.dt
    }

    /// Tick number of sample `index`, counting ticks of length `dt` from 0.
    pub fn tick(&self, index: usize) -> u64 {
        let offset = (self.t0 / self.dt).round().max(0.0) as u64;
        offset + index as u64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn same_grid(&self, other: &Series) -> bool {
        self.len() == other.len()
            && (self.dt - other.dt).abs() <= 1e-12 * self.dt
            && (self.t0 - other.t0).abs() <= 1e-9 * self.dt
    }

    fn zip_with(&self, other: &Series, f: impl Fn(f64, f64) -> f64) -> Result<Series> {
        if !self.same_grid(other) {
            return Err(CalculusError::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect();
        Ok(Series {
            t0: self.t0,
            dt: self.dt,
            values,
        })
    }

    pub fn add(&self, other: &Series) -> Result<Series> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Series) -> Result<Series> {
        self.zip_with(other, |a, b| a - b)
    }
}

fn check_grids(series: &[&Series]) -> Result<()> {
    let first = series[0];
    if series.iter().all(|s| first.same_grid(s)) {
        Ok(())
    } else {
        Err(CalculusError::GridMismatch)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stencil {
    Central,
    Forward,
    Backward,
}

/// Half-width of the central stencil for each order.
fn half_width(order: u8) -> usize {
    if order == 3 {
        2
    } else {
        1
    }
}

fn min_len(order: u8) -> usize {
    if order == 3 {
        5
    } else {
        3
    }
}

/// Derivative of the given order with the stencil used at each point.
///
/// Interior points:
/// - order 1: `(v[k+1] - v[k-1]) / 2dt`
/// - order 2: `(v[k+1] - 2v[k] + v[k-1]) / dt²`
/// - order 3: `(v[k+2] - 2v[k+1] + 2v[k-1] - v[k-2]) / 2dt³`
///
/// Boundary points use first-order one-sided differences.
pub fn derivative_with_stencils(s: &Series, order: u8) -> Result<(Series, Vec<Stencil>)> {
    if !(1..=3).contains(&order) {
        return Err(CalculusError::UnsupportedOrder(order));
    }
    let n = s.len();
    let needed = min_len(order);
    if n < needed {
        return Err(CalculusError::TooShort { order, needed, len: n });
    }
    let v = &s.values;
    let h = s.dt;
    let w = half_width(order);
    let mut out = Vec::with_capacity(n);
    let mut stencils = Vec::with_capacity(n);
    for k in 0..n {
        let (value, stencil) = if k >= w && k + w < n {
            let d = match order {
                1 => (v[k + 1] - v[k - 1]) / (2.0 * h),
                2 => (v[k + 1] - 2.0 * v[k] + v[k - 1]) / (h * h),
                _ => (v[k + 2] - 2.0 * v[k + 1] + 2.0 * v[k - 1] - v[k - 2]) / (2.0 * h * h * h),
            };
            (d, Stencil::Central)
        } else if k + (order as usize) < n {
            (forward(v, k, order) / h.powi(order as i32), Stencil::Forward)
        } else {
            (backward(v, k, order) / h.powi(order as i32), Stencil::Backward)
        };
        out.push(value);
        stencils.push(stencil);
    }
    Ok((
        Series {
            t0: s.t0,
            dt: s.dt,
            values: out,
        },
        stencils,
    ))
}

fn forward(v: &[f64], k: usize, order: u8) -> f64 {
    match order {
        1 => v[k + 1] - v[k],
        2 => v[k + 2] - 2.0 * v[k + 1] + v[k],
        _ => v[k + 3] - 3.0 * v[k + 2] + 3.0 * v[k + 1] - v[k],
    }
}

fn backward(v: &[f64], k: usize, order: u8) -> f64 {
    match order {
        1 => v[k] - v[k - 1],
        2 => v[k] - 2.0 * v[k - 1] + v[k - 2],
        _ => v[k] - 3.0 * v[k - 1] + 3.0 * v[k - 2] - v[k - 3],
    }
}

pub fn derivative(s: &Series, order: u8) -> Result<Series> {
    derivative_with_stencils(s, order).map(|(d, _)| d)
}

/// V′, V″ and V‴ on the input grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DerivativeSet {
    pub v1: Series,
    pub v2: Series,
    pub v3: Series,
    pub stencils: [Vec<Stencil>; 3],
}

impl DerivativeSet {
    /// Motion class at every point where all three stencils are central.
    pub fn classify(&self, deadband: f64) -> Vec<(usize, MotionClass)> {
        (0..self.v1.len())
            .filter(|&i| self.stencils.iter().all(|s| s[i] == Stencil::Central))
            .map(|i| {
                (
                    i,
                    classify_motion(self.v1.values[i], self.v2.values[i], self.v3.values[i], deadband),
                )
            })
            .collect()
    }
}

pub fn derivative_set(s: &Series) -> Result<DerivativeSet> {
    let (v1, s1) = derivative_with_stencils(s, 1)?;
    let (v2, s2) = derivative_with_stencils(s, 2)?;
    let (v3, s3) = derivative_with_stencils(s, 3)?;
    Ok(DerivativeSet {
        v1,
        v2,
        v3,
        stencils: [s1, s2, s3],
    })
}

/// Running trapezoid integral, starting at zero.
pub fn cumulative(s: &Series) -> Series {
    let mut values = Vec::with_capacity(s.len());
    let mut acc = 0.0;
    values.push(0.0);
    for w in s.values.windows(2) {
        acc += 0.5 * (w[0] + w[1]) * s.dt;
        values.push(acc);
    }
    Series {
        t0: s.t0,
        dt: s.dt,
        values,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "-")]
    Negative,
}

impl Sign {
    pub fn of(x: f64, deadband: f64) -> Sign {
        if x.abs() <= deadband {
            Sign::Zero
        } else if x > 0.0 {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }
}

/// Interpretation of a (V′, V″, V‴) sign triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MotionLabel {
    Moving {
        positive: bool,
        increasing: bool,
        fast: bool,
    },
    /// At least one of the three is within the deadband.
    Steady,
}

impl fmt::Display for MotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MotionLabel::Moving {
                positive,
                increasing,
                fast,
            } => write!(
                f,
                "{} and {} / {}",
                if *positive { "positive" } else { "negative" },
                if *increasing { "increasing" } else { "decreasing" },
                if *fast { "fast" } else { "slowly" }
            ),
            MotionLabel::Steady => f.write_str("steady"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MotionClass {
    pub signs: [Sign; 3],
    pub label: MotionLabel,
}

/// Maps speed, acceleration and jolt of value to a motion class. Values
/// with magnitude at most `deadband` count as zero.
pub fn classify_motion(v1: f64, v2: f64, v3: f64, deadband: f64) -> MotionClass {
    let deadband = deadband.max(0.0);
    let signs = [Sign::of(v1, deadband), Sign::of(v2, deadband), Sign::of(v3, deadband)];
    let label = if signs.contains(&Sign::Zero) {
        MotionLabel::Steady
    } else {
        MotionLabel::Moving {
            positive: signs[0] == Sign::Positive,
            increasing: signs[1] == Sign::Positive,
            fast: signs[2] == Sign::Positive,
        }
    };
    MotionClass { signs, label }
}

/// Default classification deadband: `1e-9 · max|series|`.
pub fn default_deadband(s: &Series) -> f64 {
    1e-9 * s.max_abs()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EventKind {
    #[serde(rename = "MaxVG")]
    MaxVg,
    StableMarket,
    SubsidyCross,
    GovOptimum,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Event {
    pub kind: EventKind,
    pub tick: u64,
    /// Linear-interpolation estimate of the crossing time, or the sample
    /// time when the condition holds at a grid point.
    pub time: f64,
    pub witness: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
    /// Cycles the event was computed from, when known.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub cycles: Vec<String>,
}

impl Event {
    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Direction {
    Falling,
    Rising,
}

/// A located sign change of `d` between interior indices `lo` and `hi`.
#[derive(Clone, Copy, Debug)]
struct Crossing {
    lo: usize,
    hi: usize,
    /// Index reported as the event tick: the exact zero, or whichever
    /// bracket end is closer to zero.
    at: usize,
    time: f64,
    direction: Direction,
}

/// Sign changes of `d` over interior indices `[first, last]`. Runs of
/// values within `zero_tol` between opposite signs count as one crossing.
fn crossings(s: &Series, d: &[f64], first: usize, last: usize, zero_tol: f64) -> Vec<Crossing> {
    let mut out = Vec::new();
    let mut prev: Option<usize> = None;
    for j in first..=last {
        if d[j].abs() <= zero_tol {
            continue;
        }
        if let Some(p) = prev {
            if (d[p] > 0.0) != (d[j] > 0.0) {
                let direction = if d[p] > 0.0 {
                    Direction::Falling
                } else {
                    Direction::Rising
                };
                let (at, time) = if j == p + 1 {
                    let at = if d[p].abs() <= d[j].abs() { p } else { j };
                    let frac = d[p] / (d[p] - d[j]);
                    (at, s.time(p) + frac * s.dt)
                } else {
                    let at = (p + 1..j)
                        .min_by(|a, b| d[*a].abs().total_cmp(&d[*b].abs()))
                        .expect("non-empty zero run");
                    (at, s.time(at))
                };
                out.push(Crossing {
                    lo: p,
                    hi: j,
                    at,
                    time,
                    direction,
                });
            }
        }
        prev = Some(j);
    }
    out
}

fn interior(s: &Series) -> Option<(usize, usize)> {
    (s.len() >= 3).then(|| (1, s.len() - 2))
}

fn event(kind: EventKind, s: &Series, at: usize, time: f64, witness: &[(&str, f64)]) -> Event {
    Event {
        kind,
        tick: s.tick(at),
        time,
        witness: witness.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        flags: Vec::new(),
        cycles: Vec::new(),
    }
}

fn bracket(e: &mut Event, s: &Series, c: &Crossing) {
    e.witness.insert("tick_lo".into(), s.tick(c.lo) as f64);
    e.witness.insert("tick_hi".into(), s.tick(c.hi) as f64);
}

/// Maxima of VG: interior ticks where VG′ changes from positive to
/// negative. The witness records VA′ and VL′ there; the event is flagged
/// `consistent` when `|VA′ - VL′| <= tol`, `inconsistent` otherwise.
pub fn detect_max_vg(vg: &Series, va: &Series, vl: &Series, tol: f64) -> Result<Vec<Event>> {
    check_grids(&[vg, va, vl])?;
    let dvg = derivative(vg, 1)?;
    let dva = derivative(va, 1)?;
    let dvl = derivative(vl, 1)?;
    let Some((first, last)) = interior(vg) else {
        return Ok(Vec::new());
    };
    let zero_tol = 1e-12 * dvg.max_abs();
    let mut events = Vec::new();
    for c in crossings(vg, &dvg.values, first, last, zero_tol) {
        if c.direction != Direction::Falling {
            continue;
        }
        let (a, l) = (dva.values[c.at], dvl.values[c.at]);
        let gap = (a - l).abs();
        let mut e = event(
            EventKind::MaxVg,
            vg,
            c.at,
            c.time,
            &[
                ("vg_rate", dvg.values[c.at]),
                ("va_rate", a),
                ("vl_rate", l),
                ("abs_diff", gap),
                ("vg", vg.values[c.at]),
            ],
        );
        bracket(&mut e, vg, &c);
        e.flags
            .push(if gap <= tol { "consistent" } else { "inconsistent" }.into());
        events.push(e);
    }
    Ok(events)
}

/// Interior ticks where the market adds value as fast as it loses it:
/// `|VA′_M - VL′_M| <= tol`.
pub fn detect_stable_market(va_m: &Series, vl_m: &Series, tol: f64) -> Result<Vec<Event>> {
    check_grids(&[va_m, vl_m])?;
    let dva = derivative(va_m, 1)?;
    let dvl = derivative(vl_m, 1)?;
    let Some((first, last)) = interior(va_m) else {
        return Ok(Vec::new());
    };
    Ok((first..=last)
        .filter_map(|i| {
            let gap = (dva.values[i] - dvl.values[i]).abs();
            (gap <= tol).then(|| {
                event(
                    EventKind::StableMarket,
                    va_m,
                    i,
                    va_m.time(i),
                    &[
                        ("va_rate", dva.values[i]),
                        ("vl_rate", dvl.values[i]),
                        ("abs_diff", gap),
                    ],
                )
            })
        })
        .collect())
}

/// First interior tick where `VEg′ - VGn′` reaches zero or changes sign:
/// the point at which subsidised credit grows no faster than natural gain.
pub fn detect_subsidy_cross(veg: &Series, vgn: &Series) -> Result<Option<Event>> {
    check_grids(&[veg, vgn])?;
    let de = derivative(veg, 1)?;
    let dn = derivative(vgn, 1)?;
    let Some((first, last)) = interior(veg) else {
        return Ok(None);
    };
    let diff: Vec<f64> = de.values.iter().zip(&dn.values).map(|(a, b)| a - b).collect();
    let zero_tol = 1e-9 * de.max_abs().max(dn.max_abs());
    let witness = |i: usize| {
        [
            ("veg_rate", de.values[i]),
            ("vgn_rate", dn.values[i]),
            ("difference", diff[i]),
        ]
    };

    for i in first..=last {
        if diff[i].abs() <= zero_tol {
            let mut e = event(EventKind::SubsidyCross, veg, i, veg.time(i), &witness(i));
            e.witness.insert("difference".into(), 0.0);
            e.witness.insert("tick_lo".into(), veg.tick(i) as f64);
            e.witness.insert("tick_hi".into(), veg.tick(i) as f64);
            return Ok(Some(e));
        }
        if i > first && diff[i - 1].abs() > zero_tol && (diff[i - 1] > 0.0) != (diff[i] > 0.0) {
            let c = crossings(veg, &diff, i - 1, i, zero_tol)[0];
            let mut e = event(EventKind::SubsidyCross, veg, c.at, c.time, &witness(c.at));
            bracket(&mut e, veg, &c);
            return Ok(Some(e));
        }
    }
    Ok(None)
}

/// Zero crossings of `(VGg + VGc)′`, i.e. where `VGg′ = -VGc′`. Each event
/// is flagged `maximum` or `minimum`. When the sum's derivative vanishes
/// everywhere, every interior tick is reported and flagged
/// `degenerate_plateau`.
pub fn detect_gov_optimum(vgg: &Series, vgc: &Series) -> Result<Vec<Event>> {
    check_grids(&[vgg, vgc])?;
    let dg = derivative(vgg, 1)?;
    let dc = derivative(vgc, 1)?;
    let Some((first, last)) = interior(vgg) else {
        return Ok(Vec::new());
    };
    let sum: Vec<f64> = dg.values.iter().zip(&dc.values).map(|(a, b)| a + b).collect();
    let zero_tol = 1e-9 * dg.max_abs().max(dc.max_abs());
    let witness = |i: usize| {
        [
            ("vgg_rate", dg.values[i]),
            ("neg_vgc_rate", -dc.values[i]),
            ("sum_rate", sum[i]),
        ]
    };

    if (first..=last).all(|i| sum[i].abs() <= zero_tol) {
        return Ok((first..=last)
            .map(|i| {
                let mut e = event(EventKind::GovOptimum, vgg, i, vgg.time(i), &witness(i));
                e.flags.push("degenerate_plateau".into());
                e
            })
            .collect());
    }
    Ok(crossings(vgg, &sum, first, last, zero_tol)
        .into_iter()
        .map(|c| {
            let mut e = event(EventKind::GovOptimum, vgg, c.at, c.time, &witness(c.at));
            bracket(&mut e, vgg, &c);
            e.flags.push(
                match c.direction {
                    Direction::Falling => "maximum",
                    Direction::Rising => "minimum",
                }
                .into(),
            );
            e
        })
        .collect())
}
