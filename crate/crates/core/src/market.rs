//! Markets of many cycles: reporting errors and their cancellation over a
//! large population, the savings-account case and the linear supply-demand
//! case.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::Serialize;
use thiserror::Error;

use crate::ledger::{conservation_residual, Coefficient, LedgerError, TickFlows, ValueAmount, MICRO};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarketError {
    #[error("invalid error model: {0}")]
    InvalidModel(String),
    #[error("degenerate market: demand and supply lines are parallel (kd == ks)")]
    Degenerate,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

pub type Result<T, E = MarketError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorFamily {
    /// `uniform(-ε, ε)`.
    Uniform,
    /// `normal(0, ε)`.
    Normal,
}

/// Zero-mean reporting noise on each of the four flows of a member.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorModel {
    pub family: ErrorFamily,
    pub scale: f64,
    pub seed: u64,
}

impl ErrorModel {
    pub fn new(family: ErrorFamily, scale: f64, seed: u64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(MarketError::InvalidModel(format!(
                "scale must be finite and >= 0, got {scale}"
            )));
        }
        Ok(ErrorModel { family, scale, seed })
    }

    /// Standard deviation of one member's residual `eVA + eVE - eVL - eVG`.
    pub fn member_sigma(&self) -> f64 {
        match self.family {
            ErrorFamily::Uniform => 2.0 * self.scale / 3f64.sqrt(),
            ErrorFamily::Normal => 2.0 * self.scale,
        }
    }

    /// Error draws `[eVA, eVE, eVL, eVG]` for `members` members. One
    /// generator seeded from `seed` is read sequentially: four draws per
    /// member, members in index order.
    pub fn draws(&self, members: usize) -> Vec<[f64; 4]> {
        let mut out = Vec::with_capacity(members);
        self.for_each_draw(members, |d| out.push(d));
        out
    }

    fn for_each_draw(&self, members: usize, mut f: impl FnMut([f64; 4])) {
        if self.scale == 0.0 {
            (0..members).for_each(|_| f([0.0; 4]));
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        match self.family {
            ErrorFamily::Uniform => {
                let d = Uniform::new_inclusive(-self.scale, self.scale);
                for _ in 0..members {
                    f([
                        d.sample(&mut rng),
                        d.sample(&mut rng),
                        d.sample(&mut rng),
                        d.sample(&mut rng),
                    ]);
                }
            }
            ErrorFamily::Normal => {
                let d = Normal::new(0.0, self.scale).expect("finite non-negative sigma");
                for _ in 0..members {
                    f([
                        d.sample(&mut rng),
                        d.sample(&mut rng),
                        d.sample(&mut rng),
                        d.sample(&mut rng),
                    ]);
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ReportedFlows {
    pub va: f64,
    pub ve: f64,
    pub vl: f64,
    pub vg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportedAggregate {
    pub members: usize,
    pub true_totals: TickFlows,
    pub reported_totals: ReportedFlows,
    /// `(va + ve) - (vl + vg)` of the reported totals.
    pub residual: f64,
}

/// Sums the members as reported through the error model.
///
/// The residual is accumulated as the exact residual of the true totals
/// plus the signed sum of the errors, which equals the residual of the
/// reported totals without the cancellation error of subtracting large
/// nearly-equal floats.
pub fn aggregate_with_errors(members: &[TickFlows], model: &ErrorModel) -> Result<ReportedAggregate> {
    let mut true_totals = TickFlows::default();
    for m in members {
        true_totals = true_totals.checked_add(m)?;
    }
    let mut errors = [0.0f64; 4];
    let mut error_residual = 0.0f64;
    model.for_each_draw(members.len(), |d| {
        for (acc, e) in errors.iter_mut().zip(d) {
            *acc += e;
        }
        error_residual += d[0] + d[1] - d[2] - d[3];
    });
    let reported_totals = ReportedFlows {
        va: true_totals.va.to_f64() + errors[0],
        ve: true_totals.ve.to_f64() + errors[1],
        vl: true_totals.vl.to_f64() + errors[2],
        vg: true_totals.vg.to_f64() + errors[3],
    };
    Ok(ReportedAggregate {
        members: members.len(),
        true_totals,
        reported_totals,
        residual: conservation_residual(&true_totals).to_f64() + error_residual,
    })
}

/// Seed of replica `replica`: stream `replica` of the generator seeded with
/// `seed`, first word. Independent of how replicas are scheduled.
pub fn replica_seed(seed: u64, replica: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng.next_u64()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LlnStatistics {
    pub n: usize,
    pub replicas: usize,
    /// Mean over replicas of `residual / n`.
    pub mean_residual_per_member: f64,
    /// Mean over replicas of `|residual / n|`.
    pub abs_mean: f64,
    /// Analytic standard deviation of `residual / n`.
    pub expected_sigma: f64,
    /// Sample standard deviation of the per-replica `residual / n`.
    pub sample_sd: f64,
    pub per_replica: Vec<f64>,
}

/// Reported residual per member over `replicas` populations of `n`
/// balanced members. Errors cancel as `1/√n`.
pub fn lln_experiment(n: usize, model: &ErrorModel, replicas: usize) -> Result<LlnStatistics> {
    if n == 0 || replicas == 0 {
        return Err(MarketError::InvalidParams("n and replicas must be at least 1".into()));
    }
    let member = TickFlows::balanced(
        ValueAmount::from_units(100)?,
        ValueAmount::from_units(50)?,
        ValueAmount::from_units(30)?,
    )?;
    let members = vec![member; n];
    let mut per_replica = Vec::with_capacity(replicas);
    for r in 0..replicas {
        let m = ErrorModel {
            seed: replica_seed(model.seed, r as u64),
            ..*model
        };
        per_replica.push(aggregate_with_errors(&members, &m)?.residual / n as f64);
    }
    let k = replicas as f64;
    let mean = per_replica.iter().sum::<f64>() / k;
    let abs_mean = per_replica.iter().map(|v| v.abs()).sum::<f64>() / k;
    let sample_sd = if replicas > 1 {
        (per_replica.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(LlnStatistics {
        n,
        replicas,
        mean_residual_per_member: mean,
        abs_mean,
        expected_sigma: model.member_sigma() / (n as f64).sqrt(),
        sample_sd,
        per_replica,
    })
}

/// Least-squares slope of `ys` on `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Demand `pd = kd·q + cd`, supply `ps = ks·q + cs`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SupplyDemandParams {
    pub kd: f64,
    pub cd: f64,
    pub ks: f64,
    pub cs: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Equilibrium {
    pub qe: f64,
    pub pe: f64,
}

pub fn solve_equilibrium(p: &SupplyDemandParams) -> Result<Equilibrium> {
    if p.kd == p.ks {
        return Err(MarketError::Degenerate);
    }
    let qe = (p.cs - p.cd) / (p.kd - p.ks);
    Ok(Equilibrium {
        qe,
        pe: p.kd * qe + p.cd,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CovResidual {
    /// `VA - VL` at equilibrium with `VA = ks·q`, `VL = kd·q`.
    pub residual: f64,
    pub equilibrium: Option<Equilibrium>,
    /// `all_q_equilibrium` for identical lines; `degenerate_approach` when
    /// the slopes nearly coincide and `qe` grows without bound.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

/// Conservation residual at the market equilibrium: `(ks - kd)·qe`.
///
/// Identical lines balance at every quantity and give 0. Parallel distinct
/// lines have no equilibrium and are an error.
pub fn cov_equilibrium_residual(p: &SupplyDemandParams) -> Result<CovResidual> {
    if p.kd == p.ks {
        return if p.cd == p.cs {
            Ok(CovResidual {
                residual: 0.0,
                equilibrium: None,
                flags: vec!["all_q_equilibrium".into()],
            })
        } else {
            Err(MarketError::Degenerate)
        };
    }
    let eq = solve_equilibrium(p)?;
    let mut flags = Vec::new();
    let slope_scale = p.kd.abs().max(p.ks.abs()).max(1.0);
    if (p.ks - p.kd).abs() <= 1e-9 * slope_scale && p.cd != p.cs {
        flags.push("degenerate_approach".into());
    }
    Ok(CovResidual {
        residual: (p.ks - p.kd) * eq.qe,
        equilibrium: Some(eq),
        flags,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Compounding {
    Annual,
    Monthly,
}

/// A savings account: principal `X`, annual rate `r`, monthly fee `Y`,
/// over `years` years.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SavingsParams {
    pub principal: ValueAmount,
    pub rate: Coefficient,
    pub fee: ValueAmount,
    pub years: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SavingsReport {
    pub compounding: Compounding,
    pub years: u32,
    pub closed_form_vg: f64,
    /// Annual mode: the closed form evaluated exactly and rounded once.
    pub closed_form_exact: Option<ValueAmount>,
    pub oracle_vg: ValueAmount,
    pub abs_diff: f64,
    /// Monthly mode: the oracle with no fee, i.e. the principal term alone.
    pub oracle_principal: Option<ValueAmount>,
    /// Monthly mode: `|closed form - oracle_principal|`.
    pub principal_diff: Option<f64>,
    /// Monthly mode: the accumulated fees `Σ Y·(1 + r/12)^j` that the
    /// principal-only closed form leaves out.
    pub losses: Option<ValueAmount>,
    /// Annual mode past year 2 uses the general geometric form, which
    /// extends the two displayed formulas.
    pub extension: bool,
}

fn ratio(micro: i64) -> BigRational {
    BigRational::new(BigInt::from(micro), BigInt::from(MICRO))
}

/// Nearest micro-unit, ties to even.
fn round_micro(x: &BigRational) -> Result<ValueAmount> {
    let scaled = x * BigRational::from_integer(BigInt::from(MICRO));
    let floor = scaled.floor();
    let frac = &scaled - &floor;
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut q = floor.to_integer();
    if frac > half || (frac == half && (&q % 2u8) != BigInt::zero()) {
        q += 1;
    }
    q.to_i64()
        .map(ValueAmount::from_micro)
        .ok_or(MarketError::Ledger(LedgerError::Overflow))
}

fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Year recurrence `VG_k = (1 + r)·VG_{k-1} - 12Y`, `VG_0 = X`, exact.
fn annual_oracle(x: &BigRational, growth: &BigRational, y12: &BigRational, years: u32) -> BigRational {
    (0..years).fold(x.clone(), |vg, _| vg * growth - y12)
}

/// Closed forms: `X(r+1) - 12Y` for one year, `X(r+1)² - 12Y(r+2)` for
/// two, and `X(1+r)^t - 12Y·((1+r)^t - 1)/r` beyond.
fn annual_closed_form(x: &BigRational, r: &BigRational, y12: &BigRational, years: u32) -> BigRational {
    let one = BigRational::one();
    let g = &one + r;
    match years {
        0 => x.clone(),
        1 => x * &g - y12,
        2 => x * &g * &g - y12 * (r + BigRational::from_integer(BigInt::from(2))),
        t => {
            let gt = num_traits::pow(g.clone(), t as usize);
            let fees = if r.is_zero() {
                y12 * BigRational::from_integer(BigInt::from(t))
            } else {
                y12 * (&gt - &one) / r
            };
            x * gt - fees
        }
    }
}

pub fn savings_closed_form(p: &SavingsParams, compounding: Compounding) -> Result<SavingsReport> {
    let x = ratio(p.principal.micro());
    let r = ratio(p.rate.micro());
    let y = ratio(p.fee.micro());
    match compounding {
        Compounding::Annual => {
            let y12 = &y * BigRational::from_integer(BigInt::from(12));
            let growth = BigRational::one() + &r;
            let oracle = round_micro(&annual_oracle(&x, &growth, &y12, p.years))?;
            let closed = annual_closed_form(&x, &r, &y12, p.years);
            let closed_exact = round_micro(&closed)?;
            Ok(SavingsReport {
                compounding,
                years: p.years,
                closed_form_vg: to_f64(&closed),
                closed_form_exact: Some(closed_exact),
                oracle_vg: oracle,
                abs_diff: (closed_exact.to_f64() - oracle.to_f64()).abs(),
                oracle_principal: None,
                principal_diff: None,
                losses: None,
                extension: p.years > 2,
            })
        }
        Compounding::Monthly => {
            let monthly = BigRational::one() + &r / BigRational::from_integer(BigInt::from(12));
            let months = 12 * p.years as usize;
            let mut balance = x.clone();
            let mut principal = x.clone();
            for _ in 0..months {
                balance = balance * &monthly - &y;
                principal *= &monthly;
            }
            let oracle = round_micro(&balance)?;
            let oracle_principal = round_micro(&principal)?;
            let losses = round_micro(&(principal - balance))?;
            let closed = p.principal.to_f64() * (months as f64 * (p.rate.to_f64() / 12.0).ln_1p()).exp();
            Ok(SavingsReport {
                compounding,
                years: p.years,
                closed_form_vg: closed,
                closed_form_exact: None,
                oracle_vg: oracle,
                abs_diff: (closed - oracle.to_f64()).abs(),
                oracle_principal: Some(oracle_principal),
                principal_diff: Some((closed - oracle_principal.to_f64()).abs()),
                losses: Some(losses),
                extension: false,
            })
        }
    }
}

/// Year-by-year `VG` from the exact recurrence, starting at year 0.
pub fn savings_path(p: &SavingsParams) -> Result<Vec<ValueAmount>> {
    let x = ratio(p.principal.micro());
    let growth = BigRational::one() + ratio(p.rate.micro());
    let y12 = ratio(p.fee.micro()) * BigRational::from_integer(BigInt::from(12));
    let mut vg = x;
    let mut out = vec![round_micro(&vg)?];
    for _ in 0..p.years {
        vg = vg * &growth - &y12;
        out.push(round_micro(&vg)?);
    }
    Ok(out)
}
