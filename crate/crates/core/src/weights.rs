//! Weight functions `theta(t)` and `rho(t) = t * exp(theta(t))`.
//!
//! Symbolic weights are written in terms of `L(t) = log(e/t)`, which is at
//! least 1 on `(0, 1)` and equals `1 + m log 2` at the dyadic sample
//! `t = 2^-m`. Everything downstream works with dyadic samples only.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::f64::consts::{E, LN_2};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::annulus_index_of_delta;
use crate::{Error, Result};

/// `L(t) = log(e/t)` at `t = 2^-m`.
#[inline]
pub fn big_l(m: u32) -> f64 {
    1.0 + m as f64 * LN_2
}

/// `log(e + L)`, the second log level of the symbolic family.
#[inline]
pub fn little_l(big_l: f64) -> f64 {
    (E + big_l).ln()
}

/// Dyadic samples of a tabulated weight, with flags that were checked
/// against the samples when the value was built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tabulated {
    values: BTreeMap<u32, f64>,
    monotone_nonincreasing_in_t: bool,
    positive: bool,
}

impl Tabulated {
    pub fn values(&self) -> &BTreeMap<u32, f64> {
        &self.values
    }

    pub fn monotone_nonincreasing_in_t(&self) -> bool {
        self.monotone_nonincreasing_in_t
    }

    pub fn positive(&self) -> bool {
        self.positive
    }

    fn samples_positive(values: &BTreeMap<u32, f64>) -> bool {
        values.values().all(|&v| v > 0.0)
    }

    /// Nonincreasing in `t` means nondecreasing in the level `m`; gaps in the
    /// stored levels are allowed.
    fn samples_monotone(values: &BTreeMap<u32, f64>) -> bool {
        values
            .values()
            .zip(values.values().skip(1))
            .all(|(a, b)| b >= a)
    }
}

/// The weight `theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThetaSpec {
    /// `c L^alpha (log(e + L))^beta`.
    LogPower { c: f64, alpha: f64, beta: f64 },
    /// `c`.
    Constant { c: f64 },
    /// `c log L`, so that `rho(t) = t L(t)^c`.
    LogL { c: f64 },
    Tabulated(Tabulated),
}

/// Leading asymptotic term `coef * L^alpha * (log L)^beta` of a symbolic weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthTerm {
    pub coef: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl GrowthTerm {
    pub fn key(&self) -> (f64, f64) {
        (self.alpha, self.beta)
    }
}

/// Lexicographic order on `(alpha, beta)` growth keys.
pub fn cmp_key(a: (f64, f64), b: (f64, f64)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1))
}

const UNIT_KEY: (f64, f64) = (0.0, 0.0);

impl ThetaSpec {
    pub fn log_power(c: f64, alpha: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("c", c), ("alpha", alpha), ("beta", beta)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} = {v} is not finite")));
            }
        }
        Ok(ThetaSpec::LogPower { c, alpha, beta })
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::InvalidParameter(format!("c = {c} is not finite")));
        }
        Ok(ThetaSpec::Constant { c })
    }

    pub fn log_l(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::InvalidParameter(format!("c = {c} is not finite")));
        }
        Ok(ThetaSpec::LogL { c })
    }

    /// Tabulated weight with caller-asserted flags; a set flag that the
    /// samples contradict is an error.
    pub fn tabulated(
        values: BTreeMap<u32, f64>,
        monotone_nonincreasing_in_t: bool,
        positive: bool,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("tabulated weight has no samples".into()));
        }
        if let Some((m, v)) = values.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("sample at m={m} is {v}")));
        }
        if positive && !Tabulated::samples_positive(&values) {
            let (&m, &value) = values.iter().find(|(_, &v)| v <= 0.0).unwrap();
            return Err(Error::NonPositiveTheta { m, value });
        }
        if monotone_nonincreasing_in_t && !Tabulated::samples_monotone(&values) {
            return Err(Error::InvalidParameter(
                "samples are not nondecreasing in m (theta not nonincreasing in t)".into(),
            ));
        }
        Ok(ThetaSpec::Tabulated(Tabulated {
            values,
            monotone_nonincreasing_in_t,
            positive,
        }))
    }

    /// Tabulated weight whose flags are whatever the samples satisfy.
    pub fn tabulated_inferred(values: BTreeMap<u32, f64>) -> Result<Self> {
        let pos = Tabulated::samples_positive(&values);
        let mono = Tabulated::samples_monotone(&values);
        ThetaSpec::tabulated(values, mono, pos)
    }

    /// Parse `logpow:c,alpha,beta`, `const:c`, `logl:c` or `table:@file.csv`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::format("theta", format!("'{s}' has no ':' separator")))?;
        let nums = |n: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = rest
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::format("theta", format!("'{x}': {e}")))
                })
                .collect::<Result<_>>()?;
            if v.len() != n {
                return Err(Error::format(
                    "theta",
                    format!("'{kind}' takes {n} numbers, got {}", v.len()),
                ));
            }
            Ok(v)
        };
        match kind {
            "logpow" => {
                let v = nums(3)?;
                ThetaSpec::log_power(v[0], v[1], v[2])
            }
            "const" => ThetaSpec::constant(nums(1)?[0]),
            "logl" => ThetaSpec::log_l(nums(1)?[0]),
            "table" => {
                let path = rest
                    .strip_prefix('@')
                    .ok_or_else(|| Error::format("theta", "table spec must be 'table:@file.csv'"))?;
                let values = crate::io::read_theta_table(Path::new(path))?;
                ThetaSpec::tabulated_inferred(values)
            }
            other => Err(Error::format("theta", format!("unknown weight kind '{other}'"))),
        }
    }

    pub fn is_symbolic(&self) -> bool {
        !matches!(self, ThetaSpec::Tabulated(_))
    }

    /// `theta` as a function of `L`; `None` for tabulated weights.
    pub fn eval_at_l(&self, l: f64) -> Option<f64> {
        match *self {
            ThetaSpec::LogPower { c, alpha, beta } => {
                if c == 0.0 {
                    return Some(0.0);
                }
                let mut v = c;
                if alpha != 0.0 {
                    v *= l.powf(alpha);
                }
                if beta != 0.0 {
                    v *= little_l(l).powf(beta);
                }
                Some(v)
            }
            ThetaSpec::Constant { c } => Some(c),
            ThetaSpec::LogL { c } => Some(if c == 0.0 { 0.0 } else { c * l.ln() }),
            ThetaSpec::Tabulated(_) => None,
        }
    }

    /// `theta(2^-m)`.
    pub fn theta_level(&self, m: u32) -> Result<f64> {
        match self {
            ThetaSpec::Tabulated(t) => t.values.get(&m).copied().ok_or(Error::MissingSample(m)),
            _ => Ok(self.eval_at_l(big_l(m)).unwrap()),
        }
    }

    /// `log rho(2^-m) = -m log 2 + theta(2^-m)`.
    pub fn ln_rho_level(&self, m: u32) -> Result<f64> {
        Ok(-(m as f64) * LN_2 + self.theta_level(m)?)
    }

    /// `theta(t)` for `t` in `(0, 1)`; tabulated weights only at stored `2^-m`.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Domain(format!("t = {t} outside (0, 1)")));
        }
        match self {
            ThetaSpec::Tabulated(tab) => {
                let m = annulus_index_of_delta(t)?;
                if crate::geometry::pow2_neg(m) != t {
                    return Err(Error::MissingSample(m));
                }
                tab.values.get(&m).copied().ok_or(Error::MissingSample(m))
            }
            _ => Ok(self.eval_at_l(1.0 - t.ln()).unwrap()),
        }
    }

    /// `theta(delta)` at a boundary gap in `(0, 1]`; `delta = 1` is the centre
    /// of the disk, where `L = 1`.
    pub fn theta_at_gap(&self, delta: f64) -> Result<f64> {
        if delta == 1.0 {
            return match self {
                ThetaSpec::Tabulated(t) => t.values.get(&0).copied().ok_or(Error::MissingSample(0)),
                _ => Ok(self.eval_at_l(1.0).unwrap()),
            };
        }
        self.evaluate(delta)
    }

    /// `(log rho(t), rho(t))`; `rho` is clamped to `f64::MAX` on overflow.
    pub fn rho(&self, t: f64) -> Result<RhoValue> {
        let theta = self.evaluate(t)?;
        let ln_rho = t.ln() + theta;
        Ok(RhoValue {
            ln_rho,
            rho: crate::sum::exp_clamped(ln_rho),
        })
    }

    /// `eps_m = 1 / theta(2^-m)` for `m = 1..=big_m`.
    pub fn dyadic_samples(&self, big_m: u32) -> Result<DyadicSamples> {
        let mut eps = Vec::with_capacity(big_m as usize);
        for m in 1..=big_m {
            let th = self.theta_level(m)?;
            if th <= 0.0 || !th.is_finite() {
                return Err(Error::NonPositiveTheta { m, value: th });
            }
            eps.push(1.0 / th);
        }
        let nonincreasing = eps.windows(2).all(|w| w[1] <= w[0]);
        Ok(DyadicSamples { eps, nonincreasing })
    }

    /// Leading term of a symbolic weight; `None` for tabulated weights and for
    /// the zero weight.
    pub fn growth(&self) -> Option<GrowthTerm> {
        let g = match *self {
            ThetaSpec::LogPower { c, alpha, beta } => GrowthTerm { coef: c, alpha, beta },
            ThetaSpec::Constant { c } => GrowthTerm {
                coef: c,
                alpha: 0.0,
                beta: 0.0,
            },
            ThetaSpec::LogL { c } => GrowthTerm {
                coef: c,
                alpha: 0.0,
                beta: 1.0,
            },
            ThetaSpec::Tabulated(_) => return None,
        };
        (g.coef != 0.0).then_some(g)
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ThetaSpec::Tabulated(t) => t.values.values().all(|&v| v == 0.0),
            _ => self.growth().is_none(),
        }
    }

    /// Positivity on all of `(0, 1)` (symbolic) or on the stored samples.
    pub fn is_positive(&self) -> bool {
        match self {
            ThetaSpec::Tabulated(t) => t.positive,
            _ => self.growth().is_some_and(|g| g.coef > 0.0),
        }
    }

    /// `theta` nonincreasing in `t` on the whole interval (symbolic sign rule)
    /// or on the stored samples.
    pub fn is_nonincreasing_in_t(&self) -> bool {
        match *self {
            ThetaSpec::Tabulated(ref t) => t.monotone_nonincreasing_in_t,
            ThetaSpec::Constant { .. } => true,
            ThetaSpec::LogL { c } => c >= 0.0,
            ThetaSpec::LogPower { c, alpha, beta } => {
                c == 0.0
                    || (c > 0.0 && alpha >= 0.0 && beta >= 0.0)
                    || (c < 0.0 && alpha <= 0.0 && beta <= 0.0)
            }
        }
    }

    /// Largest value among levels `0..=horizon` (or among the stored samples).
    pub fn max_sampled(&self, horizon: u32) -> f64 {
        match self {
            ThetaSpec::Tabulated(t) => t.values.values().copied().fold(f64::NEG_INFINITY, f64::max),
            _ => (0..=horizon)
                .map(|m| self.theta_level(m).unwrap())
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Levels at which the weight can be sampled, capped at `horizon`.
    pub fn sample_levels(&self, horizon: u32) -> Vec<u32> {
        match self {
            ThetaSpec::Tabulated(t) => t.values.keys().copied().filter(|&m| m <= horizon).collect(),
            _ => (0..=horizon).collect(),
        }
    }
}

impl fmt::Display for ThetaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThetaSpec::LogPower { c, alpha, beta } => write!(f, "logpow:{c},{alpha},{beta}"),
            ThetaSpec::Constant { c } => write!(f, "const:{c}"),
            ThetaSpec::LogL { c } => write!(f, "logl:{c}"),
            ThetaSpec::Tabulated(t) => write!(f, "table:<{} samples>", t.values.len()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoValue {
    pub ln_rho: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicSamples {
    /// `eps[m - 1] = 1 / theta(2^-m)`.
    pub eps: Vec<f64>,
    pub nonincreasing: bool,
}

/// `rho = t e^theta` with the two hypotheses used by the thick criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoSpec {
    pub theta: ThetaSpec,
    /// `rho` nondecreasing in `t`.
    pub nondecreasing: bool,
    /// `Some(C)` asserts `rho(t) <= C t`.
    pub dominated_by_ct: Option<f64>,
}

impl RhoSpec {
    /// Derive both flags. Symbolic weights use the asymptotic rule together
    /// with a check of levels `0..=horizon`; tabulated ones only the samples.
    pub fn infer(theta: ThetaSpec, horizon: u32) -> Self {
        let nondecreasing = rho_nondecreasing(&theta, horizon);
        let dominated_by_ct = theta_bounded_above(&theta).then(|| theta.max_sampled(horizon).exp());
        RhoSpec {
            theta,
            nondecreasing,
            dominated_by_ct,
        }
    }

    /// Caller-asserted flags, each checked at the dyadic samples up to `horizon`.
    pub fn with_flags(
        theta: ThetaSpec,
        nondecreasing: bool,
        dominated_by_ct: Option<f64>,
        horizon: u32,
    ) -> Result<Self> {
        if nondecreasing && !samples_rho_nondecreasing(&theta, horizon) {
            return Err(Error::Hypothesis("rho is not nondecreasing at the dyadic samples".into()));
        }
        if let Some(c) = dominated_by_ct {
            if !(c > 0.0) {
                return Err(Error::InvalidParameter(format!("domination constant {c} must be > 0")));
            }
            let bound = c.ln();
            for m in theta.sample_levels(horizon) {
                let th = theta.theta_level(m)?;
                if th > bound {
                    return Err(Error::Hypothesis(format!(
                        "rho(2^-{m}) > {c} * 2^-{m}: theta = {th} exceeds log C = {bound}"
                    )));
                }
            }
        }
        Ok(RhoSpec {
            theta,
            nondecreasing,
            dominated_by_ct,
        })
    }

    pub fn evaluate(&self, t: f64) -> Result<RhoValue> {
        self.theta.rho(t)
    }

    pub fn ln_level(&self, m: u32) -> Result<f64> {
        self.theta.ln_rho_level(m)
    }
}

fn samples_rho_nondecreasing(theta: &ThetaSpec, horizon: u32) -> bool {
    // rho(2^-(m+1)) <= rho(2^-m)  <=>  theta_{m+1} - theta_m <= log 2, across
    // possibly non-adjacent stored levels m < m': theta_m' - theta_m <= (m'-m) log 2
    let levels = theta.sample_levels(horizon);
    levels.windows(2).all(|w| {
        let a = theta.ln_rho_level(w[0]).unwrap();
        let b = theta.ln_rho_level(w[1]).unwrap();
        // tolerate rounding in the log-domain difference
        b <= a + 1e-12 * (1.0 + a.abs())
    })
}

fn rho_nondecreasing(theta: &ThetaSpec, horizon: u32) -> bool {
    if !samples_rho_nondecreasing(theta, horizon) {
        return false;
    }
    match theta.growth() {
        None => true,
        Some(g) => {
            // d theta / dL must stay <= 1 for large L
            g.coef < 0.0
                || cmp_key(g.key(), (1.0, 0.0)) == Ordering::Less
                || (g.key() == (1.0, 0.0) && g.coef <= 1.0)
        }
    }
}

/// `theta` bounded above on `(0, 1)`, so `rho(t) <= C t`.
pub fn theta_bounded_above(theta: &ThetaSpec) -> bool {
    match theta {
        ThetaSpec::Tabulated(_) => true,
        _ => match theta.growth() {
            None => true,
            Some(g) => g.coef <= 0.0 || cmp_key(g.key(), UNIT_KEY) != Ordering::Greater,
        },
    }
}

/// `theta` bounded below on `(0, 1)`, so `rho(t) >= c t`.
pub fn theta_bounded_below(theta: &ThetaSpec) -> bool {
    match theta {
        ThetaSpec::Tabulated(_) => false,
        _ => match theta.growth() {
            None => true,
            Some(g) => g.coef >= 0.0 || cmp_key(g.key(), UNIT_KEY) != Ordering::Greater,
        },
    }
}

/// Three-valued outcome of a symbolic check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TriState {
    Proven,
    Refuted,
    Undecided,
}

impl TriState {
    fn from_bool(b: bool) -> Self {
        if b {
            TriState::Proven
        } else {
            TriState::Refuted
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// `theta1 ≍ theta2`.
    pub comparable: TriState,
    /// `theta1 / theta2 -> inf`.
    pub ratio_to_infinity: TriState,
    /// `rho1 / rho2 -> inf`.
    pub rho_ratio_to_infinity: TriState,
    /// `|theta1 - theta2|` bounded.
    pub log_rho_gap_bounded: TriState,
    pub reasons: Vec<String>,
    /// `theta1 / theta2` at levels 1 and `horizon`, when both are positive there.
    pub ratio_trend: Option<(f64, f64)>,
}

/// Dominant term of `theta1 - theta2` for symbolic weights; `None` when the
/// difference vanishes identically or tends to 0.
fn dominant_difference(a: Option<GrowthTerm>, b: Option<GrowthTerm>) -> Option<GrowthTerm> {
    let neg = b.map(|g| GrowthTerm {
        coef: -g.coef,
        ..g
    });
    match (a, neg) {
        (None, None) => None,
        (Some(x), None) | (None, Some(x)) => Some(x),
        (Some(x), Some(y)) => match cmp_key(x.key(), y.key()) {
            Ordering::Greater => Some(x),
            Ordering::Less => Some(y),
            Ordering::Equal => {
                // equal keys: either the same function or one written with
                // log L, the other with log(e + L); they differ by o(1)
                let coef = x.coef + y.coef;
                (coef != 0.0).then_some(GrowthTerm { coef, ..x })
            }
        },
    }
}

/// Asymptotic comparison of two weights as `t -> 0`.
pub fn compare(theta1: &ThetaSpec, theta2: &ThetaSpec, horizon: u32) -> ComparisonReport {
    let mut reasons = Vec::new();
    let ratio_trend = (|| {
        let lo = theta1.theta_level(1).ok()? / theta2.theta_level(1).ok()?;
        let hi = theta1.theta_level(horizon).ok()? / theta2.theta_level(horizon).ok()?;
        (lo.is_finite() && hi.is_finite()).then_some((lo, hi))
    })();

    if !theta1.is_symbolic() || !theta2.is_symbolic() {
        if theta1 == theta2 {
            reasons.push("identical tables".into());
            let pos = theta1.is_positive();
            if !pos {
                reasons.push("ratios undefined: samples not all positive".into());
            }
            let ratio = |v| if pos { v } else { TriState::Undecided };
            return ComparisonReport {
                comparable: ratio(TriState::Proven),
                ratio_to_infinity: ratio(TriState::Refuted),
                rho_ratio_to_infinity: TriState::Refuted,
                log_rho_gap_bounded: TriState::Proven,
                reasons,
                ratio_trend,
            };
        }
        reasons.push("tabulated weight: only numeric trends available, no envelope certificate".into());
        return ComparisonReport {
            comparable: TriState::Undecided,
            ratio_to_infinity: TriState::Undecided,
            rho_ratio_to_infinity: TriState::Undecided,
            log_rho_gap_bounded: TriState::Undecided,
            reasons,
            ratio_trend,
        };
    }

    let (g1, g2) = (theta1.growth(), theta2.growth());
    let both_positive = theta1.is_positive() && theta2.is_positive();
    let (comparable, ratio_to_infinity) = if both_positive {
        let (a, b) = (g1.unwrap(), g2.unwrap());
        let ord = cmp_key(a.key(), b.key());
        (
            TriState::from_bool(ord == Ordering::Equal),
            TriState::from_bool(ord == Ordering::Greater),
        )
    } else {
        reasons.push("theta ratio requested for a weight that is not positive".into());
        (TriState::Undecided, TriState::Undecided)
    };

    let diff = dominant_difference(g1, g2);
    let (rho_ratio, gap_bounded) = match diff {
        None => (TriState::Refuted, TriState::Proven),
        Some(d) => {
            let above_const = cmp_key(d.key(), UNIT_KEY) == Ordering::Greater;
            (
                TriState::from_bool(d.coef > 0.0 && above_const),
                TriState::from_bool(!above_const),
            )
        }
    };
    ComparisonReport {
        comparable,
        ratio_to_infinity,
        rho_ratio_to_infinity: rho_ratio,
        log_rho_gap_bounded: gap_bounded,
        reasons,
        ratio_trend,
    }
}
