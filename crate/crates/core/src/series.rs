//! Convergence verdicts for the series behind the thin/thick criteria.
//!
//! Every verdict carries an evidence tier. `SymbolicProof` means the decision
//! follows from the closed form of the terms (integral test against an
//! explicit antiderivative); `MonotoneTailBound` means a monotonicity
//! certificate beyond some index plus an explicit tail majorant;
//! `NumericTrend` is only what the partial sums look like at the horizon.
//!
//! Terms are formed in log domain and summed twice: compensated in linear
//! scale while that stays finite, and by log-add-exp for the report once
//! partial sums leave the float range.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{E, LN_2};

use serde::{Deserialize, Serialize};

use crate::constructions::{example_count, GrowthFactor};
use crate::count::Count;
use crate::sum::{exp_clamped, log_add_exp, NeumaierSum};
use crate::weights::{cmp_key, little_l, RhoSpec, ThetaSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Divergent,
    Convergent,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tier {
    SymbolicProof,
    MonotoneTailBound,
    NumericTrend,
}

impl Tier {
    /// Certified tiers may be used as proofs downstream.
    pub fn is_certified(self) -> bool {
        self != Tier::NumericTrend
    }
}

/// Verdict at one value of the exponential-sum parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaVerdict {
    pub gamma: f64,
    pub decision: Decision,
    pub tier: Tier,
    pub partial_sum: f64,
    pub ln_partial_sum: f64,
    /// Partial sum with the excluded levels removed.
    pub partial_sum_complement: f64,
    pub tail_bound: Option<f64>,
    pub tail_from: Option<u64>,
    pub trajectory: Vec<(u64, f64)>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesVerdict {
    pub decision: Decision,
    pub tier: Tier,
    /// Last index summed.
    pub horizon: u64,
    pub partial_sum: f64,
    pub ln_partial_sum: f64,
    /// `sum_{m > tail_from} term_m <= tail_bound`.
    pub tail_bound: Option<f64>,
    pub tail_from: Option<u64>,
    /// Index beyond which the terms are certified nonincreasing.
    pub monotone_from: Option<u64>,
    /// Why the partial sums are unbounded, for divergent verdicts.
    pub divergence_witness: Option<String>,
    pub trajectory: Vec<(u64, f64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gamma_grid: Vec<GammaVerdict>,
    pub notes: Vec<String>,
}

/// Sum kept both in linear scale (compensated) and in log scale.
#[derive(Debug, Clone)]
struct LogAccum {
    plain: NeumaierSum,
    ln: f64,
}

impl LogAccum {
    fn new() -> Self {
        LogAccum {
            plain: NeumaierSum::new(),
            ln: f64::NEG_INFINITY,
        }
    }

    fn add_ln(&mut self, ln_term: f64) {
        if ln_term == f64::NEG_INFINITY {
            return;
        }
        self.ln = log_add_exp(self.ln, ln_term);
        self.plain.add(exp_clamped(ln_term));
    }

    fn value(&self) -> f64 {
        if self.ln < 700.0 {
            self.plain.value()
        } else {
            exp_clamped(self.ln)
        }
    }
}

/// Partial sums of a log-domain term stream indexed from 1, with dyadic
/// block sums over `(2^(k-1), 2^k]` for the trend rule.
#[derive(Debug, Clone)]
struct Run {
    sum: LogAccum,
    trajectory: Vec<(u64, f64)>,
    blocks: Vec<LogAccum>,
    last: u64,
}

fn block_of(i: u64) -> usize {
    if i <= 1 {
        0
    } else {
        (64 - (i - 1).leading_zeros()) as usize
    }
}

impl Run {
    fn new() -> Self {
        Run {
            sum: LogAccum::new(),
            trajectory: Vec::new(),
            blocks: Vec::new(),
            last: 0,
        }
    }

    fn push(&mut self, i: u64, ln_term: f64, horizon: u64) {
        self.sum.add_ln(ln_term);
        let b = block_of(i);
        while self.blocks.len() <= b {
            self.blocks.push(LogAccum::new());
        }
        self.blocks[b].add_ln(ln_term);
        self.last = i;
        if i.is_power_of_two() || i == horizon {
            self.trajectory.push((i, self.sum.value()));
        }
    }

    fn from_terms(horizon: u64, mut ln_term: impl FnMut(u64) -> f64) -> Self {
        let mut run = Run::new();
        for i in 1..=horizon {
            run.push(i, ln_term(i), horizon);
        }
        run
    }

    /// Ratio rule on the last two complete dyadic blocks.
    fn trend(&self) -> (Decision, String) {
        if self.sum.ln == f64::NEG_INFINITY {
            return (Decision::Convergent, "all terms vanish".into());
        }
        let complete = self
            .blocks
            .iter()
            .enumerate()
            .filter(|(k, _)| (1u64 << k) <= self.last)
            .count();
        if complete < 4 {
            return (Decision::Undecided, "fewer than four complete dyadic blocks".into());
        }
        let (a, b) = (self.blocks[complete - 2].ln, self.blocks[complete - 1].ln);
        if b == f64::NEG_INFINITY {
            return (Decision::Convergent, "last dyadic block vanishes".into());
        }
        let r = b - a;
        let msg = format!("log ratio of last two dyadic block sums = {r:.4}");
        if r >= 0.95f64.ln() {
            (Decision::Divergent, msg)
        } else if r <= 0.75f64.ln() {
            (Decision::Convergent, msg)
        } else {
            (Decision::Undecided, msg)
        }
    }

    fn verdict(self, horizon: u64) -> SeriesVerdict {
        SeriesVerdict {
            decision: Decision::Undecided,
            tier: Tier::NumericTrend,
            horizon,
            partial_sum: self.sum.value(),
            ln_partial_sum: self.sum.ln,
            tail_bound: None,
            tail_from: None,
            monotone_from: None,
            divergence_witness: None,
            trajectory: self.trajectory,
            gamma_grid: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn trend_verdict(self, horizon: u64) -> SeriesVerdict {
        let (d, msg) = self.trend();
        let mut v = self.verdict(horizon);
        v.decision = d;
        v.notes.push(msg);
        v
    }
}

fn check_horizon(horizon: u64) -> Result<u32> {
    if horizon == 0 || horizon > u32::MAX as u64 {
        return Err(Error::InvalidParameter(format!("horizon {horizon} outside 1..=2^32-1")));
    }
    Ok(horizon as u32)
}

/// Smallest `m >= from` satisfying a predicate that is monotone in `m`;
/// `None` if it fails up to `2^62`.
fn first_level(from: u64, pred: impl Fn(u64) -> bool) -> Option<u64> {
    let from = from.max(1);
    if pred(from) {
        return Some(from);
    }
    let mut lo = from;
    let mut hi = from;
    loop {
        hi = hi.checked_mul(2)?;
        if hi > 1 << 62 {
            return None;
        }
        if pred(hi) {
            break;
        }
        lo = hi;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

#[inline]
fn l_of(m: u64) -> f64 {
    1.0 + m as f64 * LN_2
}

// ---------------------------------------------------------------------------
// Bertrand scale

/// `sum_{m >= 2} 1 / (m^alpha (log m)^beta)`, summed to `horizon` and
/// classified symbolically, with an integral-test tail bound beyond the
/// horizon for convergent cases.
pub fn classify_bertrand(alpha: f64, beta: f64, horizon: u64) -> Result<SeriesVerdict> {
    if !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::InvalidParameter("Bertrand exponents must be finite".into()));
    }
    check_horizon(horizon)?;
    let run = Run::from_terms(horizon, |m| {
        if m < 2 {
            f64::NEG_INFINITY
        } else {
            let x = m as f64;
            -alpha * x.ln() - beta * x.ln().ln()
        }
    });
    let mut v = run.verdict(horizon);
    v.tier = Tier::SymbolicProof;
    let divergent = alpha < 1.0 || (alpha == 1.0 && beta <= 1.0);
    if divergent {
        v.decision = Decision::Divergent;
        v.divergence_witness = Some(bertrand_divergence(alpha, beta));
        return Ok(v);
    }
    v.decision = Decision::Convergent;
    let big_m = horizon.max(2);
    let (from, bound) = if alpha > 1.0 {
        let a1 = alpha - 1.0;
        if beta >= 0.0 {
            let lnm = (big_m as f64).ln();
            (big_m, (big_m as f64).powf(-a1) / a1 * lnm.powf(-beta))
        } else {
            // (log x)^b x^-eps is nonincreasing once log x >= b / eps
            let b = -beta;
            let eps = a1 / 2.0;
            let from = first_level(big_m, |m| (m as f64).ln() >= b / eps);
            match from {
                Some(m) => {
                    let x = m as f64;
                    (m, x.ln().powf(b) * x.powf(-a1) / eps)
                }
                None => {
                    v.notes.push("tail bound threshold beyond 2^62".into());
                    return Ok(v);
                }
            }
        }
    } else {
        let b1 = beta - 1.0;
        (big_m, (big_m as f64).ln().powf(-b1) / b1)
    };
    v.tail_from = Some(from);
    v.tail_bound = Some(bound);
    v.monotone_from = Some(from);
    Ok(v)
}

fn bertrand_divergence(alpha: f64, beta: f64) -> String {
    if alpha < 1.0 {
        format!("terms dominate 1/m eventually since m^{alpha} (log m)^{beta} = o(m)")
    } else {
        "integral test: int dx / (x (log x)^beta) diverges for beta <= 1".to_string()
    }
}

// ---------------------------------------------------------------------------
// sum_m 1 / theta(2^-m)

/// Existence of non-Blaschke separated thin sequences: `sum_m 1/theta(2^-m) = inf`.
pub fn criterion_thin_exists(theta: &ThetaSpec, horizon: u64) -> Result<SeriesVerdict> {
    let h = check_horizon(horizon)?;
    match theta {
        ThetaSpec::Tabulated(t) => {
            let top = t.values().keys().next_back().copied().unwrap_or(0);
            let h = h.min(top);
            if h == 0 {
                return Err(Error::MissingSample(1));
            }
            let eps = theta.dyadic_samples(h)?.eps;
            let run = Run::from_terms(h as u64, |m| eps[m as usize - 1].ln());
            let mut v = run.trend_verdict(h as u64);
            v.notes.push(if t.monotone_nonincreasing_in_t() {
                "tabulated weight: samples monotone, but no analytic tail beyond the table".into()
            } else {
                "tabulated weight without validated monotonicity".into()
            });
            Ok(v)
        }
        _ => {
            let g = match theta.growth() {
                Some(g) if g.coef > 0.0 => g,
                _ => {
                    let value = theta.theta_level(1)?;
                    return Err(Error::NonPositiveTheta { m: 1, value });
                }
            };
            // positivity at every level m >= 1 holds for c > 0 in all symbolic families
            let run = Run::from_terms(horizon, |m| -theta.theta_level(m as u32).unwrap().ln());
            let mut v = run.verdict(horizon);
            v.tier = Tier::SymbolicProof;
            let (alpha, beta) = g.key();
            let convergent = alpha > 1.0 || (alpha == 1.0 && beta > 1.0);
            if !convergent {
                v.decision = Decision::Divergent;
                v.divergence_witness = Some(format!(
                    "1/theta(2^-m) is comparable to 1/(m^{alpha} (log m)^{beta}), a divergent Bertrand series"
                ));
                return Ok(v);
            }
            v.decision = Decision::Convergent;
            if let Some((from, bound)) = thin_tail(g.coef, alpha, beta, horizon) {
                v.tail_from = Some(from);
                v.tail_bound = Some(bound);
                v.monotone_from = Some(from);
            } else {
                v.notes.push("tail bound threshold beyond 2^62".into());
            }
            Ok(v)
        }
    }
}

/// Tail of `sum 1/(c L^alpha l^beta)` with `L = 1 + m log 2`, `l = log(e + L)`,
/// by the integral test in `L`.
fn thin_tail(c: f64, alpha: f64, beta: f64, horizon: u64) -> Option<(u64, f64)> {
    if alpha > 1.0 {
        let a1 = alpha - 1.0;
        if beta >= 0.0 {
            let lm = l_of(horizon);
            Some((horizon, little_l(lm).powf(-beta) * lm.powf(-a1) / (c * a1 * LN_2)))
        } else {
            let b = -beta;
            let eps = a1 / 2.0;
            let from = first_level(horizon, |m| little_l(l_of(m)) >= b / eps)?;
            let lm = l_of(from);
            Some((from, little_l(lm).powf(b) * lm.powf(-a1) / (c * eps * LN_2)))
        }
    } else {
        let lm = l_of(horizon);
        let b1 = beta - 1.0;
        Some((horizon, (1.0 + E / lm) * little_l(lm).powf(-b1) / (c * b1 * LN_2)))
    }
}

// ---------------------------------------------------------------------------
// sum_m 2^m rho(2^-m) = sum_m exp(theta(2^-m))

/// Existence of separated thick sequences: `sum_m 2^m rho(2^-m) = inf`.
pub fn criterion_thick_exists(rho: &RhoSpec, horizon: u64) -> Result<SeriesVerdict> {
    let h = check_horizon(horizon)?;
    if !rho.nondecreasing {
        return Err(Error::Hypothesis("flag 'nondecreasing' not validated for rho".into()));
    }
    if rho.dominated_by_ct.is_none() {
        return Err(Error::Hypothesis("flag 'dominated_by_Ct' not validated for rho".into()));
    }
    let theta = &rho.theta;
    if let ThetaSpec::Tabulated(t) = theta {
        let top = t.values().keys().next_back().copied().unwrap_or(0).min(h);
        if top == 0 {
            return Err(Error::MissingSample(1));
        }
        let mut vals = Vec::with_capacity(top as usize);
        for m in 1..=top {
            vals.push(theta.theta_level(m)?);
        }
        let run = Run::from_terms(top as u64, |m| vals[m as usize - 1]);
        let mut v = run.trend_verdict(top as u64);
        v.notes.push("tabulated weight: no analytic tail beyond the table".into());
        return Ok(v);
    }
    let run = Run::from_terms(horizon, |m| theta.theta_level(m as u32).unwrap());
    let mut v = run.verdict(horizon);
    v.tier = Tier::SymbolicProof;
    let (decision, tail, why) = thick_symbolic(theta, horizon);
    v.decision = decision;
    match decision {
        Decision::Divergent => v.divergence_witness = Some(why),
        Decision::Convergent => {
            if let Some((from, bound)) = tail {
                v.tail_from = Some(from);
                v.tail_bound = Some(bound);
                v.monotone_from = Some(from);
            }
            v.notes.push(why);
        }
        Decision::Undecided => {
            v.tier = Tier::NumericTrend;
            v.notes.push(why);
        }
    }
    Ok(v)
}

fn thick_symbolic(theta: &ThetaSpec, horizon: u64) -> (Decision, Option<(u64, f64)>, String) {
    let div = |s: &str| (Decision::Divergent, None, s.to_string());
    if let ThetaSpec::LogL { c } = *theta {
        // terms L^c
        if c < -1.0 {
            let lm = l_of(horizon);
            let bound = lm.powf(c + 1.0) / ((-c - 1.0) * LN_2);
            return (
                Decision::Convergent,
                Some((horizon, bound)),
                format!("terms L^{c}; integral test in L"),
            );
        }
        return div("terms L^c with c >= -1 dominate a multiple of 1/m");
    }
    let g = match theta.growth() {
        None => return div("terms are identically 1"),
        Some(g) => g,
    };
    if g.coef > 0.0 {
        return div("theta >= 0, so every term is at least 1");
    }
    let c = -g.coef;
    let (alpha, beta) = g.key();
    if cmp_key((alpha, beta), (0.0, 0.0)) != Ordering::Greater {
        return div("theta is bounded, so the terms are bounded below by a positive constant");
    }
    if alpha > 0.0 {
        // exp(-c L^alpha l^beta) <= L^-2 once c L^alpha l^beta >= 2 log L; the
        // gap is nondecreasing in L once log L >= (1 + max(-beta, 0)) / alpha
        let pred = |m: u64| {
            let l = l_of(m);
            let h = c.ln() + alpha * l.ln() + beta * little_l(l).ln() - LN_2 - l.ln().ln();
            l.ln() >= (1.0 + (-beta).max(0.0)) / alpha && h >= 0.0
        };
        return match first_level(horizon, pred) {
            Some(from) => (
                Decision::Convergent,
                Some((from, 1.0 / (LN_2 * l_of(from)))),
                format!("terms <= L^-2 beyond m = {from}"),
            ),
            None => (
                Decision::Convergent,
                None,
                "terms decay faster than any power of L; majorant threshold beyond 2^62".into(),
            ),
        };
    }
    // alpha == 0, beta > 0: terms = (e + L)^(-c l^(beta - 1))
    if beta > 1.0 {
        let from = first_level(horizon, |m| c * little_l(l_of(m)).powf(beta - 1.0) > 1.0);
        return match from {
            Some(from) => {
                let l = l_of(from);
                let p = c * little_l(l).powf(beta - 1.0);
                (
                    Decision::Convergent,
                    Some((from, (E + l).powf(1.0 - p) / ((p - 1.0) * LN_2))),
                    format!("terms <= (e + L)^-{p} beyond m = {from}"),
                )
            }
            None => (
                Decision::Convergent,
                None,
                "exponent exceeds 1 only beyond 2^62".into(),
            ),
        };
    }
    if beta == 1.0 {
        if c > 1.0 {
            let l = l_of(horizon);
            return (
                Decision::Convergent,
                Some((horizon, (E + l).powf(1.0 - c) / ((c - 1.0) * LN_2))),
                format!("terms = (e + L)^-{c}"),
            );
        }
        return div("terms = (e + L)^-c with c <= 1");
    }
    div("terms (e + L)^-p with p -> 0 dominate 1/(e + L)")
}

// ---------------------------------------------------------------------------
// sum_m N_m rho(2^-m) exp(-gamma g_m)

/// Scale in the exponent of the exponential sum.
#[derive(Debug, Clone, PartialEq)]
pub enum GapScale {
    /// `g_m = 2^m / N_m`.
    DyadicGap,
    /// `g_m = 1 / (N_m dbar_m)`, levels with `N_m < 6` skipped.
    MeanSpacing(BTreeMap<u32, f64>),
}

/// Where the annulus counts come from.
#[derive(Debug, Clone, Copy)]
pub enum CountSource<'a> {
    /// A finite profile; levels absent from the map are empty.
    Finite(&'a BTreeMap<u32, Count>),
    /// `N_m = max(1, ceil(p_m 2^m / (theta(2^-m) + log m)))` for every `m >= 1`.
    Example {
        theta: &'a ThetaSpec,
        growth: GrowthFactor,
    },
}

impl CountSource<'_> {
    fn count(&self, m: u32) -> Result<Count> {
        match self {
            CountSource::Finite(map) => Ok(map.get(&m).copied().unwrap_or(Count::exact(0))),
            CountSource::Example { theta, growth } => example_count(theta, *growth, m),
        }
    }
}

/// Exponential-sum criterion evaluated on a grid of `gamma` values.
///
/// `exclude` removes levels (an exceptional set) from a second, reported sum;
/// the decision refers to the full sum.
pub fn criterion_exponential_sum(
    counts: CountSource<'_>,
    rho: &RhoSpec,
    gammas: &[f64],
    scale: &GapScale,
    exclude: &BTreeSet<u32>,
    horizon: u64,
) -> Result<SeriesVerdict> {
    let h = check_horizon(horizon)?;
    if gammas.is_empty() {
        return Err(Error::InvalidParameter("empty gamma grid".into()));
    }
    if let Some(g) = gammas.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
        return Err(Error::InvalidParameter(format!("gamma = {g} must be positive")));
    }
    let (levels_top, finite) = match counts {
        CountSource::Finite(map) => (map.keys().next_back().copied().unwrap_or(0).min(h), true),
        CountSource::Example { .. } => (h, false),
    };

    // per level: (log N + log rho, log g), or None for skipped levels
    let mut base: Vec<Option<(f64, f64)>> = Vec::with_capacity(levels_top as usize);
    let mut skipped_small = Vec::new();
    for m in 1..=levels_top {
        let n = counts.count(m)?;
        if n.is_zero() {
            base.push(None);
            continue;
        }
        let ln_n = n.ln();
        let ln_g = match scale {
            GapScale::DyadicGap => m as f64 * LN_2 - ln_n,
            GapScale::MeanSpacing(dbar) => {
                if !n.at_least(6) {
                    skipped_small.push(m);
                    base.push(None);
                    continue;
                }
                let d = dbar.get(&m).copied().ok_or_else(|| {
                    Error::Hypothesis(format!(
                        "mean spacing missing at level {m} although N_m >= 6"
                    ))
                })?;
                if !(d > 0.0) {
                    return Err(Error::Hypothesis(format!("mean spacing at level {m} is {d}")));
                }
                -ln_n - d.ln()
            }
        };
        base.push(Some((ln_n + rho.ln_level(m)?, ln_g)));
    }

    let mut grid = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let mut full = Run::new();
        let mut comp = LogAccum::new();
        for (i, b) in base.iter().enumerate() {
            let m = i as u64 + 1;
            let t = match b {
                Some((a, ln_g)) => a - gamma * ln_g.exp(),
                None => f64::NEG_INFINITY,
            };
            full.push(m, t, levels_top as u64);
            if !exclude.contains(&(m as u32)) {
                comp.add_ln(t);
            }
        }
        let mut gv = GammaVerdict {
            gamma,
            decision: Decision::Undecided,
            tier: Tier::NumericTrend,
            partial_sum: full.sum.value(),
            ln_partial_sum: full.sum.ln,
            partial_sum_complement: comp.value(),
            tail_bound: None,
            tail_from: None,
            trajectory: full.trajectory.clone(),
            notes: Vec::new(),
        };
        if finite {
            gv.decision = Decision::Convergent;
            gv.tier = Tier::SymbolicProof;
            gv.tail_bound = Some(0.0);
            gv.tail_from = Some(levels_top as u64);
            gv.notes.push("finite profile: no terms beyond the last level".into());
        } else if let Some(sym) = example_symbolic(counts, rho, gamma, scale, horizon) {
            gv.decision = sym.0;
            gv.tier = sym.1;
            gv.tail_from = sym.2.map(|t| t.0);
            gv.tail_bound = sym.2.map(|t| t.1);
            gv.notes.push(sym.3);
        } else {
            let (d, msg) = full.trend();
            gv.decision = d;
            gv.notes.push(msg);
        }
        grid.push(gv);
    }

    // "= inf for every gamma" versus "< inf for some gamma"
    let all_div = grid.iter().all(|g| g.decision == Decision::Divergent);
    let conv = grid
        .iter()
        .filter(|g| g.decision == Decision::Convergent)
        .min_by_key(|g| g.tier);
    let first = &grid[0];
    let (decision, tier) = if all_div {
        (Decision::Divergent, grid.iter().map(|g| g.tier).max().unwrap())
    } else if let Some(c) = conv {
        (Decision::Convergent, c.tier)
    } else {
        (Decision::Undecided, Tier::NumericTrend)
    };
    let chosen = conv.unwrap_or(first);
    let mut notes = Vec::new();
    if !skipped_small.is_empty() {
        notes.push(format!(
            "{} levels with N_m < 6 skipped under the mean-spacing scale",
            skipped_small.len()
        ));
    }
    if all_div && !finite {
        notes.push("divergence established on the supplied gamma grid only".into());
    }
    Ok(SeriesVerdict {
        decision,
        tier,
        horizon: levels_top as u64,
        partial_sum: chosen.partial_sum,
        ln_partial_sum: chosen.ln_partial_sum,
        tail_bound: conv.and_then(|c| c.tail_bound),
        tail_from: conv.and_then(|c| c.tail_from),
        monotone_from: conv.and_then(|c| if c.tier == Tier::MonotoneTailBound { c.tail_from } else { None }),
        divergence_witness: all_div.then(|| "every gamma on the grid diverges".to_string()),
        trajectory: chosen.trajectory.clone(),
        gamma_grid: grid,
        notes,
    })
}

type SymbolicOutcome = (Decision, Tier, Option<(u64, f64)>, String);

/// Closed-form analysis for the formula profiles with the dyadic-gap scale.
fn example_symbolic(
    counts: CountSource<'_>,
    rho: &RhoSpec,
    gamma: f64,
    scale: &GapScale,
    horizon: u64,
) -> Option<SymbolicOutcome> {
    let CountSource::Example { theta, growth } = counts else {
        return None;
    };
    if *scale != GapScale::DyadicGap || rho.theta != *theta || !theta.is_symbolic() {
        return None;
    }
    let nonneg = theta.growth().is_none_or(|g| g.coef > 0.0);
    if !nonneg {
        return None;
    }
    match growth {
        GrowthFactor::LogM => {
            // with X = theta + log m: term >= exp(log log m - log X + theta (1 - gamma / log m) - gamma)
            // and for log m >= max(2 gamma, 2), theta / 2 >= log(1 + theta / log m)
            let from = (2.0 * gamma).max(2.0).exp().ceil();
            Some((
                Decision::Divergent,
                Tier::SymbolicProof,
                None,
                format!("terms >= exp(-gamma) for all m >= {from:e}"),
            ))
        }
        GrowthFactor::Constant(p) => {
            if gamma <= p || !theta.is_nonincreasing_in_t() {
                return None;
            }
            // q in (1, gamma/p); 1 + eta = gamma / (p q)
            let q = (1.0 + gamma / p) / 2.0;
            let eta = gamma / (p * q) - 1.0;
            let x = |m: u64| theta.eval_at_l(l_of(m)).unwrap() + (m as f64).ln();
            let ok = |m: u64| {
                let xm = x(m);
                let xn = x(m + 1);
                m >= 2 && xm > 0.0 && (xm.ln() - m as f64 * LN_2) <= (eta * p).ln() && xn <= 2.0 * xm
            };
            let from = first_level(horizon, ok)?;
            // monotone certificate: X_m 2^-m nonincreasing from `from` on,
            // checked through the horizon
            let upto = horizon.max(from);
            let certified = (from..upto).all(|m| x(m + 1) <= 2.0 * x(m) && x(m + 1) >= x(m));
            if !certified {
                return None;
            }
            let xm = x(from);
            let bound = (1.0 + eta) * (p / xm) * (from as f64).powf(1.0 - q) / (q - 1.0);
            Some((
                Decision::Convergent,
                Tier::MonotoneTailBound,
                Some((from, bound)),
                format!("terms <= (1 + eta)(p / X_M) m^-q with q = {q}, eta = {eta}"),
            ))
        }
    }
}

// ---------------------------------------------------------------------------
// generic partial sums

/// Tail majorant valid for indices beyond `from`.
pub struct MonotoneCertificate<'a> {
    pub from: u64,
    /// `tail(M) >= sum_{m > M} term_m` for `M >= from`.
    pub tail: &'a dyn Fn(u64) -> f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialSumReport {
    pub total: f64,
    pub last_index: Option<u64>,
    pub checkpoints: Vec<(u64, f64)>,
    /// First index at which the partial sum reaches each target.
    pub targets: Vec<(f64, Option<u64>)>,
    pub tail_bound: Option<f64>,
}

/// Compensated partial sums of `(index, term)` pairs in increasing index order.
pub fn partial_sums<I>(
    terms: I,
    checkpoints: &[u64],
    targets: &[f64],
    cert: Option<MonotoneCertificate<'_>>,
) -> PartialSumReport
where
    I: IntoIterator<Item = (u64, f64)>,
{
    let mut sum = NeumaierSum::new();
    let mut cps = Vec::new();
    let mut hits: Vec<(f64, Option<u64>)> = targets.iter().map(|&t| (t, None)).collect();
    let mut last = None;
    let mut cp_iter = checkpoints.iter().copied().peekable();
    for (i, t) in terms {
        sum.add(t);
        last = Some(i);
        let s = sum.value();
        while let Some(&c) = cp_iter.peek() {
            if c < i {
                cp_iter.next();
            } else {
                break;
            }
        }
        if cp_iter.peek() == Some(&i) {
            cps.push((i, s));
            cp_iter.next();
        }
        for h in hits.iter_mut() {
            if h.1.is_none() && s >= h.0 {
                h.1 = Some(i);
            }
        }
    }
    let tail_bound = match (cert, last) {
        (Some(c), Some(l)) if l >= c.from => Some((c.tail)(l)),
        _ => None,
    };
    PartialSumReport {
        total: sum.value(),
        last_index: last,
        checkpoints: cps,
        targets: hits,
        tail_bound,
    }
}
