//! Constructions: index sets with counts, block subsets and circle sequences.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{LN_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::count::{Count, Dyadic};
use crate::geometry::{pow2_neg, DiskPoint, PointSequence};
use crate::series::{criterion_thick_exists, criterion_thin_exists, Decision};
use crate::sum::NeumaierSum;
use crate::weights::{compare, theta_bounded_above, RhoSpec, ThetaSpec, TriState};
use crate::{Error, Result};

/// Record of how an artifact was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub construction: String,
    pub parameters: BTreeMap<String, String>,
    pub notes: Vec<String>,
}

impl Provenance {
    fn new(construction: &str) -> Self {
        Provenance {
            construction: construction.to_string(),
            parameters: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn param(mut self, k: &str, v: impl ToString) -> Self {
        self.parameters.insert(k.to_string(), v.to_string());
        self
    }
}

// ---------------------------------------------------------------------------
// index set and counts

/// Index set `L` with counts `N_m`, `2^(m-1) eps_m < N_m <= 2^m eps_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSetWithCounts {
    /// `L`, increasing.
    pub levels: Vec<u32>,
    pub counts: BTreeMap<u32, Dyadic>,
    /// `eps_m` used, for every `m` in `L1`.
    pub eps: BTreeMap<u32, f64>,
    /// Blocks `[m_n + 1, M_n]` whose union is `L1`.
    pub blocks: Vec<(u32, u32)>,
    /// Members of `L1` removed by pruning.
    pub pruned: Vec<u32>,
    /// `(M, sum_{m in L, m <= M} eps_m)` at the end of each block.
    pub eps_sums: Vec<(u32, f64)>,
    /// `(M, sum_{m in L, m <= M} eps_m^2)` at the end of each block.
    pub eps2_sums: Vec<(u32, f64)>,
    pub provenance: Provenance,
}

impl IndexSetWithCounts {
    pub fn l1(&self) -> Vec<u32> {
        self.blocks.iter().flat_map(|&(a, b)| a..=b).collect()
    }

    pub fn count_map(&self) -> BTreeMap<u32, Count> {
        self.counts.iter().map(|(&m, &d)| (m, Count::from_dyadic(d))).collect()
    }
}

/// `2^k x` for `x > 0`, compared exactly.
fn scaled_gt(eps_j: f64, j: u32, eps_m: f64, m: u32) -> bool {
    // 2^j eps_j > 2^m eps_m, j > m
    let k = j - m;
    if k > 1000 {
        return true;
    }
    eps_j * 2f64.powi(k as i32) > eps_m
}

/// Index set and counts for the second weight of a class comparison.
///
/// A bounded `theta2` is replaced by `max(theta2, log(m + 2))` at level `m`,
/// which only shrinks the thin class and keeps `sum 1/theta2` divergent.
pub fn build_index_set_and_counts(theta2: &ThetaSpec, m_max: u32) -> Result<IndexSetWithCounts> {
    if m_max < 2 {
        return Err(Error::InvalidParameter("m_max must be at least 2".into()));
    }
    if !theta2.is_nonincreasing_in_t() {
        return Err(Error::Hypothesis("theta2 is not nonincreasing in t".into()));
    }
    let eps_raw = theta2.dyadic_samples(m_max)?;
    let thin = criterion_thin_exists(theta2, m_max as u64)?;
    if thin.decision == Decision::Convergent {
        return Err(Error::Hypothesis(
            "sum of 1/theta2 converges: no separated non-Blaschke thin sequence exists".into(),
        ));
    }
    let mut prov = Provenance::new("index-set").param("theta2", theta2).param("m_max", m_max);
    let regularize = theta2.is_symbolic() && theta_bounded_above(theta2);
    let eps: Vec<f64> = (1..=m_max)
        .map(|m| {
            let e = eps_raw.eps[m as usize - 1];
            if regularize {
                e.min(1.0 / ((m + 2) as f64).ln())
            } else {
                e
            }
        })
        .collect();
    if regularize {
        prov.notes
            .push("bounded theta2 replaced by max(theta2, log(m + 2)) so that it increases to infinity".into());
    }
    let e = |m: u32| eps[m as usize - 1];

    let start = (1..=m_max)
        .find(|&m| e(m) * 2f64.powi(m.min(1000) as i32) >= 2.0)
        .ok_or_else(|| Error::HorizonExhausted("2^m eps_m < 2 for every m <= m_max".into()))?;
    prov = prov.param("start", start);

    // greedy sliding windows with 1/(2n) < sum < 1/n
    let mut blocks = Vec::new();
    let mut a = start;
    let mut n = 1u32;
    let mut advanced = 0u32;
    'outer: loop {
        // window [a, b] with sum s; extend while s <= 1/(2n), shrink while s >= 1/n
        let (lo, hi) = (0.5 / n as f64, 1.0 / n as f64);
        let mut b = a - 1;
        let mut s = NeumaierSum::new();
        loop {
            let v = s.value();
            if b >= a && v > lo && v < hi {
                break;
            }
            if v >= hi {
                a += 1;
                advanced += 1;
                s = (a..=b).map(e).collect();
            } else {
                b += 1;
                if b > m_max {
                    break 'outer;
                }
                s.add(e(b));
            }
        }
        blocks.push((a, b));
        a = b + 1;
        n += 1;
    }
    if blocks.is_empty() {
        return Err(Error::HorizonExhausted(format!(
            "no block with 1/2 < sum eps < 1 fits below m_max = {m_max}"
        )));
    }
    if advanced > 0 {
        prov.notes.push(format!("block starts advanced {advanced} times to avoid overshooting 1/n"));
    }

    // pruning: keep j iff 2^j eps_j exceeds 2^m eps_m for every earlier m in L1
    let l1: Vec<u32> = blocks.iter().flat_map(|&(a, b)| a..=b).collect();
    let mut levels = Vec::new();
    let mut pruned = Vec::new();
    let mut best: Option<u32> = None;
    for &j in &l1 {
        let keep = match best {
            None => true,
            Some(m) => scaled_gt(e(j), j, e(m), m),
        };
        if keep {
            levels.push(j);
            best = Some(j);
        } else {
            pruned.push(j);
        }
    }

    // counts: N_{m1} = [2^m1 eps], N_k = min(2^(k-m) N_m, [2^k eps_k])
    let mut counts = BTreeMap::new();
    let mut prev: Option<(u32, Dyadic)> = None;
    for &k in &levels {
        let cap = Dyadic::from_f64(e(k)).expect("finite eps").shl(k as i64).floor();
        let nk = match prev {
            None => cap,
            Some((m, nm)) => nm.shl((k - m) as i64).min(cap),
        };
        if nk < Dyadic::from_u64(1) {
            return Err(Error::Hypothesis(format!("count at level {k} would be zero")));
        }
        counts.insert(k, nk);
        prev = Some((k, nk));
    }

    let kept: BTreeSet<u32> = levels.iter().copied().collect();
    let mut s1 = NeumaierSum::new();
    let mut s2 = NeumaierSum::new();
    let mut eps_sums = Vec::new();
    let mut eps2_sums = Vec::new();
    for &(a, b) in &blocks {
        for m in a..=b {
            if kept.contains(&m) {
                s1.add(e(m));
                s2.add(e(m) * e(m));
            }
        }
        eps_sums.push((b, s1.value()));
        eps2_sums.push((b, s2.value()));
    }
    let eps_map = l1.iter().map(|&m| (m, e(m))).collect();
    Ok(IndexSetWithCounts {
        levels,
        counts,
        eps: eps_map,
        blocks,
        pruned,
        eps_sums,
        eps2_sums,
        provenance: prov,
    })
}

// ---------------------------------------------------------------------------
// block subset

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub j: u32,
    pub start: u32,
    pub end: u32,
    /// `sum_{n in block} 2^n rho1(2^-n)`.
    pub rho1_sum: f64,
    pub rho2_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSubset {
    pub blocks: Vec<Block>,
    /// Domination constant of `rho1`.
    pub c_declared: f64,
    /// `max 2^n rho1(2^-n)` over the blocks.
    pub c_measured: f64,
    pub rho1_total: f64,
    pub rho2_total: f64,
    /// `sum_j 2^-j (1 + C)` over the completed blocks.
    pub rho2_bound: f64,
    pub provenance: Provenance,
}

impl BlockSubset {
    pub fn set(&self) -> BTreeSet<u32> {
        self.blocks.iter().flat_map(|b| b.start..=b.end).collect()
    }
}

/// Subset `A` of levels on which `sum 2^n rho1(2^-n)` diverges while
/// `sum 2^n rho2(2^-n)` converges, by blocks with `rho2 <= 2^-j rho1` on
/// block `j` and `rho1`-mass at least 1 per block.
pub fn split_series_subset(rho1: &RhoSpec, rho2: &RhoSpec, j_max: u32, n_max: u32) -> Result<BlockSubset> {
    if j_max == 0 {
        return Err(Error::InvalidParameter("j_max must be positive".into()));
    }
    let c = rho1
        .dominated_by_ct
        .ok_or_else(|| Error::Hypothesis("rho1 is not dominated by C t".into()))?;
    let thick = criterion_thick_exists(rho1, n_max.max(1) as u64)?;
    if thick.decision != Decision::Divergent {
        return Err(Error::Hypothesis(format!(
            "sum 2^n rho1(2^-n) is not divergent ({:?})",
            thick.decision
        )));
    }
    let cmp = compare(&rho1.theta, &rho2.theta, n_max.max(1));
    if cmp.rho_ratio_to_infinity == TriState::Refuted {
        return Err(Error::Hypothesis("rho1/rho2 does not tend to infinity".into()));
    }
    let th1 = |n: u32| rho1.theta.theta_level(n);
    let th2 = |n: u32| rho2.theta.theta_level(n);
    let cond = |n: u32, j: u32| -> Result<bool> { Ok(th2(n)? - th1(n)? <= -(j as f64) * LN_2) };

    let mut blocks = Vec::new();
    let mut n = 1u32;
    let mut c_measured = 0f64;
    let mut r1 = NeumaierSum::new();
    let mut r2 = NeumaierSum::new();
    for j in 1..=j_max {
        // n_j: first n satisfying condition (1) for j
        while !cond(n, j)? {
            n += 1;
            if n > n_max {
                return Err(Error::HorizonExhausted(format!(
                    "block {j} cannot start below n_max = {n_max}; {} blocks completed",
                    blocks.len()
                )));
            }
        }
        let start = n;
        let mut s1 = NeumaierSum::new();
        let mut s2 = NeumaierSum::new();
        loop {
            if n > n_max {
                return Err(Error::HorizonExhausted(format!(
                    "block {j} incomplete at n_max = {n_max}; {} blocks completed",
                    blocks.len()
                )));
            }
            if !cond(n, j)? {
                return Err(Error::Certification(format!(
                    "condition rho2 <= 2^-{j} rho1 fails inside block {j} at n = {n}"
                )));
            }
            let t1 = th1(n)?.exp();
            c_measured = c_measured.max(t1);
            s1.add(t1);
            s2.add(th2(n)?.exp());
            if s1.value() >= 1.0 {
                break;
            }
            n += 1;
        }
        r1.add(s1.value());
        r2.add(s2.value());
        blocks.push(Block {
            j,
            start,
            end: n,
            rho1_sum: s1.value(),
            rho2_sum: s2.value(),
        });
        n += 1;
    }
    let rho2_bound = (1..=j_max).map(|j| 2f64.powi(-(j as i32)) * (1.0 + c)).sum();
    Ok(BlockSubset {
        blocks,
        c_declared: c,
        c_measured,
        rho1_total: r1.value(),
        rho2_total: r2.value(),
        rho2_bound,
        provenance: Provenance::new("block-subset")
            .param("rho1", &rho1.theta)
            .param("rho2", &rho2.theta)
            .param("j_max", j_max)
            .param("n_max", n_max),
    })
}

// ---------------------------------------------------------------------------
// circle sequences

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleSequence {
    pub sequence: PointSequence,
    /// Counts for every requested level, including unmaterialized ones.
    pub counts: BTreeMap<u32, Count>,
    pub materialized_up_to: u32,
}

fn check_budget(requested: u128, budget: usize) -> Result<()> {
    if requested > budget as u128 {
        return Err(Error::Budget { requested, budget });
    }
    Ok(())
}

/// `z_{m,j} = (1 - 2^-m) exp(2 pi i j 2^-m)`, `0 <= j < 2^m`, for `m` in `levels`.
pub fn full_circle_sequence(levels: &BTreeSet<u32>, m_materialize: u32, budget: usize) -> Result<CircleSequence> {
    if let Some(&m) = levels.iter().find(|&&m| m > 1000 && m <= m_materialize) {
        return Err(Error::Domain(format!("level {m} below float range")));
    }
    let requested: u128 = levels
        .iter()
        .filter(|&&m| m <= m_materialize)
        .map(|&m| 1u128 << m.min(127))
        .sum();
    check_budget(requested, budget)?;
    let mut points = Vec::with_capacity(requested as usize);
    for &m in levels.iter().filter(|&&m| m <= m_materialize) {
        for j in 0..(1u64 << m) {
            points.push(DiskPoint::full_circle(m, j)?);
        }
    }
    Ok(CircleSequence {
        sequence: PointSequence::new(points),
        counts: levels.iter().map(|&m| (m, Count::pow2(m))).collect(),
        materialized_up_to: m_materialize,
    })
}

/// One level of a spaced-circle sequence: `count` points on `|z| = 1 - 2^-m`
/// with chordal spacing at least `spacing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacedLevel {
    pub m: u32,
    pub count: u64,
    pub spacing: f64,
}

/// Equally spaced points on the circles `|z| = 1 - 2^-m`.
///
/// With `mean_spacing_mode` the spacing must also satisfy `2^-m <= d <= 1`.
pub fn spaced_circle_sequence(levels: &[SpacedLevel], mean_spacing_mode: bool, budget: usize) -> Result<PointSequence> {
    let mut seen = BTreeSet::new();
    let requested: u128 = levels.iter().map(|l| l.count as u128).sum();
    check_budget(requested, budget)?;
    let mut points = Vec::with_capacity(requested as usize);
    for l in levels {
        let m = l.m;
        if !seen.insert(m) {
            return Err(Error::Infeasible {
                m,
                reason: "level listed twice".into(),
            });
        }
        if m > 1000 {
            return Err(Error::Domain(format!("level {m} below float range")));
        }
        if !(l.spacing > 0.0) {
            return Err(Error::Infeasible {
                m,
                reason: format!("spacing {} must be positive", l.spacing),
            });
        }
        let delta = pow2_neg(m);
        let r = 1.0 - delta;
        if mean_spacing_mode && !(l.spacing >= delta && l.spacing <= 1.0) {
            return Err(Error::Infeasible {
                m,
                reason: format!("spacing {} outside [2^-{m}, 1]", l.spacing),
            });
        }
        if l.count as f64 * l.spacing > TAU * r {
            return Err(Error::Infeasible {
                m,
                reason: format!(
                    "{} points at spacing {} exceed the circumference {}",
                    l.count,
                    l.spacing,
                    TAU * r
                ),
            });
        }
        if l.count >= 2 {
            let chord = 2.0 * r * (PI / l.count as f64).sin();
            if chord < l.spacing {
                return Err(Error::Infeasible {
                    m,
                    reason: format!("chord {chord} below the requested spacing {}", l.spacing),
                });
            }
        }
        for k in 0..l.count {
            points.push(DiskPoint::new(delta, TAU * (k as f64 / l.count as f64))?);
        }
    }
    Ok(PointSequence::new(points))
}

/// Full circles at sparse levels `m_j` with `rho(2^-m_j) 2^m_j <= 2^-j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallRhoCounterexample {
    pub levels: Vec<u32>,
    /// `rho(t_j) / t_j`.
    pub ratios: Vec<f64>,
    pub ratio_sum: f64,
    /// `sum_j 2^-j` over the selected levels.
    pub ratio_bound: f64,
    /// `sum_j N_{m_j} 2^-m_j`, one per level.
    pub blaschke_sum: f64,
    pub circles: CircleSequence,
}

pub fn small_rho_counterexample(
    rho: &RhoSpec,
    j_max: u32,
    horizon: u32,
    m_materialize: u32,
    budget: usize,
) -> Result<SmallRhoCounterexample> {
    if j_max == 0 {
        return Err(Error::InvalidParameter("j_max must be positive".into()));
    }
    let mut levels = Vec::new();
    let mut ratios = Vec::new();
    let mut m = 1u32;
    for j in 1..=j_max {
        loop {
            if m > horizon {
                return Err(Error::Certification(format!(
                    "no level below {horizon} with rho(t)/t <= 2^-{j}; {} levels found",
                    levels.len()
                )));
            }
            let th = rho.theta.theta_level(m)?;
            if th <= -(j as f64) * LN_2 {
                levels.push(m);
                ratios.push(th.exp());
                break;
            }
            m += 1;
        }
        m += 2;
    }
    let set: BTreeSet<u32> = levels.iter().copied().collect();
    let circles = full_circle_sequence(&set, m_materialize, budget)?;
    Ok(SmallRhoCounterexample {
        ratio_sum: ratios.iter().copied().collect::<NeumaierSum>().value(),
        ratio_bound: (1..=j_max).map(|j| 2f64.powi(-(j as i32))).sum(),
        blaschke_sum: levels.len() as f64,
        levels,
        ratios,
        circles,
    })
}

// ---------------------------------------------------------------------------
// formula profiles

/// Numerator factor `p_m` of the formula profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "p", rename_all = "snake_case")]
pub enum GrowthFactor {
    Constant(f64),
    /// `p_m = log m`.
    LogM,
}

/// `N_m = max(1, ceil(p_m 2^m / (theta(2^-m) + log m)))`; counts past `2^53`
/// are kept as logarithms.
pub fn example_count(theta: &ThetaSpec, growth: GrowthFactor, m: u32) -> Result<Count> {
    if m == 0 {
        return Err(Error::Domain("formula profiles start at level 1".into()));
    }
    let th = theta.theta_level(m)?;
    if th <= 0.0 {
        return Err(Error::NonPositiveTheta { m, value: th });
    }
    let x = th + (m as f64).ln();
    let p = match growth {
        GrowthFactor::Constant(p) => p,
        GrowthFactor::LogM => (m as f64).ln(),
    };
    if !(p >= 0.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("growth factor {p} at level {m}")));
    }
    if p == 0.0 {
        return Ok(Count::exact(1));
    }
    let ln_v = p.ln() + m as f64 * LN_2 - x.ln();
    if ln_v < 53.0 * LN_2 {
        let v = (p * 2f64.powi(m as i32) / x).ceil().max(1.0);
        Ok(Count::exact(v as u64))
    } else {
        Ok(Count::Approx { ln: ln_v })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleProfile {
    pub counts: BTreeMap<u32, Count>,
    pub growth: GrowthFactor,
    pub rounding: String,
}

pub fn example_profile(
    theta: &ThetaSpec,
    growth: GrowthFactor,
    range: std::ops::RangeInclusive<u32>,
) -> Result<ExampleProfile> {
    let mut counts = BTreeMap::new();
    for m in range {
        counts.insert(m, example_count(theta, growth, m)?);
    }
    Ok(ExampleProfile {
        counts,
        growth,
        rounding: "ceiling with lower guard max(1, .)".into(),
    })
}
