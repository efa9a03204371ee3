//! Verdicts: weight regimes, class comparison, and per-sequence evidence.
//!
//! Nothing here returns a bare boolean. A thin verdict carries a witness that
//! can be replayed through [`summatory`]; a thick verdict names the criterion
//! that fired together with its series verdict and the sampled exceptional sets.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::constructions::{
    build_index_set_and_counts, full_circle_sequence, spaced_circle_sequence, split_series_subset, BlockSubset,
    CircleSequence, GrowthFactor, IndexSetWithCounts, SpacedLevel,
};
use crate::count::Count;
use crate::geometry::{build_profile, pow2_neg, DiskPoint, PointSequence};
use crate::series::{
    criterion_exponential_sum, criterion_thick_exists, criterion_thin_exists, CountSource, Decision, GapScale,
    SeriesVerdict, Tier,
};
use crate::sum::NeumaierSum;
use crate::weights::{compare, theta_bounded_below, ComparisonReport, RhoSpec, ThetaSpec, TriState};
use crate::witnesses::{exceptional_indices, summatory_theta, ExceptionalScale, HInftyFunction, SummatoryReport};
use crate::{Error, Result};

fn horizon_u32(h: u64) -> u32 {
    h.min(u32::MAX as u64) as u32
}

fn certified(v: &SeriesVerdict, d: Decision) -> bool {
    v.decision == d && v.tier.is_certified()
}

// ---------------------------------------------------------------------------
// regimes

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// No non-Blaschke thin sequences: the thin-existence series converges.
    AllThickSide,
    /// No thick sequences: the thick-existence series converges.
    AllThinSide,
    /// Both series diverge.
    Mixed,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeVerdict {
    pub regime: Regime,
    pub thin: Option<SeriesVerdict>,
    pub thick: Option<SeriesVerdict>,
    pub notes: Vec<String>,
}

/// Run both existence criteria; each one that cannot run is skipped with a note.
pub fn weight_regime(theta: &ThetaSpec, rho: &RhoSpec, horizon: u64) -> RegimeVerdict {
    let mut notes = Vec::new();
    let thin = match criterion_thin_exists(theta, horizon) {
        Ok(v) => Some(v),
        Err(e) => {
            notes.push(format!("thin-existence criterion skipped: {e}"));
            None
        }
    };
    let thick = match criterion_thick_exists(rho, horizon) {
        Ok(v) => Some(v),
        Err(e) => {
            notes.push(format!("thick-existence criterion skipped: {e}"));
            None
        }
    };
    let thin_conv = thin.as_ref().is_some_and(|v| certified(v, Decision::Convergent));
    let thick_conv = thick.as_ref().is_some_and(|v| certified(v, Decision::Convergent));
    let regime = match (thin_conv, thick_conv) {
        (true, true) => {
            notes.push("both existence series converge; inconsistent inputs".into());
            Regime::Undecided
        }
        (true, false) => Regime::AllThickSide,
        (false, true) => Regime::AllThinSide,
        (false, false) => {
            let div = |v: &Option<SeriesVerdict>| v.as_ref().is_some_and(|v| certified(v, Decision::Divergent));
            if div(&thin) && div(&thick) {
                Regime::Mixed
            } else {
                for (name, v) in [("thin", &thin), ("thick", &thick)] {
                    if let Some(v) = v {
                        if !v.tier.is_certified() {
                            notes.push(format!("{name}-existence verdict {:?} is only a numeric trend", v.decision));
                        }
                    }
                }
                Regime::Undecided
            }
        }
    };
    RegimeVerdict {
        regime,
        thin,
        thick,
        notes,
    }
}

// ---------------------------------------------------------------------------
// class comparison

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassOutcome {
    SameClass,
    DifferentClass,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    /// Index set with counts for the smaller weight, realized by spaced circles.
    IndexSetSpacedCircles,
    /// Block subset of the dyadic levels, realized by full circles.
    SplitSubsetFullCircles,
}

/// How to build a sequence in one class and not the other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessPlan {
    pub kind: PlanKind,
    /// The larger weight (smaller class).
    pub larger: ThetaSpec,
    /// The smaller weight (larger class).
    pub smaller: ThetaSpec,
    /// Operands were swapped relative to the call.
    pub swapped: bool,
    pub steps: Vec<String>,
    pub gate: SeriesVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanArtifacts {
    IndexSet {
        index_set: IndexSetWithCounts,
        sequence: PointSequence,
    },
    Blocks {
        subset: BlockSubset,
        circles: CircleSequence,
    },
}

impl WitnessPlan {
    /// Run the construction up to `m_max`, materializing levels `<= m_materialize`.
    pub fn execute(&self, m_max: u32, m_materialize: u32, budget: usize) -> Result<PlanArtifacts> {
        match self.kind {
            PlanKind::IndexSetSpacedCircles => {
                let index_set = build_index_set_and_counts(&self.smaller, m_max)?;
                let mut levels = Vec::new();
                for (&m, n) in index_set.counts.range(..=m_materialize) {
                    let count = n.to_u64().ok_or_else(|| Error::Infeasible {
                        m,
                        reason: "count does not fit in 64 bits".into(),
                    })?;
                    levels.push(SpacedLevel {
                        m,
                        count,
                        spacing: pow2_neg(m),
                    });
                }
                let sequence = spaced_circle_sequence(&levels, true, budget)?;
                Ok(PlanArtifacts::IndexSet { index_set, sequence })
            }
            PlanKind::SplitSubsetFullCircles => {
                let h = m_max.max(1);
                let r1 = RhoSpec::infer(self.larger.clone(), h);
                let r2 = RhoSpec::infer(self.smaller.clone(), h);
                // as many complete blocks as fit below m_max
                let mut subset = split_series_subset(&r1, &r2, 1, m_max)?;
                for j_max in 2..=64 {
                    match split_series_subset(&r1, &r2, j_max, m_max) {
                        Ok(s) => subset = s,
                        Err(Error::HorizonExhausted(_)) => break,
                        Err(e) => return Err(e),
                    }
                }
                let circles = full_circle_sequence(&subset.set(), m_materialize, budget)?;
                Ok(PlanArtifacts::Blocks { subset, circles })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassComparison {
    pub outcome: ClassOutcome,
    pub plan: Option<WitnessPlan>,
    pub report: ComparisonReport,
    pub reasons: Vec<String>,
}

fn index_set_plan(big: &ThetaSpec, small: &ThetaSpec, report: &ComparisonReport, horizon: u64, swapped: bool, reasons: &mut Vec<String>) -> Option<WitnessPlan> {
    if report.ratio_to_infinity != TriState::Proven {
        return None;
    }
    match criterion_thin_exists(small, horizon) {
        Ok(v) if certified(&v, Decision::Divergent) => Some(WitnessPlan {
            kind: PlanKind::IndexSetSpacedCircles,
            larger: big.clone(),
            smaller: small.clone(),
            swapped,
            steps: vec![
                format!("build_index_set_and_counts({small})"),
                "spaced_circle_sequence over the selected levels".into(),
            ],
            gate: v,
        }),
        Ok(v) => {
            reasons.push(format!(
                "ratio {big} / {small} -> inf, but the thin-existence series for {small} is {:?} ({:?})",
                v.decision, v.tier
            ));
            None
        }
        Err(e) => {
            reasons.push(format!("thin-existence criterion for {small} failed: {e}"));
            None
        }
    }
}

fn small_weights_plan(big: &ThetaSpec, small: &ThetaSpec, report: &ComparisonReport, horizon: u64, swapped: bool, reasons: &mut Vec<String>) -> Option<WitnessPlan> {
    if report.rho_ratio_to_infinity != TriState::Proven {
        return None;
    }
    let rho1 = RhoSpec::infer(big.clone(), horizon_u32(horizon));
    if rho1.dominated_by_ct.is_none() {
        reasons.push(format!("rho for {big} is not dominated by C t"));
        return None;
    }
    match criterion_thick_exists(&rho1, horizon) {
        Ok(v) if certified(&v, Decision::Divergent) => Some(WitnessPlan {
            kind: PlanKind::SplitSubsetFullCircles,
            larger: big.clone(),
            smaller: small.clone(),
            swapped,
            steps: vec![
                format!("split_series_subset(rho[{big}], rho[{small}])"),
                "full_circle_sequence over the block levels".into(),
            ],
            gate: v,
        }),
        Ok(v) => {
            reasons.push(format!(
                "rho ratio -> inf, but the thick-existence series for {big} is {:?} ({:?})",
                v.decision, v.tier
            ));
            None
        }
        Err(e) => {
            reasons.push(format!("thick-existence criterion for {big} failed: {e}"));
            None
        }
    }
}

/// Same class, different class (with a construction plan), or undecided.
pub fn compare_weight_classes(theta1: &ThetaSpec, theta2: &ThetaSpec, horizon: u64) -> ClassComparison {
    let h = horizon_u32(horizon);
    let report = compare(theta1, theta2, h);
    let mut reasons = report.reasons.clone();
    if report.comparable == TriState::Proven || report.log_rho_gap_bounded == TriState::Proven {
        reasons.push(if report.comparable == TriState::Proven {
            "weights are comparable".into()
        } else {
            "log rho gap is bounded".into()
        });
        return ClassComparison {
            outcome: ClassOutcome::SameClass,
            plan: None,
            report,
            reasons,
        };
    }
    let reverse = compare(theta2, theta1, h);
    let plan = index_set_plan(theta1, theta2, &report, horizon, false, &mut reasons)
        .or_else(|| index_set_plan(theta2, theta1, &reverse, horizon, true, &mut reasons))
        .or_else(|| small_weights_plan(theta1, theta2, &report, horizon, false, &mut reasons))
        .or_else(|| small_weights_plan(theta2, theta1, &reverse, horizon, true, &mut reasons));
    let outcome = if plan.is_some() {
        ClassOutcome::DifferentClass
    } else {
        if report.ratio_to_infinity != TriState::Proven
            && reverse.ratio_to_infinity != TriState::Proven
            && report.rho_ratio_to_infinity != TriState::Proven
            && reverse.rho_ratio_to_infinity != TriState::Proven
        {
            reasons.push("blocked: neither a ratio -> inf nor a comparability relation is proven".into());
        }
        ClassOutcome::Undecided
    };
    ClassComparison {
        outcome,
        plan,
        report,
        reasons,
    }
}

// ---------------------------------------------------------------------------
// sequences

/// What is being classified.
#[derive(Debug, Clone, Copy)]
pub enum SequenceSource<'a> {
    Points(&'a PointSequence),
    /// A finite annulus profile; `dbar` enables the mean-spacing scale.
    Profile {
        counts: &'a BTreeMap<u32, Count>,
        dbar: Option<&'a BTreeMap<u32, f64>>,
    },
    /// Full circles on every level `m >= from`.
    FullCircles { from: u32 },
    /// Formula profile `N_m = p_m 2^m / (theta(2^-m) + log m)` on every level `m >= 1`.
    Example { growth: GrowthFactor },
}

impl SequenceSource<'_> {
    fn describe(&self) -> String {
        match self {
            SequenceSource::Points(s) => format!("points (n = {})", s.len()),
            SequenceSource::Profile { counts, .. } => format!("profile ({} levels)", counts.len()),
            SequenceSource::FullCircles { from } => format!("full circles on every m >= {from}"),
            SequenceSource::Example { growth } => format!("formula profile, growth {growth:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    pub gamma_grid: Vec<f64>,
    /// Extra candidates; `f = 1` is always tried first.
    pub witness_candidates: Vec<HInftyFunction>,
    pub horizon: u64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            gamma_grid: vec![1.0, 10.0, 100.0],
            witness_candidates: Vec::new(),
            horizon: 1 << 16,
        }
    }
}

/// `{1}`, `b_a` and `b_a^2` for `a` on a coarse grid, and products of up to three factors.
pub fn default_candidates() -> Vec<HInftyFunction> {
    let mut grid = vec![DiskPoint::origin()];
    for r_gap in [0.5, 0.1] {
        for k in 0..4 {
            grid.push(DiskPoint::new(r_gap, k as f64 * FRAC_PI_2).unwrap());
        }
    }
    let mut out = vec![HInftyFunction::one()];
    for a in &grid {
        let b = HInftyFunction::blaschke_factor(*a);
        out.push(b.clone());
        out.push(HInftyFunction::power(b, 2).unwrap());
    }
    for i in 0..grid.len() {
        for j in i + 1..grid.len() {
            out.push(HInftyFunction::blaschke(vec![grid[i], grid[j]]));
            for k in j + 1..grid.len() {
                out.push(HInftyFunction::blaschke(vec![grid[i], grid[j], grid[k]]));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SequenceDecision {
    ThinWitnessed,
    ThickIndicated,
    Undecided,
}

/// Which criterion produced a decided verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriterionId {
    /// Exponential sum with the dyadic-gap scale.
    #[serde(rename = "dyadic_gap_sum")]
    DyadicGapSum,
    /// Exponential sum with the mean-spacing scale.
    #[serde(rename = "mean_spacing_sum")]
    MeanSpacingSum,
    /// Counting criterion under `N_m dbar_m >= c` and `rho >= c_1 t`.
    #[serde(rename = "spacing_count")]
    SpacingCount,
    #[serde(rename = "witness")]
    Witness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessEvidence {
    pub spec: String,
    pub function: HInftyFunction,
    /// Present for materialized sequences.
    pub summatory: Option<SummatoryReport>,
    pub partial_sum: f64,
    pub tail_bound: f64,
    pub tail_from: Option<u64>,
    pub tier: Tier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacingCountReport {
    /// `min_{m in K} N_m dbar_m`.
    pub c: f64,
    /// `K = {m : N_m >= 6}` as tested.
    pub k_levels: u64,
    pub k_sum: f64,
    pub k_sum_infinite: bool,
    pub rho_bounded_below: bool,
    pub horizon_limited: bool,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Evidence {
    pub witness: Option<WitnessEvidence>,
    /// The series verdict of the criterion that fired, if any.
    pub series: Option<SeriesVerdict>,
    pub dyadic_gap_sum: Option<SeriesVerdict>,
    pub mean_spacing_sum: Option<SeriesVerdict>,
    pub spacing_count: Option<SpacingCountReport>,
    /// Exceptional sets sampled via the witness candidates.
    pub tested_j: Vec<BTreeSet<u32>>,
    pub candidates_tried: Vec<(String, f64)>,
    pub annotations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replay {
    pub theta: ThetaSpec,
    pub source: String,
    pub gamma_grid: Vec<f64>,
    pub horizon: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceVerdict {
    pub decision: SequenceDecision,
    pub criterion: Option<CriterionId>,
    pub evidence: Evidence,
    pub replay: Replay,
}

impl SequenceVerdict {
    /// Re-run the stored witness on `seq`; `Some(total)` when it reproduces.
    pub fn replay_witness(&self, seq: &PointSequence) -> Option<Result<f64>> {
        let w = self.evidence.witness.as_ref()?;
        Some(summatory_theta(&w.function, &self.replay.theta, seq).map(|r| r.total))
    }
}

fn full_circle_nd(m: u32) -> f64 {
    // N_m dbar_m for 2^m equally spaced points: 2^m * chord
    2f64.powi(m as i32) * 2.0 * (1.0 - pow2_neg(m)) * (PI * pow2_neg(m)).sin()
}

fn spacing_count(
    counts: &BTreeMap<u32, Count>,
    dbar: &BTreeMap<u32, f64>,
    theta: &ThetaSpec,
) -> SpacingCountReport {
    let mut c = f64::INFINITY;
    let mut k = 0;
    let mut s = NeumaierSum::new();
    for (&m, n) in counts {
        if !n.at_least(6) {
            continue;
        }
        if let Some(&d) = dbar.get(&m) {
            c = c.min(n.ln().exp() * d);
            k += 1;
            s.add(n.density(m));
        }
    }
    let rho_bounded_below = theta_bounded_below(theta);
    SpacingCountReport {
        c,
        k_levels: k,
        k_sum: s.value(),
        k_sum_infinite: false,
        rho_bounded_below,
        horizon_limited: true,
        decision: if k > 0 && c > 0.0 && rho_bounded_below {
            Decision::Convergent
        } else {
            Decision::Undecided
        },
    }
}

/// Thin/thick evidence for one sequence, profile, or sequence family.
pub fn classify_sequence(source: SequenceSource<'_>, theta: &ThetaSpec, options: &ClassifyOptions) -> Result<SequenceVerdict> {
    if options.horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be >= 1".into()));
    }
    if options.gamma_grid.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::InvalidParameter("gamma grid values must be > 0".into()));
    }
    let replay = Replay {
        theta: theta.clone(),
        source: source.describe(),
        gamma_grid: options.gamma_grid.clone(),
        horizon: options.horizon,
    };
    let mut ev = Evidence::default();
    let mut thick: Option<(CriterionId, SeriesVerdict)> = None;
    let mut thick_trend = false;
    let h32 = horizon_u32(options.horizon);
    let rho = RhoSpec::infer(theta.clone(), h32);

    // profile data shared by the finite sources
    let point_profile = match source {
        SequenceSource::Points(seq) => Some(build_profile(seq)),
        _ => None,
    };
    let (finite_counts, finite_dbar): (Option<BTreeMap<u32, Count>>, Option<BTreeMap<u32, f64>>) = match source {
        SequenceSource::Points(_) => {
            let p = point_profile.as_ref().unwrap();
            (Some(p.counts()), Some(p.dbar_map()))
        }
        SequenceSource::Profile { counts, dbar } => (Some(counts.clone()), dbar.cloned()),
        _ => (None, None),
    };

    // (i) counting criterion under uniform mean spacing
    match source {
        SequenceSource::FullCircles { from } => {
            let from6 = from.max(3);
            let c = full_circle_nd(from6);
            let below = theta_bounded_below(theta);
            let report = SpacingCountReport {
                c,
                k_levels: u64::MAX,
                k_sum: f64::INFINITY,
                k_sum_infinite: true,
                rho_bounded_below: below,
                horizon_limited: false,
                decision: if below { Decision::Divergent } else { Decision::Undecided },
            };
            if below {
                let mut v = criterion_thick_exists(&counting_rho(theta), options.horizon)?;
                v.notes.push(format!(
                    "N_m dbar_m >= {c} for m >= {from6}; sum of N_m 2^-m over K is infinite"
                ));
                v.decision = Decision::Divergent;
                v.tier = Tier::SymbolicProof;
                thick = Some((CriterionId::SpacingCount, v));
            } else {
                ev.annotations.push("counting criterion skipped: rho >= c_1 t not established".into());
            }
            ev.spacing_count = Some(report);
        }
        _ => {
            if let (Some(counts), Some(dbar)) = (&finite_counts, &finite_dbar) {
                let r = spacing_count(counts, dbar, theta);
                if r.decision == Decision::Convergent {
                    ev.annotations
                        .push("counting criterion: finite K-sum, thin side (horizon-limited)".into());
                }
                ev.spacing_count = Some(r);
            }
        }
    }

    // (ii) exponential sums over the gamma grid
    if thick.is_none() {
        let none = BTreeSet::new();
        let sums: Vec<(CriterionId, Result<SeriesVerdict>)> = match source {
            SequenceSource::Points(_) | SequenceSource::Profile { .. } => {
                let counts = finite_counts.as_ref().unwrap();
                let mut v = vec![(
                    CriterionId::DyadicGapSum,
                    criterion_exponential_sum(
                        CountSource::Finite(counts),
                        &rho,
                        &options.gamma_grid,
                        &GapScale::DyadicGap,
                        &none,
                        options.horizon,
                    ),
                )];
                if let Some(d) = &finite_dbar {
                    v.push((
                        CriterionId::MeanSpacingSum,
                        criterion_exponential_sum(
                            CountSource::Finite(counts),
                            &rho,
                            &options.gamma_grid,
                            &GapScale::MeanSpacing(d.clone()),
                            &none,
                            options.horizon,
                        ),
                    ));
                }
                v
            }
            SequenceSource::Example { growth } => {
                ev.annotations
                    .push("mean-spacing scale unavailable for a formula profile".into());
                vec![(
                    CriterionId::DyadicGapSum,
                    criterion_exponential_sum(
                        CountSource::Example { theta, growth },
                        &rho,
                        &options.gamma_grid,
                        &GapScale::DyadicGap,
                        &none,
                        options.horizon,
                    ),
                )]
            }
            SequenceSource::FullCircles { .. } => {
                // N_m = 2^m: the sum is e^-gamma times the thick-existence series
                let v = criterion_thick_exists(&counting_rho(theta), options.horizon).map(|mut v| {
                    v.notes.push("full circles: terms exp(theta(2^-m) - gamma)".into());
                    v
                });
                vec![(CriterionId::DyadicGapSum, v)]
            }
        };
        ev.tested_j.push(BTreeSet::new());
        for (id, r) in sums {
            match r {
                Ok(v) => {
                    if v.decision == Decision::Divergent {
                        if v.tier.is_certified() {
                            if thick.is_none() {
                                thick = Some((id, v.clone()));
                            }
                        } else {
                            thick_trend = true;
                        }
                    }
                    match id {
                        CriterionId::MeanSpacingSum => ev.mean_spacing_sum = Some(v),
                        _ => ev.dyadic_gap_sum = Some(v),
                    }
                }
                Err(e) => ev.annotations.push(format!("{id:?} criterion skipped: {e}")),
            }
        }
    }

    // (iii) witness search, f = 1 first
    let mut candidates = vec![HInftyFunction::one()];
    candidates.extend(options.witness_candidates.iter().filter(|f| **f != HInftyFunction::one()).cloned());
    let witness = match source {
        SequenceSource::Points(seq) => {
            // sampled exceptional set for the first nontrivial candidate
            if let Some(f) = candidates.get(1) {
                if !f.is_identically_zero() {
                    let r = exceptional_indices(f, seq, 1.0, ExceptionalScale::DyadicGap)?;
                    ev.tested_j.push(r.j);
                }
            }
            let mut found = None;
            for f in &candidates {
                if f.is_identically_zero() {
                    continue;
                }
                let r = summatory_theta(f, theta, seq)?;
                ev.candidates_tried.push((f.to_spec(), r.total));
                if r.total.is_finite() {
                    found = Some(WitnessEvidence {
                        spec: f.to_spec(),
                        function: f.clone(),
                        partial_sum: r.total,
                        summatory: Some(r),
                        tail_bound: 0.0,
                        tail_from: Some(seq.len() as u64),
                        tier: Tier::SymbolicProof,
                    });
                    break;
                }
            }
            found
        }
        SequenceSource::Profile { counts, .. } => {
            // f = 1 only: sum_m N_m rho(2^-m), finite for a finite profile
            let mut s = NeumaierSum::new();
            for (&m, n) in counts {
                if !n.is_zero() {
                    s.add((n.ln() + theta.ln_rho_level(m)?).exp());
                }
            }
            let total = s.value();
            ev.candidates_tried.push((HInftyFunction::one().to_spec(), total));
            ev.annotations
                .push("profile input: the sum is taken with points on the circles |z| = 1 - 2^-m".into());
            total.is_finite().then(|| WitnessEvidence {
                spec: HInftyFunction::one().to_spec(),
                function: HInftyFunction::one(),
                summatory: None,
                partial_sum: total,
                tail_bound: 0.0,
                tail_from: counts.keys().next_back().map(|&m| m as u64),
                tier: Tier::SymbolicProof,
            })
        }
        SequenceSource::FullCircles { .. } => match criterion_thick_exists(&counting_rho(theta), options.horizon) {
            Ok(v) if certified(&v, Decision::Convergent) && v.tail_bound.is_some() => {
                ev.candidates_tried.push((HInftyFunction::one().to_spec(), v.partial_sum));
                Some(WitnessEvidence {
                    spec: HInftyFunction::one().to_spec(),
                    function: HInftyFunction::one(),
                    summatory: None,
                    partial_sum: v.partial_sum,
                    tail_bound: v.tail_bound.unwrap(),
                    tail_from: v.tail_from,
                    tier: v.tier,
                })
            }
            _ => None,
        },
        SequenceSource::Example { .. } => {
            ev.annotations
                .push("no points to evaluate witnesses on; only the series criteria apply".into());
            if let Some(v) = &ev.dyadic_gap_sum {
                if certified(v, Decision::Convergent) {
                    ev.annotations
                        .push("exponential sum converges for some gamma: the profile admits a thin realization".into());
                }
            }
            None
        }
    };

    let (decision, criterion) = match (&thick, &witness) {
        (Some(_), Some(_)) => {
            debug_assert!(false, "thin witness and certified thick criterion on the same input");
            ev.annotations.push("conflict between a thin witness and a thick criterion".into());
            (SequenceDecision::Undecided, None)
        }
        (Some((id, v)), None) => {
            ev.series = Some(v.clone());
            ev.annotations
                .push("thickness is indicated: exceptional sets are sampled, not exhausted".into());
            (SequenceDecision::ThickIndicated, Some(*id))
        }
        (None, Some(_)) => (SequenceDecision::ThinWitnessed, Some(CriterionId::Witness)),
        (None, None) => {
            if thick_trend {
                ev.annotations.push("thick-trend".into());
            }
            (SequenceDecision::Undecided, None)
        }
    };
    ev.witness = witness;
    Ok(SequenceVerdict {
        decision,
        criterion,
        evidence: ev,
        replay,
    })
}

/// `rho` for evaluating `sum_m exp(theta(2^-m))` as a series. The flags are
/// hypotheses of the existence statement, not of the series itself.
fn counting_rho(theta: &ThetaSpec) -> RhoSpec {
    RhoSpec {
        theta: theta.clone(),
        nondecreasing: true,
        dominated_by_ct: Some(1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(c: f64, a: f64, b: f64) -> ThetaSpec {
        ThetaSpec::log_power(c, a, b).unwrap()
    }

    #[test]
    fn regimes() {
        let h = 1 << 20;
        let t = lp(1.0, 2.0, 0.0);
        assert_eq!(weight_regime(&t, &RhoSpec::infer(t.clone(), 64), h).regime, Regime::AllThickSide);
        let t = ThetaSpec::log_l(-2.0).unwrap();
        assert_eq!(weight_regime(&t, &RhoSpec::infer(t.clone(), 64), h).regime, Regime::AllThinSide);
        let t = ThetaSpec::constant(1.0).unwrap();
        assert_eq!(weight_regime(&t, &RhoSpec::infer(t.clone(), 64), h).regime, Regime::Mixed);
    }

    #[test]
    fn class_comparisons() {
        let h = 1 << 20;
        let a = lp(0.3, 1.0, 0.0);
        let b = lp(0.7, 1.0, 0.0);
        assert_eq!(compare_weight_classes(&a, &b, h).outcome, ClassOutcome::SameClass);
        assert_eq!(compare_weight_classes(&a, &a, h).outcome, ClassOutcome::SameClass);
        let c = compare_weight_classes(&lp(1.0, 1.0, 0.0), &ThetaSpec::constant(1.0).unwrap(), h);
        assert_eq!(c.outcome, ClassOutcome::DifferentClass);
        assert_eq!(c.plan.unwrap().kind, PlanKind::IndexSetSpacedCircles);
        let c = compare_weight_classes(&lp(1.0, 3.0, 0.0), &lp(1.0, 2.0, 0.0), h);
        assert_eq!(c.outcome, ClassOutcome::Undecided, "{:?}", c.reasons);
    }

    #[test]
    fn small_weights_plan_fires() {
        // rho1 = t, rho2 = t L^-2
        let c = compare_weight_classes(&ThetaSpec::constant(0.0).unwrap(), &ThetaSpec::log_l(-2.0).unwrap(), 1 << 20);
        assert_eq!(c.outcome, ClassOutcome::DifferentClass, "{:?}", c.reasons);
        let plan = c.plan.unwrap();
        assert_eq!(plan.kind, PlanKind::SplitSubsetFullCircles);
        match plan.execute(40, 10, 1 << 16).unwrap() {
            PlanArtifacts::Blocks { subset, circles } => {
                assert!(!subset.blocks.is_empty());
                assert!(circles.sequence.len() > 0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sequences() {
        let opts = ClassifyOptions::default();
        let theta = ThetaSpec::log_l(-2.0).unwrap();
        let v = classify_sequence(SequenceSource::FullCircles { from: 1 }, &theta, &opts).unwrap();
        assert_eq!(v.decision, SequenceDecision::ThinWitnessed);
        assert!(v.evidence.witness.as_ref().unwrap().tail_bound.is_finite());

        let empty = PointSequence::new(vec![]);
        let v = classify_sequence(SequenceSource::Points(&empty), &lp(1.0, 1.0, 0.0), &opts).unwrap();
        assert_eq!(v.decision, SequenceDecision::ThinWitnessed);
        assert_eq!(v.evidence.witness.unwrap().partial_sum, 0.0);

        let theta = lp(1.0, 1.0, 0.0);
        let v = classify_sequence(SequenceSource::Example { growth: GrowthFactor::LogM }, &theta, &opts).unwrap();
        assert_eq!(v.decision, SequenceDecision::ThickIndicated);
        assert_eq!(v.criterion, Some(CriterionId::DyadicGapSum));

        let v = classify_sequence(SequenceSource::FullCircles { from: 1 }, &theta, &opts).unwrap();
        assert_eq!(v.decision, SequenceDecision::ThickIndicated);
        assert_eq!(v.criterion, Some(CriterionId::SpacingCount));
        let s = serde_json::to_string(&v).unwrap();
        assert!(s.contains("\"criterion\":\"spacing_count\""));
    }

    #[test]
    fn default_candidates_are_bounded() {
        let c = default_candidates();
        assert_eq!(c[0], HInftyFunction::one());
        assert!(c.iter().all(|f| f.validate().is_ok()));
    }
}
