//! Bounded holomorphic witnesses, evaluated as `log |f|`.
//!
//! Everything here works in the log-modulus domain: a Blaschke factor `b_a`
//! has `log |b_a(z)| = log d(a, z)`, computed by the cancellation-free
//! pseudohyperbolic distance, so values never round above 0 and zeros give
//! exactly `-inf`.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{LN_2, TAU};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{
    annulus_index, blaschke_sum, build_profile, ln_pseudo_distance, pow2_neg, DiskPoint, PointSequence,
};
use crate::sum::NeumaierSum;
use crate::weights::{RhoSpec, ThetaSpec};
use crate::{Error, Result};

/// Serde adapter for extended reals: `-inf` / `inf` become strings.
pub mod ext_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Str(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
            Raw::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad extended real '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlaschkeZero {
    pub point: DiskPoint,
    pub multiplicity: u32,
}

/// A function in the closed unit ball of `H^infinity`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HInftyFunction {
    Constant { re: f64, im: f64 },
    FiniteBlaschke { zeros: Vec<BlaschkeZero> },
    Power { base: Box<HInftyFunction>, m: u32 },
    Product { factors: Vec<HInftyFunction> },
}

impl HInftyFunction {
    pub fn one() -> Self {
        HInftyFunction::Constant { re: 1.0, im: 0.0 }
    }

    pub fn constant(re: f64, im: f64) -> Result<Self> {
        if !(re.is_finite() && im.is_finite()) || re.hypot(im) > 1.0 {
            return Err(Error::InvalidParameter(format!("constant {re}+{im}i must satisfy |c| <= 1")));
        }
        Ok(HInftyFunction::Constant { re, im })
    }

    /// Single factor `b_a`.
    pub fn blaschke_factor(a: DiskPoint) -> Self {
        Self::blaschke(vec![a])
    }

    /// Finite Blaschke product; repeated points are merged into multiplicities.
    pub fn blaschke(points: Vec<DiskPoint>) -> Self {
        let mut zeros: Vec<BlaschkeZero> = Vec::new();
        for p in points {
            match zeros
                .iter_mut()
                .find(|z| z.point.delta() == p.delta() && z.point.angle() == p.angle())
            {
                Some(z) => z.multiplicity += 1,
                None => zeros.push(BlaschkeZero { point: p, multiplicity: 1 }),
            }
        }
        HInftyFunction::FiniteBlaschke { zeros }
    }

    pub fn power(base: HInftyFunction, m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("power exponent must be >= 1".into()));
        }
        Ok(HInftyFunction::Power { base: Box::new(base), m })
    }

    pub fn product(factors: Vec<HInftyFunction>) -> Self {
        HInftyFunction::Product { factors }
    }

    /// Structural check of the sup-norm bound and multiplicities.
    pub fn validate(&self) -> Result<()> {
        match self {
            HInftyFunction::Constant { re, im } => Self::constant(*re, *im).map(|_| ()),
            HInftyFunction::FiniteBlaschke { zeros } => {
                for z in zeros {
                    z.point.validate()?;
                    if z.multiplicity == 0 {
                        return Err(Error::InvalidParameter("zero multiplicity must be >= 1".into()));
                    }
                }
                Ok(())
            }
            HInftyFunction::Power { base, m } => {
                if *m == 0 {
                    return Err(Error::InvalidParameter("power exponent must be >= 1".into()));
                }
                base.validate()
            }
            HInftyFunction::Product { factors } => factors.iter().try_for_each(|f| f.validate()),
        }
    }

    /// Syntactic: some constant factor is 0.
    pub fn is_identically_zero(&self) -> bool {
        match self {
            HInftyFunction::Constant { re, im } => *re == 0.0 && *im == 0.0,
            HInftyFunction::FiniteBlaschke { .. } => false,
            HInftyFunction::Power { base, .. } => base.is_identically_zero(),
            HInftyFunction::Product { factors } => factors.iter().any(|f| f.is_identically_zero()),
        }
    }

    /// Parse `const:re,im | blaschke:@file | blaschke:[d,a(,mult);...] |
    /// pow:<spec>^m | prod:[spec;spec;...]`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |r: String| Error::format("witness", format!("'{s}': {r}"));
        if s == "1" {
            return Ok(Self::one());
        }
        if let Some(rest) = s.strip_prefix("const:") {
            let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
            let nums: std::result::Result<Vec<f64>, _> = parts.iter().map(|p| p.parse::<f64>()).collect();
            return match nums {
                Ok(v) if v.len() == 1 => Self::constant(v[0], 0.0),
                Ok(v) if v.len() == 2 => Self::constant(v[0], v[1]),
                _ => Err(bad("expected const:re,im".into())),
            };
        }
        if let Some(rest) = s.strip_prefix("blaschke:") {
            if let Some(path) = rest.strip_prefix('@') {
                return read_zeros(Path::new(path));
            }
            let inner = rest
                .strip_prefix('[')
                .and_then(|r| r.strip_suffix(']'))
                .ok_or_else(|| bad("expected blaschke:@file or blaschke:[delta,angle;...]".into()))?;
            let mut zeros = Vec::new();
            for item in inner.split(';').map(str::trim).filter(|x| !x.is_empty()) {
                let v: Vec<&str> = item.split(',').map(str::trim).collect();
                if v.len() != 2 && v.len() != 3 {
                    return Err(bad(format!("zero '{item}' needs delta,angle[,multiplicity]")));
                }
                let d: f64 = v[0].parse().map_err(|e| bad(format!("{e}")))?;
                let a: f64 = v[1].parse().map_err(|e| bad(format!("{e}")))?;
                let mult: u32 = match v.get(2) {
                    Some(x) => x.parse().map_err(|e| bad(format!("{e}")))?,
                    None => 1,
                };
                zeros.push(BlaschkeZero {
                    point: DiskPoint::new(d, a)?,
                    multiplicity: mult,
                });
            }
            let f = HInftyFunction::FiniteBlaschke { zeros };
            f.validate()?;
            return Ok(f);
        }
        if let Some(rest) = s.strip_prefix("pow:") {
            let (base, m) = rest.rsplit_once('^').ok_or_else(|| bad("expected pow:<spec>^m".into()))?;
            let m: u32 = m.trim().parse().map_err(|e| bad(format!("exponent: {e}")))?;
            return Self::power(Self::parse(base)?, m);
        }
        if let Some(rest) = s.strip_prefix("prod:") {
            let inner = rest
                .trim()
                .strip_prefix('[')
                .and_then(|r| r.strip_suffix(']'))
                .ok_or_else(|| bad("expected prod:[spec;spec;...]".into()))?;
            let factors = split_top_level(inner)
                .into_iter()
                .filter(|x| !x.trim().is_empty())
                .map(Self::parse)
                .collect::<Result<Vec<_>>>()?;
            return Ok(Self::product(factors));
        }
        Err(bad("unknown witness kind".into()))
    }

    /// Text form accepted by [`HInftyFunction::parse`]; Blaschke zeros are inlined.
    pub fn to_spec(&self) -> String {
        match self {
            HInftyFunction::Constant { re, im } => format!("const:{re},{im}"),
            HInftyFunction::FiniteBlaschke { zeros } => {
                let items: Vec<String> = zeros
                    .iter()
                    .map(|z| {
                        if z.multiplicity == 1 {
                            format!("{},{}", z.point.delta(), z.point.angle())
                        } else {
                            format!("{},{},{}", z.point.delta(), z.point.angle(), z.multiplicity)
                        }
                    })
                    .collect();
                format!("blaschke:[{}]", items.join(";"))
            }
            HInftyFunction::Power { base, m } => format!("pow:{}^{m}", base.to_spec()),
            HInftyFunction::Product { factors } => {
                let items: Vec<String> = factors.iter().map(|f| f.to_spec()).collect();
                format!("prod:[{}]", items.join(";"))
            }
        }
    }

    /// Zeros of a `FiniteBlaschke`; other variants are rejected.
    pub fn blaschke_zeros(&self) -> Result<&[BlaschkeZero]> {
        match self {
            HInftyFunction::FiniteBlaschke { zeros } => Ok(zeros),
            _ => Err(Error::InvalidParameter("a finite Blaschke product is required".into())),
        }
    }
}

impl fmt::Display for HInftyFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_spec())
    }
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '[' => depth += 1,
            ']' => depth -= 1,
            ';' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

#[derive(Deserialize)]
struct RawZero {
    delta: f64,
    angle: f64,
    #[serde(default = "one_u32")]
    multiplicity: u32,
}

fn one_u32() -> u32 {
    1
}

/// Zeros file: a sequence file, or a bare array of `{delta, angle[, multiplicity]}`.
pub fn zeros_from_json(text: &str) -> Result<HInftyFunction> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::format("zeros", e.to_string()))?;
    if v.is_object() {
        let seq = crate::io::sequence_from_json(text)?;
        return Ok(HInftyFunction::blaschke(seq.points));
    }
    let raw: Vec<RawZero> = serde_json::from_value(v).map_err(|e| Error::format("zeros", e.to_string()))?;
    let mut zeros = Vec::with_capacity(raw.len());
    for (k, z) in raw.into_iter().enumerate() {
        let point = DiskPoint::new(z.delta, z.angle)
            .map_err(|e| Error::format(format!("zeros[{k}].delta/angle"), e.to_string()))?;
        if z.multiplicity == 0 {
            return Err(Error::format(format!("zeros[{k}].multiplicity"), "must be >= 1"));
        }
        zeros.push(BlaschkeZero {
            point,
            multiplicity: z.multiplicity,
        });
    }
    Ok(HInftyFunction::FiniteBlaschke { zeros })
}

fn read_zeros(path: &Path) -> Result<HInftyFunction> {
    zeros_from_json(&std::fs::read_to_string(path)?)
}

/// `log |f(p)|`, in `[-inf, 0]`.
pub fn eval_log_modulus(f: &HInftyFunction, p: &DiskPoint) -> f64 {
    match f {
        HInftyFunction::Constant { re, im } => re.hypot(*im).ln(),
        HInftyFunction::FiniteBlaschke { zeros } => {
            let mut s = NeumaierSum::new();
            for z in zeros {
                let l = ln_pseudo_distance(&z.point, p);
                if l == f64::NEG_INFINITY {
                    return l;
                }
                s.add(z.multiplicity as f64 * l);
            }
            s.value().min(0.0)
        }
        HInftyFunction::Power { base, m } => {
            let b = eval_log_modulus(base, p);
            if b == f64::NEG_INFINITY {
                b
            } else {
                *m as f64 * b
            }
        }
        HInftyFunction::Product { factors } => {
            let mut s = NeumaierSum::new();
            for g in factors {
                let l = eval_log_modulus(g, p);
                if l == f64::NEG_INFINITY {
                    return l;
                }
                s.add(l);
            }
            s.value().min(0.0)
        }
    }
}

/// `sum_k rho(delta_k) |f(z_k)|` with its per-annulus breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummatoryReport {
    pub total: f64,
    pub per_annulus: BTreeMap<u32, f64>,
    /// `(k, sum of the first k terms)` at `k = 1, 2, 4, ...` and at the end.
    pub running: Vec<(usize, f64)>,
    /// Points where `f` vanishes.
    pub zero_terms: usize,
    pub n_points: usize,
}

pub fn summatory(f: &HInftyFunction, rho: &RhoSpec, seq: &PointSequence) -> Result<SummatoryReport> {
    summatory_theta(f, &rho.theta, seq)
}

/// Same as [`summatory`], keyed by `theta` alone.
pub fn summatory_theta(f: &HInftyFunction, theta: &ThetaSpec, seq: &PointSequence) -> Result<SummatoryReport> {
    let mut total = NeumaierSum::new();
    let mut per: BTreeMap<u32, NeumaierSum> = BTreeMap::new();
    let mut running = Vec::new();
    let mut zero_terms = 0;
    let mut next_mark = 1usize;
    let n = seq.len();
    for (k, p) in seq.points.iter().enumerate() {
        let lf = eval_log_modulus(f, p);
        let term = if lf == f64::NEG_INFINITY {
            zero_terms += 1;
            0.0
        } else {
            let th = theta.theta_at_gap(p.delta())?;
            let e = th + lf;
            // direct product keeps dyadic gaps exact; the log form only when exp(e) would overflow
            if e < 700.0 {
                p.delta() * e.exp()
            } else {
                (p.delta().ln() + e).exp()
            }
        };
        total.add(term);
        per.entry(annulus_index(p)).or_default().add(term);
        if k + 1 == next_mark || k + 1 == n {
            running.push((k + 1, total.value()));
            if k + 1 == next_mark {
                next_mark = next_mark.saturating_mul(2);
            }
        }
    }
    Ok(SummatoryReport {
        total: total.value(),
        per_annulus: per.into_iter().map(|(m, s)| (m, s.value())).collect(),
        running,
        zero_terms,
        n_points: n,
    })
}

/// One verified inequality `log |f1(z_k)| <= -theta(delta_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertEntry {
    pub k: usize,
    pub delta: f64,
    #[serde(with = "ext_real")]
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterResult {
    pub f1: HInftyFunction,
    /// Indices already below the bound under `f`.
    pub kept: Vec<usize>,
    /// Indices that became zeros of `f1`.
    pub remainder: Vec<usize>,
    pub certificate: Vec<CertEntry>,
    /// `sum (1 - |z|)` over the remainder.
    pub remainder_blaschke_sum: f64,
}

impl FilterResult {
    pub fn all_ok(&self) -> bool {
        self.certificate.iter().all(|c| c.ok)
    }
}

/// Multiply `f` by the Blaschke product over the points where
/// `|f(z_k)| > e^{-theta(delta_k)}`, then certify the bound at every point.
pub fn blaschke_filter_transform(f: &HInftyFunction, theta: &ThetaSpec, seq: &PointSequence) -> Result<FilterResult> {
    let mut kept = Vec::new();
    let mut remainder = Vec::new();
    let mut rhs = Vec::with_capacity(seq.len());
    for (k, p) in seq.points.iter().enumerate() {
        let r = -theta.theta_at_gap(p.delta())?;
        if eval_log_modulus(f, p) <= r {
            kept.push(k);
        } else {
            remainder.push(k);
        }
        rhs.push(r);
    }
    let f1 = if remainder.is_empty() {
        f.clone()
    } else {
        let b = HInftyFunction::blaschke(remainder.iter().map(|&k| seq.points[k]).collect());
        HInftyFunction::product(vec![f.clone(), b])
    };
    let certificate = seq
        .points
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let lhs = eval_log_modulus(&f1, p);
            CertEntry {
                k,
                delta: p.delta(),
                lhs,
                rhs: rhs[k],
                ok: lhs <= rhs[k],
            }
        })
        .collect();
    let rem_sum: NeumaierSum = remainder.iter().map(|&k| seq.points[k].delta()).collect();
    Ok(FilterResult {
        f1,
        kept,
        remainder,
        certificate,
        remainder_blaschke_sum: rem_sum.value(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTrickReport {
    pub m: u32,
    /// `q = (m - 1) L / 2 > 1`, the exponent of the majorant `n^-q`.
    pub q: f64,
    pub sum: SummatoryReport,
    /// `C_delta = max_n sum_{Y_n} (1 - |z_k|)`.
    pub c_delta: f64,
    pub tail_from: u32,
    /// `C_delta (log 2)^-q H^(1-q) / (q - 1)` bounding the levels beyond `H`.
    pub tail_bound: f64,
    /// `theta(2^-n) >= (L/2) log(n log 2)` held on the upper half of the grid.
    pub l_lower_validated: bool,
}

/// Smallest `m` with `(m - 1) L / 2 > 1`.
pub fn power_trick_exponent(l_lower: f64) -> Result<u32> {
    if !(l_lower > 0.0) {
        return Err(Error::InvalidParameter(format!("L_lower = {l_lower} must be > 0")));
    }
    let m = (2.0 / l_lower).floor() + 2.0;
    if m > u32::MAX as f64 {
        return Err(Error::InvalidParameter(format!("L_lower = {l_lower} is too small")));
    }
    let mut m = m as u32;
    // floor can land one off when 2/L is an exact integer after rounding
    while m > 2 && (m - 2) as f64 * l_lower / 2.0 > 1.0 {
        m -= 1;
    }
    while (m - 1) as f64 * l_lower / 2.0 <= 1.0 {
        m += 1;
    }
    Ok(m)
}

/// Raise a decaying witness to the power that makes the series summable.
pub fn power_trick(
    f: &HInftyFunction,
    theta: &ThetaSpec,
    seq: &PointSequence,
    certificate: &[CertEntry],
    l_lower: f64,
    horizon: u32,
) -> Result<PowerTrickReport> {
    let m = power_trick_exponent(l_lower)?;
    if certificate.len() != seq.len() {
        return Err(Error::Certification(format!(
            "certificate has {} entries for {} points",
            certificate.len(),
            seq.len()
        )));
    }
    for (k, c) in certificate.iter().enumerate() {
        let p = &seq.points[k];
        let lhs = eval_log_modulus(f, p);
        let rhs = -theta.theta_at_gap(p.delta())?;
        if c.k != k || !c.ok || !(lhs <= rhs) {
            return Err(Error::Certification(format!("decay bound fails at point {k}")));
        }
    }
    let fm = HInftyFunction::power(f.clone(), m)?;
    let sum = summatory_theta(&fm, theta, seq)?;
    let q = (m - 1) as f64 * l_lower / 2.0;
    let c_delta = blaschke_sum(seq).per_annulus.values().fold(0.0f64, |a, &b| a.max(b));
    let h = build_profile(seq).levels.keys().next_back().copied().unwrap_or(0).max(1);
    let tail_bound = c_delta * LN_2.powf(-q) * (h as f64).powf(1.0 - q) / (q - 1.0);
    let lo = (horizon / 2).max(4);
    let l_lower_validated = theta
        .sample_levels(horizon)
        .into_iter()
        .filter(|&n| n >= lo)
        .all(|n| match theta.theta_level(n) {
            Ok(th) => th >= 0.5 * l_lower * (n as f64 * LN_2).ln(),
            Err(_) => false,
        });
    Ok(PowerTrickReport {
        m,
        q,
        sum,
        c_delta,
        tail_from: h,
        tail_bound,
        l_lower_validated,
    })
}

/// Scale of the lower bound in the exceptional-set test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExceptionalScale {
    /// `|f| > exp(-C 2^m / N_m)`.
    DyadicGap,
    /// `|f| > exp(-C / (N_m dbar_m))`, annuli with `N_m >= 6` only.
    MeanSpacing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelDiagnostic {
    pub count: u64,
    pub satisfied: u64,
    /// Exponent scale `g` in `exp(-C g)`.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalReport {
    pub c: f64,
    pub j: BTreeSet<u32>,
    /// `sum_{m in J} N_m 2^-m`.
    pub excluded_density: f64,
    pub levels: BTreeMap<u32, LevelDiagnostic>,
    /// Annuli outside the scale's domain (`N_m < 6` for mean spacing).
    pub skipped: Vec<u32>,
}

struct LevelScan {
    levels: BTreeMap<u32, (f64, Vec<f64>)>,
    skipped: Vec<u32>,
}

fn scan_levels(f: &HInftyFunction, seq: &PointSequence, scale: ExceptionalScale) -> LevelScan {
    let profile = build_profile(seq);
    let mut by_level: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for p in &seq.points {
        by_level.entry(annulus_index(p)).or_default().push(eval_log_modulus(f, p));
    }
    let mut levels = BTreeMap::new();
    let mut skipped = Vec::new();
    for (m, vals) in by_level {
        let rec = &profile.levels[&m];
        let g = match scale {
            ExceptionalScale::DyadicGap => 1.0 / (rec.count as f64 * pow2_neg(m)),
            ExceptionalScale::MeanSpacing => match rec.dbar {
                Some(d) if d > 0.0 => 1.0 / (rec.count as f64 * d),
                _ => {
                    skipped.push(m);
                    continue;
                }
            },
        };
        levels.insert(m, (g, vals));
    }
    LevelScan { levels, skipped }
}

fn exceptional_from_scan(scan: &LevelScan, c: f64) -> ExceptionalReport {
    let mut j = BTreeSet::new();
    let mut levels = BTreeMap::new();
    let mut dens = NeumaierSum::new();
    for (&m, (g, vals)) in &scan.levels {
        let bound = -(c * g);
        let satisfied = vals.iter().filter(|&&l| l > bound).count() as u64;
        let count = vals.len() as u64;
        if satisfied < count.div_ceil(2) {
            j.insert(m);
            dens.add(count as f64 * pow2_neg(m));
        }
        levels.insert(
            m,
            LevelDiagnostic {
                count,
                satisfied,
                scale: *g,
            },
        );
    }
    ExceptionalReport {
        c,
        j,
        excluded_density: dens.value(),
        levels,
        skipped: scan.skipped.clone(),
    }
}

/// Levels where fewer than half of the points keep `|f|` above the bound.
pub fn exceptional_indices(
    f: &HInftyFunction,
    seq: &PointSequence,
    c: f64,
    scale: ExceptionalScale,
) -> Result<ExceptionalReport> {
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("C = {c} must be > 0")));
    }
    Ok(exceptional_from_scan(&scan_levels(f, seq, scale), c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalProbe {
    pub rows: Vec<ExceptionalReport>,
    pub threshold: f64,
    /// Smallest grid `C` whose excluded density is below the threshold.
    pub first_below: Option<f64>,
}

/// [`exceptional_indices`] over a grid of constants (sorted ascending).
pub fn exceptional_probe(
    f: &HInftyFunction,
    seq: &PointSequence,
    grid: &[f64],
    scale: ExceptionalScale,
    threshold: f64,
) -> Result<ExceptionalProbe> {
    let mut grid = grid.to_vec();
    if grid.iter().any(|c| !(*c > 0.0)) {
        return Err(Error::InvalidParameter("C grid values must be > 0".into()));
    }
    grid.sort_by(f64::total_cmp);
    let scan = scan_levels(f, seq, scale);
    let rows: Vec<ExceptionalReport> = grid.iter().map(|&c| exceptional_from_scan(&scan, c)).collect();
    let first_below = rows.iter().find(|r| r.excluded_density < threshold).map(|r| r.c);
    Ok(ExceptionalProbe {
        rows,
        threshold,
        first_below,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NevanlinnaReport {
    pub r: f64,
    pub value: f64,
    /// `|Q_n - Q_{n/2}|` of the boundary integral.
    pub error_estimate: f64,
    pub quad_n: usize,
}

fn radius_gap(r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("radius {r} outside (0, 1)")));
    }
    Ok(1.0 - r)
}

/// Trapezoid means of `g(log |f(r e^{i phi})|)` on `n` and `n/2` nodes.
fn circle_mean(f: &HInftyFunction, delta: f64, quad_n: usize, g: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    if quad_n < 2 || quad_n % 2 != 0 {
        return Err(Error::InvalidParameter(format!("quad_n = {quad_n} must be even and >= 2")));
    }
    let mut even = NeumaierSum::new();
    let mut odd = NeumaierSum::new();
    for k in 0..quad_n {
        let p = DiskPoint::new(delta, TAU * k as f64 / quad_n as f64)?;
        let v = g(eval_log_modulus(f, &p));
        if k % 2 == 0 {
            even.add(v);
        } else {
            odd.add(v);
        }
    }
    let (e, o) = (even.value(), odd.value());
    let full = (e + o) / quad_n as f64;
    let half = e / (quad_n / 2) as f64;
    Ok((full, (full - half).abs()))
}

/// `T_f(r)`; `f` is bounded by 1 and has no poles, so only `log+ |f|` enters.
pub fn nevanlinna_t(f: &HInftyFunction, r: f64, quad_n: usize) -> Result<NevanlinnaReport> {
    let delta = radius_gap(r)?;
    let (value, err) = circle_mean(f, delta, quad_n, |l| l.max(0.0))?;
    Ok(NevanlinnaReport {
        r,
        value,
        error_estimate: err,
        quad_n,
    })
}

/// `T_{1/f}(r)` for a finite Blaschke product: `mean(-log |f|) + sum_{|a|<r} log(r/|a|)`.
pub fn nevanlinna_t_reciprocal(f: &HInftyFunction, r: f64, quad_n: usize) -> Result<NevanlinnaReport> {
    let zeros = f.blaschke_zeros()?;
    let mut delta = radius_gap(r)?;
    if zeros.iter().any(|z| z.point.delta() == 1.0) {
        return Err(Error::Domain("zero at the origin".into()));
    }
    // keep the circle off the zeros
    while zeros.iter().any(|z| z.point.delta() == delta) {
        delta = delta.next_up();
    }
    let (mean, err) = circle_mean(f, delta, quad_n, |l| -l)?;
    let ln_r = (-delta).ln_1p();
    let mut poles = NeumaierSum::new();
    for z in zeros {
        if z.point.delta() > delta {
            poles.add(z.multiplicity as f64 * (ln_r - (-z.point.delta()).ln_1p()));
        }
    }
    Ok(NevanlinnaReport {
        r: 1.0 - delta,
        value: mean + poles.value(),
        error_estimate: err,
        quad_n,
    })
}

/// A set `E` for the measure `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EtaRegion {
    Disk { center_re: f64, center_im: f64, radius: f64 },
    ClosedUnitDisk,
}

impl EtaRegion {
    pub fn contains(&self, p: &DiskPoint) -> bool {
        match self {
            EtaRegion::Disk {
                center_re,
                center_im,
                radius,
            } => {
                let (x, y) = p.to_cartesian();
                (x - center_re).hypot(y - center_im) <= *radius
            }
            EtaRegion::ClosedUnitDisk => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaReport {
    pub value: f64,
    /// Radial boundary contribution; zero for finite Blaschke products.
    pub boundary_term: f64,
    pub zeros_in_region: u64,
}

/// `eta(E) = sum_{a in E} log(1/|a|)` for a finite Blaschke product.
pub fn eta_measure(f: &HInftyFunction, region: &EtaRegion) -> Result<EtaReport> {
    if let EtaRegion::Disk { radius, .. } = region {
        if !(*radius >= 0.0) {
            return Err(Error::InvalidParameter(format!("radius {radius} must be >= 0")));
        }
    }
    let zeros = f.blaschke_zeros()?;
    let mut s = NeumaierSum::new();
    let mut n = 0;
    for z in zeros.iter().filter(|z| region.contains(&z.point)) {
        s.add(-(z.multiplicity as f64) * (-z.point.delta()).ln_1p());
        n += z.multiplicity as u64;
    }
    Ok(EtaReport {
        value: s.value(),
        boundary_term: 0.0,
        zeros_in_region: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::pseudo_distance;

    fn pt(d: f64, a: f64) -> DiskPoint {
        DiskPoint::new(d, a).unwrap()
    }

    fn circle(m: u32) -> Vec<DiskPoint> {
        (0..1u64 << m).map(|j| DiskPoint::full_circle(m, j).unwrap()).collect()
    }

    #[test]
    fn log_modulus_basics() {
        let a = pt(0.3, 1.0);
        let z = pt(0.6, 2.0);
        assert_eq!(eval_log_modulus(&HInftyFunction::one(), &z), 0.0);
        let b = HInftyFunction::blaschke_factor(a);
        assert_eq!(eval_log_modulus(&b, &a), f64::NEG_INFINITY);
        assert_eq!(eval_log_modulus(&b, &z), ln_pseudo_distance(&a, &z));
        let p3 = HInftyFunction::power(b.clone(), 3).unwrap();
        assert!((eval_log_modulus(&p3, &z) - 3.0 * pseudo_distance(&a, &z).ln()).abs() < 1e-14);
        let zero = HInftyFunction::product(vec![b, HInftyFunction::constant(0.0, 0.0).unwrap()]);
        assert!(zero.is_identically_zero());
        assert_eq!(eval_log_modulus(&zero, &z), f64::NEG_INFINITY);
        assert!(HInftyFunction::constant(0.8, 0.7).is_err());
    }

    #[test]
    fn spec_round_trip() {
        for s in [
            "const:0.5,-0.25",
            "blaschke:[0.5,1;0.25,3,2]",
            "pow:blaschke:[0.5,0]^3",
            "prod:[const:1,0;pow:prod:[blaschke:[0.1,0.2;0.3,0.4];const:0.5,0]^2]",
        ] {
            let f = HInftyFunction::parse(s).unwrap();
            assert_eq!(HInftyFunction::parse(&f.to_spec()).unwrap(), f, "{s}");
        }
        assert!(HInftyFunction::parse("pow:const:1,0^0").is_err());
        assert!(HInftyFunction::parse("nope").is_err());
        let f = zeros_from_json(r#"[{"delta":0.5,"angle":0},{"delta":0.25,"angle":1,"multiplicity":2}]"#).unwrap();
        assert_eq!(f.blaschke_zeros().unwrap()[1].multiplicity, 2);
        assert!(matches!(
            zeros_from_json(r#"[{"delta":2,"angle":0}]"#),
            Err(Error::Format { field, .. }) if field == "zeros[0].delta/angle"
        ));
    }

    #[test]
    fn summatory_full_circle_level_is_exact() {
        let theta = ThetaSpec::log_l(-2.0).unwrap();
        for m in [3u32, 7, 10] {
            let seq = PointSequence::new(circle(m));
            let r = summatory_theta(&HInftyFunction::one(), &theta, &seq).unwrap();
            let want = (m as f64 * LN_2 + theta.ln_rho_level(m).unwrap()).exp();
            assert!((r.per_annulus[&m] - want).abs() <= 1e-12 * want);
            assert_eq!(r.running.last().unwrap().0, seq.len());
        }
    }

    #[test]
    fn summatory_power_matches_direct_arithmetic() {
        let theta = ThetaSpec::constant(1.0).unwrap();
        let a = pt(0.4, 0.3);
        let pts: Vec<DiskPoint> = (0..5).map(|k| pt(0.1 + 0.15 * k as f64, k as f64)).collect();
        let f = HInftyFunction::power(HInftyFunction::blaschke_factor(a), 3).unwrap();
        let r = summatory_theta(&f, &theta, &PointSequence::new(pts.clone())).unwrap();
        let want: f64 = pts
            .iter()
            .map(|p| p.delta() * 1f64.exp() * pseudo_distance(&a, p).powi(3))
            .sum();
        assert!((r.total - want).abs() < 1e-14 * want);
        let killer = HInftyFunction::blaschke(pts.clone());
        let r = summatory_theta(&killer, &theta, &PointSequence::new(pts)).unwrap();
        assert_eq!((r.total, r.zero_terms), (0.0, 5));
    }

    #[test]
    fn filter_transform_cases() {
        let theta = ThetaSpec::constant(2.0).unwrap();
        let pts: Vec<DiskPoint> = (0..10).map(|k| pt(0.05 + 0.09 * k as f64, 0.6 * k as f64)).collect();
        let seq = PointSequence::new(pts.clone());
        let r = blaschke_filter_transform(&HInftyFunction::one(), &theta, &seq).unwrap();
        assert_eq!(r.remainder.len(), 10);
        assert!(r.all_ok() && r.certificate.iter().all(|c| c.lhs == f64::NEG_INFINITY));

        let a = pt(0.5, 0.5);
        let b = HInftyFunction::blaschke_factor(a);
        let r = blaschke_filter_transform(&b, &theta, &seq).unwrap();
        let brute: Vec<usize> = (0..10).filter(|&k| pseudo_distance(&a, &pts[k]) > (-2f64).exp()).collect();
        assert_eq!(r.remainder, brute);
        assert!(r.all_ok());

        let tiny = HInftyFunction::constant(1e-3, 0.0).unwrap();
        let r = blaschke_filter_transform(&tiny, &theta, &seq).unwrap();
        assert!(r.remainder.is_empty() && r.f1 == tiny && r.all_ok());
    }

    #[test]
    fn power_trick_exponents() {
        assert_eq!(power_trick_exponent(1.0).unwrap(), 4);
        assert_eq!(power_trick_exponent(1e12).unwrap(), 2);
        assert_eq!(power_trick_exponent(0.5).unwrap(), 6);
        assert!(power_trick_exponent(0.0).is_err());
        assert!(power_trick_exponent(-1.0).is_err());
    }

    #[test]
    fn power_trick_runs_on_filtered_witness() {
        let theta = ThetaSpec::log_power(2.0, 0.0, 1.0).unwrap();
        let pts: Vec<DiskPoint> = (3..9).flat_map(circle).collect();
        let seq = PointSequence::new(pts);
        let fr = blaschke_filter_transform(&HInftyFunction::constant(0.5, 0.0).unwrap(), &theta, &seq).unwrap();
        let rep = power_trick(&fr.f1, &theta, &seq, &fr.certificate, 1.0, 40).unwrap();
        assert_eq!(rep.m, 4);
        assert!(rep.tail_bound.is_finite() && rep.l_lower_validated);
        let bad = vec![fr.certificate[0]; seq.len()];
        assert!(power_trick(&fr.f1, &theta, &seq, &bad, 1.0, 40).is_err());
    }

    #[test]
    fn exceptional_indices_cases() {
        let pts: Vec<DiskPoint> = (1..6).flat_map(circle).collect();
        let seq = PointSequence::new(pts);
        let r = exceptional_indices(&HInftyFunction::one(), &seq, 1.0, ExceptionalScale::DyadicGap).unwrap();
        assert!(r.j.is_empty() && r.excluded_density == 0.0);
        // zeros at every point of level 3
        let f = HInftyFunction::blaschke(circle(3));
        let r = exceptional_indices(&f, &seq, 1e6, ExceptionalScale::DyadicGap).unwrap();
        assert_eq!(r.j, BTreeSet::from([3]));
        assert_eq!(r.excluded_density, 1.0);
        let r = exceptional_indices(&f, &seq, 1.0, ExceptionalScale::MeanSpacing).unwrap();
        assert_eq!(r.skipped, vec![1, 2]);
    }

    #[test]
    fn nevanlinna_and_eta() {
        let a = pt(1.0 - (-1f64).exp(), 0.7);
        let f = HInftyFunction::FiniteBlaschke {
            zeros: vec![BlaschkeZero {
                point: a,
                multiplicity: 3,
            }],
        };
        let eta = eta_measure(&f, &EtaRegion::ClosedUnitDisk).unwrap();
        assert!((eta.value - 3.0).abs() < 1e-14);
        let t = nevanlinna_t_reciprocal(&f, 1.0 - pow2_neg(20), 1 << 12).unwrap();
        assert!((t.value - 3.0).abs() < 1e-8, "{t:?}");
        assert_eq!(nevanlinna_t(&f, 0.5, 64).unwrap().value, 0.0);
        let outside = EtaRegion::Disk {
            center_re: -0.5,
            center_im: 0.0,
            radius: 0.1,
        };
        assert_eq!(eta_measure(&f, &outside).unwrap().value, 0.0);
        let origin = HInftyFunction::blaschke_factor(DiskPoint::origin());
        assert!(nevanlinna_t_reciprocal(&origin, 0.5, 64).is_err());
        assert!(nevanlinna_t(&f, 1.0, 64).is_err());
        assert!(eta_measure(&HInftyFunction::one(), &EtaRegion::ClosedUnitDisk).is_err());
    }

    #[test]
    fn certificate_json_keeps_neg_infinity() {
        let c = CertEntry {
            k: 0,
            delta: 0.5,
            lhs: f64::NEG_INFINITY,
            rhs: -1.0,
            ok: true,
        };
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"-inf\""));
        assert_eq!(serde_json::from_str::<CertEntry>(&s).unwrap(), c);
    }
}
