//! Unit-disk geometry on points stored by boundary gap.
//!
//! A point is kept as `(delta, angle)` with `delta = 1 - |z|`. Distances are
//! formed from the identities
//!
//! ```text
//! |z - w|^2     = (s - u)^2       + 4 (1-s)(1-u) sin^2(dphi/2)
//! |1 - conj(z)w|^2 = (s + u - su)^2 + 4 (1-s)(1-u) sin^2(dphi/2)
//! ```
//!
//! where `s`, `u` are the gaps. Neither side ever subtracts two numbers close
//! to one, so points at `delta = 2^-45` keep full relative precision.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::count::Count;
use crate::sum::{compensated_sum, NeumaierSum};
use crate::{Error, Result};

/// Generator coordinates of a constructed point: level `m`, slot `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenTag {
    pub m: u32,
    pub j: u64,
}

/// A point of the open unit disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskPoint {
    delta: f64,
    angle: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gen: Option<GenTag>,
}

fn reduce_angle(angle: f64) -> f64 {
    let a = angle.rem_euclid(TAU);
    if a >= TAU {
        0.0
    } else {
        a
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("boundary gap {delta} outside (0, 1]")))
    }
}

impl DiskPoint {
    pub fn new(delta: f64, angle: f64) -> Result<Self> {
        check_delta(delta)?;
        if !angle.is_finite() {
            return Err(Error::Domain(format!("angle {angle} is not finite")));
        }
        Ok(DiskPoint {
            delta,
            angle: reduce_angle(angle),
            gen: None,
        })
    }

    /// Point `j` of the full circle at level `m`: `(1 - 2^-m) exp(2 pi i j 2^-m)`.
    pub fn full_circle(m: u32, j: u64) -> Result<Self> {
        if m > 1000 {
            return Err(Error::Domain(format!("level {m} below float range")));
        }
        if m < 64 && j >= 1u64 << m {
            return Err(Error::Domain(format!("slot {j} out of range for level {m}")));
        }
        let delta = pow2_neg(m);
        let angle = TAU * (j as f64 * delta);
        Ok(DiskPoint {
            delta,
            angle: reduce_angle(angle),
            gen: Some(GenTag { m, j }),
        })
    }

    /// Build from Cartesian coordinates; loses relative precision of `delta`
    /// near the boundary, so constructions should prefer [`DiskPoint::new`].
    pub fn from_cartesian(re: f64, im: f64) -> Result<Self> {
        let r = re.hypot(im);
        if r >= 1.0 {
            return Err(Error::Domain(format!("|z| = {r} is not inside the disk")));
        }
        let delta = (1.0 - r * r) / (1.0 + r);
        DiskPoint::new(delta.min(1.0), im.atan2(re))
    }

    /// Attach generator coordinates, checking them against the stored values.
    pub fn with_gen(mut self, gen: GenTag) -> Result<Self> {
        self.gen = Some(gen);
        self.validate()?;
        Ok(self)
    }

    pub fn origin() -> Self {
        DiskPoint {
            delta: 1.0,
            angle: 0.0,
            gen: None,
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn gen(&self) -> Option<GenTag> {
        self.gen
    }

    pub fn modulus(&self) -> f64 {
        1.0 - self.delta
    }

    pub fn to_cartesian(&self) -> (f64, f64) {
        let r = 1.0 - self.delta;
        (r * self.angle.cos(), r * self.angle.sin())
    }

    /// Re-check the constructor invariants (used after deserialization).
    pub fn validate(&self) -> Result<()> {
        check_delta(self.delta)?;
        if !(self.angle >= 0.0 && self.angle < TAU) {
            return Err(Error::Domain(format!("angle {} not reduced to [0, 2pi)", self.angle)));
        }
        if let Some(g) = self.gen {
            let expected = DiskPoint::full_circle(g.m, g.j)?;
            if expected.delta != self.delta {
                return Err(Error::Domain(format!(
                    "generator tag m={} requires delta = 2^-{}",
                    g.m, g.m
                )));
            }
            let diff = (expected.angle - self.angle).abs();
            let ulp = f64::EPSILON * expected.angle.abs().max(f64::MIN_POSITIVE);
            if diff > ulp && (TAU - diff) > ulp {
                return Err(Error::Domain(format!(
                    "generator tag (m={}, j={}) disagrees with stored angle",
                    g.m, g.j
                )));
            }
        }
        Ok(())
    }
}

#[inline]
fn half_angle_sin2(a: f64, b: f64) -> f64 {
    let s = ((a - b) * 0.5).sin();
    s * s
}

/// Squared numerator and the positive gap `|1 - conj(z)w|^2 - |z - w|^2`.
#[inline]
fn distance_parts(s: f64, u: f64, sin2: f64) -> (f64, f64) {
    // canonical order keeps d(p, q) == d(q, p) bit for bit
    let (s, u) = if s <= u { (s, u) } else { (u, s) };
    let cross = 4.0 * (1.0 - s) * (1.0 - u) * sin2;
    let num = (s - u) * (s - u) + cross;
    let gap = s * u * (2.0 - s) * (2.0 - u);
    (num, gap)
}

/// `log d_G(p, q)`; `-inf` when the points coincide, always `< 0` otherwise.
pub fn ln_pseudo_distance(p: &DiskPoint, q: &DiskPoint) -> f64 {
    let (num, gap) = distance_parts(p.delta, q.delta, half_angle_sin2(p.angle, q.angle));
    if num == 0.0 {
        return f64::NEG_INFINITY;
    }
    -0.5 * (gap / num).ln_1p()
}

/// Pseudohyperbolic distance `|z - w| / |1 - conj(z) w|`.
pub fn pseudo_distance(p: &DiskPoint, q: &DiskPoint) -> f64 {
    let (num, gap) = distance_parts(p.delta, q.delta, half_angle_sin2(p.angle, q.angle));
    if num == 0.0 {
        return 0.0;
    }
    let d = (num / (num + gap)).sqrt();
    d.min(1.0 - f64::EPSILON / 2.0)
}

/// Euclidean (chordal) distance `|z - w|`.
pub fn euclidean_distance(p: &DiskPoint, q: &DiskPoint) -> f64 {
    let (num, _) = distance_parts(p.delta, q.delta, half_angle_sin2(p.angle, q.angle));
    num.sqrt()
}

/// `2^-m` exactly, including the subnormal range; 0 below it.
pub fn pow2_neg(m: u32) -> f64 {
    match m {
        0..=1022 => f64::from_bits((1023 - m as u64) << 52),
        1023..=1074 => f64::from_bits(1u64 << (1074 - m)),
        _ => 0.0,
    }
}

/// Level `m` of the dyadic annulus containing a gap `delta`:
/// the unique `m` with `2^-(m+1) < delta <= 2^-m`.
pub fn annulus_index_of_delta(delta: f64) -> Result<u32> {
    check_delta(delta)?;
    let mut x = delta;
    let mut shift = 0i64;
    if x < f64::MIN_POSITIVE {
        x *= 2f64.powi(64);
        shift = 64;
    }
    let bits = x.to_bits();
    let e = ((bits >> 52) & 0x7ff) as i64 - 1023 - shift;
    let exact_power = bits & ((1u64 << 52) - 1) == 0;
    let m = if exact_power { -e } else { -e - 1 };
    Ok(m as u32)
}

pub fn annulus_index(p: &DiskPoint) -> u32 {
    annulus_index_of_delta(p.delta).expect("DiskPoint invariant keeps delta in (0, 1]")
}

/// Finite ordered list of disk points.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointSequence {
    pub points: Vec<DiskPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claimed_separation: Option<f64>,
}

impl PointSequence {
    pub fn new(points: Vec<DiskPoint>) -> Self {
        PointSequence {
            points,
            claimed_separation: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Checks point invariants, pairwise distinctness and the claimed separation.
    pub fn validate(&self) -> Result<SeparationReport> {
        for p in &self.points {
            p.validate()?;
        }
        let rep = separation_constant(self);
        if !rep.separated {
            return Err(Error::Domain("sequence contains coincident points".into()));
        }
        if let Some(c) = self.claimed_separation {
            if !(c > 0.0 && c < 1.0) {
                return Err(Error::format("claimed_separation", format!("{c} outside (0, 1)")));
            }
            if rep.value < c {
                return Err(Error::Domain(format!(
                    "measured separation {} is below the claimed {}",
                    rep.value, c
                )));
            }
        }
        Ok(rep)
    }
}

/// Points of one annulus, sorted by angle.
struct AngularGroup {
    idx: Vec<usize>,
    angles: Vec<f64>,
    min_delta: f64,
    max_delta: f64,
}

fn group_by_annulus(points: &[DiskPoint]) -> BTreeMap<u32, AngularGroup> {
    let mut raw: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        raw.entry(annulus_index(p)).or_default().push(i);
    }
    raw.into_iter()
        .map(|(m, mut idx)| {
            idx.sort_by(|&a, &b| {
                points[a]
                    .angle
                    .total_cmp(&points[b].angle)
                    .then(a.cmp(&b))
            });
            let angles = idx.iter().map(|&i| points[i].angle).collect();
            let min_delta = idx.iter().map(|&i| points[i].delta).fold(f64::INFINITY, f64::min);
            let max_delta = idx.iter().map(|&i| points[i].delta).fold(0.0, f64::max);
            (
                m,
                AngularGroup {
                    idx,
                    angles,
                    min_delta,
                    max_delta,
                },
            )
        })
        .collect()
}

/// Visit points of `group` in order of increasing angular distance from
/// `angle`, separately in both directions. `visit(slot, sin2)` returns `false`
/// to stop the current direction.
fn scan_angular(group: &AngularGroup, angle: f64, mut visit: impl FnMut(usize, f64) -> bool) {
    let n = group.idx.len();
    if n == 0 {
        return;
    }
    let start = group.angles.partition_point(|&a| a < angle);
    for step in 0..n {
        let k = (start + step) % n;
        let fwd = (group.angles[k] - angle).rem_euclid(TAU);
        if fwd > PI {
            break;
        }
        if !visit(k, half_angle_sin2(group.angles[k], angle)) {
            break;
        }
    }
    for step in 1..=n {
        let k = (start + n - step) % n;
        let bwd = (angle - group.angles[k]).rem_euclid(TAU);
        if bwd > PI || bwd == 0.0 && step > 1 && group.angles[k] == angle {
            // exact ties were already seen going forward
            if bwd > PI {
                break;
            }
            continue;
        }
        if !visit(k, half_angle_sin2(group.angles[k], angle)) {
            break;
        }
    }
}

/// Result of a separation computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    /// Minimum pairwise pseudohyperbolic distance (1 for fewer than two points).
    pub value: f64,
    /// `value > 0`.
    pub separated: bool,
    /// Indices of a pair attaining the minimum.
    pub pair: Option<(usize, usize)>,
}

/// Minimum pseudohyperbolic distance over distinct pairs.
///
/// Points are bucketed by annulus and sorted by angle; a pair of buckets is
/// skipped when the radial lower bound `|s-u| / (s+u-su)` already exceeds the
/// best distance found, and an angular scan stops once the angular lower bound
/// does. For circle-structured inputs this is near linear.
pub fn separation_constant(seq: &PointSequence) -> SeparationReport {
    let pts = &seq.points;
    if pts.len() < 2 {
        return SeparationReport {
            value: 1.0,
            separated: true,
            pair: None,
        };
    }
    let groups = group_by_annulus(pts);
    let keys: Vec<u32> = groups.keys().copied().collect();
    let mut best = 1.0f64;
    let mut best_pair = None;
    for gap in 0..keys.len() {
        for a in 0..keys.len() - gap {
            if best == 0.0 {
                break;
            }
            let (gp, gq) = (&groups[&keys[a]], &groups[&keys[a + gap]]);
            // gp is the coarser level (larger gaps)
            if gap > 0 {
                let s = gp.min_delta;
                let u = gq.max_delta;
                if s > u {
                    let radial = (s - u) / (s + u - s * u);
                    if radial >= best {
                        continue;
                    }
                }
            }
            for &i in &gp.idx {
                let p = &pts[i];
                let s = p.delta;
                let u_max = gq.max_delta;
                let b = {
                    let v = s + u_max - s * u_max;
                    v * v
                };
                let cross_coef = 4.0 * (1.0 - s) * (1.0 - u_max);
                scan_angular(gq, p.angle, |k, sin2| {
                    let x = cross_coef * sin2;
                    if x * (1.0 - best * best) >= best * best * b && best < 1.0 {
                        return false;
                    }
                    let j = gq.idx[k];
                    if j != i {
                        let d = pseudo_distance(p, &pts[j]);
                        if d < best {
                            best = d;
                            best_pair = Some((i.min(j), i.max(j)));
                        }
                    }
                    best > 0.0
                });
            }
        }
    }
    SeparationReport {
        value: best,
        separated: best > 0.0,
        pair: best_pair,
    }
}

/// Statistics of one dyadic annulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusRecord {
    /// `N_m`.
    pub count: u64,
    /// Sorted within-annulus Euclidean nearest-neighbour distances `d_{m,k}`.
    pub spacings: Vec<f64>,
    /// Mean of the `floor(N_m / 6)` smallest spacings; absent when `N_m < 6`.
    pub dbar: Option<f64>,
    /// `l_m = N_m 2^-m`.
    pub density: f64,
}

/// Per-level profile of a point sequence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnulusProfile {
    pub levels: BTreeMap<u32, AnnulusRecord>,
}

impl AnnulusProfile {
    pub fn total_count(&self) -> u64 {
        self.levels.values().map(|r| r.count).sum()
    }

    pub fn counts(&self) -> BTreeMap<u32, Count> {
        self.levels
            .iter()
            .map(|(&m, r)| (m, Count::exact(r.count)))
            .collect()
    }

    pub fn dbar_map(&self) -> BTreeMap<u32, f64> {
        self.levels
            .iter()
            .filter_map(|(&m, r)| r.dbar.map(|d| (m, d)))
            .collect()
    }

    pub fn get(&self, m: u32) -> Option<&AnnulusRecord> {
        self.levels.get(&m)
    }
}

/// Mean of the `floor(n/6)` smallest entries of a sorted spacing list.
pub fn trimmed_mean_spacing(sorted_spacings: &[f64], count: u64) -> Option<f64> {
    if count < 6 {
        return None;
    }
    let k = (count / 6) as usize;
    Some(compensated_sum(sorted_spacings[..k].iter().copied()) / k as f64)
}

/// Group points by annulus and compute counts, spacings, `dbar_m` and `l_m`.
pub fn build_profile(seq: &PointSequence) -> AnnulusProfile {
    let pts = &seq.points;
    let groups = group_by_annulus(pts);
    let mut levels = BTreeMap::new();
    for (m, g) in groups {
        let n = g.idx.len();
        let mut spacings = Vec::with_capacity(if n >= 2 { n } else { 0 });
        if n >= 2 {
            for &i in &g.idx {
                let p = &pts[i];
                let coef = 4.0 * (1.0 - p.delta) * (1.0 - g.max_delta);
                let mut best2 = f64::INFINITY;
                scan_angular(&g, p.angle, |k, sin2| {
                    if coef * sin2 >= best2 {
                        return false;
                    }
                    let j = g.idx[k];
                    if j != i {
                        let d = euclidean_distance(p, &pts[j]);
                        best2 = best2.min(d * d);
                    }
                    true
                });
                spacings.push(best2.sqrt());
            }
            spacings.sort_by(f64::total_cmp);
        }
        let count = n as u64;
        let dbar = trimmed_mean_spacing(&spacings, count);
        levels.insert(
            m,
            AnnulusRecord {
                count,
                spacings,
                dbar,
                density: count as f64 * 2f64.powi(-(m as i32)),
            },
        );
    }
    AnnulusProfile { levels }
}

/// Sum of boundary gaps, with the per-annulus breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlaschkeSum {
    pub total: f64,
    pub per_annulus: BTreeMap<u32, f64>,
}

pub fn blaschke_sum(seq: &PointSequence) -> BlaschkeSum {
    let mut total = NeumaierSum::new();
    let mut per: BTreeMap<u32, NeumaierSum> = BTreeMap::new();
    for p in &seq.points {
        total.add(p.delta);
        per.entry(annulus_index(p)).or_default().add(p.delta);
    }
    BlaschkeSum {
        total: total.value(),
        per_annulus: per.into_iter().map(|(m, s)| (m, s.value())).collect(),
    }
}
