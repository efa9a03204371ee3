//! File formats: sequence JSON, profile CSV, weight tables.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::count::Count;
use crate::geometry::{AnnulusProfile, DiskPoint, GenTag, PointSequence};
use crate::{Error, Result};

pub const SEQUENCE_FORMAT: &str = "thinlab-seq/1";

#[derive(Serialize, Deserialize)]
struct RawPoint {
    delta: f64,
    angle: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gen: Option<GenTag>,
}

#[derive(Serialize, Deserialize)]
struct RawSequence {
    format: String,
    points: Vec<RawPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    claimed_separation: Option<f64>,
}

pub fn sequence_to_json(seq: &PointSequence) -> String {
    let raw = RawSequence {
        format: SEQUENCE_FORMAT.to_string(),
        points: seq
            .points
            .iter()
            .map(|p| RawPoint {
                delta: p.delta(),
                angle: p.angle(),
                gen: p.gen(),
            })
            .collect(),
        claimed_separation: seq.claimed_separation,
    };
    serde_json::to_string(&raw).expect("plain data serializes")
}

/// Parse and validate a sequence file; errors name the offending field.
pub fn sequence_from_json(text: &str) -> Result<PointSequence> {
    let raw: RawSequence =
        serde_json::from_str(text).map_err(|e| Error::format("sequence", e.to_string()))?;
    if raw.format != SEQUENCE_FORMAT {
        return Err(Error::format(
            "format",
            format!("expected '{SEQUENCE_FORMAT}', found '{}'", raw.format),
        ));
    }
    let mut points = Vec::with_capacity(raw.points.len());
    for (k, rp) in raw.points.into_iter().enumerate() {
        let p = DiskPoint::new(rp.delta, rp.angle)
            .map_err(|e| Error::format(format!("points[{k}].delta/angle"), e.to_string()))?;
        let p = match rp.gen {
            Some(g) => p
                .with_gen(g)
                .map_err(|e| Error::format(format!("points[{k}].gen"), e.to_string()))?,
            None => p,
        };
        points.push(p);
    }
    if let Some(c) = raw.claimed_separation {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::format("claimed_separation", format!("{c} outside (0, 1)")));
        }
    }
    Ok(PointSequence {
        points,
        claimed_separation: raw.claimed_separation,
    })
}

pub fn load_sequence(path: &Path) -> Result<PointSequence> {
    sequence_from_json(&std::fs::read_to_string(path)?)
}

pub fn save_sequence(path: &Path, seq: &PointSequence) -> Result<()> {
    std::fs::write(path, sequence_to_json(seq))?;
    Ok(())
}

/// One row of a profile CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub count: Count,
    pub dbar: Option<f64>,
}

fn count_field(c: &Count) -> String {
    match c {
        Count::Exact { value } => match value.to_biguint() {
            Some(n) => n.to_string(),
            None => value.to_f64().to_string(),
        },
        Count::Approx { ln } => format!("e^{ln}"),
    }
}

fn parse_count_field(s: &str) -> Result<Count> {
    if let Some(ln) = s.strip_prefix("e^") {
        let ln: f64 = ln.parse().map_err(|e| Error::format("N_m", format!("'{s}': {e}")))?;
        return Ok(Count::Approx { ln });
    }
    if let Ok(n) = s.parse::<u64>() {
        return Ok(Count::exact(n));
    }
    let n: num_bigint::BigUint = s
        .parse()
        .map_err(|e| Error::format("N_m", format!("'{s}': {e}")))?;
    // exact when the count is a dyadic with a 64-bit mantissa
    let bits = n.bits();
    let shift = bits.saturating_sub(64);
    let mant = &n >> shift;
    let mant = u64::try_from(mant).expect("fits in 64 bits");
    let d = crate::count::Dyadic::new(mant, shift as i64);
    if d.to_biguint().as_ref() == Some(&n) {
        Ok(Count::from_dyadic(d))
    } else {
        Ok(Count::Approx { ln: d.ln() })
    }
}

/// Profile CSV with header `m,N_m,dbar_m,l_m`; `dbar_m` empty when absent.
pub fn profile_rows_to_csv(rows: &BTreeMap<u32, ProfileRow>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["m", "N_m", "dbar_m", "l_m"]).unwrap();
    for (m, r) in rows {
        w.write_record([
            m.to_string(),
            count_field(&r.count),
            r.dbar.map(|d| d.to_string()).unwrap_or_default(),
            r.count.density(*m).to_string(),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

pub fn profile_to_rows(profile: &AnnulusProfile) -> BTreeMap<u32, ProfileRow> {
    profile
        .levels
        .iter()
        .map(|(&m, r)| {
            (
                m,
                ProfileRow {
                    count: Count::exact(r.count),
                    dbar: r.dbar,
                },
            )
        })
        .collect()
}

pub fn profile_to_csv(profile: &AnnulusProfile) -> String {
    profile_rows_to_csv(&profile_to_rows(profile))
}

pub fn profile_from_csv(text: &str) -> Result<BTreeMap<u32, ProfileRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| Error::format("header", e.to_string()))?.clone();
    let expected = ["m", "N_m", "dbar_m", "l_m"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::format("header", format!("expected {}", expected.join(","))));
    }
    let mut rows = BTreeMap::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(format!("row {}", line + 1), e.to_string()))?;
        let m: u32 = rec[0]
            .parse()
            .map_err(|e| Error::format(format!("row {}: m", line + 1), format!("{e}")))?;
        let count = parse_count_field(&rec[1])?;
        let dbar = if rec[2].is_empty() {
            None
        } else {
            Some(
                rec[2]
                    .parse::<f64>()
                    .map_err(|e| Error::format(format!("row {}: dbar_m", line + 1), format!("{e}")))?,
            )
        };
        rows.insert(m, ProfileRow { count, dbar });
    }
    Ok(rows)
}

/// Rows `m,theta_value`, with or without a header line.
pub fn parse_theta_table(text: &str) -> Result<BTreeMap<u32, f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = BTreeMap::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(format!("table row {}", line + 1), e.to_string()))?;
        if rec.len() != 2 {
            return Err(Error::format(
                format!("table row {}", line + 1),
                "expected two columns m,theta_value",
            ));
        }
        let m = match rec[0].parse::<u32>() {
            Ok(m) => m,
            Err(_) if line == 0 => continue,
            Err(e) => return Err(Error::format(format!("table row {}: m", line + 1), e.to_string())),
        };
        let v: f64 = rec[1]
            .parse()
            .map_err(|e| Error::format(format!("table row {}: theta_value", line + 1), format!("{e}")))?;
        if out.insert(m, v).is_some() {
            return Err(Error::format(format!("table row {}", line + 1), format!("duplicate m={m}")));
        }
    }
    Ok(out)
}

pub fn read_theta_table(path: &Path) -> Result<BTreeMap<u32, f64>> {
    parse_theta_table(&std::fs::read_to_string(path)?)
}

fn dyadic_field(d: &crate::count::Dyadic) -> String {
    // exact decimals up to 2^1024; beyond that the mantissa/exponent form
    if d.exponent() <= 1024 {
        if let Some(n) = d.to_biguint() {
            return n.to_string();
        }
    }
    format!("{}*2^{}", d.mantissa(), d.exponent())
}

#[derive(Serialize)]
struct RawIndexSet<'a> {
    format_version: &'static str,
    #[serde(rename = "L")]
    levels: &'a [u32],
    #[serde(rename = "N")]
    counts: BTreeMap<u32, String>,
    eps: &'a BTreeMap<u32, f64>,
    blocks: &'a [(u32, u32)],
    pruned: &'a [u32],
    provenance: &'a crate::constructions::Provenance,
}

pub const INDEX_SET_FORMAT: &str = "thinlab-index-set/1";

/// Index set JSON `{"L", "N", "eps", "provenance", ...}`; counts as exact decimal strings.
pub fn index_set_to_json(set: &crate::constructions::IndexSetWithCounts) -> String {
    let raw = RawIndexSet {
        format_version: INDEX_SET_FORMAT,
        levels: &set.levels,
        counts: set.counts.iter().map(|(&m, d)| (m, dyadic_field(d))).collect(),
        eps: &set.eps,
        blocks: &set.blocks,
        pruned: &set.pruned,
        provenance: &set.provenance,
    };
    serde_json::to_string(&raw).expect("plain data serializes")
}
