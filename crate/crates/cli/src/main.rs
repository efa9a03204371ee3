//! `thinlab`: weight classification, sequence generation and analysis,
//! witness verification.
//!
//! Exit codes: 0 decided, 2 undecided, 1 error.

mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use thinlab_core::classifier::{
    classify_sequence, compare_weight_classes, default_candidates, weight_regime, ClassOutcome, ClassifyOptions,
    PlanArtifacts, Regime, SequenceDecision, SequenceSource,
};
use thinlab_core::constructions::{
    build_index_set_and_counts, example_profile, full_circle_sequence, small_rho_counterexample,
    spaced_circle_sequence, GrowthFactor, SpacedLevel,
};
use thinlab_core::count::Count;
use thinlab_core::geometry::{blaschke_sum, build_profile, separation_constant};
use thinlab_core::io::{
    index_set_to_json, load_sequence, profile_from_csv, profile_rows_to_csv, profile_to_csv,
    sequence_to_json, ProfileRow,
};
use thinlab_core::series::{criterion_exponential_sum, CountSource, GapScale, SeriesVerdict};
use thinlab_core::weights::{RhoSpec, ThetaSpec};
use thinlab_core::witnesses::{blaschke_filter_transform, summatory_theta, HInftyFunction};

use report::{emit, write_artifact, Format, PlotBlock, Report};

#[derive(Parser)]
#[command(name = "thinlab", version, about = "Thin and thick separated sequences in the unit disk")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Weight-level questions.
    #[command(subcommand)]
    Weights(WeightsCmd),
    /// Sequence generation, analysis and classification.
    #[command(subcommand)]
    Seq(SeqCmd),
    /// Witness functions.
    #[command(subcommand)]
    Witness(WitnessCmd),
    /// End-to-end demonstrations.
    #[command(subcommand)]
    Demo(DemoCmd),
}

#[derive(Args)]
struct Out {
    /// Write the report here instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum WeightsCmd {
    /// Regime of a weight: all-thick side, all-thin side or mixed.
    Classify {
        /// `logpow:c,alpha,beta`, `const:c`, `logl:c` or `table:@file.csv`.
        #[arg(long)]
        theta: String,
        #[arg(long, default_value_t = 1_000_000)]
        horizon: u64,
        /// Assert `rho` nondecreasing (checked on the dyadic samples).
        #[arg(long)]
        rho_nondecreasing: bool,
        /// Assert `rho(t) <= C t` (checked on the dyadic samples).
        #[arg(long)]
        rho_dominated: Option<f64>,
        #[command(flatten)]
        out: Out,
    },
    /// Whether two weights define the same class.
    Compare {
        #[arg(long)]
        theta1: String,
        #[arg(long)]
        theta2: String,
        #[arg(long, default_value_t = 1_000_000)]
        horizon: u64,
        #[command(flatten)]
        out: Out,
    },
}

#[derive(Subcommand)]
enum SeqCmd {
    /// Generate a sequence, profile or index set.
    #[command(subcommand)]
    Generate(GenerateCmd),
    /// Profile, separation constant and Blaschke sum of a sequence file.
    Analyze {
        file: PathBuf,
        #[command(flatten)]
        out: Out,
    },
    /// Thin/thick evidence for a sequence, profile or sequence family.
    Classify {
        /// Sequence file.
        file: Option<PathBuf>,
        /// Profile CSV instead of a sequence file.
        #[arg(long, conflicts_with = "file")]
        profile: Option<PathBuf>,
        /// Full circles on every level `m >= M`.
        #[arg(long, conflicts_with_all = ["file", "profile"])]
        full_circles_from: Option<u32>,
        /// Formula profile with growth `logm` or `const:p`.
        #[arg(long, conflicts_with_all = ["file", "profile", "full_circles_from"])]
        example: Option<String>,
        #[arg(long)]
        theta: String,
        /// Comma-separated gamma grid.
        #[arg(long, default_value = "1,10,100")]
        gamma: String,
        /// Witness candidate spec; repeatable.
        #[arg(long)]
        witness: Vec<String>,
        /// Add the built-in candidate family.
        #[arg(long)]
        default_candidates: bool,
        #[arg(long, default_value_t = 1_000_000)]
        horizon: u64,
        #[command(flatten)]
        out: Out,
    },
}

#[derive(Subcommand)]
enum GenerateCmd {
    /// `z_{m,j} = (1 - 2^-m) exp(2 pi i j 2^-m)` on a range of levels.
    FullCircles {
        /// Inclusive range `a..b`.
        #[arg(long)]
        levels: String,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Equally spaced points; one `--level m:count:spacing` per circle.
    SpacedCircles {
        #[arg(long = "level", required = true)]
        levels: Vec<String>,
        /// Require `2^-m <= spacing <= 1`.
        #[arg(long)]
        mean_spacing: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Formula profile `N_m = p_m 2^m / (theta(2^-m) + log m)` as CSV.
    ExampleProfile {
        #[arg(long)]
        theta: String,
        /// `logm` or `const:p`.
        #[arg(long)]
        growth: String,
        #[arg(long)]
        levels: String,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Non-Blaschke full-circle sequence for a weight with `liminf rho(t)/t = 0`.
    Counterexample {
        #[arg(long)]
        theta: String,
        #[arg(long, default_value_t = 8)]
        j_max: u32,
        #[arg(long, default_value_t = 4096)]
        horizon: u32,
        #[arg(long, default_value_t = 16)]
        materialize: u32,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Index set with counts for a weight whose thin-existence series diverges.
    IndexSet {
        #[arg(long)]
        theta2: String,
        #[arg(long, default_value_t = 10_000)]
        m_max: u32,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Subcommand)]
enum WitnessCmd {
    /// Summatory functional of a witness, optionally with the filter certificate.
    Verify {
        #[arg(long)]
        witness: String,
        #[arg(long)]
        theta: String,
        #[arg(long)]
        seq: PathBuf,
        /// Apply the Blaschke filter transform and certify the decay bound.
        #[arg(long)]
        filter: bool,
        /// Write the certificate list here.
        #[arg(long)]
        certificate: Option<PathBuf>,
        #[command(flatten)]
        out: Out,
    },
}

#[derive(Subcommand)]
enum DemoCmd {
    /// Different-class pipeline: index set, spaced circles, sums for both weights.
    ThmEquiv {
        #[arg(long)]
        theta1: String,
        #[arg(long)]
        theta2: String,
        #[arg(long, default_value_t = 2000)]
        m_max: u32,
        #[arg(long, default_value_t = 14)]
        materialize: u32,
        #[arg(long, default_value_t = 1_000_000)]
        horizon: u64,
        #[command(flatten)]
        out: Out,
    },
}

fn point_budget() -> Result<usize> {
    match std::env::var("THINLAB_POINT_BUDGET") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|e| anyhow!("THINLAB_POINT_BUDGET='{v}': {e}")),
        Err(_) => Ok(thinlab_core::DEFAULT_POINT_BUDGET),
    }
}

fn theta(s: &str) -> Result<ThetaSpec> {
    ThetaSpec::parse(s).with_context(|| format!("bad weight spec '{s}'"))
}

/// `a..b`, inclusive.
fn level_range(s: &str) -> Result<(u32, u32)> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| anyhow!("levels '{s}' must look like a..b"))?;
    let a: u32 = a.trim().parse().with_context(|| format!("levels '{s}'"))?;
    let b: u32 = b.trim().trim_start_matches('=').parse().with_context(|| format!("levels '{s}'"))?;
    if a > b {
        bail!("levels '{s}': empty range");
    }
    Ok((a, b))
}

fn growth(s: &str) -> Result<GrowthFactor> {
    if s == "logm" {
        return Ok(GrowthFactor::LogM);
    }
    let p = s
        .strip_prefix("const:")
        .ok_or_else(|| anyhow!("growth '{s}' must be 'logm' or 'const:p'"))?;
    let p: f64 = p.parse().with_context(|| format!("growth '{s}'"))?;
    if !(p > 0.0 && p.is_finite()) {
        bail!("growth constant {p} must be positive");
    }
    Ok(GrowthFactor::Constant(p))
}

fn gamma_grid(s: &str) -> Result<Vec<f64>> {
    let v = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().with_context(|| format!("gamma '{x}'")))
        .collect::<Result<Vec<_>>>()?;
    if v.is_empty() || v.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
        bail!("gamma grid values must be positive");
    }
    Ok(v)
}

fn trajectory(name: &str, v: &SeriesVerdict) -> PlotBlock {
    PlotBlock::new(name, v.trajectory.iter().map(|&(m, s)| (m as f64, s)))
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

fn run(cli: Cli) -> Result<i32> {
    let format = cli.format;
    match cli.command {
        Command::Weights(WeightsCmd::Classify {
            theta: spec,
            horizon,
            rho_nondecreasing,
            rho_dominated,
            out,
        }) => {
            let th = theta(&spec)?;
            let h32 = horizon.min(u32::MAX as u64) as u32;
            let rho = if rho_nondecreasing || rho_dominated.is_some() {
                RhoSpec::with_flags(th.clone(), rho_nondecreasing, rho_dominated, h32.min(1 << 20))?
            } else {
                RhoSpec::infer(th.clone(), h32.min(1 << 20))
            };
            let v = weight_regime(&th, &rho, horizon);
            let mut r = Report::new("weights classify", v.regime != Regime::Undecided, to_value(&v));
            if let Some(t) = &v.thin {
                r = r.plot(trajectory("thin_existence_partial_sums", t));
            }
            if let Some(t) = &v.thick {
                r = r.plot(trajectory("thick_existence_partial_sums", t));
            }
            emit(&r, format, out.output.as_deref())
        }
        Command::Weights(WeightsCmd::Compare {
            theta1,
            theta2,
            horizon,
            out,
        }) => {
            let c = compare_weight_classes(&theta(&theta1)?, &theta(&theta2)?, horizon);
            let r = Report::new("weights compare", c.outcome != ClassOutcome::Undecided, to_value(&c));
            emit(&r, format, out.output.as_deref())
        }
        Command::Seq(SeqCmd::Generate(g)) => generate(g, format),
        Command::Seq(SeqCmd::Analyze { file, out }) => {
            let seq = load_sequence(&file).with_context(|| format!("reading {}", file.display()))?;
            let profile = build_profile(&seq);
            let sep = separation_constant(&seq);
            let bs = blaschke_sum(&seq);
            let rows: Vec<Value> = profile
                .levels
                .iter()
                .map(|(m, rec)| json!({"m": m, "N_m": rec.count, "dbar_m": rec.dbar, "l_m": rec.density}))
                .collect();
            let result = json!({
                "n_points": seq.len(),
                "separation": sep,
                "claimed_separation": seq.claimed_separation,
                "blaschke_sum": bs,
                "profile": rows,
            });
            let decided = seq.claimed_separation.is_none_or(|c| sep.value >= c);
            let mut r = Report::new("seq analyze", decided, result)
                .plot(PlotBlock::new(
                    "density_l_m",
                    profile.levels.iter().map(|(&m, rec)| (m as f64, rec.density)),
                ))
                .plot(PlotBlock::new(
                    "blaschke_per_annulus",
                    bs.per_annulus.iter().map(|(&m, &s)| (m as f64, s)),
                ));
            r.csv = Some(profile_to_csv(&profile));
            emit(&r, format, out.output.as_deref())
        }
        Command::Seq(SeqCmd::Classify {
            file,
            profile,
            full_circles_from,
            example,
            theta: spec,
            gamma,
            witness,
            default_candidates: defaults,
            horizon,
            out,
        }) => {
            let th = theta(&spec)?;
            let mut candidates = witness
                .iter()
                .map(|w| HInftyFunction::parse(w).with_context(|| format!("witness '{w}'")))
                .collect::<Result<Vec<_>>>()?;
            if defaults {
                candidates.extend(default_candidates());
            }
            let options = ClassifyOptions {
                gamma_grid: gamma_grid(&gamma)?,
                witness_candidates: candidates,
                horizon,
            };
            let seq;
            let rows: BTreeMap<u32, ProfileRow>;
            let counts: BTreeMap<u32, Count>;
            let dbar: BTreeMap<u32, f64>;
            let source = if let Some(f) = &file {
                seq = load_sequence(f).with_context(|| format!("reading {}", f.display()))?;
                SequenceSource::Points(&seq)
            } else if let Some(p) = &profile {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                rows = profile_from_csv(&text)?;
                counts = rows.iter().map(|(&m, r)| (m, r.count)).collect();
                dbar = rows.iter().filter_map(|(&m, r)| r.dbar.map(|d| (m, d))).collect();
                SequenceSource::Profile {
                    counts: &counts,
                    dbar: (!dbar.is_empty()).then_some(&dbar),
                }
            } else if let Some(from) = full_circles_from {
                SequenceSource::FullCircles { from }
            } else if let Some(g) = &example {
                SequenceSource::Example { growth: growth(g)? }
            } else {
                bail!("give a sequence file, --profile, --full-circles-from or --example");
            };
            let v = classify_sequence(source, &th, &options)?;
            let mut r = Report::new("seq classify", v.decision != SequenceDecision::Undecided, to_value(&v));
            if let Some(s) = &v.evidence.dyadic_gap_sum {
                if s.gamma_grid.is_empty() {
                    r = r.plot(trajectory("dyadic_gap_sum", s));
                }
                for g in &s.gamma_grid {
                    r = r.plot(PlotBlock::new(
                        format!("dyadic_gap_sum_gamma_{}", g.gamma),
                        g.trajectory.iter().map(|&(m, s)| (m as f64, s)),
                    ));
                }
            }
            if let Some(w) = v.evidence.witness.as_ref().and_then(|w| w.summatory.as_ref()) {
                r = r.plot(PlotBlock::new(
                    "witness_running_sum",
                    w.running.iter().map(|&(k, s)| (k as f64, s)),
                ));
            }
            emit(&r, format, out.output.as_deref())
        }
        Command::Witness(WitnessCmd::Verify {
            witness,
            theta: spec,
            seq,
            filter,
            certificate,
            out,
        }) => {
            let th = theta(&spec)?;
            let f = HInftyFunction::parse(&witness).with_context(|| format!("witness '{witness}'"))?;
            let s = load_sequence(&seq).with_context(|| format!("reading {}", seq.display()))?;
            let sum = summatory_theta(&f, &th, &s)?;
            let mut result = json!({"witness": f.to_spec(), "summatory": sum});
            let mut ok = sum.total.is_finite();
            if filter {
                let fr = blaschke_filter_transform(&f, &th, &s)?;
                ok &= fr.all_ok();
                let f1_sum = summatory_theta(&fr.f1, &th, &s)?;
                if let Some(p) = &certificate {
                    write_artifact(p, &serde_json::to_string(&fr.certificate)?, "witness verify", "json")?;
                }
                result["filter"] = json!({
                    "f1": fr.f1.to_spec(),
                    "kept": fr.kept.len(),
                    "remainder": fr.remainder.len(),
                    "remainder_blaschke_sum": fr.remainder_blaschke_sum,
                    "certificate_ok": fr.all_ok(),
                    "f1_summatory_total": f1_sum.total,
                });
            }
            if !ok {
                bail!("witness verification failed");
            }
            let r = Report::new("witness verify", true, result).plot(PlotBlock::new(
                "running_sum",
                sum.running.iter().map(|&(k, v)| (k as f64, v)),
            ));
            emit(&r, format, out.output.as_deref())
        }
        Command::Demo(DemoCmd::ThmEquiv {
            theta1,
            theta2,
            m_max,
            materialize,
            horizon,
            out,
        }) => {
            let t1 = theta(&theta1)?;
            let t2 = theta(&theta2)?;
            let cmp = compare_weight_classes(&t1, &t2, horizon);
            let mut result = json!({"comparison": cmp});
            let mut r_plots = Vec::new();
            let decided = cmp.outcome != ClassOutcome::Undecided;
            if let Some(plan) = &cmp.plan {
                match plan.execute(m_max, materialize, point_budget()?)? {
                    PlanArtifacts::IndexSet { index_set, sequence } => {
                        let one = HInftyFunction::one();
                        let small = summatory_theta(&one, &plan.smaller, &sequence)?;
                        let large = summatory_theta(&one, &plan.larger, &sequence)?;
                        let counts = index_set.count_map();
                        let grid = [1.0, 10.0];
                        let rho1 = RhoSpec::infer(plan.larger.clone(), m_max);
                        let crit = criterion_exponential_sum(
                            CountSource::Finite(&counts),
                            &rho1,
                            &grid,
                            &GapScale::DyadicGap,
                            &BTreeSet::new(),
                            m_max as u64,
                        )?;
                        let cum = |rep: &thinlab_core::witnesses::SummatoryReport| {
                            let mut acc = 0.0;
                            rep.per_annulus
                                .iter()
                                .map(|(&m, &s)| {
                                    acc += s;
                                    (m as f64, acc)
                                })
                                .collect::<Vec<_>>()
                        };
                        r_plots.push(PlotBlock::new("smaller_weight_cumulative", cum(&small)));
                        r_plots.push(PlotBlock::new("larger_weight_cumulative", cum(&large)));
                        for g in &crit.gamma_grid {
                            r_plots.push(PlotBlock::new(
                                format!("larger_weight_exponential_sum_gamma_{}", g.gamma),
                                g.trajectory.iter().map(|&(m, s)| (m as f64, s)),
                            ));
                        }
                        result["index_set"] = json!({
                            "levels": index_set.levels.len(),
                            "first": index_set.levels.first(),
                            "last": index_set.levels.last(),
                            "eps_sums": index_set.eps_sums,
                        });
                        result["materialized_points"] = json!(sequence.len());
                        result["smaller_weight_sum"] = json!(small.total);
                        result["larger_weight_sum"] = json!(large.total);
                        result["larger_weight_exponential_sum"] = to_value(&crit);
                    }
                    PlanArtifacts::Blocks { subset, circles } => {
                        let one = HInftyFunction::one();
                        let small = summatory_theta(&one, &plan.smaller, &circles.sequence)?;
                        let large = summatory_theta(&one, &plan.larger, &circles.sequence)?;
                        result["block_subset"] = to_value(&subset);
                        result["materialized_points"] = json!(circles.sequence.len());
                        result["smaller_weight_sum"] = json!(small.total);
                        result["larger_weight_sum"] = json!(large.total);
                    }
                }
            }
            let mut r = Report::new("demo thm-equiv", decided, result);
            r.plots = r_plots;
            emit(&r, format, out.output.as_deref())
        }
    }
}

fn generate(g: GenerateCmd, format: Format) -> Result<i32> {
    let budget = point_budget()?;
    let (summary, command) = match g {
        GenerateCmd::FullCircles { levels, output } => {
            let (a, b) = level_range(&levels)?;
            let set: BTreeSet<u32> = (a..=b).collect();
            let cs = full_circle_sequence(&set, b, budget)?;
            write_artifact(&output, &sequence_to_json(&cs.sequence), "seq generate full-circles", "json")?;
            (
                json!({"output": output, "n_points": cs.sequence.len(), "levels": [a, b]}),
                "seq generate full-circles",
            )
        }
        GenerateCmd::SpacedCircles {
            levels,
            mean_spacing,
            output,
        } => {
            let mut spec = Vec::new();
            for l in &levels {
                let v: Vec<&str> = l.split(':').collect();
                if v.len() != 3 {
                    bail!("--level '{l}' must be m:count:spacing");
                }
                spec.push(SpacedLevel {
                    m: v[0].parse().with_context(|| format!("--level '{l}': m"))?,
                    count: v[1].parse().with_context(|| format!("--level '{l}': count"))?,
                    spacing: v[2].parse().with_context(|| format!("--level '{l}': spacing"))?,
                });
            }
            let seq = spaced_circle_sequence(&spec, mean_spacing, budget)?;
            write_artifact(&output, &sequence_to_json(&seq), "seq generate spaced-circles", "json")?;
            (json!({"output": output, "n_points": seq.len()}), "seq generate spaced-circles")
        }
        GenerateCmd::ExampleProfile {
            theta: spec,
            growth: gr,
            levels,
            output,
        } => {
            let (a, b) = level_range(&levels)?;
            if a == 0 {
                bail!("formula profiles start at level 1");
            }
            let p = example_profile(&theta(&spec)?, growth(&gr)?, a..=b)?;
            let rows: BTreeMap<u32, ProfileRow> = p
                .counts
                .iter()
                .map(|(&m, &count)| (m, ProfileRow { count, dbar: None }))
                .collect();
            write_artifact(&output, &profile_rows_to_csv(&rows), "seq generate example-profile", "csv")?;
            (
                json!({"output": output, "levels": [a, b], "rounding": p.rounding}),
                "seq generate example-profile",
            )
        }
        GenerateCmd::Counterexample {
            theta: spec,
            j_max,
            horizon,
            materialize,
            output,
        } => {
            let rho = RhoSpec::infer(theta(&spec)?, horizon);
            let c = small_rho_counterexample(&rho, j_max, horizon, materialize, budget)?;
            write_artifact(
                &output,
                &sequence_to_json(&c.circles.sequence),
                "seq generate counterexample",
                "json",
            )?;
            (
                json!({
                    "output": output,
                    "levels": c.levels,
                    "ratios": c.ratios,
                    "ratio_sum": c.ratio_sum,
                    "ratio_bound": c.ratio_bound,
                    "blaschke_sum": c.blaschke_sum,
                    "n_points": c.circles.sequence.len(),
                    "materialized_up_to": c.circles.materialized_up_to,
                }),
                "seq generate counterexample",
            )
        }
        GenerateCmd::IndexSet { theta2, m_max, output } => {
            let set = build_index_set_and_counts(&theta(&theta2)?, m_max)?;
            write_artifact(&output, &index_set_to_json(&set), "seq generate index-set", "json")?;
            (
                json!({"output": output, "levels": set.levels.len(), "pruned": set.pruned.len()}),
                "seq generate index-set",
            )
        }
    };
    emit(&Report::new(command, true, summary), format, None)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
