use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;
use udisk::cuttings::{hierarchy, verify, CuttingConfig};
use udisk::engine::StaticUDRR;
use udisk::harness::*;

const EXIT_MISMATCH: u8 = 2;
const EXIT_VALIDATION: u8 = 3;

#[derive(Parser)]
#[command(name = "udisk", version, about = "Unit-disk range reporting and emptiness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the static engine over a point file and print its size.
    Build {
        #[arg(long)]
        points: PathBuf,
    },
    /// Replay a trace on one engine and write JSON-lines results.
    Trace {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "dynamic")]
        engine: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two result files; exits 2 at the first divergent op.
    Diff { a: PathBuf, b: PathBuf },
    /// Time static builds and measure per-op counters over a range of sizes.
    Bench {
        /// `2^10..2^16`, `2^12`, or a comma list such as `1024,4096`.
        #[arg(long, default_value = "2^10..2^14")]
        sizes: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        queries: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Build and check a cutting hierarchy over arcs given by their centers.
    VerifyCutting {
        #[arg(long)]
        arcs: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Generate a seeded workload trace.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value = "I:0.4,D:0.2,Q:0.2,E:0.2")]
        mix: String,
        #[arg(long, default_value = "uniform-square")]
        dist: String,
        #[arg(long, default_value_t = 10.0)]
        side: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_size(s: &str) -> Result<usize> {
    let s = s.trim();
    match s.split_once('^') {
        Some((b, e)) => {
            let (b, e): (usize, u32) = (b.parse()?, e.parse()?);
            b.checked_pow(e).context("size overflows")
        }
        None => Ok(s.parse()?),
    }
}

fn parse_sizes(s: &str) -> Result<Vec<usize>> {
    if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (parse_size(a)?, parse_size(b)?);
        if a == 0 || b < a {
            bail!("bad size range {s:?}");
        }
        let mut out = vec![a];
        while out.last().unwrap() * 2 <= b {
            out.push(out.last().unwrap() * 2);
        }
        return Ok(out);
    }
    s.split(',').map(parse_size).collect()
}

fn read(path: &PathBuf) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_out(path: &Option<PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.cmd {
        Cmd::Build { points } => {
            let pts = parse_points(&read(&points)?)?;
            let t0 = Instant::now();
            let s = StaticUDRR::build(&pts)?;
            let summary = serde_json::json!({
                "n": s.len(),
                "nonempty_cells": s.nonempty_cells(),
                "pieces": s.total_pieces(),
                "build_nanos": t0.elapsed().as_nanos() as u64,
            });
            println!("{summary}");
        }
        Cmd::Trace { input, engine, out } => {
            let trace: Trace = read(&input)?.parse()?;
            let r = replay(&trace, engine.parse()?)?;
            write_out(&out, &r.to_json_lines())?;
            log::info!("{} ops in {} ns, {} touched", r.results.len(), r.total_nanos, r.total_touched);
        }
        Cmd::Diff { a, b } => {
            let ra = parse_results(&read(&a)?)?;
            let rb = parse_results(&read(&b)?)?;
            let m = diff(&ra, &rb);
            if let Some(first) = m.first() {
                println!("first divergent op {}: {}", first.op_index, first.reason);
                println!("{} mismatches", m.len());
                return Ok(EXIT_MISMATCH);
            }
            println!("0 mismatches over {} ops", ra.len());
        }
        Cmd::Bench { sizes, seed, queries, csv } => {
            let mut text = format!("{}\n", BenchRow::CSV_HEADER);
            for n in parse_sizes(&sizes)? {
                for row in [bench_static(n, seed, queries)?, bench_dynamic(n, seed, queries)?] {
                    eprintln!("{}", row.csv());
                    text.push_str(&row.csv());
                    text.push('\n');
                }
            }
            write_out(&csv, &text)?;
        }
        Cmd::VerifyCutting { arcs, k, samples } => {
            if k == 0 {
                bail!("k must be positive");
            }
            let pts = parse_points(&read(&arcs)?)?;
            let gamma = arcs_of(&pts);
            let cfg = CuttingConfig::default();
            let h = match hierarchy(&gamma, k, &cfg) {
                Ok(h) => h,
                Err(e) => {
                    println!("{}", serde_json::json!({ "error": e.to_string() }));
                    return Ok(EXIT_VALIDATION);
                }
            };
            let mut ok = true;
            for (i, l) in h.levels.iter().enumerate() {
                let r = verify(&gamma, l, l.k, l.big_k, &cfg, samples);
                ok &= r.ok();
                let line = serde_json::json!({
                    "level": i, "k": l.k, "big_k": l.big_k, "vertices": l.q.len(), "segments": l.s.len(),
                    "ok": r.ok(), "samples_checked": r.samples_checked, "crossings_checked": r.crossings_checked,
                    "violations": r.violations,
                });
                println!("{line}");
            }
            println!("{}", serde_json::json!({ "arcs": gamma.len(), "levels": h.levels.len(), "retries": h.retries, "ok": ok }));
            if !ok {
                return Ok(EXIT_VALIDATION);
            }
        }
        Cmd::Gen { seed, n, mix, dist, side, out } => {
            if !(side.is_finite() && side > 0.0) {
                bail!("side must be positive");
            }
            let cfg = WorkloadConfig { seed, n, mix: mix.parse()?, dist: dist.parse()?, side };
            write_out(&out, &gen_workload(&cfg).to_string())?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
