use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use vlprep_core::datastore::{encode_records, hash_records, read_manifest, read_records, write_batch_stream, write_records};
use vlprep_core::featuremap::{build_layout, token_budget};
use vlprep_core::geometry::{default_candidates, plan_for};
use vlprep_core::mixture::{compile_with_threads, stats, subsample};
use vlprep_core::{plan_batches, CandidateSet, EncoderProfile, ImageDim, Registry, WhitespaceCounter};

const USAGE_ERROR: u8 = 1;
const DATA_ERROR: u8 = 2;
const PATCH_SIDE: u32 = 14;
const FEATURE_DIM: usize = 8;

/// Any-resolution tiling planner and instruction-mixture compiler.
#[derive(Parser)]
#[command(name = "vlprep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan tiling and token layout for one image size.
    Plan {
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        width: u32,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        height: u32,
        #[arg(long, default_value_t = 224, value_parser = parse_tile_side)]
        tile_side: u32,
    },
    /// Aggregate visual-token budgets over a record stream.
    Budget {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 224, value_parser = parse_tile_side)]
        tile_side: u32,
    },
    /// Compile a mixture manifest into one shuffled record stream.
    Compile {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the manifest.
        #[arg(long)]
        seed: u64,
        /// Worker threads; 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Summarize a record stream.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Plan modality-homogeneous batches.
    Batches {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 128, value_parser = clap::value_parser!(u64).range(1..))]
        batch_size: u64,
        #[arg(long)]
        seed: u64,
        /// Batch stream destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Uniformly subsample a record stream, preserving order.
    Subsample {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = parse_ratio)]
        ratio: f64,
        #[arg(long)]
        seed: u64,
        /// Record destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a benchmark's response-format prompt.
    EvalPrompt {
        #[arg(long)]
        benchmark: String,
        /// Print the question with the prompt applied instead.
        #[arg(long)]
        question: Option<String>,
        /// TOML registry replacing the built-in one.
        #[arg(long)]
        registry: Option<PathBuf>,
    },
}

fn parse_tile_side(s: &str) -> Result<u32, String> {
    let side: u32 = s.parse().map_err(|e| format!("{e}"))?;
    if side == 0 || !side.is_multiple_of(PATCH_SIDE) {
        return Err(format!("must be a positive multiple of {PATCH_SIDE}"));
    }
    Ok(side)
}

fn parse_ratio(s: &str) -> Result<f64, String> {
    let r: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if !(r > 0.0 && r <= 1.0) {
        return Err("must lie in (0, 1]".into());
    }
    Ok(r)
}

type Outcome = Result<(), String>;

fn data<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn candidates(tile_side: u32) -> Result<(CandidateSet, EncoderProfile), String> {
    let set = default_candidates().with_tile_side(tile_side).map_err(data)?;
    let profile = EncoderProfile::new(tile_side, PATCH_SIDE, FEATURE_DIM).map_err(data)?;
    Ok((set, profile))
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, String> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|e| format!("{}: {e}", path.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn plan(width: u32, height: u32, tile_side: u32) -> Outcome {
    let (set, profile) = candidates(tile_side)?;
    let dim = ImageDim::new(width, height).map_err(data)?;
    let tiling = plan_for(dim, &set).map_err(data)?;
    let layout = build_layout(&tiling, &profile).map_err(data)?;
    let rows = layout.kept_rows();
    let cols = layout.kept_cols();
    let mut out = io::stdout().lock();
    let text = format!(
        "input: {}x{}\n\
         grid: {}\n\
         canvas: {}x{}\n\
         content: {}x{}\n\
         padding: left {} right {} top {} bottom {}\n\
         merged features: {}x{}\n\
         kept rows: {}..{} ({})\n\
         kept cols: {}..{} ({})\n\
         global tokens: {}\n\
         high-res tokens: {}\n\
         row-end tokens: {}\n\
         total tokens: {}\n",
        dim.width,
        dim.height,
        tiling.grid,
        tiling.canvas.width,
        tiling.canvas.height,
        tiling.scaled_content.width,
        tiling.scaled_content.height,
        tiling.pad_left,
        tiling.pad_right,
        tiling.pad_top,
        tiling.pad_bottom,
        layout.merged_rows,
        layout.merged_cols,
        rows.start,
        rows.end,
        layout.kept_row_count,
        cols.start,
        cols.end,
        layout.kept_col_count,
        layout.global_tokens,
        layout.highres_tokens,
        layout.rowend_count,
        layout.total_tokens,
    );
    let record = json!({ "tiling": tiling, "layout": layout });
    writeln!(out, "{text}{record}").map_err(data)
}

fn budget(input: &Path, tile_side: u32) -> Outcome {
    let (set, profile) = candidates(tile_side)?;
    let records = read_records(input).map_err(data)?;
    let mut totals = Vec::new();
    let mut grids: BTreeMap<String, usize> = BTreeMap::new();
    for conv in &records {
        let Some(image) = &conv.image else { continue };
        let dim = image.dim().map_err(|e| format!("record `{}`: {e}", conv.id))?;
        let layout = token_budget(dim, &set, &profile).map_err(data)?;
        *grids.entry(layout.grid.to_string()).or_default() += 1;
        totals.push(u64::from(layout.total_tokens));
    }
    let sum: u64 = totals.iter().sum();
    let mut out = io::stdout().lock();
    let mut text = format!("records: {}\nwith image: {}\ntotal tokens: {sum}\n", records.len(), totals.len());
    if let (Some(min), Some(max)) = (totals.iter().min(), totals.iter().max()) {
        text += &format!("min: {min}\nmax: {max}\nmean: {:.1}\n", sum as f64 / totals.len() as f64);
    }
    for (grid, n) in grids {
        text += &format!("grid {grid}: {n}\n");
    }
    out.write_all(text.as_bytes()).map_err(data)
}

fn compile(manifest: &Path, out: &Path, seed: u64, threads: usize) -> Outcome {
    let mut manifest = read_manifest(manifest).map_err(data)?;
    manifest.seed = seed;
    let mixture = compile_with_threads(&manifest, &WhitespaceCounter, threads).map_err(data)?;
    let digest = write_records(&mixture, out).map_err(data)?;
    eprintln!("wrote {} records to {}", mixture.len(), out.display());
    let summary = stats(&mixture, &WhitespaceCounter);
    write!(io::stdout().lock(), "digest: {digest}\n{summary}").map_err(data)
}

fn stats_cmd(input: &Path) -> Outcome {
    let records = read_records(input).map_err(data)?;
    let summary = stats(&records, &WhitespaceCounter);
    write!(io::stdout().lock(), "digest: {}\n{summary}", hash_records(&records)).map_err(data)
}

fn batches(input: &Path, batch_size: usize, seed: u64, out: Option<&Path>) -> Outcome {
    let records = read_records(input).map_err(data)?;
    let plan = plan_batches(&records, batch_size, seed).map_err(data)?;
    let mut w = sink(out)?;
    write_batch_stream(&plan, &mut w).and_then(|_| w.flush()).map_err(data)?;
    eprintln!(
        "{} batches ({} visual, {} text)",
        plan.batches.len(),
        plan.count(vlprep_core::Modality::Visual),
        plan.count(vlprep_core::Modality::Text)
    );
    Ok(())
}

fn subsample_cmd(input: &Path, ratio: f64, seed: u64, out: Option<&Path>) -> Outcome {
    let records = read_records(input).map_err(data)?;
    let total = records.len();
    let kept = subsample(records, ratio, seed).map_err(data)?;
    let mut w = sink(out)?;
    w.write_all(&encode_records(&kept)).and_then(|_| w.flush()).map_err(data)?;
    eprintln!("kept {} of {total} records", kept.len());
    Ok(())
}

fn eval_prompt(benchmark: &str, question: Option<&str>, registry: Option<&Path>) -> Outcome {
    let registry = match registry {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            Registry::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => Registry::builtin(),
    };
    let line = match question {
        Some(q) => registry.apply_eval_prompt(q, benchmark).map_err(data)?,
        None => match registry.eval_prompt(benchmark).map_err(data)? {
            Some(prompt) => prompt.to_string(),
            None => {
                eprintln!("{benchmark} has no format prompt");
                return Ok(());
            }
        },
    };
    writeln!(io::stdout().lock(), "{line}").map_err(data)
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Plan { width, height, tile_side } => plan(width, height, tile_side),
        Command::Budget { input, tile_side } => budget(&input, tile_side),
        Command::Compile { manifest, out, seed, threads } => compile(&manifest, &out, seed, threads),
        Command::Stats { input } => stats_cmd(&input),
        Command::Batches { input, batch_size, seed, out } => batches(&input, batch_size as usize, seed, out.as_deref()),
        Command::Subsample { input, ratio, seed, out } => subsample_cmd(&input, ratio, seed, out.as_deref()),
        Command::EvalPrompt { benchmark, question, registry } => {
            eval_prompt(&benchmark, question.as_deref(), registry.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(USAGE_ERROR) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(DATA_ERROR)
        }
    }
}
