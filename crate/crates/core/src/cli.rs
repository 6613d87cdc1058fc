//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::{preset, ExperimentFile, LongtailInput, PRESETS};
use crate::error::{Error, Result};
use crate::experiment as ex;
use crate::investor::write_investors_csv;
use crate::load::{comparison_table, cp_load, im_load, write_load_csv};
use crate::longtail::{analyze, load_citations, write_cumulative_csv, write_longtail_csv};
use crate::scoring::write_ledger_csv;
use crate::universe::write_papers_csv;

#[derive(Debug, Parser)]
#[command(name = "imsim", version, about = "Impact Market peer-review simulator")]
pub struct Cli {
    /// Experiment file (TOML). Without it the subcommand's bundled preset is used.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Use a bundled preset by name instead of a file.
    #[arg(long, global = true, value_name = "NAME", conflicts_with = "config")]
    pub preset: Option<String>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Trials per scenario, or runs for calibration and collusion batches.
    #[arg(long, global = true, value_name = "N")]
    pub trials: Option<usize>,
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every [[scenario]] and write recall.csv and summary.json.
    Simulate {
        /// Also write ledger, paper and investor CSVs of trial 0 per scenario.
        #[arg(long)]
        details: bool,
    },
    /// Run the [ablation] pick grid and write ablation.csv.
    Ablate,
    /// Run the [calibration] batch and write cycles.csv.
    Calibrate,
    /// Run the [collusion] detection batch and write detection.csv.
    Collusion,
    /// Print and write the reviewer-load comparison.
    Load,
    /// Concentration statistics for per-paper citation counts.
    Longtail {
        /// CSV with venue,paper,citations; overrides the config's input.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
    },
    /// Write plot-ready CSVs (IR densities, recall bars) into the output directory.
    PlotData,
}

impl Command {
    fn default_preset(&self) -> &'static str {
        match self {
            Command::Simulate { .. } | Command::PlotData => "table2",
            Command::Ablate => "table4",
            Command::Calibrate => "calibration",
            Command::Collusion => "collusion",
            Command::Load => "load",
            Command::Longtail { .. } => "longtail",
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Ablate => "ablate",
            Command::Calibrate => "calibrate",
            Command::Collusion => "collusion",
            Command::Load => "load",
            Command::Longtail { .. } => "longtail",
            Command::PlotData => "plot-data",
        }
    }
}

/// Run metadata; the only output allowed to differ between identical runs.
#[derive(Debug, Serialize)]
struct Meta<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    threads: Option<usize>,
    git_hash: Option<String>,
    timestamp_unix: u64,
    config: &'a ExperimentFile,
}

fn git_hash() -> Option<String> {
    let out = std::process::Command::new("git").args(["rev-parse", "HEAD"]).output().ok()?;
    out.status.success().then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
}

fn load_file(cli: &Cli) -> Result<ExperimentFile> {
    let mut file = match (&cli.config, &cli.preset) {
        (Some(path), _) => ExperimentFile::load(path)?,
        (None, name) => {
            let name = name.as_deref().unwrap_or_else(|| cli.command.default_preset());
            let text = preset(name)
                .ok_or_else(|| Error::config(format!("unknown preset '{name}'; available: {}", PRESETS.join(", "))))?;
            let mut f = ExperimentFile::parse(text)?;
            if let Some(lt) = &mut f.longtail {
                if lt.input.is_relative() {
                    lt.input = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets").join(&lt.input);
                }
            }
            f
        }
    };
    if let Some(s) = cli.seed {
        file.seed = s;
    }
    if let Some(t) = cli.trials {
        if t == 0 {
            return Err(Error::config("--trials must be at least 1"));
        }
        file.trials = t;
        if let Some(c) = &mut file.calibration {
            c.runs = t;
        }
        if let Some(c) = &mut file.collusion {
            c.runs = t;
            c.null_runs = t;
        }
    }
    if let Some(o) = &cli.out {
        file.output_dir = o.clone();
    }
    Ok(file)
}

/// Parses arguments already split by the caller and runs the command.
pub fn run(cli: Cli) -> Result<()> {
    if cli.threads == Some(0) {
        return Err(Error::config("--threads must be at least 1"));
    }
    let file = load_file(&cli)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::config(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(&cli, &file))
}

fn say(cli: &Cli, text: impl AsRef<str>) {
    if !cli.quiet {
        println!("{}", text.as_ref());
    }
}

fn dispatch(cli: &Cli, file: &ExperimentFile) -> Result<()> {
    let out = ex::ensure_dir(&file.output_dir)?;
    match &cli.command {
        Command::Simulate { details } => simulate(cli, file, &out, *details)?,
        Command::Ablate => ablate(cli, file, &out)?,
        Command::Calibrate => calibrate(cli, file, &out)?,
        Command::Collusion => collusion(cli, file, &out)?,
        Command::Load => load(cli, file, &out)?,
        Command::Longtail { input } => longtail(cli, file, &out, input.as_deref())?,
        Command::PlotData => plot_data(cli, &out)?,
    }
    let meta = Meta {
        command: cli.command.name(),
        version: env!("CARGO_PKG_VERSION"),
        seed: file.seed,
        threads: cli.threads,
        git_hash: git_hash(),
        timestamp_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        config: file,
    };
    ex::write_json(&out.join("meta.json"), &meta)
}

fn simulate(cli: &Cli, file: &ExperimentFile, out: &Path, details: bool) -> Result<()> {
    if file.scenarios.is_empty() {
        return Err(Error::config("simulate: the config has no [[scenario]] entries"));
    }
    let mut outcomes = Vec::new();
    for sc in &file.scenarios {
        let o = ex::run_scenario(sc, file.seed, file.trials, file.top_slots, details)?;
        say(
            cli,
            format!(
                "{:<14} {:<11} recall {:.3} ± {:.3}  gems {:.1}/{}",
                o.summary.name, o.summary.protocol, o.summary.mean_recall, o.summary.sd_recall, o.summary.mean_gems_found, o.summary.gems_per_trial
            ),
        );
        if let Some(a) = &o.first_trial {
            let dir = ex::ensure_dir(&out.join(&sc.name))?;
            write_papers_csv(&dir.join("papers.csv"), &a.papers)?;
            write_investors_csv(&dir.join("investors.csv"), &a.investors)?;
            write_ledger_csv(&dir.join("ledger.csv"), &[(0, &a.ledger)])?;
        }
        outcomes.push(o);
    }
    ex::write_recall_csv(&out.join("recall.csv"), &outcomes)?;
    let summaries: Vec<_> = outcomes.iter().map(|o| &o.summary).collect();
    ex::write_json(&out.join("summary.json"), &summaries)
}

fn ablate(cli: &Cli, file: &ExperimentFile, out: &Path) -> Result<()> {
    let cfg = file.ablation.as_ref().ok_or_else(|| Error::config("ablate: the config has no [ablation] table"))?;
    let a = ex::run_ablation(cfg, file.seed, file.trials, file.top_slots)?;
    let mut table = format!("{:>6}", "pick");
    for p in &a.pools {
        table.push_str(&format!(" {p:>9}"));
    }
    for (i, pick) in a.picks.iter().enumerate() {
        table.push_str(&format!("\n{pick:>6}"));
        for g in &a.mean_gems[i] {
            table.push_str(&format!(" {g:>9.2}"));
        }
    }
    say(cli, format!("mean gems in the top {} (scan {})\n{table}", file.top_slots, a.scan));
    ex::write_ablation_csv(&out.join("ablation.csv"), &a)?;
    ex::write_ablation_trials_csv(&out.join("ablation_trials.csv"), &a)?;
    ex::write_json(&out.join("summary.json"), &a)
}

fn calibrate(cli: &Cli, file: &ExperimentFile, out: &Path) -> Result<()> {
    let spec = file.calibration.as_ref().ok_or_else(|| Error::config("calibrate: the config has no [calibration] table"))?;
    let runs = ex::run_calibration(spec, file.seed)?;
    let summary = ex::summarize_calibration(spec, &runs);
    let cycles = if runs.len() == 1 { runs[0].cycles.clone() } else { ex::mean_cycles(&runs) };
    crate::calibration::write_cycles_csv(&out.join("cycles.csv"), &[(0, &cycles)], false)?;
    ex::write_cycles_runs_csv(&out.join("cycles_runs.csv"), &runs)?;
    say(
        cli,
        format!(
            "{} runs x {} cycles: spearman(IR, skill) improved in {}; top-decile IR {:.3} -> {:.3}{}",
            summary.runs,
            summary.n_cycles,
            summary.spearman_improved,
            summary.top_decile_ir_start,
            summary.top_decile_ir_end,
            summary.ring_collapsed_by_cycle5.map(|k| format!("; ring below 0.75x start by cycle 5 in {k}")).unwrap_or_default()
        ),
    );
    ex::write_json(&out.join("summary.json"), &summary)
}

fn collusion(cli: &Cli, file: &ExperimentFile, out: &Path) -> Result<()> {
    let spec = file.collusion.as_ref().ok_or_else(|| Error::config("collusion: the config has no [collusion] table"))?;
    let o = ex::run_collusion(spec, file.seed)?;
    let s = ex::summarize_collusion(&o);
    say(
        cli,
        format!("ring recovered (Jaccard >= 0.9) in {}/{}; false flags in {}/{} null runs", s.recovered, s.runs, s.false_flags, s.null_runs),
    );
    ex::write_detection_csv(&out.join("detection.csv"), &o)?;
    ex::write_json(&out.join("summary.json"), &s)
}

fn load(cli: &Cli, file: &ExperimentFile, out: &Path) -> Result<()> {
    let cfg = file.load.clone().unwrap_or_default();
    let cp = cp_load(&cfg)?;
    let im = im_load(&cfg)?;
    say(cli, comparison_table(&cp, &im).trim_end());
    write_load_csv(&out.join("load.csv"), &cp, &im)?;
    ex::write_json(&out.join("summary.json"), &serde_json::json!({ "cp": cp, "im": im }))
}

fn longtail(cli: &Cli, file: &ExperimentFile, out: &Path, input: Option<&Path>) -> Result<()> {
    let spec = match (input, &file.longtail) {
        (Some(p), Some(lt)) => LongtailInput { input: p.to_path_buf(), stats: lt.stats.clone() },
        (Some(p), None) => LongtailInput { input: p.to_path_buf(), stats: Default::default() },
        (None, Some(lt)) => lt.clone(),
        (None, None) => return Err(Error::config("longtail: pass --input or add a [longtail] table")),
    };
    let records = load_citations(&spec.input)?;
    if records.is_empty() {
        eprintln!("warning: {} has no data rows", spec.input.display());
    }
    let rows = analyze(&records, &spec.stats)?;
    for r in &rows {
        say(
            cli,
            format!("{:<12} {:<8} {:>5}  ({:.0}/{:.0}/{:.0})", r.venue, r.stat, r.k_or_q, r.pct_papers, r.pct_citations, r.avg),
        );
    }
    write_longtail_csv(&out.join("longtail.csv"), &rows)?;
    if !records.is_empty() {
        write_cumulative_csv(&out.join("cumulative.csv"), &records)?;
    }
    Ok(())
}

fn plot_data(cli: &Cli, out: &Path) -> Result<()> {
    ex::write_ir_density_csv(&out.join("ir_density.csv"), 199)?;
    let mut written = vec!["ir_density.csv"];
    let recall = out.join("recall.csv");
    if recall.exists() {
        ex::write_recall_bars_csv(&recall, &out.join("recall_bars.csv"))?;
        written.push("recall_bars.csv");
    }
    say(cli, format!("wrote {} in {}", written.join(", "), out.display()));
    Ok(())
}
