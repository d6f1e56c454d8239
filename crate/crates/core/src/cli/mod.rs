//! Command-line sweeps over aggregators and attacker ratios, and the output
//! files they produce.
//!
//! A sweep writes, into the output directory:
//!
//! * `rounds.jsonl`: a header line holding the resolved configuration, then
//!   one record per (defense, ratio, round);
//! * `summary.csv`: one row per (defense, ratio) cell;
//! * `curves.csv`: per-round metrics, with the test error also scaled by 10
//!   for plotting;
//! * `features/<defense>_r<ratio>_t<round>.csv` with `--dump-features`.
//!
//! Every CSV starts with a `# config: {...}` comment line. Files are written
//! to a temporary name and renamed, so an error never leaves a partial file.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::defense::ModeSetting;
use crate::error::{Error, Result};
use crate::federation::{load_data, prepare, run_experiment, DefenseKind, ExperimentConfig, FeatureDump, RunOptions};
use crate::metrics::{summarize, RoundReport, Summary};

#[derive(Debug, Parser)]
#[command(name = "lfshield", version, about = "Federated label-flipping experiments")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every requested (defense, attacker ratio) cell.
    Run(RunArgs),
}

#[derive(Clone, Debug, Args)]
pub struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Aggregators to run: `all` or a comma-separated list of
    /// fedavg, median, rmedian, tmean, mkrum, fgold, ours.
    #[arg(long)]
    pub defense: Option<String>,
    /// Attacker ratios, comma-separated; overrides the configured ratio.
    #[arg(long, alias = "ratio", value_delimiter = ',')]
    pub ratios: Vec<f64>,
    /// Experiment seed; overrides the configured one.
    #[arg(long, env = "LFSHIELD_SEED")]
    pub seed: Option<u64>,
    /// Force the defense's filter instead of detecting it each round.
    #[arg(long)]
    pub mode: Option<ModeSetting>,
    #[arg(long, default_value = "results")]
    pub out_dir: PathBuf,
    /// Write per-round gradient features and PCA coordinates.
    #[arg(long)]
    pub dump_features: bool,
    /// Worker threads for local training (0 = one per core).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

/// One (defense, ratio) combination of a sweep.
#[derive(Clone, Debug)]
pub struct Cell {
    pub defense: DefenseKind,
    pub ratio: f64,
    pub config: ExperimentConfig,
}

#[derive(Clone, Debug)]
pub struct CellResult {
    pub cell: Cell,
    pub warnings: Vec<String>,
    pub reports: Vec<RoundReport>,
    pub summary: Summary,
    pub dumps: Vec<FeatureDump>,
}

/// Resolved configuration and the cells to run.
#[derive(Clone, Debug)]
pub struct Sweep {
    pub base: ExperimentConfig,
    pub cells: Vec<Cell>,
}

fn parse_defenses(spec: &str) -> Result<Vec<DefenseKind>> {
    if spec == "all" {
        return Ok(DefenseKind::ALL.to_vec());
    }
    let mut out = Vec::new();
    for name in spec.split(',').map(str::trim) {
        let kind: DefenseKind = name.parse()?;
        if !out.contains(&kind) {
            out.push(kind);
        }
    }
    Ok(out)
}

/// Reads the configuration file and applies command-line overrides.
pub fn resolve(args: &RunArgs) -> Result<Sweep> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut base = ExperimentConfig::from_toml(&text)?;
    base.dataset.resolve_paths(args.config.parent().unwrap_or(Path::new(".")));
    if let Some(seed) = args.seed {
        base.seed = seed;
    }
    if let Some(mode) = args.mode {
        base.defense.mode = mode;
    }
    let defenses = match &args.defense {
        Some(spec) => parse_defenses(spec)?,
        None => vec![base.defense.name],
    };
    let ratios = if args.ratios.is_empty() { vec![base.attack.ratio] } else { args.ratios.clone() };
    let mut cells = Vec::new();
    for &ratio in &ratios {
        for &defense in &defenses {
            let mut config = base.clone();
            config.attack.ratio = ratio;
            config.defense.name = defense;
            config.validate()?;
            cells.push(Cell { defense, ratio, config });
        }
    }
    Ok(Sweep { base, cells })
}

/// Loads the data, checks every cell, then trains them one after another.
pub fn execute(sweep: &Sweep, opts: RunOptions) -> Result<Vec<CellResult>> {
    let data = load_data(&sweep.base)?;
    for cell in &sweep.cells {
        prepare(&cell.config, &data)?;
    }
    sweep
        .cells
        .iter()
        .map(|cell| {
            log::info!("running {} at ratio {}", cell.defense, cell.ratio);
            let out = run_experiment(&cell.config, &data, opts)?;
            let summary = summarize(&out.reports)?;
            Ok(CellResult {
                cell: cell.clone(),
                warnings: out.setup.warnings,
                reports: out.reports,
                summary,
                dumps: out.dumps,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct Header<'a> {
    config: &'a ExperimentConfig,
    defenses: Vec<DefenseKind>,
    ratios: Vec<f64>,
}

fn config_json(sweep: &Sweep) -> Result<String> {
    let mut defenses = Vec::new();
    let mut ratios = Vec::new();
    for c in &sweep.cells {
        if !defenses.contains(&c.defense) {
            defenses.push(c.defense);
        }
        if !ratios.contains(&c.ratio) {
            ratios.push(c.ratio);
        }
    }
    Ok(serde_json::to_string(&Header { config: &sweep.base, defenses, ratios })?)
}

#[derive(Serialize)]
struct RoundLine<'a> {
    defense: DefenseKind,
    ratio: f64,
    #[serde(flatten)]
    report: &'a RoundReport,
}

/// `rounds.jsonl` contents.
pub fn render_rounds_jsonl(sweep: &Sweep, results: &[CellResult]) -> Result<String> {
    let mut out = config_json(sweep)?;
    out.push('\n');
    for r in results {
        for report in &r.reports {
            out.push_str(&serde_json::to_string(&RoundLine {
                defense: r.cell.defense,
                ratio: r.cell.ratio,
                report,
            })?);
            out.push('\n');
        }
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `summary.csv` contents.
pub fn render_summary_csv(sweep: &Sweep, results: &[CellResult]) -> Result<String> {
    let mut out = format!("# config: {}\n", config_json(sweep)?);
    out.push_str("defense,ratio,rounds,te,all_acc,src_acc,asr,precision,recall,src_acc_cv,src_acc_cv_late\n");
    for r in results {
        let s = &r.summary;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.cell.defense,
            r.cell.ratio,
            s.rounds,
            s.te,
            s.all_acc,
            opt(s.src_acc),
            opt(s.asr),
            opt(s.precision),
            opt(s.recall),
            opt(s.src_acc_cv),
            opt(s.src_acc_cv_late)
        );
    }
    Ok(out)
}

/// `curves.csv` contents.
pub fn render_curves_csv(sweep: &Sweep, results: &[CellResult]) -> Result<String> {
    let mut out = format!("# config: {}\n", config_json(sweep)?);
    out.push_str("defense,ratio,round,te,te_x10,all_acc,src_acc,asr\n");
    for r in results {
        for rep in &r.reports {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.cell.defense,
                r.cell.ratio,
                rep.round,
                rep.te,
                rep.te * 10.0,
                rep.all_acc,
                opt(rep.src_acc),
                opt(rep.asr)
            );
        }
    }
    Ok(out)
}

/// One feature dump as CSV.
pub fn render_features_csv(sweep: &Sweep, dump: &FeatureDump) -> Result<String> {
    let mut out = format!("# config: {}\n", config_json(sweep)?);
    let neurons: Vec<String> = dump.neurons.iter().map(|(a, b)| format!("{a}/{b}")).collect();
    let _ = writeln!(out, "# neurons: {}", neurons.join(" "));
    out.push_str("peer,attacker,cluster,flagged,pc1,pc2");
    let width = dump.rows.first().map_or(0, Vec::len);
    for j in 0..width {
        let _ = write!(out, ",f{j}");
    }
    out.push('\n');
    for (i, row) in dump.rows.iter().enumerate() {
        let label = dump.labels.get(i).map(|l| l.to_string()).unwrap_or_default();
        let _ = write!(
            out,
            "{},{},{},{},{},{}",
            dump.peers[i],
            u8::from(dump.attacker[i]),
            label,
            u8::from(dump.flagged[i]),
            dump.coords[i][0],
            dump.coords[i][1]
        );
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    Ok(out)
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Renders every output and then writes them all; nothing is written if
/// rendering fails.
pub fn write_outputs(out_dir: &Path, sweep: &Sweep, results: &[CellResult]) -> Result<Vec<PathBuf>> {
    let mut files = vec![
        (out_dir.join("rounds.jsonl"), render_rounds_jsonl(sweep, results)?),
        (out_dir.join("summary.csv"), render_summary_csv(sweep, results)?),
        (out_dir.join("curves.csv"), render_curves_csv(sweep, results)?),
    ];
    for r in results {
        for d in &r.dumps {
            let name = format!("{}_r{}_t{}.csv", r.cell.defense, r.cell.ratio, d.round);
            files.push((out_dir.join("features").join(name), render_features_csv(sweep, d)?));
        }
    }
    for (path, contents) in &files {
        write_atomic(path, contents)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

/// The `run` subcommand end to end.
pub fn run(args: &RunArgs) -> Result<Vec<CellResult>> {
    let sweep = resolve(args)?;
    let opts = RunOptions { threads: args.threads, dump_features: args.dump_features };
    let results = execute(&sweep, opts)?;
    write_outputs(&args.out_dir, &sweep, &results)?;
    Ok(results)
}
