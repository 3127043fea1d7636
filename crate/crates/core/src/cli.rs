//! Command-line front end: `run`, `sweep` and `analyze`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{classify_snapshot, StateClassification};
use crate::cavity::net_dispersion;
use crate::config::{parse_config, render_setup, ParsedConfig};
use crate::error::{ConfigError, RunError, SnapshotError, SweepError};
use crate::export::{
    classification_rows, read_classification, read_region_map, write_classification, write_region_map, write_trace,
    ClassificationRow,
};
use crate::fiber::DerivedCoefficients;
use crate::par::parallel_enabled;
use crate::run::{simulate_observed, RunSetup};
use crate::snapshot::{read_snapshot, write_snapshot};
use crate::sweep::{run_sweep_resuming, RegionMap, SweepSpec};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "dmsoliton", version, about = "Dark-pulse fiber ring laser simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one cavity simulation to steady state.
    Run(RunArgs),
    /// Map the (SMF length, gain) plane.
    Sweep(SweepArgs),
    /// Re-analyze a stored field snapshot.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML config; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Save the intracavity field every N trips (0 = final field only).
    #[arg(long, default_value_t = 0)]
    pub snapshot_every: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `sweep.workers`.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Skip cells already present in an existing region_map.csv.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Field snapshot in the binary layout written by `run`.
    pub snapshot: PathBuf,
    /// Config supplying lambda0 and detection thresholds.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Optional directory for classification.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Run,
    Sweep,
    Analyze,
}

/// Resolved invocation.
#[derive(Clone, Debug)]
pub struct RunManifest {
    pub config_path: Option<PathBuf>,
    pub mode: Mode,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub snapshot_every: usize,
    pub workers: Option<usize>,
    pub resume: bool,
    pub snapshot: Option<PathBuf>,
}

impl RunManifest {
    pub fn from_command(cmd: &Command) -> Self {
        let blank = |mode| RunManifest {
            config_path: None,
            mode,
            out_dir: None,
            seed: None,
            snapshot_every: 0,
            workers: None,
            resume: false,
            snapshot: None,
        };
        match cmd {
            Command::Run(a) => RunManifest {
                config_path: a.config.clone(),
                out_dir: Some(a.out.clone()),
                seed: a.seed,
                snapshot_every: a.snapshot_every,
                ..blank(Mode::Run)
            },
            Command::Sweep(a) => RunManifest {
                config_path: a.config.clone(),
                out_dir: Some(a.out.clone()),
                seed: a.seed,
                workers: a.workers,
                resume: a.resume,
                ..blank(Mode::Sweep)
            },
            Command::Analyze(a) => RunManifest {
                config_path: a.config.clone(),
                out_dir: a.out.clone(),
                snapshot: Some(a.snapshot.clone()),
                ..blank(Mode::Analyze)
            },
        }
    }

    fn load_config(&self) -> Result<ParsedConfig, CliError> {
        let text = match &self.config_path {
            Some(p) => fs::read_to_string(p).map_err(io_err(p))?,
            None => String::new(),
        };
        let mut parsed = parse_config(&text)?;
        if let Some(seed) = self.seed {
            parsed.setup.seed = seed;
            if let Some(ax) = parsed.sweep.as_mut() {
                ax.seeds = vec![seed];
            }
        }
        Ok(parsed)
    }

    fn out_dir(&self) -> Result<&Path, CliError> {
        let dir = self
            .out_dir
            .as_deref()
            .ok_or_else(|| CliError::Usage("an output directory is required".into()))?;
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(dir)
    }
}

pub fn hash_text(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct SegmentMeta<'a> {
    name: &'a str,
    length_m: f64,
    #[serde(flatten)]
    coefficients: DerivedCoefficients,
}

#[derive(Serialize)]
struct Meta<'a> {
    software: &'static str,
    version: &'static str,
    parallel: bool,
    mode: Mode,
    timestamp_unix: u64,
    config_path: String,
    config_hash: String,
    status: String,
    round_trips: usize,
    net_dispersion_ps2: f64,
    total_length_m: f64,
    segment: Vec<SegmentMeta<'a>>,
    setup: &'a RunSetup,
}

fn write_meta(dir: &Path, meta: &Meta<'_>) -> Result<(), CliError> {
    let path = dir.join("meta.toml");
    let text = toml::to_string(meta).map_err(|e| CliError::Usage(format!("metadata serialization: {e}")))?;
    fs::write(&path, text).map_err(io_err(&path))
}

fn meta_for<'a>(manifest: &RunManifest, mode: Mode, setup: &'a RunSetup, hash: String, status: String, trips: usize) -> Meta<'a> {
    let timestamp_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Meta {
        software: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        parallel: parallel_enabled(),
        mode,
        timestamp_unix,
        config_path: manifest
            .config_path
            .as_ref()
            .map_or_else(String::new, |p| p.display().to_string()),
        config_hash: hash,
        status,
        round_trips: trips,
        net_dispersion_ps2: net_dispersion(&setup.cavity),
        total_length_m: setup.cavity.total_length_m(),
        segment: setup
            .cavity
            .segments
            .iter()
            .zip(setup.cavity.coefficients())
            .map(|(s, c)| SegmentMeta {
                name: &s.name,
                length_m: s.length_m,
                coefficients: c,
            })
            .collect(),
        setup,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

/// What a finished `run` produced.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub classification: StateClassification,
    pub round_trips: usize,
    pub snapshots: usize,
}

pub fn cmd_run(manifest: &RunManifest) -> Result<RunSummary, CliError> {
    let parsed = manifest.load_config()?;
    let setup = parsed.setup;
    let dir = manifest.out_dir()?.to_path_buf();
    let snap_dir = dir.join("snapshots");
    if manifest.snapshot_every > 0 {
        fs::create_dir_all(&snap_dir).map_err(io_err(&snap_dir))?;
    }
    let every = manifest.snapshot_every;
    let mut snapshots = 0usize;
    let mut snap_error = None;
    let result = simulate_observed(&setup, |trip, field| {
        if every > 0 && (trip - 1) % every == 0 && snap_error.is_none() {
            let path = snap_dir.join(format!("trip_{trip:06}.bin"));
            match write_snapshot(&path, field) {
                Ok(()) => snapshots += 1,
                Err(e) => snap_error = Some(e),
            }
        }
    })?;
    if let Some(e) = snap_error {
        return Err(e.into());
    }

    write_trace(create(&dir.join("trace.csv"))?, &result.trace)?;
    write_snapshot(&dir.join("final_field.bin"), &result.field)?;
    let rows = classification_rows("run", &result.classification);
    write_classification(create(&dir.join("classification.csv"))?, &rows)?;
    let rendered = render_setup(&setup);
    let status = format!("{:?} / {}", result.trace.status, result.classification.label);
    write_meta(
        &dir,
        &meta_for(manifest, Mode::Run, &setup, hash_text(&rendered), status, result.trace.records.len()),
    )?;
    Ok(RunSummary {
        classification: result.classification,
        round_trips: result.trace.records.len(),
        snapshots,
    })
}

fn cell_run_id(smf: f64, gain: f64, seed: u64) -> String {
    format!("smf{smf}_g{gain}_s{seed}")
}

pub fn sweep_header(spec: &SweepSpec) -> Vec<(String, String)> {
    let rendered = format!(
        "{}\nsmf_lengths_m = {:?}\ngains_per_km = {:?}\nseeds = {:?}\n",
        render_setup(&spec.base),
        spec.smf_lengths_m,
        spec.gains_per_km,
        spec.seeds()
    );
    let g = &spec.base.cavity.grid;
    vec![
        ("software".into(), format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))),
        ("config_hash".into(), hash_text(&rendered)),
        (
            "seed".into(),
            spec.seeds().iter().map(u64::to_string).collect::<Vec<_>>().join(";"),
        ),
        ("grid".into(), format!("n_samples={} window_ps={}", g.n_samples, g.window_ps)),
        ("step_m".into(), spec.base.cavity.step.step_m.to_string()),
        ("max_round_trips".into(), spec.base.cavity.max_round_trips.to_string()),
    ]
}

pub fn cmd_sweep(manifest: &RunManifest) -> Result<RegionMap, CliError> {
    let parsed = manifest.load_config()?;
    let mut spec = parsed.sweep_spec();
    if let Some(w) = manifest.workers {
        if w == 0 {
            return Err(CliError::Usage("--workers must be >= 1".into()));
        }
        spec.workers = w;
    }
    let dir = manifest.out_dir()?.to_path_buf();
    let map_path = dir.join("region_map.csv");
    let class_path = dir.join("classification.csv");

    let (done, mut kept_rows) = if manifest.resume && map_path.exists() {
        let done = read_region_map(File::open(&map_path).map_err(io_err(&map_path))?)?;
        let rows = if class_path.exists() {
            read_classification(File::open(&class_path).map_err(io_err(&class_path))?)?
        } else {
            Vec::new()
        };
        (done, rows)
    } else {
        (RegionMap::default(), Vec::new())
    };

    let map = run_sweep_resuming(&spec, &done)?;

    let mut rows: Vec<ClassificationRow> = Vec::new();
    for cell in &map.cells {
        let id = cell_run_id(cell.key.smf_length_m, cell.key.gain_per_km, cell.key.seed);
        if done.find(&cell.key).is_some() {
            rows.extend(kept_rows.iter().filter(|r| r.run_id == id).cloned());
        } else if let Some(c) = &cell.classification {
            rows.extend(classification_rows(&id, c));
        }
    }
    kept_rows.clear();

    write_region_map(create(&map_path)?, &sweep_header(&spec), &map)?;
    write_classification(create(&class_path)?, &rows)?;
    let rendered = render_setup(&spec.base);
    write_meta(
        &dir,
        &meta_for(manifest, Mode::Sweep, &spec.base, hash_text(&rendered), format!("{} cells", map.cells.len()), 0),
    )?;
    Ok(map)
}

/// Prints the pulse table of a stored field and returns its classification.
pub fn cmd_analyze(manifest: &RunManifest, out: &mut impl Write) -> Result<StateClassification, CliError> {
    let path = manifest
        .snapshot
        .as_deref()
        .ok_or_else(|| CliError::Usage("a snapshot path is required".into()))?;
    let parsed = manifest.load_config()?;
    let field = read_snapshot(path)?;
    let c = classify_snapshot(&field, &parsed.setup.analysis, parsed.setup.cavity.lambda0_nm);
    let w = |e| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    };
    writeln!(out, "label: {}", c.label).map_err(w)?;
    writeln!(out, "cw_level_w: {:.6}", c.cw_level).map_err(w)?;
    writeln!(out, "bandwidth_3db_nm: {:.6}", c.spectral_bw_3db).map_err(w)?;
    if let Some(tbp) = c.tbp {
        writeln!(out, "tbp: {tbp:.4}").map_err(w)?;
    }
    writeln!(out, "{:>5} {:>12} {:>10} {:>8}", "pulse", "position_ps", "fwhm_ps", "depth").map_err(w)?;
    for (i, p) in c.pulses.iter().enumerate() {
        writeln!(out, "{:>5} {:>12.4} {:>10.4} {:>8.4}", i, p.position, p.fwhm, p.modulation_depth).map_err(w)?;
    }
    if let Some(dir) = &manifest.out_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let id = path.file_stem().map_or_else(|| "snapshot".to_string(), |s| s.to_string_lossy().into_owned());
        write_classification(create(&dir.join("classification.csv"))?, &classification_rows(&id, &c))?;
    }
    Ok(c)
}

/// Dispatches a parsed command line; returns the process exit code.
pub fn execute(cli: &Cli) -> i32 {
    let manifest = RunManifest::from_command(&cli.command);
    let outcome = match manifest.mode {
        Mode::Run => cmd_run(&manifest).map(|s| {
            println!(
                "{} after {} round trips ({} pulses)",
                s.classification.label,
                s.round_trips,
                s.classification.pulses.len()
            );
        }),
        Mode::Sweep => cmd_sweep(&manifest).map(|m| println!("{} cells written", m.cells.len())),
        Mode::Analyze => cmd_analyze(&manifest, &mut std::io::stdout().lock()).map(|_| ()),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
