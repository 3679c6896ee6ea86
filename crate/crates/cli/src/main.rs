//! `lisrmap`: scenario generation, single runs, Monte Carlo campaigns and
//! tensor inspection from the command line.
//!
//! Every run starts from a [`RunConfig`]: the defaults, then an optional TOML
//! file (`--config`), then individual flags, which mirror the config keys.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lisrmap_core::harness::{
    run_campaign, run_on_observation, run_pipeline, single_run_inputs, write_artifacts,
    write_campaign,
};
use lisrmap_core::io::{export_heatmap, export_report, read_tensor, Tensor};
use lisrmap_core::{ChannelObservation, NlosPhase, RunConfig, ScenarioSource};
use log::info;

#[derive(Parser)]
#[command(
    name = "lisrmap",
    version,
    about = "Passive localization from LIS radio maps"
)]
struct Cli {
    /// Run configuration file (TOML); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output root for files written by `run` and `campaign`.
    #[arg(long, global = true, env = "LISRMAP_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario and write it as TOML.
    Generate {
        /// Destination file; defaults to `<output-dir>/scenario.toml`, else stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the pipeline once.
    Run {
        /// Received signals as a complex N x K tensor, replacing channel synthesis.
        #[arg(long)]
        observation: Option<PathBuf>,
        /// Write every intermediate product into the output directory.
        #[arg(long)]
        artifacts: bool,
    },
    /// Monte Carlo sweep over the K list.
    Campaign,
    /// Render a saved tensor to a 16-bit PGM heatmap.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct InspectArgs {
    /// Tensor file written by `run --artifacts`.
    tensor: PathBuf,
    /// Destination PGM; defaults to the tensor path with a `.pgm` extension.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Render one row (e.g. one user of a K x N stack) reshaped to a grid.
    #[arg(long, conflicts_with = "col")]
    row: Option<usize>,
    /// Render one column (e.g. one user of an N x K observation) reshaped to a grid.
    #[arg(long)]
    col: Option<usize>,
    /// Grid shape `ROWSxCOLS` for `--row`/`--col`; defaults to a square.
    #[arg(long, value_parser = parse_pair)]
    shape: Option<[usize; 2]>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    Default,
    Scaled,
    File,
}

#[derive(Clone, Copy, ValueEnum)]
enum Phase {
    PathDelay,
    Literal,
}

/// Flags mirroring `RunConfig` keys. Unset flags leave the config untouched.
#[derive(Args)]
struct Overrides {
    /// `seed`: scenario and noise seed of a single run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// `k_aus`: number of active users for `generate` and `run`.
    #[arg(long, global = true)]
    k_aus: Option<usize>,
    /// `scenario.source`.
    #[arg(long, global = true, value_enum)]
    source: Option<Source>,
    /// `scenario.n_side` (scaled source).
    #[arg(long, global = true)]
    n_side: Option<usize>,
    /// `scenario.r_obj` (scaled source).
    #[arg(long, global = true)]
    r_obj: Option<usize>,
    /// `scenario.r_hum` (scaled source).
    #[arg(long, global = true)]
    r_hum: Option<usize>,
    /// `scenario.path`; implies `--source file`.
    #[arg(long, global = true)]
    scenario_file: Option<PathBuf>,
    /// `pipeline.nlos_phase`.
    #[arg(long, global = true, value_enum)]
    nlos_phase: Option<Phase>,
    /// `pipeline.filter.focal_height` in metres.
    #[arg(long, global = true)]
    focal_height: Option<f64>,
    /// `pipeline.filter.taps` as `NXxNY`.
    #[arg(long, global = true, value_parser = parse_pair)]
    taps: Option<[usize; 2]>,
    /// `pipeline.lambda_multiplier`.
    #[arg(long, global = true)]
    lambda_multiplier: Option<f64>,
    /// `pipeline.rpca.tol`.
    #[arg(long, global = true)]
    rpca_tol: Option<f64>,
    /// `pipeline.rpca.max_iter`.
    #[arg(long, global = true)]
    rpca_max_iter: Option<usize>,
    /// `pipeline.inference.eps`.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// `pipeline.inference.min_pts`.
    #[arg(long, global = true)]
    min_pts: Option<usize>,
    /// `pipeline.inference.th_min_coeff`.
    #[arg(long, global = true)]
    th_min_coeff: Option<f64>,
    /// `pipeline.inference.th_max_coeff`.
    #[arg(long, global = true)]
    th_max_coeff: Option<f64>,
    /// `pipeline.inference.d_th` in metres.
    #[arg(long, global = true)]
    d_th: Option<f64>,
    /// `campaign.k_values`, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    k_values: Option<Vec<usize>>,
    /// `campaign.mcs_count`.
    #[arg(long, global = true)]
    mcs_count: Option<usize>,
    /// `campaign.base_seed`.
    #[arg(long, global = true)]
    base_seed: Option<u64>,
    /// `campaign.workers`; 0 uses one per core.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// `campaign.vary_positions`.
    #[arg(long, global = true)]
    vary_positions: Option<bool>,
    /// `campaign.vary_reflection`.
    #[arg(long, global = true)]
    vary_reflection: Option<bool>,
    /// `campaign.vary_noise`.
    #[arg(long, global = true)]
    vary_noise: Option<bool>,
}

fn parse_pair(s: &str) -> std::result::Result<[usize; 2], String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected `AxB`, got `{s}`"))?;
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
    Ok([parse(a)?, parse(b)?])
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        macro_rules! set {
            ($flag:ident => $($field:tt)+) => {
                if let Some(v) = self.$flag.clone() {
                    cfg.$($field)+ = v;
                }
            };
        }
        set!(seed => seed);
        set!(k_aus => k_aus);
        set!(lambda_multiplier => pipeline.lambda_multiplier);
        set!(rpca_tol => pipeline.rpca.tol);
        set!(rpca_max_iter => pipeline.rpca.max_iter);
        set!(eps => pipeline.inference.eps);
        set!(min_pts => pipeline.inference.min_pts);
        set!(th_min_coeff => pipeline.inference.th_min_coeff);
        set!(th_max_coeff => pipeline.inference.th_max_coeff);
        set!(d_th => pipeline.inference.d_th);
        set!(k_values => campaign.k_values);
        set!(mcs_count => campaign.mcs_count);
        set!(base_seed => campaign.base_seed);
        set!(workers => campaign.workers);
        set!(vary_positions => campaign.vary_positions);
        set!(vary_reflection => campaign.vary_reflection);
        set!(vary_noise => campaign.vary_noise);
        if let Some(h) = self.focal_height {
            cfg.pipeline.filter.focal_height = Some(h);
        }
        if let Some(t) = self.taps {
            cfg.pipeline.filter.taps = Some(t);
        }
        if let Some(p) = self.nlos_phase {
            cfg.pipeline.nlos_phase = match p {
                Phase::PathDelay => NlosPhase::PathDelay,
                Phase::Literal => NlosPhase::Literal,
            };
        }
        self.apply_source(cfg)
    }

    fn apply_source(&self, cfg: &mut RunConfig) -> Result<()> {
        let source = match (self.source, &self.scenario_file) {
            (Some(Source::File), None) if !matches!(cfg.scenario, ScenarioSource::File { .. }) => {
                bail!("--source file needs --scenario-file")
            }
            (Some(s), _) => Some(s),
            (None, Some(_)) => Some(Source::File),
            (None, None) => None,
        };
        match source {
            Some(Source::Default) => cfg.scenario = ScenarioSource::Default,
            Some(Source::File) => {
                if let Some(path) = &self.scenario_file {
                    cfg.scenario = ScenarioSource::File { path: path.clone() };
                }
            }
            Some(Source::Scaled) if !matches!(cfg.scenario, ScenarioSource::Scaled { .. }) => {
                cfg.scenario = ScenarioSource::default();
            }
            _ => {}
        }
        let scaled_flags = self.n_side.is_some() || self.r_obj.is_some() || self.r_hum.is_some();
        match &mut cfg.scenario {
            ScenarioSource::Scaled {
                n_side,
                r_obj,
                r_hum,
            } => {
                *n_side = self.n_side.unwrap_or(*n_side);
                *r_obj = self.r_obj.unwrap_or(*r_obj);
                *r_hum = self.r_hum.unwrap_or(*r_hum);
            }
            _ if scaled_flags => bail!("--n-side/--r-obj/--r-hum apply to the scaled source only"),
            _ => {}
        }
        Ok(())
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            RunConfig::load(path).with_context(|| format!("loading config {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    cli.overrides.apply(&mut cfg)?;
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = Some(dir.clone());
    }
    cfg.validate().context("invalid configuration")?;
    Ok(cfg)
}

fn output_dir(cfg: &RunConfig) -> Result<&Path> {
    cfg.output_dir
        .as_deref()
        .context("no output directory: pass --output-dir or set LISRMAP_OUTPUT_DIR")
}

fn generate(cfg: &RunConfig, out: Option<PathBuf>) -> Result<()> {
    let (scenario, _) = single_run_inputs(cfg)?;
    let text = scenario.to_toml()?;
    let dest = out.or_else(|| cfg.output_dir.as_ref().map(|d| d.join("scenario.toml")));
    match dest {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)
                    .with_context(|| format!("creating {}", parent.display()))?;
            }
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            info!("scenario written to {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cfg: &RunConfig, observation: Option<PathBuf>, artifacts: bool) -> Result<()> {
    if artifacts {
        output_dir(cfg)?;
    }
    let (scenario, noise_seed) = single_run_inputs(cfg)?;
    let out = match observation {
        Some(path) => {
            let y = match read_tensor(&path)? {
                Tensor::Complex(y) => y,
                Tensor::Real(_) => {
                    bail!("{}: observation must be a complex tensor", path.display())
                }
            };
            let obs = ChannelObservation::from_received(y, scenario.lis.n_x, scenario.lis.n_y)
                .with_context(|| format!("observation {}", path.display()))?;
            run_on_observation(&scenario, obs, &cfg.pipeline)?
        }
        None => run_pipeline(&scenario, &cfg.pipeline, noise_seed)?,
    };
    let r = &out.report;
    let t = &out.timings;
    info!(
        "timings (s): channel {:.3}, radiomap {:.3}, rpca {:.3}, segmentation {:.3}, inference {:.3}",
        t.channel, t.radiomap, t.rpca, t.segmentation, t.inference
    );
    println!(
        "rpca: {} iterations, rank {}, converged {}",
        out.decomposition.iterations, out.decomposition.rank, out.decomposition.converged
    );
    println!(
        "shapes {}, clusters {} (human {}, object {}, noise {})",
        out.shapes.shapes.len(),
        r.n_clusters,
        r.n_human_clusters,
        r.n_object_clusters,
        r.n_noise_clusters
    );
    match r.dr {
        Some(dr) => println!(
            "LA {:.4} m, DR {:.4} ({} of {} humans)",
            r.la,
            dr,
            r.correct_humans(),
            r.accuracy.len()
        ),
        None => println!("no humans in the scenario"),
    }
    if let Some(dir) = &cfg.output_dir {
        if artifacts {
            write_artifacts(&scenario, &out, dir)?;
        } else {
            export_report(r, &dir.join("report.csv"))?;
        }
        info!("outputs written to {}", dir.display());
    }
    Ok(())
}

fn campaign(cfg: &RunConfig) -> Result<()> {
    let dir = output_dir(cfg)?;
    let result = run_campaign(cfg)?;
    write_campaign(&result, cfg, dir)?;
    println!("k,runs,mean_la,mean_dr,dr_variance");
    for s in &result.summaries {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.4}"));
        println!(
            "{},{},{:.4},{},{}",
            s.k,
            s.runs,
            s.mean_la,
            opt(s.mean_dr),
            opt(s.dr_variance)
        );
    }
    info!("campaign written to {}", dir.display());
    Ok(())
}

fn inspect(args: InspectArgs) -> Result<()> {
    let tensor = read_tensor(&args.tensor)?;
    let full = tensor.magnitude();
    let image = match (args.row, args.col) {
        (None, None) => full,
        (row, col) => {
            let line = match (row, col) {
                (Some(i), _) if i < full.nrows() => full.row(i).to_owned(),
                (_, Some(j)) if j < full.ncols() => full.column(j).to_owned(),
                _ => bail!("index out of range for a {:?} tensor", full.dim()),
            };
            let [rows, cols] = match args.shape {
                Some(s) => s,
                None => {
                    let side = (line.len() as f64).sqrt().round() as usize;
                    [side, side]
                }
            };
            if rows * cols != line.len() {
                bail!(
                    "cannot reshape {} values to {rows} x {cols}; pass --shape",
                    line.len()
                );
            }
            line.into_shape_with_order((rows, cols))?
        }
    };
    let out = args
        .out
        .unwrap_or_else(|| args.tensor.with_extension("pgm"));
    export_heatmap(&image, &out)?;
    println!("{} ({} x {})", out.display(), image.nrows(), image.ncols());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Inspect(args) => inspect(args),
        Command::Generate { ref out } => generate(&load_config(&cli)?, out.clone()),
        Command::Run {
            ref observation,
            artifacts,
        } => run(&load_config(&cli)?, observation.clone(), artifacts),
        Command::Campaign => campaign(&load_config(&cli)?),
    }
}
