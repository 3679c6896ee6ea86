//! End-to-end runs and Monte Carlo campaigns.
//!
//! A [`RunConfig`] is a TOML document:
//!
//! ```toml
//! seed = 1                 # single-run seed
//! k_aus = 9                # users for single runs
//!
//! [scenario]
//! source = "scaled"        # "default" | "scaled" | "file"
//! n_side = 64
//! r_obj = 3
//! r_hum = 3
//! # path = "scenario.toml" # for source = "file"
//!
//! [pipeline]
//! nlos_phase = "path_delay"
//! lambda_multiplier = 3.0
//! [pipeline.filter]        # focal_height, weighting, taps
//! [pipeline.rpca]          # tol, max_iter, rho, mu_scale
//! [pipeline.inference]     # eps, min_pts, th_min_coeff, th_max_coeff, d_th
//!
//! [campaign]
//! k_values = [5, 9, 20]
//! mcs_count = 200
//! base_seed = 7
//! workers = 0              # 0 = one per core
//! vary_positions = true
//! vary_reflection = true
//! vary_noise = true
//! ```
//!
//! Every key has a default, so an empty document is valid.
//!
//! Realization `i` of a campaign draws its placement, reflection-loss and noise
//! streams from `derive_seed(base_seed, stream, i)`. A disabled `vary_*` toggle
//! pins that stream to index 0. Seeds do not depend on `K`, so all `K` values
//! see the same passive-element layouts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{debug, info};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, ChannelObservation, NlosPhase};
use crate::error::{Error, Result, Stage, StageExt};
use crate::inference::{self, Class, ClusterSet, DetectionReport, InferenceParams};
use crate::io::{self, Tensor};
use crate::radiomap::{self, FilterParams, MatchedFilter, RadioMapStack};
use crate::rng::{self, derive_seed, stream};
use crate::rpca::{self, NlosMap, PcpOptions, RpcaDecomposition};
use crate::scenario::{Scenario, ScenarioParams};
use crate::segmentation::{self, BinaryMask, ShapeSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ScenarioSource {
    /// Reference room with a full-size LIS.
    Default,
    /// Desk-scale room matching an `n_side x n_side` LIS.
    Scaled {
        n_side: usize,
        r_obj: usize,
        r_hum: usize,
    },
    /// A scenario saved with `Scenario::to_toml`; its users are used as-is.
    File { path: PathBuf },
}

impl Default for ScenarioSource {
    fn default() -> Self {
        ScenarioSource::Scaled {
            n_side: 64,
            r_obj: 3,
            r_hum: 3,
        }
    }
}

impl ScenarioSource {
    /// Generation parameters for `k` users; `None` for file sources.
    pub fn params(&self, k: usize) -> Result<Option<ScenarioParams>> {
        Ok(match self {
            ScenarioSource::Default => Some(ScenarioParams {
                k_aus: k,
                ..ScenarioParams::default()
            }),
            ScenarioSource::Scaled {
                n_side,
                r_obj,
                r_hum,
            } => Some(ScenarioParams::scaled(*n_side, k, *r_obj, *r_hum)?),
            ScenarioSource::File { .. } => None,
        })
    }

    pub fn load_file(&self) -> Result<Option<Scenario>> {
        match self {
            ScenarioSource::File { path } => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                Ok(Some(Scenario::from_toml(&text)?))
            }
            _ => Ok(None),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineParams {
    pub nlos_phase: NlosPhase,
    pub filter: FilterParams,
    /// RPCA weight is `lambda_multiplier / sqrt(N)`.
    pub lambda_multiplier: f64,
    pub rpca: PcpOptions,
    pub inference: InferenceParams,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            nlos_phase: NlosPhase::default(),
            filter: FilterParams::default(),
            lambda_multiplier: 3.0,
            rpca: PcpOptions::default(),
            inference: InferenceParams::default(),
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_multiplier > 0.0 && self.lambda_multiplier.is_finite()) {
            return Err(Error::invalid("lambda_multiplier", "must be > 0"));
        }
        if !(self.rpca.tol > 0.0)
            || self.rpca.max_iter == 0
            || !(self.rpca.rho > 1.0)
            || !(self.rpca.mu_scale > 0.0)
        {
            return Err(Error::invalid(
                "rpca",
                "need tol > 0, max_iter >= 1, rho > 1, mu_scale > 0",
            ));
        }
        let inf = &self.inference;
        if !(inf.eps > 0.0) || inf.min_pts == 0 || !(inf.d_th > 0.0) {
            return Err(Error::invalid(
                "inference",
                "need eps > 0, min_pts >= 1, d_th > 0",
            ));
        }
        if !(inf.th_min_coeff >= 0.0 && inf.th_max_coeff > 0.0) {
            return Err(Error::invalid(
                "inference",
                "threshold coefficients must be non-negative",
            ));
        }
        if let Some(h) = self.filter.focal_height {
            if !(h > 0.0) {
                return Err(Error::invalid("focal_height", "must be > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignParams {
    pub k_values: Vec<usize>,
    pub mcs_count: usize,
    #[serde(with = "rng::seed_serde")]
    pub base_seed: u64,
    /// Worker threads; 0 uses one per core. Results do not depend on it.
    pub workers: usize,
    pub vary_positions: bool,
    pub vary_reflection: bool,
    pub vary_noise: bool,
}

impl Default for CampaignParams {
    fn default() -> Self {
        CampaignParams {
            k_values: vec![5, 9, 20],
            mcs_count: 200,
            base_seed: 1,
            workers: 0,
            vary_positions: true,
            vary_reflection: true,
            vary_noise: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(with = "rng::seed_serde")]
    pub seed: u64,
    pub k_aus: usize,
    pub scenario: ScenarioSource,
    pub pipeline: PipelineParams,
    pub campaign: CampaignParams,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            k_aus: 9,
            scenario: ScenarioSource::default(),
            pipeline: PipelineParams::default(),
            campaign: CampaignParams::default(),
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Format {
            kind: "run config",
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format {
            kind: "run config",
            reason: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        if self.k_aus == 0 {
            return Err(Error::invalid("k_aus", "must be >= 1"));
        }
        if self.campaign.mcs_count == 0 {
            return Err(Error::invalid("mcs_count", "must be >= 1"));
        }
        if self.campaign.k_values.is_empty() || self.campaign.k_values.contains(&0) {
            return Err(Error::invalid(
                "k_values",
                "need at least one value, all >= 1",
            ));
        }
        if let ScenarioSource::Scaled { n_side, .. } = self.scenario {
            ScenarioParams::scaled(n_side, 1, 0, 0)?;
        }
        Ok(())
    }
}

/// Wall-clock seconds spent per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub channel: f64,
    pub radiomap: f64,
    pub rpca: f64,
    pub segmentation: f64,
    pub inference: f64,
}

/// Every intermediate product of one pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub observation: ChannelObservation,
    pub filter: MatchedFilter,
    pub stack: RadioMapStack,
    pub decomposition: RpcaDecomposition,
    pub nlos: NlosMap,
    pub mask: BinaryMask,
    pub shapes: ShapeSet,
    pub clusters: ClusterSet,
    pub labels: Vec<Class>,
    pub report: DetectionReport,
    pub timings: StageTimings,
}

/// Matched filter for `scenario` under `params`. Focal height defaults to the
/// LIS-to-user distance (mean user height); taps default to the full grid.
pub fn filter_for(scenario: &Scenario, params: &FilterParams) -> Result<MatchedFilter> {
    let focal = match params.focal_height {
        Some(h) => h,
        None => {
            if scenario.aus.is_empty() {
                return Err(Error::Empty("active users (needed for the focal height)"));
            }
            let z =
                scenario.aus.iter().map(|a| a.position[2]).sum::<f64>() / scenario.aus.len() as f64;
            scenario.lis.height_z - z
        }
    };
    let taps = params.taps.unwrap_or([scenario.lis.n_x, scenario.lis.n_y]);
    radiomap::build_filter(
        &scenario.lis,
        scenario.wavelength,
        scenario.room.size_z,
        focal,
        params.weighting,
        taps,
    )
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Runs the pipeline on a synthesized observation of `scenario`.
pub fn run_pipeline(
    scenario: &Scenario,
    params: &PipelineParams,
    noise_seed: u64,
) -> Result<PipelineOutput> {
    params.validate()?;
    let t = Instant::now();
    let model = ChannelModel {
        nlos_phase: params.nlos_phase,
    };
    let obs = model.observe(scenario, noise_seed).stage(Stage::Channel)?;
    let channel = secs(t);
    let mut out = run_on_observation(scenario, obs, params)?;
    out.timings.channel = channel;
    Ok(out)
}

/// Runs the pipeline on a given observation. `scenario` supplies the LIS
/// geometry, the focal height default and the ground truth.
pub fn run_on_observation(
    scenario: &Scenario,
    obs: ChannelObservation,
    params: &PipelineParams,
) -> Result<PipelineOutput> {
    params.validate()?;
    if (obs.n_x, obs.n_y) != (scenario.lis.n_x, scenario.lis.n_y) {
        return Err(Error::mismatch(
            format!("{} x {} grid", scenario.lis.n_x, scenario.lis.n_y),
            format!("{} x {} grid", obs.n_x, obs.n_y),
        )
        .at(Stage::RadioMap));
    }
    let mut timings = StageTimings::default();

    let t = Instant::now();
    let filter = filter_for(scenario, &params.filter).stage(Stage::RadioMap)?;
    let stack = radiomap::build_stack(&filter, &obs).stage(Stage::RadioMap)?;
    timings.radiomap = secs(t);

    let t = Instant::now();
    let lambda = rpca::lambda_for(stack.maps.ncols(), params.lambda_multiplier);
    let decomposition =
        rpca::pcp_solve(stack.maps.view(), lambda, &params.rpca).stage(Stage::Rpca)?;
    let nlos = rpca::reduce_nlos(&decomposition, stack.n_x, stack.n_y).stage(Stage::Rpca)?;
    timings.rpca = secs(t);

    let t = Instant::now();
    let mask = segmentation::kmeans2(nlos.values.view());
    let shapes = segmentation::trace_shapes(&mask, &nlos).stage(Stage::Segmentation)?;
    timings.segmentation = secs(t);

    let t = Instant::now();
    let (clusters, labels, report) = inference::infer(
        &shapes,
        &scenario.lis,
        &scenario.human_positions(),
        &scenario.object_positions(),
        &params.inference,
    )
    .stage(Stage::Inference)?;
    timings.inference = secs(t);

    debug!(
        "seed {}: rpca {} iterations (residual {:.2e}, rank {}, sparsity {:.3}), {} shapes, {} clusters, timings {:?}",
        scenario.rng_seed,
        decomposition.iterations,
        decomposition.residual,
        decomposition.rank,
        decomposition.sparsity(),
        shapes.shapes.len(),
        clusters.clusters.len(),
        timings
    );
    Ok(PipelineOutput {
        observation: obs,
        filter,
        stack,
        decomposition,
        nlos,
        mask,
        shapes,
        clusters,
        labels,
        report,
        timings,
    })
}

/// Scenario and noise seed of a single run with `config.seed`.
pub fn single_run_inputs(config: &RunConfig) -> Result<(Scenario, u64)> {
    let scenario = match config.scenario.load_file().stage(Stage::Scenario)? {
        Some(s) => s,
        None => config
            .scenario
            .params(config.k_aus)
            .and_then(|p| p.expect("generated source").generate(config.seed))
            .stage(Stage::Scenario)?,
    };
    Ok((scenario, derive_seed(config.seed, stream::NOISE, 0)))
}

/// Seeds of realization `index` in a campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RealizationSeeds {
    pub record: u64,
    pub placement: u64,
    pub reflection: u64,
    pub noise: u64,
}

impl RealizationSeeds {
    pub fn new(campaign: &CampaignParams, index: usize) -> Self {
        let base = campaign.base_seed;
        let i = index as u64;
        let pick = |vary: bool| if vary { i } else { 0 };
        RealizationSeeds {
            record: derive_seed(base, stream::REALIZATION, i),
            placement: derive_seed(base, stream::PLACEMENT, pick(campaign.vary_positions)),
            reflection: derive_seed(base, stream::REFLECTION, pick(campaign.vary_reflection)),
            noise: derive_seed(base, stream::NOISE, pick(campaign.vary_noise)),
        }
    }
}

/// Per-realization summary row.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationRecord {
    pub k: usize,
    pub index: usize,
    pub seed: u64,
    pub n_humans: usize,
    pub n_correct: usize,
    pub la: f64,
    pub dr: Option<f64>,
    pub n_shapes: usize,
    pub n_clusters: usize,
    pub n_human_clusters: usize,
    pub n_object_clusters: usize,
    pub n_noise_clusters: usize,
    pub matched_detections: usize,
    pub rpca_iterations: usize,
    pub rpca_converged: bool,
    pub rpca_rank: usize,
}

/// Runs realization `index` with `k` users. `file_scenario` replaces generation
/// when the config source is a file.
pub fn run_realization(
    config: &RunConfig,
    file_scenario: Option<&Scenario>,
    k: usize,
    index: usize,
) -> Result<(RealizationRecord, DetectionReport)> {
    let seeds = RealizationSeeds::new(&config.campaign, index);
    let scenario = match file_scenario {
        Some(s) => s.clone(),
        None => config
            .scenario
            .params(k)
            .and_then(|p| {
                p.expect("generated source").generate_with(
                    seeds.record,
                    seeds.placement,
                    seeds.reflection,
                )
            })
            .stage(Stage::Scenario)?,
    };
    let out = run_pipeline(&scenario, &config.pipeline, seeds.noise)?;
    let r = &out.report;
    let record = RealizationRecord {
        k: scenario.k(),
        index,
        seed: seeds.record,
        n_humans: r.accuracy.len(),
        n_correct: r.correct_humans(),
        la: r.la,
        dr: r.dr,
        n_shapes: out.shapes.shapes.len(),
        n_clusters: r.n_clusters,
        n_human_clusters: r.n_human_clusters,
        n_object_clusters: r.n_object_clusters,
        n_noise_clusters: r.n_noise_clusters,
        matched_detections: r.matched_detections,
        rpca_iterations: out.decomposition.iterations,
        rpca_converged: out.decomposition.converged,
        rpca_rank: out.decomposition.rank,
    };
    Ok((record, out.report))
}

/// Aggregates for one `K` value.
#[derive(Debug, Clone, PartialEq)]
pub struct KSummary {
    pub k: usize,
    pub runs: usize,
    pub mean_la: f64,
    /// `None` when no realization has humans.
    pub mean_dr: Option<f64>,
    /// Population variance of the per-run DR.
    pub dr_variance: Option<f64>,
    pub mean_rpca_iterations: f64,
    /// `ccdf[m] = P(#correct >= m)` for `m = 0..=R_hum`.
    pub ccdf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    /// Ordered by `K` (as configured), then realization index.
    pub records: Vec<RealizationRecord>,
    pub reports: Vec<DetectionReport>,
    pub summaries: Vec<KSummary>,
}

/// `P(X >= m)` for `m = 0..=max_m`.
pub fn ccdf(counts: &[usize], max_m: usize) -> Vec<f64> {
    let n = counts.len() as f64;
    (0..=max_m)
        .map(|m| {
            if counts.is_empty() {
                if m == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                counts.iter().filter(|c| **c >= m).count() as f64 / n
            }
        })
        .collect()
}

pub fn summarize(k: usize, records: &[RealizationRecord]) -> KSummary {
    let n = records.len() as f64;
    let mean_la = records.iter().map(|r| r.la).sum::<f64>() / n;
    let drs: Vec<f64> = records.iter().filter_map(|r| r.dr).collect();
    let (mean_dr, dr_variance) = if drs.is_empty() {
        (None, None)
    } else {
        let m = drs.iter().sum::<f64>() / drs.len() as f64;
        let v = drs.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / drs.len() as f64;
        (Some(m), Some(v))
    };
    let max_m = records.iter().map(|r| r.n_humans).max().unwrap_or(0);
    let counts: Vec<usize> = records.iter().map(|r| r.n_correct).collect();
    KSummary {
        k,
        runs: records.len(),
        mean_la,
        mean_dr,
        dr_variance,
        mean_rpca_iterations: records
            .iter()
            .map(|r| r.rpca_iterations as f64)
            .sum::<f64>()
            / n,
        ccdf: ccdf(&counts, max_m),
    }
}

/// Runs `mcs_count` realizations for every configured `K`.
///
/// Realizations run in parallel on `campaign.workers` threads, each one
/// single-threaded; results are collected by index so the output does not
/// depend on scheduling.
pub fn run_campaign(config: &RunConfig) -> Result<CampaignResult> {
    config.validate()?;
    let file_scenario = config.scenario.load_file().stage(Stage::Scenario)?;
    let k_values: Vec<usize> = match &file_scenario {
        Some(s) => {
            if config.campaign.k_values != [s.k()] {
                log::warn!("scenario file fixes K = {}; ignoring k_values", s.k());
            }
            vec![s.k()]
        }
        None => config.campaign.k_values.clone(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.campaign.workers)
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))?;

    let mut records = Vec::new();
    let mut reports = Vec::new();
    let mut summaries = Vec::new();
    for &k in &k_values {
        let t = Instant::now();
        let results: Vec<(RealizationRecord, DetectionReport)> = pool.install(|| {
            (0..config.campaign.mcs_count)
                .into_par_iter()
                .map(|i| run_realization(config, file_scenario.as_ref(), k, i))
                .collect::<Result<Vec<_>>>()
        })?;
        let (recs, reps): (Vec<_>, Vec<_>) = results.into_iter().unzip();
        let summary = summarize(k, &recs);
        info!(
            "K = {k}: {} runs in {:.2} s, mean LA {:.4} m, mean DR {}, mean RPCA iterations {:.1}",
            recs.len(),
            secs(t),
            summary.mean_la,
            io::fmt_opt(summary.mean_dr),
            summary.mean_rpca_iterations
        );
        summaries.push(summary);
        records.extend(recs);
        reports.extend(reps);
    }
    Ok(CampaignResult {
        records,
        reports,
        summaries,
    })
}

pub const REALIZATIONS_HEADER: [&str; 16] = [
    "k",
    "index",
    "seed",
    "n_humans",
    "n_correct",
    "la",
    "dr",
    "n_shapes",
    "n_clusters",
    "n_human",
    "n_object",
    "n_noise",
    "matched_detections",
    "rpca_iterations",
    "rpca_converged",
    "rpca_rank",
];

pub const SUMMARY_HEADER: [&str; 6] = [
    "k",
    "runs",
    "mean_la",
    "mean_dr",
    "dr_variance",
    "mean_rpca_iterations",
];

pub const CCDF_HEADER: [&str; 3] = ["k", "m", "ccdf"];

/// Writes `realizations.csv`, `summary.csv`, `ccdf.csv` and the resolved `config.toml` into `dir`.
pub fn write_campaign(result: &CampaignResult, config: &RunConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    io::export_csv(
        &dir.join("realizations.csv"),
        &REALIZATIONS_HEADER,
        result.records.iter().map(|r| {
            vec![
                r.k.to_string(),
                r.index.to_string(),
                r.seed.to_string(),
                r.n_humans.to_string(),
                r.n_correct.to_string(),
                r.la.to_string(),
                io::fmt_opt(r.dr),
                r.n_shapes.to_string(),
                r.n_clusters.to_string(),
                r.n_human_clusters.to_string(),
                r.n_object_clusters.to_string(),
                r.n_noise_clusters.to_string(),
                r.matched_detections.to_string(),
                r.rpca_iterations.to_string(),
                r.rpca_converged.to_string(),
                r.rpca_rank.to_string(),
            ]
        }),
    )?;
    io::export_csv(
        &dir.join("summary.csv"),
        &SUMMARY_HEADER,
        result.summaries.iter().map(|s| {
            vec![
                s.k.to_string(),
                s.runs.to_string(),
                s.mean_la.to_string(),
                io::fmt_opt(s.mean_dr),
                io::fmt_opt(s.dr_variance),
                s.mean_rpca_iterations.to_string(),
            ]
        }),
    )?;
    io::export_csv(
        &dir.join("ccdf.csv"),
        &CCDF_HEADER,
        result.summaries.iter().flat_map(|s| {
            s.ccdf
                .iter()
                .enumerate()
                .map(move |(m, p)| vec![s.k.to_string(), m.to_string(), p.to_string()])
        }),
    )?;
    let cfg = dir.join("config.toml");
    fs::write(&cfg, config.to_toml()?).map_err(|e| Error::io(&cfg, e))
}

/// Persists every intermediate product of a run into `dir`:
/// `scenario.toml`, `y.lrmt`, `stack.lrmt`, `low_rank.lrmt`, `sparse.lrmt`,
/// per-user `map_<k>.pgm`, `nlos.pgm`, `mask.pgm`, `overlay.pgm`,
/// `shapes.csv` and `report.csv`.
pub fn write_artifacts(scenario: &Scenario, out: &PipelineOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let scen = dir.join("scenario.toml");
    fs::write(&scen, scenario.to_toml()?).map_err(|e| Error::io(&scen, e))?;
    io::write_tensor(
        &dir.join("y.lrmt"),
        &Tensor::Complex(out.observation.y.clone()),
    )?;
    io::write_tensor(
        &dir.join("stack.lrmt"),
        &Tensor::Real(out.stack.maps.clone()),
    )?;
    io::write_tensor(
        &dir.join("low_rank.lrmt"),
        &Tensor::Real(out.decomposition.low_rank.clone()),
    )?;
    io::write_tensor(
        &dir.join("sparse.lrmt"),
        &Tensor::Real(out.decomposition.sparse.clone()),
    )?;
    for k in 0..out.stack.k() {
        io::export_heatmap(&out.stack.map(k), &dir.join(format!("map_{k}.pgm")))?;
    }
    let los = rpca::reduce_los(&out.decomposition, out.stack.n_x, out.stack.n_y)?;
    io::export_heatmap(&los, &dir.join("los.pgm"))?;
    io::export_heatmap(&out.nlos.values, &dir.join("nlos.pgm"))?;
    let mask: Array2<f64> = out.mask.classes.mapv(f64::from);
    io::export_heatmap(&mask, &dir.join("mask.pgm"))?;
    io::export_heatmap(&io::shape_overlay(&out.shapes), &dir.join("overlay.pgm"))?;
    io::export_shapes(&out.shapes, &dir.join("shapes.csv"))?;
    io::export_report(&out.report, &dir.join("report.csv"))
}

/// Loads a scenario file written by [`write_artifacts`] or `Scenario::to_toml`.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    ScenarioSource::File {
        path: path.to_path_buf(),
    }
    .load_file()
    .map(|s| s.expect("file source"))
}
