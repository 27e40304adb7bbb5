use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};

use semsample_core::agent::{Checkpoint, PolicySnapshot, Trainer};
use semsample_core::channel::{self_check, ChannelCheck};
use semsample_core::ingest::FootageClip;
use semsample_core::simulator::{run_comparison, EnvCursor, PolicySpec, SamplingEnv, COMPARISON_HEADER};
use semsample_core::VehicleClass;

use crate::config::{ClipSource, ExperimentConfig};
use crate::manifest::{input_entry, OutputDir, OutputEntry, RunManifest};
use crate::{Classify, CliError, CliResult};

pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const CURVE_FILE: &str = "curve.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const COMPARISON_CSV: &str = "comparison.csv";
pub const COMPARISON_JSON: &str = "comparison.json";

/// Config file plus command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct Common {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

impl Common {
    fn load(&self) -> CliResult<(ExperimentConfig, PathBuf, Vec<OutputEntry>)> {
        let (mut cfg, base, inputs) = match &self.config {
            Some(p) => {
                let cfg = ExperimentConfig::load(p).usage()?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (cfg, base, vec![input_entry(p).usage()?])
            }
            None => (ExperimentConfig::default(), PathBuf::from("."), Vec::new()),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok((cfg, base, inputs))
    }
}

fn effective_toml(cfg: &ExperimentConfig) -> CliResult<String> {
    cfg.to_toml().runtime()
}

#[derive(Clone, Debug, Default)]
pub struct TrainArgs {
    pub common: Common,
    pub episodes: Option<usize>,
    pub resume: bool,
}

/// What `checkpoint.json` holds: learner state plus the scene draw position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainCheckpoint {
    pub trainer: Checkpoint,
    pub env: EnvCursor,
    pub config_sha256: String,
}

pub fn train(args: &TrainArgs) -> CliResult<RunManifest> {
    let (mut cfg, base, inputs) = args.common.load()?;
    if let Some(n) = args.episodes {
        cfg.train.episodes = n;
    }
    cfg.validate().usage()?;
    let config_text = effective_toml(&cfg)?;
    // The episode count may change between a run and its resumption.
    let mut fingerprint_cfg = cfg.clone();
    fingerprint_cfg.train.episodes = 0;
    let fingerprint = crate::manifest::sha256_hex(effective_toml(&fingerprint_cfg)?.as_bytes());

    let episode = Arc::new(cfg.episode_config().usage()?);
    let clips = cfg.load_train_clips(&base).usage()?;
    let mut env = SamplingEnv::new(Arc::clone(&episode), clips, cfg.seed).usage()?;
    let mut out = OutputDir::create(&args.common.out).usage()?;

    let ckpt_path = out.root().join(CHECKPOINT_FILE);
    let mut trainer = if args.resume && ckpt_path.exists() {
        let text = std::fs::read_to_string(&ckpt_path).usage()?;
        let saved: TrainCheckpoint = serde_json::from_str(&text).context("reading checkpoint").usage()?;
        if saved.config_sha256 != fingerprint {
            return Err(CliError::Usage(anyhow!("checkpoint was written with a different configuration")));
        }
        env.restore(saved.env).usage()?;
        log::info!("resuming after {} episodes", saved.trainer.episodes_done);
        Trainer::from_checkpoint(saved.trainer).usage()?
    } else {
        Trainer::new(cfg.sac.clone(), episode.state.dim(), &cfg.train_config()).usage()?
    };

    let save = |trainer: &Trainer, env: &SamplingEnv, out: &mut OutputDir| -> CliResult<()> {
        let ck = TrainCheckpoint { trainer: trainer.checkpoint(), env: env.cursor(), config_sha256: fingerprint.clone() };
        out.write(CHECKPOINT_FILE, serde_json::to_string(&ck).runtime()?.as_bytes()).runtime()?;
        Ok(())
    };

    while trainer.episodes_done() < cfg.train.episodes {
        let rec = trainer.run_episode(&mut env).runtime()?;
        if (rec.episode + 1) % 10 == 0 {
            log::info!(
                "episode {:>5}  reward {:>9.3}  samples {:>4}  temperature {:.5}",
                rec.episode + 1,
                rec.cum_reward,
                rec.samples,
                rec.temperature
            );
        }
        let every = cfg.train.checkpoint_every;
        if every > 0 && trainer.episodes_done() % every == 0 {
            save(&trainer, &env, &mut out)?;
        }
    }
    save(&trainer, &env, &mut out)?;
    out.write(SNAPSHOT_FILE, trainer.agent().snapshot().to_json().runtime()?.as_bytes()).runtime()?;
    out.write(CURVE_FILE, trainer.curve_csv().as_bytes()).runtime()?;
    out.write(CONFIG_FILE, config_text.as_bytes()).runtime()?;
    out.finish("train", &config_text, vec![("seed".into(), cfg.seed)], inputs).runtime()
}

#[derive(Clone, Debug, Default)]
pub struct EvaluateArgs {
    pub common: Common,
    pub snapshot: Option<PathBuf>,
    /// Replaces the configured evaluation clips.
    pub clips: Vec<PathBuf>,
}

fn file_safe(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' }).collect()
}

/// Result of `evaluate`: the manifest and a human-readable comparison table.
pub struct EvaluateReport {
    pub manifest: RunManifest,
    pub table: String,
}

pub fn evaluate(args: &EvaluateArgs) -> CliResult<EvaluateReport> {
    let (cfg, base, mut inputs) = args.common.load()?;
    let episode = Arc::new(cfg.episode_config().usage()?);
    let sources: Vec<ClipSource> = if args.clips.is_empty() {
        cfg.eval_clips.clone()
    } else {
        args.clips.iter().map(ClipSource::from_path).collect()
    };
    if sources.is_empty() {
        return Err(CliError::Usage(anyhow!("no evaluation clips given")));
    }
    let clip_base = if args.clips.is_empty() { base } else { PathBuf::new() };
    let clips = cfg.load_eval_clips(&clip_base, &sources).usage()?;
    for p in &args.clips {
        inputs.push(input_entry(p).usage()?);
    }

    let mut specs = Vec::new();
    if let Some(path) = &args.snapshot {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).usage()?;
        let snap = PolicySnapshot::from_json(&text).usage()?;
        if snap.state_dim != episode.state.dim() {
            return Err(CliError::Usage(anyhow!(
                "snapshot expects {} state features but the configuration produces {}",
                snap.state_dim,
                episode.state.dim()
            )));
        }
        inputs.push(input_entry(path).usage()?);
        specs.push(PolicySpec::Agent { snapshot: Arc::new(snap), mode: cfg.evaluate.agent_mode });
    }
    for b in &cfg.evaluate.baselines {
        specs.push(PolicySpec::parse_baseline(b).usage()?);
    }
    if specs.is_empty() {
        return Err(CliError::Usage(anyhow!("nothing to evaluate: no snapshot and no baselines")));
    }

    let results = run_comparison(Arc::clone(&episode), &clips, &specs, cfg.seed).runtime()?;
    let mut out = OutputDir::create(&args.common.out).usage()?;
    let mut csv = format!("{COMPARISON_HEADER}\n");
    for (row, _) in &results {
        csv.push_str(&row.csv_row());
        csv.push('\n');
    }
    out.write(COMPARISON_CSV, csv.as_bytes()).runtime()?;
    let rows: Vec<_> = results.iter().map(|(r, _)| r).collect();
    out.write(COMPARISON_JSON, serde_json::to_string_pretty(&rows).runtime()?.as_bytes()).runtime()?;
    if cfg.evaluate.traces {
        for (row, metrics) in &results {
            let name = format!("traces/{}__{}.jsonl", file_safe(&row.clip), file_safe(&row.policy));
            out.write(&name, metrics.trace_jsonl().runtime()?.as_bytes()).runtime()?;
        }
    }
    let config_text = effective_toml(&cfg)?;
    out.write(CONFIG_FILE, config_text.as_bytes()).runtime()?;
    let table = comparison_table(&results.iter().map(|(r, _)| r.clone()).collect::<Vec<_>>());
    let manifest = out.finish("evaluate", &config_text, vec![("seed".into(), cfg.seed)], inputs).runtime()?;
    Ok(EvaluateReport { manifest, table })
}

fn comparison_table(rows: &[semsample_core::simulator::ComparisonRow]) -> String {
    let mut s = format!(
        "{:<16} {:<18} {:>12} {:>14} {:>10} {:>8} {:>7}\n",
        "clip", "policy", "reward", "energy (J)", "deviation", "samples", "forced"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<16} {:<18} {:>12.3} {:>14.3} {:>10.4} {:>8} {:>7}\n",
            r.clip, r.policy, r.cumulative_reward, r.total_energy_j, r.mean_deviation, r.sample_count, r.forced_samples
        ));
    }
    s
}

#[derive(Clone, Debug)]
pub struct ChannelCheckArgs {
    pub config: Option<PathBuf>,
    pub m: Option<f64>,
    pub m_s: Option<f64>,
    pub draws: usize,
    pub bits: usize,
    pub seed: Option<u64>,
}

impl Default for ChannelCheckArgs {
    fn default() -> Self {
        ChannelCheckArgs { config: None, m: None, m_s: None, draws: 1_000_000, bits: 22, seed: None }
    }
}

pub fn channel_report(c: &ChannelCheck) -> String {
    let mut s = format!("F fading m = {}, m_s = {}, mean gain {:.6e}, {} draws\n", c.m, c.m_s, c.g_bar, c.draws);
    s.push_str(&format!("E[1/g] * g_bar = {:.6}\n", c.normalized_inverse_moment));
    s.push_str(&format!(
        "{:<34} {:>14} {:>14} {:>10} {:>14} {:>10}  {}\n",
        "quantity", "closed form", "monte carlo", "rel err", "quadrature", "rel err", "status"
    ));
    for l in &c.lines {
        let (mc, mce) = match (l.monte_carlo, l.mc_error()) {
            (Some(v), Some(e)) => (format!("{v:.6e}"), format!("{e:.2e}")),
            _ => ("-".into(), "-".into()),
        };
        s.push_str(&format!(
            "{:<34} {:>14.6e} {:>14} {:>10} {:>14.6e} {:>10.2e}  {}\n",
            l.name,
            l.closed_form,
            mc,
            mce,
            l.quadrature,
            l.quadrature_error(),
            if l.passed() { "ok" } else { "FAIL" }
        ));
    }
    s
}

pub fn channel_check(args: &ChannelCheckArgs) -> CliResult<ChannelCheck> {
    let common = Common { config: args.config.clone(), seed: args.seed, out: PathBuf::new() };
    let (mut cfg, _, _) = common.load()?;
    if let Some(m) = args.m {
        cfg.channel.m = m;
    }
    if let Some(m_s) = args.m_s {
        cfg.channel.m_s = m_s;
    }
    let model = cfg.channel.model().usage()?;
    let check = self_check(&model, args.draws, args.bits, cfg.seed).usage()?;
    print!("{}", channel_report(&check));
    if !check.passed() {
        return Err(CliError::Runtime(anyhow!("channel self-check exceeded its tolerances")));
    }
    Ok(check)
}

#[derive(Clone, Debug, Default)]
pub struct IngestArgs {
    pub input: PathBuf,
    /// Defaults to the input path with a `.json` extension.
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipSummary {
    pub name: String,
    pub frames: usize,
    pub vehicles: usize,
    pub class_histogram: Vec<(String, usize)>,
    pub sha256: String,
}

pub fn ingest(args: &IngestArgs) -> CliResult<ClipSummary> {
    let clip = FootageClip::load(&args.input).with_context(|| format!("parsing {}", args.input.display())).usage()?;
    let json = clip.to_json().runtime()?;
    let out = args.out.clone().unwrap_or_else(|| args.input.with_extension("json"));
    if out == args.input {
        return Err(CliError::Usage(anyhow!("output would overwrite the input {}", out.display())));
    }
    std::fs::write(&out, &json).with_context(|| format!("writing {}", out.display())).runtime()?;
    let hist = clip.class_histogram();
    let summary = ClipSummary {
        name: clip.name().to_string(),
        frames: clip.len(),
        vehicles: clip.vehicle_count(),
        class_histogram: VehicleClass::ALL.iter().map(|c| (c.label().to_string(), hist[c.index()])).collect(),
        sha256: crate::manifest::sha256_hex(json.as_bytes()),
    };
    println!("{}", serde_json::to_string_pretty(&summary).runtime()?);
    Ok(summary)
}

#[derive(Clone, Debug)]
pub struct GenerateArgs {
    pub config: Option<PathBuf>,
    /// Index into the configured training clips, or evaluation clips with `eval`.
    pub index: usize,
    pub eval: bool,
    pub out: PathBuf,
}

/// Writes one configured synthetic clip as native JSON.
pub fn generate(args: &GenerateArgs) -> CliResult<ClipSummary> {
    let common = Common { config: args.config.clone(), seed: None, out: PathBuf::new() };
    let (cfg, base, _) = common.load()?;
    let list = if args.eval { &cfg.eval_clips } else { &cfg.train_clips };
    let source = list.get(args.index).ok_or_else(|| CliError::Usage(anyhow!("no clip with index {}", args.index)))?;
    let clip = source.load(&base, args.index).usage()?;
    let json = clip.to_json().runtime()?;
    std::fs::write(&args.out, &json).with_context(|| format!("writing {}", args.out.display())).runtime()?;
    let hist = clip.class_histogram();
    Ok(ClipSummary {
        name: clip.name().to_string(),
        frames: clip.len(),
        vehicles: clip.vehicle_count(),
        class_histogram: VehicleClass::ALL.iter().map(|c| (c.label().to_string(), hist[c.index()])).collect(),
        sha256: crate::manifest::sha256_hex(json.as_bytes()),
    })
}
