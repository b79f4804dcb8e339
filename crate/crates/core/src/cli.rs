//! The `medet` command-line front end.
//!
//! Every subcommand resolves its settings from built-in defaults, then an
//! optional `--config` file (`key = value`), then command-line flags, and
//! records the expanded result in `<out>/run.meta`. A `run.meta` can be fed
//! back through `--config` to replay a run. Exit codes: 0 success, 1 usage
//! error, 2 data error.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::adjust::{
    adjust_matrix, cluster_population, compute_bias, mined_population, predicted_population,
    BiasVector, ClusterParams, Population,
};
use crate::augment::AttentionWeights;
use crate::error::Error;
use crate::imram::{hinge_loss, similarity_matrix, MatchParams, SetPair};
use crate::manifest::{self, KeyValues};
use crate::mining::{mine_dataset, read_mined, write_mined, MiningParams};
use crate::synth::{
    biased_scores, concept_frequency, eval_bias, eval_mining, generate_world, read_truth,
    score_labels, write_bias_csv, write_histogram_csv, write_mining_csv, ScorerParams, WorldConfig,
};
use crate::tensor_io::{load_dataset, load_tensor, save_tensor, ConceptOrigin};

pub const RUN_META: &str = "run.meta";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

/// Settings and their defaults. Empty values mean "not set".
const DEFAULTS: &[(&str, &str)] = &[
    ("adjusted", ""),
    ("base_concepts", "15"),
    ("base_novel_ratio", "3"),
    ("batch_size", "8"),
    ("bias", ""),
    ("center_sigma", "3"),
    ("data", ""),
    ("dim", "64"),
    ("distractors_per_image", "5"),
    ("fragment_rate", "0.3"),
    ("gamma", "0.4"),
    ("image_height", "480"),
    ("image_width", "640"),
    ("images", "200"),
    ("iou_threshold", "0.5"),
    ("margin", "0.2"),
    ("mined", ""),
    ("min_angle_deg", "60"),
    ("neighbor_fraction", "0.02"),
    ("noise", "0.1"),
    ("novel_concepts", "5"),
    ("objects_per_image", "3"),
    ("population", "mined"),
    ("proposals_per_object", "3"),
    ("raw", ""),
    ("scorer_inflation", "0.3"),
    ("scorer_scale", "10"),
    ("scores", ""),
    ("seed", "42"),
    ("steps", "3"),
    ("temperature", "10"),
    ("theta_iou", "0.6"),
    ("top_k", "3"),
    ("truth", ""),
    ("use_augmentation", "false"),
    ("weights", ""),
    ("workers", "1"),
];

const WORLD_KEYS: &[&str] = &[
    "seed",
    "dim",
    "base_concepts",
    "novel_concepts",
    "images",
    "objects_per_image",
    "proposals_per_object",
    "distractors_per_image",
    "fragment_rate",
    "noise",
    "base_novel_ratio",
    "min_angle_deg",
    "image_width",
    "image_height",
    "scorer_scale",
    "scorer_inflation",
];

#[derive(Debug, Parser)]
#[command(
    name = "medet",
    version,
    about = "Proposal mining and class-wise score adjustment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic world with ground truth and biased scores.
    Synth(SynthArgs),
    /// Mine proposal-concept pairs from a dataset.
    Mine(MineArgs),
    /// Set similarity matrix and hinge loss over batches of mined sets.
    Score(ScoreArgs),
    /// Cluster proposal embeddings per concept and write the bias vector.
    Calibrate(CalibrateArgs),
    /// Apply the bias vector to a score tensor.
    Adjust(AdjustArgs),
    /// Evaluate mined pairs and/or raw vs adjusted scores against ground truth.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// `key = value` settings file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    base_concepts: Option<usize>,
    #[arg(long)]
    novel_concepts: Option<usize>,
    #[arg(long)]
    images: Option<usize>,
    #[arg(long)]
    objects_per_image: Option<usize>,
    #[arg(long)]
    proposals_per_object: Option<usize>,
    #[arg(long = "distractors")]
    distractors_per_image: Option<usize>,
    #[arg(long)]
    fragment_rate: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    base_novel_ratio: Option<f64>,
    #[arg(long = "min-angle")]
    min_angle_deg: Option<f64>,
    #[arg(long)]
    image_width: Option<f64>,
    #[arg(long)]
    image_height: Option<f64>,
    #[arg(long)]
    scorer_scale: Option<f64>,
    #[arg(long)]
    scorer_inflation: Option<f64>,
}

#[derive(Debug, Args)]
struct MineArgs {
    #[command(flatten)]
    common: Common,
    /// Dataset manifest.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    theta_iou: Option<f64>,
    #[arg(long)]
    top_k: Option<usize>,
    /// Attention weight bundle; enables concept augmentation.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Enable concept augmentation with weights seeded from `--seed`.
    #[arg(long)]
    augment: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[command(flatten)]
    common: Common,
    /// Directory written by `mine`.
    #[arg(long)]
    mined: Option<PathBuf>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    mined: Option<PathBuf>,
    /// Dataset manifest (vocabulary, and the `predicted` population).
    #[arg(long)]
    data: Option<PathBuf>,
    /// `mined` or `predicted`.
    #[arg(long)]
    population: Option<String>,
    #[arg(long)]
    neighbor_fraction: Option<f64>,
    #[arg(long)]
    center_sigma: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Debug, Args)]
struct AdjustArgs {
    #[command(flatten)]
    common: Common,
    /// Raw score tensor (proposals x concepts).
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Bias vector JSON.
    #[arg(long)]
    bias: Option<PathBuf>,
    /// Overrides the bias file's gamma.
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    mined: Option<PathBuf>,
    #[arg(long)]
    raw: Option<PathBuf>,
    #[arg(long)]
    adjusted: Option<PathBuf>,
    #[arg(long)]
    iou_threshold: Option<f64>,
}

/// Failure of a CLI run, mapped onto an exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Effective settings after merging defaults, config file and flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub subcommand: String,
    pub out: PathBuf,
    values: BTreeMap<String, String>,
    explicit: BTreeSet<String>,
}

impl RunConfig {
    fn new(subcommand: &str, common: &Common) -> Result<Self, CliError> {
        let mut cfg = Self {
            subcommand: subcommand.to_string(),
            out: common.out.clone(),
            values: DEFAULTS
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            explicit: BTreeSet::new(),
        };
        if let Some(path) = &common.config {
            let kv = KeyValues::load(path).map_err(|e| usage(e.to_string()))?;
            cfg.apply_file(&kv)?;
        }
        cfg.set("workers", common.workers);
        Ok(cfg)
    }

    fn apply_file(&mut self, kv: &KeyValues) -> Result<(), CliError> {
        for (key, value) in kv.iter() {
            if key == "subcommand" {
                if value != self.subcommand {
                    return Err(usage(format!(
                        "config is for subcommand `{value}`, not `{}`",
                        self.subcommand
                    )));
                }
                continue;
            }
            if !self.values.contains_key(key) {
                return Err(usage(format!("unknown config key `{key}`")));
            }
            self.values.insert(key.to_string(), value.to_string());
            self.explicit.insert(key.to_string());
        }
        Ok(())
    }

    fn set<T: Display>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            debug_assert!(self.values.contains_key(key), "{key}");
            self.values.insert(key.to_string(), v.to_string());
            self.explicit.insert(key.to_string());
        }
    }

    fn set_path(&mut self, key: &str, value: &Option<PathBuf>) {
        self.set(key, value.as_ref().map(|p| p.display().to_string()));
    }

    /// Typed value of a setting.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        let raw = self
            .values
            .get(key)
            .ok_or_else(|| usage(format!("unknown setting `{key}`")))?;
        raw.parse()
            .map_err(|e| usage(format!("invalid value `{raw}` for `{key}`: {e}")))
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).filter(|v| !v.is_empty()).map(PathBuf::from)
    }

    fn require_path(&self, key: &str) -> Result<PathBuf, CliError> {
        self.path(key).ok_or_else(|| {
            usage(format!(
                "`{}` requires --{}",
                self.subcommand,
                key.replace('_', "-")
            ))
        })
    }

    fn workers(&self) -> Result<usize, CliError> {
        let w: usize = self.get("workers")?;
        if w == 0 {
            return Err(usage("workers must be at least 1"));
        }
        Ok(w)
    }

    pub fn mining_params(&self) -> Result<MiningParams, CliError> {
        let p = MiningParams {
            theta_iou: self.get("theta_iou")?,
            top_k: self.get("top_k")?,
            use_augmentation: self.get("use_augmentation")?,
        };
        p.validate().map_err(|e| usage(e.to_string()))?;
        Ok(p)
    }

    pub fn match_params(&self) -> Result<MatchParams, CliError> {
        let p = MatchParams {
            steps: self.get("steps")?,
            margin: self.get("margin")?,
            temperature: self.get("temperature")?,
        };
        p.validate().map_err(|e| usage(e.to_string()))?;
        Ok(p)
    }

    pub fn cluster_params(&self) -> Result<ClusterParams, CliError> {
        let p = ClusterParams {
            neighbor_fraction: self.get("neighbor_fraction")?,
            center_sigma: self.get("center_sigma")?,
        };
        p.validate().map_err(|e| usage(e.to_string()))?;
        Ok(p)
    }

    pub fn world_config(&self) -> Result<WorldConfig, CliError> {
        let w = WorldConfig {
            seed: self.get("seed")?,
            dim: self.get("dim")?,
            base_concepts: self.get("base_concepts")?,
            novel_concepts: self.get("novel_concepts")?,
            images: self.get("images")?,
            objects_per_image: self.get("objects_per_image")?,
            proposals_per_object: self.get("proposals_per_object")?,
            distractors_per_image: self.get("distractors_per_image")?,
            fragment_rate: self.get("fragment_rate")?,
            noise: self.get("noise")?,
            base_novel_ratio: self.get("base_novel_ratio")?,
            min_angle_deg: self.get("min_angle_deg")?,
            image_width: self.get("image_width")?,
            image_height: self.get("image_height")?,
        };
        w.validate().map_err(|e| match e {
            Error::Infeasible(_) => CliError::Data(e),
            other => usage(other.to_string()),
        })?;
        Ok(w)
    }

    /// The `run.meta` text: the subcommand followed by every setting it
    /// reads, defaults expanded. Output-independent settings (`workers`)
    /// are left out so repeated runs compare byte for byte.
    pub fn meta(&self, keys: &[&str]) -> String {
        let mut pairs = vec![("subcommand", self.subcommand.clone())];
        let mut sorted: Vec<&str> = keys.to_vec();
        sorted.sort_unstable();
        for k in sorted {
            pairs.push((k, self.values.get(k).cloned().unwrap_or_default()));
        }
        manifest::render(pairs)
    }

    fn write_meta(&self, keys: &[&str]) -> Result<(), CliError> {
        let path = self.out.join(RUN_META);
        std::fs::write(&path, self.meta(keys)).map_err(|e| Error::io(&path, e))?;
        Ok(())
    }

    fn prepare_out(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))?;
        Ok(())
    }
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("medet: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Mine(a) => mine(a),
        Command::Score(a) => score(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Adjust(a) => adjust(a),
        Command::Eval(a) => eval(a),
    }
}

fn synth(a: SynthArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::new("synth", &a.common)?;
    cfg.set("seed", a.seed);
    cfg.set("dim", a.dim);
    cfg.set("base_concepts", a.base_concepts);
    cfg.set("novel_concepts", a.novel_concepts);
    cfg.set("images", a.images);
    cfg.set("objects_per_image", a.objects_per_image);
    cfg.set("proposals_per_object", a.proposals_per_object);
    cfg.set("distractors_per_image", a.distractors_per_image);
    cfg.set("fragment_rate", a.fragment_rate);
    cfg.set("noise", a.noise);
    cfg.set("base_novel_ratio", a.base_novel_ratio);
    cfg.set("min_angle_deg", a.min_angle_deg);
    cfg.set("image_width", a.image_width);
    cfg.set("image_height", a.image_height);
    cfg.set("scorer_scale", a.scorer_scale);
    cfg.set("scorer_inflation", a.scorer_inflation);
    let world_cfg = cfg.world_config()?;
    let scorer = ScorerParams {
        scale: cfg.get("scorer_scale")?,
        inflation: cfg.get("scorer_inflation")?,
    };
    cfg.workers()?;

    cfg.prepare_out()?;
    let world = generate_world(&world_cfg)?;
    world.write(&cfg.out)?;
    let freq = concept_frequency(&world.truth, world_cfg.concepts());
    let scores = biased_scores(
        &world.files.proposal_embeddings,
        &world.files.concept_embeddings,
        &freq,
        &scorer,
    )?;
    save_tensor(&scores, &cfg.out.join("scores.mdet"))?;
    cfg.write_meta(WORLD_KEYS)?;
    eprintln!(
        "synth: {} images, {} proposals, {} concepts -> {}",
        world.files.images.len(),
        world.files.proposals.len(),
        world.files.concepts.len(),
        cfg.out.display()
    );
    Ok(())
}

fn mine(a: MineArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::new("mine", &a.common)?;
    cfg.set_path("data", &a.data);
    cfg.set("theta_iou", a.theta_iou);
    cfg.set("top_k", a.top_k);
    cfg.set_path("weights", &a.weights);
    cfg.set("seed", a.seed);
    if a.augment || a.weights.is_some() {
        cfg.set("use_augmentation", Some(true));
    }
    let data = cfg.require_path("data")?;
    let params = cfg.mining_params()?;
    let seed: u64 = cfg.get("seed")?;
    let workers = cfg.workers()?;
    eprintln!(
        "mine: theta_iou={} top_k={} use_augmentation={}",
        params.theta_iou, params.top_k, params.use_augmentation
    );

    let dataset = load_dataset(&data)?;
    let weights = match (params.use_augmentation, cfg.path("weights")) {
        (false, _) => None,
        (true, Some(path)) => Some(AttentionWeights::load(&path)?),
        (true, None) => Some(AttentionWeights::seeded(dataset.dim, None, seed)),
    };
    if let Some(w) = &weights {
        if w.dim() != dataset.dim {
            return Err(Error::DimensionMismatch {
                expected: dataset.dim,
                found: w.dim(),
            }
            .into());
        }
    }
    let sets = mine_dataset(&dataset, weights.as_ref(), &params, workers)?;
    cfg.prepare_out()?;
    let lines = write_mined(&cfg.out, &sets, dataset.dim)?;
    cfg.write_meta(&[
        "data",
        "weights",
        "use_augmentation",
        "seed",
        "theta_iou",
        "top_k",
    ])?;
    eprintln!("mine: {lines} pairs from {} images", dataset.images.len());
    Ok(())
}

fn score(a: ScoreArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::new("score", &a.common)?;
    cfg.set_path("mined", &a.mined);
    cfg.set("margin", a.margin);
    cfg.set("steps", a.steps);
    cfg.set("temperature", a.temperature);
    cfg.set("batch_size", a.batch_size);
    let mined_dir = cfg.require_path("mined")?;
    let params = cfg.match_params()?;
    let batch_size: usize = cfg.get("batch_size")?;
    if batch_size == 0 {
        return Err(usage("batch_size must be at least 1"));
    }
    let workers = cfg.workers()?;

    let sets = read_mined(&mined_dir)?;
    let pairs: Vec<(String, SetPair)> = sets
        .into_iter()
        .filter(|s| !s.is_empty())
        .map(|s| {
            let pair = SetPair {
                proposals: s.proposal_embeddings(),
                concepts: s.concept_embeddings(),
            };
            (s.image_id, pair)
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::param(format!("thread pool: {e}")))?;

    let mut sim_csv = String::from("batch,row,col,image_row,image_col,similarity\n");
    let mut loss_csv = String::from("batch,size,loss\n");
    for (b, chunk) in pairs.chunks(batch_size).enumerate() {
        let batch: Vec<SetPair> = chunk.iter().map(|(_, p)| p.clone()).collect();
        let s = pool.install(|| similarity_matrix(&batch, &params))?;
        for (i, row) in s.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                sim_csv.push_str(&format!("{b},{i},{j},{},{},{v}\n", chunk[i].0, chunk[j].0));
            }
        }
        loss_csv.push_str(&format!(
            "{b},{},{}\n",
            chunk.len(),
            hinge_loss(&s, params.margin)
        ));
    }
    cfg.prepare_out()?;
    for (name, text) in [("similarity.csv", sim_csv), ("loss.csv", loss_csv)] {
        let path = cfg.out.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    cfg.write_meta(&["mined", "margin", "steps", "temperature", "batch_size"])?;
    eprintln!(
        "score: {} sets in {} batches",
        pairs.len(),
        pairs.len().div_ceil(batch_size)
    );
    Ok(())
}

fn calibrate(a: CalibrateArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::new("calibrate", &a.common)?;
    cfg.set_path("mined", &a.mined);
    cfg.set_path("data", &a.data);
    cfg.set("population", a.population);
    cfg.set("neighbor_fraction", a.neighbor_fraction);
    cfg.set("center_sigma", a.center_sigma);
    cfg.set("gamma", a.gamma);
    let params = cfg.cluster_params()?;
    let population: Population = cfg.get("population")?;
    let gamma: f64 = cfg.get("gamma")?;
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(usage("gamma must be finite and >= 0"));
    }
    let workers = cfg.workers()?;

    let dataset = cfg.path("data").map(|p| load_dataset(&p)).transpose()?;
    let pop = match population {
        Population::Mined => mined_population(&read_mined(&cfg.require_path("mined")?)?),
        Population::Predicted => predicted_population(
            dataset
                .as_ref()
                .ok_or_else(|| usage("population `predicted` requires --data"))?,
        ),
    };
    let vocabulary: Vec<u32> = match &dataset {
        Some(d) => d.vocabulary.ids().collect(),
        None => pop.keys().copied().collect(),
    };
    let results = cluster_population(&pop, &params, workers)?;
    let bias = compute_bias(&results, vocabulary, gamma)?;
    cfg.prepare_out()?;
    bias.save(&cfg.out.join("bias.json"))?;
    cfg.write_meta(&[
        "mined",
        "data",
        "population",
        "neighbor_fraction",
        "center_sigma",
        "gamma",
    ])?;
    eprintln!("calibrate: {} concepts clustered", results.len());
    Ok(())
}

fn adjust(a: AdjustArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::new("adjust", &a.common)?;
    cfg.set_path("scores", &a.scores);
    cfg.set_path("bias", &a.bias);
    cfg.set("gamma", a.gamma);
    let scores_path = cfg.require_path("scores")?;
    let bias_path = cfg.require_path("bias")?;
    let override_gamma: Option<f64> = if cfg.is_explicit("gamma") {
        Some(cfg.get("gamma")?)
    } else {
        None
    };
    cfg.workers()?;

    let scores = load_tensor(&scores_path)?;
    let bias = BiasVector::load(&bias_path)?;
    let effective = override_gamma.unwrap_or(bias.gamma);
    cfg.set("gamma", Some(effective));
    let adjusted = adjust_matrix(&scores, &bias, override_gamma)?;
    cfg.prepare_out()?;
    save_tensor(&adjusted, &cfg.out.join("adjusted.mdet"))?;
    cfg.write_meta(&["scores", "bias", "gamma"])?;
    eprintln!("adjust: {} rows, gamma={effective}", adjusted.rows());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::new("eval", &a.common)?;
    cfg.set_path("data", &a.data);
    cfg.set_path("truth", &a.truth);
    cfg.set_path("mined", &a.mined);
    cfg.set_path("raw", &a.raw);
    cfg.set_path("adjusted", &a.adjusted);
    cfg.set("iou_threshold", a.iou_threshold);
    let truth_path = cfg.require_path("truth")?;
    let iou_threshold: f64 = cfg.get("iou_threshold")?;
    if !(0.0..=1.0).contains(&iou_threshold) {
        return Err(usage("iou_threshold outside [0, 1]"));
    }
    cfg.workers()?;
    let mined = cfg.path("mined");
    let scores = match (cfg.path("raw"), cfg.path("adjusted")) {
        (Some(r), Some(a)) => Some((r, a)),
        (None, None) => None,
        _ => return Err(usage("--raw and --adjusted must be given together")),
    };
    if mined.is_none() && scores.is_none() {
        return Err(usage("eval needs --mined and/or --raw with --adjusted"));
    }

    let truth = read_truth(&truth_path)?;
    cfg.prepare_out()?;
    if let Some(dir) = mined {
        let report = eval_mining(&read_mined(&dir)?, &truth, iou_threshold)?;
        write_mining_csv(&cfg.out, &report)?;
        eprintln!(
            "eval: precision={:.4} recall={:.4}{}",
            report.precision,
            report.recall,
            if report.empty { " (nothing mined)" } else { "" }
        );
    }
    if let Some((raw_path, adj_path)) = scores {
        let data = cfg.require_path("data")?;
        let dataset = load_dataset(&data)?;
        let base: BTreeSet<u32> = dataset
            .vocabulary
            .iter()
            .filter(|c| c.origin == ConceptOrigin::Base)
            .map(|c| c.id)
            .collect();
        let raw = load_tensor(&raw_path)?;
        let adjusted = load_tensor(&adj_path)?;
        let labels = score_labels(&truth, raw.rows())?;
        let report = eval_bias(&raw, &adjusted, &labels, &base)?;
        write_bias_csv(&cfg.out.join("bias.csv"), &report)?;
        write_histogram_csv(&cfg.out.join("histogram.csv"), &report)?;
        eprintln!(
            "eval: confidence gap raw={:.4} adjusted={:.4}",
            report.raw.gap, report.adjusted.gap
        );
    }
    cfg.write_meta(&["data", "truth", "mined", "raw", "adjusted", "iou_threshold"])?;
    Ok(())
}

/// Reads `run.meta` from an output directory.
pub fn read_meta(dir: &Path) -> crate::Result<KeyValues> {
    KeyValues::load(&dir.join(RUN_META))
}
