use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ttscost::allocate::Strategy;
use ttscost::cost::{AttnVariant, BlockSizeRule, CostMode, LatencyModel};

#[derive(Debug, Clone, PartialEq, Parser)]
#[command(name = "ttscost", version, about = "Cost model and compute allocation for test-time scaling")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct GlobalArgs {
    /// Directory for `<verb>.<format>` and `manifest.json`; stdout when absent.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads for trace replay.
    #[arg(long, global = true, env = "TTSCOST_THREADS", value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
    /// Directory searched for `<name>.toml` model and hardware configs before the built-in presets.
    #[arg(long, global = true, env = "TTSCOST_PRESET_DIR", value_name = "DIR")]
    pub preset_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Jsonl => "jsonl",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Verb {
    /// Cost breakdown of one test-time scaling setting.
    Cost(CostArgs),
    /// Attention-to-parameter cost ratio per generated token.
    Ratio(RatioArgs),
    /// Dense cost over a (model size, generation length) grid plus iso-cost contours.
    Isocost(IsocostArgs),
    /// Oracle accuracy envelope over a budget sweep.
    Frontier(FrontierArgs),
    /// Per-task oracle choices at one budget.
    Allocate(AllocateArgs),
    /// Optimal generation tokens and KV budget along a budget sweep.
    TokensOpt(FrontierArgs),
    /// Power-law fit of KV size against model size.
    FitKv(FitKvArgs),
    /// Per-doubling growth of optimal KV budget and tokens.
    FitBudget(FitBudgetArgs),
    /// Unbiased pass@k.
    Passk(PasskArgs),
    /// Seeded equivalence checks of the sparse attention kernels.
    AttnCheck(AttnCheckArgs),
    /// Analytical decode throughput.
    Throughput(ThroughputArgs),
    /// Convert (e)FLOPs to device-seconds.
    Seconds(SecondsArgs),
}

impl Verb {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Cost(_) => "cost",
            Self::Ratio(_) => "ratio",
            Self::Isocost(_) => "isocost",
            Self::Frontier(_) => "frontier",
            Self::Allocate(_) => "allocate",
            Self::TokensOpt(_) => "tokens-opt",
            Self::FitKv(_) => "fit-kv",
            Self::FitBudget(_) => "fit-budget",
            Self::Passk(_) => "passk",
            Self::AttnCheck(_) => "attn-check",
            Self::Throughput(_) => "throughput",
            Self::Seconds(_) => "seconds",
        }
    }
}

fn parse_variant(s: &str) -> Result<AttnVariant, String> {
    s.parse()
}

fn parse_block(s: &str) -> Result<BlockSizeRule, String> {
    s.parse()
}

fn parse_mode(s: &str) -> Result<CostMode, String> {
    s.parse()
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse()
}

fn parse_latency(s: &str) -> Result<LatencyModel, String> {
    s.parse()
}

fn non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        _ => Err(format!("expected a finite number >= 0, got `{s}`")),
    }
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(format!("expected a finite number > 0, got `{s}`")),
    }
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct ModelHw {
    /// Preset name or path to a model config file.
    #[arg(long)]
    pub model: String,
    /// Preset name or path to a hardware config file.
    #[arg(long, default_value = "b200")]
    pub hw: String,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct CostArgs {
    #[command(flatten)]
    pub target: ModelHw,
    /// Prompt length in tokens.
    #[arg(long, value_parser = non_negative)]
    pub lin: f64,
    /// Fixed generation length in tokens.
    #[arg(long, value_parser = non_negative, conflicts_with_all = ["mean_len", "second_moment"])]
    pub lout: Option<f64>,
    /// Mean generation length E[L].
    #[arg(long, value_parser = non_negative, requires = "second_moment")]
    pub mean_len: Option<f64>,
    /// Second moment of the generation length E[L^2].
    #[arg(long, value_parser = non_negative, requires = "mean_len")]
    pub second_moment: Option<f64>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub trials: u32,
    #[arg(long, default_value = "dense", value_parser = parse_variant)]
    pub attn: AttnVariant,
    /// KV budget in tokens (sparse variants).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub budget: Option<u64>,
    /// Block size for block-top-k: an integer or `auto` for the cost-balanced size.
    #[arg(long, value_parser = parse_block)]
    pub block_size: Option<BlockSizeRule>,
    /// Restrict `auto` block sizes to powers of two.
    #[arg(long)]
    pub pow2: bool,
    /// Apply the model's first-layer surcharge to sparse totals.
    #[arg(long)]
    pub first_layer: bool,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct RatioArgs {
    #[command(flatten)]
    pub target: ModelHw,
    #[arg(long, value_parser = non_negative)]
    pub lin: f64,
    /// One or more generation lengths, comma separated.
    #[arg(long, value_parser = non_negative, value_delimiter = ',', required = true)]
    pub lout: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct IsocostArgs {
    /// KV elements per token at the reference size; fitted from the measured Qwen3 family when absent.
    #[arg(long, value_parser = non_negative, requires_all = ["p0", "beta"])]
    pub d0: Option<f64>,
    #[arg(long, value_parser = positive)]
    pub p0: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 4.0, value_parser = positive)]
    pub gqa_ratio: f64,
    #[arg(long, default_value = "b200")]
    pub hw: String,
    #[arg(long, default_value_t = 0.0, value_parser = non_negative)]
    pub lin: f64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub trials: u32,
    #[arg(long, default_value_t = 0.6e9, value_parser = positive)]
    pub p_min: f64,
    #[arg(long, default_value_t = 32e9, value_parser = positive)]
    pub p_max: f64,
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u32).range(1..))]
    pub p_steps: u32,
    #[arg(long, default_value_t = 1024.0, value_parser = positive)]
    pub l_min: f64,
    #[arg(long, default_value_t = 32768.0, value_parser = positive)]
    pub l_max: f64,
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u32).range(1..))]
    pub l_steps: u32,
    /// Cost levels to trace as contours, comma separated.
    #[arg(long, value_parser = positive, value_delimiter = ',')]
    pub level: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct ReplayArgs {
    /// Trace file, one JSON record per line.
    #[arg(long)]
    pub traces: PathBuf,
    /// Reject unknown fields in trace records.
    #[arg(long)]
    pub strict: bool,
    #[arg(long, default_value = "b200")]
    pub hw: String,
    /// Prompt length used for costing; sparse costs need it to be at least the largest KV budget.
    #[arg(long, default_value_t = 1024.0, value_parser = non_negative)]
    pub lin: f64,
    #[arg(long, default_value = "best-of-n", value_parser = parse_strategy)]
    pub strategy: Strategy,
    #[arg(long, default_value = "eflops", value_parser = parse_mode)]
    pub cost_mode: CostMode,
    #[arg(long, default_value = "dense", value_parser = parse_variant)]
    pub attn: AttnVariant,
    #[arg(long, default_value = "auto", value_parser = parse_block)]
    pub block_size: BlockSizeRule,
    #[arg(long)]
    pub first_layer: bool,
    #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u64).range(1..))]
    pub budgets: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u32).range(1..))]
    pub trial_grid: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u64).range(1..))]
    pub lengths: Option<Vec<u64>>,
    /// Generation limit of the Best-of-N groups.
    #[arg(long, default_value_t = 32768, value_parser = clap::value_parser!(u64).range(1..))]
    pub bon_length: u64,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct FrontierArgs {
    #[command(flatten)]
    pub replay: ReplayArgs,
    /// Models to compare (preset names or config paths), comma separated; the
    /// config name must match the trace `model` field. Defaults to every model in the traces.
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<String>,
    /// Budgets in (e)FLOPs, comma separated and increasing; a doubling ladder over the cell costs when absent.
    #[arg(long, value_delimiter = ',', value_parser = positive)]
    pub sweep: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct AllocateArgs {
    #[command(flatten)]
    pub replay: ReplayArgs,
    #[arg(long)]
    pub model: String,
    /// Budget in (e)FLOPs.
    #[arg(long, value_parser = positive)]
    pub cost_budget: f64,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct FitKvArgs {
    /// Family members (preset names or config paths), comma separated; the measured Qwen3 models when absent.
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct FitBudgetArgs {
    /// CSV with `budget`, `optimal_kv_budget` and `optimal_tokens` columns, as written by tokens-opt.
    #[arg(long)]
    pub points: PathBuf,
    /// Keep only rows whose `model` column equals this value.
    #[arg(long)]
    pub model: Option<String>,
    /// Also fit tokens with an additive floor.
    #[arg(long)]
    pub floor: bool,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct PasskArgs {
    #[arg(long = "s")]
    pub samples: u64,
    #[arg(long = "c")]
    pub correct: u64,
    #[arg(long = "k")]
    pub k: u64,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct AttnCheckArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    pub instances: u32,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct ThroughputArgs {
    #[command(flatten)]
    pub target: ModelHw,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub batch: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub ctx: u64,
    #[arg(long, default_value = "dense", value_parser = parse_variant)]
    pub attn: AttnVariant,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub budget: Option<u64>,
    /// Integer or `auto` for the decode-balanced size `ctx / (2 B)`.
    #[arg(long, default_value = "auto", value_parser = parse_block)]
    pub block_size: BlockSizeRule,
    #[arg(long, default_value = "max", value_parser = parse_latency)]
    pub latency: LatencyModel,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct SecondsArgs {
    /// Costs in (e)FLOPs, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = non_negative, required = true)]
    pub cost: Vec<f64>,
    #[arg(long, default_value = "b200")]
    pub hw: String,
}
