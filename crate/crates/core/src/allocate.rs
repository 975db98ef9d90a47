//! Oracle compute allocation over replayed traces.
//!
//! Every grid cell of a task (trials or generation limit, KV budget) gets a
//! cost from the group's length moments and an accuracy from its samples.
//! The oracle picks, per task, the most accurate cell whose cost fits the
//! budget. Cells are evaluated once per model and reused across a budget
//! sweep.
//!
//! Ties between cells resolve by lower cost, then smaller KV budget (dense
//! first), then fewer trials or a shorter limit. Tasks are evaluated in
//! parallel and reduced in sorted task order, so results do not depend on the
//! thread count.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::arch::{HardwareProfile, ModelConfig};
use crate::cost::{
    balanced_block_size, tts_cost, AttnVariant, BlockSizeRule, CostError, CostMode, GenLenStats, TtsSetting,
};
use crate::fit::{loglog_fit, FitError, LinearFit};
use crate::traces::{ConfigKey, TraceError, TraceSet};

#[derive(Debug, Error)]
pub enum AllocError {
    #[error("allocate: invalid grid: {0}")]
    InvalidGrid(String),
    #[error("allocate: task {task} has {samples} samples under {key}, fewer than the {trials} trials in the grid")]
    TrialsExceedSamples {
        task: String,
        key: ConfigKey,
        trials: u32,
        samples: u64,
    },
    #[error("allocate: no tasks found for model {0}")]
    NoTasks(String),
    #[error("allocate: no model specs given")]
    NoModels,
    #[error("allocate: budget sweep must be non-empty and strictly increasing")]
    BadSweep,
    #[error("allocate: no feasible task in the allocation")]
    NoFeasibleTask,
    #[error("allocate: need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("allocate: budgets must be strictly increasing")]
    NonIncreasingBudgets,
    #[error("allocate: zero variance in {0}")]
    ZeroVariance(&'static str),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

pub const DEFAULT_KV_BUDGETS: [u64; 6] = [32, 64, 128, 256, 512, 1024];
pub const DEFAULT_TRIALS: [u32; 6] = [1, 2, 4, 8, 16, 32];
pub const DEFAULT_BON_LENGTH: u64 = 32_768;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GridSpec {
    pub kv_budgets: Vec<u64>,
    pub trial_counts: Vec<u32>,
    pub gen_lengths: Vec<u64>,
    /// Generation limit of the groups Best-of-N draws from.
    pub bon_gen_length: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            kv_budgets: DEFAULT_KV_BUDGETS.to_vec(),
            trial_counts: DEFAULT_TRIALS.to_vec(),
            gen_lengths: (1..=16).map(|i| i * 2048).collect(),
            bon_gen_length: DEFAULT_BON_LENGTH,
        }
    }
}

fn strictly_increasing<T: PartialOrd>(xs: &[T]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1])
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), AllocError> {
        let checks = [
            ("kv_budgets", self.kv_budgets.is_empty(), strictly_increasing(&self.kv_budgets)),
            ("trial_counts", self.trial_counts.is_empty(), strictly_increasing(&self.trial_counts)),
            ("gen_lengths", self.gen_lengths.is_empty(), strictly_increasing(&self.gen_lengths)),
        ];
        for (name, empty, increasing) in checks {
            if empty || !increasing {
                return Err(AllocError::InvalidGrid(format!("{name} must be non-empty and strictly increasing")));
            }
        }
        if self.kv_budgets[0] == 0 || self.trial_counts[0] == 0 || self.gen_lengths[0] == 0 || self.bon_gen_length == 0 {
            return Err(AllocError::InvalidGrid("grid values must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    BestOfN,
    LongCot,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::BestOfN => "best-of-n",
            Self::LongCot => "long-cot",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "best-of-n" | "bon" => Ok(Self::BestOfN),
            "long-cot" | "longcot" => Ok(Self::LongCot),
            other => Err(format!("unknown strategy `{other}` (expected best-of-n or long-cot)")),
        }
    }
}

/// A model as it appears in the traces plus the attention setup it was run with.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub config: ModelConfig,
    /// Value of the `model` field in the trace records.
    pub trace_model: String,
    pub variant: AttnVariant,
    /// Required for block-top-k.
    pub block_size: Option<BlockSizeRule>,
    pub surcharge: f64,
}

impl ModelSpec {
    pub fn new(config: ModelConfig, variant: AttnVariant) -> Self {
        Self {
            trace_model: config.name().to_string(),
            config,
            variant,
            block_size: (variant == AttnVariant::BlockTopK).then_some(BlockSizeRule::Balanced),
            surcharge: 0.0,
        }
    }

    fn budgets(&self, grid: &GridSpec) -> Vec<Option<u64>> {
        if self.variant.is_sparse() {
            grid.kv_budgets.iter().copied().map(Some).collect()
        } else {
            vec![None]
        }
    }

    fn key(&self, budget: Option<u64>, max_new_tokens: u64) -> ConfigKey {
        ConfigKey {
            model: self.trace_model.clone(),
            attn: self.variant,
            kv_budget: budget,
            max_new_tokens,
        }
    }

    /// The costed setting of a cell, with the block size resolved.
    pub fn setting(
        &self,
        hw: &HardwareProfile,
        prompt_len: f64,
        trials: u32,
        gen: GenLenStats,
        budget: Option<u64>,
    ) -> Result<TtsSetting, AllocError> {
        let Some(b) = budget else {
            return Ok(TtsSetting::dense(trials, prompt_len, gen));
        };
        let mut s = TtsSetting::sparse(trials, prompt_len, gen, self.variant, b, None).with_surcharge(self.surcharge);
        if self.variant == AttnVariant::BlockTopK {
            let rule = self.block_size.ok_or(CostError::MissingBlockSize)?;
            s.block_size = Some(match rule {
                BlockSizeRule::Fixed(bs) => bs,
                BlockSizeRule::Balanced => balanced_block_size(&self.config, hw, &s, false)?.chosen,
            });
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    pub hw: HardwareProfile,
    pub prompt_len: f64,
    pub cost_mode: CostMode,
}

/// One costed grid cell of one task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub trials: u32,
    pub max_new_tokens: u64,
    pub kv_budget: Option<u64>,
    pub block_size: Option<u64>,
    pub gen: GenLenStats,
    pub cost: f64,
    pub accuracy: f64,
}

/// `Less` means `a` is the better choice.
fn rank(a: &Cell, b: &Cell) -> Ordering {
    b.accuracy
        .total_cmp(&a.accuracy)
        .then(a.cost.total_cmp(&b.cost))
        .then(a.kv_budget.cmp(&b.kv_budget))
        .then(a.trials.cmp(&b.trials))
        .then(a.max_new_tokens.cmp(&b.max_new_tokens))
        .then(a.block_size.cmp(&b.block_size))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskCells {
    pub task_id: String,
    pub cells: Vec<Cell>,
}

/// Every cell of every task for one model and strategy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellTable {
    pub model: String,
    pub strategy: Strategy,
    pub cost_mode: CostMode,
    pub tasks: Vec<TaskCells>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationChoice {
    pub task_id: String,
    /// `None` when no cell fits the budget.
    pub cell: Option<Cell>,
}

impl AllocationChoice {
    pub fn accuracy(&self) -> f64 {
        self.cell.map_or(0.0, |c| c.accuracy)
    }

    pub fn feasible(&self) -> bool {
        self.cell.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub model: String,
    pub budget: f64,
    pub avg_best_acc: f64,
    pub choices: Vec<AllocationChoice>,
}

impl OracleResult {
    pub fn total_cost(&self) -> f64 {
        self.choices.iter().filter_map(|c| c.cell).map(|c| c.cost).sum()
    }
}

impl CellTable {
    pub fn build(
        ts: &TraceSet,
        model: &ModelSpec,
        grid: &GridSpec,
        opts: &OracleOptions,
        strategy: Strategy,
    ) -> Result<Self, AllocError> {
        grid.validate()?;
        let tasks = ts.tasks(Some(&model.trace_model));
        if tasks.is_empty() {
            return Err(AllocError::NoTasks(model.trace_model.clone()));
        }
        let tasks = tasks
            .par_iter()
            .map(|task| task_cells(ts, model, grid, opts, strategy, task))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            model: model.config.name().to_string(),
            strategy,
            cost_mode: opts.cost_mode,
            tasks,
        })
    }

    /// The oracle at budget `c`.
    pub fn best_at(&self, c: f64) -> OracleResult {
        let choices: Vec<AllocationChoice> = self
            .tasks
            .par_iter()
            .map(|t| AllocationChoice {
                task_id: t.task_id.clone(),
                cell: t.cells.iter().filter(|x| x.cost <= c).min_by(|a, b| rank(a, b)).copied(),
            })
            .collect();
        let sum: f64 = choices.iter().map(AllocationChoice::accuracy).sum();
        OracleResult {
            model: self.model.clone(),
            budget: c,
            avg_best_acc: sum / choices.len() as f64,
            choices,
        }
    }

    pub fn cost_range(&self) -> Option<(f64, f64)> {
        let costs = self.tasks.iter().flat_map(|t| t.cells.iter().map(|c| c.cost));
        costs.fold(None, |acc, c| match acc {
            None => Some((c, c)),
            Some((lo, hi)) => Some((lo.min(c), hi.max(c))),
        })
    }
}

fn task_cells(
    ts: &TraceSet,
    model: &ModelSpec,
    grid: &GridSpec,
    opts: &OracleOptions,
    strategy: Strategy,
    task: &str,
) -> Result<TaskCells, AllocError> {
    let mut cells = Vec::new();
    for budget in model.budgets(grid) {
        match strategy {
            Strategy::BestOfN => {
                let key = model.key(budget, grid.bon_gen_length);
                let group = ts.group(task, &key)?;
                let gen = group.moments();
                for &n in &grid.trial_counts {
                    if u64::from(n) > group.len() {
                        return Err(AllocError::TrialsExceedSamples {
                            task: task.to_string(),
                            key,
                            trials: n,
                            samples: group.len(),
                        });
                    }
                    cells.push(cell(model, opts, n, grid.bon_gen_length, budget, gen, group.pass_at_k(u64::from(n))?)?);
                }
            }
            Strategy::LongCot => {
                for &len in &grid.gen_lengths {
                    let group = ts.group(task, &model.key(budget, len))?;
                    cells.push(cell(model, opts, 1, len, budget, group.moments(), group.pass_at_k(1)?)?);
                }
            }
        }
    }
    Ok(TaskCells {
        task_id: task.to_string(),
        cells,
    })
}

fn cell(
    model: &ModelSpec,
    opts: &OracleOptions,
    trials: u32,
    max_new_tokens: u64,
    budget: Option<u64>,
    gen: GenLenStats,
    accuracy: f64,
) -> Result<Cell, AllocError> {
    let s = model.setting(&opts.hw, opts.prompt_len, trials, gen, budget)?;
    let cost = tts_cost(&model.config, &opts.hw, &s)?.value(opts.cost_mode);
    Ok(Cell {
        trials,
        max_new_tokens,
        kv_budget: budget,
        block_size: s.block_size,
        gen,
        cost,
        accuracy,
    })
}

/// Best-of-N oracle: fixed generation limit, grid over trials and KV budget, Pass@N accuracy.
pub fn bestofn_oracle(
    ts: &TraceSet,
    model: &ModelSpec,
    grid: &GridSpec,
    opts: &OracleOptions,
    budget: f64,
) -> Result<OracleResult, AllocError> {
    Ok(CellTable::build(ts, model, grid, opts, Strategy::BestOfN)?.best_at(budget))
}

/// Long-CoT oracle: one trial, grid over generation limit and KV budget, Pass@1 accuracy.
pub fn longcot_oracle(
    ts: &TraceSet,
    model: &ModelSpec,
    grid: &GridSpec,
    opts: &OracleOptions,
    budget: f64,
) -> Result<OracleResult, AllocError> {
    Ok(CellTable::build(ts, model, grid, opts, Strategy::LongCot)?.best_at(budget))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierPoint {
    pub budget: f64,
    pub avg_best_acc: f64,
    pub model: String,
    pub choices: Vec<AllocationChoice>,
    /// `(model, avg_best_acc)` for every candidate model at this budget.
    pub per_model: Vec<(String, f64)>,
}

/// Accuracy envelope over models along a budget sweep.
///
/// At each budget the winning model has the highest average accuracy; ties
/// go to the lower total chosen cost, then to the earlier entry in `models`.
pub fn pareto_frontier(
    ts: &TraceSet,
    models: &[ModelSpec],
    grid: &GridSpec,
    opts: &OracleOptions,
    sweep: &[f64],
    strategy: Strategy,
) -> Result<Vec<FrontierPoint>, AllocError> {
    if models.is_empty() {
        return Err(AllocError::NoModels);
    }
    if sweep.is_empty() || !strictly_increasing(sweep) {
        return Err(AllocError::BadSweep);
    }
    let tables = build_tables(ts, models, grid, opts, strategy)?;
    Ok(sweep.iter().map(|&c| envelope_at(&tables, c)).collect())
}

pub fn build_tables(
    ts: &TraceSet,
    models: &[ModelSpec],
    grid: &GridSpec,
    opts: &OracleOptions,
    strategy: Strategy,
) -> Result<Vec<CellTable>, AllocError> {
    models
        .iter()
        .map(|m| CellTable::build(ts, m, grid, opts, strategy))
        .collect()
}

pub fn envelope_at(tables: &[CellTable], c: f64) -> FrontierPoint {
    let results: Vec<OracleResult> = tables.iter().map(|t| t.best_at(c)).collect();
    let per_model = results.iter().map(|r| (r.model.clone(), r.avg_best_acc)).collect();
    let best = results
        .into_iter()
        .reduce(|best, r| {
            let better = r
                .avg_best_acc
                .total_cmp(&best.avg_best_acc)
                .then(best.total_cost().total_cmp(&r.total_cost()));
            if better == Ordering::Greater {
                r
            } else {
                best
            }
        })
        .expect("at least one table");
    FrontierPoint {
        budget: c,
        avg_best_acc: best.avg_best_acc,
        model: best.model,
        choices: best.choices,
        per_model,
    }
}

/// Geometric ladder of budgets with ratio 2 from `lo`, ending at the first value `>= hi`.
pub fn budget_ladder(lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return out;
    }
    let mut c = lo;
    loop {
        out.push(c);
        if c >= hi {
            break;
        }
        c *= 2.0;
    }
    out
}

/// Ladder spanning the cheapest and most expensive cell over all tables.
pub fn default_sweep(tables: &[CellTable]) -> Vec<f64> {
    let range = tables.iter().filter_map(CellTable::cost_range).reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)));
    range.map_or_else(Vec::new, |(lo, hi)| budget_ladder(lo, hi))
}

/// How generated tokens are counted for a strategy and cost model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenMeasure {
    /// `N * E[L]`.
    Linear,
    /// `sqrt(E[L^2])`.
    Quadratic,
}

impl TokenMeasure {
    /// Quadratic when the memory term dominates: dense attention, one long
    /// trial, and a cost model that counts memory.
    pub fn for_setup(mode: CostMode, variant: AttnVariant, strategy: Strategy) -> Self {
        if mode != CostMode::FlopsOnly && variant == AttnVariant::Dense && strategy == Strategy::LongCot {
            Self::Quadratic
        } else {
            Self::Linear
        }
    }
}

/// Largest per-task token count among the feasible choices.
pub fn optimal_generation_tokens(choices: &[AllocationChoice], measure: TokenMeasure) -> Result<f64, AllocError> {
    choices
        .iter()
        .filter_map(|c| c.cell)
        .map(|c| match measure {
            TokenMeasure::Linear => f64::from(c.trials) * c.gen.mean,
            TokenMeasure::Quadratic => c.gen.second_moment.sqrt(),
        })
        .max_by(f64::total_cmp)
        .ok_or(AllocError::NoFeasibleTask)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetPoint {
    pub budget: f64,
    pub kv_budget: f64,
    pub tokens: f64,
}

/// `tokens ~ scale * C^exponent + floor`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FloorFit {
    pub floor: f64,
    pub scale: f64,
    pub exponent: f64,
    pub factor: f64,
    pub rss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetScalingFit {
    /// Growth of the optimal KV budget per budget doubling.
    pub kv_factor: f64,
    pub kv_fit: LinearFit,
    /// Growth of the optimal generation tokens per budget doubling.
    pub tokens_factor: f64,
    pub tokens_fit: LinearFit,
    /// Residual sum of squares of the pure power law, in token units.
    pub tokens_rss: f64,
    pub floor_fit: Option<FloorFit>,
}

/// Log-log fits of optimal KV budget and optimal tokens against budget, plus
/// an optional power law with an additive token floor.
pub fn fit_budget_scaling(points: &[BudgetPoint], with_floor: bool) -> Result<BudgetScalingFit, AllocError> {
    if points.len() < 3 {
        return Err(AllocError::TooFewPoints {
            needed: 3,
            got: points.len(),
        });
    }
    let cs: Vec<f64> = points.iter().map(|p| p.budget).collect();
    if !strictly_increasing(&cs) {
        return Err(AllocError::NonIncreasingBudgets);
    }
    let kv: Vec<f64> = points.iter().map(|p| p.kv_budget).collect();
    let tok: Vec<f64> = points.iter().map(|p| p.tokens).collect();
    let kv_fit = loglog_fit(&cs, &kv)?;
    let tokens_fit = loglog_fit(&cs, &tok)?;
    let tokens_rss = power_rss(&cs, &tok, &tokens_fit, 0.0);
    let floor_fit = if with_floor { Some(fit_floor(&cs, &tok)?) } else { None };
    Ok(BudgetScalingFit {
        kv_factor: kv_fit.slope.exp2(),
        kv_fit,
        tokens_factor: tokens_fit.slope.exp2(),
        tokens_fit,
        tokens_rss,
        floor_fit,
    })
}

fn power_rss(cs: &[f64], ys: &[f64], fit: &LinearFit, floor: f64) -> f64 {
    cs.iter()
        .zip(ys)
        .map(|(c, y)| {
            let pred = (fit.intercept + fit.slope * c.log2()).exp2() + floor;
            (y - pred) * (y - pred)
        })
        .sum()
}

fn floor_objective(cs: &[f64], ys: &[f64], floor: f64) -> Option<(f64, LinearFit)> {
    let shifted: Vec<f64> = ys.iter().map(|y| y - floor).collect();
    let fit = loglog_fit(cs, &shifted).ok()?;
    Some((power_rss(cs, ys, &fit, floor), fit))
}

fn fit_floor(cs: &[f64], ys: &[f64]) -> Result<FloorFit, AllocError> {
    let min_y = ys.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_y > 0.0) {
        return Err(FitError::NonPositive(min_y).into());
    }
    let hi = min_y * (1.0 - 1e-9);
    let rss = |f: f64| floor_objective(cs, ys, f).map_or(f64::INFINITY, |(r, _)| r);

    // Coarse scan, then golden-section refinement around the best bracket.
    const STEPS: usize = 256;
    let grid: Vec<f64> = (0..=STEPS).map(|i| hi * i as f64 / STEPS as f64).collect();
    let best = (0..=STEPS).min_by(|&a, &b| rss(grid[a]).total_cmp(&rss(grid[b]))).unwrap_or(0);
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(STEPS)]);
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let x1 = b - phi * (b - a);
        let x2 = a + phi * (b - a);
        if rss(x1) <= rss(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let mut floor = 0.5 * (a + b);
    if rss(grid[best]) < rss(floor) {
        floor = grid[best];
    }
    let (rss, fit) = floor_objective(cs, ys, floor).ok_or(AllocError::ZeroVariance("shifted tokens"))?;
    Ok(FloorFit {
        floor,
        scale: fit.intercept.exp2(),
        exponent: fit.slope,
        factor: fit.slope.exp2(),
        rss,
    })
}

/// Pearson correlation, accumulated in one pass.
pub fn pearson(pairs: &[(f64, f64)]) -> Result<f64, AllocError> {
    if pairs.len() < 2 {
        return Err(AllocError::TooFewPoints {
            needed: 2,
            got: pairs.len(),
        });
    }
    let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, &(x, y)) in pairs.iter().enumerate() {
        let n = (i + 1) as f64;
        let dx = x - mx;
        let dy = y - my;
        mx += dx / n;
        my += dy / n;
        sxx += dx * (x - mx);
        syy += dy * (y - my);
        sxy += dx * (y - my);
    }
    if sxx <= 0.0 {
        return Err(AllocError::ZeroVariance("x"));
    }
    if syy <= 0.0 {
        return Err(AllocError::ZeroVariance("y"));
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthTrialCorrelation {
    pub coefficient: f64,
    /// `(task, mean generated length, optimal trials)`.
    pub pairs: Vec<(String, f64, u32)>,
}

/// Correlation over feasible tasks of mean generation length and optimal trial count.
pub fn length_trial_correlation(result: &OracleResult) -> Result<LengthTrialCorrelation, AllocError> {
    let pairs: Vec<(String, f64, u32)> = result
        .choices
        .iter()
        .filter_map(|c| c.cell.map(|cell| (c.task_id.clone(), cell.gen.mean, cell.trials)))
        .collect();
    let xy: Vec<(f64, f64)> = pairs.iter().map(|(_, l, n)| (*l, f64::from(*n))).collect();
    Ok(LengthTrialCorrelation {
        coefficient: pearson(&xy)?,
        pairs,
    })
}
