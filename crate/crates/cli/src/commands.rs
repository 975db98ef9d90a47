//! One function per verb. Each returns the output table, a short human
//! summary and the input files it read.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use ttscost::allocate::{
    build_tables, default_sweep, envelope_at, fit_budget_scaling, length_trial_correlation, optimal_generation_tokens,
    BudgetPoint, CellTable, GridSpec, ModelSpec, OracleOptions, TokenMeasure, DEFAULT_KV_BUDGETS, DEFAULT_TRIALS,
};
use ttscost::arch::{
    first_layer_surcharge, kv_growth_fit, load_hardware_profile, load_model_config, HardwareProfile, ModelConfig,
    ModelFamily,
};
use ttscost::attn::check::run_self_check;
use ttscost::cost::{
    attention_param_ratio, balanced_block_size, device_seconds, iso_cost_grid, throughput_estimate, tts_cost,
    AttnVariant, BlockSizeRule, CostMode, DecodeAttention, GenLenStats, IsoCostSpec, LatencyModel, TtsSetting,
};
use ttscost::traces::{pass_at_k, IngestOptions, TraceSet};

use crate::args::{
    AllocateArgs, AttnCheckArgs, CostArgs, FitBudgetArgs, FitKvArgs, FrontierArgs, IsocostArgs, PasskArgs, RatioArgs,
    ReplayArgs, SecondsArgs, ThroughputArgs, Verb,
};
use crate::output::{fmt_short, Table, Value};

pub struct Outcome {
    pub table: Table,
    pub summary: String,
    pub inputs: Vec<PathBuf>,
    /// Set when the command ran but its checks did not hold.
    pub failed: bool,
}

impl Outcome {
    fn new(table: Table, summary: String) -> Self {
        Self {
            table,
            summary,
            inputs: Vec::new(),
            failed: false,
        }
    }
}

struct Loader<'a> {
    preset_dir: Option<&'a Path>,
    inputs: Vec<PathBuf>,
}

impl<'a> Loader<'a> {
    fn new(preset_dir: Option<&'a Path>) -> Self {
        Self {
            preset_dir,
            inputs: Vec::new(),
        }
    }

    /// The file a config source resolves to, if any.
    fn config_file(&self, source: &str) -> Option<PathBuf> {
        let direct = Path::new(source);
        if source.ends_with(".toml") || source.contains('/') {
            return Some(direct.to_path_buf());
        }
        self.preset_dir.map(|d| d.join(format!("{source}.toml"))).filter(|p| p.is_file())
    }

    fn model(&mut self, source: &str) -> Result<ModelConfig> {
        let m = load_model_config(source, self.preset_dir)?;
        self.inputs.extend(self.config_file(source));
        Ok(m)
    }

    fn hw(&mut self, source: &str) -> Result<HardwareProfile> {
        let h = load_hardware_profile(source, self.preset_dir)?;
        self.inputs.extend(self.config_file(source));
        Ok(h)
    }

    fn finish(self, table: Table, summary: String) -> Outcome {
        let mut out = Outcome::new(table, summary);
        out.inputs = self.inputs;
        out
    }
}

fn surcharge_for(model: &ModelConfig, enabled: bool) -> Result<f64> {
    if !enabled {
        return Ok(0.0);
    }
    first_layer_surcharge(model.name()).ok_or_else(|| anyhow!("cli: no first-layer surcharge known for `{}`", model.name()))
}

pub fn execute(verb: &Verb, preset_dir: Option<&Path>) -> Result<Outcome> {
    let loader = Loader::new(preset_dir);
    match verb {
        Verb::Cost(a) => cost(a, loader),
        Verb::Ratio(a) => ratio(a, loader),
        Verb::Isocost(a) => isocost(a, loader),
        Verb::Frontier(a) => frontier(a, loader),
        Verb::Allocate(a) => allocate(a, loader),
        Verb::TokensOpt(a) => tokens_opt(a, loader),
        Verb::FitKv(a) => fit_kv(a, loader),
        Verb::FitBudget(a) => fit_budget(a),
        Verb::Passk(a) => passk(a),
        Verb::AttnCheck(a) => attn_check(a),
        Verb::Throughput(a) => throughput(a, loader),
        Verb::Seconds(a) => seconds(a, loader),
    }
}

fn cost(a: &CostArgs, mut ld: Loader<'_>) -> Result<Outcome> {
    let model = ld.model(&a.target.model)?;
    let hw = ld.hw(&a.target.hw)?;
    let gen = match (a.lout, a.mean_len, a.second_moment) {
        (Some(l), None, None) => GenLenStats::scalar(l),
        (None, Some(m), Some(m2)) => GenLenStats::new(m, m2, 1)?,
        _ => bail!("cli: give either --lout or both --mean-len and --second-moment"),
    };
    let mut s = if a.attn.is_sparse() {
        let budget = a.budget.ok_or_else(|| anyhow!("cli: --budget is required for --attn {}", a.attn.as_str()))?;
        TtsSetting::sparse(a.trials, a.lin, gen, a.attn, budget, None).with_surcharge(surcharge_for(&model, a.first_layer)?)
    } else {
        if a.budget.is_some() {
            bail!("cli: --budget only applies to sparse attention");
        }
        TtsSetting::dense(a.trials, a.lin, gen)
    };
    if a.attn == AttnVariant::BlockTopK {
        s.block_size = Some(match a.block_size.unwrap_or(BlockSizeRule::Balanced) {
            BlockSizeRule::Fixed(bs) => bs,
            BlockSizeRule::Balanced => balanced_block_size(&model, &hw, &s, a.pow2)?.chosen,
        });
    } else if a.block_size.is_some() {
        bail!("cli: --block-size only applies to block-top-k");
    }
    let c = tts_cost(&model, &hw, &s)?;
    let mut t = Table::new(
        "cost.v1",
        &[
            "model",
            "hw",
            "attn",
            "trials",
            "lin",
            "mean_len",
            "second_moment",
            "kv_budget",
            "block_size",
            "linear_compute",
            "attn_compute",
            "kv_access",
            "search_compute",
            "search_access",
            "intensity",
            "surcharge",
            "total_compute",
            "total_access",
            "eflops",
            "eflops_max",
        ],
    );
    t.push(vec![
        model.name().into(),
        hw.name().into(),
        a.attn.as_str().into(),
        a.trials.into(),
        a.lin.into(),
        gen.mean.into(),
        gen.second_moment.into(),
        s.kv_budget.into(),
        s.block_size.into(),
        c.linear_compute.into(),
        c.attn_compute.into(),
        c.kv_access.into(),
        c.search_compute.into(),
        c.search_access.into(),
        c.intensity.into(),
        c.surcharge.into(),
        c.total_compute().into(),
        c.total_access().into(),
        c.eflops_additive().into(),
        c.eflops_max().into(),
    ]);
    let summary = format!(
        "{} {}: eFLOPs {}, FLOPs {}, memory {}",
        model.name(),
        a.attn.as_str(),
        fmt_short(c.eflops_additive()),
        fmt_short(c.total_compute()),
        fmt_short(c.total_access())
    );
    Ok(ld.finish(t, summary))
}

fn ratio(a: &RatioArgs, mut ld: Loader<'_>) -> Result<Outcome> {
    let model = ld.model(&a.target.model)?;
    let hw = ld.hw(&a.target.hw)?;
    let mut t = Table::new("ratio.v1", &["model", "hw", "lin", "lout", "phi"]);
    let mut parts = Vec::new();
    for &lout in &a.lout {
        let phi = attention_param_ratio(&model, &hw, a.lin, lout)?;
        t.push(vec![model.name().into(), hw.name().into(), a.lin.into(), lout.into(), phi.into()]);
        parts.push(format!("L_out {lout}: {}", fmt_short(phi)));
    }
    Ok(ld.finish(t, format!("{} phi {}", model.name(), parts.join(", "))))
}

fn log_space(lo: f64, hi: f64, n: u32) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi / lo).ln() / f64::from(n - 1);
    (0..n).map(|i| lo * (step * f64::from(i)).exp()).collect()
}

fn lin_space(lo: f64, hi: f64, n: u32) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / f64::from(n - 1);
    (0..n).map(|i| lo + step * f64::from(i)).collect()
}

fn isocost(a: &IsocostArgs, mut ld: Loader<'_>) -> Result<Outcome> {
    let hw = ld.hw(&a.hw)?;
    if a.p_max < a.p_min || a.l_max < a.l_min {
        bail!("cli: grid bounds must satisfy min <= max");
    }
    let (d0, p0, beta) = match (a.d0, a.p0, a.beta) {
        (Some(d0), Some(p0), Some(beta)) => (d0, p0, beta),
        (None, p0, None) => {
            let fit = kv_growth_fit(&ModelFamily::qwen3_measured())?;
            let p0 = p0.unwrap_or(8e9);
            (fit.predict(p0), p0, fit.slope)
        }
        _ => bail!("cli: --d0 and --beta must be given together"),
    };
    let spec = IsoCostSpec {
        d0,
        p0,
        beta,
        gqa_ratio: a.gqa_ratio,
        prompt_len: a.lin,
        trials: a.trials,
    };
    let params = log_space(a.p_min, a.p_max, a.p_steps);
    let lens = lin_space(a.l_min, a.l_max, a.l_steps);
    let grid = iso_cost_grid(&spec, &hw, &params, &lens, &a.level)?;
    let mut t = Table::new(
        "isocost.v1",
        &["kind", "mode", "level", "params", "kv_elems_per_token", "gen_len", "eflops", "flops"],
    );
    for c in &grid.cells {
        t.push(vec![
            "cell".into(),
            Value::Null,
            Value::Null,
            c.params.into(),
            c.kv_elems_per_token.into(),
            c.gen_len.into(),
            c.eflops.into(),
            c.flops.into(),
        ]);
    }
    for c in &grid.contours {
        t.push(vec![
            "contour".into(),
            c.mode.as_str().into(),
            c.level.into(),
            c.params.into(),
            spec.kv_at(c.params).into(),
            c.gen_len.into(),
            Value::Null,
            Value::Null,
        ]);
    }
    let summary = format!(
        "{} cells, {} contour points (D0 {}, beta {})",
        grid.cells.len(),
        grid.contours.len(),
        fmt_short(d0),
        fmt_short(beta)
    );
    Ok(ld.finish(t, summary))
}

struct Replay {
    tables: Vec<CellTable>,
    variant: AttnVariant,
    strategy: ttscost::allocate::Strategy,
    mode: CostMode,
}

fn replay(r: &ReplayArgs, models: &[String], ld: &mut Loader<'_>) -> Result<Replay> {
    let hw = ld.hw(&r.hw)?;
    let ts = TraceSet::ingest(&r.traces, IngestOptions { strict: r.strict })?;
    ld.inputs.push(r.traces.clone());
    let names = if models.is_empty() { ts.models() } else { models.to_vec() };
    let mut specs = Vec::with_capacity(names.len());
    for name in &names {
        let config = ld.model(name)?;
        let mut spec = ModelSpec::new(config, r.attn);
        if r.attn == AttnVariant::BlockTopK {
            spec.block_size = Some(r.block_size);
        }
        if r.attn.is_sparse() {
            spec.surcharge = surcharge_for(&spec.config, r.first_layer)?;
        }
        specs.push(spec);
    }
    let kv_in_traces: BTreeSet<u64> = ts.records().filter_map(|x| x.kv_budget).collect();
    let lengths: BTreeSet<u64> = ts.records().map(|x| x.max_new_tokens).collect();
    let grid = GridSpec {
        kv_budgets: r.budgets.clone().unwrap_or_else(|| {
            if kv_in_traces.is_empty() {
                DEFAULT_KV_BUDGETS.to_vec()
            } else {
                kv_in_traces.into_iter().collect()
            }
        }),
        trial_counts: r.trial_grid.clone().unwrap_or_else(|| DEFAULT_TRIALS.to_vec()),
        gen_lengths: r.lengths.clone().unwrap_or_else(|| lengths.into_iter().collect()),
        bon_gen_length: r.bon_length,
    };
    let opts = OracleOptions {
        hw,
        prompt_len: r.lin,
        cost_mode: r.cost_mode,
    };
    let tables = build_tables(&ts, &specs, &grid, &opts, r.strategy)?;
    Ok(Replay {
        tables,
        variant: r.attn,
        strategy: r.strategy,
        mode: r.cost_mode,
    })
}

fn sweep_for(given: &Option<Vec<f64>>, tables: &[CellTable]) -> Result<Vec<f64>> {
    let sweep = given.clone().unwrap_or_else(|| default_sweep(tables));
    if sweep.is_empty() || !sweep.windows(2).all(|w| w[0] < w[1]) {
        bail!("cli: --sweep must be non-empty and strictly increasing");
    }
    Ok(sweep)
}

fn frontier(a: &FrontierArgs, mut ld: Loader<'_>) -> Result<Outcome> {
    let rp = replay(&a.replay, &a.models, &mut ld)?;
    let sweep = sweep_for(&a.sweep, &rp.tables)?;
    let mut t = Table::new(
        "frontier.v1",
        &["budget", "strategy", "cost_mode", "attn", "model", "avg_best_acc", "is_winner"],
    );
    let mut last = None;
    for &c in &sweep {
        let p = envelope_at(&rp.tables, c);
        for (model, acc) in &p.per_model {
            t.push(vec![
                c.into(),
                rp.strategy.as_str().into(),
                rp.mode.as_str().into(),
                rp.variant.as_str().into(),
                model.as_str().into(),
                (*acc).into(),
                (*model == p.model).into(),
            ]);
        }
        last = Some(p);
    }
    let p = last.expect("sweep is non-empty");
    let summary = format!(
        "{} budgets; at {} the envelope is {} with accuracy {}",
        sweep.len(),
        fmt_short(p.budget),
        p.model,
        fmt_short(p.avg_best_acc)
    );
    Ok(ld.finish(t, summary))
}

fn allocate(a: &AllocateArgs, mut ld: Loader<'_>) -> Result<Outcome> {
    let rp = replay(&a.replay, std::slice::from_ref(&a.model), &mut ld)?;
    let r = rp.tables[0].best_at(a.cost_budget);
    let mut t = Table::new(
        "allocate.v1",
        &[
            "budget",
            "model",
            "task_id",
            "feasible",
            "trials",
            "max_new_tokens",
            "kv_budget",
            "block_size",
            "mean_len",
            "second_moment",
            "cost",
            "accuracy",
        ],
    );
    for ch in &r.choices {
        let c = ch.cell;
        t.push(vec![
            a.cost_budget.into(),
            r.model.as_str().into(),
            ch.task_id.as_str().into(),
            ch.feasible().into(),
            c.map(|c| c.trials).into(),
            c.map(|c| c.max_new_tokens).into(),
            c.and_then(|c| c.kv_budget).into(),
            c.and_then(|c| c.block_size).into(),
            c.map(|c| c.gen.mean).into(),
            c.map(|c| c.gen.second_moment).into(),
            c.map(|c| c.cost).into(),
            ch.accuracy().into(),
        ]);
    }
    let mut summary = format!(
        "{} at {}: accuracy {}, total cost {}",
        r.model,
        fmt_short(a.cost_budget),
        fmt_short(r.avg_best_acc),
        fmt_short(r.total_cost())
    );
    if let Ok(corr) = length_trial_correlation(&r) {
        summary.push_str(&format!(", length/trials correlation {}", fmt_short(corr.coefficient)));
    }
    Ok(ld.finish(t, summary))
}

fn tokens_opt(a: &FrontierArgs, mut ld: Loader<'_>) -> Result<Outcome> {
    let rp = replay(&a.replay, &a.models, &mut ld)?;
    let sweep = sweep_for(&a.sweep, &rp.tables)?;
    let measure = TokenMeasure::for_setup(rp.mode, rp.variant, rp.strategy);
    let mut t = Table::new(
        "tokens-opt.v1",
        &[
            "budget",
            "model",
            "token_measure",
            "avg_best_acc",
            "feasible_tasks",
            "optimal_tokens",
            "optimal_kv_budget",
        ],
    );
    let measure_name = match measure {
        TokenMeasure::Linear => "linear",
        TokenMeasure::Quadratic => "quadratic",
    };
    for &c in &sweep {
        for table in &rp.tables {
            let r = table.best_at(c);
            let feasible = r.choices.iter().filter(|x| x.feasible()).count() as u64;
            let tokens = optimal_generation_tokens(&r.choices, measure).ok();
            let kv = r.choices.iter().filter_map(|x| x.cell.and_then(|c| c.kv_budget)).max();
            t.push(vec![
                c.into(),
                r.model.as_str().into(),
                measure_name.into(),
                r.avg_best_acc.into(),
                feasible.into(),
                tokens.into(),
                kv.into(),
            ]);
        }
    }
    let summary = format!("{} budgets x {} models, tokens counted {measure_name}", sweep.len(), rp.tables.len());
    Ok(ld.finish(t, summary))
}

fn fit_kv(a: &FitKvArgs, mut ld: Loader<'_>) -> Result<Outcome> {
    let family = if a.models.is_empty() {
        ModelFamily::qwen3_measured()
    } else {
        let members = a.models.iter().map(|m| ld.model(m)).collect::<Result<Vec<_>>>()?;
        ModelFamily::new("custom", members)
    };
    let fit = kv_growth_fit(&family)?;
    let mut t = Table::new(
        "fit-kv.v1",
        &[
            "model",
            "active_params",
            "kv_elems_per_token",
            "fitted_kv",
            "log_residual",
            "slope",
            "intercept",
            "factor_per_doubling",
        ],
    );
    for (m, res) in family.members().iter().zip(&fit.residuals) {
        t.push(vec![
            m.name().into(),
            m.active_params().into(),
            m.kv_elems_per_token().into(),
            fit.predict(m.active_params()).into(),
            (*res).into(),
            fit.slope.into(),
            fit.intercept.into(),
            fit.factor.into(),
        ]);
    }
    let summary = format!("KV grows {}x per doubling of parameters (slope {})", fmt_short(fit.factor), fmt_short(fit.slope));
    Ok(ld.finish(t, summary))
}

fn read_points(path: &Path, model: Option<&str>) -> Result<Vec<BudgetPoint>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cli: failed to read `{}`", path.display()))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or_else(|| anyhow!("cli: `{}` is empty", path.display()))?.split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| anyhow!("cli: `{}` has no `{name}` column", path.display()))
    };
    let (ib, ikv, itok) = (col("budget")?, col("optimal_kv_budget")?, col("optimal_tokens")?);
    let imodel = header.iter().position(|h| h.trim() == "model");
    let mut points = Vec::new();
    let mut models = BTreeSet::new();
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != header.len() {
            bail!("cli: `{}` row {} has {} fields, expected {}", path.display(), n + 2, fields.len(), header.len());
        }
        if let Some(i) = imodel {
            if model.is_some_and(|m| m != fields[i]) {
                continue;
            }
            models.insert(fields[i].to_string());
        }
        if [ib, ikv, itok].iter().any(|&i| fields[i].is_empty()) {
            continue;
        }
        let num = |i: usize| {
            fields[i]
                .parse::<f64>()
                .with_context(|| format!("cli: `{}` row {}: bad number `{}`", path.display(), n + 2, fields[i]))
        };
        points.push(BudgetPoint {
            budget: num(ib)?,
            kv_budget: num(ikv)?,
            tokens: num(itok)?,
        });
    }
    if models.len() > 1 {
        bail!("cli: `{}` mixes {} models; pick one with --model", path.display(), models.len());
    }
    Ok(points)
}

fn fit_budget(a: &FitBudgetArgs) -> Result<Outcome> {
    let points = read_points(&a.points, a.model.as_deref())?;
    let fit = fit_budget_scaling(&points, a.floor)?;
    let mut t = Table::new(
        "fit-budget.v1",
        &[
            "points",
            "kv_factor",
            "kv_slope",
            "kv_intercept",
            "tokens_factor",
            "tokens_slope",
            "tokens_intercept",
            "tokens_rss",
            "floor",
            "floor_scale",
            "floor_exponent",
            "floor_factor",
            "floor_rss",
        ],
    );
    let ff = fit.floor_fit.as_ref();
    t.push(vec![
        (points.len() as u64).into(),
        fit.kv_factor.into(),
        fit.kv_fit.slope.into(),
        fit.kv_fit.intercept.into(),
        fit.tokens_factor.into(),
        fit.tokens_fit.slope.into(),
        fit.tokens_fit.intercept.into(),
        fit.tokens_rss.into(),
        ff.map(|f| f.floor).into(),
        ff.map(|f| f.scale).into(),
        ff.map(|f| f.exponent).into(),
        ff.map(|f| f.factor).into(),
        ff.map(|f| f.rss).into(),
    ]);
    let summary = format!(
        "per doubling of budget: KV budget x{}, tokens x{}",
        fmt_short(fit.kv_factor),
        fmt_short(fit.tokens_factor)
    );
    let mut out = Outcome::new(t, summary);
    out.inputs.push(a.points.clone());
    Ok(out)
}

fn passk(a: &PasskArgs) -> Result<Outcome> {
    let p = pass_at_k(a.samples, a.correct, a.k)?;
    let mut t = Table::new("passk.v1", &["s", "c", "k", "pass_at_k"]);
    t.push(vec![a.samples.into(), a.correct.into(), a.k.into(), p.into()]);
    Ok(Outcome::new(t, fmt_short(p)))
}

fn attn_check(a: &AttnCheckArgs) -> Result<Outcome> {
    let report = run_self_check(a.seed, a.instances as usize);
    let mut t = Table::new(
        "attn-check.v1",
        &["seed", "instances", "property", "max_rel_error", "tolerance", "failures", "passed"],
    );
    for p in &report.properties {
        t.push(vec![
            report.seed.into(),
            (report.instances as u64).into(),
            p.name.into(),
            p.max_error.into(),
            report.tolerance.into(),
            (p.failures as u64).into(),
            (p.failures == 0).into(),
        ]);
    }
    let failing: Vec<&str> = report.properties.iter().filter(|p| p.failures > 0).map(|p| p.name).collect();
    let summary = if failing.is_empty() {
        format!("{} properties hold over {} instances (seed {})", report.properties.len(), report.instances, report.seed)
    } else {
        format!("attn: failing properties: {}", failing.join(", "))
    };
    let mut out = Outcome::new(t, summary);
    out.failed = !report.passed();
    Ok(out)
}

fn throughput(a: &ThroughputArgs, mut ld: Loader<'_>) -> Result<Outcome> {
    let model = ld.model(&a.target.model)?;
    let hw = ld.hw(&a.target.hw)?;
    let attn = DecodeAttention {
        variant: a.attn,
        kv_budget: a.budget,
        block_size: (a.attn == AttnVariant::BlockTopK).then_some(a.block_size),
    };
    let e = throughput_estimate(&model, &hw, a.batch, a.ctx, attn, a.latency)?;
    let latency = match a.latency {
        LatencyModel::Bottleneck => "max",
        LatencyModel::Additive => "additive",
    };
    let mut t = Table::new(
        "throughput.v1",
        &[
            "model",
            "hw",
            "attn",
            "batch",
            "ctx",
            "kv_budget",
            "block_size",
            "latency",
            "kv_loaded_per_seq",
            "compute_seconds",
            "memory_seconds",
            "step_seconds",
            "tokens_per_second",
            "dense_tokens_per_second",
            "speedup",
        ],
    );
    t.push(vec![
        model.name().into(),
        hw.name().into(),
        a.attn.as_str().into(),
        a.batch.into(),
        a.ctx.into(),
        a.budget.into(),
        e.block_size.into(),
        latency.into(),
        e.kv_loaded_per_seq.into(),
        e.compute_seconds.into(),
        e.memory_seconds.into(),
        e.step_seconds.into(),
        e.tokens_per_second.into(),
        e.dense_tokens_per_second.into(),
        e.speedup.into(),
    ]);
    let summary = format!(
        "{} {}: {} tokens/s, {}x over dense",
        model.name(),
        a.attn.as_str(),
        fmt_short(e.tokens_per_second),
        fmt_short(e.speedup)
    );
    Ok(ld.finish(t, summary))
}

fn seconds(a: &SecondsArgs, mut ld: Loader<'_>) -> Result<Outcome> {
    let hw = ld.hw(&a.hw)?;
    let mut t = Table::new("seconds.v1", &["hw", "cost", "seconds"]);
    let mut parts = Vec::new();
    for &c in &a.cost {
        let s = device_seconds(c, &hw)?;
        t.push(vec![hw.name().into(), c.into(), s.into()]);
        parts.push(format!("{}s", fmt_short(s)));
    }
    Ok(ld.finish(t, format!("{}: {}", hw.name(), parts.join(", "))))
}
