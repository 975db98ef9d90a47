//! Inference cost calculus for test-time scaling.
//!
//! Costs are kept as raw compute (FLOPs) and raw memory traffic (elements)
//! in a [`CostBreakdown`]; the two totals are combined on read, either
//! additively (`compute + I * access`, the eFLOPs model) or through the
//! bottleneck `max(compute, I * access)`.
//!
//! Every generation-length term uses the length moments of a
//! [`GenLenStats`]: `E[L]` where a formula is linear in the output length
//! and `E[L^2]` where it is quadratic. A fixed length `L` lifts to
//! `(L, L^2, 1)`.
//!
//! Prompt KV traffic is shared by all `N` trials and is not scaled by `N`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::{ArchError, HardwareProfile, ModelConfig};

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("cost: invalid setting: {0}")]
    InvalidSetting(String),
    #[error("cost: expected a {expected} setting, got {got}")]
    WrongVariant { expected: &'static str, got: AttnVariant },
    #[error("cost: sparse setting needs a KV budget")]
    MissingBudget,
    #[error("cost: block-top-k setting needs a block size")]
    MissingBlockSize,
    #[error("cost: KV budget {budget} exceeds prompt length {prompt_len}; sparse costs assume prompt >= budget")]
    BudgetExceedsPrompt { budget: u64, prompt_len: f64 },
    #[error("cost: degenerate setting: {0}")]
    Degenerate(&'static str),
    #[error("cost: no positive root for the equal-cost length")]
    NoPositiveRoot,
    #[error("cost: unsupported cost mode `{0}` for this operation")]
    UnsupportedMode(CostMode),
    #[error(transparent)]
    Arch(#[from] ArchError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttnVariant {
    Dense,
    OracleTopK,
    BlockTopK,
    Local,
}

impl AttnVariant {
    pub const ALL: [AttnVariant; 4] = [Self::Dense, Self::OracleTopK, Self::BlockTopK, Self::Local];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Dense => "dense",
            Self::OracleTopK => "oracle-top-k",
            Self::BlockTopK => "block-top-k",
            Self::Local => "local",
        }
    }

    pub fn is_sparse(self) -> bool {
        self != Self::Dense
    }
}

impl fmt::Display for AttnVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttnVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dense" => Ok(Self::Dense),
            "oracle-top-k" | "top-k" | "topk" => Ok(Self::OracleTopK),
            "block-top-k" | "block-topk" => Ok(Self::BlockTopK),
            "local" => Ok(Self::Local),
            other => Err(format!(
                "unknown attention variant `{other}` (expected dense, oracle-top-k, block-top-k or local)"
            )),
        }
    }
}

/// How compute and memory traffic combine into a scalar cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostMode {
    /// `compute + I * access`.
    Eflops,
    /// Compute only: linear, attention and search FLOPs.
    FlopsOnly,
    /// `max(compute, I * access)`.
    Max,
}

impl CostMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Eflops => "eflops",
            Self::FlopsOnly => "flops-only",
            Self::Max => "max",
        }
    }
}

impl fmt::Display for CostMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CostMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "eflops" | "additive" => Ok(Self::Eflops),
            "flops-only" | "flops" => Ok(Self::FlopsOnly),
            "max" => Ok(Self::Max),
            other => Err(format!("unknown cost mode `{other}` (expected eflops, flops-only or max)")),
        }
    }
}

/// First and second moments of the generated length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenLenStats {
    pub mean: f64,
    pub second_moment: f64,
    pub count: u64,
}

impl GenLenStats {
    pub fn new(mean: f64, second_moment: f64, count: u64) -> Result<Self, CostError> {
        if !(mean.is_finite() && mean >= 0.0) {
            return Err(CostError::InvalidSetting(format!("mean length must be >= 0, got {mean}")));
        }
        // Moments computed from samples can undershoot mean^2 by rounding.
        if !second_moment.is_finite() || second_moment < mean * mean * (1.0 - 1e-12) {
            return Err(CostError::InvalidSetting(format!(
                "second moment {second_moment} is below mean^2 = {}",
                mean * mean
            )));
        }
        Ok(Self {
            mean,
            second_moment,
            count,
        })
    }

    pub fn scalar(len: f64) -> Self {
        Self {
            mean: len,
            second_moment: len * len,
            count: 1,
        }
    }

    pub fn from_lengths(lengths: &[u64]) -> Result<Self, CostError> {
        if lengths.is_empty() {
            return Err(CostError::Degenerate("no lengths to average"));
        }
        let n = lengths.len() as f64;
        let mean = lengths.iter().map(|&l| l as f64).sum::<f64>() / n;
        let second = lengths.iter().map(|&l| (l as f64) * (l as f64)).sum::<f64>() / n;
        Self::new(mean, second, lengths.len() as u64)
    }

    /// Root-mean-square length, `sqrt(E[L^2])`.
    pub fn rms(&self) -> f64 {
        self.second_moment.sqrt()
    }
}

/// One test-time scaling configuration to be costed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TtsSetting {
    pub trials: u32,
    pub prompt_len: f64,
    pub gen: GenLenStats,
    pub kv_budget: Option<u64>,
    pub variant: AttnVariant,
    pub block_size: Option<u64>,
    /// Fractional surcharge on sparse totals (first layer kept dense). Zero by default.
    pub surcharge: f64,
}

impl TtsSetting {
    pub fn dense(trials: u32, prompt_len: f64, gen: GenLenStats) -> Self {
        Self {
            trials,
            prompt_len,
            gen,
            kv_budget: None,
            variant: AttnVariant::Dense,
            block_size: None,
            surcharge: 0.0,
        }
    }

    pub fn sparse(
        trials: u32,
        prompt_len: f64,
        gen: GenLenStats,
        variant: AttnVariant,
        kv_budget: u64,
        block_size: Option<u64>,
    ) -> Self {
        Self {
            trials,
            prompt_len,
            gen,
            kv_budget: Some(kv_budget),
            variant,
            block_size,
            surcharge: 0.0,
        }
    }

    pub fn with_surcharge(mut self, surcharge: f64) -> Self {
        self.surcharge = surcharge;
        self
    }

    fn validate(&self) -> Result<(), CostError> {
        if self.trials == 0 {
            return Err(CostError::InvalidSetting("trials must be >= 1".into()));
        }
        if !(self.prompt_len.is_finite() && self.prompt_len >= 0.0) {
            return Err(CostError::InvalidSetting(format!(
                "prompt length must be >= 0, got {}",
                self.prompt_len
            )));
        }
        GenLenStats::new(self.gen.mean, self.gen.second_moment, self.gen.count)?;
        if self.kv_budget == Some(0) {
            return Err(CostError::InvalidSetting("KV budget must be >= 1".into()));
        }
        if self.block_size == Some(0) {
            return Err(CostError::InvalidSetting("block size must be >= 1".into()));
        }
        if !(self.surcharge.is_finite() && self.surcharge >= 0.0) {
            return Err(CostError::InvalidSetting(format!(
                "surcharge must be >= 0, got {}",
                self.surcharge
            )));
        }
        Ok(())
    }
}

/// Itemised cost of one setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub linear_compute: f64,
    pub attn_compute: f64,
    pub kv_access: f64,
    pub search_compute: f64,
    pub search_access: f64,
    /// Arithmetic intensity the totals are weighted with.
    pub intensity: f64,
    pub surcharge: f64,
}

impl CostBreakdown {
    fn scale(&self) -> f64 {
        1.0 + self.surcharge
    }

    pub fn total_compute(&self) -> f64 {
        (self.linear_compute + self.attn_compute + self.search_compute) * self.scale()
    }

    pub fn total_access(&self) -> f64 {
        (self.kv_access + self.search_access) * self.scale()
    }

    pub fn eflops_additive(&self) -> f64 {
        self.total_compute() + self.intensity * self.total_access()
    }

    pub fn eflops_max(&self) -> f64 {
        self.total_compute().max(self.intensity * self.total_access())
    }

    pub fn value(&self, mode: CostMode) -> f64 {
        match mode {
            CostMode::Eflops => self.eflops_additive(),
            CostMode::FlopsOnly => self.total_compute(),
            CostMode::Max => self.eflops_max(),
        }
    }
}

struct Arch {
    params: f64,
    kv: f64,
    r: f64,
}

impl Arch {
    fn of(model: &ModelConfig) -> Self {
        Self {
            params: model.active_params(),
            kv: model.kv_elems_per_token(),
            r: model.gqa_ratio(),
        }
    }
}

fn dense_terms(a: &Arch, intensity: f64, s: &TtsSetting) -> CostBreakdown {
    let n = f64::from(s.trials);
    let (l1, l2) = (s.gen.mean, s.gen.second_moment);
    let lin = s.prompt_len;
    CostBreakdown {
        linear_compute: 2.0 * a.params * n * l1,
        attn_compute: 2.0 * a.r * n * lin * a.kv * l1 + a.r * n * a.kv * l2,
        kv_access: 2.0 * lin * a.kv * l1 + n * a.kv * l2,
        search_compute: 0.0,
        search_access: 0.0,
        intensity,
        surcharge: 0.0,
    }
}

/// Block-search numerators before division by `2 * block_size`:
/// `(compute, access)`.
fn search_numerators(a: &Arch, s: &TtsSetting) -> (f64, f64) {
    let n = f64::from(s.trials);
    let (l1, l2) = (s.gen.mean, s.gen.second_moment);
    let lin = s.prompt_len;
    (
        2.0 * n * lin * a.kv * l1 + a.r * n * a.kv * l2,
        2.0 * lin * a.kv * l1 + n * a.kv * l2,
    )
}

/// Dense-attention cost of a setting.
pub fn dense_cost(model: &ModelConfig, hw: &HardwareProfile, s: &TtsSetting) -> Result<CostBreakdown, CostError> {
    s.validate()?;
    if s.variant != AttnVariant::Dense {
        return Err(CostError::WrongVariant {
            expected: "dense",
            got: s.variant,
        });
    }
    Ok(dense_terms(&Arch::of(model), hw.intensity(), s))
}

fn sparse_terms(a: &Arch, intensity: f64, s: &TtsSetting, budget: u64) -> CostBreakdown {
    let n = f64::from(s.trials);
    let b = budget as f64;
    let l1 = s.gen.mean;
    CostBreakdown {
        linear_compute: 2.0 * a.params * n * l1,
        attn_compute: 2.0 * a.r * n * a.kv * b * l1,
        kv_access: 2.0 * n * a.kv * b * l1,
        search_compute: 0.0,
        search_access: 0.0,
        intensity,
        surcharge: s.surcharge,
    }
}

fn sparse_budget(s: &TtsSetting) -> Result<u64, CostError> {
    s.validate()?;
    if s.variant == AttnVariant::Dense {
        return Err(CostError::WrongVariant {
            expected: "sparse",
            got: s.variant,
        });
    }
    let budget = s.kv_budget.ok_or(CostError::MissingBudget)?;
    if budget as f64 > s.prompt_len {
        return Err(CostError::BudgetExceedsPrompt {
            budget,
            prompt_len: s.prompt_len,
        });
    }
    Ok(budget)
}

/// Sparse-attention cost with a uniform per-head KV budget.
///
/// Only block-top-k pays a search cost: scoring the block-mean keys.
/// Oracle top-k and local attention are charged no search.
pub fn sparse_cost(model: &ModelConfig, hw: &HardwareProfile, s: &TtsSetting) -> Result<CostBreakdown, CostError> {
    let budget = sparse_budget(s)?;
    let a = Arch::of(model);
    let mut out = sparse_terms(&a, hw.intensity(), s, budget);
    if s.variant == AttnVariant::BlockTopK {
        let bs = s.block_size.ok_or(CostError::MissingBlockSize)? as f64;
        let (c, m) = search_numerators(&a, s);
        out.search_compute = c / (2.0 * bs);
        out.search_access = m / (2.0 * bs);
    }
    Ok(out)
}

/// Dispatches on `s.variant`.
pub fn tts_cost(model: &ModelConfig, hw: &HardwareProfile, s: &TtsSetting) -> Result<CostBreakdown, CostError> {
    match s.variant {
        AttnVariant::Dense => dense_cost(model, hw, s),
        _ => sparse_cost(model, hw, s),
    }
}

/// Ratio of attention-related to parameter-related cost per generated token,
/// `(2 r L_in D + (r D + I D) L_out) / (2 P)`.
pub fn attention_param_ratio(
    model: &ModelConfig,
    hw: &HardwareProfile,
    prompt_len: f64,
    gen_len: f64,
) -> Result<f64, CostError> {
    if !(prompt_len >= 0.0 && gen_len >= 0.0) {
        return Err(CostError::InvalidSetting("lengths must be >= 0".into()));
    }
    let (r, d, p) = (model.gqa_ratio(), model.kv_elems_per_token(), model.active_params());
    let i = hw.intensity();
    Ok((2.0 * r * prompt_len * d + (r * d + i * d) * gen_len) / (2.0 * p))
}

/// A block size chosen to balance two costs, one of which shrinks as `1/bs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockSizeChoice {
    /// Real-valued balance point before rounding.
    pub exact: f64,
    pub chosen: u64,
    /// The block-size independent side of the balance.
    pub fixed_cost: f64,
    /// Numerator of the `1/(2 bs)` side.
    pub search_numerator: f64,
}

impl BlockSizeChoice {
    pub fn search_cost(&self) -> f64 {
        self.search_numerator / (2.0 * self.chosen as f64)
    }

    /// `|fixed - search| / fixed` at the chosen size.
    pub fn imbalance(&self) -> f64 {
        (self.fixed_cost - self.search_cost()).abs() / self.fixed_cost
    }
}

fn pick_block_size(fixed: f64, numerator: f64, pow2: bool) -> Result<BlockSizeChoice, CostError> {
    if !(fixed > 0.0 && numerator > 0.0 && fixed.is_finite() && numerator.is_finite()) {
        return Err(CostError::Degenerate("both sides of the block-size balance must be > 0"));
    }
    let exact = numerator / (2.0 * fixed);
    let (lo, hi) = if pow2 {
        let e = exact.max(1.0).log2();
        (e.floor().exp2() as u64, e.ceil().exp2() as u64)
    } else {
        (exact.floor().max(1.0) as u64, exact.ceil().max(1.0) as u64)
    };
    let gap = |bs: u64| (fixed - numerator / (2.0 * bs as f64)).abs();
    // Ties go to the smaller block.
    let chosen = if gap(hi) < gap(lo) { hi } else { lo };
    Ok(BlockSizeChoice {
        exact,
        chosen,
        fixed_cost: fixed,
        search_numerator: numerator,
    })
}

/// Block size balancing the sparse cost against the block-search cost.
///
/// Both sides are eFLOPs totals; the search side is `X / (2 bs)` where `X`
/// is the search numerator. The integer size minimising the gap is chosen
/// among the neighbours of `X / (2 C_sparse)`; `pow2` restricts the
/// candidates to powers of two.
pub fn balanced_block_size(
    model: &ModelConfig,
    hw: &HardwareProfile,
    s: &TtsSetting,
    pow2: bool,
) -> Result<BlockSizeChoice, CostError> {
    if s.variant != AttnVariant::BlockTopK {
        return Err(CostError::WrongVariant {
            expected: "block-top-k",
            got: s.variant,
        });
    }
    let budget = sparse_budget(s)?;
    let a = Arch::of(model);
    let i = hw.intensity();
    let mut plain = sparse_terms(&a, i, s, budget);
    plain.surcharge = 0.0;
    let (c, m) = search_numerators(&a, s);
    pick_block_size(plain.eflops_additive(), c + i * m, pow2)
}

/// Block size balancing, per decode step at context `ctx`, the budgeted KV
/// load `B * D` against the block-mean key load `ctx * D / (2 bs)`.
pub fn decode_balanced_block_size(ctx: u64, budget: u64, pow2: bool) -> Result<BlockSizeChoice, CostError> {
    pick_block_size(budget as f64, ctx as f64, pow2)
}

/// Coefficients of a dense cost as a polynomial in a scalar output length:
/// `quadratic * L^2 + linear * L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthPolynomial {
    pub quadratic: f64,
    pub linear: f64,
}

impl LengthPolynomial {
    pub fn dense(
        model: &ModelConfig,
        hw: &HardwareProfile,
        prompt_len: f64,
        trials: u32,
        mode: CostMode,
    ) -> Result<Self, CostError> {
        poly_for(&Arch::of(model), hw.intensity(), prompt_len, trials, mode)
    }

    pub fn eval(&self, len: f64) -> f64 {
        self.quadratic * len * len + self.linear * len
    }

    /// Positive `L` with `eval(L) = target`.
    pub fn solve(&self, target: f64) -> Result<f64, CostError> {
        if !(target > 0.0) {
            return Err(CostError::NoPositiveRoot);
        }
        let (a2, a1) = (self.quadratic, self.linear);
        let disc = a1 * a1 + 4.0 * a2 * target;
        if disc < 0.0 {
            return Err(CostError::NoPositiveRoot);
        }
        // Cancellation-free form of (-a1 + sqrt(disc)) / (2 a2).
        let denom = a1 + disc.sqrt();
        if !(denom > 0.0) {
            return Err(CostError::NoPositiveRoot);
        }
        Ok(2.0 * target / denom)
    }
}

fn poly_for(a: &Arch, intensity: f64, prompt_len: f64, trials: u32, mode: CostMode) -> Result<LengthPolynomial, CostError> {
    let n = f64::from(trials);
    let compute = LengthPolynomial {
        quadratic: a.r * n * a.kv,
        linear: 2.0 * n * a.params + 2.0 * a.r * n * prompt_len * a.kv,
    };
    match mode {
        CostMode::FlopsOnly => Ok(compute),
        CostMode::Eflops => Ok(LengthPolynomial {
            quadratic: compute.quadratic + intensity * n * a.kv,
            linear: compute.linear + 2.0 * intensity * prompt_len * a.kv,
        }),
        CostMode::Max => Err(CostError::UnsupportedMode(mode)),
    }
}

/// Output length at which `model_b` costs the same as `model_a` generating
/// `len_a` tokens, under dense attention and a scalar length.
pub fn equivalent_length(
    model_a: &ModelConfig,
    len_a: f64,
    model_b: &ModelConfig,
    mode: CostMode,
    hw: &HardwareProfile,
    prompt_len: f64,
    trials: u32,
) -> Result<f64, CostError> {
    if !(len_a > 0.0) {
        return Err(CostError::InvalidSetting(format!("length must be > 0, got {len_a}")));
    }
    if trials == 0 || !(prompt_len >= 0.0) {
        return Err(CostError::InvalidSetting("trials must be >= 1 and prompt length >= 0".into()));
    }
    let target = LengthPolynomial::dense(model_a, hw, prompt_len, trials, mode)?.eval(len_a);
    LengthPolynomial::dense(model_b, hw, prompt_len, trials, mode)?.solve(target)
}

/// Family-level KV law `D(P) = d0 * (P / p0)^beta` plus the fixed knobs of an
/// iso-cost sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsoCostSpec {
    pub d0: f64,
    pub p0: f64,
    pub beta: f64,
    pub gqa_ratio: f64,
    pub prompt_len: f64,
    pub trials: u32,
}

impl IsoCostSpec {
    pub fn kv_at(&self, params: f64) -> f64 {
        self.d0 * (params / self.p0).powf(self.beta)
    }

    fn arch(&self, params: f64) -> Arch {
        Arch {
            params,
            kv: self.kv_at(params),
            r: self.gqa_ratio,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsoCostCell {
    pub params: f64,
    pub kv_elems_per_token: f64,
    pub gen_len: f64,
    pub eflops: f64,
    pub flops: f64,
}

/// The generation length on a cost contour for a given model size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourPoint {
    pub level: f64,
    pub mode: CostMode,
    pub params: f64,
    pub gen_len: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsoCostGrid {
    /// Row-major over `params` then `gen_len`.
    pub cells: Vec<IsoCostCell>,
    pub contours: Vec<ContourPoint>,
}

impl IsoCostGrid {
    /// Largest grid model size whose cost at `gen_len` stays within `level`.
    pub fn max_params_within(&self, level: f64, gen_len: f64, mode: CostMode) -> Option<f64> {
        self.cells
            .iter()
            .filter(|c| c.gen_len == gen_len)
            .filter(|c| match mode {
                CostMode::FlopsOnly => c.flops <= level,
                _ => c.eflops <= level,
            })
            .map(|c| c.params)
            .max_by(f64::total_cmp)
    }
}

/// Evaluates dense costs over a `(P, L_out)` grid in both the eFLOPs and the
/// FLOPs-only model, and traces each cost level as a contour over `P`.
pub fn iso_cost_grid(
    spec: &IsoCostSpec,
    hw: &HardwareProfile,
    params: &[f64],
    gen_lens: &[f64],
    levels: &[f64],
) -> Result<IsoCostGrid, CostError> {
    if params.is_empty() || gen_lens.is_empty() {
        return Err(CostError::Degenerate("iso-cost grid needs at least one P and one L_out"));
    }
    if spec.trials == 0 || !(spec.p0 > 0.0) || !(spec.d0 >= 0.0) {
        return Err(CostError::InvalidSetting("iso-cost spec needs trials >= 1, p0 > 0, d0 >= 0".into()));
    }
    let i = hw.intensity();
    let mut cells = Vec::with_capacity(params.len() * gen_lens.len());
    for &p in params {
        let a = spec.arch(p);
        for &l in gen_lens {
            let s = TtsSetting::dense(spec.trials, spec.prompt_len, GenLenStats::scalar(l));
            let c = dense_terms(&a, i, &s);
            cells.push(IsoCostCell {
                params: p,
                kv_elems_per_token: a.kv,
                gen_len: l,
                eflops: c.eflops_additive(),
                flops: c.total_compute(),
            });
        }
    }
    let mut contours = Vec::new();
    for &level in levels {
        for mode in [CostMode::Eflops, CostMode::FlopsOnly] {
            for &p in params {
                let poly = poly_for(&spec.arch(p), i, spec.prompt_len, spec.trials, mode)?;
                if let Ok(gen_len) = poly.solve(level) {
                    contours.push(ContourPoint {
                        level,
                        mode,
                        params: p,
                        gen_len,
                    });
                }
            }
        }
    }
    Ok(IsoCostGrid { cells, contours })
}

/// Seconds a device at full utilisation needs for `cost` (e)FLOPs.
pub fn device_seconds(cost: f64, hw: &HardwareProfile) -> Result<f64, CostError> {
    if !(cost >= 0.0) {
        return Err(CostError::InvalidSetting(format!("cost must be >= 0, got {cost}")));
    }
    Ok(cost / hw.peak_flops())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockSizeRule {
    Fixed(u64),
    Balanced,
}

impl FromStr for BlockSizeRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" || s == "balanced" {
            return Ok(Self::Balanced);
        }
        match s.parse::<u64>() {
            Ok(0) => Err("block size must be >= 1".into()),
            Ok(v) => Ok(Self::Fixed(v)),
            Err(_) => Err(format!("block size must be a positive integer or `auto`, got `{s}`")),
        }
    }
}

/// Per-step latency combination for the throughput model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatencyModel {
    /// `max(compute, memory)`: perfect overlap.
    Bottleneck,
    /// `compute + memory`.
    Additive,
}

impl FromStr for LatencyModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max" | "bottleneck" => Ok(Self::Bottleneck),
            "additive" | "sum" => Ok(Self::Additive),
            other => Err(format!("unknown latency model `{other}` (expected max or additive)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeAttention {
    pub variant: AttnVariant,
    pub kv_budget: Option<u64>,
    pub block_size: Option<BlockSizeRule>,
}

impl DecodeAttention {
    pub fn dense() -> Self {
        Self {
            variant: AttnVariant::Dense,
            kv_budget: None,
            block_size: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThroughputEstimate {
    pub kv_loaded_per_seq: f64,
    pub block_size: Option<u64>,
    pub compute_seconds: f64,
    pub memory_seconds: f64,
    pub step_seconds: f64,
    pub tokens_per_second: f64,
    pub dense_tokens_per_second: f64,
    pub speedup: f64,
}

struct StepTime {
    kv: f64,
    compute: f64,
    memory: f64,
    step: f64,
}

fn decode_step(model: &ModelConfig, hw: &HardwareProfile, batch: f64, kv: f64, latency: LatencyModel) -> StepTime {
    let p = model.active_params();
    let attn_flops = 2.0 * model.gqa_ratio() * kv;
    let compute = (2.0 * p * batch + attn_flops * batch) / hw.peak_flops();
    let memory = (p + batch * kv) / hw.mem_bw_elems();
    let step = match latency {
        LatencyModel::Bottleneck => compute.max(memory),
        LatencyModel::Additive => compute + memory,
    };
    StepTime {
        kv,
        compute,
        memory,
        step,
    }
}

/// Analytical decode throughput at a fixed batch and context length.
///
/// Each step loads the active parameters once for the whole batch and each
/// sequence's attended KV elements; attention costs `2 r` FLOPs per loaded
/// element.
pub fn throughput_estimate(
    model: &ModelConfig,
    hw: &HardwareProfile,
    batch: u64,
    ctx: u64,
    attn: DecodeAttention,
    latency: LatencyModel,
) -> Result<ThroughputEstimate, CostError> {
    if batch == 0 || ctx == 0 {
        return Err(CostError::InvalidSetting("batch and context must be >= 1".into()));
    }
    let d = model.kv_elems_per_token();
    let (kv, block_size) = match attn.variant {
        AttnVariant::Dense => (ctx as f64 * d, None),
        variant => {
            let budget = attn.kv_budget.ok_or(CostError::MissingBudget)?;
            if budget == 0 || budget > ctx {
                return Err(CostError::InvalidSetting(format!(
                    "KV budget must be in 1..={ctx}, got {budget}"
                )));
            }
            if variant == AttnVariant::BlockTopK {
                let bs = match attn.block_size.ok_or(CostError::MissingBlockSize)? {
                    BlockSizeRule::Fixed(bs) => bs,
                    BlockSizeRule::Balanced => decode_balanced_block_size(ctx, budget, false)?.chosen,
                };
                if bs == 0 {
                    return Err(CostError::InvalidSetting("block size must be >= 1".into()));
                }
                (budget as f64 * d + ctx as f64 * d / (2.0 * bs as f64), Some(bs))
            } else {
                (budget as f64 * d, None)
            }
        }
    };
    let b = batch as f64;
    let this = decode_step(model, hw, b, kv, latency);
    let dense = decode_step(model, hw, b, ctx as f64 * d, latency);
    let tokens_per_second = b / this.step;
    let dense_tokens_per_second = b / dense.step;
    Ok(ThroughputEstimate {
        kv_loaded_per_seq: this.kv,
        block_size,
        compute_seconds: this.compute,
        memory_seconds: this.memory,
        step_seconds: this.step,
        tokens_per_second,
        dense_tokens_per_second,
        speedup: tokens_per_second / dense_tokens_per_second,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{hardware_preset, model_preset};
    use proptest::prelude::*;

    fn toy() -> ModelConfig {
        ModelConfig::new("toy", 1000.0, 10.0, 2.0, 2).unwrap()
    }

    fn toy_hw() -> HardwareProfile {
        HardwareProfile::new("toy-hw", 10.0, 1.0).unwrap()
    }

    fn toy_dense(trials: u32) -> TtsSetting {
        TtsSetting::dense(trials, 100.0, GenLenStats::scalar(10.0))
    }

    fn toy_sparse(variant: AttnVariant, block_size: Option<u64>) -> TtsSetting {
        TtsSetting::sparse(1, 100.0, GenLenStats::scalar(10.0), variant, 5, block_size)
    }

    // Term-by-term hand evaluation of the dense equations, written out
    // independently of `dense_terms`.
    fn dense_reference(p: f64, d: f64, r: f64, n: f64, lin: f64, l: f64, l2: f64) -> (f64, f64, f64) {
        let linear = 2.0 * n * p * l;
        let attn = 2.0 * r * n * lin * d * l + r * n * d * l2;
        let access = 2.0 * lin * d * l + n * d * l2;
        (linear, attn, access)
    }

    #[test]
    fn dense_toy_example() {
        let c = dense_cost(&toy(), &toy_hw(), &toy_dense(1)).unwrap();
        assert_eq!(c.linear_compute, 20_000.0);
        assert_eq!(c.attn_compute, 42_000.0);
        assert_eq!(c.kv_access, 21_000.0);
        assert_eq!(c.eflops_additive(), 272_000.0);
        assert_eq!(c.eflops_max(), 210_000.0);
        assert_eq!(c.intensity, 10.0);
        let (l, a, m) = dense_reference(1000.0, 10.0, 2.0, 1.0, 100.0, 10.0, 100.0);
        assert_eq!((c.linear_compute, c.attn_compute, c.kv_access), (l, a, m));
    }

    #[test]
    fn prompt_cache_is_shared_across_trials() {
        let c = dense_cost(&toy(), &toy_hw(), &toy_dense(2)).unwrap();
        assert_eq!(c.kv_access, 22_000.0);
    }

    #[test]
    fn zero_generation_is_free() {
        let mut s = toy_dense(3);
        s.gen = GenLenStats::scalar(0.0);
        let c = dense_cost(&toy(), &toy_hw(), &s).unwrap();
        assert_eq!(c.eflops_additive(), 0.0);
        let mut sp = toy_sparse(AttnVariant::BlockTopK, Some(2));
        sp.gen = GenLenStats::scalar(0.0);
        let c = sparse_cost(&toy(), &toy_hw(), &sp).unwrap();
        assert_eq!(c.eflops_additive(), 0.0);
        assert_eq!(c.search_access, 0.0);
    }

    #[test]
    fn dense_rejects_sparse_setting() {
        let err = dense_cost(&toy(), &toy_hw(), &toy_sparse(AttnVariant::OracleTopK, None)).unwrap_err();
        assert!(matches!(err, CostError::WrongVariant { .. }));
        let mut zero = toy_dense(1);
        zero.trials = 0;
        assert!(dense_cost(&toy(), &toy_hw(), &zero).is_err());
    }

    #[test]
    fn sparse_toy_examples() {
        let c = sparse_cost(&toy(), &toy_hw(), &toy_sparse(AttnVariant::OracleTopK, None)).unwrap();
        assert_eq!(c.linear_compute, 20_000.0);
        assert_eq!(c.attn_compute, 2_000.0);
        assert_eq!(c.kv_access * c.intensity, 10_000.0);
        assert_eq!(c.eflops_additive(), 32_000.0);

        let b = sparse_cost(&toy(), &toy_hw(), &toy_sparse(AttnVariant::BlockTopK, Some(2))).unwrap();
        assert_eq!(b.search_compute, 5_500.0);
        assert_eq!(b.intensity * b.search_access, 52_500.0);
        assert_eq!(b.eflops_additive(), 90_000.0);

        let local = sparse_cost(&toy(), &toy_hw(), &toy_sparse(AttnVariant::Local, None)).unwrap();
        assert_eq!(local.search_compute + local.search_access, 0.0);
    }

    #[test]
    fn sparse_errors() {
        let mut s = toy_sparse(AttnVariant::OracleTopK, None);
        s.kv_budget = None;
        assert_eq!(sparse_cost(&toy(), &toy_hw(), &s), Err(CostError::MissingBudget));
        let s = toy_sparse(AttnVariant::BlockTopK, None);
        assert_eq!(sparse_cost(&toy(), &toy_hw(), &s), Err(CostError::MissingBlockSize));
        let mut s = toy_sparse(AttnVariant::OracleTopK, None);
        s.kv_budget = Some(101);
        assert!(matches!(
            sparse_cost(&toy(), &toy_hw(), &s),
            Err(CostError::BudgetExceedsPrompt { budget: 101, .. })
        ));
        assert!(matches!(
            sparse_cost(&toy(), &toy_hw(), &toy_dense(1)),
            Err(CostError::WrongVariant { .. })
        ));
    }

    #[test]
    fn surcharge_scales_totals() {
        let s = toy_sparse(AttnVariant::OracleTopK, None).with_surcharge(0.0357);
        let c = sparse_cost(&toy(), &toy_hw(), &s).unwrap();
        assert!((c.eflops_additive() - 32_000.0 * 1.0357).abs() < 1e-9);
    }

    #[test]
    fn ratio_examples() {
        let phi = attention_param_ratio(&toy(), &toy_hw(), 100.0, 10.0).unwrap();
        assert!((phi - 2.6).abs() < 1e-12);
        let phi0 = attention_param_ratio(&toy(), &toy_hw(), 100.0, 0.0).unwrap();
        assert_eq!(phi0, 2.0 * 2.0 * 100.0 * 10.0 / 2000.0);
        let q14 = model_preset("Qwen3-14B").unwrap();
        let b200 = hardware_preset("b200").unwrap();
        let phi = attention_param_ratio(&q14, &b200, 1024.0, 16_384.0).unwrap();
        assert!((10.0..=1000.0).contains(&phi), "phi = {phi}");
    }

    #[test]
    fn balanced_block_size_toy() {
        let choice = balanced_block_size(&toy(), &toy_hw(), &toy_sparse(AttnVariant::BlockTopK, None), false).unwrap();
        assert_eq!(choice.fixed_cost, 32_000.0);
        assert_eq!(choice.search_numerator, 232_000.0);
        assert!((choice.exact - 3.625).abs() < 1e-12);
        assert_eq!(choice.chosen, 4);
        let p2 = balanced_block_size(&toy(), &toy_hw(), &toy_sparse(AttnVariant::BlockTopK, None), true).unwrap();
        assert!(p2.chosen.is_power_of_two());
        assert_eq!(p2.chosen, 4);
    }

    #[test]
    fn balanced_block_size_inverse_proportional() {
        let a = pick_block_size(32_000.0, 2_320_000.0, false).unwrap();
        let b = pick_block_size(64_000.0, 2_320_000.0, false).unwrap();
        assert!((a.exact / b.exact - 2.0).abs() < 1e-12);
        assert!((a.chosen as i64 - 2 * b.chosen as i64).abs() <= 1);
    }

    #[test]
    fn balanced_block_size_needs_block_variant() {
        assert!(balanced_block_size(&toy(), &toy_hw(), &toy_dense(1), false).is_err());
        let mut s = toy_sparse(AttnVariant::BlockTopK, None);
        s.gen = GenLenStats::scalar(0.0);
        assert!(matches!(
            balanced_block_size(&toy(), &toy_hw(), &s, false),
            Err(CostError::Degenerate(_))
        ));
    }

    #[test]
    fn balanced_block_size_qwen3_8b_golden() {
        let m = model_preset("Qwen3-8B").unwrap();
        let hw = hardware_preset("b200").unwrap();
        let s = TtsSetting::sparse(1, 4096.0, GenLenStats::scalar(16_384.0), AttnVariant::BlockTopK, 1024, None);
        let choice = balanced_block_size(&m, &hw, &s, false).unwrap();
        assert_eq!(choice.chosen, 5);
        assert!(choice.imbalance() <= 0.5, "imbalance {}", choice.imbalance());
    }

    #[test]
    fn equivalent_length_examples() {
        let hw = toy_hw();
        let a = toy();
        let same = equivalent_length(&a, 10.0, &a, CostMode::Eflops, &hw, 100.0, 1).unwrap();
        assert!((same - 10.0).abs() < 1e-12);
        let b = a.with_params(500.0).unwrap();
        let lb = equivalent_length(&a, 10.0, &b, CostMode::Eflops, &hw, 100.0, 1).unwrap();
        // Independent check: root of 120 L^2 + 25000 L - 272000 by the textbook formula.
        let textbook = (-25_000.0 + (25_000.0f64.powi(2) + 4.0 * 120.0 * 272_000.0).sqrt()) / 240.0;
        assert!((lb - textbook).abs() < 1e-9);
        assert!((lb - 10.36).abs() < 0.005);
        let back = dense_cost(&b, &hw, &TtsSetting::dense(1, 100.0, GenLenStats::scalar(lb))).unwrap();
        assert!((back.eflops_additive() - 272_000.0).abs() / 272_000.0 < 1e-9);
        assert!(equivalent_length(&a, 0.0, &b, CostMode::Eflops, &hw, 100.0, 1).is_err());
        assert!(equivalent_length(&a, 10.0, &b, CostMode::Max, &hw, 100.0, 1).is_err());
    }

    #[test]
    fn device_seconds_examples() {
        let b200 = hardware_preset("b200").unwrap();
        assert_eq!(device_seconds(2.25e15, &b200).unwrap(), 1.0);
        assert_eq!(device_seconds(0.0, &b200).unwrap(), 0.0);
        assert_eq!(device_seconds(4.5e15, &b200).unwrap(), 2.0 * device_seconds(2.25e15, &b200).unwrap());
        assert!(device_seconds(-1.0, &b200).is_err());
    }

    #[test]
    fn throughput_memory_bound_toy() {
        let m = ModelConfig::new("tiny", 100.0, 2.0, 1.0, 2).unwrap();
        let hw = HardwareProfile::new("slow-mem", 1e30, 100.0).unwrap();
        let dense = throughput_estimate(&m, &hw, 1, 50, DecodeAttention::dense(), LatencyModel::Bottleneck).unwrap();
        assert!((dense.tokens_per_second - 0.5).abs() < 1e-12);
        let sparse = DecodeAttention {
            variant: AttnVariant::OracleTopK,
            kv_budget: Some(10),
            block_size: None,
        };
        let t = throughput_estimate(&m, &hw, 1, 50, sparse, LatencyModel::Bottleneck).unwrap();
        assert!((t.tokens_per_second - 1.0 / 1.2).abs() < 1e-12);
        assert!((t.speedup - 2.0 / 1.2).abs() < 1e-12);
    }

    #[test]
    fn throughput_batch_amortises_parameters() {
        let m = ModelConfig::new("tiny", 1e6, 1e-9, 1.0, 2).unwrap();
        let hw = HardwareProfile::new("slow-mem", 1e30, 100.0).unwrap();
        let one = throughput_estimate(&m, &hw, 1, 10, DecodeAttention::dense(), LatencyModel::Bottleneck).unwrap();
        let two = throughput_estimate(&m, &hw, 2, 10, DecodeAttention::dense(), LatencyModel::Bottleneck).unwrap();
        assert!((two.tokens_per_second / one.tokens_per_second - 2.0).abs() < 1e-9);
    }

    #[test]
    fn throughput_additive_is_slower() {
        let m = model_preset("Qwen3-8B").unwrap();
        let hw = hardware_preset("b200").unwrap();
        let a = throughput_estimate(&m, &hw, 64, 8192, DecodeAttention::dense(), LatencyModel::Bottleneck).unwrap();
        let b = throughput_estimate(&m, &hw, 64, 8192, DecodeAttention::dense(), LatencyModel::Additive).unwrap();
        assert!(b.step_seconds > a.step_seconds);
        let bad = DecodeAttention {
            variant: AttnVariant::BlockTopK,
            kv_budget: Some(128),
            block_size: None,
        };
        assert_eq!(
            throughput_estimate(&m, &hw, 1, 1024, bad, LatencyModel::Bottleneck),
            Err(CostError::MissingBlockSize)
        );
    }

    #[test]
    fn iso_cost_single_point_matches_dense_cost() {
        let hw = hardware_preset("b200").unwrap();
        let m = model_preset("Qwen3-8B").unwrap();
        let spec = IsoCostSpec {
            d0: m.kv_elems_per_token(),
            p0: m.active_params(),
            beta: 0.28,
            gqa_ratio: m.gqa_ratio(),
            prompt_len: 512.0,
            trials: 1,
        };
        let grid = iso_cost_grid(&spec, &hw, &[8e9], &[4096.0], &[]).unwrap();
        assert_eq!(grid.cells.len(), 1);
        let direct = dense_cost(&m, &hw, &TtsSetting::dense(1, 512.0, GenLenStats::scalar(4096.0))).unwrap();
        assert_eq!(grid.cells[0].eflops, direct.eflops_additive());
        assert_eq!(grid.cells[0].flops, direct.total_compute());
        assert!(iso_cost_grid(&spec, &hw, &[], &[1.0], &[]).is_err());
    }

    #[test]
    fn iso_cost_hyperbola_without_attention() {
        let hw = hardware_preset("b200").unwrap();
        let spec = IsoCostSpec {
            d0: 0.0,
            p0: 1e9,
            beta: 0.3,
            gqa_ratio: 4.0,
            prompt_len: 0.0,
            trials: 1,
        };
        let ps = [1e9, 2e9, 5e9, 2e10];
        let grid = iso_cost_grid(&spec, &hw, &ps, &[1000.0], &[1e14]).unwrap();
        let pts: Vec<_> = grid.contours.iter().filter(|c| c.mode == CostMode::FlopsOnly).collect();
        assert_eq!(pts.len(), ps.len());
        for c in pts {
            assert!((c.params * c.gen_len - 0.5e14).abs() / 0.5e14 < 1e-12);
        }
    }

    fn arb_setting() -> impl Strategy<Value = (f64, f64, f64, f64, u32, f64, f64, f64, u64)> {
        (
            1e3..1e11f64,  // P
            1.0..2e5f64,   // D
            1.0..16.0f64,  // r
            1.0..2000.0f64, // I
            1u32..64,      // N
            1024.0..1e5f64, // L_in
            0.0..4e4f64,   // E[L]
            0.0..1e8f64,   // E[L^2] excess over E[L]^2
            1u64..1024,    // B
        )
    }

    fn build(p: f64, d: f64, r: f64, i: f64) -> (ModelConfig, HardwareProfile) {
        (
            ModelConfig::new("m", p, d, r, 2).unwrap(),
            HardwareProfile::new("h", i * 1e12, 1e12).unwrap(),
        )
    }

    proptest! {
        #[test]
        fn max_additive_sandwich((p, d, r, i, n, lin, l, ex, b) in arb_setting(), bs in 1u64..256) {
            let (m, hw) = build(p, d, r, i);
            let gen = GenLenStats::new(l, l * l + ex, 1).unwrap();
            for s in [
                TtsSetting::dense(n, lin, gen),
                TtsSetting::sparse(n, lin, gen, AttnVariant::BlockTopK, b, Some(bs)),
                TtsSetting::sparse(n, lin, gen, AttnVariant::OracleTopK, b, None),
            ] {
                let c = tts_cost(&m, &hw, &s).unwrap();
                prop_assert!(c.eflops_max() <= c.eflops_additive());
                prop_assert!(c.eflops_additive() <= 2.0 * c.eflops_max() * (1.0 + 1e-12));
                for v in [c.linear_compute, c.attn_compute, c.kv_access, c.search_compute, c.search_access] {
                    prop_assert!(v >= 0.0);
                }
            }
        }

        #[test]
        fn monotone_in_every_input((p, d, r, i, n, lin, l, ex, b) in arb_setting(), which in 0usize..10) {
            let gen = GenLenStats::new(l, l * l + ex, 1).unwrap();
            let base = (p, d, r, i, n, lin, gen, b);
            let bump = |k: usize| {
                let (mut p, mut d, mut r, mut i, mut n, mut lin, mut g, mut b) = base;
                match k {
                    0 => p *= 1.5,
                    1 => d *= 1.5,
                    2 => r += 1.0,
                    3 => i *= 1.5,
                    4 => n += 1,
                    5 => lin += 100.0,
                    6 => { g.mean *= 1.1; g.second_moment = g.second_moment.max(g.mean * g.mean) * 1.0; }
                    7 => g.second_moment *= 1.5,
                    _ => b += 1,
                }
                (p, d, r, i, n, lin, g, b)
            };
            let eval = |(p, d, r, i, n, lin, g, b): (f64, f64, f64, f64, u32, f64, GenLenStats, u64)| {
                let (m, hw) = build(p, d, r, i);
                let dense = dense_cost(&m, &hw, &TtsSetting::dense(n, lin, g)).unwrap();
                let sparse = sparse_cost(&m, &hw, &TtsSetting::sparse(n, lin + 1024.0, g, AttnVariant::BlockTopK, b, Some(8))).unwrap();
                [dense.eflops_additive(), dense.eflops_max(), dense.total_compute(),
                 sparse.eflops_additive(), sparse.eflops_max(), sparse.total_compute()]
            };
            let before = eval(base);
            let after = eval(bump(which));
            for (x, y) in before.iter().zip(after.iter()) {
                prop_assert!(y >= x, "{} -> {} for input {}", x, y, which);
            }
        }

        #[test]
        fn scalar_equals_lifted_moments(p in 1e3..1e11f64, d in 1.0..2e5f64, n in 1u32..32, lin in 0.0..1e5f64, l in 0u32..40_000) {
            let (m, hw) = build(p, d, 4.0, 562.5);
            let l = f64::from(l);
            let a = dense_cost(&m, &hw, &TtsSetting::dense(n, lin, GenLenStats::scalar(l))).unwrap();
            let b = dense_cost(&m, &hw, &TtsSetting::dense(n, lin, GenLenStats::new(l, l * l, 1).unwrap())).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn sparse_not_above_dense(p in 1e3..1e11f64, d in 1.0..2e5f64, r in 1.0..16.0f64, b in 1u64..2048, extra_in in 0u64..4096, extra_l in 0u64..40_000) {
            let (m, hw) = build(p, d, r, 562.5);
            let lin = (b + extra_in) as f64;
            let l = lin + extra_l as f64;
            let g = GenLenStats::scalar(l);
            let dense = dense_cost(&m, &hw, &TtsSetting::dense(1, lin, g)).unwrap();
            let sparse = sparse_cost(&m, &hw, &TtsSetting::sparse(1, lin, g, AttnVariant::OracleTopK, b, None)).unwrap();
            prop_assert!(sparse.attn_compute <= dense.attn_compute);
            prop_assert!(sparse.kv_access <= dense.kv_access);
        }

        #[test]
        fn n_scaled_terms_are_linear(k in 1u32..16, p in 1e3..1e10f64, l in 1.0..1e4f64) {
            let (m, hw) = build(p, 128.0, 4.0, 562.5);
            let g = GenLenStats::scalar(l);
            let at = |n| dense_cost(&m, &hw, &TtsSetting::dense(n, 2048.0, g)).unwrap();
            let (c1, c2, c3) = (at(k), at(2 * k), at(3 * k));
            for (a, b, c) in [
                (c1.linear_compute, c2.linear_compute, c3.linear_compute),
                (c1.attn_compute, c2.attn_compute, c3.attn_compute),
                (c1.kv_access, c2.kv_access, c3.kv_access),
            ] {
                prop_assert!(((c - b) - (b - a)).abs() <= 1e-9 * c.abs());
            }
        }

        #[test]
        fn equivalent_length_round_trip(pa in 1e8..1e11f64, pb in 1e8..1e11f64, da in 1e3..2e5f64, db in 1e3..2e5f64, la in 1.0..6e4f64, flops in any::<bool>()) {
            let hw = hardware_preset("b200").unwrap();
            let a = ModelConfig::new("a", pa, da, 4.0, 2).unwrap();
            let b = ModelConfig::new("b", pb, db, 5.0, 2).unwrap();
            let mode = if flops { CostMode::FlopsOnly } else { CostMode::Eflops };
            let lb = equivalent_length(&a, la, &b, mode, &hw, 512.0, 2).unwrap();
            let back = equivalent_length(&b, lb, &a, mode, &hw, 512.0, 2).unwrap();
            prop_assert!((back - la).abs() <= 1e-9 * la);
            let target = LengthPolynomial::dense(&a, &hw, 512.0, 2, mode).unwrap().eval(la);
            let got = LengthPolynomial::dense(&b, &hw, 512.0, 2, mode).unwrap().eval(lb);
            prop_assert!((got - target).abs() <= 1e-9 * target);
        }
    }
}
