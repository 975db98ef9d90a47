//! Reference attention kernels on small dense matrices.
//!
//! A problem holds the `g` query rows of one GQA group against shared keys
//! and values. Sparse variants pick a single token set per group from scores
//! averaged over the group's query rows, then each row takes a softmax over
//! that set with its own scores. Ties in selection go to the lower index.

pub mod check;

use std::cmp::Ordering;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AttnError {
    #[error("attn: dimension mismatch: {0}")]
    Dimension(String),
    #[error("attn: invalid sparse spec: {0}")]
    InvalidSpec(String),
    #[error("attn: non-finite input in {0}")]
    NonFinite(&'static str),
}

/// Row-major `f64` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, AttnError> {
        if data.len() != rows * cols {
            return Err(AttnError::Dimension(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, AttnError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(AttnError::Dimension("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttnProblem {
    queries: Matrix,
    keys: Matrix,
    values: Matrix,
    scale: f64,
}

impl AttnProblem {
    /// Scale defaults to `1/sqrt(d)`.
    pub fn new(queries: Matrix, keys: Matrix, values: Matrix) -> Result<Self, AttnError> {
        let scale = 1.0 / (queries.cols() as f64).sqrt();
        Self::with_scale(queries, keys, values, scale)
    }

    pub fn with_scale(queries: Matrix, keys: Matrix, values: Matrix, scale: f64) -> Result<Self, AttnError> {
        if queries.rows() == 0 {
            return Err(AttnError::Dimension("need at least one query row".into()));
        }
        if keys.rows() == 0 {
            return Err(AttnError::Dimension("need at least one key".into()));
        }
        if queries.cols() == 0 || queries.cols() != keys.cols() {
            return Err(AttnError::Dimension(format!(
                "query width {} vs key width {}",
                queries.cols(),
                keys.cols()
            )));
        }
        if keys.rows() != values.rows() {
            return Err(AttnError::Dimension(format!(
                "{} keys vs {} values",
                keys.rows(),
                values.rows()
            )));
        }
        for (m, name) in [(&queries, "queries"), (&keys, "keys"), (&values, "values")] {
            if m.as_slice().iter().any(|v| !v.is_finite()) {
                return Err(AttnError::NonFinite(name));
            }
        }
        if !scale.is_finite() {
            return Err(AttnError::NonFinite("scale"));
        }
        Ok(Self {
            queries,
            keys,
            values,
            scale,
        })
    }

    pub fn queries(&self) -> &Matrix {
        &self.queries
    }

    pub fn keys(&self) -> &Matrix {
        &self.keys
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn num_tokens(&self) -> usize {
        self.keys.rows()
    }

    pub fn group_size(&self) -> usize {
        self.queries.rows()
    }

    fn score(&self, q: usize, key: &[f64]) -> f64 {
        dot(self.queries.row(q), key) * self.scale
    }

    /// Scores of key rows averaged over the query rows.
    fn pooled_scores(&self, keys: &Matrix) -> Vec<f64> {
        let g = self.group_size() as f64;
        (0..keys.rows())
            .map(|i| (0..self.group_size()).map(|q| self.score(q, keys.row(i))).sum::<f64>() / g)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparseSpec {
    TopK { k: usize },
    BlockTopK { k: usize, block_size: usize },
    Local { window: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttnOutput {
    /// `g x d_v`.
    pub output: Matrix,
    /// `g x n`; exactly zero outside `selected`.
    pub weights: Matrix,
    /// Attended token indices, ascending.
    pub selected: Vec<usize>,
    /// Selected block indices, ascending (block-top-k only).
    pub blocks: Option<Vec<usize>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Indices of the `k` largest scores, lowest index first among ties.
fn top_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| match scores[b].total_cmp(&scores[a]) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

fn attend(p: &AttnProblem, selected: Vec<usize>, blocks: Option<Vec<usize>>) -> AttnOutput {
    let (g, n, dv) = (p.group_size(), p.num_tokens(), p.values.cols());
    let mut output = Matrix::zeros(g, dv);
    let mut weights = Matrix::zeros(g, n);
    for q in 0..g {
        let scores: Vec<f64> = selected.iter().map(|&i| p.score(q, p.keys.row(i))).collect();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        for (&i, e) in selected.iter().zip(&exps) {
            let w = e / z;
            weights.row_mut(q)[i] = w;
            for (o, v) in output.row_mut(q).iter_mut().zip(p.values.row(i)) {
                *o += w * v;
            }
        }
    }
    AttnOutput {
        output,
        weights,
        selected,
        blocks,
    }
}

pub fn dense_attention(p: &AttnProblem) -> AttnOutput {
    attend(p, (0..p.num_tokens()).collect(), None)
}

pub fn topk_attention(p: &AttnProblem, k: usize) -> Result<AttnOutput, AttnError> {
    let n = p.num_tokens();
    if k == 0 || k > n {
        return Err(AttnError::InvalidSpec(format!("top-k needs 1 <= k <= {n}, got {k}")));
    }
    let selected = top_indices(&p.pooled_scores(&p.keys), k);
    Ok(attend(p, selected, None))
}

/// Mean key of each block; the last block may be partial.
pub fn block_means(keys: &Matrix, block_size: usize) -> Matrix {
    let n = keys.rows();
    let blocks = n.div_ceil(block_size);
    let mut out = Matrix::zeros(blocks, keys.cols());
    for b in 0..blocks {
        let members = b * block_size..((b + 1) * block_size).min(n);
        let count = members.len() as f64;
        for i in members {
            for (o, k) in out.row_mut(b).iter_mut().zip(keys.row(i)) {
                *o += k;
            }
        }
        out.row_mut(b).iter_mut().for_each(|o| *o /= count);
    }
    out
}

pub fn block_topk_attention(p: &AttnProblem, k: usize, block_size: usize) -> Result<AttnOutput, AttnError> {
    let n = p.num_tokens();
    if block_size == 0 {
        return Err(AttnError::InvalidSpec("block size must be >= 1".into()));
    }
    if k == 0 || !k.is_multiple_of(block_size) {
        return Err(AttnError::InvalidSpec(format!(
            "budget {k} must be a positive multiple of block size {block_size}"
        )));
    }
    let num_blocks = n.div_ceil(block_size);
    let pick = k / block_size;
    if pick > num_blocks {
        return Err(AttnError::InvalidSpec(format!(
            "budget {k} selects {pick} blocks but only {num_blocks} exist"
        )));
    }
    let blocks = top_indices(&p.pooled_scores(&block_means(&p.keys, block_size)), pick);
    let selected = blocks
        .iter()
        .flat_map(|&b| b * block_size..((b + 1) * block_size).min(n))
        .collect();
    Ok(attend(p, selected, Some(blocks)))
}

/// Attends to the trailing `window` tokens.
pub fn local_attention(p: &AttnProblem, window: usize) -> Result<AttnOutput, AttnError> {
    if window == 0 {
        return Err(AttnError::InvalidSpec("window must be >= 1".into()));
    }
    let n = p.num_tokens();
    Ok(attend(p, (n.saturating_sub(window)..n).collect(), None))
}

pub fn sparse_attention(p: &AttnProblem, spec: SparseSpec) -> Result<AttnOutput, AttnError> {
    match spec {
        SparseSpec::TopK { k } => topk_attention(p, k),
        SparseSpec::BlockTopK { k, block_size } => block_topk_attention(p, k, block_size),
        SparseSpec::Local { window } => local_attention(p, window),
    }
}
