//! Matrices of the diffusion operators on the spaces of locally constant
//! functions.
//!
//! Every matrix is indexed by the canonical site order of a [`LevelGrid`] and
//! acts on coefficient vectors: `(Lφ)_J = Σ_I L[J, I] φ_I`. With `γ_I` the
//! row sums of the adjacency matrix:
//!
//! * graph Laplacian: `A_{JI} - γ_I δ_{JI}`
//! * level-`M` operator: `p^{N-M} A_{JI} - γ_I δ_{J_j I_j}`
//! * scaled family: as above with diagonal weight `λ γ_I`
//! * replica block: `p^{N-M} A_{JI} - γ_I δ_{JI}` on `n` sites, repeated
//!   `p^{M-N}` times down the diagonal for the full replica matrix.

use std::collections::HashMap;
use std::fmt;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::network::{LevelGrid, NetworkEmbedding};
use crate::padic::PAdicCode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "lambda", rename_all = "snake_case")]
pub enum OperatorKind {
    GraphLaplacian,
    FullLevelM,
    ReplicaBlock,
    ScaledLambda(f64),
    ReplicaFull,
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorKind::GraphLaplacian => write!(f, "graph_laplacian"),
            OperatorKind::FullLevelM => write!(f, "full_level_M"),
            OperatorKind::ReplicaBlock => write!(f, "replica_block"),
            OperatorKind::ScaledLambda(l) => write!(f, "scaled_lambda({l})"),
            OperatorKind::ReplicaFull => write!(f, "replica_full"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub kind: OperatorKind,
    /// Level `M` of the space the matrix acts on.
    pub level: usize,
    pub p: u32,
    /// Embedding level `N`.
    pub base_level: usize,
    pub entries: Array2<f64>,
    /// Set when the matrix already carries the diffusivity factor `ε`.
    pub epsilon_applied: bool,
    pub warnings: Vec<String>,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn apply(&self, v: &Array1<f64>) -> Array1<f64> {
        self.entries.dot(v)
    }

    pub fn is_symmetric(&self) -> bool {
        linalg::is_symmetric(&self.entries, 1e-12)
    }

    /// Off-diagonal part, diagonal zeroed.
    pub fn off_diagonal(&self) -> Array2<f64> {
        let mut m = self.entries.clone();
        m.diag_mut().fill(0.0);
        m
    }

    pub fn diagonal(&self) -> Array2<f64> {
        Array2::from_diag(&self.entries.diag())
    }

    /// Row-major CSV, 17 significant digits, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.entries.rows() {
            let cells: Vec<String> = row.iter().map(|&x| fmt_full(x)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_document(&self) -> OperatorDocument {
        OperatorDocument {
            kind: self.kind.to_string(),
            level: self.level,
            p: self.p,
            base_level: self.base_level,
            epsilon_applied: self.epsilon_applied,
            entries: self.entries.rows().into_iter().map(|r| r.to_vec()).collect(),
        }
    }
}

/// Serialized form of an [`OperatorMatrix`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorDocument {
    pub kind: String,
    pub level: usize,
    pub p: u32,
    #[serde(rename = "N")]
    pub base_level: usize,
    pub epsilon_applied: bool,
    pub entries: Vec<Vec<f64>>,
}

/// 17 significant digits.
pub fn fmt_full(x: f64) -> String {
    format!("{x:.16e}")
}

/// A point `(ε, λ)` of the scaled diffusion family, `ε > 0`, `λ ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledParams {
    pub epsilon: f64,
    pub lambda: f64,
}

impl ScaledParams {
    pub fn new(epsilon: f64, lambda: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Argument(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(lambda >= 1.0) || !lambda.is_finite() {
            return Err(Error::Argument(format!("lambda must be at least 1, got {lambda}")));
        }
        Ok(Self { epsilon, lambda })
    }

    /// The monoid action `S_σ(ε, λ) = (σε, λ/σ)`, `σ ∈ (0, 1]`.
    pub fn act(&self, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma <= 1.0) {
            return Err(Error::Argument(format!("sigma must lie in (0, 1], got {sigma}")));
        }
        Self::new(sigma * self.epsilon, self.lambda / sigma)
    }
}

/// `J_N(x, y) = p^N A_{JK}` for sites `x` in ball `J` and `y` in ball `K`.
pub fn kernel_eval(grid: &LevelGrid, x_site: usize, y_site: usize) -> f64 {
    let e = grid.embedding();
    let j = grid.vertex_of(x_site);
    let k = grid.vertex_of(y_site);
    (e.p() as f64).powi(e.level() as i32) * e.graph().adjacency()[(j, k)] as f64
}

fn degrees_f64(e: &NetworkEmbedding) -> Vec<f64> {
    e.degrees().iter().map(|&g| g as f64).collect()
}

pub fn build_graph_laplacian(embedding: &NetworkEmbedding) -> OperatorMatrix {
    let n = embedding.n();
    let adj = embedding.graph().adjacency();
    let gamma = degrees_f64(embedding);
    let entries = Array2::from_shape_fn((n, n), |(j, i)| {
        adj[(j, i)] as f64 - if i == j { gamma[i] } else { 0.0 }
    });
    OperatorMatrix {
        kind: OperatorKind::GraphLaplacian,
        level: embedding.level(),
        p: embedding.p(),
        base_level: embedding.level(),
        entries,
        epsilon_applied: false,
        warnings: Vec::new(),
    }
}

fn level_matrix(grid: &LevelGrid, lambda: f64) -> Array2<f64> {
    let e = grid.embedding();
    let adj = e.graph().adjacency();
    let gamma = degrees_f64(e);
    let weight = 1.0 / grid.block() as f64;
    let size = grid.len();
    Array2::from_shape_fn((size, size), |(row, col)| {
        let (j, i) = (grid.vertex_of(row), grid.vertex_of(col));
        let coupling = weight * adj[(j, i)] as f64;
        if row == col {
            coupling - lambda * gamma[i]
        } else {
            coupling
        }
    })
}

/// Matrix of the level-`M` operator on the grid's sites.
pub fn build_full_level(grid: &LevelGrid) -> OperatorMatrix {
    let e = grid.embedding();
    OperatorMatrix {
        kind: OperatorKind::FullLevelM,
        level: grid.level(),
        p: e.p(),
        base_level: e.level(),
        entries: level_matrix(grid, 1.0),
        epsilon_applied: false,
        warnings: Vec::new(),
    }
}

/// The scaled operator `L_{M,λ}`: off-diagonal as [`build_full_level`],
/// diagonal weight `λ γ_I`. `λ < 1` is accepted with a warning.
pub fn build_scaled_lambda(grid: &LevelGrid, lambda: f64) -> OperatorMatrix {
    let e = grid.embedding();
    let mut warnings = Vec::new();
    if lambda < 1.0 {
        let msg = format!(
            "lambda = {lambda} < 1: positive maximum principle not guaranteed, positivity checks skipped"
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    OperatorMatrix {
        kind: OperatorKind::ScaledLambda(lambda),
        level: grid.level(),
        p: e.p(),
        base_level: e.level(),
        entries: level_matrix(grid, lambda),
        epsilon_applied: false,
        warnings,
    }
}

/// `ε L_{M,λ}`, the generator of the scaled family at `params`.
pub fn scaled_generator(grid: &LevelGrid, params: ScaledParams) -> OperatorMatrix {
    let mut op = build_scaled_lambda(grid, params.lambda);
    op.entries.mapv_inplace(|x| params.epsilon * x);
    op.epsilon_applied = true;
    op
}

/// The `n × n` replica block `p^{N-M}[A_{JI} - p^{M-N} γ_I δ_{JI}]`.
pub fn build_replica_block(embedding: &NetworkEmbedding, m: usize) -> Result<OperatorMatrix> {
    if m < embedding.level() {
        return Err(Error::Argument(format!(
            "replica level M = {m} is below N = {}",
            embedding.level()
        )));
    }
    let copies = (embedding.p() as f64).powi((m - embedding.level()) as i32);
    let n = embedding.n();
    let adj = embedding.graph().adjacency();
    let gamma = degrees_f64(embedding);
    let entries = Array2::from_shape_fn((n, n), |(j, i)| {
        adj[(j, i)] as f64 / copies - if i == j { gamma[i] } else { 0.0 }
    });
    Ok(OperatorMatrix {
        kind: OperatorKind::ReplicaBlock,
        level: m,
        p: embedding.p(),
        base_level: embedding.level(),
        entries,
        epsilon_applied: false,
        warnings: Vec::new(),
    })
}

/// Block-diagonal matrix with `p^{M-N}` copies of the replica block.
pub fn build_replica_full(embedding: &NetworkEmbedding, m: usize) -> Result<OperatorMatrix> {
    let block = build_replica_block(embedding, m)?;
    let n = embedding.n();
    let copies = (embedding.p() as usize).pow((m - embedding.level()) as u32);
    let mut entries = Array2::zeros((n * copies, n * copies));
    for c in 0..copies {
        entries
            .slice_mut(ndarray::s![c * n..(c + 1) * n, c * n..(c + 1) * n])
            .assign(&block.entries);
    }
    Ok(OperatorMatrix {
        kind: OperatorKind::ReplicaFull,
        entries,
        ..block
    })
}

/// `e^{t ε op}`. Symmetric matrices go through the eigendecomposition,
/// everything else through Padé scaling and squaring.
pub fn semigroup_exp(op: &OperatorMatrix, epsilon: f64, t: f64) -> Result<Array2<f64>> {
    matrix_exp(&op.entries, epsilon * t)
}

/// `e^{s·a}` with the same symmetric/general dispatch as [`semigroup_exp`].
pub fn matrix_exp(a: &Array2<f64>, s: f64) -> Result<Array2<f64>> {
    if !s.is_finite() {
        return Err(Error::NonFinite("semigroup time"));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("generator"));
    }
    if s == 0.0 {
        return Ok(Array2::eye(a.nrows()));
    }
    let out = if linalg::is_symmetric(a, 1e-12) {
        let eig = linalg::eig_symmetric(a)?;
        linalg::spectral_function(&eig, |x| (s * x).exp())
    } else {
        linalg::expm_pade(&(a * s))?
    };
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("semigroup"));
    }
    Ok(out)
}

/// Numerical Feller checks on a semigroup matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemigroupCheck {
    pub max_row_sum_deviation: f64,
    pub min_entry: f64,
    /// `false` when positivity is not claimed (`λ < 1`).
    pub positivity_checked: bool,
}

pub fn check_semigroup(op: &OperatorMatrix, epsilon: f64, t: f64) -> Result<SemigroupCheck> {
    let m = semigroup_exp(op, epsilon, t)?;
    let max_row_sum_deviation = m
        .rows()
        .into_iter()
        .map(|r| (r.sum() - 1.0).abs())
        .fold(0.0, f64::max);
    let min_entry = m.iter().copied().fold(f64::INFINITY, f64::min);
    let positivity_checked = !matches!(op.kind, OperatorKind::ScaledLambda(l) if l < 1.0);
    Ok(SemigroupCheck {
        max_row_sum_deviation,
        min_entry,
        positivity_checked,
    })
}

/// `P_M φ`: samples `φ` at the grid's ball-center codes.
pub fn project(grid: &LevelGrid, f: impl Fn(&PAdicCode) -> f64) -> Array1<f64> {
    grid.codes().iter().map(f).collect()
}

/// `P_M` from an explicit table of samples keyed by site code.
pub fn project_samples(grid: &LevelGrid, samples: &HashMap<PAdicCode, f64>) -> Result<Array1<f64>> {
    grid.codes()
        .iter()
        .enumerate()
        .map(|(i, c)| samples.get(c).copied().ok_or(Error::MissingSite(i)))
        .collect()
}

/// Re-expresses a level-`coarse.level()` vector on the finer grid `fine`
/// (the inclusion `X_{M} ⊂ X_{M'}`).
pub fn lift(coarse: &LevelGrid, values: &Array1<f64>, fine: &LevelGrid) -> Result<Array1<f64>> {
    if values.len() != coarse.len() {
        return Err(Error::Dimension {
            expected: coarse.len(),
            got: values.len(),
        });
    }
    if fine.level() < coarse.level() || fine.embedding() != coarse.embedding() {
        return Err(Error::Argument("target grid is not a refinement of the source grid".into()));
    }
    fine.codes()
        .iter()
        .map(|c| {
            let idx = coarse
                .index_of(c)
                .ok_or_else(|| Error::Argument(format!("site {c} outside the coarse grid")))?;
            Ok(values[idx])
        })
        .collect()
}

/// `w(x) = Σ_i d_i(x) p^{-i-1}`, a continuous, nowhere locally constant
/// function on `Z_p` (evaluated on the available digits).
pub fn digit_weight(x: &PAdicCode) -> f64 {
    let p = x.p() as f64;
    x.digits()
        .iter()
        .enumerate()
        .map(|(i, &d)| d as f64 * p.powi(-(i as i32) - 1))
        .sum()
}
