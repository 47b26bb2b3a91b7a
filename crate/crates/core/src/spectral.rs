//! Spectra of the operator hierarchy and the Kozyrev wavelet eigenvectors.
//!
//! For a symmetric graph the non-zero spectrum of the continuum operator is
//! `{μ_I ≠ 0} ⊔ {-γ_I}`: the non-zero graph-Laplacian eigenvalues together
//! with the negated degrees, the latter carried by zero-mean wavelets
//! supported in a single vertex ball. On the level-`M` space the wavelets
//! with support at levels `N … M-1` contribute `p^{M-N} - 1` copies of each
//! `-γ_I`, which gives the predicted multiset
//! `σ(L_M) = σ(L_N) ⊎ {-γ_I × (p^{M-N} - 1)}`.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SymmetricEigen};
use crate::network::{LevelGrid, NetworkEmbedding};
use crate::operator::{build_full_level, build_graph_laplacian};
use crate::padic::{character_eval, fractional_part_scaled, PAdicCode};

/// Eigenvalues closer than this are grouped into one entry with multiplicity.
pub const GROUP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSource {
    Graph,
    LInfinityPredicted,
    LMPredicted,
    LMComputed,
    ReplicaComputed,
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub source: SpectrumSource,
    /// Ascending, repeated according to multiplicity.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, for computed spectra.
    pub eigenvectors: Option<Array2<f64>>,
    /// `max ‖A v - λ v‖_∞` over the computed pairs.
    pub residual_max: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueEntry {
    pub value: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumDocument {
    pub source: SpectrumSource,
    pub eigenvalues: Vec<EigenvalueEntry>,
    pub residual_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl SpectrumReport {
    fn predicted(source: SpectrumSource, mut eigenvalues: Vec<f64>, note: Option<String>) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        Self {
            source,
            eigenvalues,
            eigenvectors: None,
            residual_max: None,
            note,
        }
    }

    /// Distinct eigenvalues (within [`GROUP_TOL`]) with multiplicities.
    pub fn grouped(&self) -> Vec<EigenvalueEntry> {
        group_values(&self.eigenvalues)
    }

    /// Distinct non-zero eigenvalues.
    pub fn nonzero_distinct(&self) -> Vec<f64> {
        self.grouped()
            .into_iter()
            .map(|e| e.value)
            .filter(|v| v.abs() > GROUP_TOL)
            .collect()
    }

    pub fn to_document(&self) -> SpectrumDocument {
        SpectrumDocument {
            source: self.source,
            eigenvalues: self.grouped(),
            residual_max: self.residual_max,
            note: self.note.clone(),
        }
    }

    /// Largest per-entry difference between two sorted spectra of equal size.
    pub fn max_deviation(&self, other: &SpectrumReport) -> Option<f64> {
        (self.eigenvalues.len() == other.eigenvalues.len()).then(|| {
            self.eigenvalues
                .iter()
                .zip(&other.eigenvalues)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
    }
}

pub fn group_values(sorted: &[f64]) -> Vec<EigenvalueEntry> {
    let mut out: Vec<EigenvalueEntry> = Vec::new();
    let mut run: Vec<f64> = Vec::new();
    let flush = |run: &mut Vec<f64>, out: &mut Vec<EigenvalueEntry>| {
        if !run.is_empty() {
            let mean = run.iter().sum::<f64>() / run.len() as f64;
            // snap tiny values to zero so the kernel prints as 0
            let value = if mean.abs() <= GROUP_TOL { 0.0 } else { mean };
            out.push(EigenvalueEntry {
                value,
                multiplicity: run.len(),
            });
            run.clear();
        }
    };
    for &x in sorted {
        if let Some(&last) = run.last() {
            if (x - last).abs() > GROUP_TOL * (1.0 + x.abs()) {
                flush(&mut run, &mut out);
            }
        }
        run.push(x);
    }
    flush(&mut run, &mut out);
    out
}

/// Eigendecomposition of a symmetric matrix packaged as a report.
pub fn eig_report(matrix: &Array2<f64>, source: SpectrumSource) -> Result<SpectrumReport> {
    let SymmetricEigen { values, vectors } = linalg::eig_symmetric(matrix)?;
    let residual_max = (0..values.len())
        .map(|k| {
            let v = vectors.column(k);
            let r = matrix.dot(&v) - &v * values[k];
            r.iter().fold(0.0f64, |m, x| m.max(x.abs()))
        })
        .fold(0.0, f64::max);
    Ok(SpectrumReport {
        source,
        eigenvalues: values.to_vec(),
        eigenvectors: Some(vectors),
        residual_max: Some(residual_max),
        note: None,
    })
}

pub fn eig_symmetric(matrix: &Array2<f64>) -> Result<SpectrumReport> {
    eig_report(matrix, SpectrumSource::Graph)
}

/// Eigenpairs of the graph Laplacian `L_N`.
pub fn spectrum_graph(embedding: &NetworkEmbedding) -> Result<SpectrumReport> {
    embedding.graph().require_undirected()?;
    eig_report(&build_graph_laplacian(embedding).entries, SpectrumSource::Graph)
}

pub const WAVELET_MULTIPLICITY_NOTE: &str =
    "each -gamma_I has infinite multiplicity in L^2(K_N); in X_M it appears p^(M-N)-1 times per vertex ball";

/// Non-zero spectrum of the continuum operator: non-zero `μ_I` with their
/// multiplicities, then `-γ_I` once per vertex with `γ_I > 0`.
pub fn spectrum_l_infinity(embedding: &NetworkEmbedding) -> Result<SpectrumReport> {
    let graph = spectrum_graph(embedding)?;
    let mut values: Vec<f64> = graph
        .eigenvalues
        .iter()
        .copied()
        .filter(|v| v.abs() > GROUP_TOL)
        .collect();
    values.extend(
        embedding
            .degrees()
            .iter()
            .filter(|&&g| g > 0)
            .map(|&g| -(g as f64)),
    );
    Ok(SpectrumReport::predicted(
        SpectrumSource::LInfinityPredicted,
        values,
        Some(WAVELET_MULTIPLICITY_NOTE.into()),
    ))
}

/// `σ(L_N) ⊎ {-γ_I × (p^{M-N} - 1)}`.
pub fn spectrum_level_predicted(embedding: &NetworkEmbedding, m: usize) -> Result<SpectrumReport> {
    if m < embedding.level() {
        return Err(Error::Argument(format!(
            "level M = {m} is below N = {}",
            embedding.level()
        )));
    }
    let graph = spectrum_graph(embedding)?;
    let copies = (embedding.p() as usize).pow((m - embedding.level()) as u32) - 1;
    let mut values = graph.eigenvalues;
    for &g in embedding.degrees() {
        values.extend(std::iter::repeat(-(g as f64)).take(copies));
    }
    Ok(SpectrumReport::predicted(SpectrumSource::LMPredicted, values, None))
}

/// Eigensolve of the level-`M` matrix.
pub fn spectrum_level_computed(grid: &LevelGrid) -> Result<SpectrumReport> {
    grid.embedding().graph().require_undirected()?;
    eig_report(&build_full_level(grid).entries, SpectrumSource::LMComputed)
}

/// A Kozyrev wavelet restricted to a level grid: `p^{s/2} χ_p(p^{-s-1} j x)`
/// on the level-`s` ball `center + p^s Z_p`, zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletVector {
    pub vertex: usize,
    pub j: u32,
    /// Support ball level `s ≥ N` (Kozyrev scale `r = -s`).
    pub support_level: usize,
    pub center: PAdicCode,
    pub re: Array1<f64>,
    pub im: Array1<f64>,
    /// `-γ_I` of the vertex ball containing the support.
    pub eigenvalue: f64,
}

impl WaveletVector {
    /// Site indices of the support.
    pub fn support(&self) -> Vec<usize> {
        self.re
            .iter()
            .zip(self.im.iter())
            .enumerate()
            .filter(|(_, (r, i))| **r != 0.0 || **i != 0.0)
            .map(|(k, _)| k)
            .collect()
    }
}

/// Wavelet supported on the whole ball of `vertex` (scale `-N`).
pub fn kozyrev_wavelet(grid: &LevelGrid, vertex: usize, j: u32) -> Result<WaveletVector> {
    let e = grid.embedding();
    if vertex >= e.n() {
        return Err(Error::Argument(format!("vertex {vertex} out of range")));
    }
    let center = e.codes()[vertex].clone();
    kozyrev_wavelet_at(grid, &center, j)
}

/// Wavelet supported on the ball addressed by `center`, whose precision `s`
/// must satisfy `N ≤ s < M`.
pub fn kozyrev_wavelet_at(grid: &LevelGrid, center: &PAdicCode, j: u32) -> Result<WaveletVector> {
    let e = grid.embedding();
    let s = center.precision();
    if s < e.level() {
        return Err(Error::Argument(format!(
            "support level {s} is coarser than the vertex balls (N = {})",
            e.level()
        )));
    }
    if grid.level() <= s {
        return Err(Error::Argument(format!(
            "a wavelet on a level-{s} ball needs grid level M > {s}, got {}",
            grid.level()
        )));
    }
    if j == 0 || j >= e.p() {
        return Err(Error::Argument(format!("j = {j} must lie in 1..{}", e.p())));
    }
    let vertex = e
        .vertex_of(center)
        .ok_or_else(|| Error::Argument(format!("ball {center} lies outside K_N")))?;
    let amplitude = (e.p() as f64).powf(s as f64 / 2.0);
    let mut re = Array1::zeros(grid.len());
    let mut im = Array1::zeros(grid.len());
    for k in grid.ball(vertex) {
        let x = &grid.codes()[k];
        if x.digits()[..s] != center.digits()[..] {
            continue;
        }
        let (c, sn) = character_eval(&fractional_part_scaled(x, j, s)?);
        re[k] = amplitude * c;
        im[k] = amplitude * sn;
    }
    Ok(WaveletVector {
        vertex,
        j,
        support_level: s,
        center: center.clone(),
        re,
        im,
        eigenvalue: -(e.degrees()[vertex] as f64),
    })
}

/// All wavelets representable on the grid: support levels `N … M-1`, every
/// sub-ball of every vertex ball, `j = 1 … p-1`. Spans the complement of
/// `X_N` in `X_M`.
pub fn wavelet_basis(grid: &LevelGrid) -> Result<Vec<WaveletVector>> {
    let e = grid.embedding();
    let mut out = Vec::new();
    for s in e.level()..grid.level() {
        for center in e.codes() {
            for sub in crate::padic::refine_ball(center, s)? {
                for j in 1..e.p() {
                    out.push(kozyrev_wavelet_at(grid, &sub, j)?);
                }
            }
        }
    }
    Ok(out)
}

/// `Σ_x a(x) conj(b(x)) p^{-M}`, the `L²(K_N)` product of two grid functions.
pub fn hermitian_product(grid: &LevelGrid, a: &WaveletVector, b: &WaveletVector) -> (f64, f64) {
    let vol = (grid.embedding().p() as f64).powi(-(grid.level() as i32));
    let re = a.re.dot(&b.re) + a.im.dot(&b.im);
    let im = a.im.dot(&b.re) - a.re.dot(&b.im);
    (re * vol, im * vol)
}

/// `max(‖L Re Ψ - λ Re Ψ‖_∞, ‖L Im Ψ - λ Im Ψ‖_∞)` with `λ = -γ_I`.
pub fn wavelet_residual(op: &Array2<f64>, w: &WaveletVector) -> f64 {
    [&w.re, &w.im]
        .iter()
        .map(|part| {
            let r = op.dot(*part) - *part * w.eigenvalue;
            r.iter().fold(0.0f64, |m, x| m.max(x.abs()))
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{embed, refine, Graph};

    fn k4() -> NetworkEmbedding {
        embed(&Graph::complete(4), None, None).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn graph_spectra() {
        let k = spectrum_graph(&k4()).unwrap();
        assert!(close(&k.eigenvalues, &[-4.0, -4.0, -4.0, 0.0], 1e-12));
        assert!(k.residual_max.unwrap() <= 1e-9);
        let p3 = spectrum_graph(&embed(&Graph::path(3), None, None).unwrap()).unwrap();
        assert!(close(&p3.eigenvalues, &[-3.0, -1.0, 0.0], 1e-12));
    }

    #[test]
    fn asymmetric_graphs_are_rejected() {
        let g = Graph::from_edges(3, &[[0, 1]], true, true).unwrap();
        let e = embed(&g, None, None).unwrap();
        assert!(matches!(spectrum_graph(&e), Err(Error::Asymmetric)));
        assert!(spectrum_l_infinity(&e).is_err());
        assert!(spectrum_level_predicted(&e, 3).is_err());
    }

    #[test]
    fn l_infinity_examples() {
        for n in 3..7 {
            let e = embed(&Graph::complete(n), None, None).unwrap();
            let s = spectrum_l_infinity(&e).unwrap();
            let nn = n as f64;
            assert!(close(&s.nonzero_distinct(), &[-nn, -(nn - 1.0)], 1e-9));
        }
        let p3 = spectrum_l_infinity(&embed(&Graph::path(3), None, None).unwrap()).unwrap();
        assert!(close(&p3.eigenvalues, &[-3.0, -2.0, -1.0, -1.0, -1.0], 1e-12));
        let empty = embed(&Graph::from_edges(3, &[], false, true).unwrap(), None, None).unwrap();
        assert!(spectrum_l_infinity(&empty).unwrap().eigenvalues.is_empty());
    }

    #[test]
    fn predicted_matches_computed() {
        let e = k4();
        let want = [
            (2, vec![-4.0, -4.0, -4.0, 0.0]),
            (3, vec![-4.0, -4.0, -4.0, -3.0, -3.0, -3.0, -3.0, 0.0]),
        ];
        for (m, values) in want {
            let pred = spectrum_level_predicted(&e, m).unwrap();
            assert!(close(&pred.eigenvalues, &values, 1e-12));
            let comp = spectrum_level_computed(&refine(&e, m).unwrap()).unwrap();
            assert!(pred.max_deviation(&comp).unwrap() <= 1e-9);
        }
        let pred = spectrum_level_predicted(&e, 4).unwrap();
        let grouped = pred.grouped();
        let summary: Vec<(f64, usize)> = grouped
            .iter()
            .map(|g| ((g.value * 1e9).round() / 1e9, g.multiplicity))
            .collect();
        assert_eq!(summary, vec![(-4.0, 3), (-3.0, 12), (0.0, 1)]);
    }

    #[test]
    fn kernel_multiplicity_counts_components() {
        let g = Graph::from_edges(5, &[[0, 1], [2, 3]], false, true).unwrap();
        let s = spectrum_graph(&embed(&g, None, None).unwrap()).unwrap();
        let zero = s.grouped().into_iter().find(|e| e.value == 0.0).unwrap();
        assert_eq!(zero.multiplicity, g.components());
        // connected: kernel vector is constant
        let s = spectrum_graph(&embed(&Graph::cycle(5), None, None).unwrap()).unwrap();
        let v = s.eigenvectors.unwrap();
        let col = v.column(4);
        assert!(col.iter().all(|x| (x - col[0]).abs() < 1e-12));
    }

    #[test]
    fn wavelet_examples() {
        let e = k4();
        let grid = refine(&e, 3).unwrap();
        let op = build_full_level(&grid).entries;
        let w = kozyrev_wavelet(&grid, 0, 1).unwrap();
        assert_eq!(w.support(), vec![0, 1]);
        // sites 000 and 001: {0/8} = 0 and {4/8} = 1/2, times p^{N/2} = 2
        assert_eq!(w.re.to_vec()[..2], [2.0, -2.0]);
        assert_eq!(w.im.to_vec()[..2], [0.0, 0.0]);
        assert!(wavelet_residual(&op, &w) <= 1e-10);
        assert_eq!(w.eigenvalue, -3.0);
        for k in w.support() {
            assert_eq!(w.re[k].hypot(w.im[k]), 2.0);
        }
        let mean_re: f64 = w.re.sum();
        let mean_im: f64 = w.im.sum();
        assert!(mean_re.abs() <= 1e-12 && mean_im.abs() <= 1e-12);
        assert!(kozyrev_wavelet(&refine(&e, 2).unwrap(), 0, 1).is_err());
        assert!(kozyrev_wavelet(&grid, 0, 2).is_err());
    }

    #[test]
    fn wavelets_are_eigenvectors_and_orthonormal() {
        for (graph, p) in [(Graph::complete(4), 2), (Graph::path(3), 3), (Graph::cycle(5), 2)] {
            let e = embed(&graph, Some(p), None).unwrap();
            let grid = refine(&e, e.level() + 2).unwrap();
            let op = build_full_level(&grid).entries;
            let basis = wavelet_basis(&grid).unwrap();
            let block = grid.block();
            assert_eq!(basis.len(), e.n() * (block - 1));
            for (a, wa) in basis.iter().enumerate() {
                assert!(wavelet_residual(&op, wa) <= 1e-10);
                for (b, wb) in basis.iter().enumerate() {
                    let (re, im) = hermitian_product(&grid, wa, wb);
                    let target = if a == b { 1.0 } else { 0.0 };
                    assert!((re - target).abs() <= 1e-10 && im.abs() <= 1e-10);
                }
                for vertex in 0..e.n() {
                    let r: f64 = grid.ball(vertex).map(|k| wa.re[k]).sum();
                    let i: f64 = grid.ball(vertex).map(|k| wa.im[k]).sum();
                    assert!(r.abs() <= 1e-10 && i.abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn document_groups_multiplicities() {
        let s = spectrum_level_predicted(&k4(), 3).unwrap();
        let doc = s.to_document();
        assert_eq!(doc.eigenvalues.len(), 3);
        assert_eq!(doc.eigenvalues[1].multiplicity, 4);
        assert!((doc.eigenvalues[1].value + 3.0).abs() < 1e-12);
    }
}
