use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{diffusion_pair, integrate, Datum, IntegrateOptions, Integrator, RunStatus, SimState};
use crate::error::{Error, Result};
use crate::kinetics::KineticsModel;
use crate::network::{refine, LevelGrid, NetworkEmbedding};
use crate::operator::{
    build_full_level, build_graph_laplacian, build_replica_full, digit_weight, lift, matrix_exp, project,
};
use crate::spectral::{eig_report, EigenvalueEntry, SpectrumSource};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub level: usize,
    /// `sup_t ‖u^{(M)} - u^{(finest)}‖_∞` over both species, on the finest grid.
    pub gap: f64,
    /// The same distance at `t = 0`.
    pub projection_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub finest: usize,
    pub t_end: f64,
    pub rows: Vec<GapRow>,
    /// Gaps never grow by more than 5 % from one level to the next.
    pub non_increasing: bool,
}

/// Runs the system from `P_M(datum)` at every level of `levels` and measures
/// each run against the finest one, after lifting both to the finest grid.
#[allow(clippy::too_many_arguments)]
pub fn convergence_study(
    model: &KineticsModel,
    steady: (f64, f64),
    embedding: &NetworkEmbedding,
    datum: Datum,
    levels: &[usize],
    epsilon: f64,
    d: f64,
    dt: f64,
    t_end: f64,
    samples: usize,
) -> Result<ConvergenceTable> {
    if levels.is_empty() || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument("level list must be non-empty and strictly ascending".into()));
    }
    if samples == 0 {
        return Err(Error::Argument("at least one sample time is required".into()));
    }
    let finest_level = *levels.last().expect("non-empty");
    let finest = refine(embedding, finest_level)?;
    let steps = if t_end > 0.0 { (t_end / dt).round().max(1.0) as usize } else { 0 };
    let stride = (steps / samples).max(1);
    let validity = model.validity_box(steady);
    let mut runs = Vec::with_capacity(levels.len());
    for &m in levels {
        let grid = refine(embedding, m)?;
        let eta = datum.sample(&grid);
        let init = SimState {
            t: 0.0,
            u: eta.mapv(|x| x + steady.0),
            v: eta.mapv(|x| x + steady.1),
        };
        let (lu, lv) = diffusion_pair(&grid, epsilon, d);
        let traj = integrate(
            model,
            &lu,
            &lv,
            &init,
            &IntegrateOptions {
                integrator: Integrator::Rk4,
                dt,
                t_end,
                stride,
                validity: Some(validity),
            },
        )?;
        if let RunStatus::Halted { t_max, reason } = &traj.status {
            return Err(Error::Integration {
                t: *t_max,
                reason: format!("level {m}: {reason}"),
            });
        }
        let lifted: Vec<(Array1<f64>, Array1<f64>)> = traj
            .states
            .iter()
            .map(|s| Ok((lift(&grid, &s.u, &finest)?, lift(&grid, &s.v, &finest)?)))
            .collect::<Result<_>>()?;
        runs.push((m, lifted));
    }
    let reference = &runs.last().expect("non-empty").1;
    let rows: Vec<GapRow> = runs
        .iter()
        .map(|(m, lifted)| {
            let dist = |i: usize| {
                let (u, v) = &lifted[i];
                let (ru, rv) = &reference[i];
                (u - ru)
                    .iter()
                    .chain((v - rv).iter())
                    .fold(0.0f64, |acc, x| acc.max(x.abs()))
            };
            GapRow {
                level: *m,
                gap: (0..lifted.len()).map(dist).fold(0.0, f64::max),
                projection_error: dist(0),
            }
        })
        .collect();
    let non_increasing = rows
        .windows(2)
        .all(|w| w[1].gap <= 1.05 * w[0].gap + 1e-12);
    Ok(ConvergenceTable {
        finest: finest_level,
        t_end,
        rows,
        non_increasing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaReport {
    pub level: usize,
    pub epsilon: f64,
    pub full_spectrum: Vec<EigenvalueEntry>,
    pub replica_spectrum: Vec<EigenvalueEntry>,
    pub spectra_match: bool,
    /// Sampled times of the pure-diffusion comparison.
    pub times: Vec<f64>,
    /// `‖e^{tεL_M} x - e^{tεR} x‖_∞` at each sampled time.
    pub trajectory_distance: Vec<f64>,
    /// Full-level evolution of a ball-constant vector against the level-`N`
    /// evolution of its ball values.
    pub nesting_error: f64,
    /// `max |ε'·L_{N,λ} - ε·L_N|` over the off-diagonal entries.
    pub scaled_offdiag_mismatch: f64,
    /// The same over the diagonal entries.
    pub scaled_diag_mismatch: f64,
    pub identification_holds: bool,
    pub statement: String,
}

/// Compares the level-`M` operator with the block-diagonal "replica" of
/// `p^{N-M}A - Γ` under pure diffusion.
pub fn replica_compare(
    embedding: &NetworkEmbedding,
    m: usize,
    epsilon: f64,
    times: &[f64],
) -> Result<ReplicaReport> {
    if m <= embedding.level() {
        return Err(Error::Argument(format!(
            "the replica comparison needs M > N = {}",
            embedding.level()
        )));
    }
    embedding.graph().require_undirected()?;
    let grid = refine(embedding, m)?;
    let full = build_full_level(&grid).entries;
    let replica = build_replica_full(embedding, m)?.entries;
    let full_spec = eig_report(&full, SpectrumSource::LMComputed)?;
    let replica_spec = eig_report(&replica, SpectrumSource::ReplicaComputed)?;
    let spectra_match = full_spec
        .max_deviation(&replica_spec)
        .is_some_and(|dev| dev <= 1e-9);

    let x = project(&grid, digit_weight);
    let mut trajectory_distance = Vec::with_capacity(times.len());
    for &t in times {
        let a = matrix_exp(&full, epsilon * t)?.dot(&x);
        let b = matrix_exp(&replica, epsilon * t)?.dot(&x);
        trajectory_distance.push((&a - &b).iter().fold(0.0f64, |acc, z| acc.max(z.abs())));
    }

    let nesting_error = nesting_error(embedding, &grid, &full, epsilon, times)?;

    // ε' L_{N,λ} with ε' = p^{N-M} ε and λ = p^{M-N}, against ε L_N
    let ln = build_graph_laplacian(embedding).entries;
    let scale = (embedding.p() as f64).powi(embedding.level() as i32 - m as i32);
    let adj = embedding.graph().adjacency().mapv(f64::from);
    let gamma = Array2::from_diag(&Array1::from_iter(embedding.degrees().iter().map(|&g| g as f64)));
    let scaled = &adj * (scale * epsilon) - &gamma * epsilon;
    let diff = &scaled - &(&ln * epsilon);
    let n = ln.nrows();
    let mut offdiag = 0.0f64;
    let mut diag = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                diag = diag.max(diff[(i, j)].abs());
            } else {
                offdiag = offdiag.max(diff[(i, j)].abs());
            }
        }
    }
    let max_distance = trajectory_distance.iter().copied().fold(0.0, f64::max);
    let identification_holds = spectra_match && max_distance <= 1e-9;
    let statement = if identification_holds {
        "the level-M system coincides with the block replica of the scaled level-N system".to_string()
    } else {
        format!(
            "identification unsupported: spectra {} and pure-diffusion trajectories differ by up to {:.6e}",
            if spectra_match { "agree" } else { "differ" },
            max_distance
        )
    };
    Ok(ReplicaReport {
        level: m,
        epsilon,
        full_spectrum: full_spec.grouped(),
        replica_spectrum: replica_spec.grouped(),
        spectra_match,
        times: times.to_vec(),
        trajectory_distance,
        nesting_error,
        scaled_offdiag_mismatch: offdiag,
        scaled_diag_mismatch: diag,
        identification_holds,
        statement,
    })
}

fn nesting_error(
    embedding: &NetworkEmbedding,
    grid: &LevelGrid,
    full: &Array2<f64>,
    epsilon: f64,
    times: &[f64],
) -> Result<f64> {
    let base = refine(embedding, embedding.level())?;
    let ln = build_graph_laplacian(embedding).entries;
    let ball_values = project(&base, digit_weight);
    let lifted = lift(&base, &ball_values, grid)?;
    let mut worst = 0.0f64;
    for &t in times {
        let a = matrix_exp(full, epsilon * t)?.dot(&lifted);
        let b = lift(&base, &matrix_exp(&ln, epsilon * t)?.dot(&ball_values), grid)?;
        worst = worst.max((&a - &b).iter().fold(0.0f64, |acc, z| acc.max(z.abs())));
    }
    Ok(worst)
}
