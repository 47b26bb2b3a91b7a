use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::{Error, Result};
use crate::network::LevelGrid;
use crate::spectral::{self, GROUP_TOL};

/// Inter-ball differences below this count as homogeneous.
const HOMOGENEOUS_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    /// Eigenvectors of `L_N`, constant on each vertex ball.
    Graph,
    /// Zero-mean wavelet directions inside the balls of degree `γ = -κ`.
    Wavelet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub t_start: f64,
    pub t_stop: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeGroup {
    pub kind: ModeKind,
    pub kappa: f64,
    pub dimension: usize,
    /// Norm of the projection of `w = (u - u0, v - v0)` onto the group, per recorded time.
    pub amplitudes: Vec<f64>,
    pub fit: Option<GrowthFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternVerdict {
    Homogeneous,
    Clustered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternReport {
    pub times: Vec<f64>,
    /// Final per-ball means of `u` and `v`, one entry per vertex.
    pub cluster_means: Vec<(f64, f64)>,
    pub clusters: usize,
    pub inter_ball_difference: f64,
    pub intra_ball_spread: f64,
    pub modes: Vec<ModeGroup>,
    /// Non-homogeneous group with the largest final amplitude.
    pub dominant: Option<(ModeKind, f64)>,
    pub verdict: PatternVerdict,
    pub fit_window: (f64, f64),
    pub note: String,
}

/// Least-squares fit of `log a(t)` on the first contiguous run of samples
/// with `lo ≤ a ≤ hi`.
pub fn fit_growth(times: &[f64], amplitudes: &[f64], lo: f64, hi: f64) -> Result<GrowthFit> {
    let start = amplitudes
        .iter()
        .position(|&a| a >= lo && a <= hi)
        .ok_or_else(|| Error::DegenerateFit(format!("no sample inside [{lo:e}, {hi:e}]")))?;
    let len = amplitudes[start..]
        .iter()
        .take_while(|&&a| a >= lo && a <= hi)
        .count();
    if len < 3 {
        return Err(Error::DegenerateFit(format!("only {len} samples inside [{lo:e}, {hi:e}]")));
    }
    let ts = &times[start..start + len];
    let ys: Vec<f64> = amplitudes[start..start + len].iter().map(|a| a.ln()).collect();
    let n = len as f64;
    let tm = ts.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let stt: f64 = ts.iter().map(|t| (t - tm).powi(2)).sum();
    let sty: f64 = ts.iter().zip(&ys).map(|(t, y)| (t - tm) * (y - ym)).sum();
    let syy: f64 = ys.iter().map(|y| (y - ym).powi(2)).sum();
    if stt == 0.0 {
        return Err(Error::DegenerateFit("all samples at one time".into()));
    }
    let rate = sty / stt;
    let r_squared = if syy == 0.0 { 1.0 } else { sty * sty / (stt * syy) };
    Ok(GrowthFit {
        rate,
        intercept: ym - rate * tm,
        r_squared,
        t_start: ts[0],
        t_stop: ts[len - 1],
        points: len,
    })
}

/// Clusters, mode amplitudes and growth fits of a trajectory. The growth
/// window is `[10 δ, 0.1 · box_width]`.
pub fn pattern_report(
    grid: &LevelGrid,
    trajectory: &Trajectory,
    steady: (f64, f64),
    delta: f64,
    box_width: f64,
) -> Result<PatternReport> {
    let emb = grid.embedding();
    let n = emb.n();
    let times = trajectory.times();
    let graph = spectral::spectrum_graph(emb)?;
    let vectors = graph.eigenvectors.clone().expect("computed spectra carry eigenvectors");
    let norm = (grid.block() as f64).sqrt();

    // ball means and the zero-mean remainder of each species, per state
    let decompose = |x: &Array1<f64>, centre: f64| -> (Vec<f64>, Array1<f64>) {
        let means: Vec<f64> = (0..n)
            .map(|i| grid.ball(i).map(|k| x[k] - centre).sum::<f64>() / grid.block() as f64)
            .collect();
        let rest = Array1::from_iter((0..grid.len()).map(|k| x[k] - centre - means[grid.vertex_of(k)]));
        (means, rest)
    };

    let graph_groups = spectral::group_values(&graph.eigenvalues);
    let mut degrees: Vec<u32> = emb.degrees().to_vec();
    degrees.sort_unstable();
    degrees.dedup();
    let mut modes: Vec<ModeGroup> = Vec::new();
    let mut start = 0;
    for g in &graph_groups {
        modes.push(ModeGroup {
            kind: ModeKind::Graph,
            kappa: g.value,
            dimension: g.multiplicity,
            amplitudes: Vec::with_capacity(times.len()),
            fit: None,
            fit_error: None,
        });
        start += g.multiplicity;
    }
    debug_assert_eq!(start, n);
    if grid.block() > 1 {
        for &gamma in &degrees {
            let balls = emb.degrees().iter().filter(|&&x| x == gamma).count();
            modes.push(ModeGroup {
                kind: ModeKind::Wavelet,
                kappa: -(gamma as f64),
                dimension: balls * (grid.block() - 1),
                amplitudes: Vec::with_capacity(times.len()),
                fit: None,
                fit_error: None,
            });
        }
    }

    for state in &trajectory.states {
        let (mu, ru) = decompose(&state.u, steady.0);
        let (mv, rv) = decompose(&state.v, steady.1);
        let mut col = 0;
        for group in modes.iter_mut().filter(|g| g.kind == ModeKind::Graph) {
            let mut sq = 0.0;
            for c in col..col + group.dimension {
                let phi = vectors.column(c);
                // lifted eigenvector has Euclidean norm sqrt(block)
                let pu: f64 = (0..n).map(|i| mu[i] * phi[i]).sum::<f64>() * norm;
                let pv: f64 = (0..n).map(|i| mv[i] * phi[i]).sum::<f64>() * norm;
                sq += pu * pu + pv * pv;
            }
            col += group.dimension;
            group.amplitudes.push(sq.sqrt());
        }
        for group in modes.iter_mut().filter(|g| g.kind == ModeKind::Wavelet) {
            let mut sq = 0.0;
            for k in 0..grid.len() {
                if -(emb.degrees()[grid.vertex_of(k)] as f64) == group.kappa {
                    sq += ru[k] * ru[k] + rv[k] * rv[k];
                }
            }
            group.amplitudes.push(sq.sqrt());
        }
    }

    let window = (10.0 * delta, 0.1 * box_width);
    for group in &mut modes {
        match fit_growth(&times, &group.amplitudes, window.0, window.1) {
            Ok(f) => group.fit = Some(f),
            Err(e) => group.fit_error = Some(e.to_string()),
        }
    }

    let last = trajectory.last();
    let (mu, ru) = decompose(&last.u, steady.0);
    let (mv, rv) = decompose(&last.v, steady.1);
    let cluster_means: Vec<(f64, f64)> = (0..n).map(|i| (mu[i] + steady.0, mv[i] + steady.1)).collect();
    let spread = |x: &[f64]| {
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    };
    let inter = spread(&mu).max(spread(&mv));
    let intra = (0..n)
        .map(|i| {
            let us: Vec<f64> = grid.ball(i).map(|k| ru[k]).collect();
            let vs: Vec<f64> = grid.ball(i).map(|k| rv[k]).collect();
            spread(&us).max(spread(&vs))
        })
        .fold(0.0, f64::max);
    let verdict = if inter > HOMOGENEOUS_FLOOR && inter > 100.0 * intra {
        PatternVerdict::Clustered
    } else {
        PatternVerdict::Homogeneous
    };
    let dominant = modes
        .iter()
        .filter(|g| g.kappa.abs() > GROUP_TOL || g.kind == ModeKind::Wavelet)
        .filter_map(|g| g.amplitudes.last().map(|a| (g, *a)))
        .filter(|(_, a)| *a > 0.0)
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(g, _)| (g.kind, g.kappa));
    Ok(PatternReport {
        times,
        cluster_means,
        clusters: n,
        inter_ball_difference: inter,
        intra_ball_spread: intra,
        modes,
        dominant,
        verdict,
        fit_window: window,
        note: "perturbation statistics are a convention (uniform by default); the growth window is [10 delta, 0.1 (b - a)]"
            .into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::brusselator;
    use crate::network::{embed, refine, Graph};
    use crate::simulate::{
        diffusion_pair, initial_condition, integrate, IntegrateOptions, Integrator, ModeSpec, Perturbation,
        SimState,
    };

    fn run(grid: &LevelGrid, b: f64, eps: f64, d: f64, p: Perturbation, t_end: f64) -> Trajectory {
        let m = brusselator(2.0, b).unwrap();
        let steady = (2.0, b / 2.0);
        let (lu, lv) = diffusion_pair(grid, eps, d);
        let init = initial_condition(grid, steady, &p, 3, None).unwrap();
        integrate(
            &m,
            &lu,
            &lv,
            &init,
            &IntegrateOptions {
                integrator: Integrator::Rk4,
                dt: 1e-3,
                t_end,
                stride: 10,
                validity: Some(m.validity_box(steady)),
            },
        )
        .unwrap()
    }

    #[test]
    fn fit_recovers_exponential() {
        let times: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let amps: Vec<f64> = times.iter().map(|t| 1e-4 * (1.3 * t).exp()).collect();
        let f = fit_growth(&times, &amps, 1e-4, 1.0).unwrap();
        assert!((f.rate - 1.3).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
        assert!(matches!(fit_growth(&times, &amps, 10.0, 20.0), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn homogeneous_run() {
        let g = refine(&embed(&Graph::complete(4), None, None).unwrap(), 3).unwrap();
        let t = run(&g, 4.5, 0.3, 9.0, Perturbation::Uniform { delta: 0.0 }, 1.0);
        let r = pattern_report(&g, &t, (2.0, 2.25), 0.0, 20.0).unwrap();
        assert_eq!(r.verdict, PatternVerdict::Homogeneous);
        assert!(r.modes.iter().all(|m| m.amplitudes.iter().all(|a| *a <= 1e-10)));
        assert_eq!(r.clusters, 4);
    }

    #[test]
    fn graph_mode_amplitude_matches_norm() {
        let g = refine(&embed(&Graph::complete(4), None, None).unwrap(), 3).unwrap();
        let p = Perturbation::Eigenmode {
            mode: ModeSpec::Graph { index: 0 },
            amplitude: 1e-3,
        };
        let init = initial_condition(&g, (2.0, 2.25), &p, 0, None).unwrap();
        let t = Trajectory {
            states: vec![init.clone()],
            status: crate::simulate::RunStatus::Completed,
            dt: 1e-3,
        };
        let r = pattern_report(&g, &t, (2.0, 2.25), 1e-3, 20.0).unwrap();
        let (wu, wv) = init.deviation((2.0, 2.25));
        let total = (wu.dot(&wu) + wv.dot(&wv)).sqrt();
        let minus4 = r.modes.iter().find(|m| m.kind == ModeKind::Graph && m.kappa < -3.5).unwrap();
        assert!((minus4.amplitudes[0] - total).abs() <= 1e-15);
        assert_eq!(minus4.dimension, 3);
        let _ = SimState::homogeneous(1, (0.0, 0.0));
    }

    #[test]
    fn wavelet_seed_grows_inside_one_ball() {
        // eps = 0.9, d = 100, B = 4.2: only -3 lies inside the band
        let g = refine(&embed(&Graph::complete(4), None, None).unwrap(), 3).unwrap();
        let p = Perturbation::Eigenmode {
            mode: ModeSpec::Wavelet { vertex: 1, j: 1 },
            amplitude: 1e-4,
        };
        let t = run(&g, 4.2, 0.9, 100.0, p, 8.0);
        let r = pattern_report(&g, &t, (2.0, 2.1), 1e-4, 20.0).unwrap();
        let wave = r.modes.iter().find(|m| m.kind == ModeKind::Wavelet).unwrap();
        let first = wave.amplitudes[0];
        let last = *wave.amplitudes.last().unwrap();
        assert!(last > 5.0 * first, "wavelet amplitude {first} -> {last}");
        assert_eq!(r.dominant, Some((ModeKind::Wavelet, -3.0)));
        // the seeded ball splits into sub-clusters, the others stay flat
        let last_state = t.last();
        let ball = |i: usize| g.ball(i).map(|k| last_state.u[k]).collect::<Vec<_>>();
        let b1 = ball(1);
        assert!((b1[0] - b1[1]).abs() > 1e-3);
        for i in [0, 2, 3] {
            let b = ball(i);
            assert!((b[0] - b[1]).abs() < 1e-9);
        }
    }
}
