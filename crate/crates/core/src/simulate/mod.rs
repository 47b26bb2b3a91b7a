//! Time integration of the reaction-diffusion system
//! `u' = f(u, v) + ε L u`, `v' = g(u, v) + ε d L v` on a level grid, plus the
//! Picard verifier, the level-convergence study, the replica comparison and
//! pattern extraction.

mod pattern;
mod picard;
mod study;

pub use pattern::{fit_growth, pattern_report, GrowthFit, ModeGroup, ModeKind, PatternReport, PatternVerdict};
pub use picard::{picard_verify, PicardReport};
pub use study::{convergence_study, replica_compare, ConvergenceTable, GapRow, ReplicaReport};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::{KineticsModel, ValidityBox};
use crate::linalg;
use crate::network::LevelGrid;
use crate::operator::{build_full_level, digit_weight, fmt_full, matrix_exp, project};
use crate::spectral;

/// Sup-norm above which a run is declared blown up.
pub const BLOW_UP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Rk4,
    ExponentialEuler,
}

/// Which eigenvector seeds an eigenmode perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModeSpec {
    /// The graph-Laplacian eigenvector with this position in ascending order,
    /// constant on each vertex ball.
    Graph { index: usize },
    /// Real part of the wavelet on the ball of `vertex`.
    Wavelet { vertex: usize, j: u32 },
}

/// A continuous initial datum sampled at the ball centres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Datum {
    /// `amplitude · Σ_i d_i(x) p^{-i-1}` over all available digits.
    DigitWeight { amplitude: f64 },
    /// The same weight truncated to the `N` vertex digits, an element of `X_N`.
    BallConstant { amplitude: f64 },
}

impl Datum {
    pub fn sample(&self, grid: &LevelGrid) -> Array1<f64> {
        let n_level = grid.embedding().level();
        match *self {
            Datum::DigitWeight { amplitude } => project(grid, |x| amplitude * digit_weight(x)),
            Datum::BallConstant { amplitude } => project(grid, |x| {
                amplitude * digit_weight(&x.prefix(n_level).expect("grid codes have at least N digits"))
            }),
        }
    }

    pub fn amplitude(&self) -> f64 {
        match *self {
            Datum::DigitWeight { amplitude } | Datum::BallConstant { amplitude } => amplitude,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    /// Independent uniform draws in `[-delta, delta]` for every entry of `u`, `v`.
    Uniform { delta: f64 },
    /// `amplitude · φ / ‖φ‖_∞` added to both species.
    Eigenmode { mode: ModeSpec, amplitude: f64 },
    /// A sampled continuous function added to both species.
    Function { datum: Datum },
}

impl Perturbation {
    /// Size of the perturbation, the `δ` of the growth-fit window.
    pub fn size(&self) -> f64 {
        match *self {
            Perturbation::Uniform { delta } => delta,
            Perturbation::Eigenmode { amplitude, .. } => amplitude.abs(),
            Perturbation::Function { datum } => datum.amplitude().abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub level: usize,
    pub epsilon: f64,
    pub d: f64,
    #[serde(default)]
    pub integrator: Integrator,
    /// `None` selects `min(1e-3, 0.1 / (ε max(1, d) ‖L‖_∞))`.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub seed: u64,
    pub perturbation: Perturbation,
    /// Record every `stride`-th step.
    pub stride: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Argument(msg));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.d > 0.0 && self.d.is_finite()) {
            return bad(format!("d must be positive, got {}", self.d));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("dt must be positive, got {dt}"));
            }
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be non-negative, got {}", self.t_end));
        }
        if self.stride == 0 {
            return bad("stride must be at least 1".into());
        }
        Ok(())
    }

    pub fn time_step(&self, l: &Array2<f64>) -> f64 {
        self.dt.unwrap_or_else(|| default_dt(l, self.epsilon, self.d))
    }
}

pub fn default_dt(l: &Array2<f64>, epsilon: f64, d: f64) -> f64 {
    let norm = epsilon * d.max(1.0) * linalg::norm_inf(l);
    if norm > 0.0 {
        1e-3f64.min(0.1 / norm)
    } else {
        1e-3
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub u: Array1<f64>,
    pub v: Array1<f64>,
}

impl SimState {
    pub fn homogeneous(n: usize, (u0, v0): (f64, f64)) -> Self {
        Self {
            t: 0.0,
            u: Array1::from_elem(n, u0),
            v: Array1::from_elem(n, v0),
        }
    }

    /// `w = (u - u0, v - v0)`.
    pub fn deviation(&self, (u0, v0): (f64, f64)) -> (Array1<f64>, Array1<f64>) {
        (self.u.mapv(|x| x - u0), self.v.mapv(|x| x - v0))
    }

    pub fn sup_norm(&self) -> f64 {
        self.u
            .iter()
            .chain(self.v.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }

    fn is_finite(&self) -> bool {
        self.u.iter().chain(self.v.iter()).all(|x| x.is_finite())
    }

    fn first_outside(&self, b: &ValidityBox) -> Option<(f64, f64)> {
        self.u
            .iter()
            .zip(self.v.iter())
            .find(|(u, v)| !b.contains(**u, **v))
            .map(|(u, v)| (*u, *v))
    }

    /// Largest entrywise difference over both species.
    pub fn distance(&self, other: &SimState) -> f64 {
        let du = (&self.u - &other.u).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let dv = (&self.v - &other.v).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        du.max(dv)
    }
}

/// Steady state plus the configured perturbation.
pub fn initial_condition(
    grid: &LevelGrid,
    steady: (f64, f64),
    perturbation: &Perturbation,
    seed: u64,
    validity: Option<&ValidityBox>,
) -> Result<SimState> {
    let n = grid.len();
    let mut state = SimState::homogeneous(n, steady);
    match *perturbation {
        Perturbation::Uniform { delta } => {
            if !(delta >= 0.0 && delta.is_finite()) {
                return Err(Error::Argument(format!("delta must be non-negative, got {delta}")));
            }
            if delta > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for x in state.u.iter_mut() {
                    *x += rng.gen_range(-delta..=delta);
                }
                for x in state.v.iter_mut() {
                    *x += rng.gen_range(-delta..=delta);
                }
            }
        }
        Perturbation::Eigenmode { mode, amplitude } => {
            let shape = mode_vector(grid, mode)?;
            let scale = shape.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if scale == 0.0 {
                return Err(Error::Argument("selected mode vanishes on the grid".into()));
            }
            let eta = shape * (amplitude / scale);
            state.u += &eta;
            state.v += &eta;
        }
        Perturbation::Function { datum } => {
            let eta = datum.sample(grid);
            state.u += &eta;
            state.v += &eta;
        }
    }
    if let Some(b) = validity {
        if let Some((u, v)) = state.first_outside(b) {
            return Err(Error::OutsideBox { u, v });
        }
    }
    Ok(state)
}

/// Shape of a mode on the grid, before normalisation.
pub fn mode_vector(grid: &LevelGrid, mode: ModeSpec) -> Result<Array1<f64>> {
    match mode {
        ModeSpec::Graph { index } => {
            let report = spectral::spectrum_graph(grid.embedding())?;
            let vectors = report.eigenvectors.expect("computed spectra carry eigenvectors");
            if index >= vectors.ncols() {
                return Err(Error::Argument(format!(
                    "graph mode {index} out of range (n = {})",
                    vectors.ncols()
                )));
            }
            let col = vectors.column(index);
            Ok((0..grid.len()).map(|k| col[grid.vertex_of(k)]).collect())
        }
        ModeSpec::Wavelet { vertex, j } => Ok(spectral::kozyrev_wavelet(grid, vertex, j)?.re),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// The run stopped early; `t_max` is the last time with an admissible state.
    Halted { t_max: f64, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<SimState>,
    pub status: RunStatus,
    pub dt: f64,
}

impl Trajectory {
    pub fn last(&self) -> &SimState {
        self.states.last().expect("trajectories hold the initial state")
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    /// Header `t,u_<code>...,v_<code>...`, one row per recorded state.
    pub fn to_csv(&self, grid: &LevelGrid) -> String {
        let mut out = String::from("t");
        for prefix in ["u", "v"] {
            for c in grid.codes() {
                out.push_str(&format!(",{prefix}_{c}"));
            }
        }
        out.push('\n');
        for s in &self.states {
            out.push_str(&fmt_full(s.t));
            for x in s.u.iter().chain(s.v.iter()) {
                out.push(',');
                out.push_str(&fmt_full(*x));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrateOptions {
    pub integrator: Integrator,
    pub dt: f64,
    pub t_end: f64,
    pub stride: usize,
    /// Leaving this box halts the run.
    pub validity: Option<ValidityBox>,
}

/// The diffusion generators `(ε L, ε d L)` for a level grid.
pub fn diffusion_pair(grid: &LevelGrid, epsilon: f64, d: f64) -> (Array2<f64>, Array2<f64>) {
    let l = build_full_level(grid).entries;
    (&l * epsilon, &l * (epsilon * d))
}

fn steps_for(t_end: f64, dt: f64) -> (usize, f64) {
    if t_end == 0.0 {
        return (0, dt);
    }
    let ratio = t_end / dt;
    let steps = if (ratio - ratio.round()).abs() <= 1e-9 * ratio {
        ratio.round()
    } else {
        ratio.ceil()
    } as usize;
    (steps, t_end / steps as f64)
}

struct Rhs<'a> {
    model: &'a KineticsModel,
    lu: &'a Array2<f64>,
    lv: &'a Array2<f64>,
    fu: Array1<f64>,
    gv: Array1<f64>,
}

impl Rhs<'_> {
    fn eval(&mut self, u: &Array1<f64>, v: &Array1<f64>) -> Result<(Array1<f64>, Array1<f64>)> {
        self.reaction(u, v)?;
        Ok((&self.fu + &self.lu.dot(u), &self.gv + &self.lv.dot(v)))
    }

    fn reaction(&mut self, u: &Array1<f64>, v: &Array1<f64>) -> Result<()> {
        self.model.eval_into(
            u.as_slice().expect("contiguous"),
            v.as_slice().expect("contiguous"),
            self.fu.as_slice_mut().expect("contiguous"),
            self.gv.as_slice_mut().expect("contiguous"),
        )
    }
}

/// Fixed-step integration from `init`. `lu` and `lv` already carry the
/// diffusivities.
pub fn integrate(
    model: &KineticsModel,
    lu: &Array2<f64>,
    lv: &Array2<f64>,
    init: &SimState,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    let n = init.u.len();
    if lu.dim() != (n, n) || lv.dim() != (n, n) || init.v.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: lu.nrows(),
        });
    }
    if !(opts.dt > 0.0) || !(opts.t_end >= 0.0) || opts.stride == 0 {
        return Err(Error::Argument("dt > 0, t_end >= 0 and stride >= 1 are required".into()));
    }
    let (steps, h) = steps_for(opts.t_end, opts.dt);
    let mut rhs = Rhs {
        model,
        lu,
        lv,
        fu: Array1::zeros(n),
        gv: Array1::zeros(n),
    };
    let exps = match opts.integrator {
        Integrator::ExponentialEuler => Some((matrix_exp(lu, h)?, matrix_exp(lv, h)?)),
        Integrator::Rk4 => None,
    };
    let mut state = init.clone();
    let mut states = vec![state.clone()];
    let mut status = RunStatus::Completed;
    for k in 1..=steps {
        let next = match &exps {
            None => rk4_step(&mut rhs, &state, h)?,
            Some((eu, ev)) => {
                rhs.reaction(&state.u, &state.v)?;
                SimState {
                    t: 0.0,
                    u: eu.dot(&state.u) + &rhs.fu * h,
                    v: ev.dot(&state.v) + &rhs.gv * h,
                }
            }
        };
        let t = init.t + k as f64 * h;
        let next = SimState { t, ..next };
        if !next.is_finite() {
            return Err(Error::Integration {
                t,
                reason: format!(
                    "non-finite state; last good state at t = {} has sup norm {}",
                    state.t,
                    state.sup_norm()
                ),
            });
        }
        let halt = if next.sup_norm() > BLOW_UP {
            Some(format!("sup norm exceeded {BLOW_UP:e}"))
        } else {
            opts.validity
                .as_ref()
                .and_then(|b| next.first_outside(b))
                .map(|(u, v)| format!("state ({u}, {v}) left the validity box"))
        };
        if let Some(reason) = halt {
            log::warn!("integration halted at t = {t}: {reason}");
            if states.last().map(|s| s.t) != Some(state.t) {
                states.push(state.clone());
            }
            status = RunStatus::Halted {
                t_max: state.t,
                reason,
            };
            break;
        }
        state = next;
        if k % opts.stride == 0 || k == steps {
            states.push(state.clone());
        }
    }
    Ok(Trajectory { states, status, dt: h })
}

fn rk4_step(rhs: &mut Rhs<'_>, s: &SimState, h: f64) -> Result<SimState> {
    let (k1u, k1v) = rhs.eval(&s.u, &s.v)?;
    let (k2u, k2v) = rhs.eval(&(&s.u + &(&k1u * (h / 2.0))), &(&s.v + &(&k1v * (h / 2.0))))?;
    let (k3u, k3v) = rhs.eval(&(&s.u + &(&k2u * (h / 2.0))), &(&s.v + &(&k2v * (h / 2.0))))?;
    let (k4u, k4v) = rhs.eval(&(&s.u + &(&k3u * h)), &(&s.v + &(&k3v * h)))?;
    let u = &s.u + &((&k1u + &(&k2u * 2.0) + &(&k3u * 2.0) + &k4u) * (h / 6.0));
    let v = &s.v + &((&k1v + &(&k2v * 2.0) + &(&k3v * 2.0) + &k4v) * (h / 6.0));
    Ok(SimState { t: s.t + h, u, v })
}

/// Builds the grid, the initial state and the trajectory for `config`.
pub fn simulate(
    model: &KineticsModel,
    steady: (f64, f64),
    grid: &LevelGrid,
    config: &SimConfig,
) -> Result<Trajectory> {
    config.validate()?;
    if grid.level() != config.level {
        return Err(Error::Argument(format!(
            "grid level {} differs from configured level {}",
            grid.level(),
            config.level
        )));
    }
    let validity = model.validity_box(steady);
    let init = initial_condition(grid, steady, &config.perturbation, config.seed, Some(&validity))?;
    let (lu, lv) = diffusion_pair(grid, config.epsilon, config.d);
    let opts = IntegrateOptions {
        integrator: config.integrator,
        dt: config.time_step(&build_full_level(grid).entries),
        t_end: config.t_end,
        stride: config.stride,
        validity: Some(validity),
    };
    integrate(model, &lu, &lv, &init, &opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{brusselator, parse_kinetics};
    use crate::network::{embed, refine, Graph};
    use crate::operator::semigroup_exp;
    use std::collections::BTreeMap;

    fn k4_grid(m: usize) -> LevelGrid {
        refine(&embed(&Graph::complete(4), None, None).unwrap(), m).unwrap()
    }

    fn zero_kinetics() -> KineticsModel {
        parse_kinetics("0", "0", BTreeMap::new(), None).unwrap()
    }

    fn opts(integrator: Integrator, dt: f64, t_end: f64) -> IntegrateOptions {
        IntegrateOptions {
            integrator,
            dt,
            t_end,
            stride: 1,
            validity: None,
        }
    }

    #[test]
    fn initial_condition_examples() {
        let g = k4_grid(2);
        let s = initial_condition(&g, (2.0, 2.25), &Perturbation::Uniform { delta: 0.0 }, 1, None).unwrap();
        assert_eq!(s, SimState::homogeneous(4, (2.0, 2.25)));
        let p = Perturbation::Eigenmode {
            mode: ModeSpec::Graph { index: 0 },
            amplitude: 1e-3,
        };
        let s = initial_condition(&g, (2.0, 2.25), &p, 1, None).unwrap();
        let (wu, wv) = s.deviation((2.0, 2.25));
        let sup = wu.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!((sup - 1e-3).abs() < 1e-15);
        let l = build_full_level(&g).entries;
        let lw = l.dot(&wu);
        assert!((&lw + &(&wu * 4.0)).iter().all(|x| x.abs() < 1e-12));
        assert!((&wu - &wv).iter().all(|x| *x == 0.0));
        let r = Perturbation::Uniform { delta: 1e-4 };
        let a = initial_condition(&g, (2.0, 2.25), &r, 7, None).unwrap();
        let b = initial_condition(&g, (2.0, 2.25), &r, 7, None).unwrap();
        assert_eq!(a, b);
        assert!(a.deviation((2.0, 2.25)).0.iter().all(|x| x.abs() <= 1e-4));
        let c = initial_condition(&g, (2.0, 2.25), &r, 8, None).unwrap();
        assert_ne!(a, c);
        let tight = ValidityBox::around(2.0, 2.25, 1e-5);
        assert!(matches!(
            initial_condition(&g, (2.0, 2.25), &r, 7, Some(&tight)),
            Err(Error::OutsideBox { .. })
        ));
    }

    #[test]
    fn pure_diffusion_matches_semigroup() {
        let g = k4_grid(3);
        let l = build_full_level(&g);
        let (lu, lv) = diffusion_pair(&g, 0.7, 2.0);
        let init = SimState {
            t: 0.0,
            u: project(&g, digit_weight),
            v: project(&g, |x| 1.0 - digit_weight(x)),
        };
        let exact_u = semigroup_exp(&l, 0.7, 1.0).unwrap().dot(&init.u);
        let exact_v = semigroup_exp(&l, 1.4, 1.0).unwrap().dot(&init.v);
        let exact = SimState { t: 1.0, u: exact_u, v: exact_v };
        let rk = integrate(&zero_kinetics(), &lu, &lv, &init, &opts(Integrator::Rk4, 1e-3, 1.0)).unwrap();
        assert!(rk.last().distance(&exact) <= 1e-6);
        assert_eq!(rk.status, RunStatus::Completed);
        assert!((rk.last().t - 1.0).abs() < 1e-12);
        let ee = integrate(
            &zero_kinetics(),
            &lu,
            &lv,
            &init,
            &opts(Integrator::ExponentialEuler, 1e-3, 1.0),
        )
        .unwrap();
        assert!(ee.last().distance(&exact) <= 1e-10);
        // mass conservation under the symmetric generator
        let mass0 = init.u.sum();
        for s in &rk.states {
            assert!((s.u.sum() - mass0).abs() <= 1e-8);
        }
    }

    #[test]
    fn steady_state_is_a_fixed_point() {
        let g = k4_grid(3);
        let m = brusselator(2.0, 4.5).unwrap();
        let (lu, lv) = diffusion_pair(&g, 0.3, 9.0);
        let init = SimState::homogeneous(g.len(), (2.0, 2.25));
        let t = integrate(&m, &lu, &lv, &init, &opts(Integrator::Rk4, 1e-2, 2.0)).unwrap();
        for s in &t.states {
            assert!(s.distance(&SimState { t: s.t, ..init.clone() }) <= 1e-12);
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        let g = k4_grid(2);
        let m = brusselator(2.0, 3.0).unwrap();
        let (lu, lv) = diffusion_pair(&g, 0.3, 1.0);
        let init = initial_condition(&g, (2.0, 1.5), &Perturbation::Uniform { delta: 0.3 }, 3, None).unwrap();
        let run = |dt| {
            integrate(&m, &lu, &lv, &init, &opts(Integrator::Rk4, dt, 1.0))
                .unwrap()
                .last()
                .clone()
        };
        let reference = run(1e-3);
        let e1 = run(0.1).distance(&reference);
        let e2 = run(0.05).distance(&reference);
        let ratio = e1 / e2;
        assert!((ratio / 16.0 - 1.0).abs() <= 0.3, "ratio {ratio}");
    }

    #[test]
    fn deterministic_and_strided() {
        let g = k4_grid(2);
        let m = brusselator(2.0, 4.5).unwrap();
        let config = SimConfig {
            level: 2,
            epsilon: 0.3,
            d: 9.0,
            integrator: Integrator::Rk4,
            dt: Some(1e-2),
            t_end: 1.0,
            seed: 11,
            perturbation: Perturbation::Uniform { delta: 1e-3 },
            stride: 10,
        };
        let a = simulate(&m, (2.0, 2.25), &g, &config).unwrap();
        let b = simulate(&m, (2.0, 2.25), &g, &config).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.states.len(), 11);
        let csv = a.to_csv(&g);
        assert!(csv.starts_with("t,u_00,u_10,u_01,u_11,v_00"));
        assert_eq!(csv.lines().count(), 12);
    }

    #[test]
    fn blow_up_and_box_exit_halt() {
        let g = k4_grid(2);
        let m = parse_kinetics("u^2", "0", BTreeMap::new(), None).unwrap();
        let (lu, lv) = diffusion_pair(&g, 0.1, 1.0);
        let init = SimState::homogeneous(4, (1.0, 0.0));
        let t = integrate(&m, &lu, &lv, &init, &opts(Integrator::Rk4, 1e-3, 2.0)).unwrap();
        match t.status {
            RunStatus::Halted { t_max, .. } => assert!(t_max < 1.1 && t_max > 0.9, "t_max {t_max}"),
            other => panic!("expected a halt, got {other:?}"),
        }
        let boxed = IntegrateOptions {
            validity: Some(ValidityBox::square(-5.0, 5.0).unwrap()),
            ..opts(Integrator::Rk4, 1e-3, 2.0)
        };
        let t = integrate(&m, &lu, &lv, &init, &boxed).unwrap();
        assert!(matches!(t.status, RunStatus::Halted { t_max, .. } if t_max < 0.81));
        let nan = parse_kinetics("1/(u - 1)", "0", BTreeMap::new(), None).unwrap();
        assert!(integrate(&nan, &lu, &lv, &init, &opts(Integrator::Rk4, 1e-3, 1.0)).is_err());
    }
}
