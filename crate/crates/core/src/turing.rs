//! Linear stability of the homogeneous steady state and Turing instability.
//!
//! With `s = d f_u + g_v` the modes of the linearised system grow like
//! `e^{λ t}`, where `λ² - ((1+d) ε κ + Tr J) λ + h(κ) = 0` and
//! `h(κ) = ε² d κ² + ε κ s + det J`. A mode `κ ∈ σ(L) \ {0}` is unstable when
//! `κ1 < κ < κ2`, the two negative zeros of `h`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::{Jacobian, KineticsModel};
use crate::network::{refine, NetworkEmbedding};
use crate::spectral::{self, SpectrumReport, GROUP_TOL};

/// Guard for strict band membership.
pub const BAND_GUARD: f64 = 1e-12;

pub const WAVELET_ANNOTATION: &str = "for M > N the space X_M carries wavelet modes with eigenvalue -gamma_I \
(here -(n-1) for K_n); this verdict uses the computed spectrum of L_M, so a pattern can appear at M = N+1 \
even when none exists at level N";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub fn real(re: f64) -> Self {
        Self { re, im: 0.0 }
    }
}

/// Roots of `λ² - s λ + p = 0`, the `+` branch first.
pub fn quadratic_roots(s: f64, p: f64) -> (Complex, Complex) {
    let disc = s * s - 4.0 * p;
    if disc >= 0.0 {
        let r = disc.sqrt();
        // avoid cancellation in the smaller-magnitude root
        let big = if s >= 0.0 { 0.5 * (s + r) } else { 0.5 * (s - r) };
        let small = if big != 0.0 { p / big } else { 0.0 };
        let (plus, minus) = if big >= small { (big, small) } else { (small, big) };
        (Complex::real(plus), Complex::real(minus))
    } else {
        let im = 0.5 * (-disc).sqrt();
        (Complex { re: 0.5 * s, im }, Complex { re: 0.5 * s, im: -im })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearStability {
    pub trace: f64,
    pub det: f64,
    pub t1: bool,
    pub t2: bool,
    pub roots: (Complex, Complex),
}

pub fn linear_stability(j: &Jacobian) -> LinearStability {
    let trace = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    LinearStability {
        trace,
        det,
        t1: trace < 0.0,
        t2: det > 0.0,
        roots: quadratic_roots(trace, det),
    }
}

fn det(j: &Jacobian) -> f64 {
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

pub fn h_kappa(j: &Jacobian, epsilon: f64, d: f64, kappa: f64) -> f64 {
    let s = d * j[0][0] + j[1][1];
    epsilon * epsilon * d * kappa * kappa + epsilon * kappa * s + det(j)
}

/// `(λ_plus, λ_minus)` for the mode `κ`.
pub fn dispersion(j: &Jacobian, epsilon: f64, d: f64, kappa: f64) -> (Complex, Complex) {
    let s = (1.0 + d) * epsilon * kappa + j[0][0] + j[1][1];
    quadratic_roots(s, h_kappa(j, epsilon, d, kappa))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalDiffusion {
    /// Real roots of `f_u² d² + 2(2 f_v g_u - f_u g_v) d + g_v² = 0`, ascending.
    pub roots: Vec<f64>,
    pub d_c: Option<f64>,
}

/// Smallest positive root beyond which `d f_u + g_v > 0` and
/// `(d f_u + g_v)² > 4 d det J` hold for every larger `d`. Requires
/// `f_u g_v < 0`; otherwise there is no admissible root.
pub fn critical_diffusion(j: &Jacobian) -> Result<CriticalDiffusion> {
    let [[fu, fv], [gu, gv]] = *j;
    if fu == 0.0 {
        return Err(Error::Argument(
            "f_u = 0 at the steady state: the critical-diffusion quadratic is degenerate".into(),
        ));
    }
    let a = fu * fu;
    let b = 2.0 * (2.0 * fv * gu - fu * gv);
    let c = gv * gv;
    let disc = b * b - 4.0 * a * c;
    let roots = if disc < 0.0 {
        Vec::new()
    } else {
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        let mut r = if q == 0.0 { vec![0.0, 0.0] } else { vec![q / a, c / q] };
        r.sort_by(f64::total_cmp);
        r
    };
    let largest = roots.last().copied();
    let d_c = roots.iter().copied().find(|&r| {
        r > 0.0 && fu > 0.0 && fu * gv < 0.0 && r * fu + gv >= 0.0 && largest.is_some_and(|m| r >= m)
    });
    Ok(CriticalDiffusion { roots, d_c })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub kappa1: f64,
    pub kappa2: f64,
}

impl Band {
    pub fn contains(&self, kappa: f64) -> bool {
        self.kappa1 + BAND_GUARD < kappa && kappa < self.kappa2 - BAND_GUARD
    }

    pub fn on_boundary(&self, kappa: f64) -> bool {
        (kappa - self.kappa1).abs() <= BAND_GUARD || (kappa - self.kappa2).abs() <= BAND_GUARD
    }
}

/// Zeros `κ1 < κ2 < 0` of `h`, when `d f_u + g_v > 0` and `h` dips below zero.
pub fn instability_band(j: &Jacobian, epsilon: f64, d: f64) -> Option<Band> {
    let s = d * j[0][0] + j[1][1];
    let disc = s * s - 4.0 * d * det(j);
    if !(s > 0.0 && disc > 0.0) {
        return None;
    }
    let r = disc.sqrt();
    let scale = 2.0 * d * epsilon;
    let kappa1 = -(s + r) / scale;
    // product of the roots is det J / (ε² d)
    let kappa2 = det(j) / (epsilon * epsilon * d) / kappa1;
    Some(Band { kappa1, kappa2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Level(usize),
    Infinity,
}

impl std::fmt::Display for Space {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Space::Level(m) => write!(f, "X_{m}"),
            Space::Infinity => f.write_str("X_inf"),
        }
    }
}

impl std::str::FromStr for Space {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "infinity" | "inf" => Ok(Space::Infinity),
            t => t
                .parse()
                .map(Space::Level)
                .map_err(|_| Error::Argument(format!("level '{t}' is neither an integer nor 'infinity'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeStatus {
    Unstable,
    Marginal,
    Stable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub kappa: f64,
    pub multiplicity: usize,
    pub lambda_plus: Complex,
    pub status: ModeStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pattern,
    NoPattern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceReport {
    pub space: Space,
    pub modes: Vec<Mode>,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<String>,
}

impl SpaceReport {
    pub fn unstable(&self) -> Vec<f64> {
        self.modes
            .iter()
            .filter(|m| m.status == ModeStatus::Unstable)
            .map(|m| m.kappa)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub holds: bool,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conditions {
    /// `Tr J < 0`.
    pub t1: Condition,
    /// `det J > 0`.
    pub t2: Condition,
    /// `d f_u + g_v > 0`.
    pub t3: Condition,
    /// `f_u g_v < 0`.
    pub t4: Condition,
    /// `(d f_u + g_v)² - 4 d det J > 0`.
    pub t5: Condition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuringReport {
    pub model: String,
    pub epsilon: f64,
    pub d: f64,
    pub steady_state: (f64, f64),
    pub jacobian: Jacobian,
    pub trace: f64,
    pub det: f64,
    pub conditions: Conditions,
    /// `T1 ∧ T3 ⇒ T4`.
    pub t4_consistent: bool,
    pub critical: Option<CriticalDiffusion>,
    pub band: Option<Band>,
    /// `-(d f_u + g_v) / (2 ε d_c)`.
    pub kappa_min: Option<f64>,
    pub spaces: Vec<SpaceReport>,
    /// Every finite-level unstable set lies inside the one at infinity.
    pub monotone: bool,
}

impl TuringReport {
    pub fn space(&self, space: Space) -> Option<&SpaceReport> {
        self.spaces.iter().find(|s| s.space == space)
    }
}

pub fn conditions(j: &Jacobian, d: f64) -> Conditions {
    let [[fu, _], [_, gv]] = *j;
    let trace = fu + gv;
    let dt = det(j);
    let s = d * fu + gv;
    let disc = s * s - 4.0 * d * dt;
    let c = |holds, value| Condition { holds, value };
    Conditions {
        t1: c(trace < 0.0, trace),
        t2: c(dt > 0.0, dt),
        t3: c(s > 0.0, s),
        t4: c(fu * gv < 0.0, fu * gv),
        t5: c(disc > 0.0, disc),
    }
}

fn space_spectrum(embedding: &NetworkEmbedding, space: Space) -> Result<SpectrumReport> {
    match space {
        Space::Infinity => spectral::spectrum_l_infinity(embedding),
        Space::Level(m) if m == embedding.level() => spectral::spectrum_graph(embedding),
        Space::Level(m) => spectral::spectrum_level_computed(&refine(embedding, m)?),
    }
}

fn classify(
    spectrum: &SpectrumReport,
    j: &Jacobian,
    epsilon: f64,
    d: f64,
    band: Option<Band>,
    stable_without_diffusion: bool,
    space: Space,
    embedding: &NetworkEmbedding,
) -> SpaceReport {
    let modes: Vec<Mode> = spectrum
        .grouped()
        .into_iter()
        .filter(|e| e.value.abs() > GROUP_TOL)
        .map(|e| {
            let status = match band {
                Some(b) if b.contains(e.value) => ModeStatus::Unstable,
                Some(b) if b.on_boundary(e.value) => ModeStatus::Marginal,
                _ => ModeStatus::Stable,
            };
            Mode {
                kappa: e.value,
                multiplicity: e.multiplicity,
                lambda_plus: dispersion(j, epsilon, d, e.value).0,
                status,
            }
        })
        .collect();
    let any_unstable = modes.iter().any(|m| m.status == ModeStatus::Unstable);
    let verdict = if stable_without_diffusion && any_unstable {
        Verdict::Pattern
    } else {
        Verdict::NoPattern
    };
    let annotation = match space {
        Space::Level(m) if m > embedding.level() => Some(WAVELET_ANNOTATION.to_string()),
        _ => None,
    };
    SpaceReport {
        space,
        modes,
        verdict,
        annotation,
    }
}

/// Evaluates the Turing conditions at the steady state of `model` and
/// intersects the band with the spectrum of each requested space.
pub fn turing_check(
    model: &KineticsModel,
    steady_state: (f64, f64),
    epsilon: f64,
    d: f64,
    embedding: &NetworkEmbedding,
    spaces: &[Space],
) -> Result<TuringReport> {
    if !(epsilon > 0.0 && d > 0.0) {
        return Err(Error::Argument(format!(
            "diffusivities must be positive, got eps = {epsilon}, d = {d}"
        )));
    }
    embedding.graph().require_undirected()?;
    for s in spaces {
        if let Space::Level(m) = s {
            if *m < embedding.level() {
                return Err(Error::Argument(format!(
                    "level {m} is below the embedding level N = {}",
                    embedding.level()
                )));
            }
        }
    }
    let j = model.jacobian(steady_state.0, steady_state.1)?;
    let stab = linear_stability(&j);
    let conds = conditions(&j, d);
    let band = if conds.t3.holds && conds.t5.holds {
        instability_band(&j, epsilon, d)
    } else {
        None
    };
    let critical = critical_diffusion(&j).ok();
    let kappa_min = critical
        .as_ref()
        .and_then(|c| c.d_c)
        .map(|dc| -(d * j[0][0] + j[1][1]) / (2.0 * epsilon * dc));
    let stable = stab.t1 && stab.t2;
    let mut reports = Vec::with_capacity(spaces.len());
    for &space in spaces {
        let spectrum = space_spectrum(embedding, space)?;
        reports.push(classify(&spectrum, &j, epsilon, d, band, stable, space, embedding));
    }
    let infinity = match reports.iter().find(|r| r.space == Space::Infinity) {
        Some(r) => r.clone(),
        None => {
            let spectrum = space_spectrum(embedding, Space::Infinity)?;
            classify(&spectrum, &j, epsilon, d, band, stable, Space::Infinity, embedding)
        }
    };
    let reference = infinity.unstable();
    let monotone = reports.iter().all(|r| {
        r.unstable()
            .iter()
            .all(|k| reference.iter().any(|x| (x - k).abs() <= 1e-9 * (1.0 + k.abs())))
    });
    Ok(TuringReport {
        model: model.name().to_string(),
        epsilon,
        d,
        steady_state,
        jacobian: j,
        trace: stab.trace,
        det: stab.det,
        conditions: conds,
        t4_consistent: !(conds.t1.holds && conds.t3.holds) || conds.t4.holds,
        critical,
        band,
        kappa_min,
        spaces: reports,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{brusselator, cima};
    use crate::network::{embed, Graph};
    use proptest::prelude::*;

    const J: Jacobian = [[3.5, 4.0], [-4.5, -4.0]];

    #[test]
    fn linear_stability_examples() {
        let s = linear_stability(&J);
        assert_eq!((s.trace, s.det, s.t1, s.t2), (-0.5, 4.0, true, true));
        let id = linear_stability(&[[1.0, 0.0], [0.0, 1.0]]);
        assert!(!id.t1 && id.trace == 2.0);
        let rot = linear_stability(&[[0.0, 1.0], [-1.0, 0.0]]);
        assert!(!rot.t1);
        assert_eq!(rot.roots.0, Complex { re: 0.0, im: 1.0 });
        assert_eq!(rot.roots.1, Complex { re: 0.0, im: -1.0 });
        // direct 2x2 eigensolve: (-0.5 ± i sqrt(15.75)) / 2
        let (a, b) = s.roots;
        assert!((a.re + 0.25).abs() < 1e-15 && (a.im - 15.75f64.sqrt() / 2.0).abs() < 1e-14);
        assert_eq!(b.im, -a.im);
    }

    #[test]
    fn h_kappa_examples() {
        assert_eq!(h_kappa(&J, 0.3, 9.0, 0.0), 4.0);
        assert!((h_kappa(&J, 0.3, 9.0, -4.0) + 16.04).abs() < 1e-12);
        let b = instability_band(&J, 0.3, 9.0).unwrap();
        assert!(h_kappa(&J, 0.3, 9.0, b.kappa1).abs() < 1e-10);
        assert!(h_kappa(&J, 0.3, 9.0, b.kappa2).abs() < 1e-10);
    }

    #[test]
    fn critical_diffusion_examples() {
        let c = critical_diffusion(&J).unwrap();
        // 12.25 d² - 44 d + 16 = 0
        let disc: f64 = 44.0 * 44.0 - 4.0 * 12.25 * 16.0;
        let hi = (44.0 + disc.sqrt()) / 24.5;
        let lo = (44.0 - disc.sqrt()) / 24.5;
        assert!((c.roots[0] - lo).abs() < 1e-12 && (c.roots[1] - hi).abs() < 1e-12);
        let dc = c.d_c.unwrap();
        assert!((dc - hi).abs() < 1e-12);
        // minimum of h over kappa vanishes at d_c
        let s = dc * 3.5 - 4.0;
        assert!((4.0 - s * s / (4.0 * dc)).abs() < 1e-8);
        assert!(instability_band(&J, 0.3, dc + 1e-3).is_some());
        assert!(instability_band(&J, 0.3, dc - 1e-3).is_none());
        // f_v g_u = 0 with f_u, g_v of equal sign: no admissible root
        let none = critical_diffusion(&[[1.0, 0.0], [2.0, 1.0]]).unwrap();
        assert_eq!(none.d_c, None);
        assert!(critical_diffusion(&[[0.0, 1.0], [-1.0, -1.0]]).is_err());
    }

    #[test]
    fn band_examples() {
        let b = instability_band(&J, 0.3, 9.0).unwrap();
        let s: f64 = 27.5;
        let r = (s * s - 36.0 * 4.0).sqrt();
        assert!((b.kappa1 - (-(s + r) / 5.4)).abs() < 1e-12);
        assert!((b.kappa2 - (-(s - r) / 5.4)).abs() < 1e-12);
        assert!((b.kappa1 + 9.675).abs() < 1e-3 && (b.kappa2 + 0.5102).abs() < 1e-3);
        assert!(instability_band(&J, 0.3, 3.0).is_none());
        // large-d asymptotics, A = 2, B = 4.5
        let big = instability_band(&J, 0.3, 100.0).unwrap();
        let k1 = -3.5 / 0.3;
        let k2 = -4.0 / (0.3 * 100.0 * 3.5);
        assert!(((big.kappa1 - k1) / k1).abs() < 0.15);
        assert!(((big.kappa2 - k2) / k2).abs() < 0.15);
    }

    #[test]
    fn dispersion_examples() {
        let (lp, _) = dispersion(&J, 0.3, 9.0, -4.0);
        assert!((lp.re - 1.173).abs() < 1e-3 && lp.im == 0.0);
        assert_eq!(dispersion(&J, 0.3, 9.0, 0.0), linear_stability(&J).roots);
        assert!(dispersion(&J, 0.3, 9.0, -100.0).0.re < 0.0);
    }

    #[test]
    fn turing_check_k4() {
        let m = brusselator(2.0, 4.5).unwrap();
        let e = embed(&Graph::complete(4), None, None).unwrap();
        let r = turing_check(
            &m,
            (2.0, 2.25),
            0.3,
            9.0,
            &e,
            &[Space::Level(2), Space::Level(3), Space::Infinity],
        )
        .unwrap();
        let c = r.conditions;
        assert!(c.t1.holds && c.t2.holds && c.t3.holds && c.t4.holds && c.t5.holds);
        let lvl = r.space(Space::Level(2)).unwrap();
        assert_eq!(lvl.verdict, Verdict::Pattern);
        assert_eq!(lvl.unstable().len(), 1);
        assert!((lvl.unstable()[0] + 4.0).abs() < 1e-9);
        let inf = r.space(Space::Infinity).unwrap();
        let unstable = inf.unstable();
        assert_eq!(unstable.len(), 2);
        assert!((unstable[0] + 4.0).abs() < 1e-9 && (unstable[1] + 3.0).abs() < 1e-9);
        assert!(r.space(Space::Level(3)).unwrap().annotation.is_some());
        assert!(r.monotone && r.t4_consistent);
    }

    #[test]
    fn window_between_degrees() {
        // -3 inside the band, -4 outside
        let m = brusselator(2.0, 4.2).unwrap();
        let e = embed(&Graph::complete(4), None, None).unwrap();
        let r = turing_check(&m, (2.0, 2.1), 0.9, 100.0, &e, &[Space::Level(2), Space::Infinity]).unwrap();
        assert_eq!(r.space(Space::Infinity).unwrap().verdict, Verdict::Pattern);
        assert_eq!(r.space(Space::Level(2)).unwrap().verdict, Verdict::NoPattern);
    }

    #[test]
    fn equal_diffusivities_give_no_pattern() {
        let m = brusselator(2.0, 4.5).unwrap();
        let e = embed(&Graph::complete(4), None, None).unwrap();
        let r = turing_check(&m, (2.0, 2.25), 0.3, 1.0, &e, &[Space::Level(2), Space::Infinity]).unwrap();
        assert!(!r.conditions.t3.holds);
        assert!(r.band.is_none());
        assert!(r.spaces.iter().all(|s| s.verdict == Verdict::NoPattern));
        let c = cima(10.0, 2.0, 1.0).unwrap();
        let s = c.steady_state(None).unwrap();
        let r = turing_check(&c, s, 0.3, 1.0, &e, &[Space::Level(2)]).unwrap();
        assert_eq!(r.spaces[0].verdict, Verdict::NoPattern);
    }

    #[test]
    fn rejects_bad_input() {
        let m = brusselator(2.0, 4.5).unwrap();
        let dir = Graph::from_edges(4, &[[0, 1]], true, true).unwrap();
        let e = embed(&dir, None, None).unwrap();
        assert!(matches!(
            turing_check(&m, (2.0, 2.25), 0.3, 9.0, &e, &[Space::Infinity]),
            Err(Error::Asymmetric)
        ));
        let e = embed(&Graph::complete(4), None, None).unwrap();
        assert!(turing_check(&m, (2.0, 2.25), 0.3, 9.0, &e, &[Space::Level(1)]).is_err());
        assert!("infinity".parse::<Space>().unwrap() == Space::Infinity);
        assert!("x".parse::<Space>().is_err());
    }

    proptest! {
        #[test]
        fn band_and_dispersion_consistency(
            a in 0.5f64..3.0, b_excess in 0.2f64..3.0, eps in 0.1f64..2.0, d in 2.0f64..200.0,
        ) {
            let b = 1.0 + a * a + b_excess - 0.1;
            let m = brusselator(a, b).unwrap();
            let j = m.jacobian(a, b / a).unwrap();
            let c = conditions(&j, d);
            prop_assert_eq!(c.t5.holds && c.t3.holds, instability_band(&j, eps, d).is_some());
            if c.t1.holds && c.t3.holds {
                prop_assert!(c.t4.holds);
            }
            let Some(band) = instability_band(&j, eps, d) else { return Ok(()) };
            prop_assert!(band.kappa1 < band.kappa2 && band.kappa2 < 0.0);
            let scale = 1.0 + det(&j);
            prop_assert!(h_kappa(&j, eps, d, band.kappa1).abs() <= 1e-10 * scale * (1.0 + band.kappa1 * band.kappa1));
            prop_assert!(h_kappa(&j, eps, d, band.kappa2).abs() <= 1e-10 * scale);
            let width = band.kappa2 - band.kappa1;
            for k in 1..100 {
                let inside = band.kappa1 + width * k as f64 / 100.0;
                prop_assert!(h_kappa(&j, eps, d, inside) < 0.0);
                if c.t1.holds && c.t2.holds {
                    prop_assert!(dispersion(&j, eps, d, inside).0.re > 0.0);
                }
                let outside_left = band.kappa1 - width * k as f64 / 100.0;
                let outside_right = band.kappa2 + (-band.kappa2) * k as f64 / 100.0;
                prop_assert!(h_kappa(&j, eps, d, outside_left) > 0.0);
                if outside_right < 0.0 {
                    prop_assert!(h_kappa(&j, eps, d, outside_right) > 0.0);
                }
            }
            for edge in [band.kappa1, band.kappa2] {
                let (lp, lm) = dispersion(&j, eps, d, edge);
                let smallest = lp.re.abs().min(lm.re.abs());
                prop_assert!(smallest <= 1e-8 * (1.0 + edge.abs()));
            }
        }
    }
}
