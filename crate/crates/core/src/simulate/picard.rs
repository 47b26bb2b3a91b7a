use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{SimState, Trajectory};
use crate::error::{Error, Result};
use crate::kinetics::KineticsModel;
use crate::operator::matrix_exp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardReport {
    pub iterations: usize,
    pub dt: f64,
    pub t_end: f64,
    /// `sup_t ‖iterate_k - iterate_{k-1}‖_∞` for `k = 1 … K`.
    pub increments: Vec<f64>,
    /// `sup_t` distance between the last iterate and the reference run.
    pub deviation: Option<f64>,
    pub strictly_decreasing: bool,
}

/// Iterates the mild formulation
/// `u_{k+1}(t) = e^{tεL} u_0 + ∫_0^t e^{(t-s)εL} f(u_k, v_k)(s) ds`
/// (and its `v` analogue) on the `dt`-mesh, starting from the constant path
/// `u_0`. The convolution is the composite trapezoid rule, evaluated
/// recursively with the one-step factors `e^{dt εL}`. `reference`, when given,
/// must be sampled at every mesh point.
pub fn picard_verify(
    model: &KineticsModel,
    lu: &Array2<f64>,
    lv: &Array2<f64>,
    init: &SimState,
    dt: f64,
    t_end: f64,
    iterations: usize,
    reference: Option<&Trajectory>,
) -> Result<PicardReport> {
    if iterations == 0 || !(dt > 0.0) || !(t_end > 0.0) {
        return Err(Error::Argument("Picard needs K >= 1, dt > 0 and t_end > 0".into()));
    }
    let steps = (t_end / dt).round() as usize;
    if steps == 0 || ((steps as f64) * dt - t_end).abs() > 1e-9 * t_end {
        return Err(Error::Argument(format!("t_end = {t_end} is not a multiple of dt = {dt}")));
    }
    let eu = matrix_exp(lu, dt)?;
    let ev = matrix_exp(lv, dt)?;
    let n = init.u.len();
    let mut path_u: Vec<Array1<f64>> = vec![init.u.clone(); steps + 1];
    let mut path_v: Vec<Array1<f64>> = vec![init.v.clone(); steps + 1];
    let mut increments = Vec::with_capacity(iterations);
    let mut fu = vec![0.0; n];
    let mut gv = vec![0.0; n];
    let mut forcing = |u: &Array1<f64>, v: &Array1<f64>| -> Result<(Array1<f64>, Array1<f64>)> {
        model.eval_into(
            u.as_slice().expect("contiguous"),
            v.as_slice().expect("contiguous"),
            &mut fu,
            &mut gv,
        )?;
        Ok((Array1::from_vec(fu.clone()), Array1::from_vec(gv.clone())))
    };
    for k in 1..=iterations {
        let forces: Vec<(Array1<f64>, Array1<f64>)> = path_u
            .iter()
            .zip(&path_v)
            .map(|(u, v)| forcing(u, v))
            .collect::<Result<_>>()?;
        let mut new_u = Vec::with_capacity(steps + 1);
        let mut new_v = Vec::with_capacity(steps + 1);
        new_u.push(init.u.clone());
        new_v.push(init.v.clone());
        for i in 0..steps {
            let (f0, g0) = &forces[i];
            let (f1, g1) = &forces[i + 1];
            let u = eu.dot(&(&new_u[i] + &(f0 * (dt / 2.0)))) + f1 * (dt / 2.0);
            let v = ev.dot(&(&new_v[i] + &(g0 * (dt / 2.0)))) + g1 * (dt / 2.0);
            if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("Picard iterate"));
            }
            new_u.push(u);
            new_v.push(v);
        }
        let inc = sup_distance(&new_u, &path_u).max(sup_distance(&new_v, &path_v));
        if let Some(&prev) = increments.last() {
            // growth above the rounding floor means the map is not contracting
            if k > 2 && inc > prev && inc > 1e-12 {
                return Err(Error::PicardDiverges { prev, next: inc });
            }
        }
        increments.push(inc);
        path_u = new_u;
        path_v = new_v;
    }
    let deviation = match reference {
        None => None,
        Some(r) => {
            if r.states.len() != steps + 1 {
                return Err(Error::Dimension {
                    expected: steps + 1,
                    got: r.states.len(),
                });
            }
            let mut worst = 0.0f64;
            for (i, s) in r.states.iter().enumerate() {
                let du = (&s.u - &path_u[i]).iter().fold(0.0f64, |m, x| m.max(x.abs()));
                let dv = (&s.v - &path_v[i]).iter().fold(0.0f64, |m, x| m.max(x.abs()));
                worst = worst.max(du).max(dv);
            }
            Some(worst)
        }
    };
    let strictly_decreasing = increments.windows(2).all(|w| w[1] < w[0]);
    Ok(PicardReport {
        iterations,
        dt,
        t_end,
        increments,
        deviation,
        strictly_decreasing,
    })
}

fn sup_distance(a: &[Array1<f64>], b: &[Array1<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).iter().fold(0.0f64, |m, z| m.max(z.abs())))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{brusselator, parse_kinetics};
    use crate::network::{embed, refine, Graph};
    use crate::operator::{build_full_level, digit_weight, project};
    use crate::simulate::{diffusion_pair, initial_condition, integrate, IntegrateOptions, Integrator, Perturbation};
    use std::collections::BTreeMap;

    #[test]
    fn linear_kinetics_converge_to_closed_form() {
        let g = refine(&embed(&Graph::complete(4), None, None).unwrap(), 3).unwrap();
        let m = parse_kinetics("-u", "-v", BTreeMap::new(), None).unwrap();
        let (lu, lv) = diffusion_pair(&g, 0.5, 2.0);
        let init = SimState {
            t: 0.0,
            u: project(&g, digit_weight),
            v: project(&g, |x| 2.0 * digit_weight(x)),
        };
        let report = picard_verify(&m, &lu, &lv, &init, 1e-3, 0.5, 12, None).unwrap();
        assert!(report.strictly_decreasing);
        // closed form e^{t(εL - Id)}
        let l = build_full_level(&g).entries;
        let id = Array2::<f64>::eye(g.len());
        let exact_u = matrix_exp(&(&l * 0.5 - &id), 0.5).unwrap().dot(&init.u);
        let exact_v = matrix_exp(&(&l * 1.0 - &id), 0.5).unwrap().dot(&init.v);
        let closed = SimState {
            t: 0.5,
            u: exact_u,
            v: exact_v,
        };
        let reference = integrate(
            &m,
            &lu,
            &lv,
            &init,
            &IntegrateOptions {
                integrator: Integrator::Rk4,
                dt: 1e-3,
                t_end: 0.5,
                stride: 1,
                validity: None,
            },
        )
        .unwrap();
        assert!(reference.last().distance(&closed) <= 1e-10);
        let report = picard_verify(&m, &lu, &lv, &init, 1e-3, 0.5, 12, Some(&reference)).unwrap();
        assert!(report.deviation.unwrap() <= 1e-6);
    }

    #[test]
    fn brusselator_increments_contract() {
        let g = refine(&embed(&Graph::complete(4), None, None).unwrap(), 2).unwrap();
        let m = brusselator(2.0, 3.0).unwrap();
        let (lu, lv) = diffusion_pair(&g, 0.3, 1.0);
        let init = initial_condition(&g, (2.0, 1.5), &Perturbation::Uniform { delta: 0.1 }, 5, None).unwrap();
        let r = picard_verify(&m, &lu, &lv, &init, 1e-3, 0.1, 2, None).unwrap();
        assert!(r.increments[1] < r.increments[0]);
        assert!(picard_verify(&m, &lu, &lv, &init, 1e-3, 0.1005, 2, None).is_err());
    }
}
