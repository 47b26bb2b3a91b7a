//! Reaction terms `(f, g)`: the Brusselator, the CIMA reaction and
//! user-supplied rational kinetics.

pub mod expr;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use expr::{Expr, Var};

/// Half-width of the default validity box around the steady state.
pub const DEFAULT_BOX_RADIUS: f64 = 10.0;

/// `[[f_u, f_v], [g_u, g_v]]`.
pub type Jacobian = [[f64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityBox {
    pub u: (f64, f64),
    pub v: (f64, f64),
}

impl ValidityBox {
    /// The square `(a, b)²`.
    pub fn square(a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::Argument(format!("validity box needs a < b, got ({a}, {b})")));
        }
        Ok(Self { u: (a, b), v: (a, b) })
    }

    pub fn around(u0: f64, v0: f64, radius: f64) -> Self {
        Self {
            u: (u0 - radius, u0 + radius),
            v: (v0 - radius, v0 + radius),
        }
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        self.u.0 < u && u < self.u.1 && self.v.0 < v && v < self.v.1
    }

    /// Smallest side length, the `b - a` of the growth-fit window.
    pub fn width(&self) -> f64 {
        (self.u.1 - self.u.0).min(self.v.1 - self.v.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Provenance {
    Brusselator { a: f64, b: f64 },
    Cima { a: f64, b: f64, c: f64 },
    Custom { f: String, g: String },
}

#[derive(Debug, Clone, PartialEq)]
struct CustomTerms {
    f: Expr,
    g: Expr,
    // [[f_u, f_v], [g_u, g_v]]
    jac: [[Expr; 2]; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct KineticsModel {
    provenance: Provenance,
    params: BTreeMap<String, f64>,
    validity: Option<ValidityBox>,
    custom: Option<CustomTerms>,
}

/// Hypothesis-1 gradient check at the steady state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub grad_f: [f64; 2],
    pub grad_g: [f64; 2],
    pub nonvanishing: bool,
}

fn require_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("parameter {name} must be positive, got {x}")))
    }
}

pub fn brusselator(a: f64, b: f64) -> Result<KineticsModel> {
    require_positive("A", a)?;
    require_positive("B", b)?;
    Ok(KineticsModel {
        provenance: Provenance::Brusselator { a, b },
        params: [("A".into(), a), ("B".into(), b)].into_iter().collect(),
        validity: None,
        custom: None,
    })
}

pub fn cima(a: f64, b: f64, c: f64) -> Result<KineticsModel> {
    require_positive("A", a)?;
    require_positive("B", b)?;
    require_positive("C", c)?;
    Ok(KineticsModel {
        provenance: Provenance::Cima { a, b, c },
        params: [("A".into(), a), ("B".into(), b), ("C".into(), c)]
            .into_iter()
            .collect(),
        validity: None,
        custom: None,
    })
}

/// User kinetics from expression strings. `validity` is the square `(a, b)²`.
pub fn parse_kinetics(
    expr_f: &str,
    expr_g: &str,
    params: BTreeMap<String, f64>,
    validity: Option<(f64, f64)>,
) -> Result<KineticsModel> {
    for (name, x) in &params {
        if !x.is_finite() {
            return Err(Error::Argument(format!("parameter {name} is not finite")));
        }
    }
    let f = Expr::parse_with_params(expr_f, &params)?;
    let g = Expr::parse_with_params(expr_g, &params)?;
    let jac = [
        [f.derivative(Var::U), f.derivative(Var::V)],
        [g.derivative(Var::U), g.derivative(Var::V)],
    ];
    let validity = validity.map(|(a, b)| ValidityBox::square(a, b)).transpose()?;
    Ok(KineticsModel {
        provenance: Provenance::Custom {
            f: expr_f.to_string(),
            g: expr_g.to_string(),
        },
        params,
        validity,
        custom: Some(CustomTerms { f, g, jac }),
    })
}

impl KineticsModel {
    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn name(&self) -> &'static str {
        match self.provenance {
            Provenance::Brusselator { .. } => "brusselator",
            Provenance::Cima { .. } => "cima",
            Provenance::Custom { .. } => "custom",
        }
    }

    pub fn with_validity(mut self, validity: ValidityBox) -> Self {
        self.validity = Some(validity);
        self
    }

    /// Configured box, or steady state ± [`DEFAULT_BOX_RADIUS`].
    pub fn validity_box(&self, steady: (f64, f64)) -> ValidityBox {
        self.validity
            .unwrap_or_else(|| ValidityBox::around(steady.0, steady.1, DEFAULT_BOX_RADIUS))
    }

    /// Symbolic Jacobian entries of a custom model, printed.
    pub fn jacobian_expressions(&self) -> Option<[[String; 2]; 2]> {
        self.custom.as_ref().map(|c| {
            [
                [c.jac[0][0].to_string(), c.jac[0][1].to_string()],
                [c.jac[1][0].to_string(), c.jac[1][1].to_string()],
            ]
        })
    }

    pub fn eval(&self, u: f64, v: f64) -> Result<(f64, f64)> {
        match (&self.provenance, &self.custom) {
            (Provenance::Brusselator { a, b }, _) => {
                let uuv = u * u * v;
                Ok((a - (b + 1.0) * u + uuv, b * u - uuv))
            }
            (Provenance::Cima { a, b, c }, _) => {
                let q = u * v / (1.0 + u * u);
                Ok((a - u - 4.0 * q, b * c * u - c * q))
            }
            (_, Some(t)) => Ok((t.f.eval(u, v, &self.params)?, t.g.eval(u, v, &self.params)?)),
            (Provenance::Custom { .. }, None) => unreachable!("custom model without terms"),
        }
    }

    /// Evaluates `(f, g)` sitewise into `out_f`, `out_g`.
    pub fn eval_into(&self, u: &[f64], v: &[f64], out_f: &mut [f64], out_g: &mut [f64]) -> Result<()> {
        for k in 0..u.len() {
            let (f, g) = self.eval(u[k], v[k])?;
            out_f[k] = f;
            out_g[k] = g;
        }
        Ok(())
    }

    pub fn jacobian(&self, u: f64, v: f64) -> Result<Jacobian> {
        match (&self.provenance, &self.custom) {
            (Provenance::Brusselator { b, .. }, _) => {
                Ok([[-(b + 1.0) + 2.0 * u * v, u * u], [b - 2.0 * u * v, -u * u]])
            }
            (Provenance::Cima { b, c, .. }, _) => {
                let den = 1.0 + u * u;
                let dq_du = v * (1.0 - u * u) / (den * den);
                let dq_dv = u / den;
                Ok([[-1.0 - 4.0 * dq_du, -4.0 * dq_dv], [b * c - c * dq_du, -c * dq_dv]])
            }
            (_, Some(t)) => {
                let e = |x: &Expr| x.eval(u, v, &self.params);
                Ok([[e(&t.jac[0][0])?, e(&t.jac[0][1])?], [e(&t.jac[1][0])?, e(&t.jac[1][1])?]])
            }
            (Provenance::Custom { .. }, None) => unreachable!("custom model without terms"),
        }
    }

    /// Homogeneous steady state: closed forms for the built-in models,
    /// damped Newton from `guess` for custom ones.
    pub fn steady_state(&self, guess: Option<(f64, f64)>) -> Result<(f64, f64)> {
        let state = match self.provenance {
            Provenance::Brusselator { a, b } => (a, b / a),
            Provenance::Cima { a, b, .. } => {
                let u0 = a / (4.0 * b + 1.0);
                (u0, b * (1.0 + u0 * u0))
            }
            Provenance::Custom { .. } => {
                let guess = guess.ok_or_else(|| {
                    Error::Argument("custom kinetics need an initial guess for the steady state".into())
                })?;
                self.newton(guess)?
            }
        };
        if let Some(b) = self.validity {
            if !b.contains(state.0, state.1) {
                return Err(Error::OutsideBox { u: state.0, v: state.1 });
            }
        }
        Ok(state)
    }

    fn newton(&self, (mut u, mut v): (f64, f64)) -> Result<(f64, f64)> {
        const TOL: f64 = 1e-12;
        const MAX_ITER: usize = 100;
        let residual = |u: f64, v: f64| -> Result<f64> {
            let (f, g) = self.eval(u, v)?;
            Ok(f.abs().max(g.abs()))
        };
        let mut r = residual(u, v)?;
        for _ in 0..MAX_ITER {
            if r <= TOL {
                return Ok((u, v));
            }
            let (f, g) = self.eval(u, v)?;
            let [[a, b], [c, d]] = self.jacobian(u, v)?;
            let det = a * d - b * c;
            if det == 0.0 || !det.is_finite() {
                return Err(Error::NoConvergence {
                    iterations: 0,
                    residual: r,
                });
            }
            let du = (d * f - b * g) / det;
            let dv = (a * g - c * f) / det;
            let mut step = 1.0;
            loop {
                let (nu, nv) = (u - step * du, v - step * dv);
                match residual(nu, nv) {
                    Ok(nr) if nr.is_finite() && (nr < r || step < 1e-10) => {
                        u = nu;
                        v = nv;
                        r = nr;
                        break;
                    }
                    _ if step < 1e-10 => {
                        return Err(Error::NoConvergence {
                            iterations: MAX_ITER,
                            residual: r,
                        })
                    }
                    _ => step *= 0.5,
                }
            }
        }
        if r <= TOL {
            Ok((u, v))
        } else {
            Err(Error::NoConvergence {
                iterations: MAX_ITER,
                residual: r,
            })
        }
    }

    /// `∇f` and `∇g` at the steady state; both must be non-zero.
    pub fn gradient_check(&self, steady: (f64, f64)) -> Result<GradientCheck> {
        let [[fu, fv], [gu, gv]] = self.jacobian(steady.0, steady.1)?;
        Ok(GradientCheck {
            grad_f: [fu, fv],
            grad_g: [gu, gv],
            nonvanishing: (fu != 0.0 || fv != 0.0) && (gu != 0.0 || gv != 0.0),
        })
    }
}

/// Central-difference Jacobian with step `h`.
pub fn finite_difference_jacobian(model: &KineticsModel, u: f64, v: f64, h: f64) -> Result<Jacobian> {
    let (fp, gp) = model.eval(u + h, v)?;
    let (fm, gm) = model.eval(u - h, v)?;
    let (fq, gq) = model.eval(u, v + h)?;
    let (fn_, gn) = model.eval(u, v - h)?;
    let s = 2.0 * h;
    Ok([[(fp - fm) / s, (fq - fn_) / s], [(gp - gm) / s, (gq - gn) / s]])
}
