//! Run configuration: a TOML document whose keys mirror the command-line
//! flags. Flags win over the file; unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Deserialize;

use padicnet::kinetics::{brusselator, cima, parse_kinetics, KineticsModel, ValidityBox};
use padicnet::network::load_graph;
use padicnet::simulate::{Datum, Integrator, ModeSpec};
use padicnet::{embed, Graph, NetworkEmbedding};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Brusselator,
    Cima,
    Custom,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Edge list, JSON graph document, or `complete:n` / `path:n` / `cycle:n`.
    pub graph: Option<String>,
    pub p: Option<u32>,
    #[serde(rename = "N")]
    pub level: Option<usize>,
    #[serde(rename = "M")]
    pub levels: Option<Vec<usize>>,
    pub eps: Option<f64>,
    pub d: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub kinetics: KineticsSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub converge: ConvergeSection,
    #[serde(default)]
    pub replica: ReplicaSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticsSection {
    pub model: Option<ModelKind>,
    #[serde(rename = "A")]
    pub a: Option<f64>,
    #[serde(rename = "B")]
    pub b: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub f: Option<String>,
    pub g: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// `[a, b]`: the box `(a, b)²`.
    pub validity: Option<[f64; 2]>,
    /// Starting point of the steady-state search for custom kinetics.
    pub guess: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub integrator: Option<Integrator>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub stride: Option<usize>,
    /// Size of the perturbation.
    pub delta: Option<f64>,
    /// Perturb along one eigenvector instead of uniform noise.
    pub mode: Option<ModeSpec>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSection {
    pub datum: Option<Datum>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicaSection {
    pub times: Option<Vec<f64>>,
}

/// Flag values that override the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub graph: Option<String>,
    pub p: Option<u32>,
    pub level: Option<usize>,
    pub levels: Option<Vec<usize>>,
    pub model: Option<ModelKind>,
    pub eps: Option<f64>,
    pub d: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        // relative paths inside the file are relative to the file
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(g) = &config.graph {
            if builtin_graph(g).is_none() && Path::new(g).is_relative() {
                config.graph = Some(base.join(g).to_string_lossy().into_owned());
            }
        }
        if let Some(out) = &config.out {
            if out.is_relative() {
                config.out = Some(base.join(out));
            }
        }
        Ok(config)
    }

    /// Applies flag overrides, then validates.
    pub fn merge(mut self, o: Overrides) -> CliResult<Self> {
        macro_rules! take {
            ($($field:ident),*) => { $( if o.$field.is_some() { self.$field = o.$field; } )* };
        }
        take!(graph, p, level, levels, eps, d, seed, out);
        if o.model.is_some() {
            self.kinetics.model = o.model;
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> CliResult<()> {
        let positive = |name: &str, x: Option<f64>| match x {
            Some(v) if !(v > 0.0 && v.is_finite()) => Err(CliError::Config(format!("{name} must be positive, got {v}"))),
            _ => Ok(()),
        };
        positive("eps", self.eps)?;
        positive("d", self.d)?;
        positive("simulate.dt", self.simulate.dt)?;
        positive("converge.dt", self.converge.dt)?;
        if let Some(t) = self.simulate.t_end {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(CliError::Config(format!("simulate.t_end must be non-negative, got {t}")));
            }
        }
        if let Some(d) = self.simulate.delta {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(CliError::Config(format!("simulate.delta must be non-negative, got {d}")));
            }
        }
        if self.simulate.stride == Some(0) {
            return Err(CliError::Config("simulate.stride must be at least 1".into()));
        }
        if self.converge.samples == Some(0) {
            return Err(CliError::Config("converge.samples must be at least 1".into()));
        }
        if let Some(levels) = &self.levels {
            if levels.is_empty() {
                return Err(CliError::Config("M must list at least one level".into()));
            }
        }
        let k = &self.kinetics;
        if self.model() != ModelKind::Custom && (k.f.is_some() || k.g.is_some() || !k.params.is_empty()) {
            return Err(CliError::Config("kinetics.f, g and params apply only to the custom model".into()));
        }
        if self.model() == ModelKind::Custom && (k.a.is_some() || k.b.is_some() || k.c.is_some()) {
            return Err(CliError::Config("kinetics.A, B, C apply only to built-in models".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> ModelKind {
        self.kinetics.model.unwrap_or(ModelKind::Brusselator)
    }

    pub fn epsilon(&self) -> f64 {
        self.eps.unwrap_or(0.3)
    }

    /// Diffusion ratio; the built-in defaults are the demonstration values
    /// of each model.
    pub fn diffusion_ratio(&self) -> f64 {
        self.d.unwrap_or(match self.model() {
            ModelKind::Brusselator => 9.0,
            ModelKind::Cima | ModelKind::Custom => 1.0,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn embedding(&self) -> CliResult<NetworkEmbedding> {
        let source = self
            .graph
            .as_deref()
            .ok_or_else(|| CliError::Config("no graph given (use --graph or `graph = ...`)".into()))?;
        let (graph, p, level) = match builtin_graph(source) {
            Some(g) => (g?, None, None),
            None => {
                let text = std::fs::read_to_string(source).map_err(|e| CliError::io(source, e))?;
                let loaded = load_graph(&text, true)?;
                (loaded.graph, loaded.p, loaded.level)
            }
        };
        Ok(embed(&graph, self.p.or(p), self.level.or(level))?)
    }

    /// The `M` list, or `default` when none was given.
    pub fn levels_or(&self, default: Vec<usize>) -> Vec<usize> {
        self.levels.clone().unwrap_or(default)
    }

    /// The kinetics and their steady state.
    pub fn kinetics(&self) -> CliResult<(KineticsModel, (f64, f64))> {
        let k = &self.kinetics;
        let model = match self.model() {
            ModelKind::Brusselator => brusselator(k.a.unwrap_or(2.0), k.b.unwrap_or(4.5))?,
            ModelKind::Cima => cima(k.a.unwrap_or(10.0), k.b.unwrap_or(2.0), k.c.unwrap_or(1.0))?,
            ModelKind::Custom => {
                let (Some(f), Some(g)) = (&k.f, &k.g) else {
                    return Err(CliError::Config("the custom model needs kinetics.f and kinetics.g".into()));
                };
                parse_kinetics(f, g, k.params.clone(), k.validity.map(|[a, b]| (a, b)))?
            }
        };
        let model = match (self.model(), k.validity) {
            (ModelKind::Custom, _) | (_, None) => model,
            (_, Some([a, b])) => model.with_validity(ValidityBox::square(a, b)?),
        };
        let steady = model.steady_state(k.guess.map(|[u, v]| (u, v)))?;
        Ok((model, steady))
    }
}

fn builtin_graph(spec: &str) -> Option<CliResult<Graph>> {
    let (family, size) = spec.split_once(':')?;
    let build: fn(usize) -> Graph = match family {
        "complete" => Graph::complete,
        "path" => Graph::path,
        "cycle" => Graph::cycle,
        _ => return None,
    };
    Some(match size.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(build(n)),
        _ => Err(CliError::Config(format!("`{spec}`: expected a positive vertex count"))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("grpah = \"k4.txt\"").is_err());
        assert!(toml::from_str::<RunConfig>("[simulate]\nt_end = 1\nwat = 2").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file: RunConfig = toml::from_str("graph = \"complete:4\"\neps = 0.5\nd = 2.0").unwrap();
        let merged = file
            .merge(Overrides {
                d: Some(7.0),
                ..Default::default()
            })
            .unwrap();
        assert_eq!(merged.epsilon(), 0.5);
        assert_eq!(merged.diffusion_ratio(), 7.0);
        assert_eq!(merged.embedding().unwrap().n(), 4);
    }

    #[test]
    fn model_defaults_and_conflicts() {
        let c = RunConfig::default().merge(Overrides::default()).unwrap();
        let (_, steady) = c.kinetics().unwrap();
        assert_eq!(steady, (2.0, 2.25));
        let bad: RunConfig = toml::from_str("[kinetics]\nmodel = \"brusselator\"\nf = \"u\"").unwrap();
        assert!(bad.merge(Overrides::default()).is_err());
        let custom: RunConfig = toml::from_str("[kinetics]\nmodel = \"custom\"").unwrap();
        assert!(custom.merge(Overrides::default()).unwrap().kinetics().is_err());
        assert!(RunConfig::default()
            .merge(Overrides {
                eps: Some(-1.0),
                ..Default::default()
            })
            .is_err());
    }

    #[test]
    fn builtin_graphs() {
        assert_eq!(builtin_graph("path:3").unwrap().unwrap().n(), 3);
        assert!(builtin_graph("path:0").unwrap().is_err());
        assert!(builtin_graph("k4.txt").is_none());
    }
}
