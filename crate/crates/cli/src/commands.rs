use std::fs;
use std::path::PathBuf;

use clap::ValueEnum;
use serde::Serialize;

use padicnet::operator::{
    build_full_level, build_graph_laplacian, build_replica_block, build_replica_full, build_scaled_lambda,
    check_semigroup, OperatorMatrix,
};
use padicnet::simulate::{
    convergence_study, pattern_report, replica_compare, simulate, Datum, ModeKind, Perturbation, RunStatus,
    SimConfig,
};
use padicnet::spectral::{
    spectrum_graph, spectrum_l_infinity, spectrum_level_computed, spectrum_level_predicted, EigenvalueEntry,
    SpectrumDocument,
};
use padicnet::turing::{turing_check, Space, Verdict};
use padicnet::{refine, Error};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Six significant digits, for tables meant to be read.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    // the exponent after rounding, so 0.09999999 counts as 0.1
    let sci = format!("{x:.5e}");
    let mag: i32 = sci[sci.find('e').expect("exponent") + 1..].parse().expect("integer exponent");
    if (-4..6).contains(&mag) {
        format!("{:.*}", (5 - mag).max(0) as usize, x)
    } else {
        sci
    }
}

fn entries_line(entries: &[EigenvalueEntry]) -> String {
    entries
        .iter()
        .map(|e| format!("{} (x{})", sig6(e.value), e.multiplicity))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Where documents go; nothing is written without `--out`.
pub struct Output {
    dir: Option<PathBuf>,
}

impl Output {
    pub fn new(dir: Option<PathBuf>) -> CliResult<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).map_err(|e| CliError::io(d, e))?;
        }
        Ok(Self { dir })
    }

    fn write_text(&self, name: &str, text: &str) -> CliResult<()> {
        if let Some(dir) = &self.dir {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
            log::info!("wrote {}", path.display());
        }
        Ok(())
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
        text.push('\n');
        self.write_text(name, &text)
    }
}

#[derive(Serialize)]
struct VertexRow {
    index: usize,
    label: Option<String>,
    code: String,
    degree: u32,
}

#[derive(Serialize)]
struct EmbedDocument {
    p: u32,
    #[serde(rename = "N")]
    level: usize,
    n: usize,
    edges: usize,
    components: usize,
    vertices: Vec<VertexRow>,
}

pub fn embed(cfg: &RunConfig, out: &Output) -> CliResult<()> {
    let emb = cfg.embedding()?;
    let graph = emb.graph();
    let labels = graph.labels();
    let vertices: Vec<VertexRow> = (0..emb.n())
        .map(|i| VertexRow {
            index: i,
            label: labels.map(|l| l[i].clone()),
            code: emb.codes()[i].to_string(),
            degree: emb.degrees()[i],
        })
        .collect();
    println!("p = {}, N = {}, n = {}", emb.p(), emb.level(), emb.n());
    println!("{:>6}  {:>10}  {:>6}  label", "vertex", "code", "degree");
    for v in &vertices {
        println!(
            "{:>6}  {:>10}  {:>6}  {}",
            v.index,
            v.code,
            v.degree,
            v.label.as_deref().unwrap_or("-")
        );
    }
    out.write_json(
        "embedding.json",
        &EmbedDocument {
            p: emb.p(),
            level: emb.level(),
            n: emb.n(),
            edges: graph.edge_count(),
            components: graph.components(),
            vertices,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OperatorChoice {
    /// `L_N = A - Γ`.
    Graph,
    /// The level-`M` matrix.
    Full,
    /// The level-`M` matrix of the scaled family at `--lambda`.
    Scaled,
    ReplicaBlock,
    ReplicaFull,
}

pub fn operator(cfg: &RunConfig, out: &Output, kind: OperatorChoice, lambda: f64) -> CliResult<()> {
    let emb = cfg.embedding()?;
    let m = cfg.levels_or(vec![emb.level()])[0];
    let op: OperatorMatrix = match kind {
        OperatorChoice::Graph => build_graph_laplacian(&emb),
        OperatorChoice::Full => build_full_level(&refine(&emb, m)?),
        OperatorChoice::Scaled => build_scaled_lambda(&refine(&emb, m)?, lambda),
        OperatorChoice::ReplicaBlock => build_replica_block(&emb, m)?,
        OperatorChoice::ReplicaFull => build_replica_full(&emb, m)?,
    };
    let rows = op.entries.rows().into_iter().map(|r| r.sum().abs()).fold(0.0, f64::max);
    println!("kind = {}, level = {}, dimension = {}", op.kind, op.level, op.dim());
    println!("symmetric = {}, max |row sum| = {}", op.is_symmetric(), sig6(rows));
    let eps = cfg.epsilon();
    match check_semigroup(&op, eps, 1.0) {
        Ok(c) => println!(
            "e^(eps L) at eps = {}: max row-sum deviation {}, min entry {}",
            sig6(eps),
            sig6(c.max_row_sum_deviation),
            sig6(c.min_entry)
        ),
        Err(e) if e.is_numerical() => return Err(e.into()),
        Err(_) => {}
    }
    out.write_json("operator.json", &op.to_document())?;
    out.write_text("operator.csv", &op.to_csv())
}

#[derive(Serialize)]
struct LevelSpectra {
    #[serde(rename = "M")]
    level: usize,
    predicted: SpectrumDocument,
    computed: SpectrumDocument,
    max_deviation: f64,
}

#[derive(Serialize)]
struct SpectrumFile {
    graph: SpectrumDocument,
    #[serde(skip_serializing_if = "Option::is_none")]
    infinity: Option<SpectrumDocument>,
    levels: Vec<LevelSpectra>,
}

pub fn spectrum(cfg: &RunConfig, out: &Output, space: Option<Space>) -> CliResult<()> {
    let emb = cfg.embedding()?;
    let graph = spectrum_graph(&emb)?;
    println!("sigma(L_N)       : {}", entries_line(&graph.grouped()));
    let mut file = SpectrumFile {
        graph: graph.to_document(),
        infinity: None,
        levels: Vec::new(),
    };
    let mut levels = cfg.levels_or(Vec::new());
    match space {
        Some(Space::Infinity) => {
            let inf = spectrum_l_infinity(&emb)?;
            let distinct: Vec<String> = inf.nonzero_distinct().into_iter().map(sig6).collect();
            println!("sigma(L) \\ {{0}}   : {{{}}}", distinct.join(", "));
            if let Some(note) = &inf.note {
                println!("note: {note}");
            }
            file.infinity = Some(inf.to_document());
        }
        Some(Space::Level(m)) if !levels.contains(&m) => levels.push(m),
        _ => {}
    }
    for m in levels {
        let predicted = spectrum_level_predicted(&emb, m)?;
        let computed = spectrum_level_computed(&refine(&emb, m)?)?;
        let dev = predicted
            .max_deviation(&computed)
            .ok_or(Error::Dimension {
                expected: predicted.eigenvalues.len(),
                got: computed.eigenvalues.len(),
            })?;
        println!("M = {m} predicted : {}", entries_line(&predicted.grouped()));
        println!("M = {m} computed  : {}", entries_line(&computed.grouped()));
        println!("M = {m} max |predicted - computed| = {}", sig6(dev));
        file.levels.push(LevelSpectra {
            level: m,
            predicted: predicted.to_document(),
            computed: computed.to_document(),
            max_deviation: dev,
        });
    }
    out.write_json("spectrum.json", &file)
}

pub fn turing(cfg: &RunConfig, out: &Output) -> CliResult<()> {
    let emb = cfg.embedding()?;
    let (model, steady) = cfg.kinetics()?;
    let mut spaces = vec![Space::Level(emb.level())];
    for m in cfg.levels_or(Vec::new()) {
        if m != emb.level() {
            spaces.push(Space::Level(m));
        }
    }
    spaces.push(Space::Infinity);
    let report = turing_check(&model, steady, cfg.epsilon(), cfg.diffusion_ratio(), &emb, &spaces)?;
    println!(
        "{} at (u0, v0) = ({}, {}), eps = {}, d = {}",
        report.model,
        sig6(steady.0),
        sig6(steady.1),
        sig6(report.epsilon),
        sig6(report.d)
    );
    let c = &report.conditions;
    for (name, cond) in [("T1", c.t1), ("T2", c.t2), ("T3", c.t3), ("T4", c.t4), ("T5", c.t5)] {
        println!("  {name}  {:<5}  {}", cond.holds, sig6(cond.value));
    }
    match report.critical.as_ref().and_then(|c| c.d_c) {
        Some(dc) => println!("  d_c = {}", sig6(dc)),
        None => println!("  d_c: none"),
    }
    match report.band {
        Some(b) => println!("  band ({}, {})", sig6(b.kappa1), sig6(b.kappa2)),
        None => println!("  band: empty"),
    }
    for s in &report.spaces {
        let verdict = match s.verdict {
            Verdict::Pattern => "pattern",
            Verdict::NoPattern => "no pattern",
        };
        println!("{}: {verdict}", s.space);
        for m in &s.modes {
            println!(
                "    kappa {:>10} x{:<3} lambda+ {:>12}  {:?}",
                sig6(m.kappa),
                m.multiplicity,
                sig6(m.lambda_plus.re),
                m.status
            );
        }
        if let Some(a) = &s.annotation {
            println!("    note: {a}");
        }
    }
    out.write_json("turing.json", &report)
}

pub fn simulate_cmd(cfg: &RunConfig, out: &Output) -> CliResult<()> {
    let emb = cfg.embedding()?;
    let (model, steady) = cfg.kinetics()?;
    let level = cfg.levels_or(vec![emb.level()])[0];
    let grid = refine(&emb, level)?;
    let s = &cfg.simulate;
    let delta = s.delta.unwrap_or(1e-4);
    let perturbation = match s.mode {
        Some(mode) => Perturbation::Eigenmode {
            mode,
            amplitude: delta,
        },
        None => Perturbation::Uniform { delta },
    };
    let config = SimConfig {
        level,
        epsilon: cfg.epsilon(),
        d: cfg.diffusion_ratio(),
        integrator: s.integrator.unwrap_or_default(),
        dt: s.dt,
        t_end: s.t_end.unwrap_or(30.0),
        seed: cfg.seed(),
        perturbation,
        stride: s.stride.unwrap_or(10),
    };
    let traj = simulate(&model, steady, &grid, &config)?;
    out.write_text("trajectory.csv", &traj.to_csv(&grid))?;
    if let RunStatus::Halted { t_max, reason } = &traj.status {
        println!("halted at t = {}: {reason}", sig6(*t_max));
        return Err(Error::Integration {
            t: *t_max,
            reason: reason.clone(),
        }
        .into());
    }
    let width = model.validity_box(steady).width();
    let report = pattern_report(&grid, &traj, steady, delta, width)?;
    println!(
        "{} on X_{level}: {} states, dt = {}, t_end = {}",
        model.name(),
        traj.states.len(),
        sig6(traj.dt),
        sig6(config.t_end)
    );
    println!(
        "verdict {:?}: {} clusters, inter-ball {}, intra-ball {}",
        report.verdict,
        report.clusters,
        sig6(report.inter_ball_difference),
        sig6(report.intra_ball_spread)
    );
    println!("{:>6}  {:>8}  {:>4}  {:>12}  {:>10}", "group", "kappa", "dim", "final amp", "rate");
    for g in &report.modes {
        let kind = match g.kind {
            ModeKind::Graph => "graph",
            ModeKind::Wavelet => "wavelet",
        };
        println!(
            "{:>6}  {:>8}  {:>4}  {:>12}  {:>10}",
            kind,
            sig6(g.kappa),
            g.dimension,
            sig6(*g.amplitudes.last().unwrap_or(&0.0)),
            g.fit.map(|f| sig6(f.rate)).unwrap_or_else(|| "-".into())
        );
    }
    println!("note: {}", report.note);
    out.write_json("pattern.json", &report)
}

pub fn converge(cfg: &RunConfig, out: &Output) -> CliResult<()> {
    let emb = cfg.embedding()?;
    let (model, steady) = cfg.kinetics()?;
    let n = emb.level();
    let levels = cfg.levels_or((n..n + 4).collect());
    let c = &cfg.converge;
    let table = convergence_study(
        &model,
        steady,
        &emb,
        c.datum.unwrap_or(Datum::DigitWeight { amplitude: 0.5 }),
        &levels,
        cfg.epsilon(),
        cfg.diffusion_ratio(),
        c.dt.unwrap_or(1e-3),
        c.t_end.unwrap_or(2.0),
        c.samples.unwrap_or(20),
    )?;
    println!("{:>3}  {:>12}  {:>16}", "M", "gap", "projection error");
    let mut csv = String::from("M,gap,projection_error\n");
    for r in &table.rows {
        println!("{:>3}  {:>12}  {:>16}", r.level, sig6(r.gap), sig6(r.projection_error));
        csv.push_str(&format!(
            "{},{},{}\n",
            r.level,
            padicnet::operator::fmt_full(r.gap),
            padicnet::operator::fmt_full(r.projection_error)
        ));
    }
    println!("non-increasing (5% slack): {}", table.non_increasing);
    out.write_json("convergence.json", &table)?;
    out.write_text("convergence.csv", &csv)
}

pub fn replica(cfg: &RunConfig, out: &Output) -> CliResult<()> {
    let emb = cfg.embedding()?;
    let m = cfg.levels_or(vec![emb.level() + 1])[0];
    let times = cfg.replica.times.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0]);
    let r = replica_compare(&emb, m, cfg.epsilon(), &times)?;
    println!("full L_M spectrum    : {}", entries_line(&r.full_spectrum));
    println!("replica spectrum     : {}", entries_line(&r.replica_spectrum));
    for (t, dist) in r.times.iter().zip(&r.trajectory_distance) {
        println!("t = {:<6} trajectory distance {}", sig6(*t), sig6(*dist));
    }
    println!("nesting error {}", sig6(r.nesting_error));
    println!("{}", r.statement);
    out.write_json("replica.json", &r)
}

#[cfg(test)]
mod tests {
    use super::sig6;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(-4.0), "-4.00000");
        assert_eq!(sig6(1.1730623), "1.17306");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(0.000123456), "0.000123456");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(-0.09999999999), "-0.100000");
    }
}
