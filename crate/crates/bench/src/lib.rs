//! Fixtures shared by the benchmarks.

use padicnet::kinetics::{brusselator, KineticsModel};
use padicnet::{embed, refine, Graph, LevelGrid};

/// `K_n` refined to level `m`.
pub fn complete_grid(n: usize, m: usize) -> LevelGrid {
    let emb = embed(&Graph::complete(n), None, None).expect("complete graphs embed");
    refine(&emb, m).expect("level at least N")
}

/// Brusselator inside the Turing band, with its steady state.
pub fn unstable_brusselator() -> (KineticsModel, (f64, f64)) {
    (brusselator(2.0, 4.5).expect("positive parameters"), (2.0, 2.25))
}
