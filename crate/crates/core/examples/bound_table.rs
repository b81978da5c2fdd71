//! Prints the bound table for ordered search and the Tarski family.

use tarski_adversary::lab::{
    cmd_bound, default_sizes, render_rows, BoundProblem, BoundSize, Format,
};
use tarski_adversary::spectral::DEFAULT_TOL;

fn main() {
    let eps = 1.0 / 3.0;
    let os: Vec<BoundSize> = (1..=6).map(|k| BoundSize::M(1 << k)).collect();
    let mut rows = cmd_bound(BoundProblem::Os, &os, eps, DEFAULT_TOL, None).unwrap();
    let small_n: Vec<BoundSize> = default_sizes(BoundProblem::Tarski)
        .into_iter()
        .take(2)
        .collect();
    rows.extend(cmd_bound(BoundProblem::Tarski, &small_n, eps, DEFAULT_TOL, None).unwrap());
    print!(
        "{}",
        String::from_utf8(render_rows(&rows, Format::Csv).unwrap()).unwrap()
    );
}
