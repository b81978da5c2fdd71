//! Norms of the Hilbert-type tile matrix and its masked variants.
//!
//! `cargo run --example spectral_norms -- 64`

use tarski_adversary::adversary::{hilbert_distinguisher, hilbert_matrix};
use tarski_adversary::lab::harmonic_half;
use tarski_adversary::spectral::{hadamard, spectral_norm, DEFAULT_TOL};

fn main() {
    let m: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(64);
    let a = hilbert_matrix(m);
    let full = spectral_norm(&a, DEFAULT_TOL).expect("norm");
    println!("m = {m}");
    println!(
        "‖A‖            = {:.6}  (harmonic lower bound {:.6})",
        full.norm,
        harmonic_half(m)
    );
    println!("Lanczos steps  = {}", full.iterations);

    let masked: Vec<f64> = (1..=m)
        .map(|i| {
            let d = hilbert_distinguisher(m, i);
            spectral_norm(&hadamard(&a, &d).unwrap(), DEFAULT_TOL)
                .unwrap()
                .norm
        })
        .collect();
    let (worst_i, worst) = masked
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, v)| (i + 1, *v))
        .unwrap();
    println!(
        "max_i ‖A∘D_i‖  = {worst:.6} at i = {worst_i}  (2π = {:.6})",
        2.0 * std::f64::consts::PI
    );
    println!("ratio          = {:.6}", full.norm / worst);
}
