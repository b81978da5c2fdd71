//! Composes an ordered-search adversary with Hilbert tiles and compares the
//! composed norm and bound with the product of the parts.

use tarski_adversary::adversary::{
    compose_adversary, hilbert_tile, os_adversary, sa_ratio, tile_ratio,
};
use tarski_adversary::spectral::{spectral_norm, DEFAULT_TOL};

fn main() {
    let eps = 1.0 / 3.0;
    println!(
        "{:>3} {:>3} {:>10} {:>10} {:>8} {:>8} {:>8}",
        "a", "b", "‖Γ_h‖", "product", "SA(f)", "ratio", "SA(h)"
    );
    for a in 2..=4 {
        for b in 2..=4 {
            let outer = os_adversary(a).unwrap();
            let tile = hilbert_tile(b).unwrap();
            let h = compose_adversary(&outer, &vec![tile.clone(); a]).unwrap();
            let nh = spectral_norm(&h.matrix, DEFAULT_TOL).unwrap().norm;
            let nf = spectral_norm(&outer.matrix, DEFAULT_TOL).unwrap().norm;
            let nt = spectral_norm(&tile.matrix, DEFAULT_TOL).unwrap().norm;
            let sa_f = sa_ratio(&outer, eps).unwrap().sa_value;
            let (r, _) = tile_ratio(&tile, DEFAULT_TOL).unwrap();
            let sa_h = sa_ratio(&h, eps).unwrap().sa_value;
            println!(
                "{a:>3} {b:>3} {nh:>10.5} {:>10.5} {sa_f:>8.4} {r:>8.4} {sa_h:>8.4}",
                nf * nt.powi(a as i32)
            );
        }
    }
}
