//! Turns a random adversary for the hidden-symbol problem into a uniform one
//! and shows how the norms move.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tarski_adversary::adversary::{hilbert_tile, random_adversary, symmetrize};
use tarski_adversary::lab::check_symmetrized;
use tarski_adversary::problems::make_hsos;

fn main() {
    let m = 3;
    let tile = hilbert_tile(m).unwrap();
    let p = Arc::new(make_hsos(m).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for draw in 0..3 {
        let g = random_adversary(p.clone(), &mut rng).unwrap();
        let s = symmetrize(&g, &tile.labeling).unwrap();
        let c = check_symmetrized(&g, &tile).unwrap();
        println!(
            "draw {draw}: scale {:.4}, dropped rows {:?}, uniform {}, ‖Γ‖ {:.4} → {:.4}, max ‖Γ'∘D‖ {:.4}",
            s.scale, s.dropped, c.uniform, c.norm_before, c.norm_after, c.max_masked
        );
    }
}
