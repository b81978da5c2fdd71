//! Embeds a small instance into a larger lattice by clamping and solves it
//! there.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tarski_adversary::lattice::{clamp, clamp_embed, nested_solve, random_monotone, LatticeOracle};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let small = random_monotone(5, 2, &mut rng).unwrap();
    println!(
        "source fixed points on [5]^2: {:?}",
        small.brute_fixed_points()
    );

    let mut big = clamp_embed(&small, 12, 2).unwrap();
    println!("(9,2) clamps to {:?}", clamp(&[9, 2], 5, 2));
    println!("f∘clamp at (9,2) = {:?}", big.query(&[9, 2]));
    let big_table = big.materialize();
    big_table
        .check_monotone()
        .expect("embedding stays monotone");
    println!(
        "embedded fixed points on [12]^2: {:?}",
        big_table.brute_fixed_points()
    );

    let r = nested_solve(&mut clamp_embed(&small, 12, 2).unwrap()).unwrap();
    println!(
        "nested solver: {:?} after {} queries",
        r.fixed_point, r.queries_used
    );
}
