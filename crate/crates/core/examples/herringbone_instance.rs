//! Builds one herringbone instance and draws its spine and fixed point.
//!
//! `cargo run --example herringbone_instance -- 2 1,2,1 2`

use tarski_adversary::herringbone::{build_instance, chunked_spine, v, SpineGeometry};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(2);
    let c: Vec<usize> = match args.get(1) {
        Some(s) => s.split(',').map(|t| t.parse().expect("C entry")).collect(),
        None => vec![1; n + 1],
    };
    let i: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);

    let geo = SpineGeometry::new(n).unwrap();
    let spine = chunked_spine(&geo, &c).unwrap();
    let t = build_instance(&geo, &c, i).unwrap();
    println!(
        "n = {n}, side = {}, C = {c:?}, i = {i}, fixed point {}",
        geo.n_prime, t.fixed_point
    );

    // Rows printed top-down: '*' fixed point, 'o' spine, arrows show f.
    for y in (1..=geo.n_prime).rev() {
        let row: String = (1..=geo.n_prime)
            .map(|x| {
                let p = v(x, y);
                let out = t.f.eval(&p.as_vec());
                if p == t.fixed_point {
                    '*'
                } else if spine.contains(p) {
                    'o'
                } else if out[0] > x {
                    '\\'
                } else {
                    '/'
                }
            })
            .collect();
        println!("{y:>3} {row}");
    }
}
