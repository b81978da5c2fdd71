//! Runs the nested binary-search solver and brute force on every instance
//! of a small family and reports query counts.

use tarski_adversary::herringbone::{build_family, SpineGeometry};
use tarski_adversary::lab::nested_query_budget;
use tarski_adversary::lattice::{brute_solve, nested_solve, TableOracle};

fn main() {
    for n in 2..=3 {
        let geo = SpineGeometry::new(n).unwrap();
        let fam = build_family(&geo).unwrap();
        let mut counts = Vec::new();
        for t in &fam {
            let r = nested_solve(&mut TableOracle::new(&t.f)).unwrap();
            assert_eq!(r.fixed_point, t.fixed_point.as_vec());
            counts.push(r.queries_used);
        }
        let brute = brute_solve(&mut TableOracle::new(&fam[0].f)).unwrap();
        let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
        println!(
            "T({}): {} instances, nested queries min {} mean {mean:.1} max {} (budget {}), brute {}",
            geo.n_prime,
            fam.len(),
            counts.iter().min().unwrap(),
            counts.iter().max().unwrap(),
            nested_query_budget(geo.n_prime),
            brute.queries_used
        );
    }
}
