//! Classifies grid points and prints the covering set each one gets.

use tarski_adversary::herringbone::{
    build_family, classify, covering_set, covering_violation, v, SpineGeometry,
};

fn main() {
    let geo = SpineGeometry::new(3).unwrap();
    let fam = build_family(&geo).unwrap();
    for p in [
        v(1, 1),
        v(2, 3),
        v(5, 4),
        v(9, 7),
        v(12, 10),
        v(20, 3),
        v(33, 33),
    ] {
        let case = classify(&geo, p).unwrap();
        let cover = covering_set(&geo, p).unwrap();
        let shown: Vec<String> = cover.iter().map(|w| w.to_string()).collect();
        let ok = covering_violation(&fam, p, &cover).is_none();
        println!(
            "{p:>8}  {case:?}\n          V = {{{}}}  covers: {ok}",
            shown.join(", ")
        );
    }
}
