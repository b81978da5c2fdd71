use num_rational::{BigRational, Rational64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tarski_adversary::herringbone::{
    grid_line, round_half_up, thresholds, v, Endpoint, SpineGeometry, Vertex,
};
use tarski_adversary::lattice::{clamp_embed, random_monotone, LatticeOracle};
use tarski_adversary::problems::{
    detect_search_labeling, distinguisher, make_hsos, make_nos, Cell,
};
use tarski_adversary::spectral::{hadamard, spectral_norm, tensor, LabeledMatrix};

fn sym_matrix(max_dim: usize) -> impl Strategy<Value = LabeledMatrix> {
    (1..=max_dim).prop_flat_map(|d| {
        prop::collection::vec(0.0f64..1.0, d * (d + 1) / 2).prop_map(move |tri| {
            let mut e = vec![0.0; d * d];
            let mut k = 0;
            for i in 0..d {
                for j in i..d {
                    e[i * d + j] = tri[k];
                    e[j * d + i] = tri[k];
                    k += 1;
                }
            }
            LabeledMatrix::new((0..d).map(|i| vec![i as u8]).collect(), e).unwrap()
        })
    })
}

fn same_dim_pair(
    max_dim: usize,
) -> impl Strategy<Value = (LabeledMatrix, LabeledMatrix, LabeledMatrix)> {
    (1..=max_dim).prop_flat_map(|d| {
        (
            sym_matrix_exact(d),
            sym_matrix_exact(d),
            sym_matrix_exact(d),
        )
    })
}

fn sym_matrix_exact(d: usize) -> impl Strategy<Value = LabeledMatrix> {
    prop::collection::vec(0.0f64..1.0, d * d).prop_map(move |raw| {
        LabeledMatrix::from_fn((0..d).map(|i| vec![i as u8]).collect(), |i, j| {
            raw[i.min(j) * d + i.max(j)]
        })
        .unwrap()
    })
}

fn norm(m: &LabeledMatrix) -> f64 {
    spectral_norm(m, 1e-11).unwrap().norm
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn tensor_norm_is_multiplicative(a in sym_matrix(12), b in sym_matrix(12)) {
        let t = tensor(&a, &b).unwrap();
        let (na, nb, nt) = (norm(&a), norm(&b), norm(&t));
        prop_assert!((nt - na * nb).abs() <= 1e-8 * nt.max(1e-300), "{nt} vs {}", na * nb);
    }

    #[test]
    fn hadamard_algebra((a, b, c) in same_dim_pair(8)) {
        let ab = hadamard(&a, &b).unwrap();
        let ba = hadamard(&b, &a).unwrap();
        prop_assert_eq!(ab.entries(), ba.entries());
        let q = |m: &LabeledMatrix| m.map(|&x| BigRational::from_float(x).unwrap());
        let (qa, qb, qc) = (q(&a), q(&b), q(&c));
        let l = hadamard(&hadamard(&qa, &qb).unwrap(), &qc).unwrap();
        let r = hadamard(&qa, &hadamard(&qb, &qc).unwrap()).unwrap();
        prop_assert_eq!(l.entries(), r.entries());
    }

    #[test]
    fn hadamard_is_monotone((a, b, c) in same_dim_pair(8)) {
        // b ≤ b + c elementwise.
        let bigger = LabeledMatrix::new(
            b.labels().to_vec(),
            b.entries().iter().zip(c.entries()).map(|(x, y)| x + y).collect(),
        ).unwrap();
        let small = norm(&hadamard(&a, &b).unwrap());
        let large = norm(&hadamard(&a, &bigger).unwrap());
        prop_assert!(small <= large + 1e-9 * large.max(1.0));
    }

    #[test]
    fn norm_bounds_every_rayleigh_quotient(a in sym_matrix(16), seed in any::<u64>()) {
        let d = a.dim();
        let ones = vec![1.0; d];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let probe: Vec<f64> = (0..d).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
        let n = norm(&a);
        for x in [ones, probe] {
            if x.iter().any(|&t| t != 0.0) {
                prop_assert!(a.rayleigh(&x) <= n + 1e-9 * n.max(1.0));
            }
        }
    }

    #[test]
    fn grid_lines_are_monotone_paths(ux in 1usize..30, uy in 1usize..30, dx in 0usize..30, dy in 0usize..30) {
        let (u, e) = (v(ux, uy), v(ux + dx, uy + dy));
        let line = grid_line(u, e).unwrap();
        prop_assert_eq!(line.points.first(), Some(&u));
        prop_assert_eq!(line.points.last(), Some(&e));
        prop_assert_eq!(line.points.len(), dx + dy + 1);
        for w in line.points.windows(2) {
            let step = (w[1].x - w[0].x, w[1].y - w[0].y);
            prop_assert!(step == (1, 0) || step == (0, 1));
        }
    }

    #[test]
    fn grid_lines_stay_in_their_box(ux in 1usize..30, uy in 1usize..30, dx in 0usize..30, dy in 0usize..30) {
        let (u, e) = (v(ux, uy), v(ux + dx, uy + dy));
        for p in grid_line(u, e).unwrap().points {
            prop_assert!(u.leq(p) && p.leq(e));
        }
    }

    #[test]
    fn rounding_matches_float_rounding(p in -1000i64..1000, q in 1i64..50) {
        let exact = round_half_up(Rational64::new(p, q));
        let float = (p as f64 / q as f64 + 0.5).floor() as i64;
        prop_assert_eq!(exact, float);
    }

    #[test]
    fn threshold_quads_are_ordered(t in 0usize..4, k in 0usize..7) {
        let geo = SpineGeometry::new(3).unwrap();
        let lo = geo.low(1, 1) + 4 * t;
        let (u, s2) = (geo.boundary(lo)[1], geo.boundary(lo + 8));
        let c = lo + 4;
        let x = c / 2 + k - 3;
        let p = v(x, c - x);
        prop_assume!(geo.in_tube(p));
        let cands: Vec<Vertex> = s2.into_iter().filter(|e| u.leq(*e)).collect();
        let q = thresholds(Endpoint::Start(u), &cands, p).unwrap();
        prop_assert!(q.d1 <= q.d2 && q.d2 <= q.d4 && q.d1 <= q.d3 && q.d3 <= q.d4);
    }
}

#[test]
fn clamp_embedding_preserves_monotonicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let k = if rand::Rng::gen_bool(&mut rng, 0.5) {
            1
        } else {
            2
        };
        let f = random_monotone(4, k, &mut rng).unwrap();
        let g = clamp_embed(&f, 6, 2).unwrap().materialize();
        assert!(g.check_monotone().is_ok());
        assert_eq!(g.side(), 6);
    }
}

#[test]
fn oracle_counts_repeated_queries() {
    let f = random_monotone(5, 2, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let mut o = clamp_embed(&f, 7, 2).unwrap();
    for _ in 0..3 {
        o.query(&[6, 6]);
    }
    assert_eq!(o.queries(), 3);
}

#[test]
fn distinguishers_are_symmetric_zero_one_with_zero_diagonal() {
    for (a, b) in [(2, 2), (2, 3), (3, 2), (3, 3)] {
        let p = make_nos(a, b).unwrap();
        for i in 1..=p.length {
            let d = distinguisher(&p, i).unwrap();
            for x in 0..d.dim() {
                assert_eq!(*d.get(x, x), 0.0);
                for y in 0..d.dim() {
                    let e = *d.get(x, y);
                    assert!(e == 0.0 || e == 1.0);
                    assert_eq!(e, *d.get(y, x));
                }
            }
        }
    }
}

#[test]
fn nested_positions_read_the_block_characters() {
    for (a, b) in [(2, 2), (3, 3), (4, 2)] {
        let p = make_nos(a, b).unwrap();
        for x in &p.instances {
            let parts = x.parts.as_ref().unwrap();
            let inner = make_hsos(b).unwrap();
            for blk in 1..=a {
                for q in 1..=b {
                    let i = p.position_of(blk, q);
                    assert_eq!(i, (blk - 1) * b + q);
                    assert_eq!(
                        x.chars[i - 1],
                        inner.instances[parts.inner[blk - 1]].chars[q - 1]
                    );
                }
            }
        }
    }
}

#[test]
fn hidden_symbol_search_labelings_satisfy_both_conditions() {
    for m in 1..=8 {
        let p = make_hsos(m).unwrap();
        let lab = detect_search_labeling(&p).unwrap();
        assert_eq!(lab.variants, m);
        // Same-answer pairs agree or differ uniformly across answers.
        for i in 0..p.length {
            for a in 0..m {
                for b in 0..m {
                    let same = lab.same[i][a][b];
                    let cross = lab.cross[i][a][b];
                    for s1 in 0..3 {
                        for s2 in 0..3 {
                            let (x, y) = (lab.instance_of[s1][a], lab.instance_of[s2][b]);
                            let eq = p.instances[x].chars[i] == p.instances[y].chars[i];
                            let want = if s1 == s2 { same } else { cross };
                            if want != Cell::Undefined {
                                assert_eq!(eq, want == Cell::Equal, "m={m} i={i} a={a} b={b}");
                            }
                        }
                    }
                }
            }
        }
    }
}
