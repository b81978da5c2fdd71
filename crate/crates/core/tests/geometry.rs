use tarski_adversary::herringbone::*;
use tarski_adversary::problems::{distinguisher, make_nos};

#[test]
fn family_matches_nested_search_feedback() {
    for n in 2..=3 {
        let geo = SpineGeometry::new(n).unwrap();
        let fam = build_family(&geo).unwrap();
        let nos = make_nos(n + 1, n).unwrap();
        for i in 1..=n + 1 {
            for j in 1..=n {
                let dt = family_distinguisher(&geo, &fam, geo.chunk_point(i, j)).unwrap();
                let dn = distinguisher(&nos, nos.position_of(i, j)).unwrap();
                assert_eq!(dt.labels(), dn.labels());
                assert_eq!(dt.entries(), dn.entries(), "n={n} i={i} j={j}");
            }
        }
    }
}

#[test]
fn family_members_are_sound() {
    for n in 2..=3 {
        let geo = SpineGeometry::new(n).unwrap();
        for t in build_family(&geo).unwrap() {
            assert!(t.f.check_monotone().is_ok(), "{:?} {}", t.c, t.i);
            assert_eq!(t.f.brute_fixed_points(), vec![t.fixed_point.as_vec()]);
        }
    }
}

#[test]
fn covering_sets_cover_n2() {
    let geo = SpineGeometry::new(2).unwrap();
    let fam = build_family(&geo).unwrap();
    for x in 1..=geo.n_prime {
        for y in 1..=geo.n_prime {
            let p = v(x, y);
            let cov = covering_set(&geo, p).unwrap();
            assert!(cov.len() <= 7);
            assert_eq!(covering_violation(&fam, p, &cov), None, "{p} {cov:?}");
        }
    }
}

#[test]
fn covering_sets_cover_n3_everywhere() {
    let geo = SpineGeometry::new(3).unwrap();
    let fam = build_family(&geo).unwrap();
    let mut bad = vec![];
    for x in 1..=geo.n_prime {
        for y in 1..=geo.n_prime {
            let p = v(x, y);
            let cov = covering_set(&geo, p).unwrap();
            if covering_violation(&fam, p, &cov).is_some() {
                bad.push((p, classify(&geo, p).unwrap()));
            }
        }
    }
    assert!(bad.is_empty(), "{bad:?}");
}

#[test]
fn region_anchors_tile_the_tube_n2() {
    let geo = SpineGeometry::new(2).unwrap();
    let n = geo.n;
    let regions: Vec<(usize, usize)> = (1..=n)
        .flat_map(|i| (1..=n + 2).map(move |j| (i, j)))
        .collect();
    for x in 1..=geo.n_prime {
        for y in 1..=geo.n_prime {
            let w = v(x, y);
            if !geo.in_tube(w) || w.sum() < geo.bound(1) || w.sum() > geo.bound(n + 1) {
                continue;
            }
            let a = region_anchor(&geo, w).unwrap();
            assert!((1..=n).contains(&a.ell));
            let (lo, hi) = (geo.low(a.alpha, a.beta), geo.high(a.alpha, a.beta));
            assert!(lo <= w.sum() && w.sum() <= hi);
            for &(c1, d1) in &regions {
                for &(c2, d2) in &regions {
                    if geo.low(c1, d1) > lo || geo.high(c2, d2) < hi {
                        continue;
                    }
                    let u = geo.boundary_point(geo.low(c1, d1), a.ell).unwrap();
                    let e = geo.boundary_point(geo.high(c2, d2), a.ell).unwrap();
                    assert_eq!(line_point(u, e, w.sum()), w, "{w} via {u}→{e}");
                }
            }
        }
    }
}

#[test]
fn off_tube_points_are_constant_across_family() {
    for n in 2..=3 {
        let geo = SpineGeometry::new(n).unwrap();
        let fam = build_family(&geo).unwrap();
        for x in 1..=geo.n_prime {
            for y in 1..=geo.n_prime {
                let p = v(x, y);
                if classify(&geo, p).unwrap() == PointCase::OffTube {
                    let first = fam[0].f.eval(&[x, y]);
                    assert!(fam.iter().all(|t| t.f.eval(&[x, y]) == first), "{p}");
                }
            }
        }
    }
}

#[test]
fn grid_lines_slide_monotonically_n3() {
    let geo = SpineGeometry::new(3).unwrap();
    let sums: Vec<usize> = (0..=15).map(|t| 4 * t + 4).collect();
    for (ia, &ca) in sums.iter().enumerate() {
        for &cb in &sums[ia + 1..] {
            let (sa, sb) = (geo.boundary(ca), geo.boundary(cb));
            for &e in &sb {
                let us: Vec<Vertex> = sa.iter().copied().filter(|u| u.leq(e)).collect();
                for (u, u2) in us.iter().zip(us.iter().skip(1)) {
                    for c in ca..=cb {
                        assert!(line_point(*u, e, c).x <= line_point(*u2, e, c).x);
                    }
                }
            }
            for &u in &sa {
                let es: Vec<Vertex> = sb.iter().copied().filter(|e| u.leq(*e)).collect();
                for (e, e2) in es.iter().zip(es.iter().skip(1)) {
                    for c in ca..=cb {
                        assert!(line_point(u, *e, c).x <= line_point(u, *e2, c).x);
                    }
                }
            }
        }
    }
}

#[test]
fn threshold_bands_are_contiguous_in_first_chunk_n3() {
    let geo = SpineGeometry::new(3).unwrap();
    let n = geo.n;
    for beta in 1..=n + 2 {
        let (lo, hi) = (geo.low(1, beta), geo.high(1, beta));
        let s2 = geo.boundary(hi);
        for u in geo.boundary(lo) {
            let cands: Vec<Vertex> = s2.iter().copied().filter(|e| u.leq(*e)).collect();
            for c in lo..=hi {
                for x in 1..c {
                    let p = v(x, c - x);
                    if !geo.in_tube(p) {
                        continue;
                    }
                    let t = thresholds(Endpoint::Start(u), &cands, p).unwrap();
                    assert!(t.d1 <= t.d2 && t.d2 <= t.d4 && t.d1 <= t.d3 && t.d3 <= t.d4);
                }
            }
        }
    }
}

#[test]
fn correspondence_is_a_bijection() {
    for n in 2..=3 {
        let geo = SpineGeometry::new(n).unwrap();
        let nos = make_nos(n + 1, n).unwrap();
        let images: Vec<Vec<u8>> = family_params(&geo)
            .iter()
            .map(|(c, i)| {
                nos_correspondence(&geo, c, *i)
                    .unwrap()
                    .iter()
                    .map(|s| s.code())
                    .collect()
            })
            .collect();
        assert_eq!(images, nos.labels());
        let fam = build_family(&geo).unwrap();
        let distinct: std::collections::HashSet<_> = fam.iter().map(|t| t.f.clone()).collect();
        assert_eq!(distinct.len(), fam.len());
    }
}
