//! Monotone functions on the lattice `[n]^k` (`k ∈ {1, 2}`), query-counting
//! oracles, fixed-point solvers and the clamp embedding.
//!
//! Points are 1-based coordinate vectors. Tables are stored row-major with
//! the first coordinate outermost.

use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("dimension k={0} is not supported (only 1 and 2)")]
    Dims(usize),
    #[error("side length must be at least 1")]
    ZeroSide,
    #[error("missing value for cell {cell:?} ({got} of {expected} cells present)")]
    MissingCell {
        cell: Vec<usize>,
        got: usize,
        expected: usize,
    },
    #[error("{extra} cells beyond the {expected} expected")]
    ExtraCells { expected: usize, extra: usize },
    #[error("cell {cell:?} maps to {value:?}, outside [1,{n}]^{k}")]
    OutOfRange {
        cell: Vec<usize>,
        value: Vec<usize>,
        n: usize,
        k: usize,
    },
    #[error("clamp target [{n}]^{k} is smaller than the source [{n_src}]^{k_src}")]
    ClampTooSmall {
        n: usize,
        k: usize,
        n_src: usize,
        k_src: usize,
    },
    #[error("no fixed point found")]
    NoFixedPoint,
    #[error("malformed instance file: {0}")]
    Parse(String),
    #[error("I/O: {0}")]
    Io(String),
}

/// A covering pair `lo ≤ hi` with `f(lo) ≰ f(hi)`.
#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize)]
#[error("not monotone: {lo:?} ≤ {hi:?} but f maps them to {f_lo:?} and {f_hi:?}")]
pub struct MonotoneWitness {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
    pub f_lo: Vec<usize>,
    pub f_hi: Vec<usize>,
}

/// Explicit table of `f : [n]^k → [n]^k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LatticeFn {
    n: usize,
    k: usize,
    values: Vec<usize>,
}

fn leq(a: &[usize], b: &[usize]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

impl LatticeFn {
    /// `values[c]` is the image of the `c`-th point in row-major order.
    pub fn new(n: usize, k: usize, values: Vec<Vec<usize>>) -> Result<Self, LatticeError> {
        if !(1..=2).contains(&k) {
            return Err(LatticeError::Dims(k));
        }
        if n == 0 {
            return Err(LatticeError::ZeroSide);
        }
        let expected = n.pow(k as u32);
        if values.len() < expected {
            return Err(LatticeError::MissingCell {
                cell: point_of(n, k, values.len()),
                got: values.len(),
                expected,
            });
        }
        if values.len() > expected {
            return Err(LatticeError::ExtraCells {
                expected,
                extra: values.len() - expected,
            });
        }
        let mut flat = Vec::with_capacity(expected * k);
        for (c, v) in values.into_iter().enumerate() {
            if v.len() != k || v.iter().any(|&e| e == 0 || e > n) {
                return Err(LatticeError::OutOfRange {
                    cell: point_of(n, k, c),
                    value: v,
                    n,
                    k,
                });
            }
            flat.extend(v);
        }
        Ok(LatticeFn { n, k, values: flat })
    }

    pub fn from_fn(
        n: usize,
        k: usize,
        f: impl Fn(&[usize]) -> Vec<usize>,
    ) -> Result<Self, LatticeError> {
        if !(1..=2).contains(&k) {
            return Err(LatticeError::Dims(k));
        }
        let values = (0..n.pow(k as u32))
            .map(|c| f(&point_of(n, k, c)))
            .collect();
        Self::new(n, k, values)
    }

    pub fn identity(n: usize, k: usize) -> Result<Self, LatticeError> {
        Self::from_fn(n, k, |p| p.to_vec())
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> usize {
        self.k
    }

    /// Number of points, `n^k`.
    pub fn cells(&self) -> usize {
        self.n.pow(self.k as u32)
    }

    /// Direct table lookup. Solvers go through a [`LatticeOracle`] instead.
    pub fn eval(&self, p: &[usize]) -> &[usize] {
        let c = index_of(self.n, p);
        &self.values[c * self.k..(c + 1) * self.k]
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.cells()).map(|c| point_of(self.n, self.k, c))
    }

    /// Scans covering pairs `p ≤ p + e_d` only, which suffices by
    /// transitivity of `≤`.
    pub fn check_monotone(&self) -> Result<(), MonotoneWitness> {
        for p in self.points() {
            for d in 0..self.k {
                if p[d] == self.n {
                    continue;
                }
                let mut q = p.clone();
                q[d] += 1;
                let (fp, fq) = (self.eval(&p), self.eval(&q));
                if !leq(fp, fq) {
                    return Err(MonotoneWitness {
                        f_lo: fp.to_vec(),
                        f_hi: fq.to_vec(),
                        lo: p,
                        hi: q,
                    });
                }
            }
        }
        Ok(())
    }

    /// All fixed points in row-major order.
    pub fn brute_fixed_points(&self) -> Vec<Vec<usize>> {
        self.points()
            .filter(|p| self.eval(p) == p.as_slice())
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let values: Vec<&[usize]> = self.values.chunks(self.k).collect();
        serde_json::json!({ "n": self.n, "k": self.k, "values": values })
    }

    pub fn from_json_str(s: &str) -> Result<Self, LatticeError> {
        #[derive(Deserialize)]
        struct Raw {
            n: usize,
            k: usize,
            values: Vec<Vec<usize>>,
        }
        let raw: Raw = serde_json::from_str(s).map_err(|e| LatticeError::Parse(e.to_string()))?;
        Self::new(raw.n, raw.k, raw.values)
    }

    pub fn load(path: &Path) -> Result<Self, LatticeError> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| LatticeError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&s)
    }
}

fn index_of(n: usize, p: &[usize]) -> usize {
    p.iter().fold(0, |acc, &x| acc * n + (x - 1))
}

fn point_of(n: usize, k: usize, mut c: usize) -> Vec<usize> {
    let mut p = vec![0; k];
    for d in (0..k).rev() {
        p[d] = c % n + 1;
        c /= n;
    }
    p
}

/// Counting query access to a lattice function.
pub trait LatticeOracle {
    fn side(&self) -> usize;
    fn dims(&self) -> usize;
    /// One query; every call is counted, repeats included.
    fn query(&mut self, p: &[usize]) -> Vec<usize>;
    fn queries(&self) -> usize;
}

/// Oracle view over a table. Owns its counter; no caching.
#[derive(Debug)]
pub struct TableOracle<'a> {
    f: &'a LatticeFn,
    count: usize,
}

impl<'a> TableOracle<'a> {
    pub fn new(f: &'a LatticeFn) -> Self {
        TableOracle { f, count: 0 }
    }
}

impl LatticeOracle for TableOracle<'_> {
    fn side(&self) -> usize {
        self.f.n
    }
    fn dims(&self) -> usize {
        self.f.k
    }
    fn query(&mut self, p: &[usize]) -> Vec<usize> {
        self.count += 1;
        self.f.eval(p).to_vec()
    }
    fn queries(&self) -> usize {
        self.count
    }
}

/// `f ∘ g` on `[n]^k`, where `g` clamps the first `k′` coordinates to `n′`
/// and drops the rest. Output coordinates beyond `k′` are set to 1.
#[derive(Debug)]
pub struct ClampOracle<'a> {
    f: &'a LatticeFn,
    n: usize,
    k: usize,
    count: usize,
}

/// Embeds an instance over `[n′]^{k′}` into `[n]^k`.
pub fn clamp_embed(f: &LatticeFn, n: usize, k: usize) -> Result<ClampOracle<'_>, LatticeError> {
    if !(1..=2).contains(&k) {
        return Err(LatticeError::Dims(k));
    }
    if n < f.n || k < f.k {
        return Err(LatticeError::ClampTooSmall {
            n,
            k,
            n_src: f.n,
            k_src: f.k,
        });
    }
    Ok(ClampOracle { f, n, k, count: 0 })
}

/// `g(x)_i = min(x_i, n′)` for the first `k′` coordinates.
pub fn clamp(x: &[usize], n_src: usize, k_src: usize) -> Vec<usize> {
    x[..k_src].iter().map(|&v| v.min(n_src)).collect()
}

impl ClampOracle<'_> {
    fn apply(&self, p: &[usize]) -> Vec<usize> {
        let mut out = self.f.eval(&clamp(p, self.f.n, self.f.k)).to_vec();
        out.resize(self.k, 1);
        out
    }

    /// The composed function as an explicit table (no queries counted).
    pub fn materialize(&self) -> LatticeFn {
        LatticeFn::from_fn(self.n, self.k, |p| self.apply(p)).expect("clamped values stay in range")
    }
}

impl LatticeOracle for ClampOracle<'_> {
    fn side(&self) -> usize {
        self.n
    }
    fn dims(&self) -> usize {
        self.k
    }
    fn query(&mut self, p: &[usize]) -> Vec<usize> {
        self.count += 1;
        self.apply(p)
    }
    fn queries(&self) -> usize {
        self.count
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Brute,
    Nested,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Brute => "brute",
            Algorithm::Nested => "nested",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SolveResult {
    pub fixed_point: Vec<usize>,
    pub queries_used: usize,
    pub algorithm: Algorithm,
    /// The nested search lost its invariant and a full scan produced the answer.
    pub fell_back: bool,
}

/// Queries every point in row-major order: exactly `n^k` queries.
pub fn brute_solve(o: &mut impl LatticeOracle) -> Result<SolveResult, LatticeError> {
    let (n, k) = (o.side(), o.dims());
    let mut found = None;
    for c in 0..n.pow(k as u32) {
        let p = point_of(n, k, c);
        if o.query(&p) == p && found.is_none() {
            found = Some(p);
        }
    }
    Ok(SolveResult {
        fixed_point: found.ok_or(LatticeError::NoFixedPoint)?,
        queries_used: o.queries(),
        algorithm: Algorithm::Brute,
        fell_back: false,
    })
}

/// Binary search for a fixed point of the monotone map `z ↦ probe(z)[axis]`
/// on `[lo, hi]`. Returns the fixed `z` and the full image there.
fn binary_fixed(
    mut lo: usize,
    mut hi: usize,
    mut probe: impl FnMut(usize) -> Vec<usize>,
    axis: usize,
) -> Option<(usize, Vec<usize>)> {
    while lo <= hi {
        let mid = lo + (hi - lo) / 2;
        let v = probe(mid);
        match v[axis].cmp(&mid) {
            std::cmp::Ordering::Equal => return Some((mid, v)),
            std::cmp::Ordering::Greater => lo = mid + 1,
            std::cmp::Ordering::Less => hi = mid.checked_sub(1)?,
        }
    }
    None
}

/// Nested binary search: an outer search on the first coordinate, and at
/// each middle column an inner search on the second coordinate for a point
/// fixed in that coordinate. The box `[lo, hi]` always satisfies
/// `lo ≤ f(lo)` and `f(hi) ≤ hi`, so `f` maps it into itself.
///
/// The answer is re-queried before returning. If that check or the box
/// invariant fails, a full scan is run and the result is flagged.
pub fn nested_solve(o: &mut impl LatticeOracle) -> Result<SolveResult, LatticeError> {
    let n = o.side();
    let found = match o.dims() {
        1 => binary_fixed(1, n, |z| o.query(&[z]), 0).map(|(z, _)| vec![z]),
        2 => nested_2d(o, n),
        k => return Err(LatticeError::Dims(k)),
    };
    if let Some(p) = found {
        if o.query(&p) == p {
            return Ok(SolveResult {
                fixed_point: p,
                queries_used: o.queries(),
                algorithm: Algorithm::Nested,
                fell_back: false,
            });
        }
    }
    let mut r = brute_solve(o)?;
    r.algorithm = Algorithm::Nested;
    r.fell_back = true;
    Ok(r)
}

fn nested_2d(o: &mut impl LatticeOracle, n: usize) -> Option<Vec<usize>> {
    let (mut lo, mut hi) = ([1usize, 1usize], [n, n]);
    while lo[0] <= hi[0] {
        let mid = lo[0] + (hi[0] - lo[0]) / 2;
        let (z, v) = binary_fixed(lo[1], hi[1], |z| o.query(&[mid, z]), 1)?;
        match v[0].cmp(&mid) {
            std::cmp::Ordering::Equal => return Some(vec![mid, z]),
            // (mid, z) ≤ f(mid, z), so its image is a new lower corner.
            std::cmp::Ordering::Greater => lo = [v[0], v[1]],
            std::cmp::Ordering::Less => hi = [v[0], v[1]],
        }
        if !(leq(&lo, &hi)) {
            return None;
        }
    }
    None
}

/// Random monotone function: each output coordinate is a table that never
/// decreases along either axis.
pub fn random_monotone(n: usize, k: usize, rng: &mut impl Rng) -> Result<LatticeFn, LatticeError> {
    if !(1..=2).contains(&k) {
        return Err(LatticeError::Dims(k));
    }
    let cells = n.pow(k as u32);
    let mut coords = vec![vec![0usize; cells]; k];
    for table in coords.iter_mut() {
        for c in 0..cells {
            let p = point_of(n, k, c);
            let mut floor = 1;
            for d in 0..k {
                if p[d] > 1 {
                    let mut q = p.clone();
                    q[d] -= 1;
                    floor = floor.max(table[index_of(n, &q)]);
                }
            }
            let step = if rng.gen_bool(0.35) { 1 } else { 0 };
            table[c] = (floor + step).min(n);
        }
    }
    LatticeFn::new(
        n,
        k,
        (0..cells)
            .map(|c| coords.iter().map(|t| t[c]).collect())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_is_monotone_with_all_fixed_points() {
        let f = LatticeFn::identity(3, 2).unwrap();
        assert!(f.check_monotone().is_ok());
        assert_eq!(f.brute_fixed_points().len(), 9);
        assert_eq!(f.brute_fixed_points()[1], vec![1, 2]);
    }

    #[test]
    fn swapped_corners_are_not_monotone() {
        let f = LatticeFn::from_fn(2, 2, |p| match p {
            [1, 1] => vec![2, 2],
            [2, 2] => vec![1, 1],
            _ => p.to_vec(),
        })
        .unwrap();
        let w = f.check_monotone().unwrap_err();
        // The scan reports the first covering pair that breaks, and it is a
        // genuine violation.
        assert!(leq(&w.lo, &w.hi));
        assert!(!leq(&w.f_lo, &w.f_hi));
        assert_eq!((w.lo, w.hi), (vec![1, 1], vec![2, 1]));
    }

    #[test]
    fn constant_function_has_one_fixed_point() {
        let f = LatticeFn::from_fn(4, 2, |_| vec![3, 2]).unwrap();
        assert_eq!(f.brute_fixed_points(), vec![vec![3, 2]]);
    }

    #[test]
    fn trivial_lattice() {
        let f = LatticeFn::identity(1, 2).unwrap();
        let mut o = TableOracle::new(&f);
        let r = nested_solve(&mut o).unwrap();
        assert_eq!(r.fixed_point, vec![1, 1]);
        assert!(r.queries_used <= 2);
    }

    #[test]
    fn brute_counts_every_cell() {
        let f = LatticeFn::from_fn(10, 2, |_| vec![4, 7]).unwrap();
        let mut o = TableOracle::new(&f);
        let r = brute_solve(&mut o).unwrap();
        assert_eq!(r.queries_used, 100);
        assert_eq!(r.fixed_point, vec![4, 7]);
    }

    #[test]
    fn nested_finds_fixed_points_of_random_monotone_functions() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 5, 16, 33] {
            for _ in 0..40 {
                let f = random_monotone(n, 2, &mut rng).unwrap();
                assert!(f.check_monotone().is_ok());
                let mut o = TableOracle::new(&f);
                let r = nested_solve(&mut o).unwrap();
                assert!(!r.fell_back);
                assert_eq!(f.eval(&r.fixed_point), r.fixed_point.as_slice());
                let lg = (n as f64).log2().ceil() as usize + 1;
                assert!(r.queries_used <= lg * lg + 1, "n={n} q={}", r.queries_used);
            }
            let g = random_monotone(n, 1, &mut rng).unwrap();
            let r = nested_solve(&mut TableOracle::new(&g)).unwrap();
            assert_eq!(g.eval(&r.fixed_point), r.fixed_point.as_slice());
        }
    }

    #[test]
    fn nested_falls_back_on_non_monotone_input() {
        // Every point moves right except one isolated fixed point the
        // binary search cannot be steered to.
        let f = LatticeFn::from_fn(5, 2, |p| match p {
            [1, 1] => vec![1, 1],
            [x, y] => vec![(*x % 5) + 1, *y],
            _ => unreachable!(),
        })
        .unwrap();
        let r = nested_solve(&mut TableOracle::new(&f)).unwrap();
        assert!(r.fell_back);
        assert_eq!(r.fixed_point, vec![1, 1]);
    }

    #[test]
    fn clamp_examples() {
        assert_eq!(clamp(&[4, 2], 3, 2), vec![3, 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_monotone(3, 2, &mut rng).unwrap();
        let o = clamp_embed(&f, 5, 2).unwrap();
        let g = o.materialize();
        assert_eq!(g.brute_fixed_points(), f.brute_fixed_points());
        let line = random_monotone(3, 1, &mut rng).unwrap();
        let g = clamp_embed(&line, 4, 2).unwrap().materialize();
        assert!(g.check_monotone().is_ok());
        let want: Vec<Vec<usize>> = line
            .brute_fixed_points()
            .into_iter()
            .map(|p| vec![p[0], 1])
            .collect();
        assert_eq!(g.brute_fixed_points(), want);
        assert!(matches!(
            clamp_embed(&f, 2, 2),
            Err(LatticeError::ClampTooSmall { .. })
        ));
    }

    #[test]
    fn clamp_queries_are_counted_once_each() {
        let f = LatticeFn::identity(2, 2).unwrap();
        let mut o = clamp_embed(&f, 4, 2).unwrap();
        o.query(&[4, 4]);
        o.query(&[4, 4]);
        assert_eq!(o.query(&[3, 1]), vec![2, 1]);
        assert_eq!(o.queries(), 3);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let f = LatticeFn::from_fn(3, 2, |p| vec![p[1], p[0]]).unwrap();
        let s = f.to_json().to_string();
        assert_eq!(LatticeFn::from_json_str(&s).unwrap(), f);
        let err =
            LatticeFn::from_json_str(r#"{"n":2,"k":2,"values":[[1,1],[1,2],[2,1]]}"#).unwrap_err();
        assert_eq!(
            err,
            LatticeError::MissingCell {
                cell: vec![2, 2],
                got: 3,
                expected: 4
            }
        );
        let err = LatticeFn::from_json_str(r#"{"n":1,"k":2,"values":[[1,2]]}"#).unwrap_err();
        assert!(matches!(err, LatticeError::OutOfRange { .. }));
        assert!(matches!(
            LatticeFn::from_json_str("{"),
            Err(LatticeError::Parse(_))
        ));
    }
}
