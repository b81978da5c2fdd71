//! Lattice geometry of the Tarski lower-bound instances.
//!
//! A *grid line* is the rounded discretization of the segment between two
//! comparable lattice points. The tube `|x − y| ≤ n − 1` around the diagonal
//! of `[n′]²`, `n′ = n(n² + n − 1)`, is cut by the anti-diagonal boundary sets
//! `B^c` into `n` chunks of `n + 2` regions each. A *chunked spine* threads
//! the tube through boundary points chosen by a vector `C ∈ [n]^{n+1}`, and a
//! *herringbone function* flows along the spine towards one fixed point and
//! diagonally onto the spine from everywhere else.
//!
//! All arithmetic is exact.

use std::collections::HashMap;
use std::fmt;

use itertools::Itertools;
use num_rational::Rational64;
use serde::Serialize;
use thiserror::Error;

use crate::lattice::{LatticeError, LatticeFn};
use crate::problems::Symbol;
use crate::spectral::{LabeledMatrix, MatrixError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("geometry needs n ≥ 2, got {0}")]
    SmallN(usize),
    #[error("grid line endpoints {u} and {v} are not ordered")]
    NotOrdered { u: Vertex, v: Vertex },
    #[error("C must have {expected} entries in [1,{n}], got {got:?}")]
    BadC {
        expected: usize,
        n: usize,
        got: Vec<usize>,
    },
    #[error("index {i} outside [1,{max}]")]
    BadIndex { i: usize, max: usize },
    #[error("{w} is outside the tube or the chunks")]
    OutsideChunks { w: Vertex },
    #[error("{w} is not on the grid line from {u} to {v}")]
    AnchorOffLine { w: Vertex, u: Vertex, v: Vertex },
    #[error("threshold bands are not contiguous at {point}: {detail}")]
    Contiguity { point: Vertex, detail: String },
    #[error("spine is not a monotone path: {0}")]
    BadSpine(String),
    #[error("no spine vertex has coordinate sum {0}")]
    NoSpineVertex(usize),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Vertex {
    pub x: usize,
    pub y: usize,
}

pub const fn v(x: usize, y: usize) -> Vertex {
    Vertex { x, y }
}

impl Vertex {
    pub fn sum(self) -> usize {
        self.x + self.y
    }

    pub fn leq(self, o: Vertex) -> bool {
        self.x <= o.x && self.y <= o.y
    }

    pub fn as_vec(self) -> Vec<usize> {
        vec![self.x, self.y]
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// Nearest integer, ties towards the larger one.
pub fn round_half_up(r: Rational64) -> i64 {
    (r + Rational64::new(1, 2)).floor().to_integer()
}

/// The point of the grid line from `u` to `v` with coordinate sum `c`.
/// Requires `u ≤ v` and `u.sum() ≤ c ≤ v.sum()`.
pub fn line_point(u: Vertex, v: Vertex, c: usize) -> Vertex {
    let (b, d) = (u.sum() as i64, v.sum() as i64);
    if b == d {
        return u;
    }
    let c = c as i64;
    let x = round_half_up(Rational64::new(
        u.x as i64 * (d - c) + v.x as i64 * (c - b),
        d - b,
    ));
    Vertex {
        x: x as usize,
        y: (c - x) as usize,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridLine {
    pub u: Vertex,
    pub v: Vertex,
    /// One point per coordinate sum from `u.sum()` to `v.sum()`.
    pub points: Vec<Vertex>,
}

pub fn grid_line(u: Vertex, v: Vertex) -> Result<GridLine, GeometryError> {
    if !u.leq(v) {
        return Err(GeometryError::NotOrdered { u, v });
    }
    let points = (u.sum()..=v.sum()).map(|c| line_point(u, v, c)).collect();
    Ok(GridLine { u, v, points })
}

/// Chunk and region coordinates for a given `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpineGeometry {
    pub n: usize,
    pub n_prime: usize,
    /// `B^c` for every region boundary sum `c = 2(n−1)t + n + 1`.
    boundaries: HashMap<usize, Vec<Vertex>>,
}

impl SpineGeometry {
    pub fn new(n: usize) -> Result<Self, GeometryError> {
        if n < 2 {
            return Err(GeometryError::SmallN(n));
        }
        let n_prime = n * (n * n + n - 1);
        let mut g = SpineGeometry {
            n,
            n_prime,
            boundaries: HashMap::new(),
        };
        for t in 0..=n * (n + 2) {
            let c = 2 * (n - 1) * t + n + 1;
            let b = g.boundary_scan(c);
            g.boundaries.insert(c, b);
        }
        Ok(g)
    }

    /// `B^c` straight from its definition, ordered by `x`.
    pub fn boundary_scan(&self, c: usize) -> Vec<Vertex> {
        (1..=self.n_prime)
            .filter_map(|x| {
                let y = c.checked_sub(x)?;
                (1..=self.n_prime).contains(&y).then_some(v(x, y))
            })
            .filter(|p| p.x.abs_diff(p.y) < self.n)
            .collect()
    }

    /// `B^c`, cached for region boundary sums.
    pub fn boundary(&self, c: usize) -> Vec<Vertex> {
        self.boundaries
            .get(&c)
            .cloned()
            .unwrap_or_else(|| self.boundary_scan(c))
    }

    /// `B^c_j` (1-based `j`).
    pub fn boundary_point(&self, c: usize, j: usize) -> Result<Vertex, GeometryError> {
        let b = self.boundary(c);
        b.get(j.wrapping_sub(1))
            .copied()
            .ok_or(GeometryError::BadIndex { i: j, max: b.len() })
    }

    pub fn low(&self, i: usize, j: usize) -> usize {
        let n = self.n;
        2 * (n - 1) * ((n + 2) * (i - 1) + j - 1) + n + 1
    }

    pub fn high(&self, i: usize, j: usize) -> usize {
        let n = self.n;
        2 * (n - 1) * ((n + 2) * (i - 1) + j) + n + 1
    }

    /// Coordinate sum of chunk boundary `i ∈ [n+1]`.
    pub fn bound(&self, i: usize) -> usize {
        if i <= self.n {
            self.low(i, 1)
        } else {
            self.high(self.n, self.n + 2)
        }
    }

    /// `B^{bound(i)}_j`.
    pub fn chunk_point(&self, i: usize, j: usize) -> Vertex {
        let n = self.n;
        let t = (n + 2) * (i - 1);
        v((n - 1) * t + j, (n - 1) * t + n + 1 - j)
    }

    /// Index of the boundary-to-boundary grid line through `p` when `p` lies
    /// in the chunks; any value outside `[1, n]` means `p` is off the tube.
    pub fn line_index(&self, p: Vertex) -> i64 {
        let half = round_half_up(Rational64::new(p.sum() as i64 - (self.n as i64 + 1), 2));
        p.x as i64 - half
    }

    /// Tube membership: `|x − y| ≤ n − 1` at sums of the boundary parity,
    /// `−(n − 2) ≤ x − y ≤ n` at the others.
    pub fn in_tube(&self, p: Vertex) -> bool {
        (1..=self.n as i64).contains(&self.line_index(p))
    }

    fn check_c(&self, c: &[usize]) -> Result<(), GeometryError> {
        if c.len() != self.n + 1 || c.iter().any(|&e| e == 0 || e > self.n) {
            return Err(GeometryError::BadC {
                expected: self.n + 1,
                n: self.n,
                got: c.to_vec(),
            });
        }
        Ok(())
    }
}

/// A monotone connected path from `(1,1)` to `(side, side)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Spine {
    pub c_vector: Option<Vec<usize>>,
    pub side: usize,
    pub vertices: Vec<Vertex>,
    col_range: Vec<(usize, usize)>,
}

impl Spine {
    pub fn from_vertices(side: usize, vertices: Vec<Vertex>) -> Result<Self, GeometryError> {
        if vertices.first() != Some(&v(1, 1)) || vertices.last() != Some(&v(side, side)) {
            return Err(GeometryError::BadSpine(format!(
                "must run from (1,1) to ({side},{side})"
            )));
        }
        for (a, b) in vertices.iter().tuple_windows() {
            if !(b.x == a.x + 1 && b.y == a.y || b.x == a.x && b.y == a.y + 1) {
                return Err(GeometryError::BadSpine(format!("step {a} → {b}")));
            }
        }
        let mut col_range = vec![(usize::MAX, 0); side + 1];
        for p in &vertices {
            let r = &mut col_range[p.x];
            *r = (r.0.min(p.y), r.1.max(p.y));
        }
        Ok(Spine {
            c_vector: None,
            side,
            vertices,
            col_range,
        })
    }

    /// The vertex with coordinate sum `c`.
    pub fn at_sum(&self, c: usize) -> Option<Vertex> {
        self.vertices.get(c.checked_sub(2)?).copied()
    }

    /// Lowest and highest spine `y` in column `x`.
    pub fn column(&self, x: usize) -> (usize, usize) {
        self.col_range[x]
    }

    pub fn contains(&self, p: Vertex) -> bool {
        let (lo, hi) = self.col_range[p.x];
        lo <= p.y && p.y <= hi
    }
}

/// Splices the grid lines of the chunked-spine segment list for `C`.
pub fn chunked_spine(geo: &SpineGeometry, c: &[usize]) -> Result<Spine, GeometryError> {
    geo.check_c(c)?;
    let n = geo.n;
    let b = |s: usize, j: usize| geo.boundary_point(s, j);
    let mut stops = vec![v(1, 1), b(geo.low(1, 1), c[0])?];
    for i in 1..=n {
        let (ci, cn) = (c[i - 1], c[i]);
        stops.push(b(geo.low(i, ci + 1), ci)?);
        stops.push(b(geo.high(i, ci + 1), cn)?);
        stops.push(b(geo.high(i, n + 2), cn)?);
    }
    stops.push(v(geo.n_prime, geo.n_prime));

    let mut vertices = vec![stops[0]];
    for (u, w) in stops.iter().tuple_windows() {
        vertices.extend(grid_line(*u, *w)?.points.into_iter().skip(1));
    }
    let mut s = Spine::from_vertices(geo.n_prime, vertices)?;
    s.c_vector = Some(c.to_vec());
    Ok(s)
}

/// Herringbone function whose fixed point is the spine vertex with
/// coordinate sum `fp_sum`: spine vertices step towards it, points above the
/// spine move by `(1,−1)` and points below by `(−1,1)`.
pub fn herringbone(spine: &Spine, fp_sum: usize) -> Result<LatticeFn, GeometryError> {
    let fixed = spine
        .at_sum(fp_sum)
        .ok_or(GeometryError::NoSpineVertex(fp_sum))?;
    let idx = |p: Vertex| p.sum() - 2;
    let j = idx(fixed);
    Ok(LatticeFn::from_fn(spine.side, 2, |p| {
        let w = v(p[0], p[1]);
        let (lo, hi) = spine.column(w.x);
        let out = if w.y > hi {
            v(w.x + 1, w.y - 1)
        } else if w.y < lo {
            v(w.x - 1, w.y + 1)
        } else {
            let i = idx(w);
            match i.cmp(&j) {
                std::cmp::Ordering::Equal => w,
                std::cmp::Ordering::Less => spine.vertices[i + 1],
                std::cmp::Ordering::Greater => spine.vertices[i - 1],
            }
        };
        out.as_vec()
    })?)
}

/// One member of the instance family.
#[derive(Clone, Debug)]
pub struct TarskiInstance {
    pub c: Vec<usize>,
    pub i: usize,
    pub f: LatticeFn,
    pub fixed_point: Vertex,
}

pub fn build_instance(
    geo: &SpineGeometry,
    c: &[usize],
    i: usize,
) -> Result<TarskiInstance, GeometryError> {
    if i == 0 || i > geo.n + 1 {
        return Err(GeometryError::BadIndex { i, max: geo.n + 1 });
    }
    let spine = chunked_spine(geo, c)?;
    let f = herringbone(&spine, geo.bound(i))?;
    Ok(TarskiInstance {
        c: c.to_vec(),
        i,
        f,
        fixed_point: geo.chunk_point(i, c[i - 1]),
    })
}

/// Every `(C, i)`, with `i` outermost and `C` in lexicographic order.
pub fn family_params(geo: &SpineGeometry) -> Vec<(Vec<usize>, usize)> {
    let n = geo.n;
    let cs: Vec<Vec<usize>> = (0..=n).map(|_| 1..=n).multi_cartesian_product().collect();
    (1..=n + 1)
        .flat_map(|i| cs.iter().map(move |c| (c.clone(), i)))
        .collect()
}

pub fn build_family(geo: &SpineGeometry) -> Result<Vec<TarskiInstance>, GeometryError> {
    family_params(geo)
        .iter()
        .map(|(c, i)| build_instance(geo, c, *i))
        .collect()
}

/// The nested-search instance paired with `(C, i)`: block `j` hides `↑`,
/// `*` or `↓` (for `j` before, at or after `i`) at offset `C_j`.
pub fn nos_correspondence(
    geo: &SpineGeometry,
    c: &[usize],
    i: usize,
) -> Result<Vec<Symbol>, GeometryError> {
    geo.check_c(c)?;
    if i == 0 || i > geo.n + 1 {
        return Err(GeometryError::BadIndex { i, max: geo.n + 1 });
    }
    let n = geo.n;
    let mut out = Vec::with_capacity((n + 1) * n);
    for (j, &cj) in c.iter().enumerate() {
        let hidden = match (j + 1).cmp(&i) {
            std::cmp::Ordering::Less => Symbol::Up,
            std::cmp::Ordering::Equal => Symbol::Star,
            std::cmp::Ordering::Greater => Symbol::Down,
        };
        out.extend((1..=n).map(|q| match q.cmp(&cj) {
            std::cmp::Ordering::Less => Symbol::Right,
            std::cmp::Ordering::Equal => hidden,
            std::cmp::Ordering::Greater => Symbol::Left,
        }));
    }
    Ok(out)
}

/// Which endpoint of the grid lines is held fixed in [`thresholds`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endpoint {
    /// Lines start at this point; the candidates are end points.
    Start(Vertex),
    /// Lines end at this point; the candidates are start points.
    End(Vertex),
}

/// Threshold `x`-coordinates splitting the candidates into bands; 0 marks an
/// empty lower band.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ThresholdQuad {
    pub d1: usize,
    pub d2: usize,
    pub d3: usize,
    pub d4: usize,
}

impl ThresholdQuad {
    pub fn as_array(&self) -> [usize; 4] {
        [self.d1, self.d2, self.d3, self.d4]
    }
}

/// Computes the thresholds by evaluating every candidate line at `point`.
///
/// Sorted by `x`, candidates must fall into the bands "line passes left of
/// the point", "passes through and steps up next", "passes through and steps
/// right next", "passes right of the point", in that order; and likewise for
/// the step arriving at the point (from the left, then from below). Any other
/// order is reported as a contiguity error. A step that would leave the line
/// (at its first or last sum) joins the later band.
pub fn thresholds(
    endpoint: Endpoint,
    candidates: &[Vertex],
    point: Vertex,
) -> Result<ThresholdQuad, GeometryError> {
    let mut cands = candidates.to_vec();
    cands.sort();
    let c = point.sum();
    let mut fwd = Vec::with_capacity(cands.len());
    let mut back = Vec::with_capacity(cands.len());
    for &w in &cands {
        let (u, vv) = match endpoint {
            Endpoint::Start(u) => (u, w),
            Endpoint::End(e) => (w, e),
        };
        if !u.leq(vv) || c < u.sum() || c > vv.sum() {
            return Err(GeometryError::NotOrdered { u, v: vv });
        }
        let here = line_point(u, vv, c);
        let (f, b) = match here.x.cmp(&point.x) {
            std::cmp::Ordering::Less => (0, 0),
            std::cmp::Ordering::Greater => (3, 3),
            std::cmp::Ordering::Equal => {
                let up = c < vv.sum() && line_point(u, vv, c + 1) == v(here.x, here.y + 1);
                let from_left = c > u.sum() && line_point(u, vv, c - 1) == v(here.x - 1, here.y);
                (if up { 1 } else { 2 }, if from_left { 1 } else { 2 })
            }
        };
        fwd.push(f);
        back.push(b);
    }
    for (name, seq) in [("forward", &fwd), ("backward", &back)] {
        if seq.iter().tuple_windows().any(|(a, b)| a > b) {
            return Err(GeometryError::Contiguity {
                point,
                detail: format!(
                    "{name} bands {:?} over candidates {}",
                    seq,
                    cands.iter().map(ToString::to_string).join(" ")
                ),
            });
        }
    }
    let last_x = |seq: &[u8], upto: u8| {
        cands
            .iter()
            .zip(seq)
            .filter(|(_, &s)| s <= upto)
            .map(|(w, _)| w.x)
            .next_back()
            .unwrap_or(0)
    };
    Ok(ThresholdQuad {
        d1: last_x(&fwd, 0),
        d2: last_x(&fwd, 1),
        d3: last_x(&back, 1),
        d4: last_x(&fwd, 2),
    })
}

/// Chunk, region and line index of a tube point between the first and last
/// chunk boundaries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RegionAnchor {
    pub alpha: usize,
    pub beta: usize,
    pub ell: usize,
}

pub fn region_anchor(geo: &SpineGeometry, w: Vertex) -> Result<RegionAnchor, GeometryError> {
    let n = geo.n;
    let c = w.sum();
    if !geo.in_tube(w) || c < geo.bound(1) || c > geo.bound(n + 1) {
        return Err(GeometryError::OutsideChunks { w });
    }
    let alpha = (1..=n)
        .find(|&a| c <= geo.bound(a + 1))
        .expect("c ≤ bound(n+1)");
    let beta = (c - geo.bound(alpha)).div_ceil(2 * (n - 1)).max(1);
    let ell = geo.line_index(w) as usize;
    let (u, e) = (geo.chunk_point(alpha, ell), geo.chunk_point(alpha + 1, ell));
    if line_point(u, e, c) != w {
        return Err(GeometryError::AnchorOffLine { w, u, v: e });
    }
    Ok(RegionAnchor { alpha, beta, ell })
}

/// Where a point sits relative to the chunks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PointCase {
    /// Between `(1,1)` and the first chunk boundary.
    Prefix,
    /// Between the last chunk boundary and `(n′,n′)`.
    Suffix,
    /// Up-left or down-right of the tube.
    OffTube,
    /// On chunk boundary `i`.
    Boundary {
        i: usize,
    },
    InChunk(RegionAnchor),
}

pub fn classify(geo: &SpineGeometry, p: Vertex) -> Result<PointCase, GeometryError> {
    let n = geo.n;
    let c = p.sum();
    Ok(if c < geo.bound(1) {
        PointCase::Prefix
    } else if c > geo.bound(n + 1) {
        PointCase::Suffix
    } else if !geo.in_tube(p) {
        PointCase::OffTube
    } else if let Some(i) = (1..=n + 1).find(|&i| geo.bound(i) == c) {
        PointCase::Boundary { i }
    } else {
        PointCase::InChunk(region_anchor(geo, p)?)
    })
}

/// Chunk-boundary points whose values, taken together, determine the value
/// of every family member at `p`.
pub fn covering_set(geo: &SpineGeometry, p: Vertex) -> Result<Vec<Vertex>, GeometryError> {
    let n = geo.n;
    let pick = |cands: &[Vertex], ds: &[usize]| -> Vec<Vertex> {
        cands
            .iter()
            .filter(|w| ds.contains(&w.x))
            .copied()
            .collect()
    };
    let out = match classify(geo, p)? {
        PointCase::OffTube => Vec::new(),
        PointCase::Boundary { .. } => vec![p],
        PointCase::Prefix => {
            let s2 = geo.boundary(geo.bound(1));
            let t = thresholds(Endpoint::Start(v(1, 1)), &s2, p)?;
            pick(&s2, &[t.d1, t.d2, t.d4])
        }
        PointCase::Suffix => {
            let s1 = geo.boundary(geo.bound(n + 1));
            let t = thresholds(Endpoint::End(v(geo.n_prime, geo.n_prime)), &s1, p)?;
            pick(&s1, &[t.d1, t.d3, t.d4])
        }
        PointCase::InChunk(RegionAnchor { alpha, beta, ell }) => {
            let mut out = vec![geo.chunk_point(alpha, ell), geo.chunk_point(alpha + 1, ell)];
            if (2..=n + 1).contains(&beta) {
                out.push(geo.chunk_point(alpha, beta - 1));
                let start = geo.boundary_point(geo.low(alpha, beta), beta - 1)?;
                let s2 = geo.boundary(geo.high(alpha, beta));
                let t = thresholds(Endpoint::Start(start), &s2, p)?;
                let ds = t.as_array();
                out.extend(
                    s2.iter()
                        .enumerate()
                        .filter(|(_, w)| ds.contains(&w.x))
                        .map(|(j, _)| geo.chunk_point(alpha + 1, j + 1)),
                );
            }
            out
        }
    };
    Ok(out.into_iter().unique().collect())
}

/// 0/1 matrix over the family marking members whose values at `p` differ,
/// labeled by the corresponding nested-search instances.
pub fn family_distinguisher(
    geo: &SpineGeometry,
    family: &[TarskiInstance],
    p: Vertex,
) -> Result<LabeledMatrix, GeometryError> {
    let labels = family
        .iter()
        .map(|t| {
            Ok(nos_correspondence(geo, &t.c, t.i)?
                .iter()
                .map(|s| s.code())
                .collect())
        })
        .collect::<Result<Vec<Vec<u8>>, GeometryError>>()?;
    let vals: Vec<&[usize]> = family.iter().map(|t| t.f.eval(&[p.x, p.y])).collect();
    let entries = vals
        .iter()
        .flat_map(|a| vals.iter().map(move |b| if a != b { 1.0 } else { 0.0 }))
        .collect();
    Ok(LabeledMatrix::new(labels, entries)?.with_name(format!("D[T({}),{p}]", geo.n_prime)))
}

/// First pair of family members that differ at `p` but agree on all of
/// `cover`, as indices into `family`.
pub fn covering_violation(
    family: &[TarskiInstance],
    p: Vertex,
    cover: &[Vertex],
) -> Option<(usize, usize)> {
    let mut seen: HashMap<Vec<&[usize]>, (usize, &[usize])> = HashMap::new();
    for (idx, inst) in family.iter().enumerate() {
        let key: Vec<&[usize]> = cover.iter().map(|w| inst.f.eval(&[w.x, w.y])).collect();
        let val = inst.f.eval(&[p.x, p.y]);
        match seen.get(&key) {
            Some(&(first, v0)) if v0 != val => return Some((first, idx)),
            Some(_) => {}
            None => {
                seen.insert(key, (idx, val));
            }
        }
    }
    None
}
