//! Explicit spectral adversary matrices and the bounds they certify.
//!
//! The constructions here are the Hilbert-type tile `A_m[i,j] = 1/(|i−j|+1)`,
//! the ordered-search matrix `A_m − I`, uniform matrices generated by a tile,
//! and the composition adversary matrix built from an outer matrix and one
//! tile per inner block. [`sa_ratio`] evaluates `‖Γ‖ / max_i ‖Γ∘D_i‖` for a
//! given candidate; nothing here maximizes over `Γ`.

use std::fmt;
use std::ops::Mul;
use std::sync::Arc;

use itertools::Itertools;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::problems::{
    compose, detect_search_labeling, distinguisher, make_hsos, make_os, Cell, ProblemError,
    QueryProblem, SearchLabeling,
};
use crate::spectral::{
    ratio, spectral_norm, spectral_norm_op, LabeledMatrix, MatrixError, Scalar, SpectralError,
    SpectralResult, DEFAULT_TOL,
};

/// Largest answer alphabet [`symmetrize`] will enumerate permutations of.
pub const MAX_SYMMETRIZE_SYMBOLS: usize = 6;

/// Eigenvector weight below which a row is treated as vanishing in
/// [`symmetrize`].
pub const ZERO_ROW_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdversaryError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("matrix labels do not match the instances of {problem}")]
    LabelsDiffer { problem: String },
    #[error("entry [{x},{y}] is nonzero but both instances have answer {answer}")]
    SameAnswerNonzero {
        x: String,
        y: String,
        answer: String,
    },
    #[error("every ‖Γ∘D_i‖ is zero: some instances with different answers are indistinguishable")]
    ZeroDenominator,
    #[error("epsilon must lie strictly between 0 and 1/2, got {0}")]
    BadEpsilon(f64),
    #[error("tile {index}: {reason}")]
    TileMismatch { index: usize, reason: String },
    #[error("position {i}: {reason}")]
    TilePattern { i: usize, reason: String },
    #[error("{0} answers is too many to symmetrize (limit {MAX_SYMMETRIZE_SYMBOLS})")]
    TooManySymbols(usize),
    #[error("not uniform: Γ[{x1},{y1}] = {v1} but Γ[{x2},{y2}] = {v2}")]
    NotUniform {
        x1: String,
        y1: String,
        v1: f64,
        x2: String,
        y2: String,
        v2: f64,
    },
    #[error("{0} has no exact entries")]
    MissingExact(String),
    #[error("problem is not a generalized search function")]
    NotSearch,
}

/// `Γ` over the instances of a problem, zero on same-answer pairs.
#[derive(Clone, Debug)]
pub struct AdversaryMatrix {
    pub problem: Arc<QueryProblem>,
    pub matrix: LabeledMatrix<f64>,
    pub exact: Option<LabeledMatrix<BigRational>>,
}

impl AdversaryMatrix {
    pub fn new(
        problem: Arc<QueryProblem>,
        matrix: LabeledMatrix<f64>,
    ) -> Result<Self, AdversaryError> {
        let a = AdversaryMatrix {
            problem,
            matrix,
            exact: None,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn from_exact(
        problem: Arc<QueryProblem>,
        exact: LabeledMatrix<BigRational>,
    ) -> Result<Self, AdversaryError> {
        let a = AdversaryMatrix {
            matrix: LabeledMatrix::from_rational(&exact).with_name(exact.name().to_string()),
            problem,
            exact: Some(exact),
        };
        a.validate()?;
        Ok(a)
    }

    fn validate(&self) -> Result<(), AdversaryError> {
        let p = &self.problem;
        if self.matrix.dim() != p.len()
            || self
                .matrix
                .labels()
                .iter()
                .zip(&p.instances)
                .any(|(l, x)| *l != x.label())
        {
            return Err(AdversaryError::LabelsDiffer {
                problem: p.name.clone(),
            });
        }
        for (x, ix) in p.instances.iter().enumerate() {
            for (y, iy) in p.instances.iter().enumerate() {
                let exact_zero = self.exact.as_ref().is_none_or(|e| e.get(x, y).is_zero());
                if ix.answer == iy.answer && (*self.matrix.get(x, y) != 0.0 || !exact_zero) {
                    return Err(AdversaryError::SameAnswerNonzero {
                        x: p.render(x),
                        y: p.render(y),
                        answer: ix.answer.to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// `‖Γ∘D_i‖` for a 1-based position, applied without materializing `D_i`.
    pub fn masked_norm(&self, i: usize, tol: f64) -> Result<SpectralResult, AdversaryError> {
        let p = &self.problem;
        if i == 0 || i > p.length {
            return Err(ProblemError::PositionOutOfRange {
                i,
                length: p.length,
            }
            .into());
        }
        let col: Vec<u8> = p.instances.iter().map(|x| x.chars[i - 1].code()).collect();
        let m = &self.matrix;
        let d = m.dim();
        let name = format!("{}∘D_{i}", m.name());
        Ok(spectral_norm_op(&name, d, tol, |x, y| {
            let body = |(r, out): (usize, &mut f64)| {
                let cr = col[r];
                *out = m
                    .row(r)
                    .iter()
                    .zip(x)
                    .zip(&col)
                    .map(|((a, b), &c)| if c != cr { a * b } else { 0.0 })
                    .sum();
            };
            if d >= 512 {
                y.par_iter_mut().enumerate().for_each(body);
            } else {
                y.iter_mut().enumerate().for_each(body);
            }
        })?)
    }

    /// `‖Γ∘D_i‖` for every position `i = 1..=length`.
    pub fn masked_norms(&self, tol: f64) -> Result<Vec<f64>, AdversaryError> {
        (1..=self.problem.length)
            .into_par_iter()
            .map(|i| self.masked_norm(i, tol).map(|r| r.norm))
            .collect()
    }

    /// Entrywise multiple, keeping the problem.
    pub fn scaled(&self, c: f64) -> Self {
        AdversaryMatrix {
            problem: self.problem.clone(),
            matrix: self.matrix.map(|v| v * c),
            exact: None,
        }
    }
}

/// Variant labels `j` for tile rows, two bytes so `m` can exceed 255.
pub fn variant_labels(m: usize) -> Vec<Vec<u8>> {
    (0..m).map(|j| (j as u16).to_be_bytes().to_vec()).collect()
}

/// `m × m` tile of a uniform adversary matrix for a generalized search
/// function `problem` with labeling `labeling`.
#[derive(Clone, Debug)]
pub struct Tile {
    pub problem: Arc<QueryProblem>,
    pub labeling: SearchLabeling,
    pub matrix: LabeledMatrix<f64>,
    pub exact: Option<LabeledMatrix<BigRational>>,
}

impl Tile {
    pub fn from_exact(
        problem: Arc<QueryProblem>,
        labeling: SearchLabeling,
        exact: LabeledMatrix<BigRational>,
    ) -> Result<Self, AdversaryError> {
        let matrix = LabeledMatrix::from_rational(&exact).with_name(exact.name().to_string());
        Self::check_dim(&labeling, &matrix)?;
        Ok(Tile {
            problem,
            labeling,
            matrix,
            exact: Some(exact),
        })
    }

    pub fn from_float(
        problem: Arc<QueryProblem>,
        labeling: SearchLabeling,
        matrix: LabeledMatrix<f64>,
    ) -> Result<Self, AdversaryError> {
        Self::check_dim(&labeling, &matrix)?;
        Ok(Tile {
            problem,
            labeling,
            matrix,
            exact: None,
        })
    }

    fn check_dim(lab: &SearchLabeling, m: &LabeledMatrix<f64>) -> Result<(), AdversaryError> {
        if m.dim() != lab.variants {
            return Err(AdversaryError::TileMismatch {
                index: 1,
                reason: format!(
                    "tile is {0}x{0} but the labeling has {1} variants",
                    m.dim(),
                    lab.variants
                ),
            });
        }
        Ok(())
    }

    pub fn variants(&self) -> usize {
        self.labeling.variants
    }
}

/// `A_m[i,j] = 1/(|i−j|+1)` as a float matrix over variant labels.
pub fn hilbert_matrix(m: usize) -> LabeledMatrix<f64> {
    LabeledMatrix::from_fn(variant_labels(m), |i, j| 1.0 / ((i.abs_diff(j) + 1) as f64))
        .expect("hilbert matrix is symmetric")
        .with_name(format!("A_{m}"))
}

/// Interval mask `D_i[x,y] = 1` iff `x ≤ i ≤ y` or `y ≤ i ≤ x` (1-based).
pub fn hilbert_distinguisher(m: usize, i: usize) -> LabeledMatrix<f64> {
    LabeledMatrix::from_fn(variant_labels(m), |x, y| {
        let (lo, hi) = (x.min(y) + 1, x.max(y) + 1);
        if lo <= i && i <= hi {
            1.0
        } else {
            0.0
        }
    })
    .expect("interval mask is symmetric")
    .with_name(format!("D^A_{m},{i}"))
}

/// Hilbert-type tile for `HSOS_m`, exact entries.
pub fn hilbert_tile(m: usize) -> Result<Tile, AdversaryError> {
    let problem = Arc::new(make_hsos(m)?);
    let labeling = detect_search_labeling(&problem).ok_or(AdversaryError::NotSearch)?;
    let exact = LabeledMatrix::from_fn(variant_labels(m), |i, j| {
        ratio(1, (i.abs_diff(j) + 1) as i64)
    })?
    .with_name(format!("A_{m}"));
    Tile::from_exact(problem, labeling, exact)
}

/// `D^A_i`: entry `[a,b]` is 1 iff `(σ1,a)` and `(σ2,b)` differ at position
/// `i` for `σ1 ≠ σ2`.
pub fn tile_distinguisher(
    lab: &SearchLabeling,
    i: usize,
) -> Result<LabeledMatrix<f64>, AdversaryError> {
    if i == 0 || i > lab.length {
        return Err(ProblemError::PositionOutOfRange {
            i,
            length: lab.length,
        }
        .into());
    }
    let m = lab.variants;
    let mut entries = Vec::with_capacity(m * m);
    for a in 0..m {
        for b in 0..m {
            entries.push(match lab.cross[i - 1][a][b] {
                Cell::Differ => 1.0,
                Cell::Equal => 0.0,
                Cell::Undefined => {
                    return Err(AdversaryError::TilePattern {
                        i,
                        reason: format!(
                            "no pair with different answers at variants ({},{})",
                            a + 1,
                            b + 1
                        ),
                    })
                }
            });
        }
    }
    Ok(LabeledMatrix::new(variant_labels(m), entries)?.with_name(format!("D^A_{i}")))
}

/// `Γ_g[(σ1,a),(σ2,b)] = A[a,b]` if `σ1 ≠ σ2`, else 0.
pub fn uniform_from_tile(t: &Tile) -> Result<AdversaryMatrix, AdversaryError> {
    let p = t.problem.clone();
    let lab = &t.labeling;
    let at = |x: usize, y: usize| {
        let ((s1, a), (s2, b)) = (lab.of_instance[x], lab.of_instance[y]);
        (s1 != s2).then_some((a, b))
    };
    let name = format!("Γ[{}]", p.name);
    match &t.exact {
        Some(e) => {
            let m = LabeledMatrix::from_fn(p.labels(), |x, y| {
                at(x, y).map_or_else(<BigRational as Zero>::zero, |(a, b)| e.get(a, b).clone())
            })?;
            AdversaryMatrix::from_exact(p, m.with_name(name))
        }
        None => {
            let m = LabeledMatrix::from_fn(p.labels(), |x, y| {
                at(x, y).map_or(0.0, |(a, b)| *t.matrix.get(a, b))
            })?;
            AdversaryMatrix::new(p, m.with_name(name))
        }
    }
}

/// Ordered-search matrix `A_m − I` over `OS_m`.
pub fn os_adversary(m: usize) -> Result<AdversaryMatrix, AdversaryError> {
    let p = Arc::new(make_os(m)?);
    let e = LabeledMatrix::from_fn(p.labels(), |x, y| {
        if x == y {
            <BigRational as Zero>::zero()
        } else {
            ratio(1, (x.abs_diff(y) + 1) as i64)
        }
    })?
    .with_name(format!("Γ[OS_{m}]"));
    AdversaryMatrix::from_exact(p, e)
}

/// Random valid adversary matrix for `p`: independent uniform `[0,1)`
/// entries on every pair of instances with different answers.
pub fn random_adversary(
    p: Arc<QueryProblem>,
    rng: &mut impl Rng,
) -> Result<AdversaryMatrix, AdversaryError> {
    let n = p.len();
    let mut entries = vec![0.0; n * n];
    for x in 0..n {
        for y in x + 1..n {
            if p.instances[x].answer != p.instances[y].answer {
                let w: f64 = rng.gen();
                entries[x * n + y] = w;
                entries[y * n + x] = w;
            }
        }
    }
    let m = LabeledMatrix::new(p.labels(), entries)?.with_name(format!("Γ~[{}]", p.name));
    AdversaryMatrix::new(p, m)
}

/// Variant index of block `d` of composed instance `x`.
fn variant(h: &QueryProblem, tiles: &[Tile], x: usize, d: usize) -> usize {
    let inner = h.instances[x]
        .parts
        .as_ref()
        .expect("composed instance")
        .inner[d];
    tiles[d].labeling.of_instance[inner].1
}

fn check_tiles(outer: &AdversaryMatrix, tiles: &[Tile]) -> Result<QueryProblem, AdversaryError> {
    if tiles.len() != outer.problem.length {
        return Err(ProblemError::ArityMismatch {
            expected: outer.problem.length,
            got: tiles.len(),
        }
        .into());
    }
    for (index, t) in tiles.iter().enumerate() {
        if t.matrix.dim() != t.labeling.variants || t.labeling.length != t.problem.length {
            return Err(AdversaryError::TileMismatch {
                index: index + 1,
                reason: "tile size does not match its labeling".into(),
            });
        }
    }
    let gs: Vec<QueryProblem> = tiles.iter().map(|t| (*t.problem).clone()).collect();
    Ok(compose(&outer.problem, &gs)?)
}

/// Entries `Γ_h[x,y] = outer[x̃,ỹ] · ∏_d block(d, x̃_d = ỹ_d, a_d, b_d)` where
/// `a_d, b_d` are the variants of block `d`.
fn composed_entries<T: Scalar>(
    h: &QueryProblem,
    tiles: &[Tile],
    outer: &LabeledMatrix<T>,
    block: impl Fn(usize, bool, usize, usize) -> T + Sync,
    is_zero: impl Fn(&T) -> bool + Sync,
) -> Vec<T> {
    let n = h.len();
    let k = tiles.len();
    let vars: Vec<Vec<usize>> = (0..n)
        .map(|x| (0..k).map(|d| variant(h, tiles, x, d)).collect())
        .collect();
    let parts: Vec<_> = h
        .instances
        .iter()
        .map(|x| x.parts.as_ref().expect("composed"))
        .collect();
    (0..n)
        .into_par_iter()
        .flat_map_iter(|x| {
            let (vars, parts, block, is_zero) = (&vars, &parts, &block, &is_zero);
            (0..n).map(move |y| {
                let mut v = outer.get(parts[x].outer, parts[y].outer).clone();
                for d in 0..k {
                    if is_zero(&v) {
                        break;
                    }
                    let same = parts[x].tilde[d] == parts[y].tilde[d];
                    v = v.times(&block(d, same, vars[x][d], vars[y][d]));
                }
                v
            })
        })
        .collect()
}

/// The composition adversary matrix generated by `outer` and one tile per
/// position of the outer function. `‖A_d‖` is computed once per tile.
pub fn compose_adversary(
    outer: &AdversaryMatrix,
    tiles: &[Tile],
) -> Result<AdversaryMatrix, AdversaryError> {
    compose_adversary_tol(outer, tiles, DEFAULT_TOL)
}

pub fn compose_adversary_tol(
    outer: &AdversaryMatrix,
    tiles: &[Tile],
    tol: f64,
) -> Result<AdversaryMatrix, AdversaryError> {
    let h = check_tiles(outer, tiles)?;
    let norms = tiles
        .iter()
        .map(|t| spectral_norm(&t.matrix, tol).map(|r| r.norm))
        .collect::<Result<Vec<_>, _>>()?;
    let entries = composed_entries(
        &h,
        tiles,
        &outer.matrix,
        |d, same, a, b| match (same, a == b) {
            (true, true) => norms[d],
            (true, false) => 0.0,
            (false, _) => *tiles[d].matrix.get(a, b),
        },
        |v| *v == 0.0,
    );
    let name = format!("Γ[{}]", h.name);
    let m = LabeledMatrix::new(h.labels(), entries)?.with_name(name);
    AdversaryMatrix::new(Arc::new(h), m)
}

/// `δ_h[x] = δ_f[x̃] · ∏_d δ_{A_d}[a_d]`, normalized.
pub fn composed_eigenvector(
    h: &QueryProblem,
    outer_vec: &[f64],
    tiles: &[Tile],
    tile_vecs: &[Vec<f64>],
) -> Vec<f64> {
    let mut v: Vec<f64> = (0..h.len())
        .map(|x| {
            let outer = h.instances[x].parts.as_ref().expect("composed").outer;
            (0..tiles.len()).fold(outer_vec[outer], |acc, d| {
                acc * tile_vecs[d][variant(h, tiles, x, d)]
            })
        })
        .collect();
    let n = v.iter().map(|e| e * e).sum::<f64>().sqrt();
    v.iter_mut().for_each(|e| *e /= n);
    v
}

/// Symbolic norm appearing in an exact entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NormToken {
    /// `‖A_d‖` (0-based tile index).
    Tile(usize),
    /// `‖A_p ∘ D^{A_p}_q‖` (0-based tile, 1-based position).
    MaskedTile(usize, usize),
}

impl fmt::Display for NormToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormToken::Tile(d) => write!(f, "‖A{}‖", d + 1),
            NormToken::MaskedTile(p, q) => write!(f, "‖A{}∘D{}‖", p + 1, q),
        }
    }
}

/// `coeff · ∏ factors`, with the factor multiset kept sorted. Zero has no
/// factors, so equality is exact equality of the represented quantity over
/// independent symbols.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Monomial {
    pub coeff: BigRational,
    pub factors: Vec<NormToken>,
}

impl Monomial {
    pub fn constant(c: BigRational) -> Self {
        Monomial {
            coeff: c,
            factors: Vec::new(),
        }
    }

    pub fn token(t: NormToken) -> Self {
        Monomial {
            coeff: <BigRational as One>::one(),
            factors: vec![t],
        }
    }
}

impl Mul for &Monomial {
    type Output = Monomial;

    fn mul(self, rhs: &Monomial) -> Monomial {
        let coeff = &self.coeff * &rhs.coeff;
        if coeff.is_zero() {
            return Monomial::constant(coeff);
        }
        let mut factors: Vec<NormToken> =
            self.factors.iter().chain(&rhs.factors).copied().collect();
        factors.sort_unstable();
        Monomial { coeff, factors }
    }
}

impl Scalar for Monomial {
    fn zero() -> Self {
        Monomial::constant(<BigRational as Zero>::zero())
    }
    fn one() -> Self {
        Monomial::constant(<BigRational as One>::one())
    }
    fn times(&self, other: &Self) -> Self {
        self * other
    }
    fn is_nonnegative(&self) -> bool {
        !self.coeff.is_negative()
    }
    fn symmetric_eq(&self, other: &Self) -> bool {
        self == other
    }
    fn render(&self) -> String {
        std::iter::once(self.coeff.render())
            .chain(self.factors.iter().map(ToString::to_string))
            .join("·")
    }
}

fn exact_of<'a>(
    m: &'a Option<LabeledMatrix<BigRational>>,
    what: &str,
) -> Result<&'a LabeledMatrix<BigRational>, AdversaryError> {
    m.as_ref()
        .ok_or_else(|| AdversaryError::MissingExact(what.to_string()))
}

/// Composition adversary matrix with each `‖A_d‖` kept as a symbol.
pub fn compose_symbolic(
    outer: &AdversaryMatrix,
    tiles: &[Tile],
) -> Result<(QueryProblem, LabeledMatrix<Monomial>), AdversaryError> {
    let h = check_tiles(outer, tiles)?;
    let f = exact_of(&outer.exact, "outer matrix")?.map(|c| Monomial::constant(c.clone()));
    let a: Vec<&LabeledMatrix<BigRational>> = tiles
        .iter()
        .enumerate()
        .map(|(d, t)| exact_of(&t.exact, &format!("tile {}", d + 1)))
        .collect::<Result<_, _>>()?;
    let entries = composed_entries(
        &h,
        tiles,
        &f,
        |d, same, x, y| match (same, x == y) {
            (true, true) => Monomial::token(NormToken::Tile(d)),
            (true, false) => Monomial::zero(),
            (false, _) => Monomial::constant(a[d].get(x, y).clone()),
        },
        |v| v.coeff.is_zero(),
    );
    let m = LabeledMatrix::new(h.labels(), entries)?;
    Ok((h, m))
}

/// First entry where `Γ_h ∘ D^h_i` differs from the composition generated by
/// `Γ_f ∘ D^f_p`, the tiles `A_d` (`d ≠ p`) and `A_p ∘ D^{A_p}_q`, evaluated
/// exactly with symbolic norms. `None` means the two agree everywhere.
pub fn denominator_mismatch(
    outer: &AdversaryMatrix,
    tiles: &[Tile],
    i: usize,
) -> Result<Option<(usize, usize, String, String)>, AdversaryError> {
    let (h, gamma_h) = compose_symbolic(outer, tiles)?;
    let dh = distinguisher(&h, i)?.map(|&v| Monomial::constant(ratio(v as i64, 1)));
    let lhs = crate::spectral::hadamard(&gamma_h, &dh)?;

    let (p, q) = h.block_of(i);
    let (p0, q0) = (p - 1, q);
    let f = exact_of(&outer.exact, "outer matrix")?;
    let df = distinguisher(&outer.problem, p)?;
    let masked_outer =
        f.same_labels(|x, y| Monomial::constant(f.get(x, y) * ratio(*df.get(x, y) as i64, 1)));
    let dq = tile_distinguisher(&tiles[p0].labeling, q)?;
    let a: Vec<&LabeledMatrix<BigRational>> = tiles
        .iter()
        .enumerate()
        .map(|(d, t)| exact_of(&t.exact, &format!("tile {}", d + 1)))
        .collect::<Result<_, _>>()?;
    let rhs = composed_entries(
        &h,
        tiles,
        &masked_outer,
        |d, same, x, y| {
            let masked = d == p0;
            match (same, x == y) {
                (true, true) if masked => Monomial::token(NormToken::MaskedTile(p0, q0)),
                (true, true) => Monomial::token(NormToken::Tile(d)),
                (true, false) => Monomial::zero(),
                (false, _) if masked => {
                    Monomial::constant(a[d].get(x, y) * ratio(*dq.get(x, y) as i64, 1))
                }
                (false, _) => Monomial::constant(a[d].get(x, y).clone()),
            }
        },
        |v| v.coeff.is_zero(),
    );
    let n = h.len();
    for x in 0..n {
        for y in 0..n {
            let (l, r) = (lhs.get(x, y), &rhs[x * n + y]);
            if l != r {
                return Ok(Some((x, y, l.render(), r.render())));
            }
        }
    }
    Ok(None)
}

/// `1 − 2√(ε(1−ε))`.
pub fn lb_factor(eps: f64) -> f64 {
    1.0 - 2.0 * (eps * (1.0 - eps)).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub sa_value: f64,
    /// 1-based position attaining the largest `‖Γ∘D_i‖`.
    pub worst_position: usize,
    pub numerator: f64,
    pub denominator: f64,
    pub epsilon: f64,
    pub query_lower_bound: f64,
}

impl BoundReport {
    pub fn from_parts(
        numerator: f64,
        denominators: &[f64],
        eps: f64,
    ) -> Result<Self, AdversaryError> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(AdversaryError::BadEpsilon(eps));
        }
        let (worst, &denominator) = denominators
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .ok_or(AdversaryError::ZeroDenominator)?;
        if denominator <= 0.0 {
            return Err(AdversaryError::ZeroDenominator);
        }
        let sa_value = numerator / denominator;
        Ok(BoundReport {
            sa_value,
            worst_position: worst + 1,
            numerator,
            denominator,
            epsilon: eps,
            query_lower_bound: lb_factor(eps) * sa_value,
        })
    }
}

/// `‖Γ‖ / max_i ‖Γ∘D_i‖` and the implied bounded-error query lower bound.
pub fn sa_ratio(g: &AdversaryMatrix, eps: f64) -> Result<BoundReport, AdversaryError> {
    sa_ratio_tol(g, eps, DEFAULT_TOL)
}

pub fn sa_ratio_tol(
    g: &AdversaryMatrix,
    eps: f64,
    tol: f64,
) -> Result<BoundReport, AdversaryError> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(AdversaryError::BadEpsilon(eps));
    }
    let numerator = spectral_norm(&g.matrix, tol)?.norm;
    let denominators = g.masked_norms(tol)?;
    BoundReport::from_parts(numerator, &denominators, eps)
}

/// `min_q ‖A‖ / ‖A∘D^A_q‖` with the minimizing 1-based `q`.
pub fn tile_ratio(t: &Tile, tol: f64) -> Result<(f64, usize), AdversaryError> {
    let norm = spectral_norm(&t.matrix, tol)?.norm;
    let mut best = (f64::INFINITY, 0);
    for q in 1..=t.labeling.length {
        let masked = crate::spectral::hadamard(&t.matrix, &tile_distinguisher(&t.labeling, q)?)?;
        let r = norm / spectral_norm(&masked, tol)?.norm;
        if r < best.0 {
            best = (r, q);
        }
    }
    Ok(best)
}

/// Output of [`symmetrize`].
#[derive(Clone, Debug)]
pub struct Symmetrized {
    pub matrix: AdversaryMatrix,
    /// Factor applied to the input so that `max_i ‖Γ∘D_i‖ = 1`.
    pub scale: f64,
    /// Instances whose permuted eigenvector weights all fell below
    /// [`ZERO_ROW_THRESHOLD`]; their rows and columns are zero.
    pub dropped: Vec<usize>,
}

/// Averages `Γ` over all permutations of the answers, weighting each
/// permuted copy by its permuted principal eigenvector.
///
/// Every sum runs over its terms in sorted order, so entries that are equal
/// as multisets of terms come out bitwise equal and the result is exactly
/// uniform.
pub fn symmetrize(
    g: &AdversaryMatrix,
    lab: &SearchLabeling,
) -> Result<Symmetrized, AdversaryError> {
    let s = lab.symbols();
    if s > MAX_SYMMETRIZE_SYMBOLS {
        return Err(AdversaryError::TooManySymbols(s));
    }
    if lab.of_instance.len() != g.dim() {
        return Err(AdversaryError::LabelsDiffer {
            problem: g.problem.name.clone(),
        });
    }
    let den = g.masked_norms(DEFAULT_TOL)?.into_iter().fold(0.0, f64::max);
    if den <= 0.0 {
        return Err(AdversaryError::ZeroDenominator);
    }
    let scale = 1.0 / den;
    let gn = g.matrix.map(|v| v * scale);
    let delta = spectral_norm(&gn, DEFAULT_TOL)?.eigenvector;

    let perms: Vec<Vec<usize>> = (0..s).permutations(s).collect();
    let act = |pi: &[usize], x: usize| {
        let (sigma, j) = lab.of_instance[x];
        lab.instance_of[pi[sigma]][j]
    };
    let sorted_sum = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v.into_iter().sum::<f64>()
    };
    let n = g.dim();
    let beta: Vec<f64> = (0..n)
        .map(|x| sorted_sum(perms.iter().map(|pi| delta[act(pi, x)].powi(2)).collect()).sqrt())
        .collect();
    let dropped: Vec<usize> = (0..n).filter(|&x| beta[x] <= ZERO_ROW_THRESHOLD).collect();
    let entries: Vec<f64> = (0..n)
        .flat_map(|x| (0..n).map(move |y| (x, y)))
        .map(|(x, y)| {
            if beta[x] <= ZERO_ROW_THRESHOLD || beta[y] <= ZERO_ROW_THRESHOLD {
                return 0.0;
            }
            let terms = perms
                .iter()
                .map(|pi| {
                    let (px, py) = (act(pi, x), act(pi, y));
                    gn.get(px, py) * (delta[px] * delta[py])
                })
                .collect();
            sorted_sum(terms) / (beta[x] * beta[y])
        })
        .collect();
    let m = LabeledMatrix::new(g.problem.labels(), entries)?
        .with_name(format!("Γ'[{}]", g.problem.name));
    Ok(Symmetrized {
        matrix: AdversaryMatrix::new(g.problem.clone(), m)?,
        scale,
        dropped,
    })
}

/// Extracts the tile of a uniform matrix, failing on the first pair of
/// entries that uniformity would force to be equal.
pub fn tile_of_uniform(g: &AdversaryMatrix, lab: &SearchLabeling) -> Result<Tile, AdversaryError> {
    let m = lab.variants;
    let s = lab.symbols();
    let p = &g.problem;
    if s < 2 {
        return Err(AdversaryError::TilePattern {
            i: 0,
            reason: "a single answer leaves the tile undetermined".into(),
        });
    }
    let at = |s1: usize, a: usize, s2: usize, b: usize| {
        let (x, y) = (lab.instance_of[s1][a], lab.instance_of[s2][b]);
        (x, y, *g.matrix.get(x, y))
    };
    let mut entries = Vec::with_capacity(m * m);
    for a in 0..m {
        for b in 0..m {
            let (x1, y1, v1) = at(0, a, 1, b);
            for s1 in 0..s {
                for s2 in (0..s).filter(|&s2| s2 != s1) {
                    let (x2, y2, v2) = at(s1, a, s2, b);
                    if v2 != v1 {
                        return Err(AdversaryError::NotUniform {
                            x1: p.render(x1),
                            y1: p.render(y1),
                            v1,
                            x2: p.render(x2),
                            y2: p.render(y2),
                            v2,
                        });
                    }
                }
            }
            entries.push(v1);
        }
    }
    let matrix =
        LabeledMatrix::new(variant_labels(m), entries)?.with_name(format!("A[{}]", p.name));
    Tile::from_float(g.problem.clone(), lab.clone(), matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::make_nos;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_adversary_is_valid_and_seeded() {
        let p = Arc::new(make_hsos(3).unwrap());
        let a = random_adversary(p.clone(), &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = random_adversary(p.clone(), &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a.matrix.entries(), b.matrix.entries());
        assert!(a.matrix.entries().iter().any(|&v| v > 0.0));
        for x in 0..p.len() {
            for y in 0..p.len() {
                if p.instances[x].answer == p.instances[y].answer {
                    assert_eq!(*a.matrix.get(x, y), 0.0);
                }
            }
        }
    }

    #[test]
    fn hilbert_tile_entries() {
        assert_eq!(
            hilbert_tile(1).unwrap().exact.unwrap().entries(),
            &[ratio(1, 1)]
        );
        let t = hilbert_tile(2).unwrap();
        assert_eq!(
            t.exact.as_ref().unwrap().entries(),
            &[ratio(1, 1), ratio(1, 2), ratio(1, 2), ratio(1, 1)]
        );
        let e = hilbert_tile(3).unwrap().exact.unwrap();
        assert!((0..3).all(|i| *e.get(i, i) == ratio(1, 1)));
        assert_eq!(*e.get(0, 2), ratio(1, 3));
        assert_eq!(
            hilbert_matrix(3),
            LabeledMatrix::from_rational(&e).with_name("A_3")
        );
    }

    #[test]
    fn tile_distinguisher_examples() {
        let t = hilbert_tile(3).unwrap();
        let d = tile_distinguisher(&t.labeling, 2).unwrap();
        assert_eq!(d.entries(), &[0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0]);
        let d = tile_distinguisher(&t.labeling, 1).unwrap();
        assert_eq!(d.entries(), &[1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let one = hilbert_tile(1).unwrap();
        assert_eq!(
            tile_distinguisher(&one.labeling, 1).unwrap().entries(),
            &[1.0]
        );
    }

    #[test]
    fn tile_distinguisher_matches_interval_rule() {
        for m in 1..=12 {
            let t = hilbert_tile(m).unwrap();
            for i in 1..=m {
                assert_eq!(
                    tile_distinguisher(&t.labeling, i).unwrap().entries(),
                    hilbert_distinguisher(m, i).entries(),
                    "m={m} i={i}"
                );
            }
        }
    }

    #[test]
    fn single_answer_pattern_is_undefined() {
        let lab = detect_search_labeling(&make_os(1).unwrap()).unwrap();
        assert!(matches!(
            tile_distinguisher(&lab, 1),
            Err(AdversaryError::TilePattern { i: 1, .. })
        ));
    }

    #[test]
    fn uniform_examples() {
        let g = uniform_from_tile(&hilbert_tile(1).unwrap()).unwrap();
        assert_eq!(
            g.matrix.entries(),
            &[0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0]
        );

        let t2 = hilbert_tile(2).unwrap();
        let g = uniform_from_tile(&t2).unwrap();
        let r = spectral_norm(&g.matrix, DEFAULT_TOL).unwrap();
        assert!((r.norm - 3.0).abs() < 1e-9);
        let p = &g.problem;
        let (x, y) = (p.find("↑←").unwrap(), p.find("→↑").unwrap());
        assert_eq!(*g.matrix.get(x, y), 0.0);
    }

    #[test]
    fn ordered_search_matrix() {
        let g = os_adversary(2).unwrap();
        assert_eq!(g.matrix.entries(), &[0.0, 0.5, 0.5, 0.0]);
        assert!((spectral_norm(&g.matrix, DEFAULT_TOL).unwrap().norm - 0.5).abs() < 1e-12);
        assert_eq!(os_adversary(1).unwrap().matrix.entries(), &[0.0]);
        assert_eq!(
            *os_adversary(3).unwrap().exact.unwrap().get(0, 2),
            ratio(1, 3)
        );
    }

    #[test]
    fn rejects_nonzero_same_answer_entry() {
        let p = Arc::new(make_hsos(1).unwrap());
        let m = LabeledMatrix::new(p.labels(), vec![1.0; 9]).unwrap();
        assert!(matches!(
            AdversaryMatrix::new(p, m),
            Err(AdversaryError::SameAnswerNonzero { .. })
        ));
    }

    #[test]
    fn sa_ratio_examples() {
        let r = sa_ratio(&os_adversary(2).unwrap(), 1.0 / 3.0).unwrap();
        assert!((r.sa_value - 1.0).abs() < 1e-9);
        assert!((lb_factor(1.0 / 3.0) - 0.057190958).abs() < 1e-8);
        assert!((r.query_lower_bound - lb_factor(1.0 / 3.0)).abs() < 1e-9);
        assert!(matches!(
            sa_ratio(&os_adversary(2).unwrap(), 0.5),
            Err(AdversaryError::BadEpsilon(_))
        ));
        assert!(matches!(
            sa_ratio(&os_adversary(1).unwrap(), 0.25),
            Err(AdversaryError::ZeroDenominator)
        ));
    }

    #[test]
    fn hilbert_two_tile_ratio() {
        let (r, _) = tile_ratio(&hilbert_tile(2).unwrap(), DEFAULT_TOL).unwrap();
        let want = 1.5 / ((1.0 + 2f64.sqrt()) / 2.0);
        assert!((r - want).abs() < 1e-9);
        assert!((r - 1.2426).abs() < 1e-4);
    }

    #[test]
    fn composed_norm_small_cases() {
        let outer = AdversaryMatrix::from_exact(
            Arc::new(make_os(1).unwrap()),
            LabeledMatrix::new(vec![vec![2]], vec![ratio(0, 1)]).unwrap(),
        )
        .unwrap();
        let g = compose_adversary(&outer, &[hilbert_tile(2).unwrap()]).unwrap();
        assert!(g.matrix.entries().iter().all(|&v| v == 0.0));

        let h = compose_adversary(
            &os_adversary(2).unwrap(),
            &[hilbert_tile(2).unwrap(), hilbert_tile(2).unwrap()],
        )
        .unwrap();
        assert_eq!(h.dim(), make_nos(2, 2).unwrap().len());
        assert_eq!(h.problem.instances, make_nos(2, 2).unwrap().instances);
        let r = spectral_norm(&h.matrix, DEFAULT_TOL).unwrap();
        assert!((r.norm - 1.125).abs() < 1e-9, "{}", r.norm);
        let sa = sa_ratio(&h, 1.0 / 3.0).unwrap();
        assert!(sa.sa_value >= 1.2426 - 1e-4);
    }

    #[test]
    fn composed_eigenvector_is_exact() {
        let outer = os_adversary(3).unwrap();
        let tiles = vec![
            hilbert_tile(2).unwrap(),
            hilbert_tile(3).unwrap(),
            hilbert_tile(2).unwrap(),
        ];
        let h = compose_adversary(&outer, &tiles).unwrap();
        let vf = spectral_norm(&outer.matrix, 1e-12).unwrap();
        let vt: Vec<SpectralResult> = tiles
            .iter()
            .map(|t| spectral_norm(&t.matrix, 1e-12).unwrap())
            .collect();
        let vecs: Vec<Vec<f64>> = vt.iter().map(|r| r.eigenvector.clone()).collect();
        let dh = composed_eigenvector(&h.problem, &vf.eigenvector, &tiles, &vecs);
        let lambda = vf.norm * vt.iter().map(|r| r.norm).product::<f64>();
        let mut w = vec![0.0; dh.len()];
        h.matrix.matvec(&dh, &mut w);
        let res = w
            .iter()
            .zip(&dh)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(res <= 1e-9, "{res}");
    }

    #[test]
    fn elementwise_denominator_identity_small() {
        let outer = os_adversary(2).unwrap();
        let tiles = vec![hilbert_tile(2).unwrap(), hilbert_tile(3).unwrap()];
        for i in 1..=5 {
            assert_eq!(
                denominator_mismatch(&outer, &tiles, i).unwrap(),
                None,
                "i={i}"
            );
        }
    }

    #[test]
    fn symbolic_entries_keep_norm_tokens() {
        let outer = os_adversary(3).unwrap();
        let tiles = vec![hilbert_tile(2).unwrap(); 3];
        let (h, sym) = compose_symbolic(&outer, &tiles).unwrap();
        assert_eq!(sym.dim(), h.len());
        let x = h.find("↑←,*←,↓←").unwrap();
        let y = h.find("*←,→↓,↓←").unwrap();
        // Outer 1/2, block 1 crosses ↑/* at variants (1,1), block 2 crosses
        // */↓ at variants (1,2), block 3 repeats the same inner instance.
        let e = sym.get(x, y);
        assert_eq!(e.factors, vec![NormToken::Tile(2)]);
        assert_eq!(e.coeff, ratio(1, 2) * ratio(1, 2));
        let z = h.find("↑←,↑←,*←").unwrap();
        assert_eq!(sym.get(x, z).render(), "1/2·‖A1‖");
        let w = h.find("→↑,↑←,*←").unwrap();
        assert_eq!(sym.get(x, w), &Monomial::zero());
    }

    #[test]
    fn uniform_input_is_a_fixed_point_of_symmetrization() {
        let t = hilbert_tile(3).unwrap();
        let g = uniform_from_tile(&t).unwrap();
        let s = symmetrize(&g, &t.labeling).unwrap();
        assert!(s.dropped.is_empty());
        for (a, b) in s.matrix.matrix.entries().iter().zip(g.matrix.entries()) {
            assert!((a - b * s.scale).abs() < 1e-8);
        }
        let back = tile_of_uniform(&s.matrix, &t.labeling).unwrap();
        assert_eq!(back.variants(), 3);
    }

    #[test]
    fn tile_round_trip_and_non_uniform_error() {
        let t = hilbert_tile(3).unwrap();
        let g = uniform_from_tile(&t).unwrap();
        let back = tile_of_uniform(&g, &t.labeling).unwrap();
        assert_eq!(back.matrix.entries(), t.matrix.entries());

        let mut e = g.matrix.entries().to_vec();
        let p = &g.problem;
        let (x, y) = (p.find("↓←←").unwrap(), p.find("*←←").unwrap());
        e[x * g.dim() + y] = 0.25;
        e[y * g.dim() + x] = 0.25;
        let bad = AdversaryMatrix::new(
            g.problem.clone(),
            LabeledMatrix::new(p.labels(), e).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            tile_of_uniform(&bad, &t.labeling),
            Err(AdversaryError::NotUniform { .. })
        ));
    }

    #[test]
    fn monomial_products_are_canonical() {
        let a = Monomial::token(NormToken::Tile(1));
        let b = Monomial::token(NormToken::Tile(0));
        assert_eq!(&a * &b, &b * &a);
        assert_eq!((&a * &Monomial::zero()), Monomial::zero());
        assert_eq!((&a * &b).render(), "1·‖A1‖·‖A2‖");
    }
}
