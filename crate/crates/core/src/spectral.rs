//! Dense nonnegative symmetric matrices indexed by instance labels.
//!
//! A [`LabeledMatrix`] keeps its row/column labels next to the entries so that
//! Hadamard products can refuse mismatched operands and tensor products can
//! build the concatenated labels of composed instances. Entries are generic
//! over [`Scalar`]: `f64` for spectral work, [`BigRational`] when an identity
//! has to hold exactly.
//!
//! Norms are computed by [`spectral_norm`], a restarted Lanczos iteration with
//! full reorthogonalization started from a perturbed all-ones vector.

use std::collections::HashSet;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

/// Default relative tolerance for [`spectral_norm`].
pub const DEFAULT_TOL: f64 = 1e-9;

/// Absolute slack used when float matrices are checked for symmetry.
pub const FLOAT_SYMMETRY_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("expected {expected} entries for a {dim}x{dim} matrix, got {got}")]
    EntryCount {
        dim: usize,
        expected: usize,
        got: usize,
    },
    #[error("matrix must have at least one row")]
    Empty,
    #[error("duplicate label {label:?} at index {index}")]
    DuplicateLabel { index: usize, label: String },
    #[error("entries [{x},{y}] and [{y},{x}] differ")]
    NotSymmetric { x: usize, y: usize },
    #[error("entry [{x},{y}] is negative")]
    Negative { x: usize, y: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("labels differ first at index {index}: {left:?} vs {right:?}")]
    LabelMismatch {
        index: usize,
        left: String,
        right: String,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("tolerance must be positive and finite, got {0}")]
    BadTolerance(f64),
    #[error(
        "no convergence for `{name}` (dim {dim}) after {matvecs} products; residual {residual:e}"
    )]
    NoConvergence {
        name: String,
        dim: usize,
        matvecs: usize,
        residual: f64,
    },
}

/// Entry type of a [`LabeledMatrix`].
pub trait Scalar: Clone + fmt::Debug + Send + Sync {
    fn zero() -> Self;
    fn one() -> Self;
    fn times(&self, other: &Self) -> Self;
    fn is_nonnegative(&self) -> bool;
    /// Equality used by the symmetry check.
    fn symmetric_eq(&self, other: &Self) -> bool;
    /// Decimal rendering for JSON dumps.
    fn render(&self) -> String;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn times(&self, other: &Self) -> Self {
        self * other
    }
    fn is_nonnegative(&self) -> bool {
        *self >= 0.0
    }
    fn symmetric_eq(&self, other: &Self) -> bool {
        (self - other).abs() <= FLOAT_SYMMETRY_SLACK
    }
    fn render(&self) -> String {
        // `{:?}` on f64 is the shortest round-trip representation.
        format!("{self:?}")
    }
}

impl Scalar for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn times(&self, other: &Self) -> Self {
        self * other
    }
    fn is_nonnegative(&self) -> bool {
        !self.is_negative()
    }
    fn symmetric_eq(&self, other: &Self) -> bool {
        self == other
    }
    fn render(&self) -> String {
        if self.is_integer() {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }
}

/// Exact rational `p/q`.
pub fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

/// Nearest `f64` to an exact rational.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// Renders a byte label for diagnostics.
pub fn label_string(label: &[u8]) -> String {
    label
        .iter()
        .map(|b| b.to_string())
        .collect::<Vec<_>>()
        .join(".")
}

/// Square symmetric nonnegative matrix with distinct byte-string labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledMatrix<T = f64> {
    name: String,
    dim: usize,
    labels: Vec<Vec<u8>>,
    entries: Vec<T>,
}

impl<T: Scalar> LabeledMatrix<T> {
    /// Builds a matrix from row-major entries, validating every invariant.
    pub fn new(labels: Vec<Vec<u8>>, entries: Vec<T>) -> Result<Self, MatrixError> {
        let m = Self::new_unchecked(labels, entries)?;
        m.validate()?;
        Ok(m)
    }

    /// Builds a matrix from `f(x, y)`, validating every invariant.
    pub fn from_fn(
        labels: Vec<Vec<u8>>,
        mut f: impl FnMut(usize, usize) -> T,
    ) -> Result<Self, MatrixError> {
        let dim = labels.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for x in 0..dim {
            for y in 0..dim {
                entries.push(f(x, y));
            }
        }
        Self::new(labels, entries)
    }

    /// Checks shape and label distinctness only. Callers that construct the
    /// entries symmetrically by design use this to skip the O(d²) scan.
    pub(crate) fn new_unchecked(
        labels: Vec<Vec<u8>>,
        entries: Vec<T>,
    ) -> Result<Self, MatrixError> {
        let dim = labels.len();
        if dim == 0 {
            return Err(MatrixError::Empty);
        }
        if entries.len() != dim * dim {
            return Err(MatrixError::EntryCount {
                dim,
                expected: dim * dim,
                got: entries.len(),
            });
        }
        let mut seen = HashSet::with_capacity(dim);
        for (index, l) in labels.iter().enumerate() {
            if !seen.insert(l.as_slice()) {
                return Err(MatrixError::DuplicateLabel {
                    index,
                    label: label_string(l),
                });
            }
        }
        Ok(Self {
            name: "matrix".to_string(),
            dim,
            labels,
            entries,
        })
    }

    /// Symmetry and nonnegativity scan.
    pub fn validate(&self) -> Result<(), MatrixError> {
        for x in 0..self.dim {
            for y in x..self.dim {
                let a = self.get(x, y);
                if !a.is_nonnegative() {
                    return Err(MatrixError::Negative { x, y });
                }
                if !a.symmetric_eq(self.get(y, x)) {
                    return Err(MatrixError::NotSymmetric { x, y });
                }
            }
        }
        Ok(())
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[Vec<u8>] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &[u8] {
        &self.labels[i]
    }

    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.entries[x * self.dim + y]
    }

    pub fn row(&self, x: usize) -> &[T] {
        &self.entries[x * self.dim..(x + 1) * self.dim]
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    /// Applies `f` entrywise, keeping labels and name.
    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> LabeledMatrix<U> {
        LabeledMatrix {
            name: self.name.clone(),
            dim: self.dim,
            labels: self.labels.clone(),
            entries: self.entries.iter().map(f).collect(),
        }
    }

    /// Matrix with the same labels and entries from `f(x, y)`, no validation.
    pub(crate) fn same_labels<U: Scalar>(
        &self,
        mut f: impl FnMut(usize, usize) -> U,
    ) -> LabeledMatrix<U> {
        let mut entries = Vec::with_capacity(self.dim * self.dim);
        for x in 0..self.dim {
            for y in 0..self.dim {
                entries.push(f(x, y));
            }
        }
        LabeledMatrix {
            name: self.name.clone(),
            dim: self.dim,
            labels: self.labels.clone(),
            entries,
        }
    }

    /// Row/column submatrix on `keep` (in the given order).
    pub fn restrict(&self, keep: &[usize]) -> Result<Self, MatrixError> {
        let labels = keep.iter().map(|&i| self.labels[i].clone()).collect();
        let mut entries = Vec::with_capacity(keep.len() * keep.len());
        for &x in keep {
            for &y in keep {
                entries.push(self.get(x, y).clone());
            }
        }
        Ok(Self::new_unchecked(labels, entries)?.with_name(self.name.clone()))
    }

    /// JSON dump `{"dim", "labels", "entries"}` with entries as decimal strings.
    pub fn to_json(&self, render_label: impl Fn(&[u8]) -> String) -> Value {
        let entries: Vec<Vec<String>> = (0..self.dim)
            .map(|x| self.row(x).iter().map(Scalar::render).collect())
            .collect();
        let labels: Vec<String> = self.labels.iter().map(|l| render_label(l)).collect();
        json!({ "dim": self.dim, "labels": labels, "entries": entries })
    }
}

impl LabeledMatrix<f64> {
    /// Float image of an exact matrix.
    pub fn from_rational(m: &LabeledMatrix<BigRational>) -> Self {
        m.map(rational_to_f64)
    }

    /// `y = M x`, parallel over rows for large matrices.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let d = self.dim;
        let row_dot = |(r, out): (usize, &mut f64)| {
            let row = &self.entries[r * d..(r + 1) * d];
            *out = row.iter().zip(x).map(|(a, b)| a * b).sum();
        };
        if d >= 512 {
            y.par_iter_mut().enumerate().for_each(row_dot);
        } else {
            y.iter_mut().enumerate().for_each(row_dot);
        }
    }

    /// `v·Mv / v·v`.
    pub fn rayleigh(&self, v: &[f64]) -> f64 {
        let mut w = vec![0.0; self.dim];
        self.matvec(v, &mut w);
        dot(v, &w) / dot(v, v)
    }

    pub fn max_abs_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for x in 0..self.dim {
            for y in x + 1..self.dim {
                worst = worst.max((self.get(x, y) - self.get(y, x)).abs());
            }
        }
        worst
    }
}

fn first_label_mismatch<T, U>(a: &LabeledMatrix<T>, b: &LabeledMatrix<U>) -> Option<MatrixError> {
    if a.dim != b.dim {
        return Some(MatrixError::DimensionMismatch {
            left: a.dim,
            right: b.dim,
        });
    }
    a.labels
        .iter()
        .zip(&b.labels)
        .position(|(l, r)| l != r)
        .map(|index| MatrixError::LabelMismatch {
            index,
            left: label_string(&a.labels[index]),
            right: label_string(&b.labels[index]),
        })
}

/// Entrywise product. Both operands must carry identical label orders.
pub fn hadamard<T: Scalar>(
    a: &LabeledMatrix<T>,
    b: &LabeledMatrix<T>,
) -> Result<LabeledMatrix<T>, MatrixError> {
    if let Some(e) = first_label_mismatch(a, b) {
        return Err(e);
    }
    let entries = a
        .entries
        .iter()
        .zip(&b.entries)
        .map(|(x, y)| x.times(y))
        .collect();
    Ok(LabeledMatrix {
        name: format!("{}∘{}", a.name, b.name),
        dim: a.dim,
        labels: a.labels.clone(),
        entries,
    })
}

/// Kronecker product. Index `i·dim(b) + j` carries label `a_i ++ b_j`.
pub fn tensor<T: Scalar>(
    a: &LabeledMatrix<T>,
    b: &LabeledMatrix<T>,
) -> Result<LabeledMatrix<T>, MatrixError> {
    let (da, db) = (a.dim, b.dim);
    let d = da * db;
    let mut labels = Vec::with_capacity(d);
    for la in &a.labels {
        for lb in &b.labels {
            let mut l = la.clone();
            l.extend_from_slice(lb);
            labels.push(l);
        }
    }
    let mut entries = Vec::with_capacity(d * d);
    for ia in 0..da {
        for ib in 0..db {
            for ja in 0..da {
                let s = a.get(ia, ja);
                entries.extend(b.row(ib).iter().map(|t| s.times(t)));
            }
        }
    }
    // Concatenated labels can collide when label lengths vary.
    Ok(LabeledMatrix::new_unchecked(labels, entries)?.with_name(format!("{}⊗{}", a.name, b.name)))
}

/// Outcome of [`spectral_norm`].
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralResult {
    pub norm: f64,
    /// Unit-length Perron vector, sign-normalized so its entries sum to ≥ 0.
    pub eigenvector: Vec<f64>,
    /// Matrix-vector products performed.
    pub iterations: usize,
    /// `‖M v − norm·v‖` for the returned pair.
    pub residual: f64,
}

/// Largest eigenvalue (equal to the spectral norm for nonnegative symmetric
/// input) with its eigenvector.
///
/// Converges when `‖M v − θ v‖ ≤ tol · max(θ, 1)`. The cap on matrix-vector
/// products is `100 · dim`.
pub fn spectral_norm(m: &LabeledMatrix<f64>, tol: f64) -> Result<SpectralResult, SpectralError> {
    spectral_norm_op(m.name(), m.dim(), tol, |x, y| m.matvec(x, y))
}

/// [`spectral_norm`] for an implicit symmetric operator.
pub fn spectral_norm_op(
    name: &str,
    dim: usize,
    tol: f64,
    op: impl Fn(&[f64], &mut [f64]),
) -> Result<SpectralResult, SpectralError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(SpectralError::BadTolerance(tol));
    }
    let cap = 100 * dim.max(1);
    let max_basis = dim.clamp(1, 60);

    let mut start = vec![1.0; dim];
    start[0] += 1e-3;
    normalize(&mut start);

    let mut matvecs = 0usize;
    let mut w = vec![0.0; dim];
    let mut last_residual = f64::INFINITY;
    loop {
        let (theta, mut v) = lanczos_cycle(dim, max_basis, &start, tol, &op, &mut matvecs);
        normalize(&mut v);
        op(&v, &mut w);
        matvecs += 1;
        let rq = dot(&v, &w);
        let residual = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - rq * b).powi(2))
            .sum::<f64>()
            .sqrt();
        last_residual = last_residual.min(residual);
        if residual <= tol * rq.abs().max(1.0) || !theta.is_finite() {
            if v.iter().sum::<f64>() < 0.0 {
                v.iter_mut().for_each(|e| *e = -*e);
            }
            return Ok(SpectralResult {
                norm: rq.max(0.0),
                eigenvector: v,
                iterations: matvecs,
                residual,
            });
        }
        if matvecs >= cap {
            return Err(SpectralError::NoConvergence {
                name: name.to_string(),
                dim,
                matvecs,
                residual: last_residual,
            });
        }
        start = v;
    }
}

/// One Lanczos run from `start`; returns the top Ritz pair.
fn lanczos_cycle(
    dim: usize,
    max_basis: usize,
    start: &[f64],
    tol: f64,
    op: &impl Fn(&[f64], &mut [f64]),
    matvecs: &mut usize,
) -> (f64, Vec<f64>) {
    let mut basis: Vec<Vec<f64>> = vec![start.to_vec()];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; dim];
    let mut best = (0.0, vec![1.0]);
    for j in 0..max_basis {
        op(&basis[j], &mut w);
        *matvecs += 1;
        let a = dot(&basis[j], &w);
        alpha.push(a);
        // Two rounds of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
            }
        }
        let b = norm2(&w);
        best = top_ritz(&alpha, &beta);
        let scale = alpha.iter().fold(0.0f64, |s, x| s.max(x.abs())).max(1.0);
        let estimate = (b * best.1[j]).abs();
        let invariant = b <= 1e-13 * scale;
        if invariant || estimate <= 0.25 * tol * best.0.abs().max(1.0) || j + 1 == max_basis {
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|e| e / b).collect());
    }
    let mut v = vec![0.0; dim];
    for (q, c) in basis.iter().zip(&best.1) {
        axpy(*c, q, &mut v);
    }
    (best.0, v)
}

/// Largest eigenpair of the tridiagonal matrix with diagonal `alpha` and
/// off-diagonal `beta` (`beta.len() + 1 == alpha.len()`).
fn top_ritz(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let k = alpha.len();
    let t = DMatrix::from_fn(k, k, |r, c| {
        if r == c {
            alpha[r]
        } else if r + 1 == c {
            beta[r]
        } else if c + 1 == r {
            beta[c]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let (idx, &theta) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty tridiagonal");
    (
        theta,
        eig.eigenvectors.column(idx).iter().copied().collect(),
    )
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(c: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += c * xi);
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(a: &mut [f64]) {
    let n = norm2(a);
    if n > 0.0 {
        a.iter_mut().for_each(|e| *e /= n);
    }
}

/// Symmetric 0/1 mask applied on the fly: `(M∘P) x` where `P[x,y]` is given
/// by `keep(x, y)`, without materializing the product.
pub fn masked_matvec(
    m: &LabeledMatrix<f64>,
    keep: impl Fn(usize, usize) -> bool + Sync,
    x: &[f64],
    y: &mut [f64],
) {
    let d = m.dim();
    let body = |(r, out): (usize, &mut f64)| {
        let row = m.row(r);
        let mut s = 0.0;
        for c in 0..d {
            if keep(r, c) {
                s += row[c] * x[c];
            }
        }
        *out = s;
    };
    if d >= 512 {
        y.par_iter_mut().enumerate().for_each(body);
    } else {
        y.iter_mut().enumerate().for_each(body);
    }
}
