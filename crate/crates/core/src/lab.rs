//! Experiment runner behind the `tarski-lab` binary.
//!
//! Four commands: [`cmd_gen`] writes herringbone instances, [`cmd_verify`]
//! runs one invariant battery and returns a [`SuiteReport`], [`cmd_bound`]
//! tabulates spectral adversary bounds and [`cmd_solve`] runs a fixed-point
//! solver on an instance file. Everything is deterministic given the
//! arguments and the seed.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use itertools::Itertools;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::adversary::{
    compose_adversary_tol, denominator_mismatch, hilbert_distinguisher, hilbert_matrix,
    hilbert_tile, lb_factor, os_adversary, random_adversary, sa_ratio_tol, symmetrize,
    tile_distinguisher, tile_of_uniform, uniform_from_tile, AdversaryError, AdversaryMatrix, Tile,
};
use crate::herringbone::{
    build_family, build_instance, chunked_spine, covering_set, covering_violation,
    family_distinguisher, grid_line, line_point, region_anchor, GeometryError, SpineGeometry,
    TarskiInstance, Vertex,
};
use crate::lattice::{
    brute_solve, nested_solve, random_monotone, Algorithm, LatticeError, LatticeFn,
    MonotoneWitness, SolveResult, TableOracle,
};
use crate::problems::{distinguisher, make_nos, make_os, ProblemError};
use crate::spectral::{
    hadamard, label_string, spectral_norm, MatrixError, SpectralError, DEFAULT_TOL,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;

/// Largest nested-search instance count `a·b^a` the bound tables will build.
pub const NOS_INSTANCE_CAP: usize = 20_000;

/// Largest `n` for commands that materialize the whole instance family.
pub const FAMILY_MAX_N: usize = 3;

/// Interior points sampled by the `n = 3` covering sweep unless told otherwise.
pub const DEFAULT_SAMPLE: usize = 200;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    NotMonotone(#[from] MonotoneWitness),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("CSV output: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON output: {0}")]
    Json(#[from] serde_json::Error),
}

impl LabError {
    pub fn exit_code(&self) -> u8 {
        match self {
            LabError::Usage(_) => EXIT_USAGE,
            LabError::Io { .. } | LabError::Lattice(LatticeError::Io(_)) => EXIT_IO,
            LabError::Csv(e) if e.is_io_error() => EXIT_IO,
            _ => EXIT_FAILURE,
        }
    }

    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> LabError + '_ {
        move |source| LabError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

fn usage(msg: impl Into<String>) -> LabError {
    LabError::Usage(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format `{s}` (csv, json)")),
        }
    }
}

/// Parses `0.25` or `1/3`.
pub fn parse_eps(s: &str) -> Result<f64, String> {
    let v = match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p
                .trim()
                .parse()
                .map_err(|_| format!("bad numerator in `{s}`"))?;
            let q: f64 = q
                .trim()
                .parse()
                .map_err(|_| format!("bad denominator in `{s}`"))?;
            p / q
        }
        None => s.trim().parse().map_err(|_| format!("bad number `{s}`"))?,
    };
    if v > 0.0 && v < 0.5 {
        Ok(v)
    } else {
        Err(format!("ε must lie in (0, 1/2), got {s}"))
    }
}

/// Writes to `path`, or to standard output when absent.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), LabError> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(LabError::io(p)),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(LabError::io(Path::new("<stdout>"))),
    }
}

// ---------------------------------------------------------------------------
// gen

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub n: usize,
    #[serde(rename = "C")]
    pub c: Vec<usize>,
    pub i: usize,
    pub fixed_point: Vertex,
}

fn instance_stem(geo: &SpineGeometry, c: &[usize], i: usize) -> String {
    format!("T{}_C{}_i{}", geo.n_prime, c.iter().join("-"), i)
}

/// Writes one instance per `(C, i)` (the whole family when both are absent)
/// into `out_dir`, each as `<stem>.json` plus a `<stem>.meta.json` sidecar.
pub fn cmd_gen(
    n: usize,
    c: Option<&[usize]>,
    i: Option<usize>,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, LabError> {
    let geo = SpineGeometry::new(n).map_err(|e| usage(e.to_string()))?;
    let params: Vec<(Vec<usize>, usize)> = match (c, i) {
        (Some(c), Some(i)) => vec![(c.to_vec(), i)],
        (None, None) => {
            if n > FAMILY_MAX_N {
                return Err(usage(format!(
                    "whole-family generation supports n ≤ {FAMILY_MAX_N}"
                )));
            }
            crate::herringbone::family_params(&geo)
        }
        _ => return Err(usage("--C and --i must be given together")),
    };
    fs::create_dir_all(out_dir).map_err(LabError::io(out_dir))?;
    let mut written = Vec::with_capacity(params.len());
    for (c, i) in params {
        let inst = build_instance(&geo, &c, i).map_err(|e| match e {
            GeometryError::BadC { .. } | GeometryError::BadIndex { .. } => usage(e.to_string()),
            e => e.into(),
        })?;
        let stem = instance_stem(&geo, &c, i);
        let path = out_dir.join(format!("{stem}.json"));
        fs::write(&path, serde_json::to_vec(&inst.f.to_json())?).map_err(LabError::io(&path))?;
        let meta = out_dir.join(format!("{stem}.meta.json"));
        let prov = Provenance {
            n,
            c,
            i,
            fixed_point: inst.fixed_point,
        };
        fs::write(&meta, serde_json::to_vec_pretty(&prov)?).map_err(LabError::io(&meta))?;
        written.push(path);
    }
    Ok(written)
}

// ---------------------------------------------------------------------------
// verify

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Geometry,
    Composition,
    Hilbert,
    Symmetrize,
    Embedding,
    Covering,
    Solver,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Geometry,
        Suite::Composition,
        Suite::Hilbert,
        Suite::Symmetrize,
        Suite::Embedding,
        Suite::Covering,
        Suite::Solver,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Geometry => "geometry",
            Suite::Composition => "composition",
            Suite::Hilbert => "hilbert",
            Suite::Symmetrize => "symmetrize",
            Suite::Embedding => "embedding",
            Suite::Covering => "covering",
            Suite::Solver => "solver",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite `{s}` ({})", Suite::ALL.iter().join(", ")))
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyOptions {
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub a: Option<usize>,
    pub b: Option<usize>,
    pub seed: u64,
    /// Interior points for the `n = 3` covering sweep; `Some(0)` means all.
    pub sample: Option<usize>,
    pub tol: Option<f64>,
}

impl VerifyOptions {
    fn tol(&self) -> f64 {
        self.tol.unwrap_or(DEFAULT_TOL)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckFailure {
    pub check: String,
    pub counterexample: Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks_run: usize,
    pub failures: Vec<CheckFailure>,
    /// Seconds; left out of the JSON so that reports are reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn exit_code(&self) -> u8 {
        if self.passed() {
            EXIT_OK
        } else {
            EXIT_FAILURE
        }
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>, LabError> {
        Ok(match format {
            Format::Json => {
                let mut v = serde_json::to_vec_pretty(self)?;
                v.push(b'\n');
                v
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(["suite", "check", "counterexample"])?;
                for f in &self.failures {
                    w.write_record([self.suite.as_str(), &f.check, &f.counterexample.to_string()])?;
                }
                w.into_inner()
                    .map_err(|e| e.into_error())
                    .map_err(LabError::io(Path::new("<csv>")))?
            }
        })
    }
}

#[derive(Default)]
struct Checker {
    checks: usize,
    failures: Vec<CheckFailure>,
}

impl Checker {
    fn check(&mut self, id: impl Into<String>, ok: bool, counterexample: impl FnOnce() -> Value) {
        self.checks += 1;
        if !ok {
            self.failures.push(CheckFailure {
                check: id.into(),
                counterexample: counterexample(),
            });
        }
    }

    fn merge(&mut self, other: Checker) {
        self.checks += other.checks;
        self.failures.extend(other.failures);
    }

    fn finish(mut self, suite: Suite, start: Instant) -> SuiteReport {
        self.failures.sort_by(|a, b| a.check.cmp(&b.check));
        SuiteReport {
            suite: suite.name().to_string(),
            checks_run: self.checks,
            failures: self.failures,
            wall_time: start.elapsed().as_secs_f64(),
        }
    }
}

pub fn cmd_verify(suite: Suite, opts: &VerifyOptions) -> Result<SuiteReport, LabError> {
    let start = Instant::now();
    let ck = match suite {
        Suite::Geometry => suite_geometry(opts.n.unwrap_or(3))?,
        Suite::Composition => suite_composition(opts)?,
        Suite::Hilbert => suite_hilbert(opts.m.unwrap_or(64), opts.tol())?,
        Suite::Symmetrize => suite_symmetrize(opts.m.unwrap_or(4), opts.seed)?,
        Suite::Embedding => suite_embedding(family_n(opts.n)?)?,
        Suite::Covering => suite_covering(family_n(opts.n)?, opts.sample, opts.seed)?,
        Suite::Solver => suite_solver(family_n(opts.n)?, opts.seed)?,
    };
    Ok(ck.finish(suite, start))
}

fn family_n(n: Option<usize>) -> Result<usize, LabError> {
    let n = n.unwrap_or(2);
    if !(2..=FAMILY_MAX_N).contains(&n) {
        return Err(usage(format!(
            "this suite enumerates the whole family; n must be in 2..={FAMILY_MAX_N}"
        )));
    }
    Ok(n)
}

fn vx(p: Vertex) -> Value {
    json!([p.x, p.y])
}

fn suite_geometry(n: usize) -> Result<Checker, LabError> {
    if !(2..=4).contains(&n) {
        return Err(usage("geometry suite supports n in 2..=4"));
    }
    let geo = SpineGeometry::new(n)?;
    let mut ck = Checker::default();
    let sums: Vec<usize> = (0..=n * (n + 2)).map(|t| 2 * (n - 1) * t + n + 1).collect();

    for (t, &c) in sums.iter().enumerate() {
        let b = geo.boundary(c);
        let expect: Vec<Vertex> = (1..=n)
            .map(|j| Vertex {
                x: (n - 1) * t + j,
                y: (n - 1) * t + n + 1 - j,
            })
            .collect();
        ck.check(
            format!("boundary/{c}"),
            b == expect,
            || json!({ "sum": c, "got": b }),
        );
    }

    for (ia, &ca) in sums.iter().enumerate() {
        for &cb in &sums[ia + 1..] {
            for u in geo.boundary(ca) {
                for e in geo.boundary(cb).into_iter().filter(|e| u.leq(*e)) {
                    let line = grid_line(u, e)?;
                    let steps_ok = line.points.iter().tuple_windows().all(|(p, q)| {
                        (q.x == p.x + 1 && q.y == p.y) || (q.x == p.x && q.y == p.y + 1)
                    });
                    let ok = line.points.first() == Some(&u)
                        && line.points.last() == Some(&e)
                        && steps_ok;
                    ck.check(
                        format!("grid-line/{u}-{e}"),
                        ok,
                        || json!({ "u": vx(u), "v": vx(e) }),
                    );
                }
            }
        }
    }

    let cs: Vec<Vec<usize>> = (0..=n).map(|_| 1..=n).multi_cartesian_product().collect();
    for c in &cs {
        let s = chunked_spine(&geo, c)?;
        let through =
            (1..=n + 1).all(|i| s.at_sum(geo.bound(i)) == Some(geo.chunk_point(i, c[i - 1])));
        let ok = through && s.vertices.len() == 2 * geo.n_prime - 1;
        ck.check(
            format!("spine/{}", c.iter().join("-")),
            ok,
            || json!({ "C": c }),
        );
    }

    for x in 1..=geo.n_prime {
        for y in 1..=geo.n_prime {
            let w = Vertex { x, y };
            if !geo.in_tube(w) || w.sum() < geo.bound(1) || w.sum() > geo.bound(n + 1) {
                continue;
            }
            let r = region_anchor(&geo, w);
            let ok = match &r {
                Ok(a) => {
                    let (u, e) = (
                        geo.chunk_point(a.alpha, a.ell),
                        geo.chunk_point(a.alpha + 1, a.ell),
                    );
                    line_point(u, e, w.sum()) == w
                }
                Err(_) => false,
            };
            ck.check(
                format!("anchor/{w}"),
                ok,
                || json!({ "w": vx(w), "error": r.err().map(|e| e.to_string()) }),
            );
        }
    }
    Ok(ck)
}

fn suite_composition(opts: &VerifyOptions) -> Result<Checker, LabError> {
    let tol = opts.tol();
    let as_: Vec<usize> = opts.a.map_or(vec![2, 3], |a| vec![a]);
    let bs: Vec<usize> = opts.b.map_or(vec![2, 3], |b| vec![b]);
    let mut ck = Checker::default();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for (&a, &b) in as_.iter().cartesian_product(&bs) {
        if a * b.pow(a as u32) > NOS_INSTANCE_CAP {
            return Err(usage(format!("a·b^a must not exceed {NOS_INSTANCE_CAP}")));
        }
        let tile = hilbert_tile(b)?;
        let tiles = vec![tile.clone(); a];
        let tile_norm = spectral_norm(&tile.matrix, tol)?.norm;
        let outers = [
            ("os".to_string(), os_adversary(a)?),
            (
                "random".to_string(),
                random_adversary(Arc::new(make_os(a)?), &mut rng)?,
            ),
        ];
        for (kind, outer) in outers {
            let h = compose_adversary_tol(&outer, &tiles, tol)?;
            let f_norm = spectral_norm(&outer.matrix, tol)?.norm;
            let h_norm = spectral_norm(&h.matrix, tol)?.norm;
            let expect = f_norm * tile_norm.powi(a as i32);
            let id = format!("numerator/{kind}/{a}x{b}");
            ck.check(
                id,
                (h_norm - expect).abs() <= 1e-6 * h_norm,
                || json!({ "a": a, "b": b, "outer": kind, "composed": h_norm, "product": expect }),
            );
            if kind != "os" {
                continue;
            }
            for pos in 1..=h.problem.length {
                let (p, q) = h.problem.block_of(pos);
                let lhs = h.masked_norm(pos, tol)?.norm;
                let outer_p = outer.masked_norm(p, tol)?.norm;
                let masked_tile = hadamard(&tile.matrix, &tile_distinguisher(&tile.labeling, q)?)?;
                let rhs =
                    outer_p * spectral_norm(&masked_tile, tol)?.norm * tile_norm.powi(a as i32 - 1);
                ck.check(
                    format!("denominator-norm/{a}x{b}/{pos}"),
                    (lhs - rhs).abs() <= 1e-6 * lhs.max(1.0),
                    || json!({ "a": a, "b": b, "position": pos, "lhs": lhs, "rhs": rhs }),
                );
                if a <= 3 && b <= 3 {
                    let mm = denominator_mismatch(&outer, &tiles, pos)?;
                    ck.check(format!("denominator-exact/{a}x{b}/{pos}"), mm.is_none(), || {
                        let (x, y, l, r) = mm.clone().unwrap();
                        json!({ "a": a, "b": b, "position": pos, "x": h.problem.render(x), "y": h.problem.render(y), "lhs": l, "rhs": r })
                    });
                }
            }
        }
    }
    Ok(ck)
}

/// `Σ_{k ≤ ⌈m/2⌉} 1/k`.
pub fn harmonic_half(m: usize) -> f64 {
    (1..=m.div_ceil(2)).map(|k| 1.0 / k as f64).sum()
}

fn suite_hilbert(m_max: usize, tol: f64) -> Result<Checker, LabError> {
    let rows: Vec<Checker> = (1..=m_max)
        .into_par_iter()
        .map(|m| -> Result<Checker, LabError> {
            let mut ck = Checker::default();
            let a = hilbert_matrix(m);
            let norm = spectral_norm(&a, tol)?.norm;
            let h = harmonic_half(m);
            ck.check(
                format!("norm/{m:04}"),
                norm >= h - 1e-8,
                || json!({ "m": m, "norm": norm, "harmonic": h }),
            );
            for i in 1..=m {
                let masked = hadamard(&a, &hilbert_distinguisher(m, i))?;
                let v = spectral_norm(&masked, tol)?.norm;
                ck.check(
                    format!("masked/{m:04}/{i:04}"),
                    v <= 2.0 * std::f64::consts::PI + 1e-8,
                    || json!({ "m": m, "i": i, "norm": v }),
                );
            }
            if m <= 12 {
                let tile = hilbert_tile(m)?;
                for i in 1..=tile.labeling.length {
                    let same = tile_distinguisher(&tile.labeling, i)?.entries()
                        == hilbert_distinguisher(m, i).entries();
                    ck.check(
                        format!("interval/{m:04}/{i:04}"),
                        same,
                        || json!({ "m": m, "i": i }),
                    );
                }
            }
            Ok(ck)
        })
        .collect::<Result<_, _>>()?;
    let mut ck = Checker::default();
    rows.into_iter().for_each(|r| ck.merge(r));
    Ok(ck)
}

/// Draws per symmetrize run; also the count the acceptance suite uses.
pub const SYMMETRIZE_DRAWS: usize = 5;

fn suite_symmetrize(m_max: usize, seed: u64) -> Result<Checker, LabError> {
    if m_max == 0 || m_max > 6 {
        return Err(usage("symmetrize suite supports m in 1..=6"));
    }
    let mut ck = Checker::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for m in 1..=m_max {
        let tile = hilbert_tile(m)?;
        let p = tile.problem.clone();
        for r in 0..SYMMETRIZE_DRAWS {
            let g = random_adversary(p.clone(), &mut rng)?;
            let out = check_symmetrized(&g, &tile)?;
            ck.check(
                format!("uniform/{m}/{r}"),
                out.uniform,
                || json!({ "m": m, "draw": r }),
            );
            ck.check(
                format!("norm/{m}/{r}"),
                out.norm_after >= out.norm_before - 1e-6,
                || json!({ "m": m, "draw": r, "before": out.norm_before, "after": out.norm_after }),
            );
            ck.check(
                format!("denominator/{m}/{r}"),
                out.max_masked <= 1.0 + 1e-6,
                || json!({ "m": m, "draw": r, "max_masked": out.max_masked }),
            );
        }
    }
    Ok(ck)
}

/// Measurements of one symmetrization.
#[derive(Clone, Debug, Serialize)]
pub struct SymmetrizeCheck {
    pub uniform: bool,
    /// `‖Γ‖` after scaling so that `max_i ‖Γ∘D_i‖ = 1`.
    pub norm_before: f64,
    pub norm_after: f64,
    pub max_masked: f64,
}

pub fn check_symmetrized(g: &AdversaryMatrix, tile: &Tile) -> Result<SymmetrizeCheck, LabError> {
    let s = symmetrize(g, &tile.labeling)?;
    let norm_before = spectral_norm(&g.matrix, DEFAULT_TOL)?.norm * s.scale;
    let norm_after = spectral_norm(&s.matrix.matrix, DEFAULT_TOL)?.norm;
    let max_masked = s
        .matrix
        .masked_norms(DEFAULT_TOL)?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(SymmetrizeCheck {
        uniform: tile_of_uniform(&s.matrix, &tile.labeling).is_ok(),
        norm_before,
        norm_after,
        max_masked,
    })
}

/// First entry where the family distinguisher at `B^{bound(i)}_j` and the
/// nested-search distinguisher at block `i`, offset `j` disagree.
pub fn embedding_mismatch(
    geo: &SpineGeometry,
    family: &[TarskiInstance],
    i: usize,
    j: usize,
) -> Result<Option<(usize, usize)>, LabError> {
    let nos = make_nos(geo.n + 1, geo.n)?;
    let dt = family_distinguisher(geo, family, geo.chunk_point(i, j))?;
    let dn = distinguisher(&nos, nos.position_of(i, j))?;
    if dt.labels() != dn.labels() {
        return Ok(Some((usize::MAX, usize::MAX)));
    }
    let d = dt.dim();
    Ok((0..d * d)
        .find(|&e| dt.entries()[e] != dn.entries()[e])
        .map(|e| (e / d, e % d)))
}

fn suite_embedding(n: usize) -> Result<Checker, LabError> {
    let geo = SpineGeometry::new(n)?;
    let fam = build_family(&geo)?;
    let nos = make_nos(n + 1, n)?;
    let mut ck = Checker::default();
    for i in 1..=n + 1 {
        for j in 1..=n {
            let mm = embedding_mismatch(&geo, &fam, i, j)?;
            ck.check(format!("boundary/{i}/{j}"), mm.is_none(), || {
                let (x, y) = mm.unwrap();
                if x == usize::MAX {
                    json!({ "i": i, "j": j, "labels": "differ" })
                } else {
                    json!({ "i": i, "j": j, "x": nos.render(x), "y": nos.render(y) })
                }
            });
        }
    }
    Ok(ck)
}

/// Outcome of the covering check at one point.
#[derive(Clone, Debug, Serialize)]
pub struct CoverCheck {
    pub point: Vertex,
    pub cover: Vec<Vertex>,
    /// Two family members (as `(C, i)`) separated at the point but not by
    /// the cover.
    pub violation: Option<[(Vec<usize>, usize); 2]>,
}

impl CoverCheck {
    pub fn ok(&self) -> bool {
        self.cover.len() <= 7 && self.violation.is_none()
    }
}

pub fn check_cover(
    geo: &SpineGeometry,
    family: &[TarskiInstance],
    p: Vertex,
) -> Result<CoverCheck, LabError> {
    let cover = covering_set(geo, p)?;
    let violation = covering_violation(family, p, &cover).map(|(a, b)| {
        [
            (family[a].c.clone(), family[a].i),
            (family[b].c.clone(), family[b].i),
        ]
    });
    Ok(CoverCheck {
        point: p,
        cover,
        violation,
    })
}

/// The points a covering sweep visits: every point for `n = 2` or
/// `sample = Some(0)`, otherwise every chunk-boundary point plus `sample`
/// (default [`DEFAULT_SAMPLE`]) seeded draws from the remaining points.
pub fn covering_points(geo: &SpineGeometry, sample: Option<usize>, seed: u64) -> Vec<Vertex> {
    let all: Vec<Vertex> = (1..=geo.n_prime)
        .flat_map(|x| (1..=geo.n_prime).map(move |y| Vertex { x, y }))
        .collect();
    let sample = sample.unwrap_or(DEFAULT_SAMPLE);
    if geo.n == 2 || sample == 0 {
        return all;
    }
    let is_boundary =
        |p: &Vertex| (1..=geo.n + 1).any(|i| p.sum() == geo.bound(i) && geo.in_tube(*p));
    let (mut pts, rest): (Vec<Vertex>, Vec<Vertex>) = all.into_iter().partition(is_boundary);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = index::sample(&mut rng, rest.len(), sample.min(rest.len())).into_vec();
    picks.sort_unstable();
    pts.extend(picks.into_iter().map(|k| rest[k]));
    pts
}

fn suite_covering(n: usize, sample: Option<usize>, seed: u64) -> Result<Checker, LabError> {
    let geo = SpineGeometry::new(n)?;
    let fam = build_family(&geo)?;
    let pts = covering_points(&geo, sample, seed);
    let results: Vec<CoverCheck> = pts
        .par_iter()
        .map(|&p| check_cover(&geo, &fam, p))
        .collect::<Result<_, _>>()?;
    let mut ck = Checker::default();
    for r in results {
        let id = format!("cover/{:03}/{:03}", r.point.x, r.point.y);
        ck.check(id, r.ok(), || {
            serde_json::to_value(&r).unwrap_or(Value::Null)
        });
    }
    Ok(ck)
}

/// `4·(⌈log₂ n⌉ + 1)²`.
pub fn nested_query_budget(n: usize) -> usize {
    let log = n.next_power_of_two().trailing_zeros() as usize;
    4 * (log + 1) * (log + 1)
}

fn suite_solver(n: usize, seed: u64) -> Result<Checker, LabError> {
    let geo = SpineGeometry::new(n)?;
    let fam = build_family(&geo)?;
    let side = geo.n_prime;
    let budget = nested_query_budget(side);
    let rows: Vec<(String, Option<Value>)> = fam
        .par_iter()
        .map(|t| -> Result<_, LabError> {
            let truth = t.f.brute_fixed_points();
            let nested = nested_solve(&mut TableOracle::new(&t.f))?;
            let brute = brute_solve(&mut TableOracle::new(&t.f))?;
            let ok = truth == vec![nested.fixed_point.clone()]
                && nested.queries_used <= budget
                && brute.fixed_point == nested.fixed_point
                && brute.queries_used == side * side;
            let id = format!("family/{}/{}", t.i, t.c.iter().join("-"));
            Ok((id, (!ok).then(|| json!({ "C": t.c, "i": t.i, "nested": nested, "brute": brute, "budget": budget }))))
        })
        .collect::<Result<_, _>>()?;
    let mut ck = Checker::default();
    for (id, bad) in rows {
        ck.check(id, bad.is_none(), || bad.unwrap());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for r in 0..20 {
        let f = random_monotone(side, 2, &mut rng)?;
        let res = nested_solve(&mut TableOracle::new(&f))?;
        let ok = f.eval(&res.fixed_point) == res.fixed_point.as_slice();
        ck.check(
            format!("random/{r:02}"),
            ok,
            || json!({ "draw": r, "result": res }),
        );
    }
    Ok(ck)
}

// ---------------------------------------------------------------------------
// bound

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundProblem {
    Os,
    Hsos,
    Nos,
    Tarski,
}

impl BoundProblem {
    pub fn name(self) -> &'static str {
        match self {
            BoundProblem::Os => "os",
            BoundProblem::Hsos => "hsos",
            BoundProblem::Nos => "nos",
            BoundProblem::Tarski => "tarski",
        }
    }
}

impl FromStr for BoundProblem {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        [
            BoundProblem::Os,
            BoundProblem::Hsos,
            BoundProblem::Nos,
            BoundProblem::Tarski,
        ]
        .into_iter()
        .find(|p| p.name() == s)
        .ok_or_else(|| format!("unknown problem `{s}` (os, hsos, nos, tarski)"))
    }
}

/// Size parameters of one table row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundSize {
    /// `OS_m` or `HSOS_m`.
    M(usize),
    /// `NOS_{a,b}`.
    Ab(usize, usize),
    /// `TARSKI(n′, 2)` through `NOS_{n+1,n}`.
    N(usize),
}

impl fmt::Display for BoundSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundSize::M(m) => write!(f, "{m}"),
            BoundSize::Ab(a, b) => write!(f, "{a}x{b}"),
            BoundSize::N(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundRow {
    pub problem: String,
    pub size: String,
    pub numerator: f64,
    pub denominator: f64,
    pub sa: f64,
    pub lb: f64,
}

/// Denominator weight of the Tarski rows: the covering sets have at most
/// seven points.
pub const TARSKI_COVER_WEIGHT: f64 = 7.0;

/// The default sizes: `m = 2, 4, …, 256`; `a, b ∈ {2,3,4}`; `n ∈ {2,3,4}`.
pub fn default_sizes(problem: BoundProblem) -> Vec<BoundSize> {
    match problem {
        BoundProblem::Os | BoundProblem::Hsos => (1..=8).map(|k| BoundSize::M(1 << k)).collect(),
        BoundProblem::Nos => (2..=4)
            .cartesian_product(2..=4)
            .map(|(a, b)| BoundSize::Ab(a, b))
            .collect(),
        BoundProblem::Tarski => (2..=4).map(BoundSize::N).collect(),
    }
}

fn nos_adversary(a: usize, b: usize, tol: f64) -> Result<AdversaryMatrix, LabError> {
    if a == 0 || b == 0 {
        return Err(usage("sizes must be positive"));
    }
    let count = b
        .checked_pow(a as u32)
        .and_then(|x| x.checked_mul(a))
        .unwrap_or(usize::MAX);
    if count > NOS_INSTANCE_CAP {
        return Err(usage(format!(
            "NOS_{a},{b} has {count} instances; dense tables are capped at a·b^a ≤ {NOS_INSTANCE_CAP}"
        )));
    }
    let tiles = vec![hilbert_tile(b)?; a];
    Ok(compose_adversary_tol(&os_adversary(a)?, &tiles, tol)?)
}

/// The adversary matrix behind one table row.
pub fn bound_matrix(
    problem: BoundProblem,
    size: BoundSize,
    tol: f64,
) -> Result<AdversaryMatrix, LabError> {
    match (problem, size) {
        (BoundProblem::Os, BoundSize::M(m)) if m > 0 => Ok(os_adversary(m)?),
        (BoundProblem::Hsos, BoundSize::M(m)) if m > 0 => Ok(uniform_from_tile(&hilbert_tile(m)?)?),
        (BoundProblem::Nos, BoundSize::Ab(a, b)) => nos_adversary(a, b, tol),
        (BoundProblem::Tarski, BoundSize::N(n)) if n >= 2 => nos_adversary(n + 1, n, tol),
        _ => Err(usage(format!(
            "size {size} does not fit problem {}",
            problem.name()
        ))),
    }
}

pub fn bound_row(
    problem: BoundProblem,
    size: BoundSize,
    eps: f64,
    tol: f64,
) -> Result<BoundRow, LabError> {
    let g = bound_matrix(problem, size, tol)?;
    let rep = sa_ratio_tol(&g, eps, tol)?;
    let weight = if problem == BoundProblem::Tarski {
        TARSKI_COVER_WEIGHT
    } else {
        1.0
    };
    let denominator = rep.denominator * weight;
    let sa = rep.numerator / denominator;
    Ok(BoundRow {
        problem: problem.name().to_string(),
        size: size.to_string(),
        numerator: rep.numerator,
        denominator,
        sa,
        lb: sa * lb_factor(eps),
    })
}

/// One row per size. When `dump_dir` is given, each row's matrix is also
/// written there as `<problem>_<size>.json`.
pub fn cmd_bound(
    problem: BoundProblem,
    sizes: &[BoundSize],
    eps: f64,
    tol: f64,
    dump_dir: Option<&Path>,
) -> Result<Vec<BoundRow>, LabError> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(usage(format!("ε must lie in (0, 1/2), got {eps}")));
    }
    if let Some(d) = dump_dir {
        fs::create_dir_all(d).map_err(LabError::io(d))?;
    }
    sizes
        .iter()
        .map(|&size| {
            let row = bound_row(problem, size, eps, tol)?;
            if let Some(d) = dump_dir {
                let g = bound_matrix(problem, size, tol)?;
                let path = d.join(format!("{}_{}.json", problem.name(), size));
                let p = g.problem.clone();
                let j = g.matrix.to_json(|l| {
                    p.labels()
                        .iter()
                        .position(|x| x == l)
                        .map_or_else(|| label_string(l), |i| p.render(i))
                });
                fs::write(&path, serde_json::to_vec(&j)?).map_err(LabError::io(&path))?;
            }
            Ok(row)
        })
        .collect()
}

pub fn render_rows(rows: &[BoundRow], format: Format) -> Result<Vec<u8>, LabError> {
    Ok(match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(Vec::new());
            w.write_record(["problem", "size", "numerator", "denominator", "sa", "lb"])?;
            for r in rows {
                w.serialize(r)?;
            }
            w.into_inner()
                .map_err(|e| e.into_error())
                .map_err(LabError::io(Path::new("<csv>")))?
        }
        Format::Json => {
            let mut v = serde_json::to_vec_pretty(rows)?;
            v.push(b'\n');
            v
        }
    })
}

// ---------------------------------------------------------------------------
// solve

/// Loads an instance, refuses non-monotone input, and solves it.
pub fn cmd_solve(path: &Path, algo: Algorithm) -> Result<SolveResult, LabError> {
    let f = LatticeFn::load(path)?;
    f.check_monotone()?;
    let mut o = TableOracle::new(&f);
    Ok(match algo {
        Algorithm::Brute => brute_solve(&mut o)?,
        Algorithm::Nested => nested_solve(&mut o)?,
    })
}

pub fn render_solve(r: &SolveResult, format: Format) -> Result<Vec<u8>, LabError> {
    Ok(match format {
        Format::Json => {
            let mut v = serde_json::to_vec_pretty(r)?;
            v.push(b'\n');
            v
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["fixed_point", "queries_used", "algorithm", "fell_back"])?;
            w.write_record([
                r.fixed_point.iter().join(" "),
                r.queries_used.to_string(),
                r.algorithm.to_string(),
                r.fell_back.to_string(),
            ])?;
            w.into_inner()
                .map_err(|e| e.into_error())
                .map_err(LabError::io(Path::new("<csv>")))?
        }
    })
}
