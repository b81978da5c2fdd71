//! Finite query problems: ordered search and its hidden-symbol and nested
//! variants, function composition, distinguisher matrices and detection of
//! the generalized-search structure.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use serde_json::{json, Value};
use thiserror::Error;

use crate::spectral::{LabeledMatrix, MatrixError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("size parameter must be at least 1")]
    ZeroSize,
    #[error("outer function reads {expected} positions but {got} inner functions were given")]
    ArityMismatch { expected: usize, got: usize },
    #[error("inner function {index} outputs {found:?}, outer function reads {expected:?}")]
    AlphabetMismatch {
        index: usize,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("inner function {index} reads a different input alphabet than inner function 1")]
    InnerInputMismatch { index: usize },
    #[error("position {i} outside 1..={length}")]
    PositionOutOfRange { i: usize, length: usize },
    #[error("unknown symbol {0:?}")]
    UnknownSymbol(String),
    #[error("labeling: {0}")]
    Labeling(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Input and output symbols, with fixed byte codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Symbol {
    Up = 0,
    Down = 1,
    Star = 2,
    Right = 3,
    Left = 4,
}

impl Symbol {
    pub const ALL: [Symbol; 5] = [
        Symbol::Up,
        Symbol::Down,
        Symbol::Star,
        Symbol::Right,
        Symbol::Left,
    ];
    /// The hidden symbols, in instance order.
    pub const HIDDEN: [Symbol; 3] = [Symbol::Up, Symbol::Down, Symbol::Star];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Symbol> {
        Symbol::ALL.get(c as usize).copied()
    }

    pub fn glyph(self) -> char {
        match self {
            Symbol::Up => '↑',
            Symbol::Down => '↓',
            Symbol::Star => '*',
            Symbol::Right => '→',
            Symbol::Left => '←',
        }
    }

    pub fn ascii(self) -> &'static str {
        match self {
            Symbol::Up => "UP",
            Symbol::Down => "DN",
            Symbol::Star => "ST",
            Symbol::Right => "RT",
            Symbol::Left => "LT",
        }
    }

    pub fn from_glyph(c: char) -> Option<Symbol> {
        Symbol::ALL.into_iter().find(|s| s.glyph() == c)
    }
}

impl FromStr for Symbol {
    type Err = ProblemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.chars();
        if let (Some(c), None) = (chars.next(), chars.next()) {
            if let Some(sym) = Symbol::from_glyph(c) {
                return Ok(sym);
            }
        }
        Symbol::ALL
            .into_iter()
            .find(|sym| sym.ascii() == s)
            .ok_or_else(|| ProblemError::UnknownSymbol(s.to_string()))
    }
}

/// Output value: a symbol for hidden-symbol search, a 1-based position for
/// ordered search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Answer {
    Symbol(Symbol),
    Index(usize),
}

impl Answer {
    pub fn as_symbol(self) -> Option<Symbol> {
        match self {
            Answer::Symbol(s) => Some(s),
            Answer::Index(_) => None,
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::Symbol(s) => f.write_str(s.ascii()),
            Answer::Index(k) => write!(f, "{k}"),
        }
    }
}

/// How a composed instance was assembled.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Composition {
    /// Index of `x̃` among the outer function's instances.
    pub outer: usize,
    /// Index of each block among its inner function's instances.
    pub inner: Vec<usize>,
    /// The inner answers, i.e. the outer function's input `x̃`.
    pub tilde: Vec<Symbol>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub chars: Vec<Symbol>,
    pub answer: Answer,
    pub parts: Option<Composition>,
}

impl Instance {
    pub fn label(&self) -> Vec<u8> {
        self.chars.iter().map(|s| s.code()).collect()
    }
}

/// A total function on an explicit finite domain of strings.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryProblem {
    pub name: String,
    pub input_alphabet: Vec<Symbol>,
    pub output_alphabet: Vec<Answer>,
    pub length: usize,
    pub instances: Vec<Instance>,
    /// Block lengths for composed problems; `[length]` otherwise.
    pub blocks: Vec<usize>,
}

impl QueryProblem {
    fn from_instances(
        name: String,
        input_alphabet: Vec<Symbol>,
        instances: Vec<Instance>,
        blocks: Vec<usize>,
    ) -> Self {
        let output_alphabet = instances.iter().map(|x| x.answer).unique().collect();
        let length = blocks.iter().sum();
        debug_assert!(instances.iter().all(|x| x.chars.len() == length));
        QueryProblem {
            name,
            input_alphabet,
            output_alphabet,
            length,
            instances,
            blocks,
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn labels(&self) -> Vec<Vec<u8>> {
        self.instances.iter().map(Instance::label).collect()
    }

    pub fn answers(&self) -> Vec<Answer> {
        self.instances.iter().map(|x| x.answer).collect()
    }

    /// Instance index by its string, e.g. `"→↓←,↑←←"`.
    pub fn find(&self, s: &str) -> Option<usize> {
        let chars = parse_instance(s).ok()?;
        self.instances.iter().position(|x| x.chars == chars)
    }

    /// Rendered string of instance `x`, blocks separated by commas.
    pub fn render(&self, x: usize) -> String {
        render_blocks(&self.instances[x].chars, &self.blocks)
    }

    /// Block and offset (both 1-based) of a 1-based position.
    pub fn block_of(&self, i: usize) -> (usize, usize) {
        let mut rest = i;
        for (p, &len) in self.blocks.iter().enumerate() {
            if rest <= len {
                return (p + 1, rest);
            }
            rest -= len;
        }
        panic!("position {i} beyond length {}", self.length)
    }

    /// 1-based position of block `p`, offset `q`.
    pub fn position_of(&self, p: usize, q: usize) -> usize {
        self.blocks[..p - 1].iter().sum::<usize>() + q
    }

    /// Dump `{"alphabet", "length", "instances": [{"s", "answer"}]}`.
    pub fn to_json(&self) -> Value {
        let instances: Vec<Value> = self
            .instances
            .iter()
            .map(|x| {
                json!({
                    "s": x.chars.iter().map(|c| c.ascii()).join(" "),
                    "answer": x.answer.to_string(),
                })
            })
            .collect();
        json!({
            "alphabet": self.input_alphabet.iter().map(|c| c.ascii()).collect::<Vec<_>>(),
            "length": self.length,
            "instances": instances,
        })
    }
}

pub fn render_blocks(chars: &[Symbol], blocks: &[usize]) -> String {
    let mut out = String::new();
    let mut it = chars.iter();
    for (p, &len) in blocks.iter().enumerate() {
        if p > 0 {
            out.push(',');
        }
        out.extend(it.by_ref().take(len).map(|c| c.glyph()));
    }
    out
}

/// Parses a glyph string; commas between blocks are ignored.
pub fn parse_instance(s: &str) -> Result<Vec<Symbol>, ProblemError> {
    s.chars()
        .filter(|&c| c != ',')
        .map(|c| Symbol::from_glyph(c).ok_or_else(|| ProblemError::UnknownSymbol(c.to_string())))
        .collect()
}

/// Ordered search: `↑^{k−1} * ↓^{m−k}` has answer `k`.
pub fn make_os(m: usize) -> Result<QueryProblem, ProblemError> {
    if m == 0 {
        return Err(ProblemError::ZeroSize);
    }
    let instances = (1..=m)
        .map(|k| {
            let mut chars = vec![Symbol::Up; k - 1];
            chars.push(Symbol::Star);
            chars.extend(std::iter::repeat_n(Symbol::Down, m - k));
            Instance {
                chars,
                answer: Answer::Index(k),
                parts: None,
            }
        })
        .collect();
    Ok(QueryProblem::from_instances(
        format!("OS_{m}"),
        Symbol::HIDDEN.to_vec(),
        instances,
        vec![m],
    ))
}

/// Hidden-symbol ordered search: `→^{k−1} x ←^{m−k}` has answer `x`.
/// Instances are ordered by `(x, k)` with `x` in `↑, ↓, *` order.
pub fn make_hsos(m: usize) -> Result<QueryProblem, ProblemError> {
    if m == 0 {
        return Err(ProblemError::ZeroSize);
    }
    let mut instances = Vec::with_capacity(3 * m);
    for x in Symbol::HIDDEN {
        for k in 1..=m {
            let mut chars = vec![Symbol::Right; k - 1];
            chars.push(x);
            chars.extend(std::iter::repeat_n(Symbol::Left, m - k));
            instances.push(Instance {
                chars,
                answer: Answer::Symbol(x),
                parts: None,
            });
        }
    }
    Ok(QueryProblem::from_instances(
        format!("HSOS_{m}"),
        Symbol::ALL.to_vec(),
        instances,
        vec![m],
    ))
}

/// `h = f ∘ (g_1, …, g_k)` on the domain of concatenations whose inner
/// answers form an instance of `f`.
pub fn compose(f: &QueryProblem, gs: &[QueryProblem]) -> Result<QueryProblem, ProblemError> {
    if gs.len() != f.length {
        return Err(ProblemError::ArityMismatch {
            expected: f.length,
            got: gs.len(),
        });
    }
    let want: BTreeSet<Answer> = f
        .input_alphabet
        .iter()
        .map(|&s| Answer::Symbol(s))
        .collect();
    for (index, g) in gs.iter().enumerate() {
        let found: BTreeSet<Answer> = g.output_alphabet.iter().copied().collect();
        if !found.is_subset(&want) {
            return Err(ProblemError::AlphabetMismatch {
                index: index + 1,
                expected: want.iter().map(ToString::to_string).collect(),
                found: found.iter().map(ToString::to_string).collect(),
            });
        }
        if g.input_alphabet != gs[0].input_alphabet {
            return Err(ProblemError::InnerInputMismatch { index: index + 1 });
        }
    }

    // Preimages g_i⁻¹(σ), in each g_i's instance order.
    let preimages: Vec<HashMap<Symbol, Vec<usize>>> = gs
        .iter()
        .map(|g| {
            let mut by: HashMap<Symbol, Vec<usize>> = HashMap::new();
            for (idx, x) in g.instances.iter().enumerate() {
                if let Some(s) = x.answer.as_symbol() {
                    by.entry(s).or_default().push(idx);
                }
            }
            by
        })
        .collect();

    let mut instances = Vec::new();
    for (outer, fx) in f.instances.iter().enumerate() {
        let choices: Vec<&[usize]> = fx
            .chars
            .iter()
            .zip(&preimages)
            .map(|(s, pre)| pre.get(s).map(Vec::as_slice).unwrap_or(&[]))
            .collect();
        for inner in choices
            .iter()
            .map(|c| c.iter().copied())
            .multi_cartesian_product()
        {
            let chars = inner
                .iter()
                .zip(gs)
                .flat_map(|(&j, g)| g.instances[j].chars.iter().copied())
                .collect();
            instances.push(Instance {
                chars,
                answer: fx.answer,
                parts: Some(Composition {
                    outer,
                    inner,
                    tilde: fx.chars.clone(),
                }),
            });
        }
    }
    let name = format!(
        "{}∘({})",
        f.name,
        gs.iter().map(|g| g.name.as_str()).join(",")
    );
    Ok(QueryProblem::from_instances(
        name,
        gs[0].input_alphabet.clone(),
        instances,
        gs.iter().map(|g| g.length).collect(),
    ))
}

/// Nested ordered search `OS_a ∘ (HSOS_b, …, HSOS_b)`.
pub fn make_nos(a: usize, b: usize) -> Result<QueryProblem, ProblemError> {
    let inner = make_hsos(b)?;
    let mut p = compose(&make_os(a)?, &vec![inner; a])?;
    p.name = format!("NOS_{a},{b}");
    Ok(p)
}

/// 0/1 matrix marking instance pairs whose characters differ at `i` (1-based).
pub fn distinguisher(p: &QueryProblem, i: usize) -> Result<LabeledMatrix, ProblemError> {
    if i == 0 || i > p.length {
        return Err(ProblemError::PositionOutOfRange {
            i,
            length: p.length,
        });
    }
    let col: Vec<Symbol> = p.instances.iter().map(|x| x.chars[i - 1]).collect();
    let m = LabeledMatrix::new(
        p.labels(),
        col.iter()
            .flat_map(|a| col.iter().map(move |b| if a != b { 1.0 } else { 0.0 }))
            .collect(),
    )?;
    Ok(m.with_name(format!("D[{},{i}]", p.name)))
}

/// Equality of characters at one position for a class of labeled pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cell {
    /// No pair of this class exists.
    Undefined,
    Equal,
    Differ,
}

/// A `(σ, j)` labeling of a generalized search function with `m` variants.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchLabeling {
    pub variants: usize,
    /// Answers in label order; `σ` is an index into this list.
    pub answers: Vec<Answer>,
    /// `(σ, j)` of every instance, 0-based.
    pub of_instance: Vec<(usize, usize)>,
    /// Instance index of `(σ, j)`.
    pub instance_of: Vec<Vec<usize>>,
    /// Pattern over pairs with different answers: `cross[i][j1][j2]`.
    pub cross: Vec<Vec<Vec<Cell>>>,
    /// Pattern over pairs with equal answers: `same[i][j1][j2]`.
    pub same: Vec<Vec<Vec<Cell>>>,
    pub length: usize,
}

impl SearchLabeling {
    /// Validates `groups[σ][j] = instance index` against both conditions of a
    /// generalized search function, recording each position's pattern.
    pub fn new(p: &QueryProblem, groups: Vec<Vec<usize>>) -> Result<Self, ProblemError> {
        let bad = |msg: String| Err(ProblemError::Labeling(msg));
        let m = groups.first().map_or(0, Vec::len);
        if m == 0 {
            return bad("no variants".into());
        }
        let mut of_instance = vec![None; p.len()];
        let mut answers = Vec::with_capacity(groups.len());
        for (s, g) in groups.iter().enumerate() {
            if g.len() != m {
                return bad(format!(
                    "answer group {s} has {} variants, expected {m}",
                    g.len()
                ));
            }
            let sigma = p.instances[g[0]].answer;
            if answers.contains(&sigma) {
                return bad(format!("answer {sigma} appears in two groups"));
            }
            answers.push(sigma);
            for (j, &x) in g.iter().enumerate() {
                if p.instances[x].answer != sigma {
                    return bad(format!(
                        "instance {} has answer {}, labeled {sigma}",
                        p.render(x),
                        p.instances[x].answer
                    ));
                }
                if of_instance[x].replace((s, j)).is_some() {
                    return bad(format!("instance {} labeled twice", p.render(x)));
                }
            }
        }
        let Some(of_instance) = of_instance.into_iter().collect::<Option<Vec<_>>>() else {
            return bad("some instance is unlabeled".into());
        };

        let mut cross = vec![vec![vec![Cell::Undefined; m]; m]; p.length];
        let mut same = cross.clone();
        for i in 0..p.length {
            for (s1, g1) in groups.iter().enumerate() {
                for (s2, g2) in groups.iter().enumerate() {
                    let table = if s1 == s2 {
                        &mut same[i]
                    } else {
                        &mut cross[i]
                    };
                    for (j1, &x) in g1.iter().enumerate() {
                        for (j2, &y) in g2.iter().enumerate() {
                            let c = if p.instances[x].chars[i] == p.instances[y].chars[i] {
                                Cell::Equal
                            } else {
                                Cell::Differ
                            };
                            match table[j1][j2] {
                                Cell::Undefined => table[j1][j2] = c,
                                prev if prev != c => {
                                    return bad(format!(
                                        "position {} variants ({},{}): equality depends on the answers ({} vs {})",
                                        i + 1,
                                        j1 + 1,
                                        j2 + 1,
                                        p.render(x),
                                        p.render(y)
                                    ));
                                }
                                _ => {}
                            }
                        }
                    }
                }
            }
        }
        Ok(SearchLabeling {
            variants: m,
            answers,
            of_instance,
            instance_of: groups,
            cross,
            same,
            length: p.length,
        })
    }

    pub fn symbols(&self) -> usize {
        self.answers.len()
    }
}

/// Tries the canonical labeling: group by answer, order the variants of each
/// group by the first position holding a character that no other group has
/// at that position (ties and misses broken by the string itself).
pub fn detect_search_labeling(p: &QueryProblem) -> Option<SearchLabeling> {
    let mut groups: Vec<(Answer, Vec<usize>)> = Vec::new();
    for (x, inst) in p.instances.iter().enumerate() {
        match groups.iter_mut().find(|(a, _)| *a == inst.answer) {
            Some((_, g)) => g.push(x),
            None => groups.push((inst.answer, vec![x])),
        }
    }
    if groups.iter().map(|(_, g)| g.len()).unique().count() != 1 {
        return None;
    }
    // Characters seen at each position, per answer group.
    let seen: Vec<Vec<HashSet<Symbol>>> = groups
        .iter()
        .map(|(_, g)| {
            (0..p.length)
                .map(|i| g.iter().map(|&x| p.instances[x].chars[i]).collect())
                .collect()
        })
        .collect();
    let key = |gi: usize, x: usize| {
        let chars = &p.instances[x].chars;
        let first = (0..p.length).find(|&i| {
            seen.iter()
                .enumerate()
                .all(|(o, s)| o == gi || !s[i].contains(&chars[i]))
        });
        (first.unwrap_or(usize::MAX), chars.clone())
    };
    let ordered: Vec<Vec<usize>> = groups
        .iter()
        .enumerate()
        .map(|(gi, (_, g))| {
            let mut g = g.clone();
            g.sort_by_cached_key(|&x| key(gi, x));
            g
        })
        .collect();
    SearchLabeling::new(p, ordered).ok()
}
