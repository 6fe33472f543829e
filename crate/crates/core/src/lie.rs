//! Lie brackets of the system fields and the accessibility rank condition.
//!
//! Generators carry exact Jacobians. Brackets of brackets need Jacobians of
//! bracket fields, which are taken by central differences of the level
//! below with step `1e-5 (1 + |x|)`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::sysdef::{SwitchingSystem, VectorField};

/// Relative singular-value threshold for the numerical rank.
pub const RANK_TOL: f64 = 1e-8;

/// Anything that can be evaluated and differentiated at a point.
pub trait SmoothField {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> DVector<f64>;
    fn jacobian(&self, x: &[f64]) -> DMatrix<f64>;
}

impl SmoothField for VectorField {
    fn dim(&self) -> usize {
        VectorField::dim(self)
    }

    fn value(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_vec(self.eval(x))
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let d = VectorField::dim(self);
        DMatrix::from_row_slice(d, d, &VectorField::jacobian(self, x))
    }
}

/// `F^i - F^0`, a control vector field of the control-affine form.
pub struct Difference<'a> {
    pub field: &'a VectorField,
    pub base: &'a VectorField,
}

impl SmoothField for Difference<'_> {
    fn dim(&self) -> usize {
        self.field.dim()
    }

    fn value(&self, x: &[f64]) -> DVector<f64> {
        self.field.value(x) - self.base.value(x)
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        SmoothField::jacobian(self.field, x) - SmoothField::jacobian(self.base, x)
    }
}

/// `[f, g](x) = Dg(x) f(x) - Df(x) g(x)`.
pub fn lie_bracket(f: &dyn SmoothField, g: &dyn SmoothField, x: &[f64]) -> DVector<f64> {
    g.jacobian(x) * f.value(x) - f.jacobian(x) * g.value(x)
}

fn fd_step(x: &[f64]) -> f64 {
    1e-5 * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Jacobian of `field` by central differences.
pub fn fd_jacobian(field: &dyn Fn(&[f64]) -> DVector<f64>, x: &[f64]) -> DMatrix<f64> {
    let d = x.len();
    let step = fd_step(x);
    let mut jac = DMatrix::zeros(d, d);
    let mut xp = x.to_vec();
    for k in 0..d {
        xp[k] = x[k] + step;
        let fp = field(&xp);
        xp[k] = x[k] - step;
        let fm = field(&xp);
        xp[k] = x[k];
        jac.set_column(k, &((fp - fm) / (2.0 * step)));
    }
    jac
}

/// A bracket word over generator indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BracketWord {
    Gen(usize),
    Bracket(Box<BracketWord>, Box<BracketWord>),
}

impl BracketWord {
    pub fn bracket(a: &BracketWord, b: &BracketWord) -> Self {
        BracketWord::Bracket(Box::new(a.clone()), Box::new(b.clone()))
    }

    /// Number of generator letters.
    pub fn len(&self) -> usize {
        match self {
            BracketWord::Gen(_) => 1,
            BracketWord::Bracket(a, b) => a.len() + b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Bracket nesting depth (0 for generators).
    pub fn depth(&self) -> usize {
        self.len() - 1
    }
}

impl fmt::Display for BracketWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BracketWord::Gen(i) => write!(f, "F{i}"),
            BracketWord::Bracket(a, b) => write!(f, "[{a},{b}]"),
        }
    }
}

/// Hall basis words over `generators` letters with at most `depth` nested
/// brackets, ordered by length.
pub fn hall_words(generators: usize, depth: usize) -> Vec<BracketWord> {
    let mut words: Vec<BracketWord> = (0..generators).map(BracketWord::Gen).collect();
    // index ranges per length
    let mut by_len: Vec<std::ops::Range<usize>> = vec![0..0, 0..generators];
    for len in 2..=depth + 1 {
        let start = words.len();
        for lu in 1..len {
            let lv = len - lu;
            for u in by_len[lu].clone() {
                for v in by_len[lv].clone() {
                    if u >= v {
                        continue;
                    }
                    let ok = match &words[v] {
                        BracketWord::Gen(_) => true,
                        BracketWord::Bracket(x, _) => {
                            let xi = words.iter().position(|w| w == x.as_ref()).expect("hall word");
                            xi <= u
                        }
                    };
                    if ok {
                        let w = BracketWord::bracket(&words[u], &words[v]);
                        words.push(w);
                    }
                }
            }
        }
        by_len.push(start..words.len());
    }
    words
}

/// Evaluates bracket words over a fixed generator list.
pub struct BracketEvaluator<'a> {
    generators: Vec<&'a dyn SmoothField>,
}

impl<'a> BracketEvaluator<'a> {
    pub fn new(generators: Vec<&'a dyn SmoothField>) -> Self {
        Self { generators }
    }

    pub fn value(&self, word: &BracketWord, x: &[f64]) -> DVector<f64> {
        match word {
            BracketWord::Gen(i) => self.generators[*i].value(x),
            BracketWord::Bracket(a, b) => {
                self.jacobian(b, x) * self.value(a, x) - self.jacobian(a, x) * self.value(b, x)
            }
        }
    }

    pub fn jacobian(&self, word: &BracketWord, x: &[f64]) -> DMatrix<f64> {
        match word {
            BracketWord::Gen(i) => self.generators[*i].jacobian(x),
            BracketWord::Bracket(..) => fd_jacobian(&|y| self.value(word, y), x),
        }
    }
}

/// Which family of generators spans the algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorSet {
    /// `F^0, ..., F^m`.
    #[default]
    Full,
    /// `F^0` and the control fields `F^i - F^0`.
    ControlAffine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketEntry {
    pub word: String,
    pub depth: usize,
    pub value: Vec<f64>,
}

/// Bracket words evaluated at a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketTable {
    pub generators: GeneratorSet,
    pub depth: usize,
    pub point: Vec<f64>,
    pub entries: Vec<BracketEntry>,
}

pub fn bracket_table(sys: &SwitchingSystem, x: &[f64], depth: usize, generators: GeneratorSet) -> BracketTable {
    let diffs: Vec<Difference<'_>> =
        (1..sys.modes()).map(|i| Difference { field: sys.field(i), base: sys.field(0) }).collect();
    let gens: Vec<&dyn SmoothField> = match generators {
        GeneratorSet::Full => sys.fields().iter().map(|f| f as &dyn SmoothField).collect(),
        GeneratorSet::ControlAffine => std::iter::once(sys.field(0) as &dyn SmoothField)
            .chain(diffs.iter().map(|d| d as &dyn SmoothField))
            .collect(),
    };
    let eval = BracketEvaluator::new(gens);
    let entries = hall_words(sys.modes(), depth)
        .iter()
        .map(|w| BracketEntry { word: w.to_string(), depth: w.depth(), value: eval.value(w, x).as_slice().to_vec() })
        .collect();
    BracketTable { generators, depth, point: x.to_vec(), entries }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub point: Vec<f64>,
    pub rank: usize,
    pub depth: usize,
    pub generators: GeneratorSet,
    pub singular_values: Vec<f64>,
    pub tolerance: f64,
}

/// Numerical rank of stacked column vectors: singular values above
/// `tol * max(1, largest)`. Returns the rank and descending spectrum.
pub fn numerical_rank(columns: &[Vec<f64>], dim: usize, tol: f64) -> (usize, Vec<f64>) {
    if columns.is_empty() {
        return (0, Vec::new());
    }
    let m = DMatrix::from_fn(dim, columns.len(), |r, c| columns[c][r]);
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let scale = sv.first().copied().unwrap_or(0.0).max(1.0);
    let rank = sv.iter().filter(|&&s| s > tol * scale).count();
    (rank, sv)
}

pub fn larc_rank_with(sys: &SwitchingSystem, x: &[f64], depth: usize, generators: GeneratorSet) -> RankReport {
    let table = bracket_table(sys, x, depth, generators);
    let cols: Vec<Vec<f64>> = table.entries.into_iter().map(|e| e.value).collect();
    let (rank, singular_values) = numerical_rank(&cols, sys.dim(), RANK_TOL);
    RankReport { point: x.to_vec(), rank, depth, generators, singular_values, tolerance: RANK_TOL }
}

/// Rank of the evaluated Lie algebra generated by `F^0..F^m` up to `depth`.
pub fn larc_rank(sys: &SwitchingSystem, x: &[f64], depth: usize) -> RankReport {
    larc_rank_with(sys, x, depth, GeneratorSet::Full)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LarcCheck {
    pub all_full_rank: bool,
    pub reports: Vec<RankReport>,
}

pub fn check_larc(sys: &SwitchingSystem, points: &[Vec<f64>], depth: usize) -> LarcCheck {
    check_larc_with(sys, points, depth, GeneratorSet::Full)
}

pub fn check_larc_with(
    sys: &SwitchingSystem,
    points: &[Vec<f64>],
    depth: usize,
    generators: GeneratorSet,
) -> LarcCheck {
    let reports: Vec<RankReport> = points.iter().map(|p| larc_rank_with(sys, p, depth, generators)).collect();
    LarcCheck { all_full_rank: reports.iter().all(|r| r.rank == sys.dim()), reports }
}
