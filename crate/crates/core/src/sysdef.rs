//! Switching-system definitions: parametric vector fields with exact
//! Jacobians, state-dependent transition matrices, the jump rate and the
//! compact state box.
//!
//! Systems are built from declarative JSON configuration (see
//! [`SystemConfig`]) and validated eagerly. A validated [`SwitchingSystem`] is
//! immutable and can be shared across worker threads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-sum tolerance for stochastic matrices.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Tolerance on the outward field component at the box boundary.
pub const INVARIANCE_TOL: f64 = 1e-9;

const BOUNDARY_SAMPLES_PER_AXIS: usize = 9;

/// Closed registry of vector-field families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldFamily {
    /// `F(x) = A x + b`; params: `A` row-major (d*d) followed by `b` (d).
    LinearAffine,
    /// `F(x) = c0 + c1 x + ... + ck x^k`, d = 1; params: `c0..ck`.
    Polynomial1d,
    /// `F(x) = -k (x - c)`; params: `k` followed by the center `c` (d).
    TwoWellAffine,
    /// `F_j(x) = x_j - x_j^3 + eps_j`; params: `eps` (d).
    CubicBistable,
    /// `F(x) = [[-kappa, omega], [-omega, -kappa]] x + b`, d = 2;
    /// params: `omega, kappa, b0, b1`.
    RotationAffine,
}

impl FieldFamily {
    /// Required parameter count for dimension `dim`, or `None` when any
    /// nonzero count is accepted.
    fn arity(self, dim: usize) -> Option<usize> {
        match self {
            FieldFamily::LinearAffine => Some(dim * dim + dim),
            FieldFamily::Polynomial1d => None,
            FieldFamily::TwoWellAffine => Some(1 + dim),
            FieldFamily::CubicBistable => Some(dim),
            FieldFamily::RotationAffine => Some(4),
        }
    }

    fn required_dim(self) -> Option<usize> {
        match self {
            FieldFamily::Polynomial1d => Some(1),
            FieldFamily::RotationAffine => Some(2),
            _ => None,
        }
    }
}

/// A smooth vector field on `R^d` from the family registry.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    family: FieldFamily,
    params: Vec<f64>,
    dim: usize,
}

impl VectorField {
    pub fn new(family: FieldFamily, params: Vec<f64>, dim: usize) -> Result<Self> {
        Self::validated(family, params, dim, "field")
    }

    fn validated(family: FieldFamily, params: Vec<f64>, dim: usize, path: &str) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config(path, "dimension must be positive"));
        }
        if let Some(req) = family.required_dim() {
            if req != dim {
                return Err(Error::config(
                    format!("{path}.family"),
                    format!("{family:?} requires dim = {req}, got {dim}"),
                ));
            }
        }
        match family.arity(dim) {
            Some(n) if params.len() != n => {
                return Err(Error::config(
                    format!("{path}.params"),
                    format!("{family:?} in dimension {dim} takes {n} parameters, got {}", params.len()),
                ));
            }
            None if params.is_empty() => {
                return Err(Error::config(format!("{path}.params"), "at least one coefficient required"));
            }
            _ => {}
        }
        if let Some(k) = params.iter().position(|p| !p.is_finite()) {
            return Err(Error::config(format!("{path}.params[{k}]"), "parameter is not finite"));
        }
        Ok(Self { family, params, dim })
    }

    /// The zero field in dimension `dim`.
    pub fn zero(dim: usize) -> Self {
        Self { family: FieldFamily::LinearAffine, params: vec![0.0; dim * dim + dim], dim }
    }

    pub fn family(&self) -> FieldFamily {
        self.family
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes `F(x)` into `out`.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let p = &self.params;
        match self.family {
            FieldFamily::LinearAffine => {
                let (a, b) = p.split_at(d * d);
                for r in 0..d {
                    let row = &a[r * d..(r + 1) * d];
                    out[r] = row.iter().zip(x).map(|(aij, xj)| aij * xj).sum::<f64>() + b[r];
                }
            }
            FieldFamily::Polynomial1d => {
                out[0] = p.iter().rev().fold(0.0, |acc, c| acc * x[0] + c);
            }
            FieldFamily::TwoWellAffine => {
                let k = p[0];
                for j in 0..d {
                    out[j] = -k * (x[j] - p[1 + j]);
                }
            }
            FieldFamily::CubicBistable => {
                for j in 0..d {
                    out[j] = x[j] - x[j] * x[j] * x[j] + p[j];
                }
            }
            FieldFamily::RotationAffine => {
                let (omega, kappa) = (p[0], p[1]);
                out[0] = -kappa * x[0] + omega * x[1] + p[2];
                out[1] = -omega * x[0] - kappa * x[1] + p[3];
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, &mut out);
        out
    }

    /// Exact Jacobian at `x`, row-major `d x d`.
    pub fn jacobian(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let p = &self.params;
        let mut jac = vec![0.0; d * d];
        match self.family {
            FieldFamily::LinearAffine => jac.copy_from_slice(&p[..d * d]),
            FieldFamily::Polynomial1d => {
                jac[0] = p.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, c)| acc * x[0] + k as f64 * c);
            }
            FieldFamily::TwoWellAffine => {
                for j in 0..d {
                    jac[j * d + j] = -p[0];
                }
            }
            FieldFamily::CubicBistable => {
                for j in 0..d {
                    jac[j * d + j] = 1.0 - 3.0 * x[j] * x[j];
                }
            }
            FieldFamily::RotationAffine => {
                let (omega, kappa) = (p[0], p[1]);
                jac.copy_from_slice(&[-kappa, omega, -omega, -kappa]);
            }
        }
        jac
    }
}

/// A row-stochastic square matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    n: usize,
    data: Vec<f64>,
}

impl StochasticMatrix {
    /// Builds a matrix from rows after checking shape, signs and row sums.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::validated(rows, rows.len(), "matrix")
    }

    fn validated(rows: &[Vec<f64>], n: usize, path: &str) -> Result<Self> {
        if rows.len() != n {
            return Err(Error::config(path, format!("expected {n} rows, got {}", rows.len())));
        }
        let mut data = Vec::with_capacity(n * n);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::config(
                    format!("{path}.row{r}"),
                    format!("expected {n} entries, got {}", row.len()),
                ));
            }
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::config(
                        format!("{path}.row{r}[{c}]"),
                        format!("entry {v} must be finite and nonnegative"),
                    ));
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::config(format!("{path}.row{r}"), format!("row sums to {sum}, expected 1")));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n, data })
    }

    /// Builds a matrix without validation. Intended for tests that need
    /// absorbing or otherwise inadmissible chains.
    pub fn from_rows_unchecked(rows: &[Vec<f64>]) -> Self {
        Self { n: rows.len(), data: rows.iter().flatten().copied().collect() }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// True when some power `Q^k`, `k <= n^2`, is entrywise positive.
    pub fn is_primitive(&self) -> bool {
        let n = self.n;
        let pattern: Vec<bool> = self.data.iter().map(|&v| v > 0.0).collect();
        let mut power = pattern.clone();
        for _ in 0..n * n {
            if power.iter().all(|&b| b) {
                return true;
            }
            let mut next = vec![false; n * n];
            for i in 0..n {
                for k in 0..n {
                    if !power[i * n + k] {
                        continue;
                    }
                    for j in 0..n {
                        next[i * n + j] |= pattern[k * n + j];
                    }
                }
            }
            power = next;
        }
        power.iter().all(|&b| b)
    }
}

/// Logistic blend between two transition matrices along one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Blend {
    pub center: f64,
    pub slope: f64,
    pub coord: usize,
}

impl Blend {
    fn weight(&self, x: &[f64]) -> f64 {
        1.0 / (1.0 + (-self.slope * (x[self.coord] - self.center)).exp())
    }
}

/// The map `x -> Q(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum TransitionMatrixField {
    Constant(StochasticMatrix),
    /// `Q(x) = (1 - s(x)) Q_from + s(x) Q_to` with logistic `s`.
    Interpolated {
        from: StochasticMatrix,
        to: StochasticMatrix,
        blend: Blend,
    },
}

impl TransitionMatrixField {
    pub fn size(&self) -> usize {
        match self {
            TransitionMatrixField::Constant(q) => q.size(),
            TransitionMatrixField::Interpolated { from, .. } => from.size(),
        }
    }

    /// Writes row `i` of `Q(x)` into `out`.
    pub fn row_into(&self, x: &[f64], i: usize, out: &mut [f64]) {
        match self {
            TransitionMatrixField::Constant(q) => out.copy_from_slice(q.row(i)),
            TransitionMatrixField::Interpolated { from, to, blend } => {
                let s = blend.weight(x);
                for ((o, a), b) in out.iter_mut().zip(from.row(i)).zip(to.row(i)) {
                    *o = (1.0 - s) * a + s * b;
                }
            }
        }
    }

    /// Single entry `Q(x, i, j)`.
    pub fn entry(&self, x: &[f64], i: usize, j: usize) -> f64 {
        match self {
            TransitionMatrixField::Constant(q) => q.get(i, j),
            TransitionMatrixField::Interpolated { from, to, blend } => {
                let s = blend.weight(x);
                (1.0 - s) * from.get(i, j) + s * to.get(i, j)
            }
        }
    }
}

/// A point of `R^d x E`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridState {
    pub x: Vec<f64>,
    pub mode: usize,
}

impl HybridState {
    pub fn new(x: Vec<f64>, mode: usize) -> Self {
        Self { x, mode }
    }
}

/// Boundary point where some mode points out of the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceWarning {
    pub mode: usize,
    /// Face as `(axis, is_upper)`.
    pub axis: usize,
    pub upper: bool,
    pub point: Vec<f64>,
    pub outward: f64,
}

/// A validated randomly switched system.
#[derive(Debug, Clone)]
pub struct SwitchingSystem {
    dim: usize,
    fields: Vec<VectorField>,
    q: TransitionMatrixField,
    lambda: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
    warnings: Vec<InvarianceWarning>,
}

impl SwitchingSystem {
    /// Builds and validates a system from parts.
    pub fn new(fields: Vec<VectorField>, q: TransitionMatrixField, lambda: f64, bounds: Vec<[f64; 2]>) -> Result<Self> {
        let dim = bounds.len();
        if dim == 0 {
            return Err(Error::config("box", "box must have at least one axis"));
        }
        for (k, [lo, hi]) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
                return Err(Error::config(format!("box[{k}]"), format!("need finite lo < hi, got [{lo}, {hi}]")));
            }
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::config("lambda", format!("jump rate must be positive, got {lambda}")));
        }
        if fields.is_empty() {
            return Err(Error::config("modes", "at least one mode required"));
        }
        for (i, f) in fields.iter().enumerate() {
            if f.dim() != dim {
                return Err(Error::config(
                    format!("modes[{i}]"),
                    format!("field has dimension {}, box has {dim}", f.dim()),
                ));
            }
        }
        if q.size() != fields.len() {
            return Err(Error::config(
                "q.matrices",
                format!("transition matrix is {0}x{0} but there are {1} modes", q.size(), fields.len()),
            ));
        }
        let mut sys = Self {
            dim,
            fields,
            q,
            lambda,
            lo: bounds.iter().map(|b| b[0]).collect(),
            hi: bounds.iter().map(|b| b[1]).collect(),
            warnings: Vec::new(),
        };
        sys.check_bounded()?;
        sys.warnings = sys.boundary_audit(BOUNDARY_SAMPLES_PER_AXIS);
        Ok(sys)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of modes, `m + 1`.
    pub fn modes(&self) -> usize {
        self.fields.len()
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    pub fn field(&self, i: usize) -> &VectorField {
        &self.fields[i]
    }

    pub fn q(&self) -> &TransitionMatrixField {
        &self.q
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn bounds(&self) -> Vec<[f64; 2]> {
        self.lo.iter().zip(&self.hi).map(|(&l, &h)| [l, h]).collect()
    }

    /// Euclidean diameter of the box.
    pub fn diameter(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| (h - l) * (h - l)).sum::<f64>().sqrt()
    }

    /// Allowed numerical excursion outside the box.
    pub fn guard_band(&self) -> f64 {
        1e-6 * self.diameter()
    }

    /// Distance by which `x` lies outside the box (0 inside).
    pub fn outside_distance(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&l, &h))| (l - v).max(v - h).max(0.0).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.outside_distance(x) == 0.0
    }

    /// True when no boundary sample has a mode pointing out of the box.
    pub fn box_invariant(&self) -> bool {
        self.warnings.is_empty()
    }

    pub fn invariance_warnings(&self) -> &[InvarianceWarning] {
        &self.warnings
    }

    /// `F^i(x)`.
    pub fn eval_field(&self, i: usize, x: &[f64]) -> Vec<f64> {
        self.fields[i].eval(x)
    }

    /// `Q(x)` as a full matrix.
    pub fn eval_q(&self, x: &[f64]) -> StochasticMatrix {
        let n = self.modes();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            self.q.row_into(x, i, &mut data[i * n..(i + 1) * n]);
        }
        StochasticMatrix { n, data }
    }

    /// Points of a regular lattice with `per_axis` points along each axis of
    /// the box, endpoints included.
    pub fn lattice(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let per_axis = per_axis.max(2);
        let total = per_axis.pow(self.dim as u32);
        (0..total)
            .map(|mut lin| {
                let mut p = vec![0.0; self.dim];
                for k in (0..self.dim).rev() {
                    let idx = lin % per_axis;
                    lin /= per_axis;
                    let s = idx as f64 / (per_axis - 1) as f64;
                    p[k] = self.lo[k] + s * (self.hi[k] - self.lo[k]);
                }
                p
            })
            .collect()
    }

    /// Sample points on each face of the box; `per_axis` points along every
    /// free axis of a face.
    pub fn boundary_samples(&self, per_axis: usize) -> Vec<(usize, bool, Vec<f64>)> {
        let lattice = self.lattice(per_axis);
        let mut out = Vec::new();
        for axis in 0..self.dim {
            for upper in [false, true] {
                let face = if upper { self.hi[axis] } else { self.lo[axis] };
                let mut seen: Vec<Vec<f64>> = Vec::new();
                for p in &lattice {
                    let mut q = p.clone();
                    q[axis] = face;
                    if !seen.contains(&q) {
                        seen.push(q);
                    }
                }
                out.extend(seen.into_iter().map(|q| (axis, upper, q)));
            }
        }
        out
    }

    fn check_bounded(&self) -> Result<()> {
        for p in self.lattice(BOUNDARY_SAMPLES_PER_AXIS) {
            for (i, f) in self.fields.iter().enumerate() {
                if f.eval(&p).iter().any(|v| !v.is_finite()) {
                    return Err(Error::config(format!("modes[{i}]"), "field is not finite on the box"));
                }
            }
        }
        Ok(())
    }

    fn boundary_audit(&self, per_axis: usize) -> Vec<InvarianceWarning> {
        let mut warnings = Vec::new();
        for (axis, upper, point) in self.boundary_samples(per_axis) {
            for (mode, f) in self.fields.iter().enumerate() {
                let v = f.eval(&point)[axis];
                let outward = if upper { v } else { -v };
                if outward > INVARIANCE_TOL {
                    warnings.push(InvarianceWarning { mode, axis, upper, point: point.clone(), outward });
                }
            }
        }
        warnings
    }

    /// Declarative form of this system.
    pub fn to_config(&self) -> SystemConfig {
        let (family, matrices, blend) = match &self.q {
            TransitionMatrixField::Constant(q) => (QFamily::Constant, vec![q.rows()], None),
            TransitionMatrixField::Interpolated { from, to, blend } => {
                (QFamily::Interpolated, vec![from.rows(), to.rows()], Some(*blend))
            }
        };
        SystemConfig {
            dim: self.dim,
            lambda: self.lambda,
            bounds: self.bounds(),
            modes: self.fields.iter().map(|f| ModeConfig { family: f.family, params: f.params.clone() }).collect(),
            q: QConfig { family, matrices, blend },
            analysis: None,
        }
    }

    /// Replaces the transition field without primitivity checks. Test hook
    /// for absorbing chains.
    #[doc(hidden)]
    pub fn with_q_unchecked(mut self, q: TransitionMatrixField) -> Self {
        self.q = q;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QFamily {
    Constant,
    Interpolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub family: FieldFamily,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QConfig {
    pub family: QFamily,
    pub matrices: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blend: Option<Blend>,
}

/// Optional analysis defaults carried by a config file. Command-line flags
/// take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisDefaults {
    pub h: Option<f64>,
    pub tau: Option<f64>,
    pub samples: Option<usize>,
    pub horizon: Option<f64>,
    pub burn_in: Option<f64>,
    pub sample_dt: Option<f64>,
    pub threshold: Option<f64>,
    pub inflation: Option<usize>,
    pub seed: Option<u64>,
    pub x0: Option<Vec<f64>>,
    pub mode0: Option<usize>,
}

/// On-disk configuration schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub dim: usize,
    pub lambda: f64,
    #[serde(rename = "box")]
    pub bounds: Vec<[f64; 2]>,
    pub modes: Vec<ModeConfig>,
    pub q: QConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisDefaults>,
}

impl SystemConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(
                if path == "." || path == "?" { "<root>".to_string() } else { path },
                e.into_inner().to_string(),
            )
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Validates this configuration into a system.
    pub fn build(&self) -> Result<SwitchingSystem> {
        if self.dim == 0 {
            return Err(Error::config("dim", "dimension must be positive"));
        }
        if self.bounds.len() != self.dim {
            return Err(Error::config("box", format!("expected {} intervals, got {}", self.dim, self.bounds.len())));
        }
        if self.modes.is_empty() {
            return Err(Error::config("modes", "at least one mode required"));
        }
        let fields = self
            .modes
            .iter()
            .enumerate()
            .map(|(i, m)| VectorField::validated(m.family, m.params.clone(), self.dim, &format!("modes[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let n = self.modes.len();
        let expected = match self.q.family {
            QFamily::Constant => 1,
            QFamily::Interpolated => 2,
        };
        if self.q.matrices.len() != expected {
            return Err(Error::config(
                "q.matrices",
                format!("{:?} family takes {expected} matrices, got {}", self.q.family, self.q.matrices.len()),
            ));
        }
        let mats = self
            .q
            .matrices
            .iter()
            .enumerate()
            .map(|(k, rows)| {
                let path = format!("q.matrices[{k}]");
                let m = StochasticMatrix::validated(rows, n, &path)?;
                if !m.is_primitive() {
                    return Err(Error::config(path, "matrix is not irreducible and aperiodic"));
                }
                Ok(m)
            })
            .collect::<Result<Vec<_>>>()?;
        let q = match self.q.family {
            QFamily::Constant => {
                if self.q.blend.is_some() {
                    return Err(Error::config("q.blend", "blend only applies to the interpolated family"));
                }
                TransitionMatrixField::Constant(mats.into_iter().next().expect("one matrix"))
            }
            QFamily::Interpolated => {
                let blend =
                    self.q.blend.ok_or_else(|| Error::config("q.blend", "interpolated family needs a blend"))?;
                if blend.coord >= self.dim {
                    return Err(Error::config("q.blend.coord", format!("coordinate {} out of range", blend.coord)));
                }
                if !(blend.center.is_finite() && blend.slope.is_finite()) {
                    return Err(Error::config("q.blend", "center and slope must be finite"));
                }
                let mut it = mats.into_iter();
                let from = it.next().expect("two matrices");
                let to = it.next().expect("two matrices");
                TransitionMatrixField::Interpolated { from, to, blend }
            }
        };
        SwitchingSystem::new(fields, q, self.lambda, self.bounds.clone())
    }
}

/// Parses and validates configuration text.
pub fn load_system(config_text: &str) -> Result<SwitchingSystem> {
    SystemConfig::parse(config_text)?.build()
}

/// Built-in benchmark configurations.
pub mod presets {
    use super::*;

    /// `F0 = -(x+1)`, `F1 = -(x-1)` on `[-3, 3]`, uniform switching, `lambda = 1`.
    pub fn two_well() -> SystemConfig {
        SystemConfig {
            dim: 1,
            lambda: 1.0,
            bounds: vec![[-3.0, 3.0]],
            modes: vec![
                ModeConfig { family: FieldFamily::TwoWellAffine, params: vec![1.0, -1.0] },
                ModeConfig { family: FieldFamily::TwoWellAffine, params: vec![1.0, 1.0] },
            ],
            q: QConfig { family: QFamily::Constant, matrices: vec![vec![vec![0.5, 0.5], vec![0.5, 0.5]]], blend: None },
            analysis: None,
        }
    }

    /// `F_i = x - x^3 + eps_i` with `eps = (-eps, +eps)` on `[-2, 2]`.
    pub fn cubic_bistable(eps: f64) -> SystemConfig {
        SystemConfig {
            dim: 1,
            lambda: 1.0,
            bounds: vec![[-2.0, 2.0]],
            modes: vec![
                ModeConfig { family: FieldFamily::CubicBistable, params: vec![-eps] },
                ModeConfig { family: FieldFamily::CubicBistable, params: vec![eps] },
            ],
            q: QConfig { family: QFamily::Constant, matrices: vec![vec![vec![0.5, 0.5], vec![0.5, 0.5]]], blend: None },
            analysis: None,
        }
    }

    /// Damped rotation with a constant push in mode 1, on `[-4, 4]^2`.
    pub fn damped_rotation() -> SystemConfig {
        SystemConfig {
            dim: 2,
            lambda: 2.0,
            bounds: vec![[-4.0, 4.0], [-4.0, 4.0]],
            modes: vec![
                ModeConfig { family: FieldFamily::RotationAffine, params: vec![1.0, 0.5, 0.0, 0.0] },
                ModeConfig { family: FieldFamily::RotationAffine, params: vec![1.0, 0.5, 0.0, 1.0] },
            ],
            q: QConfig { family: QFamily::Constant, matrices: vec![vec![vec![0.5, 0.5], vec![0.5, 0.5]]], blend: None },
            analysis: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_well_json() -> String {
        presets::two_well().to_json()
    }

    #[test]
    fn two_well_loads() {
        let sys = load_system(&two_well_json()).unwrap();
        assert_eq!(sys.dim(), 1);
        assert_eq!(sys.modes(), 2);
        assert!(sys.box_invariant());
    }

    #[test]
    fn row_sum_error_names_row() {
        let mut cfg = presets::two_well();
        cfg.q.matrices[0][0] = vec![0.7, 0.7];
        let err = cfg.build().unwrap_err();
        match err {
            Error::Config { path, .. } => assert_eq!(path, "q.matrices[0].row0"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn identity_q_is_rejected() {
        let mut cfg = presets::two_well();
        cfg.q.matrices[0] = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let err = cfg.build().unwrap_err().to_string();
        assert!(err.contains("irreducible"), "{err}");
    }

    #[test]
    fn periodic_q_is_rejected() {
        let mut cfg = presets::two_well();
        cfg.q.matrices[0] = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(cfg.build().is_err());
    }

    #[test]
    fn schema_errors_carry_paths() {
        let text = two_well_json().replace("\"lambda\": 1.0", "\"lambda\": \"fast\"");
        match load_system(&text).unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "lambda"),
            other => panic!("unexpected {other:?}"),
        }
        let mut cfg = presets::two_well();
        cfg.bounds = vec![[1.0, -1.0]];
        match cfg.build().unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "box[0]"),
            other => panic!("unexpected {other:?}"),
        }
        let mut cfg = presets::two_well();
        cfg.modes[1].params.push(3.0);
        match cfg.build().unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "modes[1].params"),
            other => panic!("unexpected {other:?}"),
        }
        let mut cfg = presets::two_well();
        cfg.dim = 2;
        assert!(cfg.build().is_err());
    }

    #[test]
    fn eval_field_examples() {
        let sys = presets::two_well().build().unwrap();
        assert_eq!(sys.eval_field(0, &[-1.0]), vec![0.0]);
        assert_eq!(sys.eval_field(1, &[0.0]), vec![1.0]);
        let bi = presets::cubic_bistable(0.1).build().unwrap();
        assert_eq!(bi.eval_field(0, &[0.0]), vec![-0.1]);
    }

    #[test]
    fn interpolated_q_midpoint() {
        let mut cfg = presets::two_well();
        cfg.q = QConfig {
            family: QFamily::Interpolated,
            matrices: vec![vec![vec![0.2, 0.8], vec![0.6, 0.4]], vec![vec![0.9, 0.1], vec![0.3, 0.7]]],
            blend: Some(Blend { center: 0.5, slope: 4.0, coord: 0 }),
        };
        let sys = cfg.build().unwrap();
        let q = sys.eval_q(&[0.5]);
        assert!((q.get(0, 0) - 0.55).abs() < 1e-15);
        assert!((q.get(1, 1) - 0.55).abs() < 1e-15);
        assert!((q.get(0, 1) - 0.45).abs() < 1e-15);
    }

    #[test]
    fn two_well_on_small_box_warns() {
        let mut cfg = presets::two_well();
        cfg.bounds = vec![[-0.5, 0.5]];
        let sys = cfg.build().unwrap();
        assert!(!sys.box_invariant());
        let w = sys.invariance_warnings();
        assert_eq!(w.len(), 2);
        assert!(w.iter().any(|w| w.mode == 0 && !w.upper));
        assert!(w.iter().any(|w| w.mode == 1 && w.upper));
    }

    #[test]
    fn field_family_dims_enforced() {
        assert!(VectorField::new(FieldFamily::RotationAffine, vec![1.0, 0.0, 0.0, 0.0], 3).is_err());
        assert!(VectorField::new(FieldFamily::Polynomial1d, vec![], 1).is_err());
        assert!(VectorField::new(FieldFamily::Polynomial1d, vec![1.0, 2.0, 3.0], 1).is_ok());
    }

    #[test]
    fn polynomial_eval_and_jacobian() {
        let f = VectorField::new(FieldFamily::Polynomial1d, vec![1.0, -2.0, 0.5, 3.0], 1).unwrap();
        let x = 1.5_f64;
        let expect = 1.0 - 2.0 * x + 0.5 * x * x + 3.0 * x * x * x;
        assert!((f.eval(&[x])[0] - expect).abs() < 1e-12);
        let dexpect = -2.0 + x + 9.0 * x * x;
        assert!((f.jacobian(&[x])[0] - dexpect).abs() < 1e-12);
    }

    #[test]
    fn primitive_check() {
        let q = StochasticMatrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.5, 0.5, 0.0]]).unwrap();
        assert!(q.is_primitive());
        let cyc =
            StochasticMatrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]]).unwrap();
        assert!(!cyc.is_primitive());
    }
}
