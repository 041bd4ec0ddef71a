//! Solver-agnostic conic programs.
//!
//! A [`ConicProgram`] is `minimize cᵀx + c₀ s.t. Ax = b, x[slice_i] ∈ K_i`,
//! where the cone slices partition a suffix of `x` and the leading variables
//! are free. Programs are assembled with [`ProgramBuilder`]: general conic
//! constraints on affine expressions get a fresh cone block plus linking
//! equality rows, each row tagged with the constraint family it came from.

mod backend;
pub mod embed;

use std::fmt::Write as _;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::{ConstraintFamily, Error, Result};
use crate::linalg::CMat;
use embed::{extract_hermitian, smat, svec_index, svec_len, trace_coefficients, RMat};

pub use backend::solve;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeKind {
    Nonnegative,
    /// `x₀ ≥ ‖x₁..‖`
    SecondOrder,
    /// Real symmetric `m×m` block in scaled-triangular storage.
    PsdReal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeBlock {
    pub kind: ConeKind,
    /// Cone dimension; matrix side `m` for PSD blocks.
    pub dim: usize,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub objective_offset: f64,
    /// Sparse rows of `A` as `(column, value)` lists.
    pub eq_rows: Vec<Vec<(usize, f64)>>,
    pub eq_rhs: Vec<f64>,
    pub eq_tags: Vec<Option<ConstraintFamily>>,
    pub cone_blocks: Vec<ConeBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalLimit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub max_iter: u32,
    pub verbose: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tol_feas: 1e-8, tol_gap: 1e-8, max_iter: 200, verbose: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: u32,
    pub solve_ms: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub primal: Vec<f64>,
    pub objective_value: f64,
    /// Multipliers of the equality rows; an infeasibility certificate when
    /// `status` is `Infeasible`.
    pub eq_dual: Vec<f64>,
    pub stats: SolveStats,
}

/// Feasibility tolerance of an `Optimal` primal point.
pub const ACCEPT_TOL: f64 = 1e-6;

impl ConicProgram {
    pub fn n_free(&self) -> usize {
        self.cone_blocks.first().map_or(self.n_vars, |b| b.start)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("malformed conic program: {m}")));
        if self.objective.len() != self.n_vars {
            return bad("objective length");
        }
        if self.eq_rows.len() != self.eq_rhs.len() || self.eq_rows.len() != self.eq_tags.len() {
            return bad("equality row count");
        }
        if self.eq_rows.iter().flatten().any(|&(j, v)| j >= self.n_vars || !v.is_finite()) {
            return bad("equality entry out of range");
        }
        let mut next = self.n_free();
        for b in &self.cone_blocks {
            let expect = match b.kind {
                ConeKind::PsdReal => svec_len(b.dim),
                _ => b.dim,
            };
            if b.start != next || b.len != expect || b.len == 0 {
                return bad("cone blocks do not tile a suffix");
            }
            next += b.len;
        }
        if next != self.n_vars {
            return bad("cone blocks do not end at the last variable");
        }
        Ok(())
    }

    /// Largest scaled violation of `Ax = b` and of the cone memberships at `x`.
    pub fn violation(&self, x: &[f64]) -> (f64, f64) {
        let b_inf = self.eq_rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let eq = self
            .eq_rows
            .iter()
            .zip(&self.eq_rhs)
            .map(|(row, b)| (row.iter().map(|&(j, v)| v * x[j]).sum::<f64>() - b).abs())
            .fold(0.0, f64::max)
            / (1.0 + b_inf);
        let mut cone = 0.0f64;
        for b in &self.cone_blocks {
            let s = &x[b.start..b.start + b.len];
            let scale = 1.0 + s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let v = match b.kind {
                ConeKind::Nonnegative => -s.iter().copied().fold(f64::INFINITY, f64::min),
                ConeKind::SecondOrder => s[1..].iter().map(|v| v * v).sum::<f64>().sqrt() - s[0],
                ConeKind::PsdReal => {
                    let m = smat(s, b.dim);
                    -m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
                }
            };
            cone = cone.max(v / scale);
        }
        (eq, cone)
    }

    /// Plain-text dump: objective, sparse `A`, `b` and the cone list.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "conic_program n_vars={} n_eq={}", self.n_vars, self.eq_rows.len());
        let _ = writeln!(s, "objective_offset {:e}", self.objective_offset);
        let _ = write!(s, "objective");
        for (j, v) in self.objective.iter().enumerate().filter(|(_, v)| **v != 0.0) {
            let _ = write!(s, " {j}:{v:e}");
        }
        let _ = writeln!(s);
        for (i, ((row, b), tag)) in self.eq_rows.iter().zip(&self.eq_rhs).zip(&self.eq_tags).enumerate() {
            let tag = tag.map_or("-".to_string(), |t| t.to_string());
            let _ = write!(s, "eq {i} tag={tag} rhs={b:e} |");
            for (j, v) in row {
                let _ = write!(s, " {j}:{v:e}");
            }
            let _ = writeln!(s);
        }
        for b in &self.cone_blocks {
            let kind = match b.kind {
                ConeKind::Nonnegative => "nonnegative",
                ConeKind::SecondOrder => "second_order",
                ConeKind::PsdReal => "psd_real",
            };
            let _ = writeln!(s, "cone {kind} dim={} start={} len={}", b.dim, b.start, b.len);
        }
        s
    }

    /// Constraint family whose rows carry the largest share of an
    /// infeasibility certificate.
    pub fn attribute(&self, certificate: &[f64]) -> Option<ConstraintFamily> {
        let mut weight: Vec<(ConstraintFamily, f64)> = Vec::new();
        for (tag, y) in self.eq_tags.iter().zip(certificate) {
            if let Some(t) = tag {
                match weight.iter_mut().find(|(f, _)| f == t) {
                    Some((_, w)) => *w += y.abs(),
                    None => weight.push((*t, y.abs())),
                }
            }
        }
        weight.into_iter().filter(|(_, w)| *w > 0.0).max_by(|a, b| a.1.total_cmp(&b.1)).map(|(f, _)| f)
    }
}

impl ConicSolution {
    /// Maps non-optimal outcomes to application errors.
    pub fn require_optimal(self, program: &ConicProgram) -> Result<Self> {
        match self.status {
            SolveStatus::Optimal => Ok(self),
            SolveStatus::Infeasible => Err(Error::Infeasible { family: program.attribute(&self.eq_dual) }),
            SolveStatus::Unbounded => Err(Error::NumericalLimit("surrogate reported unbounded".into())),
            SolveStatus::NumericalLimit => Err(Error::NumericalLimit(format!(
                "stopped after {} iterations, residuals {:.2e}/{:.2e}",
                self.stats.iterations, self.stats.primal_residual, self.stats.dual_residual
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// Builder

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Slot {
    Free(usize),
    Cone { block: usize, offset: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarId(Slot);

/// Affine expression `Σ coef·var + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn term(v: VarId, coef: f64) -> Self {
        Self { terms: vec![(v, coef)], constant: 0.0 }
    }

    pub fn add_term(&mut self, v: VarId, coef: f64) {
        if coef != 0.0 {
            self.terms.push((v, coef));
        }
    }
}

impl From<VarId> for LinExpr {
    fn from(v: VarId) -> Self {
        LinExpr::term(v, 1.0)
    }
}

impl From<f64> for LinExpr {
    fn from(c: f64) -> Self {
        LinExpr::constant(c)
    }
}

impl AddAssign<&LinExpr> for LinExpr {
    fn add_assign(&mut self, rhs: &LinExpr) {
        self.terms.extend_from_slice(&rhs.terms);
        self.constant += rhs.constant;
    }
}

impl<T: Into<LinExpr>> Add<T> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: T) -> LinExpr {
        self += &rhs.into();
        self
    }
}

impl<T: Into<LinExpr>> Sub<T> for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: T) -> LinExpr {
        self += &(-rhs.into());
        self
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self * -1.0
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(mut self, k: f64) -> LinExpr {
        for t in &mut self.terms {
            t.1 *= k;
        }
        self.constant *= k;
        self
    }
}

/// A real symmetric PSD block variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PsdVar {
    block: usize,
    pub dim: usize,
}

impl PsdVar {
    /// Storage variable of entry `(i, j)`; its value is `√2·X_ij` off the
    /// diagonal.
    pub fn storage(&self, i: usize, j: usize) -> VarId {
        VarId(Slot::Cone { block: self.block, offset: svec_index(i, j) })
    }
}

/// A complex Hermitian PSD matrix variable realized through its real
/// embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HermVar {
    pub psd: PsdVar,
    pub n: usize,
}

impl HermVar {
    /// `Re Tr(M V)`, affine in the variable.
    pub fn trace_with(&self, m: &CMat) -> LinExpr {
        let mut e = LinExpr::zero();
        for (k, w) in trace_coefficients(m).into_iter().enumerate() {
            if w != 0.0 {
                e.terms.push((VarId(Slot::Cone { block: self.psd.block, offset: k }), w));
            }
        }
        e
    }

    pub fn trace(&self) -> LinExpr {
        self.trace_with(&CMat::identity(self.n, self.n))
    }
}

#[derive(Debug, Default, Clone)]
pub struct ProgramBuilder {
    n_free: usize,
    blocks: Vec<(ConeKind, usize)>,
    rows: Vec<(LinExpr, Option<ConstraintFamily>)>,
    objective: LinExpr,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn free_var(&mut self) -> VarId {
        self.n_free += 1;
        VarId(Slot::Free(self.n_free - 1))
    }

    pub fn free_vars(&mut self, n: usize) -> Vec<VarId> {
        (0..n).map(|_| self.free_var()).collect()
    }

    fn cone_block(&mut self, kind: ConeKind, dim: usize) -> Vec<VarId> {
        let block = self.blocks.len();
        self.blocks.push((kind, dim));
        let len = if kind == ConeKind::PsdReal { svec_len(dim) } else { dim };
        (0..len).map(|offset| VarId(Slot::Cone { block, offset })).collect()
    }

    pub fn nonneg_var(&mut self) -> VarId {
        self.cone_block(ConeKind::Nonnegative, 1)[0]
    }

    pub fn soc_vars(&mut self, dim: usize) -> Vec<VarId> {
        self.cone_block(ConeKind::SecondOrder, dim)
    }

    pub fn psd(&mut self, dim: usize) -> PsdVar {
        self.cone_block(ConeKind::PsdReal, dim);
        PsdVar { block: self.blocks.len() - 1, dim }
    }

    pub fn hermitian_psd(&mut self, n: usize) -> HermVar {
        HermVar { psd: self.psd(2 * n), n }
    }

    /// `expr = 0`
    pub fn equal(&mut self, expr: LinExpr, tag: Option<ConstraintFamily>) {
        self.rows.push((expr, tag));
    }

    /// `expr ≥ 0`
    pub fn geq_zero(&mut self, expr: LinExpr, tag: Option<ConstraintFamily>) {
        let s = self.nonneg_var();
        self.equal(expr - s, tag);
    }

    /// `‖tail‖ ≤ head`
    pub fn soc(&mut self, head: LinExpr, tail: Vec<LinExpr>, tag: Option<ConstraintFamily>) {
        let vars = self.soc_vars(tail.len() + 1);
        for (v, e) in vars.into_iter().zip(std::iter::once(head).chain(tail)) {
            self.equal(e - v, tag);
        }
    }

    /// `a·b ≥ ‖z‖²` with `a, b ≥ 0`, as `‖(a − b, 2z)‖ ≤ a + b`.
    pub fn product_geq(&mut self, a: LinExpr, b: LinExpr, z: Vec<LinExpr>, tag: Option<ConstraintFamily>) {
        let head = a.clone() + b.clone();
        let mut tail = vec![a - b];
        tail.extend(z.into_iter().map(|e| e * 2.0));
        self.soc(head, tail, tag);
    }

    /// [`product_geq`](Self::product_geq) for factors of very different size:
    /// `ratio` estimates `a/b` near the solution and both factors are rescaled
    /// to about `‖z‖` so that absolute cone residuals stay meaningful.
    pub fn balanced_product_geq(
        &mut self,
        a: LinExpr,
        b: LinExpr,
        z: Vec<LinExpr>,
        ratio: f64,
        tag: Option<ConstraintFamily>,
    ) {
        let r = if ratio.is_finite() && ratio > 0.0 { ratio.sqrt() } else { 1.0 };
        self.product_geq(a * r.recip(), b * r, z, tag);
    }

    pub fn minimize(&mut self, expr: LinExpr) {
        self.objective = expr;
    }

    pub fn build(self) -> Model {
        let mut starts = Vec::with_capacity(self.blocks.len());
        let mut next = self.n_free;
        let mut cone_blocks = Vec::with_capacity(self.blocks.len());
        for &(kind, dim) in &self.blocks {
            let len = if kind == ConeKind::PsdReal { svec_len(dim) } else { dim };
            starts.push(next);
            cone_blocks.push(ConeBlock { kind, dim, start: next, len });
            next += len;
        }
        let layout = Layout { starts };
        let n_vars = next;

        let mut objective = vec![0.0; n_vars];
        for &(v, c) in &self.objective.terms {
            objective[layout.index(v)] += c;
        }
        let mut eq_rows = Vec::with_capacity(self.rows.len());
        let mut eq_rhs = Vec::with_capacity(self.rows.len());
        let mut eq_tags = Vec::with_capacity(self.rows.len());
        for (expr, tag) in self.rows {
            let mut row: Vec<(usize, f64)> = expr.terms.iter().map(|&(v, c)| (layout.index(v), c)).collect();
            row.sort_by_key(|t| t.0);
            row.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            row.retain(|t| t.1 != 0.0);
            eq_rows.push(row);
            eq_rhs.push(-expr.constant);
            eq_tags.push(tag);
        }
        let program = ConicProgram {
            n_vars,
            objective,
            objective_offset: self.objective.constant,
            eq_rows,
            eq_rhs,
            eq_tags,
            cone_blocks,
        };
        Model { program, layout }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    starts: Vec<usize>,
}

impl Layout {
    fn index(&self, v: VarId) -> usize {
        match v.0 {
            Slot::Free(i) => i,
            Slot::Cone { block, offset } => self.starts[block] + offset,
        }
    }
}

/// A built program together with the variable layout needed to decode its
/// solutions.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub program: ConicProgram,
    layout: Layout,
}

impl Model {
    pub fn solve(&self, settings: &SolverSettings) -> ConicSolution {
        solve(&self.program, settings)
    }

    /// Solve and map any non-optimal status to an error.
    pub fn solve_optimal(&self, settings: &SolverSettings) -> Result<ConicSolution> {
        self.solve(settings).require_optimal(&self.program)
    }

    pub fn value(&self, sol: &ConicSolution, v: VarId) -> f64 {
        sol.primal[self.layout.index(v)]
    }

    pub fn eval(&self, sol: &ConicSolution, e: &LinExpr) -> f64 {
        e.terms.iter().map(|&(v, c)| c * self.value(sol, v)).sum::<f64>() + e.constant
    }

    pub fn psd_value(&self, sol: &ConicSolution, p: &PsdVar) -> RMat {
        let start = self.layout.starts[p.block];
        smat(&sol.primal[start..start + svec_len(p.dim)], p.dim)
    }

    pub fn hermitian_value(&self, sol: &ConicSolution, h: &HermVar) -> CMat {
        extract_hermitian(&self.psd_value(sol, &h.psd))
    }

    /// Evaluate an expression at an arbitrary flat point.
    pub fn eval_with(&self, e: &LinExpr, x: &[f64]) -> f64 {
        e.terms.iter().map(|&(v, c)| c * x[self.layout.index(v)]).sum::<f64>() + e.constant
    }

    /// Position of a variable in the flat vector.
    pub fn index(&self, v: VarId) -> usize {
        self.layout.index(v)
    }
}
