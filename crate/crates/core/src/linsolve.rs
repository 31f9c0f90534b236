//! Sparse direct solves and a damped Newton driver.

use std::cell::RefCell;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::Mat;

use crate::error::{Error, Result};
use crate::fem::SparseOperator;

/// Sparse LU solver that caches the symbolic factorization of the last
/// sparsity pattern it saw.
#[derive(Default)]
pub struct SparseSolver {
    cache: RefCell<Option<CachedSymbolic>>,
}

struct CachedSymbolic {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    symbolic: SymbolicLu<usize>,
}

impl std::fmt::Debug for SparseSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseSolver").field("cached", &self.cache.borrow().is_some()).finish()
    }
}

impl SparseSolver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Solves `op x = rhs`.
    pub fn solve(&self, op: &SparseOperator, rhs: &[f64]) -> Result<Vec<f64>> {
        if op.nrows != op.ncols {
            return Err(Error::Solver(format!("operator is {}x{}, not square", op.nrows, op.ncols)));
        }
        if rhs.len() != op.nrows {
            return Err(Error::Solver(format!("rhs length {} does not match {}", rhs.len(), op.nrows)));
        }
        let n = op.nrows;
        if n == 0 {
            return Ok(Vec::new());
        }
        if let Some(i) = rhs.iter().position(|v| !v.is_finite()) {
            return Err(Error::Solver(format!("non-finite right-hand side at row {i}")));
        }
        // CSR arrays of A are the CSC arrays of A^T; factor A^T and solve
        // with its transpose.
        let sym = SymbolicSparseColMatRef::new_checked(n, n, &op.row_ptr, None, &op.col_idx);
        let mat = SparseColMatRef::new(sym, &op.values);
        let mut cache = self.cache.borrow_mut();
        let reuse = matches!(&*cache, Some(c) if c.row_ptr == op.row_ptr && c.col_idx == op.col_idx);
        if !reuse {
            let symbolic = SymbolicLu::try_new(sym).map_err(|e| Error::Solver(format!("symbolic LU failed: {e:?}")))?;
            *cache = Some(CachedSymbolic { row_ptr: op.row_ptr.clone(), col_idx: op.col_idx.clone(), symbolic });
        }
        let symbolic = cache.as_ref().map(|c| c.symbolic.clone()).expect("cached symbolic factorization");
        let lu = Lu::try_new_with_symbolic(symbolic, mat).map_err(|_| Error::Singular { row: 0 })?;

        let b = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
        let sol = lu.solve_transpose(&b);
        let mut x: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();
        if let Some(row) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Singular { row });
        }
        let bound = 1e-10 * (1.0 + inf_norm(rhs));
        let mut res = residual(op, &x, rhs);
        for _ in 0..2 {
            if inf_norm(&res) <= bound {
                break;
            }
            let r = Mat::<f64>::from_fn(n, 1, |i, _| res[i]);
            let d = lu.solve_transpose(&r);
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += d[(i, 0)];
            }
            res = residual(op, &x, rhs);
        }
        let rn = inf_norm(&res);
        if !(rn <= bound) {
            let scale = op.values.iter().fold(0.0f64, |m, v| m.max(v.abs())) * inf_norm(&x);
            if !(rn <= 1e-12 * scale) {
                let row = res
                    .iter()
                    .enumerate()
                    .fold((0, 0.0), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc })
                    .0;
                return Err(Error::Singular { row });
            }
            log::warn!("linear solve residual {rn:.3e} above target {bound:.3e} (ill-conditioned system)");
        }
        Ok(x)
    }
}

/// One-shot sparse solve.
pub fn sparse_solve(op: &SparseOperator, rhs: &[f64]) -> Result<Vec<f64>> {
    SparseSolver::new().solve(op, rhs)
}

fn residual(op: &SparseOperator, x: &[f64], rhs: &[f64]) -> Vec<f64> {
    op.matvec(x).iter().zip(rhs).map(|(a, b)| b - a).collect()
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iters: usize,
    pub damping: f64,
    pub min_step: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings { rel_tol: 1e-8, abs_tol: 1e-11, max_iters: 25, damping: 1.0, min_step: 1.0 / 64.0 }
    }
}

impl NewtonSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rel_tol > 0.0
            && self.rel_tol < 1.0
            && self.abs_tol >= 0.0
            && self.max_iters >= 1
            && self.min_step > 0.0
            && self.min_step <= self.damping
            && self.damping <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Newton settings {self:?}")))
        }
    }

    pub fn tolerance(&self, initial: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * initial)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub initial_residual: f64,
    pub final_residual: f64,
    pub converged: bool,
    pub damping_history: Vec<f64>,
    /// Residual norm after each accepted step, starting with the initial one.
    pub residual_history: Vec<f64>,
}

/// A nonlinear system `F(x) = 0` solved by Newton's method.
pub trait NonlinearProblem {
    fn residual(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// Solves `J(x) d = -r` where `r = F(x)`.
    fn newton_direction(&self, x: &[f64], r: &[f64]) -> Result<Vec<f64>>;
}

/// Damped Newton iteration with backtracking on the Euclidean residual norm.
pub fn newton_solve(
    problem: &dyn NonlinearProblem,
    x0: Vec<f64>,
    settings: &NewtonSettings,
) -> Result<(Vec<f64>, SolveReport)> {
    settings.validate()?;
    let mut x = x0;
    let mut r = problem.residual(&x)?;
    check_finite(&r)?;
    let mut norm = l2_norm(&r);
    let mut report = SolveReport {
        initial_residual: norm,
        final_residual: norm,
        residual_history: vec![norm],
        ..Default::default()
    };
    let tol = settings.tolerance(norm);
    while norm > tol {
        if report.iterations == settings.max_iters {
            report.final_residual = norm;
            return Ok((x, report));
        }
        let delta = problem.newton_direction(&x, &r)?;
        let mut step = settings.damping;
        loop {
            let trial: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + step * d).collect();
            let rt = problem.residual(&trial)?;
            check_finite(&rt)?;
            let nt = l2_norm(&rt);
            if nt <= (1.0 - 1e-4 * step) * norm || nt <= tol {
                x = trial;
                r = rt;
                norm = nt;
                break;
            }
            step *= 0.5;
            if step < settings.min_step {
                report.final_residual = norm;
                return Err(Error::NonConvergence { reason: "line search step below minimum".into(), report });
            }
        }
        report.iterations += 1;
        report.damping_history.push(step);
        report.residual_history.push(norm);
        log::trace!("newton iteration {}: residual {norm:.3e} step {step}", report.iterations);
    }
    report.final_residual = norm;
    report.converged = true;
    Ok((x, report))
}

fn check_finite(r: &[f64]) -> Result<()> {
    match r.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Solver(format!("non-finite residual at row {i}"))),
        None => Ok(()),
    }
}

/// Adapter turning a residual closure and a sparse Jacobian closure into a
/// [`NonlinearProblem`].
pub struct FnProblem<R, J> {
    pub residual_fn: R,
    pub jacobian_fn: J,
    solver: SparseSolver,
}

impl<R, J> FnProblem<R, J>
where
    R: Fn(&[f64]) -> Result<Vec<f64>>,
    J: Fn(&[f64]) -> Result<SparseOperator>,
{
    pub fn new(residual_fn: R, jacobian_fn: J) -> Self {
        FnProblem { residual_fn, jacobian_fn, solver: SparseSolver::new() }
    }
}

impl<R, J> NonlinearProblem for FnProblem<R, J>
where
    R: Fn(&[f64]) -> Result<Vec<f64>>,
    J: Fn(&[f64]) -> Result<SparseOperator>,
{
    fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        (self.residual_fn)(x)
    }

    fn newton_direction(&self, x: &[f64], r: &[f64]) -> Result<Vec<f64>> {
        let jac = (self.jacobian_fn)(x)?;
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        self.solver.solve(&jac, &neg)
    }
}

/// Newton's method from a residual closure and a Jacobian closure.
pub fn newton_solve_fn(
    residual_fn: impl Fn(&[f64]) -> Result<Vec<f64>>,
    jacobian_fn: impl Fn(&[f64]) -> Result<SparseOperator>,
    x0: Vec<f64>,
    settings: &NewtonSettings,
) -> Result<(Vec<f64>, SolveReport)> {
    newton_solve(&FnProblem::new(residual_fn, jacobian_fn), x0, settings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_solve() {
        let b = vec![1.0, -2.0, 3.5];
        assert_eq!(sparse_solve(&SparseOperator::identity(3), &b).unwrap(), b);
    }

    #[test]
    fn nonsymmetric_solve_orientation() {
        let a = SparseOperator::from_dense(&[vec![2.0, 1.0, 0.0], vec![0.0, 3.0, 0.0], vec![4.0, 0.0, 1.0]]);
        let x = [1.0, 2.0, 3.0];
        let b = a.matvec(&x);
        let y = sparse_solve(&a, &b).unwrap();
        for i in 0..3 {
            assert!((y[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_is_error() {
        let a = SparseOperator::from_dense(&[vec![1.0, -1.0], vec![-1.0, 1.0]]);
        assert!(matches!(sparse_solve(&a, &[0.0, 1.0]), Err(Error::Singular { .. })));
    }

    #[test]
    fn symbolic_reuse_across_values() {
        let solver = SparseSolver::new();
        for s in [1.0, 2.0, 5.0] {
            let a = SparseOperator::from_dense(&[vec![s, 1.0], vec![1.0, 3.0]]);
            let x = solver.solve(&a, &[1.0, 1.0]).unwrap();
            let r = a.matvec(&x);
            assert!((r[0] - 1.0).abs() < 1e-14 && (r[1] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn scalar_root() {
        let (x, rep) = newton_solve_fn(
            |x| Ok(vec![x[0] * x[0] - 4.0]),
            |x| Ok(SparseOperator::from_dense(&[vec![2.0 * x[0]]])),
            vec![3.0],
            &NewtonSettings { rel_tol: 1e-14, ..Default::default() },
        )
        .unwrap();
        assert!(rep.converged && rep.iterations <= 8);
        assert!((x[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn damping_underflow_reports() {
        // residual with a root-free valley; Newton cannot decrease |x^2 + 1|
        let err = newton_solve_fn(
            |x| Ok(vec![x[0] * x[0] + 1.0]),
            |x| Ok(SparseOperator::from_dense(&[vec![2.0 * x[0]]])),
            vec![1e-3],
            &NewtonSettings::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
    }

    #[test]
    fn invalid_settings() {
        let s = NewtonSettings { min_step: 2.0, ..Default::default() };
        assert!(s.validate().is_err());
    }
}
