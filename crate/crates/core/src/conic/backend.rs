//! Clarabel adapter.

use std::sync::Once;
use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, PSDTriangleConeT, SecondOrderConeT,
    SolverStatus, SupportedConeT, ZeroConeT,
};

use super::{ConeKind, ConicProgram, ConicSolution, SolveStats, SolveStatus, SolverSettings, ACCEPT_TOL};

extern "C" {
    fn openblas_set_num_threads(n: std::os::raw::c_int);
}

static BLAS_THREADS: Once = Once::new();

/// Column-compressed `A` from row lists plus `-I` rows for every cone slot.
fn assemble(p: &ConicProgram) -> (CscMatrix<f64>, Vec<f64>, Vec<SupportedConeT<f64>>) {
    let n = p.n_vars;
    let m_eq = p.eq_rows.len();
    let n_free = p.n_free();
    let m = m_eq + (n - n_free);

    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in p.eq_rows.iter().enumerate() {
        for &(j, v) in row {
            cols[j].push((i, v));
        }
    }
    for j in n_free..n {
        cols[j].push((m_eq + j - n_free, -1.0));
    }
    let mut colptr = Vec::with_capacity(n + 1);
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    colptr.push(0);
    for col in &mut cols {
        col.sort_by_key(|t| t.0);
        for &(i, v) in col.iter() {
            rowval.push(i);
            nzval.push(v);
        }
        colptr.push(rowval.len());
    }
    let a = CscMatrix::new(m, n, colptr, rowval, nzval);

    let mut b = p.eq_rhs.clone();
    b.resize(m, 0.0);

    let mut cones = Vec::new();
    if m_eq > 0 {
        cones.push(ZeroConeT(m_eq));
    }
    for blk in &p.cone_blocks {
        match blk.kind {
            ConeKind::Nonnegative => match cones.last_mut() {
                Some(NonnegativeConeT(d)) => *d += blk.dim,
                _ => cones.push(NonnegativeConeT(blk.dim)),
            },
            ConeKind::SecondOrder => cones.push(SecondOrderConeT(blk.dim)),
            ConeKind::PsdReal => cones.push(PSDTriangleConeT(blk.dim)),
        }
    }
    (a, b, cones)
}

/// Solve `program` with Clarabel. Never panics on infeasible input.
pub fn solve(program: &ConicProgram, settings: &SolverSettings) -> ConicSolution {
    BLAS_THREADS.call_once(|| unsafe { openblas_set_num_threads(1) });
    let started = Instant::now();
    let n = program.n_vars;
    let failed = |msg: &str| {
        log::warn!("conic solve failed: {msg}");
        ConicSolution {
            status: SolveStatus::NumericalLimit,
            primal: vec![0.0; n],
            objective_value: f64::NAN,
            eq_dual: vec![0.0; program.eq_rows.len()],
            stats: SolveStats::default(),
        }
    };
    if let Err(e) = program.validate() {
        return failed(&e.to_string());
    }

    let (a, b, cones) = assemble(program);
    let pmat = CscMatrix::<f64>::zeros((n, n));
    let cfg = match DefaultSettingsBuilder::default()
        .verbose(settings.verbose)
        .max_iter(settings.max_iter)
        .tol_feas(settings.tol_feas)
        .tol_gap_abs(settings.tol_gap)
        .tol_gap_rel(settings.tol_gap)
        .max_threads(1)
        .chordal_decomposition_enable(false)
        .build()
    {
        Ok(c) => c,
        Err(e) => return failed(&format!("{e:?}")),
    };
    let mut solver = match DefaultSolver::new(&pmat, &program.objective, &a, &b, &cones, cfg) {
        Ok(s) => s,
        Err(e) => return failed(&format!("{e:?}")),
    };
    solver.solve();
    let sol = &solver.solution;
    let stats = SolveStats {
        iterations: sol.iterations,
        solve_ms: started.elapsed().as_secs_f64() * 1e3,
        primal_residual: sol.r_prim,
        dual_residual: sol.r_dual,
        gap: solver.info.gap_rel,
    };
    let x = sol.x.clone();
    let m_eq = program.eq_rows.len();
    let eq_dual = sol.z[..m_eq].to_vec();

    let accept = |x: &[f64]| {
        let (eq, cone) = program.violation(x);
        eq <= ACCEPT_TOL && cone <= ACCEPT_TOL
    };
    let status = match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved if accept(&x) => SolveStatus::Optimal,
        SolverStatus::Solved | SolverStatus::AlmostSolved => {
            let (eq, cone) = program.violation(&x);
            log::debug!("solution rejected: eq residual {eq:.2e}, cone violation {cone:.2e}");
            SolveStatus::NumericalLimit
        }
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        other => {
            log::debug!("clarabel status {other:?}");
            SolveStatus::NumericalLimit
        }
    };
    ConicSolution {
        status,
        objective_value: sol.obj_val + program.objective_offset,
        primal: x,
        eq_dual,
        stats,
    }
}
