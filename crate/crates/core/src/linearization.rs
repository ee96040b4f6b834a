//! Linearization at a noncritical solution `w0`:
//! `-div(A[w0] grad wdot) + m V w0^(m-1) wdot = 0`, `wdot = f` on the boundary.

use nalgebra::{Matrix2, Vector2};

use crate::asymptotics::{anisotropy_at, anisotropy_matrix, noncritical_gradients};
use crate::dtn::{dtn_pair, Extension};
use crate::elliptic::{solve, EllipticProblem, EllipticSolution, SolverSettings};
use crate::error::{Error, Result};
use crate::fem::{vertex_average, StiffnessOperator};
use crate::field::{BoundaryTrace, NodalField};
use crate::mesh::TriangleMesh;

#[derive(Debug, Clone)]
pub struct LinearizedProblem {
    pub base: EllipticProblem,
    pub w0: NodalField,
    pub a0: Vec<Matrix2<f64>>,
    /// `m V w0^(m-1)` at the nodes.
    pub zeroth: NodalField,
}

pub fn linearize_at(problem: &EllipticProblem, solution: &EllipticSolution) -> Result<LinearizedProblem> {
    if !solution.belongs_to(problem) {
        return Err(Error::StaleSolution);
    }
    let mesh = problem.mesh();
    let w0 = &solution.w;
    let m = problem.m();
    let mut zeroth = NodalField::zeros(mesh);
    for (i, (&v, &w)) in problem.potential().iter().zip(w0.iter()).enumerate() {
        if v == 0.0 {
            continue;
        }
        zeroth[i] = if m == 1.0 {
            v
        } else if m < 1.0 {
            if !(w > 0.0) {
                return Err(Error::Domain(format!(
                    "w0 = {w} at node {i}: w0^(m-1) is singular for m = {m} < 1"
                )));
            }
            m * v * w.powf(m - 1.0)
        } else {
            m * v * w.max(0.0).powf(m - 1.0)
        };
    }
    let a0 = anisotropy_matrix(mesh, problem.gamma(), w0, problem.p())?;
    Ok(LinearizedProblem { base: problem.clone(), w0: w0.clone(), a0, zeroth })
}

impl LinearizedProblem {
    fn operator(&self) -> StiffnessOperator<'_> {
        StiffnessOperator::new(self.base.mesh(), self.a0.clone(), Some(self.zeroth.0.clone()))
    }

    pub fn mesh(&self) -> &TriangleMesh {
        self.base.mesh()
    }
}

pub fn solve_linearized(lin: &LinearizedProblem, f: &BoundaryTrace) -> Result<NodalField> {
    f.check_len(lin.mesh(), "boundary data")?;
    let load = vec![0.0; lin.mesh().node_count()];
    lin.operator().solve_dirichlet(&load, f)
}

/// `int grad omega~ . A[w0] grad wdot + m V w0^(m-1) omega~ wdot`, `omega~` the
/// zero-interior extension.
pub fn linearized_dtn(lin: &LinearizedProblem, f: &BoundaryTrace, omega: &BoundaryTrace) -> Result<f64> {
    omega.check_len(lin.mesh(), "test trace")?;
    let wdot = solve_linearized(lin, f)?;
    Ok(lin.operator().form(&omega.zero_extension(lin.mesh()), &wdot))
}

/// Pairing matrix `M[i][j] = linearized_dtn(basis[j], basis[i])`.
pub fn linearized_dtn_matrix(lin: &LinearizedProblem, basis: &[BoundaryTrace]) -> Result<Vec<Vec<f64>>> {
    let op = lin.operator();
    let responses = basis.iter().map(|f| solve_linearized(lin, f)).collect::<Result<Vec<_>>>()?;
    basis
        .iter()
        .map(|omega| {
            omega.check_len(lin.mesh(), "test trace")?;
            let ext = omega.zero_extension(lin.mesh());
            Ok(responses.iter().map(|w| op.form(&ext, w)).collect())
        })
        .collect()
}

/// Directional derivative of `A[v]` at `v0` along `vdot`, per triangle.
pub fn anisotropy_derivative(
    mesh: &TriangleMesh,
    gamma: &NodalField,
    v0: &NodalField,
    vdot: &NodalField,
    p: f64,
) -> Result<Vec<Matrix2<f64>>> {
    vdot.check_len(mesh, "direction")?;
    let g0 = noncritical_gradients(mesh, gamma, v0)?;
    let gd = crate::fem::gradients_unchecked(mesh, vdot);
    let gamma_bar = vertex_average(mesh, gamma);
    Ok(g0
        .iter()
        .zip(&gd)
        .zip(&gamma_bar)
        .map(|((g, d), &gb)| derivative_at(gb, g, d, p))
        .collect())
}

fn derivative_at(gamma: f64, g: &Vector2<f64>, d: &Vector2<f64>, p: f64) -> Matrix2<f64> {
    let s = g.norm_squared();
    let gd = g.dot(d);
    let outer = g * g.transpose();
    (p - 2.0)
        * gamma
        * s.powf(0.5 * (p - 4.0))
        * (Matrix2::identity() * gd + outer * ((p - 4.0) * gd / s) + g * d.transpose() + d * g.transpose())
}

/// Two-dimensional conformal data on one triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric2 {
    /// `sqrt(p-1) (I + (2-p)/(p-1) n n^T)`, `n` the unit gradient.
    pub g: Matrix2<f64>,
    /// Determinant of the assembled `A[w0]`.
    pub det_a: f64,
    pub a: Matrix2<f64>,
}

pub fn metric_2d(mesh: &TriangleMesh, gamma: &NodalField, w0: &NodalField, p: f64) -> Result<Vec<Metric2>> {
    let grads = noncritical_gradients(mesh, gamma, w0)?;
    let gamma_bar = vertex_average(mesh, gamma);
    Ok(grads
        .iter()
        .zip(&gamma_bar)
        .map(|(grad, &gb)| {
            let n = grad / grad.norm();
            let g = (p - 1.0).sqrt() * (Matrix2::identity() + n * n.transpose() * ((2.0 - p) / (p - 1.0)));
            let a = anisotropy_at(gb, grad, p);
            Metric2 { g, det_a: a.determinant(), a }
        })
        .collect())
}

/// One finite-difference probe of the nonlinear DtN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdProbe {
    pub tau: f64,
    pub quotient: f64,
    pub error: f64,
}

/// `(<omega, Lambda(g0 + tau f)> - <omega, Lambda(g0)>) / tau` against the
/// linearized pairing, for each `tau`.
pub fn fd_consistency(
    problem: &EllipticProblem,
    solution: &EllipticSolution,
    f: &BoundaryTrace,
    omega: &BoundaryTrace,
    taus: &[f64],
    settings: &SolverSettings,
) -> Result<(f64, Vec<FdProbe>)> {
    let lin = linearize_at(problem, solution)?;
    let exact = linearized_dtn(&lin, f, omega)?;
    let base = dtn_pair(problem, solution, omega, Extension::ZeroInterior)?;
    let probes = taus
        .iter()
        .map(|&tau| {
            let perturbed = problem.with_dirichlet(problem.dirichlet().axpy(tau, f))?;
            let sol = solve(&perturbed, settings)?;
            let quotient = (dtn_pair(&perturbed, &sol, omega, Extension::ZeroInterior)? - base) / tau;
            Ok(FdProbe { tau, quotient, error: (quotient - exact).abs() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((exact, probes))
}

/// `e(tau_k) / e(tau_{k+1})` for consecutive probes.
pub fn halving_ratios(probes: &[FdProbe]) -> Vec<f64> {
    probes.windows(2).map(|w| w[0].error / w[1].error).collect()
}

/// Default step fractions; multiply by `max |g0|`.
pub const DEFAULT_TAUS: [f64; 4] = [1e-2, 5e-3, 2.5e-3, 1.25e-3];

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::mesh::make_unit_square_mesh;

    fn base(p: f64, m: f64, v: f64) -> (Arc<TriangleMesh>, EllipticProblem) {
        let mesh = Arc::new(make_unit_square_mesh(8).unwrap());
        let pb = EllipticProblem::new(
            mesh.clone(),
            NodalField::from_fn(&mesh, |x, y| 1.0 + 0.2 * x * y),
            NodalField::constant(&mesh, v),
            p,
            m,
            BoundaryTrace::from_fn(&mesh, |x, y| 1.0 + x + 0.3 * y),
        )
        .unwrap();
        (mesh, pb)
    }

    #[test]
    fn zeroth_order_coefficient() {
        let (mesh, pb) = base(3.0, 1.0, 2.5);
        let sol = solve(&pb, &SolverSettings::default()).unwrap();
        let lin = linearize_at(&pb, &sol).unwrap();
        assert!(lin.zeroth.iter().all(|&z| z == 2.5));
        let pb0 = pb.with_potential(NodalField::zeros(&mesh)).unwrap();
        let sol0 = solve(&pb0, &SolverSettings::default()).unwrap();
        assert!(linearize_at(&pb0, &sol0).unwrap().zeroth.is_identically_zero());
    }

    #[test]
    fn linear_solve_properties() {
        let (mesh, pb) = base(1.5, 2.0, 1.0);
        let sol = solve(&pb, &SolverSettings::default()).unwrap();
        let lin = linearize_at(&pb, &sol).unwrap();
        let zero = solve_linearized(&lin, &BoundaryTrace::constant(&mesh, 0.0)).unwrap();
        assert!(zero.is_identically_zero());
        let f1 = BoundaryTrace::from_fn(&mesh, |x, _| x * x);
        let f2 = BoundaryTrace::from_fn(&mesh, |_, y| (3.0 * y).sin());
        let sum = solve_linearized(&lin, &f1.axpy(1.0, &f2)).unwrap();
        let parts = solve_linearized(&lin, &f1).unwrap().axpy(1.0, &solve_linearized(&lin, &f2).unwrap());
        assert!(sum.axpy(-1.0, &parts).max_abs() < 1e-12);
        assert_eq!(linearized_dtn(&lin, &BoundaryTrace::constant(&mesh, 0.0), &f1).unwrap(), 0.0);
    }

    #[test]
    fn constants_are_a_harmonic() {
        let (mesh, pb) = base(3.0, 2.0, 0.0);
        let sol = solve(&pb, &SolverSettings::default()).unwrap();
        let lin = linearize_at(&pb, &sol).unwrap();
        let w = solve_linearized(&lin, &BoundaryTrace::constant(&mesh, 0.7)).unwrap();
        for v in w.iter() {
            assert!((v - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn p2_is_isotropic() {
        let (_, pb) = base(2.0, 2.0, 1.0);
        let sol = solve(&pb, &SolverSettings::default()).unwrap();
        let lin = linearize_at(&pb, &sol).unwrap();
        let gb = vertex_average(pb.mesh(), pb.gamma());
        for (a, g) in lin.a0.iter().zip(gb) {
            assert!((a - Matrix2::identity() * g).norm() < 1e-12);
        }
        let d = anisotropy_derivative(pb.mesh(), pb.gamma(), &sol.w, &sol.w, 2.0).unwrap();
        assert!(d.iter().all(|m| *m == Matrix2::zeros()));
    }

    #[test]
    fn singular_zeroth_order_is_rejected() {
        let mesh = Arc::new(make_unit_square_mesh(4).unwrap());
        let pb = EllipticProblem::new(
            mesh.clone(),
            NodalField::constant(&mesh, 1.0),
            NodalField::constant(&mesh, 1.0),
            3.0,
            0.5,
            BoundaryTrace::from_fn(&mesh, |x, _| x),
        )
        .unwrap();
        let sol = solve(&pb, &SolverSettings::default()).unwrap();
        assert!(matches!(linearize_at(&pb, &sol), Err(Error::Domain(_))));
    }

    #[test]
    fn metric_at_p2_is_identity() {
        let mesh = make_unit_square_mesh(4).unwrap();
        let w = NodalField::from_fn(&mesh, |x, y| x + 2.0 * y);
        for mt in metric_2d(&mesh, &NodalField::constant(&mesh, 1.0), &w, 2.0).unwrap() {
            assert!((mt.g - Matrix2::identity()).norm() < 1e-15);
        }
    }
}
