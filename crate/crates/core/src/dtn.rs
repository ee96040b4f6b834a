//! Weak-form Dirichlet-to-Neumann pairing
//! `<Lambda(g), h> = int gamma |grad w|^(p-2) grad w . grad h~ + int V w^m h~`.

use crate::elliptic::{EllipticProblem, EllipticSolution};
use crate::error::{Error, Result};
use crate::fem::harmonic_extension;
use crate::field::{BoundaryTrace, NodalField};

/// Interior extension of a test trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Extension {
    #[default]
    ZeroInterior,
    Harmonic,
}

impl Extension {
    pub fn extend(self, problem: &EllipticProblem, h: &BoundaryTrace) -> Result<NodalField> {
        h.check_len(problem.mesh(), "test trace")?;
        match self {
            Extension::ZeroInterior => Ok(h.zero_extension(problem.mesh())),
            Extension::Harmonic => harmonic_extension(problem.mesh(), h),
        }
    }
}

/// Nodal residual of the weak form at the solution, boundary rows included.
/// Pairing with any extension of `h` is its dot product with that extension.
fn weak_residual(problem: &EllipticProblem, solution: &EllipticSolution) -> Result<Vec<f64>> {
    if !solution.belongs_to(problem) {
        return Err(Error::StaleSolution);
    }
    Ok(problem.functional().full_residual(&solution.w, solution.delta))
}

pub fn dtn_pair(
    problem: &EllipticProblem,
    solution: &EllipticSolution,
    h: &BoundaryTrace,
    extension: Extension,
) -> Result<f64> {
    let residual = weak_residual(problem, solution)?;
    let ext = extension.extend(problem, h)?;
    Ok(residual.iter().zip(ext.iter()).map(|(r, e)| r * e).sum())
}

/// [`dtn_pair`] against each test trace, with zero-interior extensions.
pub fn dtn_matrix(
    problem: &EllipticProblem,
    solution: &EllipticSolution,
    tests: &[BoundaryTrace],
) -> Result<Vec<f64>> {
    let residual = weak_residual(problem, solution)?;
    let mesh = problem.mesh();
    tests
        .iter()
        .map(|h| {
            h.check_len(mesh, "test trace")?;
            Ok(mesh.boundary_nodes().iter().zip(h.iter()).map(|(&b, v)| residual[b] * v).sum())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::elliptic::{solve, SolverSettings};
    use crate::mesh::make_unit_square_mesh;

    #[test]
    fn constant_data_pairs_to_zero() {
        let mesh = Arc::new(make_unit_square_mesh(6).unwrap());
        let pb = EllipticProblem::p_laplace(
            mesh.clone(),
            NodalField::constant(&mesh, 1.0),
            3.0,
            BoundaryTrace::constant(&mesh, 2.0),
        )
        .unwrap();
        let sol = solve(&pb, &SolverSettings::default()).unwrap();
        let tests: Vec<_> = (0..mesh.boundary_nodes().len()).map(|k| BoundaryTrace::unit(&mesh, k)).collect();
        for v in dtn_matrix(&pb, &sol, &tests).unwrap() {
            assert!(v.abs() < 1e-10);
        }
        assert!(dtn_matrix(&pb, &sol, &[]).unwrap().is_empty());
        let h = BoundaryTrace::from_fn(&mesh, |x, y| x * y);
        assert_eq!(
            dtn_matrix(&pb, &sol, std::slice::from_ref(&h)).unwrap(),
            vec![dtn_pair(&pb, &sol, &h, Extension::ZeroInterior).unwrap()]
        );
    }

    #[test]
    fn affine_pairing_is_the_area_integral() {
        let mesh = Arc::new(make_unit_square_mesh(8).unwrap());
        let g = BoundaryTrace::from_fn(&mesh, |x, _| x);
        let pb = EllipticProblem::p_laplace(mesh.clone(), NodalField::constant(&mesh, 1.0), 3.0, g.clone())
            .unwrap();
        let sol = solve(&pb, &SolverSettings::default()).unwrap();
        for ext in [Extension::ZeroInterior, Extension::Harmonic] {
            assert!((dtn_pair(&pb, &sol, &g, ext).unwrap() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn stale_solution_is_rejected() {
        let mesh = Arc::new(make_unit_square_mesh(4).unwrap());
        let g = BoundaryTrace::from_fn(&mesh, |x, _| 1.0 + x);
        let pb = EllipticProblem::p_laplace(mesh.clone(), NodalField::constant(&mesh, 1.0), 3.0, g.clone())
            .unwrap();
        let sol = solve(&pb, &SolverSettings::default()).unwrap();
        let other = pb.with_dirichlet(g.scaled(2.0)).unwrap();
        assert_eq!(dtn_pair(&other, &sol, &g, Extension::ZeroInterior), Err(Error::StaleSolution));
        assert_eq!(dtn_matrix(&other, &sol, &[]), Err(Error::StaleSolution));
    }
}
