//! P1 machinery: element gradients, vertex quadrature, and assembly/solution
//! of symmetric Dirichlet problems of the form
//! `sum_T |T| grad(phi_i) . C_T grad(phi_j) + diag(mass_i * c_i)`.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Col, Side};
use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::field::{BoundaryTrace, NodalField};
use crate::mesh::TriangleMesh;

/// Piecewise-constant gradient of a P1 field, with the triangle areas.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementGradient {
    pub gradients: Vec<Vector2<f64>>,
    pub areas: Vec<f64>,
}

impl ElementGradient {
    pub fn max_norm(&self) -> f64 {
        self.gradients.iter().fold(0.0, |m, g| m.max(g.norm()))
    }
}

pub fn element_gradients(mesh: &TriangleMesh, u: &NodalField) -> Result<ElementGradient> {
    u.check_len(mesh, "field")?;
    Ok(ElementGradient {
        gradients: gradients_unchecked(mesh, u),
        areas: mesh.geometry().iter().map(|g| g.area).collect(),
    })
}

pub(crate) fn gradients_unchecked(mesh: &TriangleMesh, u: &[f64]) -> Vec<Vector2<f64>> {
    mesh.triangles()
        .iter()
        .zip(mesh.geometry())
        .map(|(tri, g)| {
            g.basis_gradients[0] * u[tri[0]]
                + g.basis_gradients[1] * u[tri[1]]
                + g.basis_gradients[2] * u[tri[2]]
        })
        .collect()
}

/// Vertex-rule approximation of `integral f(u) dx`.
pub fn lumped_mass_integrate(
    mesh: &TriangleMesh,
    f: impl Fn(f64) -> f64,
    u: &NodalField,
) -> Result<f64> {
    u.check_len(mesh, "field")?;
    let mut values = Vec::with_capacity(u.len());
    for (node, &x) in u.iter().enumerate() {
        let value = f(x);
        if !value.is_finite() {
            return Err(Error::NonFinite { node, value });
        }
        values.push(value);
    }
    let mut total = 0.0;
    for (tri, g) in mesh.triangles().iter().zip(mesh.geometry()) {
        total += g.area / 3.0 * (values[tri[0]] + values[tri[1]] + values[tri[2]]);
    }
    Ok(total)
}

/// Per-triangle average of the three vertex values.
pub fn vertex_average(mesh: &TriangleMesh, coefficient: &[f64]) -> Vec<f64> {
    mesh.triangles()
        .iter()
        .map(|t| (coefficient[t[0]] + coefficient[t[1]] + coefficient[t[2]]) / 3.0)
        .collect()
}

/// Symmetric operator `u -> sum_T |T| C_T grad u . grad phi_i + mass_i c_i u_i`.
#[derive(Debug, Clone)]
pub struct StiffnessOperator<'a> {
    mesh: &'a TriangleMesh,
    conductivity: Vec<Matrix2<f64>>,
    reaction: Option<Vec<f64>>,
}

impl<'a> StiffnessOperator<'a> {
    pub fn new(
        mesh: &'a TriangleMesh,
        conductivity: Vec<Matrix2<f64>>,
        reaction: Option<Vec<f64>>,
    ) -> Self {
        debug_assert_eq!(conductivity.len(), mesh.triangle_count());
        Self { mesh, conductivity, reaction }
    }

    pub fn laplacian(mesh: &'a TriangleMesh) -> Self {
        Self::new(mesh, vec![Matrix2::identity(); mesh.triangle_count()], None)
    }

    pub fn mesh(&self) -> &TriangleMesh {
        self.mesh
    }

    /// Full operator application on all nodes.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.mesh.node_count()];
        for ((tri, g), c) in self
            .mesh
            .triangles()
            .iter()
            .zip(self.mesh.geometry())
            .zip(&self.conductivity)
        {
            let grad = g.basis_gradients[0] * u[tri[0]]
                + g.basis_gradients[1] * u[tri[1]]
                + g.basis_gradients[2] * u[tri[2]];
            let flux = c * grad * g.area;
            for k in 0..3 {
                out[tri[k]] += flux.dot(&g.basis_gradients[k]);
            }
        }
        if let Some(r) = &self.reaction {
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.mesh.lumped_mass()[i] * r[i] * u[i];
            }
        }
        out
    }

    /// Bilinear form `a(u, v)`.
    pub fn form(&self, u: &[f64], v: &[f64]) -> f64 {
        self.apply(u).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// Cholesky factor of the interior-interior block.
    pub fn factor_interior(&self) -> Result<InteriorFactor> {
        self.factor_interior_masked(None)
    }

    /// Like [`Self::factor_interior`], but nodes with `fixed[i]` get an identity
    /// row and column, decoupling them from the rest of the system.
    pub fn factor_interior_masked(&self, fixed: Option<&[bool]>) -> Result<InteriorFactor> {
        let mesh = self.mesh;
        let is_fixed = |i: usize| fixed.is_some_and(|f| f[i]);
        let n = mesh.interior_nodes().len();
        let mut triplets = Vec::with_capacity(9 * mesh.triangle_count() + n);
        for ((tri, g), c) in mesh.triangles().iter().zip(mesh.geometry()).zip(&self.conductivity) {
            for a in 0..3 {
                let Some(row) = mesh.interior_slot(tri[a]) else { continue };
                if is_fixed(tri[a]) {
                    continue;
                }
                let ca = c * g.basis_gradients[a] * g.area;
                for (&nb, gb) in tri.iter().zip(&g.basis_gradients) {
                    let Some(col) = mesh.interior_slot(nb) else { continue };
                    if is_fixed(nb) {
                        continue;
                    }
                    if col <= row {
                        triplets.push(Triplet::new(row, col, ca.dot(gb)));
                    }
                }
            }
        }
        for (k, &i) in mesh.interior_nodes().iter().enumerate() {
            if is_fixed(i) {
                triplets.push(Triplet::new(k, k, 1.0));
            } else if let Some(r) = &self.reaction {
                triplets.push(Triplet::new(k, k, mesh.lumped_mass()[i] * r[i]));
            }
        }
        if n == 0 {
            return Ok(InteriorFactor { llt: None, n });
        }
        let matrix = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let llt = matrix
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(InteriorFactor { llt: Some(llt), n })
    }

    /// Solves `A u = load` at interior nodes with `u = boundary` on the boundary.
    /// `load` is a full nodal vector (already integrated); boundary entries are ignored.
    pub fn solve_dirichlet(&self, load: &[f64], boundary: &BoundaryTrace) -> Result<NodalField> {
        let mesh = self.mesh;
        boundary.check_len(mesh, "boundary data")?;
        let lifted = boundary.zero_extension(mesh);
        let applied = self.apply(&lifted);
        let rhs: Vec<f64> = mesh.interior_nodes().iter().map(|&i| load[i] - applied[i]).collect();
        let interior = self.factor_interior()?.solve(&rhs);
        let mut u = lifted;
        for (&i, v) in mesh.interior_nodes().iter().zip(interior) {
            u[i] = v;
        }
        if let Some(i) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node: i, value: u[i] });
        }
        Ok(u)
    }
}

/// Factorization of an interior block, indexed by [`TriangleMesh::interior_slot`].
pub struct InteriorFactor {
    llt: Option<faer::sparse::linalg::solvers::Llt<usize, f64>>,
    n: usize,
}

impl InteriorFactor {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        debug_assert_eq!(rhs.len(), self.n);
        match &self.llt {
            None => Vec::new(),
            Some(llt) => {
                let b = Col::<f64>::from_fn(self.n, |i| rhs[i]);
                let x = llt.solve(&b);
                (0..self.n).map(|i| x[i]).collect()
            }
        }
    }
}

/// Discrete harmonic (P1 Laplace) extension of a boundary trace.
pub fn harmonic_extension(mesh: &TriangleMesh, trace: &BoundaryTrace) -> Result<NodalField> {
    StiffnessOperator::laplacian(mesh).solve_dirichlet(&vec![0.0; mesh.node_count()], trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::make_unit_square_mesh;

    #[test]
    fn affine_gradients_are_exact() {
        let mesh = make_unit_square_mesh(7).unwrap();
        let u = NodalField::from_fn(&mesh, |x, _| x);
        for g in element_gradients(&mesh, &u).unwrap().gradients {
            assert!((g - Vector2::new(1.0, 0.0)).norm() < 1e-13);
        }
        let u = NodalField::from_fn(&mesh, |x, y| 3.0 * x - 2.0 * y + 7.0);
        for g in element_gradients(&mesh, &u).unwrap().gradients {
            assert!((g - Vector2::new(3.0, -2.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn quadratic_gradient_matches_centroid_value() {
        let n = 32;
        let mesh = make_unit_square_mesh(n).unwrap();
        let u = NodalField::from_fn(&mesh, |x, _| x * x);
        let grads = element_gradients(&mesh, &u).unwrap();
        let h = 1.0 / n as f64;
        for (t, g) in grads.gradients.iter().enumerate() {
            let c = mesh.centroid(t);
            let exact = Vector2::new(2.0 * c.x, 0.0);
            assert!((g - exact).norm() <= h, "triangle {t}: {g:?} vs {exact:?}");
        }
    }

    #[test]
    fn gradient_is_linear() {
        let mesh = make_unit_square_mesh(5).unwrap();
        let u = NodalField::from_fn(&mesh, |x, y| (3.0 * x).sin() * y);
        let v = NodalField::from_fn(&mesh, |x, y| x * x + y.cos());
        let w = u.axpy(-2.5, &v);
        let (gu, gv, gw) = (
            element_gradients(&mesh, &u).unwrap(),
            element_gradients(&mesh, &v).unwrap(),
            element_gradients(&mesh, &w).unwrap(),
        );
        for t in 0..mesh.triangle_count() {
            let expect = gu.gradients[t] - 2.5 * gv.gradients[t];
            assert!((gw.gradients[t] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn field_length_is_checked() {
        let mesh = make_unit_square_mesh(2).unwrap();
        let err = element_gradients(&mesh, &NodalField(vec![0.0; 3])).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { expected: 9, got: 3, .. }));
    }

    #[test]
    fn lumped_integrals() {
        let mesh = make_unit_square_mesh(8).unwrap();
        let x1 = NodalField::from_fn(&mesh, |x, _| x);
        assert!((lumped_mass_integrate(&mesh, |_| 1.0, &x1).unwrap() - 1.0).abs() < 1e-12);
        assert!((lumped_mass_integrate(&mesh, |y| y, &x1).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn lumped_quadrature_is_second_order() {
        let err = |n| {
            let mesh = make_unit_square_mesh(n).unwrap();
            let x1 = NodalField::from_fn(&mesh, |x, _| x);
            (lumped_mass_integrate(&mesh, |y| y * y, &x1).unwrap() - 1.0 / 3.0).abs()
        };
        let ratio = err(16) / err(32);
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn lumped_rejects_non_finite() {
        let mesh = make_unit_square_mesh(2).unwrap();
        let u = NodalField::from_fn(&mesh, |x, _| x - 0.5);
        let err = lumped_mass_integrate(&mesh, |y| y.ln(), &u).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn harmonic_extension_reproduces_affine() {
        let mesh = make_unit_square_mesh(9).unwrap();
        let exact = NodalField::from_fn(&mesh, |x, y| 0.3 + 2.0 * x - y);
        let ext = harmonic_extension(&mesh, &exact.trace(&mesh)).unwrap();
        for (a, b) in ext.iter().zip(exact.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn stiffness_is_symmetric() {
        let mesh = make_unit_square_mesh(4).unwrap();
        let c: Vec<_> = (0..mesh.triangle_count())
            .map(|t| Matrix2::new(2.0 + t as f64 * 0.01, 0.3, 0.3, 1.0))
            .collect();
        let op = StiffnessOperator::new(&mesh, c, Some(vec![0.7; mesh.node_count()]));
        let u = NodalField::from_fn(&mesh, |x, y| x * y + 1.0);
        let v = NodalField::from_fn(&mesh, |x, y| (x - y).sin());
        assert!((op.form(&u, &v) - op.form(&v, &u)).abs() < 1e-13);
    }
}
