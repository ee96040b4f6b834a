//! Nodal fields and boundary traces.

use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;

/// One real value per mesh node.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodalField(pub Vec<f64>);

/// One real value per boundary node, in [`TriangleMesh::boundary_nodes`] order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryTrace(pub Vec<f64>);

macro_rules! vec_newtype {
    ($name:ident) => {
        impl Deref for $name {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut [f64] {
                &mut self.0
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(v: Vec<f64>) -> Self {
                Self(v)
            }
        }

        impl $name {
            pub fn scaled(&self, factor: f64) -> Self {
                Self(self.0.iter().map(|v| v * factor).collect())
            }

            pub fn max_abs(&self) -> f64 {
                self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
            }

            pub fn min(&self) -> f64 {
                self.0.iter().copied().fold(f64::INFINITY, f64::min)
            }

            pub fn max(&self) -> f64 {
                self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }

            /// `self + factor * other`, elementwise.
            pub fn axpy(&self, factor: f64, other: &Self) -> Self {
                Self(self.0.iter().zip(&other.0).map(|(a, b)| a + factor * b).collect())
            }

            pub fn is_identically_zero(&self) -> bool {
                self.0.iter().all(|&v| v == 0.0)
            }
        }
    };
}

vec_newtype!(NodalField);
vec_newtype!(BoundaryTrace);

impl NodalField {
    pub fn constant(mesh: &TriangleMesh, value: f64) -> Self {
        Self(vec![value; mesh.node_count()])
    }

    pub fn zeros(mesh: &TriangleMesh) -> Self {
        Self::constant(mesh, 0.0)
    }

    /// Interpolates a function of `(x1, x2)` at the nodes.
    pub fn from_fn(mesh: &TriangleMesh, f: impl Fn(f64, f64) -> f64) -> Self {
        Self(mesh.nodes().iter().map(|p| f(p.x, p.y)).collect())
    }

    pub fn check_len(&self, mesh: &TriangleMesh, what: &'static str) -> Result<()> {
        if self.len() == mesh.node_count() {
            Ok(())
        } else {
            Err(Error::LengthMismatch { what, expected: mesh.node_count(), got: self.len() })
        }
    }

    /// Restriction to the boundary nodes.
    pub fn trace(&self, mesh: &TriangleMesh) -> BoundaryTrace {
        BoundaryTrace(mesh.boundary_nodes().iter().map(|&b| self[b]).collect())
    }

    /// Copies `trace` onto the boundary nodes, keeping interior values.
    pub fn with_trace(mut self, mesh: &TriangleMesh, trace: &BoundaryTrace) -> Self {
        for (&b, &v) in mesh.boundary_nodes().iter().zip(trace.iter()) {
            self[b] = v;
        }
        self
    }

    /// Smallest `mu >= 1` with `1/mu <= value <= mu` at every node; infinite if
    /// some value is not strictly positive.
    pub fn coefficient_bound(&self) -> f64 {
        self.0.iter().fold(1.0_f64, |mu, &v| {
            if v > 0.0 && v.is_finite() {
                mu.max(v).max(1.0 / v)
            } else {
                f64::INFINITY
            }
        })
    }

    /// Checks `1/mu <= value <= mu` everywhere.
    pub fn check_coefficient_bounds(&self, what: &str, mu: f64) -> Result<()> {
        if !(mu > 1.0) {
            return Err(Error::InvalidProblem(format!("declared bound for {what} must exceed 1")));
        }
        match self.iter().position(|&v| !(v >= 1.0 / mu && v <= mu)) {
            None => Ok(()),
            Some(i) => Err(Error::InvalidProblem(format!(
                "{what} = {} at node {i} violates the bound 1/{mu} <= {what} <= {mu}",
                self[i]
            ))),
        }
    }
}

impl BoundaryTrace {
    pub fn constant(mesh: &TriangleMesh, value: f64) -> Self {
        Self(vec![value; mesh.boundary_nodes().len()])
    }

    pub fn from_fn(mesh: &TriangleMesh, f: impl Fn(f64, f64) -> f64) -> Self {
        Self(
            mesh.boundary_nodes()
                .iter()
                .map(|&b| {
                    let p = mesh.nodes()[b];
                    f(p.x, p.y)
                })
                .collect(),
        )
    }

    /// Boundary hat function: one at boundary slot `k`, zero elsewhere.
    pub fn unit(mesh: &TriangleMesh, k: usize) -> Self {
        let mut t = Self::constant(mesh, 0.0);
        t[k] = 1.0;
        t
    }

    pub fn check_len(&self, mesh: &TriangleMesh, what: &'static str) -> Result<()> {
        let n = mesh.boundary_nodes().len();
        if self.len() == n {
            Ok(())
        } else {
            Err(Error::LengthMismatch { what, expected: n, got: self.len() })
        }
    }

    /// Extension by zero to the interior nodes.
    pub fn zero_extension(&self, mesh: &TriangleMesh) -> NodalField {
        NodalField::zeros(mesh).with_trace(mesh, self)
    }
}
