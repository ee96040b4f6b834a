#![allow(dead_code)]

use std::sync::Arc;

use dnlab_core::{make_unit_square_mesh, BoundaryTrace, NodalField, TriangleMesh};
use rand::Rng;

pub fn square(n: usize) -> Arc<TriangleMesh> {
    Arc::new(make_unit_square_mesh(n).unwrap())
}

/// `c0 + c1 sin(k1 x + a) cos(k2 y + b)` with random parameters; stays within
/// `[c0 - c1, c0 + c1]`.
#[derive(Debug, Clone, Copy)]
pub struct Smooth {
    c0: f64,
    c1: f64,
    k1: f64,
    k2: f64,
    a: f64,
    b: f64,
}

impl Smooth {
    pub fn random(rng: &mut impl Rng, c0: f64, c1: f64) -> Self {
        Self {
            c0,
            c1,
            k1: rng.random_range(0.5..3.0),
            k2: rng.random_range(0.5..3.0),
            a: rng.random_range(0.0..std::f64::consts::TAU),
            b: rng.random_range(0.0..std::f64::consts::TAU),
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.c0 + self.c1 * (self.k1 * x + self.a).sin() * (self.k2 * y + self.b).cos()
    }

    pub fn nodal(&self, mesh: &TriangleMesh) -> NodalField {
        NodalField::from_fn(mesh, |x, y| self.eval(x, y))
    }

    pub fn trace(&self, mesh: &TriangleMesh) -> BoundaryTrace {
        BoundaryTrace::from_fn(mesh, |x, y| self.eval(x, y))
    }
}

pub fn random_interior(mesh: &TriangleMesh, rng: &mut impl Rng, amplitude: f64) -> NodalField {
    let mut d = NodalField::zeros(mesh);
    for &i in mesh.interior_nodes() {
        d[i] = rng.random_range(-amplitude..amplitude);
    }
    d
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Random smooth field vanishing on the boundary of the unit square.
pub fn random_bubble(mesh: &TriangleMesh, rng: &mut impl Rng) -> NodalField {
    let c0 = rng.random_range(-1.0..1.0);
    let s = Smooth::random(rng, c0, 1.0);
    NodalField::from_fn(mesh, |x, y| 16.0 * x * (1.0 - x) * y * (1.0 - y) * s.eval(x, y))
}
