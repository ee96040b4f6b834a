//! Forward solver for `-div(gamma |grad w|^(p-2) grad w) + V w^m = 0`, `w = g` on
//! the boundary.
//!
//! The weak solution is the minimizer of the convex energy
//!
//! ```text
//! E(v) = sum_T |T| gamma_T / p (|grad v|_T^2 + delta^2)^(p/2)
//!      + sum_i mass_i V_i / (m + 1) (v_i)_+^(m + 1)
//! ```
//!
//! over P1 fields with the prescribed boundary values. `delta > 0` regularizes
//! the gradient term; [`solve`] runs damped Newton iterations while driving
//! `delta` down a geometric schedule.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::fem::{gradients_unchecked, harmonic_extension, vertex_average, StiffnessOperator};
use crate::field::{BoundaryTrace, NodalField};
use crate::mesh::TriangleMesh;

#[derive(Debug, Clone)]
pub struct EllipticProblem {
    mesh: Arc<TriangleMesh>,
    gamma: NodalField,
    potential: NodalField,
    p: f64,
    m: f64,
    dirichlet: BoundaryTrace,
}

impl EllipticProblem {
    /// Validates and builds a problem. `p = 2` is accepted (linear sanity case).
    pub fn new(
        mesh: Arc<TriangleMesh>,
        gamma: NodalField,
        potential: NodalField,
        p: f64,
        m: f64,
        dirichlet: BoundaryTrace,
    ) -> Result<Self> {
        gamma.check_len(&mesh, "gamma")?;
        potential.check_len(&mesh, "potential")?;
        dirichlet.check_len(&mesh, "dirichlet data")?;
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidProblem(format!("p = {p} must lie in (1, inf)")));
        }
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidProblem(format!("m = {m} must be positive")));
        }
        if let Some(i) = gamma.iter().position(|&g| !(g > 0.0 && g.is_finite())) {
            return Err(Error::InvalidProblem(format!(
                "gamma must be positive, found {} at node {i}",
                gamma[i]
            )));
        }
        if let Some(i) = potential.iter().position(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidProblem(format!(
                "potential must be nonnegative, found {} at node {i}",
                potential[i]
            )));
        }
        if let Some(i) = dirichlet.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node: mesh.boundary_nodes()[i], value: dirichlet[i] });
        }
        if !potential.is_identically_zero() {
            if let Some(i) = dirichlet.iter().position(|&v| v < 0.0) {
                return Err(Error::InvalidProblem(format!(
                    "with an absorption term the boundary data must be nonnegative, found {} at boundary slot {i}",
                    dirichlet[i]
                )));
            }
        }
        Ok(Self { mesh, gamma, potential, p, m, dirichlet })
    }

    /// Weighted p-Laplace problem (`V = 0`).
    pub fn p_laplace(
        mesh: Arc<TriangleMesh>,
        gamma: NodalField,
        p: f64,
        dirichlet: BoundaryTrace,
    ) -> Result<Self> {
        let zero = NodalField::zeros(&mesh);
        Self::new(mesh, gamma, zero, p, 1.0, dirichlet)
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<TriangleMesh> {
        &self.mesh
    }

    pub fn gamma(&self) -> &NodalField {
        &self.gamma
    }

    pub fn potential(&self) -> &NodalField {
        &self.potential
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn dirichlet(&self) -> &BoundaryTrace {
        &self.dirichlet
    }

    /// Same coefficients and exponents with other boundary data.
    pub fn with_dirichlet(&self, dirichlet: BoundaryTrace) -> Result<Self> {
        Self::new(
            self.mesh.clone(),
            self.gamma.clone(),
            self.potential.clone(),
            self.p,
            self.m,
            dirichlet,
        )
    }

    pub fn with_potential(&self, potential: NodalField) -> Result<Self> {
        Self::new(
            self.mesh.clone(),
            self.gamma.clone(),
            potential,
            self.p,
            self.m,
            self.dirichlet.clone(),
        )
    }

    pub fn has_absorption(&self) -> bool {
        !self.potential.is_identically_zero()
    }

    /// Hash of every input; solutions carry it to detect stale pairings.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.p.to_bits().hash(&mut h);
        self.m.to_bits().hash(&mut h);
        for field in [&self.gamma[..], &self.potential[..], &self.dirichlet[..]] {
            field.len().hash(&mut h);
            for v in field {
                v.to_bits().hash(&mut h);
            }
        }
        for x in self.mesh.nodes() {
            x.x.to_bits().hash(&mut h);
            x.y.to_bits().hash(&mut h);
        }
        self.mesh.triangles().hash(&mut h);
        h.finish()
    }

    pub(crate) fn functional(&self) -> Functional<'_> {
        Functional::new(&self.mesh, &self.gamma, &self.potential, None, self.p, self.m)
    }
}

/// Regularization schedule: `delta_k = max(factor_k * G, floor)` where `G` is
/// the largest element gradient of the initial guess.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSchedule {
    pub factors: Vec<f64>,
    pub floor: f64,
}

impl Default for DeltaSchedule {
    fn default() -> Self {
        Self { factors: (1..=8).map(|k| 10f64.powi(-k)).collect(), floor: 1e-12 }
    }
}

impl DeltaSchedule {
    /// Concrete, strictly decreasing sequence for gradient scale `g_scale`.
    pub fn resolve(&self, g_scale: f64) -> Vec<f64> {
        let mut seq: Vec<f64> = Vec::with_capacity(self.factors.len());
        for f in &self.factors {
            let d = (f * g_scale).max(self.floor);
            if seq.last().is_none_or(|&last| d < last) {
                seq.push(d);
            }
        }
        if seq.is_empty() {
            seq.push(self.floor);
        }
        seq
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    /// Stop when the interior gradient norm drops below `grad_tol` times the
    /// gradient norm of the zero-interior extension of the boundary data.
    pub grad_tol: f64,
    /// Total Newton iterations allowed over the whole continuation.
    pub max_newton: usize,
    pub delta_seq: DeltaSchedule,
    /// Relative tolerance used on the intermediate continuation levels.
    pub intermediate_tol: f64,
    pub armijo_slope: f64,
    pub backtrack: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            grad_tol: 1e-10,
            max_newton: 400,
            delta_seq: DeltaSchedule::default(),
            intermediate_tol: 1e-6,
            armijo_slope: 1e-4,
            backtrack: 0.5,
        }
    }
}

impl SolverSettings {
    pub fn with_grad_tol(mut self, grad_tol: f64) -> Self {
        self.grad_tol = grad_tol;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidProblem("grad_tol must be positive".into()));
        }
        if !(self.armijo_slope > 0.0 && self.armijo_slope < 0.5) {
            return Err(Error::InvalidProblem("armijo slope fraction must lie in (0, 1/2)".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidProblem("backtracking factor must lie in (0, 1)".into()));
        }
        if self.delta_seq.factors.windows(2).any(|w| !(w[1] < w[0]))
            || !(self.delta_seq.floor > 0.0)
        {
            return Err(Error::InvalidProblem(
                "delta schedule must be strictly decreasing with a positive floor".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EllipticSolution {
    pub w: NodalField,
    pub final_energy: f64,
    pub iterations: usize,
    pub achieved_grad_norm: f64,
    /// Regularization of the last continuation level.
    pub delta: f64,
    pub(crate) fingerprint: u64,
}

impl EllipticSolution {
    pub fn belongs_to(&self, problem: &EllipticProblem) -> bool {
        self.fingerprint == problem.fingerprint()
    }
}

/// Discrete energy of `v` (boundary values are taken from `v` as given).
pub fn energy(problem: &EllipticProblem, v: &NodalField, delta: f64) -> Result<f64> {
    v.check_len(problem.mesh(), "field")?;
    Ok(problem.functional().energy(v, delta))
}

/// Interior gradient of [`energy`]; boundary entries are zero.
pub fn energy_gradient(problem: &EllipticProblem, v: &NodalField, delta: f64) -> Result<NodalField> {
    v.check_len(problem.mesh(), "field")?;
    Ok(NodalField(problem.functional().gradient(v, delta)))
}

/// Per-triangle flux `gamma_T (|grad w|^2 + delta^2)^((p-2)/2) grad w`.
pub fn flux_field(problem: &EllipticProblem, w: &NodalField, delta: f64) -> Result<Vec<Vector2<f64>>> {
    w.check_len(problem.mesh(), "field")?;
    let f = problem.functional();
    Ok(gradients_unchecked(problem.mesh(), w)
        .iter()
        .zip(&f.gamma_bar)
        .map(|(g, &gb)| gb * flux_factor(g.norm_squared(), delta, problem.p) * g)
        .collect())
}

/// `(|g|^2 + delta^2)^((p-2)/2)`, with zero flux where both vanish.
pub(crate) fn flux_factor(grad_sq: f64, delta: f64, p: f64) -> f64 {
    let s = grad_sq + delta * delta;
    if s == 0.0 {
        0.0
    } else {
        s.powf(0.5 * (p - 2.0))
    }
}

pub fn solve(problem: &EllipticProblem, settings: &SolverSettings) -> Result<EllipticSolution> {
    let initial = default_initial_guess(problem)?;
    solve_from(problem, settings, &initial)
}

/// Discrete harmonic extension of the boundary data.
pub fn default_initial_guess(problem: &EllipticProblem) -> Result<NodalField> {
    harmonic_extension(problem.mesh(), problem.dirichlet())
}

/// Runs the solver from `initial`; its boundary values are replaced by the
/// Dirichlet data.
pub fn solve_from(
    problem: &EllipticProblem,
    settings: &SolverSettings,
    initial: &NodalField,
) -> Result<EllipticSolution> {
    initial.check_len(problem.mesh(), "initial guess")?;
    let functional = problem.functional();
    let start = initial.clone().with_trace(problem.mesh(), problem.dirichlet());
    let g_scale = crate::fem::element_gradients(problem.mesh(), &start)?.max_norm();
    let outcome = minimize(&functional, problem.dirichlet(), start, g_scale, settings)?;
    Ok(EllipticSolution {
        w: outcome.v,
        final_energy: outcome.energy,
        iterations: outcome.iterations,
        achieved_grad_norm: outcome.grad_norm,
        delta: outcome.delta,
        fingerprint: problem.fingerprint(),
    })
}

/// Energy with an optional linear source term `- sum_i mass_i s_i v_i`.
pub(crate) struct Functional<'a> {
    pub mesh: &'a TriangleMesh,
    pub gamma_bar: Vec<f64>,
    pub potential: &'a [f64],
    pub source: Option<&'a [f64]>,
    pub p: f64,
    pub m: f64,
}

impl<'a> Functional<'a> {
    pub fn new(
        mesh: &'a TriangleMesh,
        gamma: &[f64],
        potential: &'a [f64],
        source: Option<&'a [f64]>,
        p: f64,
        m: f64,
    ) -> Self {
        Self { mesh, gamma_bar: vertex_average(mesh, gamma), potential, source, p, m }
    }

    pub fn energy(&self, v: &[f64], delta: f64) -> f64 {
        let p = self.p;
        let grads = gradients_unchecked(self.mesh, v);
        let mut e = 0.0;
        for ((g, geo), &gb) in grads.iter().zip(self.mesh.geometry()).zip(&self.gamma_bar) {
            e += geo.area * gb / p * (g.norm_squared() + delta * delta).powf(0.5 * p);
        }
        let mass = self.mesh.lumped_mass();
        for i in 0..v.len() {
            if self.potential[i] != 0.0 && v[i] > 0.0 {
                e += mass[i] * self.potential[i] / (self.m + 1.0) * v[i].powf(self.m + 1.0);
            }
            if let Some(s) = self.source {
                e -= mass[i] * s[i] * v[i];
            }
        }
        e
    }

    /// Gradient at every node, with boundary entries zeroed.
    pub fn gradient(&self, v: &[f64], delta: f64) -> Vec<f64> {
        let mut out = self.full_residual(v, delta);
        for &b in self.mesh.boundary_nodes() {
            out[b] = 0.0;
        }
        out
    }

    /// Residual of the weak form tested with every hat function, boundary included.
    pub fn full_residual(&self, v: &[f64], delta: f64) -> Vec<f64> {
        let mesh = self.mesh;
        let mut out = vec![0.0; mesh.node_count()];
        let grads = gradients_unchecked(mesh, v);
        for (((tri, geo), g), &gb) in
            mesh.triangles().iter().zip(mesh.geometry()).zip(&grads).zip(&self.gamma_bar)
        {
            let flux = g * (geo.area * gb * flux_factor(g.norm_squared(), delta, self.p));
            for k in 0..3 {
                out[tri[k]] += flux.dot(&geo.basis_gradients[k]);
            }
        }
        let mass = mesh.lumped_mass();
        for i in 0..v.len() {
            if self.potential[i] != 0.0 && v[i] > 0.0 {
                out[i] += mass[i] * self.potential[i] * v[i].powf(self.m);
            }
            if let Some(s) = self.source {
                out[i] -= mass[i] * s[i];
            }
        }
        out
    }

    /// Newton matrix at `v`, given the gradient `grad` there.
    ///
    /// For `m < 1` the reaction uses, node by node, the secant slope of
    /// `x -> x^m` between `v_+` and the root of the one-dimensional equation
    /// obtained by freezing every other term of the gradient. Near a solution
    /// this tends to the tangent `m v^(m-1)`; near zero it stays bounded and
    /// lands the node on its local root instead of overshooting into the
    /// constraint. `h_min` caps the slope where both points vanish.
    pub fn hessian(&self, v: &[f64], grad: &[f64], delta: f64, h_min: f64) -> StiffnessOperator<'a> {
        let p = self.p;
        let grads = gradients_unchecked(self.mesh, v);
        let conductivity = grads
            .iter()
            .zip(&self.gamma_bar)
            .map(|(g, &gb)| {
                let s = g.norm_squared() + delta * delta;
                let a = s.powf(0.5 * (p - 2.0));
                let b = (p - 2.0) * s.powf(0.5 * (p - 4.0));
                gb * (Matrix2::identity() * a + g * g.transpose() * b)
            })
            .collect();
        let m = self.m;
        let mass = self.mesh.lumped_mass();
        let reaction = (0..v.len())
            .map(|i| {
                let pot = self.potential[i];
                if pot == 0.0 {
                    return 0.0;
                }
                let x = v[i].max(0.0);
                if m >= 1.0 {
                    return pot * m * x.powf(m - 1.0);
                }
                let absorption = mass[i] * pot * x.powf(m);
                let root = ((absorption - grad[i]).max(0.0) / (mass[i] * pot)).powf(1.0 / m);
                let slope = if (root - x).abs() <= 1e-8 * root.max(x) {
                    m * x.max(h_min).powf(m - 1.0)
                } else {
                    (root.powf(m) - x.powf(m)) / (root - x)
                };
                pot * slope.min(m * h_min.powf(m - 1.0))
            })
            .collect();
        StiffnessOperator::new(self.mesh, conductivity, Some(reaction))
    }
}

pub(crate) struct MinimizeOutcome {
    pub v: NodalField,
    pub energy: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub delta: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Damped Newton with delta continuation. `start` must already carry the
/// boundary values.
pub(crate) fn minimize(
    functional: &Functional<'_>,
    boundary: &BoundaryTrace,
    start: NodalField,
    g_scale: f64,
    settings: &SolverSettings,
) -> Result<MinimizeOutcome> {
    settings.validate()?;
    let mesh = functional.mesh;
    let deltas = settings.delta_seq.resolve(g_scale);
    let data_scale = boundary.max_abs().max(start.max_abs());
    let h_min = (1e-40 * data_scale).max(1e-300);

    // With absorption the data and sources are nonnegative and so is the
    // minimizer; iterates are kept in the nonnegative cone, where the
    // non-smooth part of v_+^(m+1) cannot make Newton oscillate around zero.
    let constrained = functional.potential.iter().any(|&x| x > 0.0);
    let project = |mut u: NodalField| {
        if constrained {
            for &i in mesh.interior_nodes() {
                u[i] = u[i].max(0.0);
            }
        }
        u
    };

    let reference = norm(&functional.gradient(&boundary.zero_extension(mesh), deltas[0]));
    let mut v = project(start);
    let mut iterations = 0;
    let mut grad_norm;

    for (level, &delta) in deltas.iter().enumerate() {
        let last = level + 1 == deltas.len();
        let rel = if last { settings.grad_tol } else { settings.grad_tol.max(settings.intermediate_tol) };
        let target = rel * reference;
        let mut energy = functional.energy(&v, delta);
        loop {
            let grad = functional.gradient(&v, delta);
            grad_norm = norm(&grad);
            if grad_norm <= target {
                break;
            }
            let fail = |reason, iterations| Error::NotConverged { delta, iterations, grad_norm, target, reason };
            if iterations >= settings.max_newton {
                return Err(fail("iteration cap reached", iterations));
            }
            iterations += 1;

            // nodes at the bound that the gradient pushes further down are sent
            // to zero and decoupled from the Newton system
            let mut active = vec![false; mesh.node_count()];
            if constrained {
                for &i in mesh.interior_nodes() {
                    active[i] = v[i] == 0.0 && grad[i] > 0.0;
                }
            }
            let hessian = functional.hessian(&v, &grad, delta, h_min);
            let rhs: Vec<f64> = mesh
                .interior_nodes()
                .iter()
                .map(|&i| if active[i] { -v[i] } else { -grad[i] })
                .collect();
            let mut direction = vec![0.0; mesh.node_count()];
            if let Ok(factor) = hessian.factor_interior_masked(constrained.then_some(&active[..])) {
                for (&i, d) in mesh.interior_nodes().iter().zip(factor.solve(&rhs)) {
                    direction[i] = d;
                }
            }
            let slope = dot(&grad, &direction);
            if !(slope < 0.0) || direction.iter().any(|d| !d.is_finite()) {
                // not a descent direction: steepest descent instead
                direction = grad.iter().map(|g| -g).collect();
            }
            let dir = NodalField(direction);

            let mut step = 1.0;
            loop {
                let trial = project(v.axpy(step, &dir));
                let moved = dot(&grad, &trial.axpy(-1.0, &v));
                let e = functional.energy(&trial, delta);
                // roundoff regime: the predicted decrease is invisible in the energy
                if step == 1.0 && -moved <= 1e-13 * energy.abs().max(f64::MIN_POSITIVE) {
                    if norm(&functional.gradient(&trial, delta)) < grad_norm {
                        v = trial;
                        energy = e;
                        break;
                    }
                    return Err(fail("gradient at roundoff floor", iterations));
                }
                if moved < 0.0 && e <= energy + settings.armijo_slope * moved {
                    v = trial;
                    energy = e;
                    break;
                }
                step *= settings.backtrack;
                if step < 1e-14 {
                    return Err(fail("line search stalled", iterations));
                }
            }
        }
        if last {
            return Ok(MinimizeOutcome { v, energy, iterations, grad_norm, delta });
        }
    }
    unreachable!("delta schedule is never empty")
}
