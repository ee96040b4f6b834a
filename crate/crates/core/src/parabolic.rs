//! `eps d_t(u^m) - div(gamma |grad u|^(p-2) grad u) = 0`, `u(0) = 0`.
//!
//! With `alpha = 1/(m-p+1)`, `u = t^alpha w` solves it whenever `w` solves the
//! elliptic problem with `V = m alpha eps` and the lateral data is `t^alpha g`.
//! The time stepper is implicit Euler in `u^m`; every step minimizes
//! `int gamma |grad v|^p / p + (eps/dt) (v_+^(m+1)/(m+1) - u_prev^m v)`.

use std::sync::Arc;

use nalgebra::Vector2;

use crate::dtn::Extension;
use crate::elliptic::{
    flux_field, minimize, solve, EllipticProblem, EllipticSolution, Functional, SolverSettings,
};
use crate::error::{Error, Result};
use crate::fem::{element_gradients, lumped_mass_integrate};
use crate::field::{BoundaryTrace, NodalField};
use crate::mesh::TriangleMesh;

/// `1 / (m - p + 1)`, defined for `m > p - 1`.
pub fn alpha(m: f64, p: f64) -> Result<f64> {
    if !(m.is_finite() && p.is_finite()) {
        return Err(Error::Domain("exponents must be finite".into()));
    }
    if m > p - 1.0 {
        Ok(1.0 / (m - p + 1.0))
    } else {
        Err(Error::Domain(format!(
            "alpha = 1/(m-p+1) requires m > p - 1, got m = {m}, p = {p}"
        )))
    }
}

/// `V = m alpha eps`.
pub fn potential_from_epsilon(epsilon: &NodalField, m: f64, p: f64) -> Result<NodalField> {
    let a = alpha(m, p)?;
    Ok(epsilon.scaled(m * a))
}

#[derive(Debug, Clone, PartialEq)]
pub enum LateralData {
    /// `t^alpha g`.
    Separated { g: BoundaryTrace },
    /// One trace per step time `k dt`, `k = 1..=steps`.
    Sampled { traces: Vec<BoundaryTrace> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub steps: usize,
    pub dt: f64,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "time grid needs steps >= 1 and T > 0, got steps = {steps}, T = {t_final}"
            )));
        }
        Ok(Self { steps, dt: t_final / steps as f64 })
    }

    /// Snapshot times `k dt`, `k = 0..=steps`.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| k as f64 * self.dt).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ParabolicProblem {
    mesh: Arc<TriangleMesh>,
    epsilon: NodalField,
    gamma: NodalField,
    p: f64,
    m: f64,
    t_final: f64,
    lateral: LateralData,
}

impl ParabolicProblem {
    pub fn new(
        mesh: Arc<TriangleMesh>,
        epsilon: NodalField,
        gamma: NodalField,
        p: f64,
        m: f64,
        t_final: f64,
        lateral: LateralData,
    ) -> Result<Self> {
        epsilon.check_len(&mesh, "epsilon")?;
        gamma.check_len(&mesh, "gamma")?;
        for (what, f) in [("epsilon", &epsilon), ("gamma", &gamma)] {
            if let Some(i) = f.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidProblem(format!("{what} must be positive, found {} at node {i}", f[i])));
            }
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidProblem(format!("p = {p} must lie in (1, inf)")));
        }
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidProblem(format!("m = {m} must be positive")));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidProblem(format!("T = {t_final} must be positive")));
        }
        let traces: Vec<&BoundaryTrace> = match &lateral {
            LateralData::Separated { g } => {
                alpha(m, p)?;
                vec![g]
            }
            LateralData::Sampled { traces } => traces.iter().collect(),
        };
        for tr in traces {
            tr.check_len(&mesh, "lateral data")?;
            if tr.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                return Err(Error::InvalidProblem("lateral data must be finite and nonnegative".into()));
            }
        }
        Ok(Self { mesh, epsilon, gamma, p, m, t_final, lateral })
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn epsilon(&self) -> &NodalField {
        &self.epsilon
    }

    pub fn gamma(&self) -> &NodalField {
        &self.gamma
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn lateral(&self) -> &LateralData {
        &self.lateral
    }

    pub fn with_lateral(&self, lateral: LateralData) -> Result<Self> {
        Self::new(self.mesh.clone(), self.epsilon.clone(), self.gamma.clone(), self.p, self.m, self.t_final, lateral)
    }

    /// Lateral data at step `k` (time `k dt`).
    pub fn lateral_at(&self, grid: &TimeGrid, k: usize) -> Result<BoundaryTrace> {
        match &self.lateral {
            LateralData::Separated { g } => {
                let a = alpha(self.m, self.p)?;
                Ok(g.scaled((k as f64 * grid.dt).powf(a)))
            }
            LateralData::Sampled { traces } => {
                if traces.len() != grid.steps {
                    return Err(Error::Mismatch(format!(
                        "{} sampled traces for {} steps",
                        traces.len(),
                        grid.steps
                    )));
                }
                if k == 0 {
                    Ok(BoundaryTrace::constant(&self.mesh, 0.0))
                } else {
                    Ok(traces[k - 1].clone())
                }
            }
        }
    }

    /// The elliptic problem solved by the spatial profile of separated solutions.
    pub fn separated_profile_problem(&self, g: &BoundaryTrace) -> Result<EllipticProblem> {
        let v = potential_from_epsilon(&self.epsilon, self.m, self.p)?;
        EllipticProblem::new(self.mesh.clone(), self.gamma.clone(), v, self.p, self.m, g.clone())
    }

    fn step_source(&self, dt: f64, prev: &NodalField) -> (Vec<f64>, Vec<f64>) {
        let potential: Vec<f64> = self.epsilon.iter().map(|e| e / dt).collect();
        let source = potential.iter().zip(prev.iter()).map(|(v, u)| v * u.max(0.0).powf(self.m)).collect();
        (potential, source)
    }
}

/// `u(t, x) = t^alpha w(x)`.
#[derive(Debug, Clone)]
pub struct SeparatedSolution {
    pub alpha: f64,
    pub profile: EllipticProblem,
    pub solution: EllipticSolution,
}

impl SeparatedSolution {
    pub fn w(&self) -> &NodalField {
        &self.solution.w
    }

    pub fn at(&self, t: f64) -> NodalField {
        self.solution.w.scaled(t.powf(self.alpha))
    }

    /// Flux of `u(t)`: `t^(alpha(p-1))` times the flux of `w`.
    pub fn flux_at(&self, t: f64) -> Result<Vec<Vector2<f64>>> {
        let factor = t.powf(self.alpha * (self.profile.p() - 1.0));
        Ok(flux_field(&self.profile, &self.solution.w, self.solution.delta)?
            .into_iter()
            .map(|f| f * factor)
            .collect())
    }
}

pub fn separated_solution(
    problem: &ParabolicProblem,
    g: &BoundaryTrace,
    settings: &SolverSettings,
) -> Result<SeparatedSolution> {
    let alpha = alpha(problem.m, problem.p)?;
    g.check_len(problem.mesh(), "lateral data")?;
    if let Some(i) = g.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::InvalidProblem(format!(
            "separated data must be strictly positive, found {} at boundary slot {i}",
            g[i]
        )));
    }
    let profile = problem.separated_profile_problem(g)?;
    let solution = solve(&profile, settings)?;
    Ok(SeparatedSolution { alpha, profile, solution })
}

/// Implicit Euler snapshots at `k dt`, `k = 0..=steps`, starting from zero.
pub fn step_implicit(
    problem: &ParabolicProblem,
    grid: &TimeGrid,
    settings: &SolverSettings,
) -> Result<Vec<NodalField>> {
    if (grid.dt * grid.steps as f64 - problem.t_final).abs() > 1e-12 * problem.t_final {
        return Err(Error::Mismatch(format!(
            "time grid ends at {} but T = {}",
            grid.dt * grid.steps as f64,
            problem.t_final
        )));
    }
    let mesh = problem.mesh();
    let mut states = vec![NodalField::zeros(mesh)];
    for k in 1..=grid.steps {
        let wrap = |e: Error| Error::Step { step: k, source: Box::new(e) };
        let data = problem.lateral_at(grid, k).map_err(wrap)?;
        let prev = &states[k - 1];
        let (potential, source) = problem.step_source(grid.dt, prev);
        let functional = Functional::new(mesh, &problem.gamma, &potential, Some(&source), problem.p, problem.m);
        let start = prev.clone().with_trace(mesh, &data);
        let g_scale = element_gradients(mesh, &start).map_err(wrap)?.max_norm();
        let outcome = minimize(&functional, &data, start, g_scale, settings).map_err(wrap)?;
        states.push(outcome.v);
    }
    Ok(states)
}

/// Interior residual norm of each implicit Euler step for a given sequence of
/// states (e.g. a closed-form solution sampled on the grid).
pub fn euler_residuals(problem: &ParabolicProblem, grid: &TimeGrid, states: &[NodalField], delta: f64) -> Result<Vec<f64>> {
    if states.len() != grid.steps + 1 {
        return Err(Error::Mismatch(format!("{} states for {} steps", states.len(), grid.steps)));
    }
    let mesh = problem.mesh();
    states
        .windows(2)
        .map(|pair| {
            pair[1].check_len(mesh, "state")?;
            let (potential, source) = problem.step_source(grid.dt, &pair[0]);
            let functional = Functional::new(mesh, &problem.gamma, &potential, Some(&source), problem.p, problem.m);
            Ok(functional.gradient(&pair[1], delta).iter().map(|r| r * r).sum::<f64>().sqrt())
        })
        .collect()
}

/// Lumped `int eps (u1^m - u2^m)_+` at every snapshot.
pub fn comparison_defect(
    mesh: &TriangleMesh,
    run1: &[NodalField],
    run2: &[NodalField],
    epsilon: &NodalField,
    m: f64,
) -> Result<Vec<f64>> {
    if run1.len() != run2.len() {
        return Err(Error::Mismatch(format!("runs have {} and {} snapshots", run1.len(), run2.len())));
    }
    epsilon.check_len(mesh, "epsilon")?;
    run1.iter()
        .zip(run2)
        .map(|(a, b)| {
            a.check_len(mesh, "snapshot")?;
            b.check_len(mesh, "snapshot")?;
            let d: Vec<f64> = a
                .iter()
                .zip(b.iter())
                .zip(epsilon.iter())
                .map(|((x, y), e)| e * (x.max(0.0).powf(m) - y.max(0.0).powf(m)).max(0.0))
                .collect();
            lumped_mass_integrate(mesh, |v| v, &NodalField(d))
        })
        .collect()
}

/// Lumped `int eps u_+^(m+1)`.
pub fn weighted_power_integral(mesh: &TriangleMesh, epsilon: &NodalField, u: &NodalField, m: f64) -> Result<f64> {
    u.check_len(mesh, "state")?;
    epsilon.check_len(mesh, "epsilon")?;
    let powered = NodalField(u.iter().zip(epsilon.iter()).map(|(v, e)| e * v.max(0.0).powf(m + 1.0)).collect());
    lumped_mass_integrate(mesh, |v| v, &powered)
}

/// Weak lateral pairings of a separated solution.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyRecord {
    pub times: Vec<f64>,
    /// `pairings[i][j]`: time `times[i]`, test `j`.
    pub pairings: Vec<Vec<f64>>,
    pub exponent: f64,
}

/// For each time `t` and test `h`, the weak lateral flux of `u = t^alpha w`:
/// `int gamma |grad u|^(p-2) grad u . grad h~ + int eps d_t(u^m) h~`, with
/// `h~` the zero-interior extension.
pub fn lateral_cauchy_record(
    problem: &ParabolicProblem,
    separated: &SeparatedSolution,
    tests: &[BoundaryTrace],
    times: &[f64],
) -> Result<CauchyRecord> {
    let mesh = problem.mesh();
    let (p, m) = (problem.p, problem.m);
    let a = separated.alpha;
    let w = separated.w();
    let exts = tests
        .iter()
        .map(|h| Extension::ZeroInterior.extend(&separated.profile, h))
        .collect::<Result<Vec<_>>>()?;
    let pairings = times
        .iter()
        .map(|&t| {
            if !(t > 0.0) {
                return Err(Error::InvalidProblem(format!("record times must be positive, got {t}")));
            }
            let u = separated.at(t);
            let delta = separated.solution.delta * t.powf(a);
            let flux = flux_field(&separated.profile, &u, delta)?;
            // d_t (t^(alpha m) w^m)
            let rate: Vec<f64> = w.iter().map(|x| a * m * t.powf(a * m - 1.0) * x.max(0.0).powf(m)).collect();
            Ok(exts
                .iter()
                .map(|h| {
                    let grads = crate::fem::gradients_unchecked(mesh, h);
                    let volume: f64 = mesh
                        .geometry()
                        .iter()
                        .zip(flux.iter().zip(&grads))
                        .map(|(geo, (f, g))| geo.area * f.dot(g))
                        .sum();
                    let mass = mesh.lumped_mass();
                    let zeroth: f64 = (0..mesh.node_count()).map(|i| mass[i] * problem.epsilon[i] * rate[i] * h[i]).sum();
                    volume + zeroth
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CauchyRecord { times: times.to_vec(), pairings, exponent: a * (p - 1.0) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::make_unit_square_mesh;

    #[test]
    fn alpha_values() {
        assert_eq!(alpha(4.0, 3.0).unwrap(), 0.5);
        assert!((alpha(2.0, 1.5).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(alpha(2.0, 3.0).is_err());
        assert!(alpha(1.0, 3.0).is_err());
    }

    #[test]
    fn potential_values() {
        let mesh = make_unit_square_mesh(2).unwrap();
        let eps = NodalField::constant(&mesh, 1.0);
        assert!(potential_from_epsilon(&eps, 4.0, 3.0).unwrap().iter().all(|&v| v == 2.0));
        assert!(potential_from_epsilon(&eps, 2.0, 1.5).unwrap().iter().all(|&v| (v - 4.0 / 3.0).abs() < 1e-15));
    }

    fn problem(lateral: LateralData) -> ParabolicProblem {
        let mesh = Arc::new(make_unit_square_mesh(6).unwrap());
        ParabolicProblem::new(
            mesh.clone(),
            NodalField::constant(&mesh, 1.0),
            NodalField::constant(&mesh, 1.0),
            3.0,
            4.0,
            1.0,
            lateral,
        )
        .unwrap()
    }

    #[test]
    fn zero_data_stays_zero() {
        let pb = problem(LateralData::Separated { g: BoundaryTrace(vec![0.0; 24]) });
        let grid = TimeGrid::new(1.0, 5).unwrap();
        let states = step_implicit(&pb, &grid, &SolverSettings::default()).unwrap();
        assert_eq!(states.len(), 6);
        assert!(states.iter().all(|s| s.is_identically_zero()));
    }

    #[test]
    fn separated_solution_starts_at_zero() {
        let pb = problem(LateralData::Separated { g: BoundaryTrace(vec![1.0; 24]) });
        let sep = separated_solution(&pb, &BoundaryTrace(vec![1.0; 24]), &SolverSettings::default()).unwrap();
        assert!(sep.at(0.0).is_identically_zero());
        let interior_min = pb.mesh().interior_nodes().iter().map(|&i| sep.w()[i]).fold(f64::INFINITY, f64::min);
        assert!(interior_min >= 1e-10 && sep.w().max() <= 1.0 + 1e-8);
        assert!(separated_solution(&pb, &BoundaryTrace(vec![0.0; 24]), &SolverSettings::default()).is_err());
    }

    #[test]
    fn mismatched_runs_are_rejected() {
        let mesh = make_unit_square_mesh(2).unwrap();
        let eps = NodalField::constant(&mesh, 1.0);
        let a = vec![NodalField::zeros(&mesh); 3];
        let b = vec![NodalField::zeros(&mesh); 2];
        assert!(matches!(comparison_defect(&mesh, &a, &b, &eps, 2.0), Err(Error::Mismatch(_))));
        assert_eq!(comparison_defect(&mesh, &a, &a, &eps, 2.0).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn sampled_data_must_match_the_grid() {
        let pb = problem(LateralData::Sampled { traces: vec![BoundaryTrace(vec![1.0; 24]); 3] });
        let grid = TimeGrid::new(1.0, 4).unwrap();
        assert!(matches!(
            step_implicit(&pb, &grid, &SolverSettings::default()),
            Err(Error::Step { step: 1, .. })
        ));
    }
}
