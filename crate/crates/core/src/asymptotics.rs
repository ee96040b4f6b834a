//! Small- and large-data expansions of the nonlinear DtN map.
//!
//! With `v` p-harmonic and noncritical, data `lambda v` (`m > p-1`) or
//! `v / lambda` (`m < p-1`) give
//!
//! ```text
//! <Lambda, omega> = lambda^(+-(p-1)) L + lambda^(+-m) C + o(lambda^(+-m)),
//! L = int gamma |grad v|^(p-2) grad v . grad omega,
//! C = int grad omega . A[v] grad R + V omega v^m,   div(A[v] grad R) = V v^m.
//! ```

use nalgebra::{Matrix2, Vector2};

use crate::elliptic::{flux_factor, solve, EllipticProblem, SolverSettings};
use crate::error::{Error, Result};
use crate::fem::{gradients_unchecked, vertex_average, StiffnessOperator};
use crate::field::{BoundaryTrace, NodalField};
use crate::mesh::TriangleMesh;
use crate::dtn::{dtn_pair, Extension};

/// Relative size below which an element gradient counts as critical.
pub const NONCRITICAL_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `m > p - 1`, data `lambda v`.
    SmallData,
    /// `m < p - 1`, data `v / lambda`.
    LargeData,
}

impl Regime {
    pub fn for_exponents(m: f64, p: f64) -> Result<Self> {
        if m > p - 1.0 {
            Ok(Regime::SmallData)
        } else if m < p - 1.0 {
            Ok(Regime::LargeData)
        } else {
            Err(Error::Domain(format!("m = {m} equals p - 1; neither expansion applies")))
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::SmallData => "small_data",
            Regime::LargeData => "large_data",
        }
    }

    /// Boundary data scale for parameter `lambda`.
    pub fn data_scale(self, lambda: f64) -> f64 {
        match self {
            Regime::SmallData => lambda,
            Regime::LargeData => 1.0 / lambda,
        }
    }

    /// Exponent of `lambda` in the leading term.
    pub fn leading_exponent(self, p: f64) -> f64 {
        match self {
            Regime::SmallData => p - 1.0,
            Regime::LargeData => 1.0 - p,
        }
    }

    /// Exponent of `lambda` in the correction term.
    pub fn correction_exponent(self, m: f64) -> f64 {
        match self {
            Regime::SmallData => m,
            Regime::LargeData => -m,
        }
    }
}

/// `|m - p + 1|`, the gap between the two terms.
pub fn exponent_gap(m: f64, p: f64) -> f64 {
    (m - p + 1.0).abs()
}

/// Per-triangle `A[v] = gamma |grad v|^(p-2) (I + (p-2) grad v grad v^T / |grad v|^2)`.
pub fn anisotropy_matrix(
    mesh: &TriangleMesh,
    gamma: &NodalField,
    v: &NodalField,
    p: f64,
) -> Result<Vec<Matrix2<f64>>> {
    let grads = noncritical_gradients(mesh, gamma, v)?;
    let gamma_bar = vertex_average(mesh, gamma);
    Ok(grads.iter().zip(&gamma_bar).map(|(g, &gb)| anisotropy_at(gb, g, p)).collect())
}

pub(crate) fn anisotropy_at(gamma: f64, g: &Vector2<f64>, p: f64) -> Matrix2<f64> {
    let s = g.norm_squared();
    let a = gamma * s.powf(0.5 * (p - 2.0));
    a * (Matrix2::identity() + g * g.transpose() * ((p - 2.0) / s))
}

/// Element gradients of `v`, rejecting any below the noncriticality threshold.
pub(crate) fn noncritical_gradients(
    mesh: &TriangleMesh,
    gamma: &NodalField,
    v: &NodalField,
) -> Result<Vec<Vector2<f64>>> {
    gamma.check_len(mesh, "gamma")?;
    v.check_len(mesh, "field")?;
    let grads = gradients_unchecked(mesh, v);
    let scale = grads.iter().fold(0.0_f64, |m, g| m.max(g.norm()));
    let threshold = NONCRITICAL_THRESHOLD * scale;
    for (triangle, g) in grads.iter().enumerate() {
        let norm = g.norm();
        if !(norm > threshold) {
            return Err(Error::Noncritical { triangle, norm, threshold });
        }
    }
    Ok(grads)
}

/// P1 solution of `div(A[v] grad R) = V v_+^m`, `R = 0` on the boundary.
pub fn solve_correction(
    mesh: &TriangleMesh,
    gamma: &NodalField,
    potential: &NodalField,
    v: &NodalField,
    p: f64,
    m: f64,
) -> Result<NodalField> {
    potential.check_len(mesh, "potential")?;
    let a = anisotropy_matrix(mesh, gamma, v, p)?;
    let mass = mesh.lumped_mass();
    // weak form: int A grad R . grad phi = - int V v^m phi
    let load: Vec<f64> = (0..mesh.node_count())
        .map(|i| -mass[i] * potential[i] * v[i].max(0.0).powf(m))
        .collect();
    StiffnessOperator::new(mesh, a, None)
        .solve_dirichlet(&load, &BoundaryTrace::constant(mesh, 0.0))
}

/// `int gamma |grad v|^(p-2) grad v . grad omega` with `omega` a nodal extension.
pub fn leading_term(mesh: &TriangleMesh, gamma: &NodalField, v: &NodalField, omega: &NodalField, p: f64) -> Result<f64> {
    gamma.check_len(mesh, "gamma")?;
    v.check_len(mesh, "field")?;
    omega.check_len(mesh, "test extension")?;
    let gamma_bar = vertex_average(mesh, gamma);
    let gv = gradients_unchecked(mesh, v);
    let gw = gradients_unchecked(mesh, omega);
    Ok(mesh
        .geometry()
        .iter()
        .zip(gamma_bar.iter().zip(gv.iter().zip(&gw)))
        .map(|(geo, (gb, (a, b)))| geo.area * gb * flux_factor(a.norm_squared(), 0.0, p) * a.dot(b))
        .sum())
}

/// `int grad omega . A[v] grad R + V omega v_+^m`.
#[allow(clippy::too_many_arguments)]
pub fn correction_integral(
    mesh: &TriangleMesh,
    gamma: &NodalField,
    potential: &NodalField,
    v: &NodalField,
    r: &NodalField,
    omega: &NodalField,
    p: f64,
    m: f64,
) -> Result<f64> {
    potential.check_len(mesh, "potential")?;
    r.check_len(mesh, "correction")?;
    omega.check_len(mesh, "test extension")?;
    let a = anisotropy_matrix(mesh, gamma, v, p)?;
    let op = StiffnessOperator::new(mesh, a, None);
    let mass = mesh.lumped_mass();
    let zeroth: f64 =
        (0..mesh.node_count()).map(|i| mass[i] * potential[i] * omega[i] * v[i].max(0.0).powf(m)).sum();
    Ok(op.form(omega, r) + zeroth)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSweep {
    pub lambdas: Vec<f64>,
    pub regime: Regime,
    pub p: f64,
    pub m: f64,
    pub base_data: BoundaryTrace,
    pub test: BoundaryTrace,
    pub pairings: Vec<f64>,
    /// Discrete solution for each lambda.
    pub solutions: Vec<NodalField>,
}

/// Default grid `2^-k`, `k = 3..=9`.
pub fn default_lambdas() -> Vec<f64> {
    (3..=9).map(|k| 0.5f64.powi(k)).collect()
}

/// Solves the nonlinear problem of `base` with data `lambda v` (or `v / lambda`)
/// for every lambda and pairs the DtN map with `omega`.
pub fn scaling_sweep(
    base: &EllipticProblem,
    v: &NodalField,
    omega: &BoundaryTrace,
    lambdas: &[f64],
    regime: Regime,
    settings: &SolverSettings,
) -> Result<ScalingSweep> {
    let mesh = base.mesh();
    v.check_len(mesh, "base field")?;
    omega.check_len(mesh, "test trace")?;
    if Regime::for_exponents(base.m(), base.p())? != regime {
        return Err(Error::Domain(format!(
            "regime {} is inconsistent with m = {}, p = {}",
            regime.name(),
            base.m(),
            base.p()
        )));
    }
    if lambdas.iter().any(|&l| !(l > 0.0 && l < 1.0)) {
        return Err(Error::InvalidProblem("lambdas must lie in (0, 1)".into()));
    }
    if lambdas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidProblem("lambdas must be strictly decreasing".into()));
    }
    let base_data = v.trace(mesh);
    let mut pairings = Vec::with_capacity(lambdas.len());
    let mut solutions = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let wrap = |e: Error| Error::Sweep { lambda, source: Box::new(e) };
        let problem = base.with_dirichlet(base_data.scaled(regime.data_scale(lambda))).map_err(wrap)?;
        let sol = solve(&problem, settings).map_err(wrap)?;
        pairings.push(dtn_pair(&problem, &sol, omega, Extension::ZeroInterior).map_err(wrap)?);
        solutions.push(sol.w);
    }
    Ok(ScalingSweep {
        lambdas: lambdas.to_vec(),
        regime,
        p: base.p(),
        m: base.m(),
        base_data,
        test: omega.clone(),
        pairings,
        solutions,
    })
}

/// Least-squares slope with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionFit {
    /// `C` from fitting `remainder / lambda^(+-m)` on `[1, lambda^gap]`.
    pub coeff: f64,
    /// Slope of `log|remainder|` against `log lambda`; expected `+-m`.
    pub exponent: Estimate,
    pub residual_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionFit {
    pub regime: Regime,
    pub leading_coeff: f64,
    /// Slope of `log|pairing|` against `log lambda`; expected `+-(p-1)`.
    pub leading_exponent_fitted: Estimate,
    pub remainders: Vec<f64>,
    /// Lambdas whose remainder sat at the noise floor.
    pub dropped: Vec<f64>,
    /// `None` when fewer than four remainders clear the noise floor.
    pub correction: Option<CorrectionFit>,
}

impl ExpansionFit {
    pub fn status(&self) -> &'static str {
        if self.correction.is_some() {
            "correction fitted"
        } else {
            "no correction detectable"
        }
    }
}

/// Remainders below this multiple of `eps |pairing|` are treated as noise.
pub const NOISE_FLOOR: f64 = 1e3;

pub fn fit_expansion(sweep: &ScalingSweep, analytic_leading: f64) -> Result<ExpansionFit> {
    let n = sweep.lambdas.len();
    if n < 4 || sweep.pairings.len() != n {
        return Err(Error::InvalidProblem(format!("a fit needs at least 4 lambdas, got {n}")));
    }
    let lead_exp = sweep.regime.leading_exponent(sweep.p);
    let corr_exp = sweep.regime.correction_exponent(sweep.m);
    let gap = exponent_gap(sweep.m, sweep.p);

    let log_l: Vec<f64> = sweep.lambdas.iter().map(|l| l.ln()).collect();
    let leading_exponent_fitted =
        linear_fit(&log_l, &sweep.pairings.iter().map(|q| q.abs().ln()).collect::<Vec<_>>())?;

    let remainders: Vec<f64> = sweep
        .lambdas
        .iter()
        .zip(&sweep.pairings)
        .map(|(l, q)| q - analytic_leading * l.powf(lead_exp))
        .collect();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for ((&l, &r), &q) in sweep.lambdas.iter().zip(&remainders).zip(&sweep.pairings) {
        if r.abs() < NOISE_FLOOR * f64::EPSILON * q.abs() || r == 0.0 {
            dropped.push(l);
        } else {
            kept.push((l, r));
        }
    }
    let correction = if kept.len() < 4 {
        None
    } else {
        let x: Vec<f64> = kept.iter().map(|(l, _)| l.ln()).collect();
        let y: Vec<f64> = kept.iter().map(|(_, r)| r.abs().ln()).collect();
        let exponent = linear_fit(&x, &y)?;
        // remainder / lambda^e = C + D lambda^gap + ...
        let s: Vec<f64> = kept.iter().map(|(l, _)| l.powf(gap)).collect();
        let z: Vec<f64> = kept.iter().map(|(l, r)| r / l.powf(corr_exp)).collect();
        let line = linear_fit_full(&s, &z)?;
        Some(CorrectionFit { coeff: line.intercept, exponent, residual_norm: line.residual_norm })
    };
    Ok(ExpansionFit {
        regime: sweep.regime,
        leading_coeff: analytic_leading,
        leading_exponent_fitted,
        remainders,
        dropped,
        correction,
    })
}

struct Line {
    slope: f64,
    intercept: f64,
    slope_se: f64,
    residual_norm: f64,
}

fn linear_fit_full(x: &[f64], y: &[f64]) -> Result<Line> {
    let n = x.len() as f64;
    if x.len() < 2 || x.len() != y.len() || x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidProblem("regression needs at least two finite points".into()));
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidProblem("regression abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_se = if x.len() > 2 { (ssr / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(Line { slope, intercept, slope_se, residual_norm: ssr.sqrt() })
}

fn linear_fit(x: &[f64], y: &[f64]) -> Result<Estimate> {
    let line = linear_fit_full(x, y)?;
    Ok(Estimate { value: line.slope, std_error: line.slope_se })
}

/// Max-norm distance between `R_lambda` and `R`, values and element gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionError {
    pub lambda: f64,
    pub value: f64,
    pub gradient: f64,
}

/// `R_lambda = (w/lambda - v) / lambda^gap` (small data) or
/// `(lambda w - v) / lambda^gap` (large data), compared with `r`.
pub fn correction_convergence(
    mesh: &TriangleMesh,
    sweep: &ScalingSweep,
    v: &NodalField,
    r: &NodalField,
) -> Result<Vec<CorrectionError>> {
    v.check_len(mesh, "base field")?;
    r.check_len(mesh, "correction")?;
    let gap = exponent_gap(sweep.m, sweep.p);
    sweep
        .lambdas
        .iter()
        .zip(&sweep.solutions)
        .map(|(&lambda, w)| {
            w.check_len(mesh, "sweep solution")?;
            let unscale = 1.0 / sweep.regime.data_scale(lambda);
            let denom = lambda.powf(gap);
            let diff: Vec<f64> =
                (0..v.len()).map(|i| (w[i] * unscale - v[i]) / denom - r[i]).collect();
            let value = diff.iter().fold(0.0_f64, |a, d| a.max(d.abs()));
            let gradient = gradients_unchecked(mesh, &diff).iter().fold(0.0_f64, |a, g| a.max(g.norm()));
            Ok(CorrectionError { lambda, value, gradient })
        })
        .collect()
}

/// Splits an error sequence at its minimum. Returns whether it is
/// nonincreasing up to the minimum and the minimum itself (the floor).
pub fn decreases_to_floor(errors: &[f64]) -> (bool, usize, f64) {
    let (k, floor) = errors
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |(bk, bv), (i, v)| if v < bv { (i, v) } else { (bk, bv) });
    let monotone = errors[..=k.min(errors.len().saturating_sub(1))].windows(2).all(|w| w[1] <= w[0]);
    (monotone, k, floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::make_unit_square_mesh;

    #[test]
    fn regimes() {
        assert_eq!(Regime::for_exponents(4.0, 3.0).unwrap(), Regime::SmallData);
        assert_eq!(Regime::for_exponents(1.0, 3.0).unwrap(), Regime::LargeData);
        assert!(Regime::for_exponents(2.0, 3.0).is_err());
        assert_eq!(Regime::LargeData.correction_exponent(1.0), -1.0);
        assert_eq!(Regime::LargeData.data_scale(0.25), 4.0);
    }

    #[test]
    fn anisotropy_special_cases() {
        let mesh = make_unit_square_mesh(4).unwrap();
        let gamma = NodalField::constant(&mesh, 1.7);
        let v = NodalField::from_fn(&mesh, |x, y| x - 2.0 * y + x * y);
        for a in anisotropy_matrix(&mesh, &gamma, &v, 2.0).unwrap() {
            assert!((a - Matrix2::identity() * 1.7).norm() < 1e-14);
        }
        let one = NodalField::constant(&mesh, 1.0);
        let x2 = NodalField::from_fn(&mesh, |_, y| y);
        for a in anisotropy_matrix(&mesh, &one, &x2, 3.5).unwrap() {
            assert!((a - Matrix2::new(1.0, 0.0, 0.0, 2.5)).norm() < 1e-14);
        }
    }

    #[test]
    fn critical_field_is_rejected() {
        let mesh = make_unit_square_mesh(4).unwrap();
        let one = NodalField::constant(&mesh, 1.0);
        let v = NodalField::from_fn(&mesh, |x, _| (x - 0.5).abs());
        assert!(anisotropy_matrix(&mesh, &one, &v, 3.0).is_ok());
        let c = NodalField::from_fn(&mesh, |x, _| if x < 0.3 { 0.0 } else { x });
        assert!(matches!(anisotropy_matrix(&mesh, &one, &c, 3.0), Err(Error::Noncritical { .. })));
        assert!(matches!(anisotropy_matrix(&mesh, &one, &one, 3.0), Err(Error::Noncritical { .. })));
    }

    #[test]
    fn zero_potential_gives_zero_correction() {
        let mesh = make_unit_square_mesh(6).unwrap();
        let one = NodalField::constant(&mesh, 1.0);
        let v = NodalField::from_fn(&mesh, |x, y| 1.0 + x + 0.5 * y);
        let r = solve_correction(&mesh, &one, &NodalField::zeros(&mesh), &v, 3.0, 4.0).unwrap();
        assert!(r.max_abs() < 1e-15);
    }

    #[test]
    fn regression_recovers_a_power_law() {
        let x: Vec<f64> = (1..6).map(|k| (k as f64).ln()).collect();
        let y: Vec<f64> = x.iter().map(|a| 2.5 * a - 1.0).collect();
        let e = linear_fit(&x, &y).unwrap();
        assert!((e.value - 2.5).abs() < 1e-13);
        assert!(e.std_error < 1e-12);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn floor_detection() {
        let (ok, k, f) = decreases_to_floor(&[1.0, 0.3, 0.1, 0.02, 0.03, 0.025]);
        assert!(ok);
        assert_eq!(k, 3);
        assert_eq!(f, 0.02);
        assert!(!decreases_to_floor(&[1.0, 2.0, 0.1]).0);
    }
}
