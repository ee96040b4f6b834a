//! Complex geometrical optics vectors for the constant-direction anisotropy
//! `B = I + (p-2) e_n e_n^T`.
//!
//! `zeta = +-s mu + i (xi +- t eta)` is null for `B` when `mu` solves
//! `mu . xi + (p-2) mu_n xi_n = 0` in `span{xi, e_n}`, `eta` is a unit vector
//! orthogonal to `xi`, `mu` and `e_n`, and
//! `s^2 (1 + (p-2) mu_n^2) = t^2 + |xi|^2 + (p-2) xi_n^2`.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CGOFrame {
    pub n: usize,
    pub p: f64,
    pub xi: DVector<f64>,
    pub eta: DVector<f64>,
    pub mu: DVector<f64>,
    pub t: f64,
    pub s: f64,
    pub zeta_plus: DVector<Complex64>,
    pub zeta_minus: DVector<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

fn unit(n: usize, k: usize) -> DVector<f64> {
    let mut e = DVector::zeros(n);
    e[k] = 1.0;
    e
}

pub fn build_frame(n: usize, p: f64, xi: &[f64], t: f64) -> Result<CGOFrame> {
    if n < 3 {
        return Err(Error::Frame(format!("dimension n = {n} must be at least 3")));
    }
    if xi.len() != n {
        return Err(Error::Frame(format!("xi has {} components, expected {n}", xi.len())));
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Frame(format!("p = {p} must lie in (1, inf)")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Frame(format!("t = {t} must be positive")));
    }
    if xi.iter().any(|v| !v.is_finite()) {
        return Err(Error::Frame("xi has non-finite components".into()));
    }
    let xi = DVector::from_column_slice(xi);
    let en = unit(n, n - 1);
    let xi_n = xi[n - 1];
    let mut u = xi.clone();
    u[n - 1] = 0.0;
    let xi_u = u.norm();
    if xi.norm() == 0.0 || xi_u <= 1e-12 * xi.norm() {
        return Err(Error::Frame("xi must not be parallel to e_n".into()));
    }
    let u_hat = u / xi_u;

    // mu = a u_hat + b e_n with a xi_u + (p-1) b xi_n = 0; b > 0 fixes the sign
    let (a, b) = (-(p - 1.0) * xi_n, xi_u);
    let r = a.hypot(b);
    let mu = &u_hat * (a / r) + &en * (b / r);

    let eta = if n == 3 {
        let c = en.cross(&xi);
        let norm = c.norm();
        c / norm
    } else {
        let basis = [u_hat.clone(), en.clone()];
        (0..n)
            .map(|k| {
                let mut e = unit(n, k);
                for q in &basis {
                    let proj = q.dot(&e);
                    e -= q * proj;
                }
                e
            })
            .find(|e| e.norm_squared() >= 0.25)
            .map(|e| {
                let norm = e.norm();
                e / norm
            })
            .expect("complement of a plane in dimension >= 3 is nontrivial")
    };

    let s = ((t * t + xi.norm_squared() + (p - 2.0) * xi_n * xi_n) / (1.0 + (p - 2.0) * mu[n - 1].powi(2)))
        .sqrt();
    Ok(CGOFrame::assemble(n, p, xi, eta, mu, t, s))
}

impl CGOFrame {
    fn assemble(
        n: usize,
        p: f64,
        xi: DVector<f64>,
        eta: DVector<f64>,
        mu: DVector<f64>,
        t: f64,
        s: f64,
    ) -> Self {
        let zeta = |sign: f64| {
            DVector::from_fn(n, |k, _| Complex64::new(sign * s * mu[k], xi[k] + sign * t * eta[k]))
        };
        let zeta_plus = zeta(1.0);
        let zeta_minus = zeta(-1.0);
        Self { n, p, xi, eta, mu, t, s, zeta_plus, zeta_minus }
    }

    /// Same frame with `s` replaced, for perturbation checks.
    pub fn with_s(&self, s: f64) -> Self {
        Self::assemble(self.n, self.p, self.xi.clone(), self.eta.clone(), self.mu.clone(), self.t, s)
    }

    pub fn zeta(&self, branch: Branch) -> &DVector<Complex64> {
        match branch {
            Branch::Plus => &self.zeta_plus,
            Branch::Minus => &self.zeta_minus,
        }
    }

    /// Bilinear (not Hermitian) form `a^T B b`.
    pub fn form(&self, a: &DVector<Complex64>, b: &DVector<Complex64>) -> Complex64 {
        let n = self.n;
        let plain: Complex64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
        plain + a[n - 1] * b[n - 1] * (self.p - 2.0)
    }

    pub fn null_form(&self, branch: Branch) -> Complex64 {
        let z = self.zeta(branch);
        self.form(z, z)
    }

    /// Hermitian `|zeta|^2`.
    pub fn zeta_norm_sq(&self, branch: Branch) -> f64 {
        self.zeta(branch).iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn diagnostics(&self) -> FrameDiagnostics {
        let n = self.n;
        let en = unit(n, n - 1);
        let xi_norm = self.xi.norm();
        let mu_n = self.mu[n - 1];
        let xi_n = self.xi[n - 1];

        // distance of mu from span{xi, e_n}
        let mut u = self.xi.clone();
        u[n - 1] = 0.0;
        let u = &u / u.norm();
        let proj = &u * u.dot(&self.mu) + &en * mu_n;

        let lhs = self.s * self.s * (1.0 + (self.p - 2.0) * mu_n * mu_n);
        let rhs = self.t * self.t + xi_norm * xi_norm + (self.p - 2.0) * xi_n * xi_n;
        let assembly = [Branch::Plus, Branch::Minus]
            .iter()
            .map(|&b| {
                let sign = if b == Branch::Plus { 1.0 } else { -1.0 };
                self.zeta(b)
                    .iter()
                    .enumerate()
                    .map(|(k, z)| {
                        let want = Complex64::new(sign * self.s * self.mu[k], self.xi[k] + sign * self.t * self.eta[k]);
                        (z - want).norm()
                    })
                    .fold(0.0_f64, f64::max)
            })
            .fold(0.0_f64, f64::max);
        let null = |b| self.null_form(b).norm() / self.zeta_norm_sq(b);
        FrameDiagnostics {
            eta_unit: (self.eta.norm() - 1.0).abs(),
            mu_unit: (self.mu.norm() - 1.0).abs(),
            eta_xi: self.eta.dot(&self.xi).abs() / xi_norm,
            eta_mu: self.eta.dot(&self.mu).abs(),
            eta_en: self.eta[n - 1].abs(),
            coplanarity: (&self.mu - proj).norm(),
            angle: (self.mu.dot(&self.xi) + (self.p - 2.0) * mu_n * xi_n).abs() / xi_norm,
            s_condition: (lhs - rhs).abs() / rhs,
            assembly: assembly / self.s.max(xi_norm + self.t),
            null_plus: null(Branch::Plus),
            null_minus: null(Branch::Minus),
        }
    }
}

/// Relative defects of every frame invariant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameDiagnostics {
    pub eta_unit: f64,
    pub mu_unit: f64,
    pub eta_xi: f64,
    pub eta_mu: f64,
    pub eta_en: f64,
    pub coplanarity: f64,
    pub angle: f64,
    pub s_condition: f64,
    pub assembly: f64,
    pub null_plus: f64,
    pub null_minus: f64,
}

impl FrameDiagnostics {
    pub fn entries(&self) -> [(&'static str, f64); 11] {
        [
            ("eta_unit", self.eta_unit),
            ("mu_unit", self.mu_unit),
            ("eta_xi", self.eta_xi),
            ("eta_mu", self.eta_mu),
            ("eta_en", self.eta_en),
            ("coplanarity", self.coplanarity),
            ("angle", self.angle),
            ("s_condition", self.s_condition),
            ("assembly", self.assembly),
            ("null_plus", self.null_plus),
            ("null_minus", self.null_minus),
        ]
    }

    pub fn max(&self) -> f64 {
        self.entries().iter().fold(0.0_f64, |m, (_, v)| m.max(*v))
    }
}

/// `max_x |div(A grad omega)|` for `omega = gamma^(-1/2) e^(zeta . x)` and
/// `A = gamma B`, which equals `gamma^(1/2) |zeta^T B zeta| |e^(zeta . x)|`.
pub fn plane_wave_residual(gamma: f64, frame: &CGOFrame, branch: Branch, points: &[Vec<f64>]) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::Frame(format!("gamma = {gamma} must be positive")));
    }
    let symbol = frame.null_form(branch).norm();
    let zeta = frame.zeta(branch);
    points
        .iter()
        .map(|x| {
            if x.len() != frame.n {
                return Err(Error::Frame(format!("sample point has {} components, expected {}", x.len(), frame.n)));
            }
            let re: f64 = zeta.iter().zip(x).map(|(z, xk)| z.re * xk).sum();
            Ok(gamma.sqrt() * symbol * re.exp())
        })
        .try_fold(0.0_f64, |m, r| r.map(|r| m.max(r)))
}

/// `|e^(zeta . x)|` at `x`.
pub fn plane_wave_modulus(frame: &CGOFrame, branch: Branch, x: &[f64]) -> f64 {
    frame.zeta(branch).iter().zip(x).map(|(z, xk)| z.re * xk).sum::<f64>().exp()
}
