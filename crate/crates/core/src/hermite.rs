//! Hermite functions, Gauss-Hermite quadrature and projection onto the
//! truncated basis.
//!
//! The orthonormal Hermite functions are
//!
//! ```text
//! e_k(t) = (2^k k! sqrt(pi))^{-1/2} H_k(t) exp(-t^2 / 2)
//! ```
//!
//! and are evaluated with the normalised recurrence
//!
//! ```text
//! e_{k+1}(t) = sqrt(2/(k+1)) t e_k(t) - sqrt(k/(k+1)) e_{k-1}(t)
//! ```
//!
//! seeded with `e_0(t) = pi^{-1/4} exp(-t^2/2)`. The Gaussian factor is kept
//! as a separate logarithmic scale while the recurrence runs, so neither the
//! polynomial part nor the exponential can overflow or flush to zero early.
//! Indices `k < MAX_INDEX` are supported for every finite `t`; values are
//! accurate to a few ulps times `sqrt(k)` for `|t| <= 60`.

use serde::{Deserialize, Serialize};

use crate::coeffs::CoeffFile;
use crate::error::{Error, Result};

/// Largest supported Hermite index (exclusive).
pub const MAX_INDEX: usize = 4096;

/// Tag of the eigenvalue convention `lambda_k = 2k + 2`.
pub const CONVENTION: &str = "lambda=2k+2";

const RESCALE_ABOVE: f64 = 1e100;
const RESCALE_LOG: f64 = 230.258_509_299_404_57; // ln(1e100)

/// pi^{-1/4}
pub(crate) const PI_M4: f64 = 0.751_125_544_464_942_5;

/// Truncation dimension `K` and Gauss-Hermite order `Q` of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisConfig {
    #[serde(rename = "K")]
    pub dim: usize,
    #[serde(rename = "Q")]
    pub quad_order: usize,
}

impl BasisConfig {
    /// Basis of dimension `dim` with the default order `Q = max(2K, 64)`.
    pub fn new(dim: usize) -> Result<Self> {
        Self::with_quadrature(dim, (2 * dim).max(64))
    }

    pub fn with_quadrature(dim: usize, quad_order: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("basis dimension K must be at least 1"));
        }
        if dim > MAX_INDEX {
            return Err(Error::Range {
                index: dim - 1,
                max: MAX_INDEX - 1,
            });
        }
        if quad_order < 2 * dim {
            return Err(Error::input(format!(
                "quadrature order Q = {quad_order} must be at least 2K = {}",
                2 * dim
            )));
        }
        if quad_order > MAX_INDEX {
            return Err(Error::Range {
                index: quad_order,
                max: MAX_INDEX,
            });
        }
        Ok(Self { dim, quad_order })
    }

    /// Eigenvalue `2k + 2` attached to `e_k`.
    #[inline]
    pub fn eigenvalue(k: usize) -> f64 {
        2.0 * k as f64 + 2.0
    }

    pub fn convention(&self) -> &'static str {
        CONVENTION
    }
}

enum Step {
    /// Unscaled value `v_k`; `e_k(t) = v_k exp(log_scale)` at this point.
    Value(usize, f64),
    /// Every unscaled quantity seen so far was multiplied by this factor.
    Rescale(f64),
}

/// Runs the scaled recurrence at `t` for `k < count` and returns the final
/// log-scale.
#[inline]
fn sweep<F: FnMut(Step)>(count: usize, t: f64, mut on: F) -> f64 {
    let mut log_scale = -0.5 * t * t;
    let mut prev = 0.0;
    let mut cur = PI_M4;
    for k in 0..count {
        on(Step::Value(k, cur));
        if k + 1 == count {
            break;
        }
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * t * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE_ABOVE {
            cur /= RESCALE_ABOVE;
            prev /= RESCALE_ABOVE;
            log_scale += RESCALE_LOG;
            on(Step::Rescale(1.0 / RESCALE_ABOVE));
        }
    }
    log_scale
}

#[inline]
fn unscale(v: f64, log_scale: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.signum() * (v.abs().ln() + log_scale).exp()
    }
}

/// The orthonormal Hermite function `e_k(t)`.
pub fn hermite_point(k: usize, t: f64) -> Result<f64> {
    if k >= MAX_INDEX {
        return Err(Error::Range {
            index: k,
            max: MAX_INDEX - 1,
        });
    }
    if !t.is_finite() {
        return Err(Error::input(format!(
            "hermite_point: non-finite argument {t}"
        )));
    }
    let mut last = 0.0;
    let log_scale = sweep(k + 1, t, |step| {
        if let Step::Value(_, v) = step {
            last = v;
        }
    });
    Ok(unscale(last, log_scale))
}

/// Fill `out[k] = e_k(t)` for `k < out.len()`.
pub fn hermite_values(t: f64, out: &mut [f64]) {
    let n = out.len();
    if n == 0 {
        return;
    }
    let mut log_scale = -0.5 * t * t;
    let mut prev = 0.0;
    let mut cur = PI_M4;
    for k in 0..n {
        out[k] = unscale(cur, log_scale);
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * t * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE_ABOVE {
            cur /= RESCALE_ABOVE;
            prev /= RESCALE_ABOVE;
            log_scale += RESCALE_LOG;
        }
    }
}

/// `sum_k coeffs[k] e_k(t)` without allocating.
pub fn hermite_series(coeffs: &[f64], t: f64) -> f64 {
    let mut acc = 0.0;
    let log_scale = sweep(coeffs.len(), t, |step| match step {
        Step::Value(k, v) => acc += coeffs[k] * v,
        Step::Rescale(f) => acc *= f,
    });
    unscale(acc, log_scale)
}

/// `sum_k |coeffs[k]| |e_k(t)|`, an upper envelope of `|sum_k c_k e_k(t)|`.
pub(crate) fn hermite_envelope(coeffs: &[f64], t: f64) -> f64 {
    let mut acc = 0.0;
    let log_scale = sweep(coeffs.len(), t, |step| match step {
        Step::Value(k, v) => acc += (coeffs[k] * v).abs(),
        Step::Rescale(f) => acc *= f,
    });
    unscale(acc, log_scale)
}

/// Gauss-Hermite rule for the weight `exp(-t^2)`.
///
/// `scaled_weights[i] = weights[i] * exp(nodes[i]^2)` integrates plain
/// functions: `int f(t) dt ~ sum_i scaled_weights[i] f(nodes[i])`. It is
/// computed directly as `1 / (Q e_{Q-1}(t_i)^2)` and stays finite even where
/// `weights[i]` underflows.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub scaled_weights: Vec<f64>,
}

impl GaussHermite {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `int f(t) dt` over the real line.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.scaled_weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }
}

/// Gauss-Hermite nodes (ascending) and weights of order `q`, exact for
/// `p(t) exp(-t^2)` with `deg p <= 2q - 1`.
pub fn gh_rule(q: usize) -> Result<GaussHermite> {
    if q == 0 {
        return Err(Error::input("Gauss-Hermite order must be at least 1"));
    }
    if q > MAX_INDEX {
        return Err(Error::Range {
            index: q,
            max: MAX_INDEX,
        });
    }
    let n = q;
    let nf = n as f64;
    // Zeros of h_n lie below sqrt(2n+1) and are more than pi / sqrt(2n+1)
    // apart, so a downward scan with half that step brackets each one alone.
    let top = (2.0 * nf + 1.0).sqrt();
    let step = 0.5 * std::f64::consts::PI / top;
    let mut roots = Vec::with_capacity(n.div_ceil(2));
    let mut scaled = Vec::with_capacity(n.div_ceil(2));
    let mut hi = top;
    let mut f_hi = top_pair(n, hi).0;
    while roots.len() < n / 2 {
        let lo = (hi - step).max(0.0);
        let f_lo = top_pair(n, lo).0;
        if f_lo == 0.0 || (f_hi != 0.0 && f_lo.signum() != f_hi.signum()) {
            let z = refine_root(n, lo, hi, f_lo);
            roots.push(z);
            scaled.push(scaled_weight(n, z));
        }
        if lo == 0.0 {
            break;
        }
        hi = lo;
        f_hi = f_lo;
    }
    debug_assert_eq!(roots.len(), n / 2);
    if n % 2 == 1 {
        roots.push(0.0);
        scaled.push(scaled_weight(n, 0.0));
    }
    let m = roots.len();
    let mut nodes = vec![0.0; n];
    let mut scaled_weights = vec![0.0; n];
    for i in 0..m {
        nodes[n - 1 - i] = roots[i];
        nodes[i] = -roots[i];
        scaled_weights[n - 1 - i] = scaled[i];
        scaled_weights[i] = scaled[i];
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let weights = nodes
        .iter()
        .zip(&scaled_weights)
        .map(|(t, w)| w * (-t * t).exp())
        .collect();
    Ok(GaussHermite {
        nodes,
        weights,
        scaled_weights,
    })
}

/// Safeguarded Newton for the single zero of h_n in `[lo, hi]`.
fn refine_root(n: usize, mut lo: f64, mut hi: f64, f_lo: f64) -> f64 {
    if f_lo == 0.0 {
        return lo;
    }
    let sign_lo = f_lo.signum();
    let mut z = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (cur, below, _) = top_pair(n, z);
        if cur == 0.0 {
            return z;
        }
        if cur.signum() == sign_lo {
            lo = z;
        } else {
            hi = z;
        }
        let newton = z - cur / ((2.0 * n as f64).sqrt() * below);
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let done = (next - z).abs() <= 1e-15 * z.abs().max(1.0);
        z = next;
        if done || hi - lo <= 1e-15 * z.abs().max(1.0) {
            break;
        }
    }
    z
}

/// `1 / (n e_{n-1}(z)^2)`, evaluated in logs.
fn scaled_weight(n: usize, z: f64) -> f64 {
    let (_, below, log_scale) = top_pair(n, z);
    (-2.0 * log_scale - (n as f64 * below * below).ln()).exp()
}

/// Scaled `(v_n, v_{n-1}, log_scale)` at `t`; the ratio is scale-free.
fn top_pair(n: usize, t: f64) -> (f64, f64, f64) {
    let mut log_scale = -0.5 * t * t;
    let mut prev = 0.0;
    let mut cur = PI_M4;
    for k in 0..n {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * t * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE_ABOVE {
            cur /= RESCALE_ABOVE;
            prev /= RESCALE_ABOVE;
            log_scale += RESCALE_LOG;
        }
    }
    (cur, prev, log_scale)
}

/// A Schwartz test function, stored as its first `K` Hermite coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    coeffs: Vec<f64>,
    basis: BasisConfig,
}

impl TestFunction {
    pub fn new(basis: BasisConfig, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.dim {
            return Err(Error::input(format!(
                "expected {} coefficients, got {}",
                basis.dim,
                coeffs.len()
            )));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::input(format!("coefficient {i} is not finite")));
        }
        Ok(Self { coeffs, basis })
    }

    /// Builds from a possibly shorter coefficient list, padding with zeros.
    pub fn padded(basis: BasisConfig, head: &[f64]) -> Result<Self> {
        if head.len() > basis.dim {
            return Err(Error::input(format!(
                "{} coefficients do not fit in dimension {}",
                head.len(),
                basis.dim
            )));
        }
        let mut coeffs = vec![0.0; basis.dim];
        coeffs[..head.len()].copy_from_slice(head);
        Self::new(basis, coeffs)
    }

    pub fn zeros(basis: BasisConfig) -> Self {
        Self {
            coeffs: vec![0.0; basis.dim],
            basis,
        }
    }

    /// The basis function `e_k`.
    pub fn unit(basis: BasisConfig, k: usize) -> Result<Self> {
        if k >= basis.dim {
            return Err(Error::Range {
                index: k,
                max: basis.dim - 1,
            });
        }
        let mut f = Self::zeros(basis);
        f.coeffs[k] = 1.0;
        Ok(f)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn basis(&self) -> &BasisConfig {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Point value `sum_k c_k e_k(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        hermite_series(&self.coeffs, t)
    }

    /// `int phi^2 dt`, via Parseval.
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// `int phi^2 dt` by Gauss-Hermite quadrature of the point values.
    pub fn quadrature_norm_sq(&self) -> Result<f64> {
        let rule = gh_rule(self.basis.quad_order)?;
        Ok(rule.integrate(|t| {
            let v = self.eval(t);
            v * v
        }))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
            basis: self.basis,
        }
    }

    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.basis.dim != other.basis.dim {
            return Err(Error::BasisMismatch {
                left: self.basis.dim,
                right: other.basis.dim,
            });
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Self::new(self.basis, coeffs)
    }

    pub fn to_coeff_file(&self) -> CoeffFile {
        CoeffFile::new(self.coeffs.clone())
    }

    pub fn from_coeff_file(file: &CoeffFile) -> Result<Self> {
        file.validate()?;
        Self::new(BasisConfig::new(file.dim)?, file.coeffs.clone())
    }
}

/// Projects `f` onto `e_0 .. e_{K-1}` with the `Q`-point Gauss-Hermite rule:
/// `c_k = sum_i w_i exp(t_i^2) f(t_i) e_k(t_i)`.
pub fn project<F: Fn(f64) -> f64>(f: F, basis: BasisConfig) -> Result<TestFunction> {
    let rule = gh_rule(basis.quad_order)?;
    let mut coeffs = vec![0.0; basis.dim];
    let mut values = vec![0.0; basis.dim];
    for (&t, &w) in rule.nodes.iter().zip(&rule.scaled_weights) {
        let fv = f(t);
        if !fv.is_finite() {
            return Err(Error::input(format!(
                "projected function is not finite at t = {t}"
            )));
        }
        hermite_values(t, &mut values);
        let wf = w * fv;
        for (c, e) in coeffs.iter_mut().zip(&values) {
            *c += wf * e;
        }
    }
    TestFunction::new(basis, coeffs)
}
