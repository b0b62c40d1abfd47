//! Scaled random-walk measures `P_n` on the distribution space and their
//! convergence to white noise.
//!
//! With iid innovations `xi_j` (mean 0, variance 1) and the step process
//! `X^(n)_t = sqrt(n) xi_[nt]`, pairing against a test function gives
//!
//! ```text
//! <X^(n), phi> = sum_j sqrt(n) xi_j a_j,     a_j = int_{j/n}^{(j+1)/n} phi(t) dt
//! P_n^(phi)    = prod_j C(sqrt(n) a_j)
//! ```
//!
//! where `C` is the characteristic function of `xi`. The index `j` runs over
//! a finite window `[j_min, j_max]` chosen so that the discarded cells carry
//! at most `tail_tol` of `sum_j n a_j^2`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::charfun::white_noise_cf;
use crate::error::{Error, Result};
use crate::hermite::{hermite_envelope, BasisConfig, TestFunction};
use crate::par;
use crate::quadrature::{gl_rule, Rule};
use crate::rng::{cell_rng, unit_f64, unit_f64_open};

/// Gauss-Legendre order used on every cell.
pub const CELL_ORDER: usize = 8;

/// Largest window (number of cells) a single call may use.
pub const MAX_CELLS: usize = 1 << 26;

/// Grid step of the window half-width search.
const WINDOW_STEP: f64 = 0.25;

/// Beyond `sqrt(2K+1) + ENVELOPE_REACH` every `e_k` is below `exp(-800)`,
/// so the envelope integral is not continued further out.
const ENVELOPE_REACH: f64 = 40.0;

/// Magnitude below which the running product switches to log form.
const PRODUCT_FLOOR: f64 = 1e-300;

/// Bound `5 / sqrt(N)` used to compare Monte-Carlo means with exact values.
pub fn mc_tolerance(samples: usize) -> f64 {
    5.0 / (samples as f64).sqrt()
}

/// An iid driving law with mean 0 and variance 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Innovation {
    /// `P(xi = 1) = P(xi = -1) = 1/2`, `C(u) = cos u`.
    Rademacher,
    /// Standard normal, `C(u) = exp(-u^2/2)`.
    Gaussian,
    /// Uniform on `[-sqrt 3, sqrt 3]`, `C(u) = sin(sqrt3 u) / (sqrt3 u)`.
    Uniform,
}

pub fn builtin_innovations() -> Vec<Innovation> {
    vec![
        Innovation::Rademacher,
        Innovation::Gaussian,
        Innovation::Uniform,
    ]
}

impl Innovation {
    pub fn name(&self) -> &'static str {
        match self {
            Innovation::Rademacher => "rademacher",
            Innovation::Gaussian => "gaussian",
            Innovation::Uniform => "uniform",
        }
    }

    /// Characteristic function `E exp(i u xi)`.
    pub fn cf(&self, u: f64) -> Complex64 {
        let re = match self {
            Innovation::Rademacher => u.cos(),
            Innovation::Gaussian => (-0.5 * u * u).exp(),
            Innovation::Uniform => {
                let v = 3f64.sqrt() * u;
                if v.abs() < 1e-8 {
                    1.0 - v * v / 6.0
                } else {
                    v.sin() / v
                }
            }
        };
        Complex64::new(re, 0.0)
    }

    pub fn is_symmetric(&self) -> bool {
        true
    }

    pub fn moment2(&self) -> f64 {
        1.0
    }

    pub fn moment4(&self) -> f64 {
        match self {
            Innovation::Rademacher => 1.0,
            Innovation::Gaussian => 3.0,
            Innovation::Uniform => 1.8,
        }
    }

    /// Deterministic transform of two uniform words into one draw.
    pub fn draw(&self, w0: u64, w1: u64) -> f64 {
        match self {
            Innovation::Rademacher => {
                if w0 >> 63 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Innovation::Gaussian => {
                let r = (-2.0 * unit_f64_open(w0).ln()).sqrt();
                r * (std::f64::consts::TAU * unit_f64(w1)).cos()
            }
            Innovation::Uniform => 3f64.sqrt() * (2.0 * unit_f64(w0) - 1.0),
        }
    }

    /// One draw, always consuming exactly two `u64`s.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        let w0 = rng.next_u64();
        let w1 = rng.next_u64();
        self.draw(w0, w1)
    }
}

impl fmt::Display for Innovation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Innovation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        builtin_innovations()
            .into_iter()
            .find(|inn| inn.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::UnknownInnovation(s.to_string()))
    }
}

/// Cell integrals `a_j` over the window `j_min ..= j_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellAverages {
    pub n: u32,
    pub j_min: i64,
    pub j_max: i64,
    pub values: Vec<f64>,
    /// Upper bound on `sum n a_j^2` over the discarded cells.
    pub tail_bound: f64,
}

impl CellAverages {
    /// `sum_j n a_j^2`, the variance of `<X^(n), phi>`.
    pub fn energy(&self) -> f64 {
        self.n as f64 * self.values.iter().map(|a| a * a).sum::<f64>()
    }

    pub fn get(&self, j: i64) -> f64 {
        if j < self.j_min || j > self.j_max {
            0.0
        } else {
            self.values[(j - self.j_min) as usize]
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Half-width `T` with `2 int_T^inf E(t)^2 dt <= tail_tol`, where
/// `E = sum_k |c_k| |e_k|` bounds `|phi|` pointwise. Returns `(T, tail)`.
fn window_half_width(phi: &TestFunction, tail_tol: f64) -> Result<(f64, f64)> {
    let rule = gl_rule(16)?;
    let reach = (2.0 * phi.dim() as f64 + 1.0).sqrt() + ENVELOPE_REACH;
    let steps = (reach / WINDOW_STEP).ceil() as usize;
    let pieces: Vec<f64> = (0..steps)
        .map(|s| {
            let a = s as f64 * WINDOW_STEP;
            rule.integrate(
                |t| {
                    let e = hermite_envelope(phi.coeffs(), t);
                    e * e
                },
                a,
                a + WINDOW_STEP,
            )
        })
        .collect();
    let mut tail = 0.0;
    let mut best = None;
    for s in (1..=steps).rev() {
        if 2.0 * tail > tail_tol {
            break;
        }
        best = Some((s as f64 * WINDOW_STEP, 2.0 * tail));
        tail += pieces[s - 1];
    }
    best.ok_or_else(|| {
        Error::WindowCap(format!(
            "tail_tol = {tail_tol:e} not reachable within |t| <= {:.2}",
            steps as f64 * WINDOW_STEP
        ))
    })
}

/// `a_j = int_{j/n}^{(j+1)/n} phi(t) dt` by per-cell Gauss-Legendre of order
/// [`CELL_ORDER`], on a window whose discarded energy is at most `tail_tol`.
pub fn cell_averages(phi: &TestFunction, n: u32, tail_tol: f64) -> Result<CellAverages> {
    if n == 0 {
        return Err(Error::input("scale n must be at least 1"));
    }
    if !(tail_tol > 0.0) || !tail_tol.is_finite() {
        return Err(Error::input(format!(
            "tail_tol must be positive, got {tail_tol}"
        )));
    }
    let (half, tail_bound) = window_half_width(phi, tail_tol)?;
    let cells_per_side = (half * n as f64).ceil();
    if 2.0 * cells_per_side > MAX_CELLS as f64 {
        return Err(Error::WindowCap(format!(
            "{} cells needed for n = {n}, cap is {MAX_CELLS}",
            2.0 * cells_per_side
        )));
    }
    let j_max = cells_per_side as i64 - 1;
    let j_min = -(cells_per_side as i64);
    let rule = gl_rule(CELL_ORDER)?;
    let width = 1.0 / n as f64;
    let values = par::map_indexed((j_max - j_min + 1) as usize, |i| {
        let j = j_min + i as i64;
        let a = j as f64 * width;
        cell_integral(&rule, |t| phi.eval(t), a, a + width)
    });
    Ok(CellAverages {
        n,
        j_min,
        j_max,
        values,
        tail_bound,
    })
}

/// `int_a^b f` with the given Gauss-Legendre rule.
pub fn cell_integral<F: Fn(f64) -> f64>(rule: &Rule, f: F, a: f64, b: f64) -> f64 {
    rule.integrate(f, a, b)
}

/// `prod_j C(sqrt(n) a_j)` over precomputed cells.
pub fn product_from_cells(cells: &CellAverages, innovation: Innovation) -> Complex64 {
    let root_n = (cells.n as f64).sqrt();
    let mut acc = Complex64::new(1.0, 0.0);
    // (log magnitude, accumulated phase) once the product is tiny.
    let mut log_form: Option<(f64, f64)> = None;
    for &a in &cells.values {
        let f = innovation.cf(root_n * a);
        if f.re == 0.0 && f.im == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        match log_form.as_mut() {
            Some((mag, phase)) => {
                *mag += f.norm().ln();
                *phase += f.arg();
            }
            None => {
                let next = acc * f;
                if next.norm() < PRODUCT_FLOOR {
                    log_form = Some((acc.norm().ln() + f.norm().ln(), acc.arg() + f.arg()));
                } else {
                    acc = next;
                }
            }
        }
    }
    match log_form {
        Some((mag, phase)) => Complex64::from_polar(mag.exp(), phase),
        None => acc,
    }
}

/// Characteristic functional `P_n^(phi)` of the scaled walk.
pub fn product_cf(
    phi: &TestFunction,
    n: u32,
    innovation: Innovation,
    tail_tol: f64,
) -> Result<Complex64> {
    let cells = cell_averages(phi, n, tail_tol)?;
    Ok(product_from_cells(&cells, innovation))
}

/// `sum_j sqrt(n) xi_j a_j` for one replicate; `xi_j` is read from the
/// counter stream `(seed, replicate, j)`.
pub fn pairing_draw(
    cells: &CellAverages,
    innovation: Innovation,
    seed: u64,
    replicate: u64,
) -> f64 {
    let mut rng = cell_rng(seed, replicate, cells.j_min);
    let root_n = (cells.n as f64).sqrt();
    let mut acc = 0.0;
    for &a in &cells.values {
        acc += innovation.sample(&mut rng) * a;
    }
    root_n * acc
}

/// Replicates `0 .. count` of [`pairing_draw`], in replicate order.
pub fn pairing_draws(
    cells: &CellAverages,
    innovation: Innovation,
    seed: u64,
    count: usize,
) -> Vec<f64> {
    par::map_indexed(count, |r| pairing_draw(cells, innovation, seed, r as u64))
}

/// One Monte-Carlo draw of `<X^(n), phi>` (replicate 0).
pub fn sample_pairing(
    phi: &TestFunction,
    n: u32,
    innovation: Innovation,
    seed: u64,
    tail_tol: f64,
) -> Result<f64> {
    let cells = cell_averages(phi, n, tail_tol)?;
    Ok(pairing_draw(&cells, innovation, seed, 0))
}

/// `(1/N) sum exp(i s)` over the draws, summed in order.
pub fn empirical_cf_of_draws(draws: &[f64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &s in draws {
        acc += Complex64::new(s.cos(), s.sin());
    }
    acc / draws.len() as f64
}

/// A test function with a label, as used in experiment tables.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTestFunction {
    pub id: String,
    pub phi: TestFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiEcho {
    pub id: String,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub innovation: Innovation,
    pub n_schedule: Vec<u32>,
    pub n_mc: usize,
    pub seed: u64,
    pub tail_tol: f64,
    pub basis: BasisConfig,
    pub phis: Vec<PhiEcho>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub phi_id: String,
    pub n: u32,
    pub analytic_cf: Complex64,
    pub wn_cf: f64,
    pub analytic_err: f64,
    pub empirical_cf: Complex64,
    pub empirical_err: f64,
    /// `|empirical_cf - analytic_cf|`.
    pub empirical_vs_analytic: f64,
    pub mc_tolerance: f64,
    pub energy: f64,
    pub cells: usize,
    pub tail_bound: f64,
    pub n_mc: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<ExperimentRow>,
}

pub const EXPERIMENT_CSV_HEADER: &str =
    "phi_id,n,analytic_cf_re,analytic_cf_im,wn_cf,analytic_err,empirical_err,N_mc,seed";

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(EXPERIMENT_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.phi_id,
                r.n,
                crate::csv::real(r.analytic_cf.re),
                crate::csv::real(r.analytic_cf.im),
                crate::csv::real(r.wn_cf),
                crate::csv::real(r.analytic_err),
                crate::csv::real(r.empirical_err),
                r.n_mc,
                r.seed
            ));
        }
        out
    }

    pub fn rows_for<'a>(&'a self, phi_id: &'a str) -> impl Iterator<Item = &'a ExperimentRow> + 'a {
        self.rows.iter().filter(move |r| r.phi_id == phi_id)
    }
}

/// Runs every `(phi, n)` pair: exact `P_n^(phi)`, its distance to the white
/// noise value, and a Monte-Carlo estimate from `n_mc` replicates.
pub fn convergence_experiment(
    phis: &[NamedTestFunction],
    n_schedule: &[u32],
    innovation: Innovation,
    n_mc: usize,
    seed: u64,
    tail_tol: f64,
) -> Result<ExperimentReport> {
    if phis.is_empty() {
        return Err(Error::input("no test functions given"));
    }
    if n_schedule.is_empty() {
        return Err(Error::input("empty n schedule"));
    }
    if n_schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::input("n schedule must be strictly increasing"));
    }
    if n_mc == 0 {
        return Err(Error::input("N_mc must be positive"));
    }
    let basis = *phis[0].phi.basis();
    if let Some(bad) = phis.iter().find(|p| p.phi.dim() != basis.dim) {
        return Err(Error::BasisMismatch {
            left: basis.dim,
            right: bad.phi.dim(),
        });
    }
    let mut rows = Vec::with_capacity(phis.len() * n_schedule.len());
    for named in phis {
        let wn = white_noise_cf(&named.phi).re;
        for &n in n_schedule {
            let cells = cell_averages(&named.phi, n, tail_tol)?;
            let analytic = product_from_cells(&cells, innovation);
            let draws = pairing_draws(&cells, innovation, seed, n_mc);
            let empirical = empirical_cf_of_draws(&draws);
            rows.push(ExperimentRow {
                phi_id: named.id.clone(),
                n,
                analytic_cf: analytic,
                wn_cf: wn,
                analytic_err: (analytic - wn).norm(),
                empirical_cf: empirical,
                empirical_err: (empirical - wn).norm(),
                empirical_vs_analytic: (empirical - analytic).norm(),
                mc_tolerance: mc_tolerance(n_mc),
                energy: cells.energy(),
                cells: cells.len(),
                tail_bound: cells.tail_bound,
                n_mc,
                seed,
            });
        }
    }
    Ok(ExperimentReport {
        config: ExperimentConfig {
            innovation,
            n_schedule: n_schedule.to_vec(),
            n_mc,
            seed,
            tail_tol,
            basis,
            phis: phis
                .iter()
                .map(|p| PhiEcho {
                    id: p.id.clone(),
                    coeffs: p.phi.coeffs().to_vec(),
                })
                .collect(),
        },
        rows,
    })
}

/// Least-squares slope of `log err` against `log n`.
pub fn rate_estimate(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::input("rate estimate needs at least 3 points"));
    }
    if let Some((n, e)) = points.iter().find(|(n, e)| !(*e > 0.0) || !(*n > 0.0)) {
        return Err(Error::input(format!(
            "nonpositive entry (n = {n}, err = {e})"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|(n, _)| n.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, e)| e.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::input("all n values coincide"));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn e(k: usize, dim: usize) -> TestFunction {
        TestFunction::unit(BasisConfig::new(dim).unwrap(), k).unwrap()
    }

    #[test]
    fn innovation_cf_examples() {
        assert!((Innovation::Rademacher.cf(PI).re + 1.0).abs() < 1e-15);
        assert_eq!(Innovation::Gaussian.cf(1.0).re, (-0.5f64).exp());
        assert_eq!(Innovation::Uniform.cf(0.0).re, 1.0);
        for inn in builtin_innovations() {
            assert_eq!(inn.cf(0.0).re, 1.0);
            for u in [0.3, 1.0, 7.5, 100.0] {
                assert!(inn.cf(u).norm() <= 1.0);
                assert_eq!(inn.cf(u), inn.cf(-u));
            }
        }
        let u = 2e-9;
        let v = 3f64.sqrt() * u;
        assert!((Innovation::Uniform.cf(u).re - v.sin() / v).abs() < 1e-15);
    }

    #[test]
    fn innovation_names() {
        assert_eq!(
            "gaussian".parse::<Innovation>().unwrap(),
            Innovation::Gaussian
        );
        assert_eq!(
            "Rademacher".parse::<Innovation>().unwrap(),
            Innovation::Rademacher
        );
        let err = "cauchy".parse::<Innovation>().unwrap_err();
        assert!(err.to_string().contains("unknown innovation"));
    }

    #[test]
    fn innovation_moments_by_monte_carlo() {
        let n = 100_000;
        for inn in builtin_innovations() {
            let mut rng = crate::rng::stream_rng(11, 0);
            let xs: Vec<f64> = (0..n).map(|_| inn.sample(&mut rng)).collect();
            let (mean, sd) = par::mean_sd(&xs);
            assert!(mean.abs() < mc_tolerance(n), "{inn}: mean {mean}");
            let m2 = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
            // sd of xi^2 is sqrt(moment4 - 1)
            assert!(
                (m2 - inn.moment2()).abs()
                    < 5.0 * (inn.moment4() - 1.0).sqrt() / (n as f64).sqrt() + 1e-12,
                "{inn}: m2 {m2}"
            );
            assert!((sd - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn cell_integral_against_erf() {
        let rule = gl_rule(CELL_ORDER).unwrap();
        let a0 = cell_integral(&rule, |t| (-t * t).exp(), 0.0, 1.0);
        let want = PI.sqrt() / 2.0 * statrs::function::erf::erf(1.0);
        assert!((a0 - want).abs() < 1e-10, "{a0} vs {want}");
        assert!((a0 - 0.746_824_132_812_427).abs() < 1e-10);
    }

    #[test]
    fn cell_averages_of_projected_gaussian() {
        let basis = BasisConfig::new(48).unwrap();
        let phi = crate::hermite::project(|t| (-t * t).exp(), basis).unwrap();
        let cells = cell_averages(&phi, 1, 1e-12).unwrap();
        let want = PI.sqrt() / 2.0 * statrs::function::erf::erf(1.0);
        assert!((cells.get(0) - want).abs() < 1e-8);
        assert!((cells.get(-1) - want).abs() < 1e-8);
    }

    #[test]
    fn cell_averages_basic_shapes() {
        let zero = TestFunction::zeros(BasisConfig::new(3).unwrap());
        let cells = cell_averages(&zero, 4, 1e-12).unwrap();
        assert!(cells.values.iter().all(|a| *a == 0.0));
        assert!(!cells.is_empty());

        let odd = cell_averages(&e(1, 4), 1, 1e-12).unwrap();
        assert!((odd.get(-1) + odd.get(0)).abs() < 1e-15);
        assert!(odd.get(0) > 0.0);
        assert_eq!(odd.j_min, -odd.j_max - 1);
    }

    #[test]
    fn cell_averages_validation() {
        let phi = e(0, 2);
        assert!(cell_averages(&phi, 0, 1e-12).is_err());
        assert!(cell_averages(&phi, 1, 0.0).is_err());
        assert!(cell_averages(&phi, 1, f64::NAN).is_err());
        assert!(matches!(
            cell_averages(&phi, u32::MAX, 1e-12),
            Err(Error::WindowCap(_))
        ));
    }

    #[test]
    fn tail_bound_honoured() {
        let phi = TestFunction::padded(
            BasisConfig::new(6).unwrap(),
            &[1.0, 0.0, -0.5, 0.0, 0.0, 0.25],
        )
        .unwrap();
        for tol in [1e-4, 1e-8, 1e-12] {
            let cells = cell_averages(&phi, 8, tol).unwrap();
            assert!(cells.tail_bound <= tol);
            // What was left out, measured on a much wider window.
            let wide = cell_averages(&phi, 8, 1e-30).unwrap();
            let dropped: f64 = (wide.j_min..=wide.j_max)
                .filter(|j| *j < cells.j_min || *j > cells.j_max)
                .map(|j| 8.0 * wide.get(j).powi(2))
                .sum();
            assert!(
                dropped <= cells.tail_bound + 1e-300,
                "tol {tol}: dropped {dropped}"
            );
        }
    }

    #[test]
    fn contraction_and_riemann_consistency() {
        let phi =
            TestFunction::padded(BasisConfig::new(4).unwrap(), &[0.8, -0.3, 0.4, 0.1]).unwrap();
        let norm = phi.l2_norm_sq();
        let mut last_defect = f64::INFINITY;
        for n in [1, 2, 4, 16, 64, 128] {
            let c = cell_averages(&phi, n, 1e-14).unwrap();
            assert!(c.energy() <= norm + 1e-10, "n = {n}");
            let defect = norm - c.energy();
            assert!(defect < last_defect);
            if n == 128 {
                assert!(last_defect / defect >= 2.0);
            }
            last_defect = defect;
        }
    }

    #[test]
    fn product_cf_examples() {
        let zero = TestFunction::zeros(BasisConfig::new(2).unwrap());
        assert_eq!(
            product_cf(&zero, 16, Innovation::Rademacher, 1e-12).unwrap(),
            Complex64::new(1.0, 0.0)
        );

        let phi = TestFunction::padded(BasisConfig::new(3).unwrap(), &[0.7, 0.2, -0.4]).unwrap();
        for n in [1, 5, 64] {
            let cells = cell_averages(&phi, n, 1e-13).unwrap();
            let got = product_from_cells(&cells, Innovation::Gaussian);
            let closed = (-0.5 * cells.energy()).exp();
            assert!((got.re - closed).abs() < 1e-12 && got.im == 0.0);
        }

        // A single nonzero cell: the product is one factor C(u).
        let u = 2.2;
        let single = CellAverages {
            n: 1,
            j_min: 0,
            j_max: 0,
            values: vec![u],
            tail_bound: 0.0,
        };
        assert_eq!(
            product_from_cells(&single, Innovation::Rademacher).re,
            u.cos()
        );
    }

    #[test]
    fn rademacher_against_closed_form_cells() {
        // Cell integrals of e_0 from erf, product of cos in 30-digit arithmetic.
        let got = product_cf(&e(0, 1), 16, Innovation::Rademacher, 1e-13).unwrap();
        assert!(
            (got.re - 0.605_311_828_388_362_11).abs() < 1e-10,
            "{}",
            got.re
        );
    }

    #[test]
    fn underflow_guard() {
        // 10^4 factors cos(3) ~ -0.99 and then tiny gaussian ones.
        let values = vec![3.0; 200_000];
        let cells = CellAverages {
            n: 1,
            j_min: 0,
            j_max: 199_999,
            values,
            tail_bound: 0.0,
        };
        let p = product_from_cells(&cells, Innovation::Rademacher);
        assert!(p.re.is_finite() && p.re.abs() < 1e-300);
        let log_mag = 200_000.0 * 3f64.cos().abs().ln();
        assert!(log_mag < -700.0);

        let values = vec![1.0; 2000];
        let cells = CellAverages {
            n: 1,
            j_min: 0,
            j_max: 1999,
            values,
            tail_bound: 0.0,
        };
        let p = product_from_cells(&cells, Innovation::Gaussian);
        assert_eq!(p.re, 0.0); // exp(-1000) underflows, but never NaN
        assert!(!p.re.is_nan());
    }

    #[test]
    fn rademacher_sign_needs_large_arguments() {
        let phi = TestFunction::padded(BasisConfig::new(3).unwrap(), &[4.0, 0.0, 3.0]).unwrap();
        for n in [1, 2, 3] {
            let cells = cell_averages(&phi, n, 1e-12).unwrap();
            let p = product_from_cells(&cells, Innovation::Rademacher);
            if p.re < 0.0 {
                let root_n = (n as f64).sqrt();
                assert!(cells.values.iter().any(|a| (root_n * a).abs() > PI / 2.0));
            }
        }
    }

    #[test]
    fn sample_pairing_moments() {
        let zero = TestFunction::zeros(BasisConfig::new(2).unwrap());
        assert_eq!(
            sample_pairing(&zero, 4, Innovation::Gaussian, 1, 1e-12).unwrap(),
            0.0
        );

        let phi = e(0, 2);
        let cells = cell_averages(&phi, 4, 1e-12).unwrap();
        let n_draws = 100_000;
        for inn in builtin_innovations() {
            let draws = pairing_draws(&cells, inn, 5, n_draws);
            let (mean, sd) = par::mean_sd(&draws);
            let var = cells.energy();
            assert!(mean.abs() < 5.0 * var.sqrt() / (n_draws as f64).sqrt());
            let rel = (sd * sd - var).abs() / var;
            assert!(
                rel < 5.0 * (2.0 / n_draws as f64).sqrt() * inn.moment4().max(1.0),
                "{inn}: rel {rel}"
            );
        }
        assert_eq!(
            draw_single(&cells),
            sample_pairing(&phi, 4, Innovation::Uniform, 9, 1e-12).unwrap()
        );
    }

    fn draw_single(cells: &CellAverages) -> f64 {
        pairing_draw(cells, Innovation::Uniform, 9, 0)
    }

    #[test]
    fn shared_cells_across_windows() {
        // Same (seed, replicate, j) gives the same xi_j whatever the window.
        let narrow = CellAverages {
            n: 1,
            j_min: -1,
            j_max: 0,
            values: vec![0.0, 1.0],
            tail_bound: 0.0,
        };
        let wide = CellAverages {
            n: 1,
            j_min: -5,
            j_max: 4,
            values: {
                let mut v = vec![0.0; 10];
                v[5] = 1.0;
                v
            },
            tail_bound: 0.0,
        };
        for inn in builtin_innovations() {
            assert_eq!(
                pairing_draw(&narrow, inn, 3, 17),
                pairing_draw(&wide, inn, 3, 17)
            );
        }
    }

    #[test]
    fn rate_estimate_synthetic() {
        let pts: Vec<(f64, f64)> = [16.0, 64.0, 256.0, 1024.0]
            .iter()
            .map(|&n| (n, 3.0 / n))
            .collect();
        assert!((rate_estimate(&pts).unwrap() + 1.0).abs() < 1e-9);
        let pts: Vec<(f64, f64)> = [2.0, 4.0, 8.0]
            .iter()
            .map(|&n| (n, 0.5 / (n * n)))
            .collect();
        assert!((rate_estimate(&pts).unwrap() + 2.0).abs() < 1e-9);
        assert!(rate_estimate(&pts[..2]).is_err());
        assert!(rate_estimate(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
    }

    #[test]
    fn experiment_validation() {
        let phis = vec![NamedTestFunction {
            id: "e0".into(),
            phi: e(0, 2),
        }];
        let run = |sched: &[u32], n_mc| {
            convergence_experiment(&phis, sched, Innovation::Gaussian, n_mc, 1, 1e-12)
        };
        assert!(run(&[], 10).is_err());
        assert!(run(&[4, 4], 10).is_err());
        assert!(run(&[4], 0).is_err());
        assert!(convergence_experiment(&[], &[4], Innovation::Gaussian, 10, 1, 1e-12).is_err());
    }

    #[test]
    fn experiment_gaussian_and_zero_columns() {
        let basis = BasisConfig::new(3).unwrap();
        let phis = vec![
            NamedTestFunction {
                id: "zero".into(),
                phi: TestFunction::zeros(basis),
            },
            NamedTestFunction {
                id: "mix".into(),
                phi: TestFunction::padded(basis, &[0.6, 0.0, 0.5]).unwrap(),
            },
        ];
        let report = convergence_experiment(
            &phis,
            &[8, 16, 32, 64],
            Innovation::Gaussian,
            2000,
            3,
            1e-13,
        )
        .unwrap();
        for r in report.rows_for("zero") {
            assert_eq!(r.analytic_err, 0.0);
            assert_eq!(r.empirical_err, 0.0);
        }
        let mix: Vec<_> = report.rows_for("mix").collect();
        let norm = phis[1].phi.l2_norm_sq();
        for w in mix.windows(2) {
            assert!(w[1].analytic_err < w[0].analytic_err);
        }
        for r in &mix {
            let closed = ((-0.5 * r.energy).exp() - (-0.5 * norm).exp()).abs();
            assert!((r.analytic_err - closed).abs() < 1e-12);
            assert!(r.empirical_vs_analytic <= r.mc_tolerance);
        }
        let csv = report.to_csv();
        assert!(csv.starts_with(EXPERIMENT_CSV_HEADER));
        assert_eq!(csv.lines().count(), 1 + 8);
    }
}
