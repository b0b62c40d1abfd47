//! Characteristic functionals `mu^(phi) = int exp(i <x, phi>) dmu(x)` and the
//! diagnostics built on them: Monte-Carlo estimators, positive-definiteness
//! of Gram matrices, the equicontinuity modulus at zero, the Gaussian
//! functional `F(x) = exp(-sum_l <phi_l, x>^2)` with its finite-rank measure
//! on the test-function side, the Fubini identity linking the two, and the
//! constant `M = sup_u (1 - cos u) / (1 - exp(-u^2))`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::donsker::{product_cf, Innovation};
use crate::error::{Error, Result};
use crate::hermite::{BasisConfig, TestFunction};
use crate::par;
use crate::rng::stream_rng;
use crate::scale::{norm_primal, pairing, DistributionVector};

/// A characteristic functional on the modelled distribution space.
#[derive(Debug, Clone, PartialEq)]
pub enum CharFunctional {
    /// `exp(-|phi|_0^2 / 2)`.
    WhiteNoise,
    /// Point mass at `x`: `exp(i <x, phi>)`.
    Dirac(DistributionVector),
    /// `F(y) = exp(-sum_l <phi_l, y>^2)`, the functional of a finite-rank
    /// Gaussian measure on test functions. Its argument is a dual vector; a
    /// test function passed to [`CharFunctional::eval`] is read through its
    /// coefficients.
    GaussianMixtureDual(Vec<TestFunction>),
    /// `P_n^` of the scaled random walk driven by `innovation`.
    ProductIid {
        innovation: Innovation,
        n: u32,
        tail_tol: f64,
    },
    /// Sample average of `exp(i <x_i, phi>)`.
    Empirical(Vec<DistributionVector>),
}

impl CharFunctional {
    pub fn eval(&self, phi: &TestFunction) -> Result<Complex64> {
        match self {
            CharFunctional::WhiteNoise => Ok(white_noise_cf(phi)),
            CharFunctional::Dirac(x) => dirac_cf(x, phi),
            CharFunctional::GaussianMixtureDual(directions) => {
                let y = DistributionVector::new(*phi.basis(), phi.coeffs().to_vec())?;
                Ok(Complex64::new(gaussian_mixture_f(directions, &y)?, 0.0))
            }
            CharFunctional::ProductIid {
                innovation,
                n,
                tail_tol,
            } => product_cf(phi, *n, *innovation, *tail_tol),
            CharFunctional::Empirical(samples) => empirical_cf(samples, phi),
        }
    }

    pub fn label(&self) -> String {
        match self {
            CharFunctional::WhiteNoise => "white-noise".into(),
            CharFunctional::Dirac(_) => "dirac".into(),
            CharFunctional::GaussianMixtureDual(d) => format!("gaussian-mixture[{}]", d.len()),
            CharFunctional::ProductIid { innovation, n, .. } => {
                format!("product-{innovation}-n{n}")
            }
            CharFunctional::Empirical(s) => format!("empirical[{}]", s.len()),
        }
    }
}

pub fn white_noise_cf(phi: &TestFunction) -> Complex64 {
    Complex64::new((-0.5 * phi.l2_norm_sq()).exp(), 0.0)
}

pub fn dirac_cf(x: &DistributionVector, phi: &TestFunction) -> Result<Complex64> {
    let s = pairing(x, phi)?;
    Ok(Complex64::new(s.cos(), s.sin()))
}

pub fn empirical_cf(samples: &[DistributionVector], phi: &TestFunction) -> Result<Complex64> {
    if samples.is_empty() {
        return Err(Error::input(
            "empirical characteristic functional needs samples",
        ));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for x in samples {
        let s = pairing(x, phi)?;
        acc += Complex64::new(s.cos(), s.sin());
    }
    Ok(acc / samples.len() as f64)
}

fn normals(rng: &mut ChaCha8Rng, count: usize) -> Vec<f64> {
    (0..count).map(|_| rng.sample(StandardNormal)).collect()
}

/// One white-noise sample: `K` iid standard normal coefficients.
pub fn sample_white_noise(basis: BasisConfig, seed: u64) -> DistributionVector {
    white_noise_replicate(basis, seed, 0)
}

fn white_noise_replicate(basis: BasisConfig, seed: u64, replicate: u64) -> DistributionVector {
    let mut rng = stream_rng(seed, replicate);
    let coeffs = normals(&mut rng, basis.dim);
    DistributionVector::new(basis, coeffs).expect("normal draws are finite")
}

/// `count` independent white-noise samples; sample `i` uses stream `i`.
pub fn sample_white_noise_batch(
    basis: BasisConfig,
    seed: u64,
    count: usize,
) -> Vec<DistributionVector> {
    par::map_indexed(count, |i| white_noise_replicate(basis, seed, i as u64))
}

/// `F(x) = exp(-sum_l <x, phi_l>^2)`. Slice the list to get the tail
/// functional `F_{l0}`.
pub fn gaussian_mixture_f(directions: &[TestFunction], x: &DistributionVector) -> Result<f64> {
    let mut s = 0.0;
    for phi in directions {
        let p = pairing(x, phi)?;
        s += p * p;
    }
    Ok((-s).exp())
}

fn check_directions(directions: &[TestFunction]) -> Result<BasisConfig> {
    let first = directions
        .first()
        .ok_or_else(|| Error::input("direction list is empty"))?;
    let basis = *first.basis();
    if let Some(bad) = directions.iter().find(|d| d.dim() != basis.dim) {
        return Err(Error::BasisMismatch {
            left: basis.dim,
            right: bad.dim(),
        });
    }
    Ok(basis)
}

fn mixture_from_weights(
    basis: BasisConfig,
    directions: &[TestFunction],
    weights: &[f64],
) -> TestFunction {
    let mut coeffs = vec![0.0; basis.dim];
    for (phi, g) in directions.iter().zip(weights) {
        let w = std::f64::consts::SQRT_2 * g;
        for (c, d) in coeffs.iter_mut().zip(phi.coeffs()) {
            *c += w * d;
        }
    }
    TestFunction::new(basis, coeffs).expect("finite combination")
}

/// A draw `sum_l sqrt(2) g_l phi_l` from the Gaussian measure `m` on test
/// functions whose characteristic functional is [`gaussian_mixture_f`].
pub fn finite_rank_gaussian_sample(directions: &[TestFunction], seed: u64) -> Result<TestFunction> {
    finite_rank_replicate(directions, seed, 0)
}

/// Replicate `replicate` of [`finite_rank_gaussian_sample`] (stream `replicate`).
pub fn finite_rank_replicate(
    directions: &[TestFunction],
    seed: u64,
    replicate: u64,
) -> Result<TestFunction> {
    let basis = check_directions(directions)?;
    let mut rng = stream_rng(seed, replicate);
    let g = normals(&mut rng, directions.len());
    Ok(mixture_from_weights(basis, directions, &g))
}

/// Both sides of
/// `int {1 - F(x)} dmu(x) = int {1 - mu^(phi)} dm(phi)`
/// for the empirical measure of `mu_samples`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FubiniReport {
    pub lhs: f64,
    pub rhs: f64,
    pub sd_lhs: f64,
    pub sd_rhs: f64,
    pub n_mu: usize,
    pub n_m: usize,
    pub diff: f64,
    /// `5 (sd_lhs / sqrt(n_mu) + sd_rhs / sqrt(n_m))`.
    pub threshold: f64,
}

impl FubiniReport {
    pub fn agrees(&self) -> bool {
        self.diff <= self.threshold
    }

    pub fn se_lhs(&self) -> f64 {
        self.sd_lhs / (self.n_mu as f64).sqrt()
    }
}

/// Monte-Carlo evaluation of the two sides of the Fubini identity.
///
/// The left side averages `1 - F(x_i)` over the samples; the right side
/// averages `1 - Re mu_N^(phi_j)` over `n_m` draws `phi_j` from `m`, where
/// `mu_N` is the empirical measure of the same samples.
pub fn fubini_check(
    mu_samples: &[DistributionVector],
    directions: &[TestFunction],
    n_m: usize,
    seed: u64,
) -> Result<FubiniReport> {
    if mu_samples.is_empty() {
        return Err(Error::input("no samples of mu"));
    }
    if n_m == 0 {
        return Err(Error::input("N_m must be positive"));
    }
    let basis = check_directions(directions)?;
    if let Some(bad) = mu_samples.iter().find(|x| x.dim() != basis.dim) {
        return Err(Error::BasisMismatch {
            left: basis.dim,
            right: bad.dim(),
        });
    }
    let rank = directions.len();
    // projections[i * rank + l] = <x_i, phi_l>
    let projections: Vec<f64> = mu_samples
        .iter()
        .flat_map(|x| {
            directions
                .iter()
                .map(move |d| pairing(x, d).expect("dims checked"))
        })
        .collect();

    let lhs_values: Vec<f64> = projections
        .chunks(rank)
        .map(|p| -(-p.iter().map(|v| v * v).sum::<f64>()).exp_m1())
        .collect();
    let (lhs, sd_lhs) = par::mean_sd(&lhs_values);

    // <x_i, sum_l sqrt2 g_l phi_l> = sqrt2 sum_l g_l <x_i, phi_l>, with the
    // same g_l that finite_rank_replicate would draw.
    let inv_n = 1.0 / mu_samples.len() as f64;
    let rhs_values = par::map_indexed(n_m, |j| {
        let mut rng = stream_rng(seed, j as u64);
        let g: Vec<f64> = normals(&mut rng, rank)
            .into_iter()
            .map(|g| std::f64::consts::SQRT_2 * g)
            .collect();
        let mut re = 0.0;
        for p in projections.chunks(rank) {
            let s: f64 = p.iter().zip(&g).map(|(a, b)| a * b).sum();
            re += s.cos();
        }
        1.0 - re * inv_n
    });
    let (rhs, sd_rhs) = par::mean_sd(&rhs_values);
    let n_mu = mu_samples.len();
    let threshold = 5.0 * (sd_lhs / (n_mu as f64).sqrt() + sd_rhs / (n_m as f64).sqrt());
    Ok(FubiniReport {
        lhs,
        rhs,
        sd_lhs,
        sd_rhs,
        n_mu,
        n_m,
        diff: (lhs - rhs).abs(),
        threshold,
    })
}

/// Exact left side of the Fubini identity when `mu` is white noise:
/// `1 - det(I + 2G)^(-1/2)` with `G` the Gram matrix of the directions,
/// since the pairings `<x, phi_l>` are then centred Gaussian with covariance `G`.
pub fn white_noise_fubini_lhs(directions: &[TestFunction]) -> Result<f64> {
    check_directions(directions)?;
    let r = directions.len();
    let mut a = DMatrix::<f64>::identity(r, r);
    for i in 0..r {
        for j in 0..r {
            let g: f64 = directions[i]
                .coeffs()
                .iter()
                .zip(directions[j].coeffs())
                .map(|(x, y)| x * y)
                .sum();
            a[(i, j)] += 2.0 * g;
        }
    }
    Ok(1.0 - a.determinant().sqrt().recip())
}

/// `(1 - cos u) / (1 - exp(-u^2))`, with the limit `1/2` at `u = 0`.
pub fn m_ratio(u: f64) -> f64 {
    if u == 0.0 {
        return 0.5;
    }
    let half = (0.5 * u).sin();
    2.0 * half * half / -(-u * u).exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MConstant {
    pub value: f64,
    pub argmax: f64,
}

/// Search range `|u| <= M_SEARCH_LIMIT`; outside it the ratio is at most
/// `2 / (1 - exp(-900))`, which is below the peak near `pi`.
pub const M_SEARCH_LIMIT: f64 = 30.0;

/// `M = sup_u (1 - cos u) / (1 - exp(-u^2))` by a grid scan over
/// `[0, M_SEARCH_LIMIT]` (the ratio is even) and golden-section refinement
/// of the best bracket down to `tolerance` in `u`.
pub fn m_constant(tolerance: f64) -> Result<MConstant> {
    if !(tolerance > 0.0) {
        return Err(Error::input(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    let step = 1e-3;
    let count = (M_SEARCH_LIMIT / step).round() as usize;
    let (best_i, _) = (0..=count).map(|i| (i, m_ratio(i as f64 * step))).fold(
        (0, f64::NEG_INFINITY),
        |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
    );
    let mut lo = (best_i as f64 - 1.0) * step;
    let mut hi = (best_i as f64 + 1.0) * step;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut fb) = (m_ratio(a), m_ratio(b));
    while hi - lo > tolerance {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = m_ratio(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = m_ratio(a);
        }
    }
    let argmax = 0.5 * (lo + hi);
    Ok(MConstant {
        value: m_ratio(argmax),
        argmax,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsdReport {
    pub is_psd: bool,
    pub min_eigenvalue: f64,
}

/// Gram matrix `G_ab = cf(phi_a - phi_b)`.
pub fn gram_matrix(cf: &CharFunctional, probes: &[TestFunction]) -> Result<DMatrix<Complex64>> {
    let n = probes.len();
    let mut g = DMatrix::<Complex64>::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let diff = probes[a].linear_combination(1.0, &probes[b], -1.0)?;
            g[(a, b)] = cf.eval(&diff)?;
        }
    }
    Ok(g)
}

/// Positive-semidefiniteness of the Gram matrix: smallest eigenvalue of its
/// Hermitian part against `-tol`.
pub fn gram_psd_check(cf: &CharFunctional, probes: &[TestFunction], tol: f64) -> Result<PsdReport> {
    if probes.is_empty() {
        return Err(Error::input("need at least one probe"));
    }
    let g = gram_matrix(cf, probes)?;
    let hermitian = (&g + g.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(hermitian);
    let min_eigenvalue = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(PsdReport {
        is_psd: min_eigenvalue >= -tol,
        min_eigenvalue,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "equicontinuous-at-scale")]
    EquicontinuousAtScale,
    #[serde(rename = "violation")]
    Violation,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::EquicontinuousAtScale => "equicontinuous-at-scale",
            Verdict::Violation => "violation",
        }
    }
}

/// `sup |1 - mu_n^(phi)|` over a family and over probes on `|phi|_m = delta`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessReport {
    pub m: u32,
    pub delta: f64,
    pub epsilon: f64,
    pub modulus: f64,
    pub verdict: Verdict,
    pub witness_coeffs: Option<Vec<f64>>,
    pub witness_member: Option<usize>,
}

/// Probe `p`: Gaussian coefficients from stream `p`, rescaled onto the
/// sphere `|phi|_m = delta`. The direction depends only on `(seed, p)`, so
/// probes for different `(m, delta)` are rescalings of one another.
pub fn sphere_probe(basis: BasisConfig, m: u32, delta: f64, seed: u64, p: u64) -> TestFunction {
    let mut rng = stream_rng(seed, p);
    let g = TestFunction::new(basis, normals(&mut rng, basis.dim)).expect("finite draws");
    let norm = norm_primal(&g, m);
    if norm == 0.0 {
        return TestFunction::zeros(basis);
    }
    g.scaled(delta / norm)
}

/// Equicontinuity modulus at `0` on the `(m, delta)` sphere. The verdict is
/// `Violation` when the modulus reaches `epsilon`.
#[allow(clippy::too_many_arguments)]
pub fn equicontinuity_modulus(
    family: &[CharFunctional],
    basis: BasisConfig,
    m: u32,
    delta: f64,
    probes: usize,
    seed: u64,
    epsilon: f64,
) -> Result<TightnessReport> {
    if family.is_empty() {
        return Err(Error::input("empty family"));
    }
    if !(delta > 0.0) {
        return Err(Error::input(format!("delta must be positive, got {delta}")));
    }
    if probes == 0 {
        return Err(Error::input("need at least one probe"));
    }
    let per_probe = par::map_indexed(probes, |p| -> Result<(f64, usize)> {
        let phi = sphere_probe(basis, m, delta, seed, p as u64);
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, cf) in family.iter().enumerate() {
            let v = (Complex64::new(1.0, 0.0) - cf.eval(&phi)?).norm();
            if v > best.0 {
                best = (v, i);
            }
        }
        Ok(best)
    });
    let mut modulus = f64::NEG_INFINITY;
    let mut witness = (0, 0);
    for (p, r) in per_probe.into_iter().enumerate() {
        let (v, member) = r?;
        if v > modulus {
            modulus = v;
            witness = (p, member);
        }
    }
    let phi = sphere_probe(basis, m, delta, seed, witness.0 as u64);
    Ok(TightnessReport {
        m,
        delta,
        epsilon,
        modulus,
        verdict: if modulus >= epsilon {
            Verdict::Violation
        } else {
            Verdict::EquicontinuousAtScale
        },
        witness_coeffs: Some(phi.into_coeffs()),
        witness_member: Some(witness.1),
    })
}

/// Point masses at `c_n e_n` with `c_n = (2n+2)^n`, `n = 0 ..= max_n`.
pub fn drifting_dirac_family(basis: BasisConfig, indices: &[usize]) -> Result<Vec<CharFunctional>> {
    indices
        .iter()
        .map(|&n| {
            let c = BasisConfig::eigenvalue(n).powi(n as i32);
            Ok(CharFunctional::Dirac(
                DistributionVector::unit(basis, n)?.scaled(c),
            ))
        })
        .collect()
}
