//! The dual Hilbert scale `H_{-n}`: weighted norms, the canonical pairing,
//! balls `B_m(r)`, the embeddings `H_{-k} -> H_{-n}` and the hemicompact
//! exhaustion `K_n = i_n(B_n(r_n))` with `r_n = n`.
//!
//! All embeddings are diagonal in the Hermite basis with singular values
//! `(2j+2)^{-(n-k)}`, so every operator norm is `2^{-(n-k)} <= 1` and the
//! schedule `r_n = n` already satisfies `i_{k,n}(B_k(k)) ⊂ B_n(n)` for all
//! `k <= n`. A family bounded in `H_{-m}` lands in a compact subset of
//! `H_{-(m+2)}` because `i_{m,m+2}` has square-summable singular values; at
//! finite `K` that is visible only through [`singular_values`].

use rayon::prelude::*;
use serde::Serialize;

use crate::coeffs::CoeffFile;
use crate::error::{Error, Result};
use crate::hermite::{BasisConfig, TestFunction};

/// Search bound for [`exhaustion_index`].
pub const EXHAUSTION_SEARCH_MAX: usize = 4096;

/// A tempered distribution, stored as dual Hermite coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionVector {
    coeffs: Vec<f64>,
    basis: BasisConfig,
}

impl DistributionVector {
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

    pub fn unit(basis: BasisConfig, k: usize) -> Result<Self> {
        if k >= basis.dim {
            return Err(Error::Range {
                index: k,
                max: basis.dim - 1,
            });
        }
        let mut x = Self::zeros(basis);
        x.coeffs[k] = 1.0;
        Ok(x)
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

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
            basis: self.basis,
        }
    }

    /// Checks that `|x|_{-p}` does not increase over `p = 0..=max_level`.
    pub fn check_invariants(&self, max_level: u32) -> Result<()> {
        let mut last = f64::INFINITY;
        for p in 0..=max_level {
            let n = norm_dual(self, p);
            if n > last {
                return Err(Error::input(format!(
                    "|x|_-{p} = {n} exceeds |x|_-{} = {last}",
                    p - 1
                )));
            }
            last = n;
        }
        Ok(())
    }

    pub fn to_coeff_file(&self) -> CoeffFile {
        CoeffFile::new(self.coeffs.clone())
    }

    pub fn from_coeff_file(file: &CoeffFile) -> Result<Self> {
        file.validate()?;
        Self::new(BasisConfig::new(file.dim)?, file.coeffs.clone())
    }
}

/// Closed ball `B_m(r) = { y in H_{-m} : |y|_{-m} <= r }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ball {
    pub level: u32,
    pub radius: f64,
}

impl Ball {
    pub fn new(level: u32, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::input(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Self { level, radius })
    }

    /// The exhaustion set `K_n = B_n(r_n)`.
    pub fn exhaustion(n: u32) -> Result<Self> {
        Self::new(n, exhaustion_radius(n)?)
    }

    pub fn contains(&self, x: &DistributionVector) -> bool {
        ball_contains(self, x)
    }
}

#[inline]
fn weighted_norm(coeffs: &[f64], p: i32) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let y = c * BasisConfig::eigenvalue(k).powi(p);
            y * y
        })
        .sum::<f64>()
        .sqrt()
}

/// `|phi|_p = (sum_k (2k+2)^{2p} c_k^2)^{1/2}`.
pub fn norm_primal(phi: &TestFunction, p: u32) -> f64 {
    weighted_norm(phi.coeffs(), p as i32)
}

/// `|x|_{-p} = (sum_k (2k+2)^{-2p} x_k^2)^{1/2}`.
pub fn norm_dual(x: &DistributionVector, p: u32) -> f64 {
    // Dividing by lambda^p (rather than multiplying by lambda^{-p}) keeps
    // the k = 0 term an exact power-of-two rescaling across levels.
    x.coeffs()
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let y = c / BasisConfig::eigenvalue(k).powi(p as i32);
            y * y
        })
        .sum::<f64>()
        .sqrt()
}

/// `<x, phi> = sum_k x_k c_k`.
pub fn pairing(x: &DistributionVector, phi: &TestFunction) -> Result<f64> {
    if x.dim() != phi.dim() {
        return Err(Error::BasisMismatch {
            left: x.dim(),
            right: phi.dim(),
        });
    }
    Ok(x.coeffs()
        .iter()
        .zip(phi.coeffs())
        .map(|(a, b)| a * b)
        .sum())
}

pub fn ball_contains(ball: &Ball, x: &DistributionVector) -> bool {
    norm_dual(x, ball.level) <= ball.radius
}

/// Operator norm of the coefficient identity `H_{-k} -> H_{-n}`.
pub fn embedding_norm(k: u32, n: u32) -> Result<f64> {
    if n < k {
        return Err(Error::input(format!(
            "embedding requires n >= k, got k = {k}, n = {n}"
        )));
    }
    Ok(0.5f64.powi((n - k) as i32))
}

/// Singular values `(2j+2)^{-(n-k)}` of `i_{k,n}` for `j < dim`.
pub fn singular_values(k: u32, n: u32, dim: usize) -> Result<Vec<f64>> {
    if n < k {
        return Err(Error::input(format!(
            "embedding requires n >= k, got k = {k}, n = {n}"
        )));
    }
    Ok((0..dim)
        .map(|j| BasisConfig::eigenvalue(j).powi(-((n - k) as i32)))
        .collect())
}

/// `r_n = n`; verifies `|i_{k,n}| * k <= r_n` for every `1 <= k <= n`.
pub fn exhaustion_radius(n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::input("exhaustion levels start at n = 1"));
    }
    let r = n as f64;
    for k in 1..=n {
        let need = embedding_norm(k, n)? * k as f64;
        debug_assert!(need <= r, "i_{{{k},{n}}}(B_{k}({k})) escapes B_{n}({r})");
    }
    Ok(r)
}

/// Least `n >= 1` with `x in K_n`, or `None` past [`EXHAUSTION_SEARCH_MAX`].
pub fn exhaustion_index(x: &DistributionVector) -> Option<u32> {
    (1..=EXHAUSTION_SEARCH_MAX as u32).find(|&n| norm_dual(x, n) <= n as f64)
}

/// `sup_x |x|_{-m}` over a nonempty family.
pub fn bound_witness(family: &[DistributionVector], m: u32) -> Result<f64> {
    if family.is_empty() {
        return Err(Error::input("bound_witness needs a nonempty family"));
    }
    Ok(family
        .par_iter()
        .map(|x| norm_dual(x, m))
        .reduce(|| 0.0, f64::max))
}

/// The level at which a family bounded in `H_{-m}` is relatively compact.
pub fn compact_level(m: u32) -> u32 {
    m + 2
}

/// One row of an exhaustion report: `(n, r_n, #{x in K_n})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExhaustionRow {
    pub n: u32,
    pub r_n: f64,
    pub member_count: usize,
}

pub fn exhaustion_table(
    samples: &[DistributionVector],
    max_level: u32,
) -> Result<Vec<ExhaustionRow>> {
    (1..=max_level)
        .map(|n| {
            let ball = Ball::exhaustion(n)?;
            let member_count = samples.par_iter().filter(|x| ball.contains(x)).count();
            Ok(ExhaustionRow {
                n,
                r_n: ball.radius,
                member_count,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn basis(k: usize) -> BasisConfig {
        BasisConfig::new(k).unwrap()
    }

    #[test]
    fn primal_norm_examples() {
        let b = basis(4);
        assert_eq!(norm_primal(&TestFunction::unit(b, 0).unwrap(), 1), 2.0);
        assert_eq!(norm_primal(&TestFunction::unit(b, 1).unwrap(), 2), 16.0);
        let phi = TestFunction::padded(b, &[3.0, 4.0]).unwrap();
        assert_eq!(norm_primal(&phi, 0), 5.0);
        assert_eq!(norm_primal(&phi, 0), phi.l2_norm_sq().sqrt());
    }

    #[test]
    fn dual_norm_examples() {
        let b = basis(4);
        assert_eq!(norm_dual(&DistributionVector::unit(b, 0).unwrap(), 1), 0.5);
        assert_eq!(
            norm_dual(&DistributionVector::unit(b, 1).unwrap(), 2),
            1.0 / 16.0
        );
        let x = DistributionVector::padded(b, &[0.0, 3.0, 4.0]).unwrap();
        assert_eq!(norm_dual(&x, 0), 5.0);
    }

    #[test]
    fn pairing_examples() {
        let b = basis(4);
        let x0 = DistributionVector::unit(b, 0).unwrap();
        let f0 = TestFunction::unit(b, 0).unwrap();
        let f1 = TestFunction::unit(b, 1).unwrap();
        assert_eq!(pairing(&x0, &f0).unwrap(), 1.0);
        assert_eq!(pairing(&x0, &f1).unwrap(), 0.0);
        let x = DistributionVector::unit(b, 2).unwrap().scaled(3.0);
        let phi = TestFunction::unit(b, 2).unwrap().scaled(2.0);
        assert_eq!(pairing(&x, &phi).unwrap(), 6.0);
        assert!(matches!(
            pairing(&x, &TestFunction::zeros(basis(5))),
            Err(Error::BasisMismatch { .. })
        ));
    }

    #[test]
    fn ball_examples() {
        let b = basis(3);
        let e0 = DistributionVector::unit(b, 0).unwrap();
        assert!(ball_contains(&Ball::new(1, 1.0).unwrap(), &e0));
        assert!(!ball_contains(&Ball::new(0, 1.0).unwrap(), &e0.scaled(2.0)));
        assert!(ball_contains(
            &Ball::new(7, 1e-9).unwrap(),
            &DistributionVector::zeros(b)
        ));
        assert!(Ball::new(0, 0.0).is_err());
        assert!(Ball::new(0, -1.0).is_err());
    }

    #[test]
    fn embedding_examples() {
        assert_eq!(embedding_norm(3, 3).unwrap(), 1.0);
        assert_eq!(embedding_norm(3, 5).unwrap(), 0.25);
        assert_eq!(embedding_norm(0, 1).unwrap(), 0.5);
        assert!(embedding_norm(2, 1).is_err());
    }

    #[test]
    fn embedding_norm_by_coordinate_scan() {
        let b = basis(20);
        for k in 0..5u32 {
            for n in k..k + 4 {
                let scan = (0..b.dim)
                    .map(|j| {
                        let x = DistributionVector::unit(b, j).unwrap();
                        norm_dual(&x, n) / norm_dual(&x, k)
                    })
                    .fold(0.0, f64::max);
                assert_eq!(embedding_norm(k, n).unwrap(), scan);
            }
        }
    }

    #[test]
    fn step_two_singular_values_square_summable() {
        let sv = singular_values(1, 3, 4000).unwrap();
        assert_eq!(sv[0], 0.25);
        let partial: f64 = sv.iter().map(|s| s * s).sum();
        // sum_j (2j+2)^{-4} = zeta(4) / 16 = pi^4 / 1440
        let limit = std::f64::consts::PI.powi(4) / 1440.0;
        assert!(partial < limit && limit - partial < 1e-10);
    }

    #[test]
    fn exhaustion_radius_examples() {
        assert_eq!(exhaustion_radius(1).unwrap(), 1.0);
        assert_eq!(exhaustion_radius(5).unwrap(), 5.0);
        assert!(embedding_norm(1, 3).unwrap() * 3.0 <= exhaustion_radius(3).unwrap());
        assert_eq!(embedding_norm(1, 3).unwrap(), 0.25);
        assert!(exhaustion_radius(0).is_err());
    }

    #[test]
    fn exhaustion_index_examples() {
        let b = basis(6);
        assert_eq!(exhaustion_index(&DistributionVector::zeros(b)), Some(1));
        let e0 = DistributionVector::unit(b, 0).unwrap();
        assert_eq!(exhaustion_index(&e0), Some(1));
        // Direct scan: least n with 100 * 2^{-n} <= n.
        let scan = (1u32..)
            .find(|&n| 100.0 * 0.5f64.powi(n as i32) <= n as f64)
            .unwrap();
        assert_eq!(scan, 5);
        assert_eq!(exhaustion_index(&e0.scaled(100.0)), Some(5));
        assert_eq!(exhaustion_index(&e0.scaled(1e300)), Some(987));
    }

    #[test]
    fn bound_witness_examples() {
        let b = basis(10);
        assert_eq!(
            bound_witness(&[DistributionVector::zeros(b)], 4).unwrap(),
            0.0
        );
        let pair = [
            DistributionVector::unit(b, 0).unwrap(),
            DistributionVector::unit(b, 1).unwrap(),
        ];
        assert_eq!(bound_witness(&pair, 1).unwrap(), 0.5);
        let fam: Vec<_> = (0..b.dim)
            .map(|j| DistributionVector::unit(b, j).unwrap().scaled(j as f64))
            .collect();
        let scan = (0..b.dim)
            .map(|j| j as f64 / (2.0 * j as f64 + 2.0))
            .fold(0.0, f64::max);
        let w = bound_witness(&fam, 1).unwrap();
        assert!((w - scan).abs() < 1e-15 && w < 0.5);
        assert!(bound_witness(&[], 0).is_err());
        assert_eq!(compact_level(1), 3);
    }

    #[test]
    fn exhaustion_table_counts() {
        let b = basis(2);
        let xs = vec![
            DistributionVector::zeros(b),
            DistributionVector::unit(b, 0).unwrap().scaled(100.0),
        ];
        let rows = exhaustion_table(&xs, 6).unwrap();
        let counts: Vec<usize> = rows.iter().map(|r| r.member_count).collect();
        assert_eq!(counts, vec![1, 1, 1, 1, 2, 2]);
    }

    #[test]
    fn invariant_check() {
        let x = DistributionVector::padded(basis(5), &[1.0, -2.0, 3.0]).unwrap();
        x.check_invariants(8).unwrap();
    }

    fn vec_and_level() -> impl Strategy<Value = (Vec<f64>, u32)> {
        (prop::collection::vec(-1e3f64..1e3, 1..48), 0u32..8)
    }

    proptest! {
        #[test]
        fn contraction_by_quarter((coeffs, n) in vec_and_level()) {
            let x = DistributionVector::new(basis(coeffs.len()), coeffs).unwrap();
            prop_assert!(norm_dual(&x, n + 2) <= 0.25 * norm_dual(&x, n));
        }

        #[test]
        fn contraction_equality_on_ground_direction(c in -1e3f64..1e3, n in 0u32..8, dim in 1usize..10) {
            let x = DistributionVector::padded(basis(dim), &[c]).unwrap();
            prop_assert_eq!(norm_dual(&x, n + 2), 0.25 * norm_dual(&x, n));
        }

        #[test]
        fn duality_bound(xs in prop::collection::vec(-10.0f64..10.0, 12), cs in prop::collection::vec(-10.0f64..10.0, 12), p in 0u32..=6) {
            let b = basis(12);
            let x = DistributionVector::new(b, xs).unwrap();
            let phi = TestFunction::new(b, cs).unwrap();
            let lhs = pairing(&x, &phi).unwrap().abs();
            prop_assert!(lhs <= norm_dual(&x, p) * norm_primal(&phi, p) * (1.0 + 1e-12));
        }

        #[test]
        fn nested_exhaustion((coeffs, n) in vec_and_level()) {
            let x = DistributionVector::new(basis(coeffs.len()), coeffs).unwrap();
            let n = n + 1;
            if Ball::exhaustion(n).unwrap().contains(&x) {
                prop_assert!(Ball::exhaustion(n + 1).unwrap().contains(&x));
            }
        }

        #[test]
        fn every_vector_is_covered(coeffs in prop::collection::vec(-1e12f64..1e12, 1..32)) {
            let x = DistributionVector::new(basis(coeffs.len()), coeffs).unwrap();
            let n = exhaustion_index(&x).unwrap();
            prop_assert!(Ball::exhaustion(n).unwrap().contains(&x));
            if n > 1 {
                prop_assert!(!Ball::exhaustion(n - 1).unwrap().contains(&x));
            }
        }
    }
}
