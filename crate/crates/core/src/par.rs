//! Deterministic parallel helpers: work is split by index, results are
//! collected in index order and reduced sequentially, so sums are
//! bit-identical for any worker count.

use rayon::prelude::*;

/// `f(0), f(1), ..., f(n-1)` evaluated in parallel, returned in order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Mean and sample standard deviation, accumulated in slice order.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Runs `f` on a dedicated pool of `threads` workers (global pool if `None`).
pub fn with_threads<T, F>(threads: Option<usize>, f: F) -> T
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    match threads {
        Some(n) if n > 0 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        _ => f(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_results_independent_of_pool() {
        let f = |i: usize| ((i as f64) * 0.1).sin();
        let one = with_threads(Some(1), || map_indexed(10_000, f));
        let four = with_threads(Some(4), || map_indexed(10_000, f));
        assert_eq!(one, four);
        let (m1, s1) = mean_sd(&one);
        let (m4, s4) = mean_sd(&four);
        assert_eq!(m1.to_bits(), m4.to_bits());
        assert_eq!(s1.to_bits(), s4.to_bits());
    }

    #[test]
    fn mean_sd_small() {
        assert_eq!(mean_sd(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_sd(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
        assert!(mean_sd(&[]).0.is_nan());
    }
}
