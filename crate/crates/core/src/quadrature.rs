//! Gauss–Hermite rules for averaging over a Gaussian distribution.

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights of the `n`-point rule for a zero-mean Gaussian of
/// standard deviation `sigma`. Weights sum to one; nodes are ascending and
/// exactly antisymmetric.
///
/// Built from the eigen-decomposition of the Hermite Jacobi matrix
/// (Golub–Welsch).
pub fn gauss_hermite(n: usize, sigma: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "at least one node required");
    if n == 1 {
        return (vec![0.0], vec![1.0]);
    }
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        let mirror = n - 1 - k;
        let x = 0.5 * (pairs[k].0 - pairs[mirror].0);
        nodes[k] = std::f64::consts::SQRT_2 * sigma * x;
        weights[k] = 0.5 * (pairs[k].1 + pairs[mirror].1);
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_point_rule() {
        let (x, w) = gauss_hermite(3, 1.0);
        // standard-normal 3-point rule: ±√3 with weight 1/6, 0 with 2/3
        assert!((x[2] - 3f64.sqrt()).abs() < 1e-13);
        assert_eq!(x[1], 0.0);
        assert!((w[0] - 1.0 / 6.0).abs() < 1e-13);
        assert!((w[1] - 2.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn reproduces_gaussian_moments() {
        let sigma = 2.0;
        let (x, w) = gauss_hermite(7, sigma);
        let moment = |p: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum::<f64>();
        assert!((moment(0) - 1.0).abs() < 1e-14);
        assert!(moment(1).abs() < 1e-13);
        assert!((moment(2) - sigma.powi(2)).abs() < 1e-12);
        assert!((moment(4) - 3.0 * sigma.powi(4)).abs() < 1e-10);
        assert!((moment(12) - 10395.0 * sigma.powi(12)).abs() < 1e-8 * 10395.0 * sigma.powi(12));
    }
}
