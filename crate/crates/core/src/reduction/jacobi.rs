use crate::linalg::ColMatrix;
use crate::{Error, Result};

const MAX_SWEEPS: usize = 50;
const RELATIVE_OFF_TOL: f64 = 1e-12;

/// Eigen-decomposition of a symmetric positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    /// Eigenvalues, descending, clamped at zero.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, matching `values`.
    pub vectors: ColMatrix,
    pub sweeps: usize,
}

/// Cyclic Jacobi rotations.
///
/// The input is symmetrised as `(G + Gᵀ)/2`. Sweeps run over all `p < q` in
/// a fixed order until the off-diagonal Frobenius norm is at most
/// `1e-12 · ‖G‖_F`. Eigenvector signs are fixed so the largest-magnitude
/// entry (first on ties) is positive.
pub fn eigendecompose_spsd(g: &ColMatrix) -> Result<SymmetricEigen> {
    let n = g.rows();
    if g.cols() != n {
        return Err(Error::dim("eigendecompose_spsd (square)", n, g.cols()));
    }
    let mut a = ColMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            a[(i, j)] = 0.5 * (g[(i, j)] + g[(j, i)]);
        }
    }
    if a.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    let mut v = ColMatrix::identity(n);
    let scale = a.frobenius();
    let target = RELATIVE_OFF_TOL * scale;

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a);
        if off <= target {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::Numerical(format!(
                "Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps (off-diagonal norm {off:e})"
            )));
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps equal eigenvalues in index order.
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)].max(0.0)).collect();
    let mut vectors = ColMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.col_mut(dst).copy_from_slice(v.col(src));
        canonicalize_sign(vectors.col_mut(dst));
    }
    Ok(SymmetricEigen {
        values,
        vectors,
        sweeps,
    })
}

fn off_diagonal_norm(a: &ColMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Annihilates `a[p][q]` with a plane rotation and accumulates it into `v`.
fn rotate(a: &mut ColMatrix, v: &mut ColMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let app = a[(p, p)];
    let aqq = a[(q, q)];
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    let n = a.rows();
    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let arp = a[(r, p)];
        let arq = a[(r, q)];
        let new_rp = c * arp - s * arq;
        let new_rq = s * arp + c * arq;
        a[(r, p)] = new_rp;
        a[(p, r)] = new_rp;
        a[(r, q)] = new_rq;
        a[(q, r)] = new_rq;
    }
    a[(p, p)] = app - t * apq;
    a[(q, q)] = aqq + t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;

    for r in 0..n {
        let vrp = v[(r, p)];
        let vrq = v[(r, q)];
        v[(r, p)] = c * vrp - s * vrq;
        v[(r, q)] = s * vrp + c * vrq;
    }
}

/// Flips `x` so its largest-magnitude entry (first on ties) is positive.
pub(crate) fn canonicalize_sign(x: &mut [f64]) -> bool {
    let mut best = 0;
    for (i, val) in x.iter().enumerate() {
        if val.abs() > x[best].abs() {
            best = i;
        }
    }
    if x.get(best).is_some_and(|&b| b < 0.0) {
        x.iter_mut().for_each(|e| *e = -*e);
        true
    } else {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random_symmetric(n: usize, seed: u64) -> ColMatrix {
        let mut rng = Rng::new(seed);
        let mut g = ColMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let x = rng.uniform_in(-1.0, 1.0);
                g[(i, j)] = x;
                g[(j, i)] = x;
            }
        }
        g
    }

    /// Number of eigenvalues below `x` by Sylvester's law of inertia: count the
    /// negative pivots of an LDLᵀ factorisation of `G − x·I`.
    fn count_below(g: &ColMatrix, x: f64) -> usize {
        let n = g.rows();
        let mut m: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| g[(i, j)] - if i == j { x } else { 0.0 }).collect())
            .collect();
        let mut negatives = 0;
        for k in 0..n {
            let mut d = m[k][k];
            if d == 0.0 {
                d = -1e-300;
            }
            if d < 0.0 {
                negatives += 1;
            }
            for i in k + 1..n {
                let f = m[i][k] / d;
                for j in k + 1..n {
                    m[i][j] -= f * m[k][j];
                }
            }
        }
        negatives
    }

    /// k-th smallest eigenvalue by bisection on the inertia count.
    fn bisect_eigenvalue(g: &ColMatrix, k: usize) -> f64 {
        let bound = g.frobenius() + 1.0;
        let (mut lo, mut hi) = (-bound, bound);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if count_below(g, mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn diagonal_input() {
        let g = ColMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]);
        let e = eigendecompose_spsd(&g).unwrap();
        assert_eq!(e.values, vec![2.0, 1.0]);
        assert_eq!(e.vectors, ColMatrix::identity(2));

        let g = ColMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]);
        let e = eigendecompose_spsd(&g).unwrap();
        assert_eq!(e.values, vec![2.0, 1.0]);
        assert_eq!(e.vectors, ColMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]));
    }

    #[test]
    fn textbook_two_by_two() {
        let g = ColMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let e = eigendecompose_spsd(&g).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = e.vectors.col(0);
        let v1 = e.vectors.col(1);
        assert!((v0[0] - r).abs() < 1e-14 && (v0[1] - r).abs() < 1e-14);
        // (1, −1)/√2 up to the canonical sign.
        assert!((v1[0].abs() - r).abs() < 1e-14 && (v1[0] + v1[1]).abs() < 1e-14);
    }

    #[test]
    fn random_twenty_reconstructs() {
        let g = random_symmetric(20, 4);
        let e = eigendecompose_spsd(&g).unwrap();
        // Indefinite input: clamping hides negative eigenvalues, so shift first.
        let mut shifted = g.clone();
        for i in 0..20 {
            shifted[(i, i)] += 20.0;
        }
        let e2 = eigendecompose_spsd(&shifted).unwrap();
        let mut lam = ColMatrix::zeros(20, 20);
        for i in 0..20 {
            lam[(i, i)] = e2.values[i];
        }
        let rec = e2.vectors.matmul(&lam).matmul(&e2.vectors.transpose());
        for j in 0..20 {
            for i in 0..20 {
                assert!((rec[(i, j)] - shifted[(i, j)]).abs() < 1e-10);
            }
        }
        let vtv = e2.vectors.transpose().matmul(&e2.vectors);
        for j in 0..20 {
            for i in 0..20 {
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((vtv[(i, j)] - id).abs() < 1e-12);
            }
        }
        assert!(e.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn five_by_five_matches_bisection_oracle() {
        let mut g = random_symmetric(5, 8);
        for i in 0..5 {
            g[(i, i)] += 5.0;
        }
        let e = eigendecompose_spsd(&g).unwrap();
        for k in 0..5 {
            let oracle = bisect_eigenvalue(&g, k);
            assert!(
                (e.values[4 - k] - oracle).abs() < 1e-9,
                "{k}: {} vs {oracle}",
                e.values[4 - k]
            );
        }
    }

    #[test]
    fn deterministic_and_sorted() {
        let g = random_symmetric(12, 21);
        let a = eigendecompose_spsd(&g).unwrap();
        let b = eigendecompose_spsd(&g).unwrap();
        assert_eq!(a, b);
        assert!(a.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn zero_matrix() {
        let e = eigendecompose_spsd(&ColMatrix::zeros(3, 3)).unwrap();
        assert_eq!(e.values, vec![0.0; 3]);
        assert_eq!(e.sweeps, 0);
    }
}
