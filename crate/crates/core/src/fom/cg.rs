use crate::linalg::{axpy, dot, norm};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    /// ‖b − A·x‖ / ‖b‖ from the residual recurrence.
    pub relative_residual: f64,
}

/// Conjugate gradients for a symmetric positive definite operator.
///
/// `x` holds the initial guess on entry and the solution on exit. Stops when
/// the relative residual drops to `tol`; exceeding `max_iter` is an error
/// carrying the last residual.
pub fn conjugate_gradient<A>(
    apply: A,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome>
where
    A: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    if x.len() != n {
        return Err(Error::dim("conjugate_gradient", n, x.len()));
    }
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.fill(0.0);
        return Ok(CgOutcome {
            iterations: 0,
            relative_residual: 0.0,
        });
    }

    let mut ap = vec![0.0; n];
    apply(x, &mut ap);
    let mut r: Vec<f64> = b.iter().zip(&ap).map(|(bi, ai)| bi - ai).collect();
    let mut rr = dot(&r, &r);
    let mut rel = rr.sqrt() / b_norm;
    if rel <= tol {
        return Ok(CgOutcome {
            iterations: 0,
            relative_residual: rel,
        });
    }
    let mut p = r.clone();

    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Numerical(format!(
                "operator is not positive definite (pᵀAp = {pap:e})"
            )));
        }
        let alpha = rr / pap;
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        rel = rr_new.sqrt() / b_norm;
        if rel <= tol {
            return Ok(CgOutcome {
                iterations: it,
                relative_residual: rel,
            });
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    Err(Error::Convergence {
        iterations: max_iter,
        residual: rel,
    })
}
