use crate::error::SolverFailure;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    /// Stop once `‖r‖ ≤ rel_tol·‖b‖ + abs_tol`.
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-300, max_iter: 20_000 }
    }
}

impl CgOptions {
    pub fn with_tol(rel_tol: f64) -> Self {
        Self { rel_tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    pub residual: f64,
}

#[inline]
fn dot(w: Option<&[f64]>, a: &[f64], b: &[f64]) -> f64 {
    match w {
        Some(w) => w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum(),
        None => a.iter().zip(b).map(|(a, b)| a * b).sum(),
    }
}

/// Diagonal (Jacobi) preconditioner `z = D⁻¹ r`.
pub fn jacobi(inv_diag: &[f64]) -> impl FnMut(&[f64], &mut [f64]) + '_ {
    move |r, z| {
        for ((z, r), d) in z.iter_mut().zip(r).zip(inv_diag) {
            *z = r * d;
        }
    }
}

/// Preconditioned conjugate gradients.
///
/// `apply` and `precond` must be self-adjoint and positive definite in the
/// inner product `⟨a, b⟩ = Σ wᵢ aᵢ bᵢ` (plain Euclidean when `weights` is
/// `None`); residuals are measured in the same norm. `x` holds the initial
/// guess on entry.
pub fn pcg(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    mut precond: impl FnMut(&[f64], &mut [f64]),
    weights: Option<&[f64]>,
    b: &[f64],
    x: &mut [f64],
    opts: &CgOptions,
    label: &'static str,
) -> Result<CgOutcome, SolverFailure> {
    let n = b.len();
    let b_norm = dot(weights, b, b).sqrt();
    let target = opts.rel_tol * b_norm + opts.abs_tol;
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgOutcome { iterations: 0, residual: 0.0 });
    }

    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(weights, &r, &z);
    let mut res = dot(weights, &r, &r).sqrt();
    let mut history = vec![res];

    let fail = |iterations, history: Vec<f64>| SolverFailure { label, iterations, rhs_norm: b_norm, residual_history: history };

    for it in 0..opts.max_iter {
        if res <= target {
            return Ok(CgOutcome { iterations: it, residual: res });
        }
        apply(&p, &mut ap);
        let pap = dot(weights, &p, &ap);
        if !(pap > 0.0) || !pap.is_finite() {
            return Err(fail(it, history));
        }
        let a = rz / pap;
        for i in 0..n {
            x[i] += a * p[i];
            r[i] -= a * ap[i];
        }
        precond(&r, &mut z);
        let rz_new = dot(weights, &r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = dot(weights, &r, &r).sqrt();
        history.push(res);
        if !res.is_finite() {
            return Err(fail(it + 1, history));
        }
    }
    if res <= target {
        return Ok(CgOutcome { iterations: opts.max_iter, residual: res });
    }
    Err(fail(opts.max_iter, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(x: &[f64], out: &mut [f64]) {
        let n = x.len();
        for i in 0..n {
            let l = if i > 0 { x[i - 1] } else { 0.0 };
            let r = if i + 1 < n { x[i + 1] } else { 0.0 };
            out[i] = 2.0 * x[i] - l - r;
        }
    }

    #[test]
    fn solves_tridiagonal() {
        let n = 50;
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = vec![0.0; n];
        let inv = vec![0.5; n];
        let out = pcg(tridiag, jacobi(&inv), None, &b, &mut x, &CgOptions::with_tol(1e-12), "test").unwrap();
        assert!(out.iterations <= n + 1);
        let mut ax = vec![0.0; n];
        tridiag(&x, &mut ax);
        let err = ax.iter().zip(&b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn weighted_inner_product() {
        // W⁻¹T is self-adjoint in the W inner product
        let n = 30;
        let w: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
        let b: Vec<f64> = (0..n).map(|i| (0.3 * i as f64).cos()).collect();
        let mut x = vec![0.0; n];
        let inv: Vec<f64> = w.iter().map(|w| w / 2.0).collect();
        let ww = w.clone();
        let apply = |x: &[f64], out: &mut [f64]| {
            tridiag(x, out);
            for i in 0..out.len() {
                out[i] /= ww[i];
            }
        };
        pcg(apply, jacobi(&inv), Some(&w), &b, &mut x, &CgOptions::with_tol(1e-12), "test").unwrap();
        let mut ax = vec![0.0; n];
        tridiag(&x, &mut ax);
        for i in 0..n {
            assert!((ax[i] / w[i] - b[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn reports_history_on_failure() {
        let n = 40;
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let opts = CgOptions { rel_tol: 1e-14, abs_tol: 0.0, max_iter: 3 };
        let err = pcg(tridiag, jacobi(&vec![1.0; n]), None, &b, &mut x, &opts, "tri").unwrap_err();
        assert_eq!(err.iterations, 3);
        assert_eq!(err.residual_history.len(), 4);
        assert_eq!(err.label, "tri");
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let mut x = vec![3.0; 5];
        pcg(tridiag, jacobi(&[1.0; 5]), None, &[0.0; 5], &mut x, &CgOptions::default(), "z").unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }
}
