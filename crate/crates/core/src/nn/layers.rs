//! Dense building blocks with hand-written backward passes. Weight matrices
//! are row-major `out × in`.

use alloc::vec;
use alloc::vec::Vec;

pub const LN_EPS: f64 = 1e-5;

/// `y = W x + b`.
pub fn linear(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    debug_assert_eq!(w.len(), b.len() * n_in);
    b.iter()
        .enumerate()
        .map(|(o, &bias)| {
            let row = &w[o * n_in..(o + 1) * n_in];
            bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

/// Accumulates `dW += dy xᵀ`, `db += dy` and returns `dx = Wᵀ dy`.
pub fn linear_backward(w: &[f64], x: &[f64], dy: &[f64], dw: &mut [f64], db: &mut [f64]) -> Vec<f64> {
    let n_in = x.len();
    let mut dx = vec![0.0; n_in];
    for (o, &g) in dy.iter().enumerate() {
        db[o] += g;
        let row = &w[o * n_in..(o + 1) * n_in];
        let drow = &mut dw[o * n_in..(o + 1) * n_in];
        for i in 0..n_in {
            drow[i] += g * x[i];
            dx[i] += g * row[i];
        }
    }
    dx
}

/// Layer normalization over one vector. Returns the output, the normalized
/// input and the inverse standard deviation.
pub fn layer_norm(gamma: &[f64], beta: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / libm::sqrt(var + LN_EPS);
    let xhat: Vec<f64> = x.iter().map(|v| (v - mean) * inv_std).collect();
    let y = xhat.iter().zip(gamma).zip(beta).map(|((h, g), b)| g * h + b).collect();
    (y, xhat, inv_std)
}

pub fn layer_norm_backward(
    gamma: &[f64],
    xhat: &[f64],
    inv_std: f64,
    dy: &[f64],
    dgamma: &mut [f64],
    dbeta: &mut [f64],
) -> Vec<f64> {
    let n = xhat.len() as f64;
    let mut dxhat = vec![0.0; xhat.len()];
    for i in 0..xhat.len() {
        dgamma[i] += dy[i] * xhat[i];
        dbeta[i] += dy[i];
        dxhat[i] = dy[i] * gamma[i];
    }
    let mean_dxhat = dxhat.iter().sum::<f64>() / n;
    let mean_dxhat_xhat = dxhat.iter().zip(xhat).map(|(a, b)| a * b).sum::<f64>() / n;
    dxhat
        .iter()
        .zip(xhat)
        .map(|(d, h)| inv_std * (d - mean_dxhat - h * mean_dxhat_xhat))
        .collect()
}

const FRAC_1_SQRT_2: f64 = core::f64::consts::FRAC_1_SQRT_2;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Exact GELU, `x Φ(x)`.
#[inline]
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * FRAC_1_SQRT_2))
}

#[inline]
pub fn gelu_grad(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2)) + x * FRAC_1_SQRT_2PI * libm::exp(-0.5 * x * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], i: usize) -> f64 {
        let h = 1e-6;
        let mut a = x.to_vec();
        let mut b = x.to_vec();
        a[i] += h;
        b[i] -= h;
        (f(&a) - f(&b)) / (2.0 * h)
    }

    #[test]
    fn gelu_values_and_slope() {
        assert_eq!(gelu(0.0), 0.0);
        assert!((gelu(1.0) - 0.841_344_746_068_543).abs() < 1e-12);
        for x in [-3.0, -0.5, 0.0, 0.7, 2.5] {
            let num = (gelu(x + 1e-6) - gelu(x - 1e-6)) / 2e-6;
            assert!((gelu_grad(x) - num).abs() < 1e-8);
        }
    }

    #[test]
    fn layer_norm_backward_matches_differences() {
        let x = [0.3, -1.2, 2.0, 0.1, 0.9];
        let gamma = [1.1, 0.9, 1.3, 0.7, 1.0];
        let beta = [0.0, 0.1, -0.2, 0.3, 0.05];
        let coef = [0.4, -0.3, 0.2, 1.0, -0.8];
        let loss = |x: &[f64]| layer_norm(&gamma, &beta, x).0.iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>();
        let (_, xhat, inv) = layer_norm(&gamma, &beta, &x);
        let mut dg = [0.0; 5];
        let mut db = [0.0; 5];
        let dx = layer_norm_backward(&gamma, &xhat, inv, &coef, &mut dg, &mut db);
        for i in 0..5 {
            assert!((dx[i] - fd(loss, &x, i)).abs() < 1e-7);
        }
    }

    #[test]
    fn linear_backward_matches_differences() {
        let w = [0.5, -0.2, 0.1, 0.3, 0.8, -0.6];
        let b = [0.1, -0.1];
        let x = [1.0, 2.0, -0.5];
        let coef = [0.7, -1.3];
        let loss = |x: &[f64]| linear(&w, &b, x).iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>();
        let mut dw = [0.0; 6];
        let mut db = [0.0; 2];
        let dx = linear_backward(&w, &x, &coef, &mut dw, &mut db);
        for i in 0..3 {
            assert!((dx[i] - fd(loss, &x, i)).abs() < 1e-8);
        }
        assert_eq!(db, coef);
        assert_eq!(dw[4], coef[1] * x[1]);
    }
}
