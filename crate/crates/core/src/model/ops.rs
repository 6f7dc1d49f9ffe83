//! Dense kernels over row-major slices.

use crate::num::Real;

pub const LN_EPS: f64 = 1e-5;

/// Dot product with four independent accumulators. The summation order is
/// fixed, so results are bitwise reproducible.
#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = T::zero();
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out[t] = W · x[t]` for each of the rows of `x` (`W` is `[n_out][n_in]`).
pub fn linear<T: Real>(x: &[T], w: &[T], n_in: usize, n_out: usize) -> Vec<T> {
    let rows = x.len() / n_in;
    let mut out = vec![T::zero(); rows * n_out];
    for r in 0..rows {
        let xr = &x[r * n_in..(r + 1) * n_in];
        let or = &mut out[r * n_out..(r + 1) * n_out];
        for (o, slot) in or.iter_mut().enumerate() {
            *slot = dot(&w[o * n_in..(o + 1) * n_in], xr);
        }
    }
    out
}

/// `dx[t] += Wᵀ · dy[t]`
pub fn linear_backward_input<T: Real>(dy: &[T], w: &[T], n_in: usize, n_out: usize, dx: &mut [T]) {
    let rows = dy.len() / n_out;
    for r in 0..rows {
        let dxr = &mut dx[r * n_in..(r + 1) * n_in];
        for o in 0..n_out {
            let g = dy[r * n_out + o];
            if g != T::zero() {
                axpy(g, &w[o * n_in..(o + 1) * n_in], dxr);
            }
        }
    }
}

/// `dW += Σ_t dy[t] ⊗ x[t]`
pub fn linear_backward_weight<T: Real>(dy: &[T], x: &[T], n_in: usize, n_out: usize, dw: &mut [T]) {
    let rows = dy.len() / n_out;
    for r in 0..rows {
        let xr = &x[r * n_in..(r + 1) * n_in];
        for o in 0..n_out {
            let g = dy[r * n_out + o];
            if g != T::zero() {
                axpy(g, xr, &mut dw[o * n_in..(o + 1) * n_in]);
            }
        }
    }
}

pub fn add_bias<T: Real>(y: &mut [T], b: &[T]) {
    for row in y.chunks_mut(b.len()) {
        for (v, &bb) in row.iter_mut().zip(b) {
            *v += bb;
        }
    }
}

pub fn sum_rows_into<T: Real>(dy: &[T], db: &mut [T]) {
    for row in dy.chunks(db.len()) {
        for (acc, &g) in db.iter_mut().zip(row) {
            *acc += g;
        }
    }
}

/// Normalized input and reciprocal std kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LnCache<T> {
    pub xhat: Vec<T>,
    pub rstd: Vec<T>,
}

pub fn layer_norm<T: Real>(x: &[T], g: &[T], b: &[T]) -> (Vec<T>, LnCache<T>) {
    let h = g.len();
    let rows = x.len() / h;
    let inv_h = T::one() / T::of(h as f64);
    let eps = T::of(LN_EPS);
    let mut out = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    let mut rstd = vec![T::zero(); rows];
    for r in 0..rows {
        let xr = &x[r * h..(r + 1) * h];
        let mean = xr.iter().copied().sum::<T>() * inv_h;
        let var = xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_h;
        let rs = T::one() / (var + eps).sqrt();
        rstd[r] = rs;
        for i in 0..h {
            let xh = (xr[i] - mean) * rs;
            xhat[r * h + i] = xh;
            out[r * h + i] = g[i] * xh + b[i];
        }
    }
    (out, LnCache { xhat, rstd })
}

/// Returns `dx`; accumulates gain/bias gradients when given.
pub fn layer_norm_backward<T: Real>(
    dy: &[T],
    cache: &LnCache<T>,
    g: &[T],
    mut dgb: Option<(&mut [T], &mut [T])>,
) -> Vec<T> {
    let h = g.len();
    let rows = dy.len() / h;
    let inv_h = T::one() / T::of(h as f64);
    let mut dx = vec![T::zero(); dy.len()];
    let mut dxhat = vec![T::zero(); h];
    for r in 0..rows {
        let dyr = &dy[r * h..(r + 1) * h];
        let xh = &cache.xhat[r * h..(r + 1) * h];
        if let Some((dg, db)) = dgb.as_mut() {
            for i in 0..h {
                dg[i] += dyr[i] * xh[i];
                db[i] += dyr[i];
            }
        }
        for i in 0..h {
            dxhat[i] = dyr[i] * g[i];
        }
        let mean_d = dxhat.iter().copied().sum::<T>() * inv_h;
        let mean_dx = dot(&dxhat, xh) * inv_h;
        let rs = cache.rstd[r];
        for i in 0..h {
            dx[r * h + i] = rs * (dxhat[i] - mean_d - xh[i] * mean_dx);
        }
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

#[inline]
pub fn gelu<T: Real>(x: T) -> T {
    let u = T::of(GELU_C) * (x + T::of(GELU_A) * x * x * x);
    T::of(0.5) * x * (T::one() + u.tanh())
}

#[inline]
pub fn gelu_grad<T: Real>(x: T) -> T {
    let c = T::of(GELU_C);
    let a = T::of(GELU_A);
    let u = c * (x + a * x * x * x);
    let th = u.tanh();
    let half = T::of(0.5);
    half * (T::one() + th) + half * x * (T::one() - th * th) * c * (T::one() + T::of(3.0) * a * x * x)
}

/// Numerically stable log-softmax of one row.
pub fn log_softmax<T: Real>(row: &[T]) -> Vec<T> {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = row.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
    row.iter().map(|&v| v - lse).collect()
}

/// In-place softmax; returns nothing, row sums to one.
pub fn softmax_in_place<T: Real>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    let inv = T::one() / sum;
    for v in row.iter_mut() {
        *v *= inv;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gelu_grad_matches_difference() {
        for &x in &[-3.0f64, -1.0, -0.1, 0.0, 0.3, 2.5] {
            let e = 1e-6;
            let fd = (gelu(x + e) - gelu(x - e)) / (2.0 * e);
            assert!((fd - gelu_grad(x)).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn dot_handles_tail() {
        let a: Vec<f64> = (0..7).map(f64::from).collect();
        assert_eq!(dot(&a, &a), (0..7).map(|i| (i * i) as f64).sum::<f64>());
    }

    #[test]
    fn layer_norm_backward_matches_difference() {
        let x = vec![0.3f64, -1.2, 0.8, 2.0, -0.4, 0.1, 0.9, -0.7];
        let g = vec![1.1, 0.9, 1.3, 0.7];
        let b = vec![0.1, -0.2, 0.0, 0.3];
        let w = [0.5, -1.0, 0.25, 2.0, 1.5, -0.5, 0.75, 1.0];
        let f = |x: &[f64]| {
            let (y, _) = layer_norm(x, &g, &b);
            y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
        };
        let (_, cache) = layer_norm(&x, &g, &b);
        let dx = layer_norm_backward(&w, &cache, &g, None);
        for i in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += 1e-6;
            xm[i] -= 1e-6;
            let fd = (f(&xp) - f(&xm)) / 2e-6;
            assert!((fd - dx[i]).abs() < 1e-7);
        }
    }
}
