//! Orthonormal 8×8 type-II DCT.

use std::sync::OnceLock;

pub const N: usize = 8;

fn basis() -> &'static [[f64; N]; N] {
    static BASIS: OnceLock<[[f64; N]; N]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut m = [[0.0; N]; N];
        for (k, row) in m.iter_mut().enumerate() {
            let scale = if k == 0 { (1.0 / N as f64).sqrt() } else { (2.0 / N as f64).sqrt() };
            for (n, v) in row.iter_mut().enumerate() {
                *v = scale
                    * ((2 * n + 1) as f64 * k as f64 * std::f64::consts::PI / (2 * N) as f64).cos();
            }
        }
        m
    })
}

/// `out = C · x · Cᵀ`, row-major 8×8.
pub fn forward(x: &[f64; N * N]) -> [f64; N * N] {
    let c = basis();
    let mut tmp = [0.0; N * N];
    for k in 0..N {
        for col in 0..N {
            let mut acc = 0.0;
            for n in 0..N {
                acc += c[k][n] * x[n * N + col];
            }
            tmp[k * N + col] = acc;
        }
    }
    let mut out = [0.0; N * N];
    for row in 0..N {
        for k in 0..N {
            let mut acc = 0.0;
            for n in 0..N {
                acc += tmp[row * N + n] * c[k][n];
            }
            out[row * N + k] = acc;
        }
    }
    out
}

/// `out = Cᵀ · y · C`.
pub fn inverse(y: &[f64; N * N]) -> [f64; N * N] {
    let c = basis();
    let mut tmp = [0.0; N * N];
    for n in 0..N {
        for col in 0..N {
            let mut acc = 0.0;
            for k in 0..N {
                acc += c[k][n] * y[k * N + col];
            }
            tmp[n * N + col] = acc;
        }
    }
    let mut out = [0.0; N * N];
    for row in 0..N {
        for n in 0..N {
            let mut acc = 0.0;
            for k in 0..N {
                acc += tmp[row * N + k] * c[k][n];
            }
            out[row * N + n] = acc;
        }
    }
    out
}
