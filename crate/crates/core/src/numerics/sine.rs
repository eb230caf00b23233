//! Orthonormal type-I discrete sine transform.
//!
//! `Q_{jl} = sqrt(2/(N+1)) sin(j l pi/(N+1))`, `j, l = 1..N`. `Q` is real,
//! symmetric and orthogonal, so the transform is its own inverse.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use super::dense::{C64, ZERO};

/// Direct `O(N^2)` evaluation.
pub fn sine_transform(x: &[C64]) -> Vec<C64> {
    let n = x.len();
    if n == 0 {
        return vec![];
    }
    let period = 2 * (n + 1);
    let table: Vec<f64> = (0..period)
        .map(|m| (PI * m as f64 / (n + 1) as f64).sin())
        .collect();
    let norm = (2.0 / (n + 1) as f64).sqrt();
    (1..=n)
        .map(|l| {
            let mut acc = ZERO;
            for (j, xj) in x.iter().enumerate() {
                acc += xj * table[((j + 1) * l) % period];
            }
            acc * norm
        })
        .collect()
}

/// FFT-backed `O(N log N)` transform of a fixed length.
#[derive(Clone)]
pub struct SineTransform {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SineTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SineTransform").field("n", &self.n).finish()
    }
}

impl SineTransform {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        SineTransform {
            n,
            fft: planner.plan_fft_forward(2 * (n + 1)),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut out = x.to_vec();
        self.apply_in_place(&mut out);
        out
    }

    pub fn apply_in_place(&self, x: &mut [C64]) {
        let n = self.n;
        assert_eq!(x.len(), n, "sine transform length mismatch");
        if n == 0 {
            return;
        }
        // odd extension [0, x, 0, -rev(x)]: FFT gives -2i * (sine sums)
        let m = 2 * (n + 1);
        let mut buf = vec![ZERO; m];
        for j in 0..n {
            buf[j + 1] = x[j];
            buf[m - 1 - j] = -x[j];
        }
        self.fft.process(&mut buf);
        let scale = C64::new(0.0, 0.5 * (2.0 / (n + 1) as f64).sqrt());
        for l in 0..n {
            x[l] = buf[l + 1] * scale;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_vector_maps_to_sine_column() {
        let n = 7;
        let mut x = vec![ZERO; n];
        x[0] = C64::new(1.0, 0.0);
        let y = sine_transform(&x);
        for (l, v) in y.iter().enumerate() {
            let want = (2.0 / 8.0f64).sqrt() * ((l + 1) as f64 * PI / 8.0).sin();
            assert!((v.re - want).abs() < 1e-15 && v.im.abs() < 1e-15);
        }
    }

    #[test]
    fn fast_matches_direct() {
        for n in [1, 2, 5, 31, 64, 99] {
            let x: Vec<C64> = (0..n)
                .map(|j| C64::new((j as f64 * 0.37).sin(), (j as f64 * 1.3).cos()))
                .collect();
            let a = sine_transform(&x);
            let b = SineTransform::new(n).apply(&x);
            for (p, q) in a.iter().zip(&b) {
                assert!((p - q).norm() < 1e-13, "n = {n}");
            }
        }
    }

    #[test]
    fn involution() {
        let n = 50;
        let x: Vec<C64> = (0..n).map(|j| C64::new(j as f64, -(j as f64).sqrt())).collect();
        let t = SineTransform::new(n);
        let back = t.apply(&t.apply(&x));
        for (p, q) in x.iter().zip(&back) {
            assert!((p - q).norm() < 1e-11);
        }
    }
}
