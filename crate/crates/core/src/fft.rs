//! In-place radix-2 complex FFT used by the circulant-embedding generator.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    #[inline]
    fn mul(self, o: Complex) -> Complex {
        Complex::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
}

/// Forward transform `X_k = sum_j x_j exp(-2 pi i j k / n)` for a fixed
/// power-of-two length.
#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    twiddles: Vec<Complex>,
}

impl Fft {
    /// Panics if `n` is not a power of two.
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two(), "FFT length must be a power of two");
        let twiddles = (0..n / 2)
            .map(|k| {
                let angle = -2.0 * PI * k as f64 / n as f64;
                Complex::new(libm::cos(angle), libm::sin(angle))
            })
            .collect();
        Self { n, twiddles }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, data: &mut [Complex]) {
        let n = self.n;
        assert_eq!(data.len(), n);
        if n <= 1 {
            return;
        }
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let a = data[start + k];
                    let b = data[start + k + half].mul(w);
                    data[start + k] = Complex::new(a.re + b.re, a.im + b.im);
                    data[start + k + half] = Complex::new(a.re - b.re, a.im - b.im);
                }
            }
            len <<= 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[Complex]) -> Vec<Complex> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .fold(Complex::default(), |acc, (j, v)| {
                        let a = -2.0 * PI * (j * k) as f64 / n as f64;
                        let w = Complex::new(libm::cos(a), libm::sin(a));
                        let p = v.mul(w);
                        Complex::new(acc.re + p.re, acc.im + p.im)
                    })
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft() {
        for &n in &[1usize, 2, 4, 8, 32, 128] {
            let x: Vec<Complex> = (0..n)
                .map(|j| {
                    Complex::new(
                        libm::sin(j as f64 * 0.7) + 0.1 * j as f64,
                        libm::cos(j as f64),
                    )
                })
                .collect();
            let mut y = x.clone();
            Fft::new(n).forward(&mut y);
            let expected = naive_dft(&x);
            for (a, b) in y.iter().zip(&expected) {
                assert!((a.re - b.re).abs() < 1e-9 && (a.im - b.im).abs() < 1e-9);
            }
        }
    }
}
