//! In-place iterative radix-2 decimation-in-time FFT.

use num_complex::Complex;

use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct Radix2Plan<T> {
    n: usize,
    log2n: u32,
    /// `exp(-2*pi*i*k/n)` for `k < n/2`, evaluated in f64.
    twiddles: Vec<Complex<T>>,
    bitrev: Vec<usize>,
}

impl<T: Scalar> Radix2Plan<T> {
    /// Panics unless `n` is a power of two.
    pub fn new(n: usize) -> Self {
        assert!(
            n.is_power_of_two(),
            "radix-2 FFT length {n} is not a power of two"
        );
        let log2n = n.trailing_zeros();
        let twiddles = (0..n / 2)
            .map(|k| {
                let ang = -2.0 * std::f64::consts::PI * k as f64 / n as f64;
                Complex::new(T::from_f64(ang.cos()), T::from_f64(ang.sin()))
            })
            .collect();
        let bitrev = (0..n)
            .map(|i| {
                if log2n == 0 {
                    0
                } else {
                    i.reverse_bits() >> (usize::BITS - log2n)
                }
            })
            .collect();
        Self {
            n,
            log2n,
            twiddles,
            bitrev,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Butterflies performed by one transform.
    pub fn butterflies(&self) -> usize {
        self.n / 2 * self.log2n as usize
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, buf: &mut [Complex<T>]) {
        self.run(buf, false);
    }

    /// Unnormalized inverse transform (conjugate twiddles, no `1/n`).
    pub fn inverse(&self, buf: &mut [Complex<T>]) {
        self.run(buf, true);
    }

    fn run(&self, buf: &mut [Complex<T>], inverse: bool) {
        debug_assert_eq!(buf.len(), self.n);
        for i in 0..self.n {
            let j = self.bitrev[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut half = 1;
        while half < self.n {
            let stride = self.n / (2 * half);
            for start in (0..self.n).step_by(2 * half) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            half *= 2;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex<f64> {
        Complex::new(re, 0.0)
    }

    #[test]
    fn delta_and_constant() {
        let plan = Radix2Plan::<f64>::new(4);
        let mut d = vec![c(1.0), c(0.0), c(0.0), c(0.0)];
        plan.forward(&mut d);
        assert!(d.iter().all(|v| (*v - c(1.0)).norm() < 1e-15));
        let mut k = vec![c(1.0); 4];
        plan.forward(&mut k);
        assert!((k[0] - c(4.0)).norm() < 1e-15);
        assert!(k[1..].iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn length_one_is_identity() {
        let plan = Radix2Plan::<f32>::new(1);
        let mut v = vec![Complex::new(3.0f32, -1.0)];
        plan.forward(&mut v);
        assert_eq!(v[0], Complex::new(3.0, -1.0));
        assert_eq!(plan.butterflies(), 0);
    }

    #[test]
    fn inverse_undoes_forward_up_to_n() {
        let plan = Radix2Plan::<f64>::new(16);
        let orig: Vec<_> = (0..16)
            .map(|i| Complex::new(i as f64 * 0.3 - 2.0, (i % 3) as f64))
            .collect();
        let mut v = orig.clone();
        plan.forward(&mut v);
        plan.inverse(&mut v);
        for (a, b) in v.iter().zip(&orig) {
            assert!((a / 16.0 - b).norm() < 1e-13);
        }
    }
}
