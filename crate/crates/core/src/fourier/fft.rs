//! Complex DFT kernels: iterative radix-2 for power-of-two lengths, a direct
//! O(m²) sum for everything else.

use num_complex::Complex64;
use std::cell::RefCell;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => -1.0,
            Direction::Inverse => 1.0,
        }
    }
}

/// Unnormalized transform in place. The inverse direction does not divide by `m`.
pub(crate) fn transform(buf: &mut [Complex64], dir: Direction) {
    let m = buf.len();
    if m <= 1 {
        return;
    }
    if m.is_power_of_two() {
        radix2(buf, dir);
    } else {
        let out = direct(buf, dir);
        buf.copy_from_slice(&out);
    }
}

fn twiddle_table(m: usize, dir: Direction) -> Vec<Complex64> {
    (0..m)
        .map(|j| Complex64::from_polar(1.0, dir.sign() * 2.0 * PI * j as f64 / m as f64))
        .collect()
}

fn direct(input: &[Complex64], dir: Direction) -> Vec<Complex64> {
    let m = input.len();
    let tw = twiddle_table(m, dir);
    (0..m)
        .map(|k| {
            input
                .iter()
                .enumerate()
                .map(|(n, x)| x * tw[(k * n) % m])
                .sum()
        })
        .collect()
}

fn radix2(buf: &mut [Complex64], dir: Direction) {
    let m = buf.len();
    let bits = m.trailing_zeros();
    for i in 0..m {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    // One table at full length; stage `len` uses every (m/len)-th entry.
    TWIDDLES.with(|cache| {
        let mut cache = cache.borrow_mut();
        let tw = match cache.iter().position(|(len, d, _)| *len == m && *d == dir) {
            Some(i) => &cache[i].2,
            None => {
                cache.push((m, dir, twiddle_table(m, dir)));
                &cache[cache.len() - 1].2
            }
        };
        butterflies(buf, tw);
    });
}

thread_local! {
    static TWIDDLES: RefCell<Vec<(usize, Direction, Vec<Complex64>)>> = const { RefCell::new(Vec::new()) };
}

fn butterflies(buf: &mut [Complex64], tw: &[Complex64]) {
    let m = buf.len();
    let mut len = 2;
    while len <= m {
        let half = len / 2;
        let step = m / len;
        for start in (0..m).step_by(len) {
            for j in 0..half {
                let w = tw[j * step];
                let a = buf[start + j];
                let b = buf[start + j + half] * w;
                buf[start + j] = a + b;
                buf[start + j + half] = a - b;
            }
        }
        len <<= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radix2_matches_direct() {
        let x: Vec<Complex64> = (0..32)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let mut fast = x.clone();
        transform(&mut fast, Direction::Forward);
        let slow = direct(&x, Direction::Forward);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn inverse_undoes_forward_up_to_scale() {
        for m in [1usize, 2, 3, 8, 12, 64] {
            let x: Vec<Complex64> = (0..m).map(|i| Complex64::new(i as f64, -(i as f64) / 2.0)).collect();
            let mut y = x.clone();
            transform(&mut y, Direction::Forward);
            transform(&mut y, Direction::Inverse);
            for (a, b) in x.iter().zip(&y) {
                assert!((a - b / m as f64).norm() < 1e-12, "m = {m}");
            }
        }
    }
}
