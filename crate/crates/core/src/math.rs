//! Small dense linear algebra and quadrature helpers shared across modules.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

pub type C64 = Complex64;

pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Infinity norm (max absolute row sum).
fn inf_norm(m: &Array2<C64>) -> f64 {
    m.rows()
        .into_iter()
        .map(|r| r.iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling-and-squaring with a Taylor series.
///
/// Adequate for the well-conditioned generators used here (anti-Hermitian
/// up to a factor of i); the scaled series is summed to machine precision.
pub fn expm(m: &Array2<C64>) -> Array2<C64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "expm requires a square matrix");
    let norm = inf_norm(m);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = m.mapv(|x| x / C64::new(2f64.powi(squarings as i32), 0.0));

    let mut result = Array2::<C64>::eye(n);
    let mut term = Array2::<C64>::eye(n);
    for k in 1..=30 {
        term = term.dot(&scaled).mapv(|x| x / C64::new(k as f64, 0.0));
        result = result + &term;
        if inf_norm(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

/// Annihilation operator on the number basis 0..=cutoff.
pub fn annihilation_matrix(cutoff: u8) -> Array2<C64> {
    let dim = cutoff as usize + 1;
    let mut a = Array2::<C64>::zeros((dim, dim));
    for n in 1..dim {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

pub fn dagger(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|x| x.conj())
}

pub fn mat_vec(m: &Array2<C64>, v: &Array1<C64>) -> Array1<C64> {
    m.dot(v)
}

/// Composite Simpson rule. Requires an odd number of uniformly spaced samples.
pub fn simpson(values: &[f64], step: f64) -> f64 {
    assert!(values.len() >= 3 && values.len() % 2 == 1, "simpson needs an odd sample count");
    let mut acc = values[0] + values[values.len() - 1];
    for (i, v) in values.iter().enumerate().skip(1).take(values.len() - 2) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * step / 3.0
}

pub fn simpson_complex(values: &[C64], step: f64) -> C64 {
    let re: Vec<f64> = values.iter().map(|v| v.re).collect();
    let im: Vec<f64> = values.iter().map(|v| v.im).collect();
    C64::new(simpson(&re, step), simpson(&im, step))
}

/// Harmonic-oscillator eigenfunctions phi_n(q) for n = 0..=n_max over a grid,
/// in the convention q = (a + a^dag)/sqrt(2). Uses the normalized recurrence
/// phi_{n+1} = q sqrt(2/(n+1)) phi_n - sqrt(n/(n+1)) phi_{n-1}.
pub fn oscillator_eigenfunctions(n_max: usize, q: &[f64]) -> Vec<Vec<f64>> {
    let norm0 = std::f64::consts::PI.powf(-0.25);
    let mut rows = Vec::with_capacity(n_max + 1);
    rows.push(q.iter().map(|&x| norm0 * (-x * x / 2.0).exp()).collect::<Vec<_>>());
    if n_max >= 1 {
        let r0 = rows[0].clone();
        rows.push(
            q.iter()
                .zip(&r0)
                .map(|(&x, &p)| 2f64.sqrt() * x * p)
                .collect(),
        );
    }
    for n in 1..n_max {
        let coeff_a = (2.0 / (n as f64 + 1.0)).sqrt();
        let coeff_b = (n as f64 / (n as f64 + 1.0)).sqrt();
        let next: Vec<f64> = q
            .iter()
            .enumerate()
            .map(|(i, &x)| coeff_a * x * rows[n][i] - coeff_b * rows[n - 1][i])
            .collect();
        rows.push(next);
    }
    rows
}

pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// ln(n!) via the lgamma-free cumulative product, exact enough for n <= 300.
pub fn ln_factorial(n: u32) -> f64 {
    (1..=n as u64).map(|k| (k as f64).ln()).sum()
}

pub fn sqrt_factorial(n: u32) -> f64 {
    (0.5 * ln_factorial(n)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn expm_of_zero_is_identity() {
        let z = Array2::<C64>::zeros((3, 3));
        let e = expm(&z);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((e[(i, j)] - c(expect, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn expm_rotation_generator() {
        // exp([[0, -t],[t, 0]]) = [[cos t, -sin t],[sin t, cos t]]
        let t = 0.7;
        let g = array![[ZERO, c(-t, 0.0)], [c(t, 0.0), ZERO]];
        let e = expm(&g);
        assert!((e[(0, 0)].re - t.cos()).abs() < 1e-14);
        assert!((e[(1, 0)].re - t.sin()).abs() < 1e-14);
    }

    #[test]
    fn expm_large_argument_accuracy() {
        // exp(i h) for Hermitian h stays unitary under heavy scaling.
        let h = array![
            [c(3.0, 0.0), c(11.0, 2.0)],
            [c(11.0, -2.0), c(-5.0, 0.0)]
        ];
        let u = expm(&h.mapv(|x| I * x));
        let udu = dagger(&u).dot(&u);
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((udu[(i, j)] - c(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn simpson_integrates_gaussian() {
        let n = 2001;
        let (lo, hi) = (-10.0, 10.0);
        let step = (hi - lo) / (n - 1) as f64;
        let vals: Vec<f64> = (0..n)
            .map(|i| {
                let x = lo + i as f64 * step;
                (-x * x).exp()
            })
            .collect();
        assert!((simpson(&vals, step) - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn oscillator_functions_are_orthonormal() {
        let n = 1601;
        let (lo, hi) = (-12.0, 12.0);
        let step = (hi - lo) / (n - 1) as f64;
        let q: Vec<f64> = (0..n).map(|i| lo + i as f64 * step).collect();
        let phi = oscillator_eigenfunctions(8, &q);
        for a in 0..=8usize {
            for b in a..=8usize {
                let prod: Vec<f64> = (0..n).map(|i| phi[a][i] * phi[b][i]).collect();
                let val = simpson(&prod, step);
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!(
                    (val - expect).abs() < 1e-10,
                    "<{a}|{b}> = {val}"
                );
            }
        }
    }

    #[test]
    fn binomial_matches_pascal() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(10, 0), 1.0);
        assert_eq!(binomial(4, 5), 0.0);
    }
}
