//! Frequency-domain analysis of the squared-amplitude estimator.
//!
//! The quantization error of `s = -A cos(theta)` expands as
//!
//! ```text
//! e(theta) = -(2 step/pi) sum_{m odd} (-1)^((m-1)/2) G_m cos(m theta)
//! G_m      = sum_{k>=1} (-1)^k/k J_m(2 pi k A/step)
//! ```
//!
//! so that `g = (step/pi) G_1` and the error-error correlation term is
//! `h = (step/pi)^2 sum_{m odd} G_m^2 c_N(m)`, where `c_N(m)` is the
//! record-geometry factor. Under coherent sampling `c_N(m) = 1/2` when
//! `m = +-1 (mod N)` and vanishes otherwise.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::signal::gcd;
use crate::special::{bessel_j_nonneg, g_closed, g_min_envelope, schlomilch_odd, SeriesControl};
use crate::sum::NeumaierSum;

// ---------------------------------------------------------------------------
// Diophantine sieve
// ---------------------------------------------------------------------------

/// Sign patterns `(eps_U, eps_H, eps_L)` of the eight product-to-sum terms,
/// in expansion order.
pub const SIEVE_SIGNS: [[i8; 3]; 8] = [
    [1, 1, 1],
    [1, -1, -1],
    [1, 1, -1],
    [1, -1, 1],
    [-1, 1, 1],
    [-1, -1, -1],
    [-1, 1, -1],
    [-1, -1, 1],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SieveSolution {
    pub term_index: usize,
    pub signs: [i8; 3],
    /// Coefficient of the random phase in this term.
    pub phase_coefficient: i64,
    pub satisfied: bool,
}

fn check_odd(name: &str, v: i64) -> Result<()> {
    if v <= 0 || v % 2 == 0 {
        return Err(invalid(format!(
            "{name} must be an odd positive integer, got {v}"
        )));
    }
    Ok(())
}

/// Which terms of `cos(I x_i) cos(U x_u) cos(H x_h) cos(L x_l)` survive
/// averaging over a uniform phase.
pub fn diophantine_sieve(i: i64, u: i64, h: i64, l: i64) -> Result<Vec<SieveSolution>> {
    check_odd("I", i)?;
    check_odd("U", u)?;
    check_odd("H", h)?;
    check_odd("L", l)?;
    Ok(SIEVE_SIGNS
        .iter()
        .enumerate()
        .map(|(term_index, &signs)| {
            let c = i + signs[0] as i64 * u + signs[1] as i64 * h + signs[2] as i64 * l;
            SieveSolution {
                term_index,
                signs,
                phase_coefficient: c,
                satisfied: c == 0,
            }
        })
        .collect())
}

/// `E[cos(I(k_i+phi)) cos(U(k_u+phi)) cos(H(k_h+phi)) cos(L(k_l+phi))]` over
/// uniform `phi`, assembled from the surviving sieve terms.
pub fn expected_product(orders: [i64; 4], phases: [f64; 4]) -> Result<f64> {
    let [i, u, h, l] = orders;
    let terms = diophantine_sieve(i, u, h, l)?;
    let mut acc = 0.0;
    for t in terms.iter().filter(|t| t.satisfied) {
        let arg = i as f64 * phases[0]
            + t.signs[0] as f64 * u as f64 * phases[1]
            + t.signs[1] as f64 * h as f64 * phases[2]
            + t.signs[2] as f64 * l as f64 * phases[3];
        acc += arg.cos();
    }
    Ok(acc / 8.0)
}

// ---------------------------------------------------------------------------
// h term
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HTerm {
    pub value: f64,
    /// Estimated magnitude of the neglected harmonics.
    pub tail_estimate: f64,
    /// Number of harmonic orders summed.
    pub orders_used: usize,
    pub converged: bool,
}

fn check_inputs(a: f64, step: f64, n: usize) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid(format!(
            "amplitude must be finite and > 0, got {a}"
        )));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid(format!("step must be finite and > 0, got {step}")));
    }
    if n < 3 {
        return Err(Error::TooFewSamples(n));
    }
    Ok(())
}

fn check_coprime(lambda: u64, n: usize) -> Result<()> {
    if lambda == 0 || gcd(lambda, n as u64) != 1 {
        return Err(Error::NotCoprime { lambda, n });
    }
    Ok(())
}

/// Odd orders `m = +-1 (mod N)` in increasing order.
struct AliasOrders {
    n: u64,
    step: u64,
    next_j: u64,
    pending: Option<u64>,
    started: bool,
}

impl AliasOrders {
    fn new(n: usize) -> Self {
        let n = n as u64;
        // for odd N only even multiples of N give odd neighbours
        let step = if n.is_multiple_of(2) { n } else { 2 * n };
        Self {
            n,
            step,
            next_j: 1,
            pending: None,
            started: false,
        }
    }
}

impl Iterator for AliasOrders {
    type Item = u64;
    fn next(&mut self) -> Option<u64> {
        if !self.started {
            self.started = true;
            return Some(1);
        }
        if let Some(m) = self.pending.take() {
            return Some(m);
        }
        let centre = self.next_j * self.step;
        self.next_j += 1;
        debug_assert!(centre >= self.n);
        self.pending = Some(centre + 1);
        Some(centre - 1)
    }
}

/// Finite-record error-error correlation term `h(A, step, N)` under coherent
/// sampling.
///
/// Sums `G_m^2` over the aliased orders `m = 1, jN +- 1, ...`, each `G_m`
/// being exact. The neglected orders are estimated from the running mean of
/// `m^2 G_m^2`, and that estimate is added to the value. The work grows like
/// `1/ctrl.abs_tol`; `abs_tol = 1e-11` already gives agreement with the exact
/// engine near `1e-12` on records of a few hundred samples.
pub fn h_term(a: f64, step: f64, n: usize, lambda: u64, ctrl: &SeriesControl) -> Result<HTerm> {
    check_inputs(a, step, n)?;
    check_coprime(lambda, n)?;
    ctrl.validate()?;
    let gamma = a / step;
    let scale = (step / PI).powi(2) / 2.0;
    // orders per unit of m among the aliased set
    let density = if n.is_multiple_of(2) {
        2.0 / n as f64
    } else {
        1.0 / n as f64
    };

    let mut acc = NeumaierSum::new();
    let mut weighted = NeumaierSum::new(); // sum of m^2 G_m^2 beyond m = 1
    let mut counted = 0usize;
    let mut orders = AliasOrders::new(n);
    let mut used = 0usize;
    let mut tail = f64::INFINITY;
    const BLOCK: usize = 64;
    while used < ctrl.max_terms {
        let block: Vec<u64> = orders
            .by_ref()
            .take(BLOCK.min(ctrl.max_terms - used))
            .collect();
        let vals: Vec<f64> = block
            .par_iter()
            .map(|&m| schlomilch_odd(m, gamma).map(|g| g * g))
            .collect::<Result<_>>()?;
        for (&m, &v) in block.iter().zip(&vals) {
            acc.add(v);
            if m > 1 {
                weighted.add((m * m) as f64 * v);
                counted += 1;
            }
        }
        used += block.len();
        let last = *block.last().expect("non-empty block") as f64;
        if counted > 0 {
            // sum over aliased m > last of 1/m^2 ~ density / last
            tail = scale * weighted.value() / counted as f64 * density / last;
        }
        if counted >= 4 && tail <= ctrl.tolerance(scale * acc.value()) {
            break;
        }
    }
    let tail_value = if tail.is_finite() { tail } else { 0.0 };
    let value = scale * acc.value() + tail_value;
    Ok(HTerm {
        value,
        tail_estimate: tail,
        orders_used: used,
        converged: tail <= ctrl.tolerance(value),
    })
}

/// Geometry factor `c_N(m) = (1/N^2) sum_{i,u} cos(m d) cos(d)`, `d = k_i - k_u`,
/// evaluated from the sample angles directly (any `lambda`).
pub fn geometry_factor(m: u64, lambda: u64, n: usize) -> f64 {
    let power = |j: i64| -> f64 {
        let (mut re, mut im) = (NeumaierSum::new(), NeumaierSum::new());
        let nn = n as i128;
        for i in 0..n {
            let idx = ((j as i128 * lambda as i128 * i as i128).rem_euclid(nn)) as f64;
            let ang = TAU * idx / n as f64;
            re.add(ang.cos());
            im.add(ang.sin());
        }
        re.value().powi(2) + im.value().powi(2)
    };
    let nf = n as f64;
    (power(m as i64 + 1) + power(m as i64 - 1)) / (2.0 * nf * nf)
}

/// `h` with the geometry factor computed by brute force for every odd order
/// up to `max_order`. Works for any `lambda`, including non-coherent records.
pub fn h_term_direct(a: f64, step: f64, n: usize, lambda: u64, max_order: u64) -> Result<f64> {
    check_inputs(a, step, n)?;
    if lambda == 0 {
        return Err(invalid("lambda must be >= 1"));
    }
    let gamma = a / step;
    let orders: Vec<u64> = (1..=max_order).step_by(2).collect();
    let terms: Vec<f64> = orders
        .par_iter()
        .map(|&m| {
            let c = geometry_factor(m, lambda, n);
            if c < 1e-14 {
                return Ok(0.0);
            }
            schlomilch_odd(m, gamma).map(|g| g * g * c)
        })
        .collect::<Result<_>>()?;
    let acc: NeumaierSum = terms.into_iter().collect();
    Ok((step / PI).powi(2) * acc.value())
}

/// `h` from the double Bessel series with each `(h, k)` product summed over
/// the phase as `(J_0(R) - J_0(Rbar))/4`, truncated at `k_max` in both indices.
///
/// Converges only like `1/k_max`; useful as an independent cross-check.
pub fn h_term_double_series(a: f64, step: f64, n: usize, lambda: u64, k_max: usize) -> Result<f64> {
    check_inputs(a, step, n)?;
    check_coprime(lambda, n)?;
    let z: Vec<f64> = (1..=k_max).map(|k| TAU * k as f64 * a / step).collect();
    let per_offset: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| {
            let d = TAU * ((lambda as u128 * j as u128) % n as u128) as f64 / n as f64;
            let cd = d.cos();
            let mut acc = NeumaierSum::new();
            for (hi, &zh) in z.iter().enumerate() {
                for (ki, &zk) in z.iter().enumerate() {
                    let cross = 2.0 * zh * zk * cd;
                    let base = zh * zh + zk * zk;
                    let r = (base - cross).max(0.0).sqrt();
                    let rbar = (base + cross).max(0.0).sqrt();
                    let sign = if (hi + ki) % 2 == 0 { 1.0 } else { -1.0 };
                    let w = sign / ((hi + 1) * (ki + 1)) as f64;
                    acc.add(w * (bessel_j_nonneg(0, r) - bessel_j_nonneg(0, rbar)) / 4.0);
                }
            }
            cd * acc.value()
        })
        .collect();
    let acc: NeumaierSum = per_offset.into_iter().collect();
    Ok((step / PI).powi(2) * acc.value() / n as f64)
}

// ---------------------------------------------------------------------------
// Bias, bounds, asymptotics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasReport {
    pub bias_finite_n: f64,
    pub bias_asymptotic: f64,
    pub g_value: f64,
    pub h_value: f64,
    /// Estimated truncation error of `bias_finite_n`.
    pub tail_estimate: f64,
    pub bound_b1: f64,
    /// Envelope value `B2` at the level nearest to `A`.
    pub bound_b2: f64,
}

/// Bias of `Â^2` for an `N`-sample coherent record, `4 A g + 8 h`.
pub fn bias_finite_n(
    a: f64,
    step: f64,
    n: usize,
    lambda: u64,
    ctrl: &SeriesControl,
) -> Result<BiasReport> {
    check_inputs(a, step, n)?;
    check_coprime(lambda, n)?;
    let g = g_closed(a, step);
    // below half a step the output is identically zero
    let h = if a < step / 2.0 {
        HTerm {
            value: a * a / 8.0,
            tail_estimate: 0.0,
            orders_used: 0,
            converged: true,
        }
    } else {
        h_term(a, step, n, lambda, ctrl)?
    };
    Ok(BiasReport {
        bias_finite_n: 4.0 * a * g + 8.0 * h.value,
        bias_asymptotic: 4.0 * g * (a + g),
        g_value: g,
        h_value: h.value,
        tail_estimate: 8.0 * h.tail_estimate,
        bound_b1: bound_b1(a, step)?,
        bound_b2: bound_b2(step, nearest_envelope_level(a, step))?,
    })
}

/// `4 g (A + g)`, the bias of `Â^2` as `N -> inf`.
pub fn asymptotic_bias(a: f64, step: f64) -> f64 {
    let g = g_closed(a, step);
    4.0 * g * (a + g)
}

/// `(2 pi A)^(-1/3)`-scaled constant of the Landau-based bound on `|g|`.
pub fn landau_b(a: f64, step: f64) -> Result<f64> {
    if !(a > 0.0 && step > 0.0) {
        return Err(invalid("amplitude and step must be > 0"));
    }
    let z = crate::special::riemann_zeta_4_3();
    Ok(step.powf(4.0 / 3.0) * z * crate::special::LANDAU_C / (PI * (TAU * a).cbrt()))
}

/// Upper bound `B1 = 4 A B + 4 B^2` on the asymptotic bias magnitude.
pub fn bound_b1(a: f64, step: f64) -> Result<f64> {
    let b = landau_b(a, step)?;
    Ok(4.0 * a * b + 4.0 * b * b)
}

/// Asymptotic bias at the `p`-th local minimum of `g`, `A = (p - 1/2) step`.
pub fn bound_b2(step: f64, p: u64) -> Result<f64> {
    if p == 0 {
        return Err(invalid("envelope level p must be >= 1"));
    }
    if !(step > 0.0) {
        return Err(invalid("step must be > 0"));
    }
    Ok(4.0 * (p as f64 - 0.5) * step * g_min_envelope(p, step))
}

/// Level `p` whose envelope abscissa `(p - 1/2) step` is nearest to `A`.
pub fn nearest_envelope_level(a: f64, step: f64) -> u64 {
    ((a / step + 0.5).round() as u64).max(1)
}

/// Largest `|B2|` over levels whose abscissa lies in `(0, a_max]`.
pub fn bound_b2_max(step: f64, a_max: f64) -> Result<(u64, f64)> {
    let top = ((a_max / step) + 0.5).floor().max(1.0) as u64;
    let mut best = (1, bound_b2(step, 1)?.abs());
    for p in 2..=top {
        let v = bound_b2(step, p)?.abs();
        if v > best.1 {
            best = (p, v);
        }
    }
    Ok(best)
}

/// `E[(Â^2)^2]` as `N -> inf`.
pub fn asymptotic_second_moment(a: f64, step: f64) -> f64 {
    let g = g_closed(a, step);
    let (a2, g2) = (a * a, g * g);
    a2 * a2 + 8.0 * a2 * a * g + 24.0 * a2 * g2 + 32.0 * a * g2 * g + 16.0 * g2 * g2
}

/// Second-order approximation of `E[Â]` from the moments of `Â^2`.
pub fn amp_bias_delta_method(mean_amp_sq: f64, var_amp_sq: f64) -> Result<f64> {
    if !(mean_amp_sq > 0.0) {
        return Err(invalid(format!(
            "mean of the squared amplitude must be > 0, got {mean_amp_sq}"
        )));
    }
    if var_amp_sq < 0.0 {
        return Err(invalid(format!("variance must be >= 0, got {var_amp_sq}")));
    }
    Ok(mean_amp_sq.sqrt() - var_amp_sq / (8.0 * mean_amp_sq.powf(1.5)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn satisfied(i: i64, u: i64, h: i64, l: i64) -> Vec<usize> {
        diophantine_sieve(i, u, h, l)
            .unwrap()
            .iter()
            .filter(|s| s.satisfied)
            .map(|s| s.term_index)
            .collect()
    }

    #[test]
    fn sieve_examples() {
        assert_eq!(satisfied(1, 1, 1, 1), vec![1, 6, 7]);
        assert_eq!(satisfied(3, 1, 1, 1), vec![5]);
        assert_eq!(satisfied(5, 3, 1, 1), vec![5]);
        assert!(diophantine_sieve(2, 1, 1, 1).is_err());
        assert!(diophantine_sieve(1, -1, 1, 1).is_err());
    }

    #[test]
    fn expected_product_matches_quadrature() {
        let orders = [3, 1, 1, 1];
        let ph = [0.3, 1.1, -0.7, 2.0];
        let m = 4096;
        let mut acc = 0.0;
        for j in 0..m {
            let phi = TAU * j as f64 / m as f64;
            acc += orders
                .iter()
                .zip(ph)
                .map(|(&o, p)| (o as f64 * (p + phi)).cos())
                .product::<f64>();
        }
        let q = acc / m as f64;
        assert!((expected_product(orders, ph).unwrap() - q).abs() < 1e-13);
        assert!(
            (expected_product([1, 1, 1, 1], ph).unwrap() - quad([1, 1, 1, 1], ph)).abs() < 1e-13
        );
    }

    fn quad(orders: [i64; 4], ph: [f64; 4]) -> f64 {
        let m = 4096;
        (0..m)
            .map(|j| {
                let phi = TAU * j as f64 / m as f64;
                orders
                    .iter()
                    .zip(ph)
                    .map(|(&o, p)| (o as f64 * (p + phi)).cos())
                    .product::<f64>()
            })
            .sum::<f64>()
            / m as f64
    }

    #[test]
    fn alias_orders() {
        let even: Vec<u64> = AliasOrders::new(10).take(5).collect();
        assert_eq!(even, vec![1, 9, 11, 19, 21]);
        let odd: Vec<u64> = AliasOrders::new(7).take(5).collect();
        assert_eq!(odd, vec![1, 13, 15, 27, 29]);
    }

    #[test]
    fn geometry_factor_coherent() {
        for (lambda, n) in [(7u64, 50usize), (3, 11)] {
            for m in (1..60u64).step_by(2) {
                let want = if (m + 1) % n as u64 == 0 || (m + n as u64 - 1).is_multiple_of(n as u64)
                {
                    0.5
                } else {
                    0.0
                };
                assert!(
                    (geometry_factor(m, lambda, n) - want).abs() < 1e-13,
                    "m={m} n={n}"
                );
            }
        }
    }

    #[test]
    fn h_term_limits() {
        let step = 2.0 / 64.0;
        let a = 0.41;
        let g = g_closed(a, step);
        let ctrl = SeriesControl {
            abs_tol: 1e-13,
            ..Default::default()
        };
        let h = h_term(a, step, 501, 2, &ctrl).unwrap();
        assert!((h.value - g * g / 2.0).abs() < 1e-6);
        // direct geometry path agrees on a short coherent record
        let n = 12;
        let hd = h_term_direct(a, step, n, 5, 2001).unwrap();
        let hc = h_term(a, step, n, 5, &ctrl).unwrap();
        assert!((hd - hc.value).abs() < 1e-6, "{hd} vs {}", hc.value);
        assert!(h_term(a, step, 10, 4, &ctrl).is_err());
    }

    #[test]
    fn double_series_is_a_loose_cross_check() {
        let step = 2.0 / 16.0;
        let a = 0.3;
        let n = 7;
        let exact = h_term(
            a,
            step,
            n,
            3,
            &SeriesControl {
                abs_tol: 1e-13,
                ..Default::default()
            },
        )
        .unwrap()
        .value;
        let ds = h_term_double_series(a, step, n, 3, 300).unwrap();
        assert!((ds - exact).abs() < 0.02 * exact.abs(), "{ds} vs {exact}");
    }

    #[test]
    fn sub_bin_bias() {
        let step = 2.0 / 256.0;
        for a in [1e-6, 0.1 * step, 0.49 * step] {
            let r = bias_finite_n(a, step, 50, 7, &SeriesControl::default()).unwrap();
            assert!((r.bias_asymptotic + a * a).abs() < 1e-18);
            assert!((r.bias_finite_n + a * a).abs() < 1e-18);
        }
    }

    #[test]
    fn fig5_value() {
        let step = 2.0 / 1024.0;
        let b = asymptotic_bias(10.93 * step, step) / (step * step);
        assert!((b - 0.9398317).abs() < 1e-6, "{b}");
    }

    #[test]
    fn bounds() {
        let step = 2.0 / 64.0;
        assert!((bound_b2(step, 1).unwrap() + step * step / 2.0).abs() < 1e-18);
        let a = 1.5 * step;
        assert!((bound_b2(step, 2).unwrap() - 4.0 * a * g_closed(a, step)).abs() < 1e-15);
        assert!(bound_b2(step, 0).is_err());
        let r1 = bound_b1(0.5, 1e-4).unwrap() / bound_b1(0.5, 2e-4).unwrap();
        assert!((r1 - 2f64.powf(-4.0 / 3.0)).abs() < 1e-3);
        assert_eq!(nearest_envelope_level(0.1 * step, step), 1);
        assert_eq!(nearest_envelope_level(2.4 * step, step), 3);
        assert_eq!(nearest_envelope_level(2.6 * step, step), 3);
    }

    #[test]
    fn second_moment_is_perfect_square() {
        for (a, step) in [(0.3, 0.01), (0.999, 2.0 / 4096.0), (0.004, 0.01)] {
            let mean = asymptotic_bias(a, step) + a * a;
            let m2 = asymptotic_second_moment(a, step);
            assert!((m2 - mean * mean).abs() <= 1e-12 * a.powi(4));
        }
        assert!(asymptotic_second_moment(0.004, 0.01).abs() < 1e-14 * 0.004f64.powi(4));
    }

    #[test]
    fn delta_method() {
        assert_eq!(amp_bias_delta_method(4.0, 0.0).unwrap(), 2.0);
        assert!((amp_bias_delta_method(4.0, 0.8).unwrap() - 1.9875).abs() < 1e-15);
        assert!(amp_bias_delta_method(0.0, 0.1).is_err());
    }
}
