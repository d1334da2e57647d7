//! Seeded Monte Carlo estimation of estimator moments under a random phase.
//!
//! Replicate `r` draws from its own ChaCha8 stream `(seed, r)`, and replicates
//! are accumulated in fixed-size chunks merged pairwise, so reports are
//! identical for any thread count.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::lsfit::SineBasis;
use crate::signal::{gaussian, QuantizerSpec, SineSpec};
use crate::sum::pairwise_reduce;

/// Replicates per accumulation chunk.
const CHUNK: usize = 512;

/// Name of the Gaussian sampler, for output metadata.
pub const GAUSSIAN_METHOD: &str = "box-muller";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum McModel {
    /// Quantize the (optionally noisy) record.
    #[default]
    Quantizer,
    /// No quantizer; add i.i.d. uniform noise on `[-step/2, step/2)`.
    SimpleUniform,
    /// No quantizer; add only the Gaussian noise.
    GaussianNoQuant,
}

impl McModel {
    pub fn name(&self) -> &'static str {
        match self {
            McModel::Quantizer => "quantizer",
            McModel::SimpleUniform => "simple-uniform",
            McModel::GaussianNoQuant => "gaussian-no-quant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub replicates: usize,
    pub seed: u64,
    pub noise_sigma: f64,
    pub model: McModel,
}

impl McConfig {
    pub fn new(replicates: usize, seed: u64) -> Self {
        Self {
            replicates,
            seed,
            noise_sigma: 0.0,
            model: McModel::Quantizer,
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn with_model(mut self, model: McModel) -> Self {
        self.model = model;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::TooFewReplicates(self.replicates));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(invalid(format!(
                "noise sigma must be finite and >= 0, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// `max(5000, ceil(1e6 / N))`.
pub fn default_replicates(n: usize) -> usize {
    5000usize.max(1_000_000usize.div_ceil(n.max(1)))
}

/// The random stream of replicate `r`.
pub fn replicate_rng(seed: u64, r: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r);
    rng
}

/// Sample moments of the replicate values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McReport {
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// `mean - target`.
    pub bias: f64,
    /// `bias^2 + variance`.
    pub mse: f64,
    pub std_error_mean: f64,
    pub std_error_variance: f64,
    pub replicates_used: usize,
}

/// Running central moments up to fourth order (Welford update, Chan/Pébay merge).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: f64,
    pub mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        *self = Moments::merge(
            self,
            &Moments {
                count: 1.0,
                mean: x,
                m2: 0.0,
                m3: 0.0,
                m4: 0.0,
            },
        );
    }

    pub fn merge(a: &Moments, b: &Moments) -> Moments {
        if a.count == 0.0 {
            return *b;
        }
        if b.count == 0.0 {
            return *a;
        }
        let (na, nb) = (a.count, b.count);
        let n = na + nb;
        let d = b.mean - a.mean;
        let d_n = d / n;
        let m2 = a.m2 + b.m2 + d * d_n * na * nb;
        let m3 =
            a.m3 + b.m3 + d * d_n * d_n * na * nb * (na - nb) + 3.0 * d_n * (na * b.m2 - nb * a.m2);
        let m4 = a.m4
            + b.m4
            + d * d_n * d_n * d_n * na * nb * (na * na - na * nb + nb * nb)
            + 6.0 * d_n * d_n * (na * na * b.m2 + nb * nb * a.m2)
            + 4.0 * d_n * (na * b.m3 - nb * a.m3);
        Moments {
            count: n,
            mean: a.mean + d_n * nb,
            m2,
            m3,
            m4,
        }
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2.0 {
            0.0
        } else {
            self.m2 / (self.count - 1.0)
        }
    }

    /// Central fourth moment (population normalization).
    pub fn fourth_central(&self) -> f64 {
        self.m4 / self.count
    }

    pub fn report(&self, target: f64) -> McReport {
        let r = self.count;
        let var = self.variance();
        let m4 = self.fourth_central();
        let var_of_var = ((m4 - var * var * (r - 3.0) / (r - 1.0)) / r).max(0.0);
        let bias = self.mean - target;
        McReport {
            mean: self.mean,
            variance: var,
            bias,
            mse: bias * bias + var,
            std_error_mean: (var / r).sqrt(),
            std_error_variance: var_of_var.sqrt(),
            replicates_used: self.count as usize,
        }
    }
}

/// Accumulates `f(rng)` over replicates `0..replicates`.
pub fn run_replicates(
    seed: u64,
    replicates: usize,
    f: impl Fn(&mut ChaCha8Rng) -> f64 + Sync,
) -> Moments {
    let chunks: Vec<usize> = (0..replicates).step_by(CHUNK).collect();
    let parts: Vec<Moments> = chunks
        .par_iter()
        .map(|&start| {
            let mut m = Moments::default();
            for r in start..(start + CHUNK).min(replicates) {
                let mut rng = replicate_rng(seed, r as u64);
                m.push(f(&mut rng));
            }
            m
        })
        .collect();
    pairwise_reduce(&parts, &Moments::merge).unwrap_or_default()
}

/// Draws one record into `y` for a random phase.
fn draw_record(
    spec: &SineSpec,
    q: &QuantizerSpec,
    basis: &SineBasis,
    cfg: &McConfig,
    rng: &mut ChaCha8Rng,
    y: &mut [f64],
) {
    let phi: f64 = rng.gen::<f64>() * TAU;
    let (sp, cp) = phi.sin_cos();
    let (a, d, sigma) = (spec.amplitude, spec.offset, cfg.noise_sigma);
    for ((yi, &ck), &sk) in y.iter_mut().zip(basis.cos()).zip(basis.sin()) {
        let mut s = -a * (ck * cp - sk * sp) + d;
        if sigma > 0.0 {
            s += sigma * gaussian(rng);
        }
        *yi = match cfg.model {
            McModel::Quantizer => q.quantize(s),
            McModel::SimpleUniform => s + q.step * (rng.gen::<f64>() - 0.5),
            McModel::GaussianNoQuant => s,
        };
    }
}

fn mc_fit(spec: &SineSpec, q: &QuantizerSpec, cfg: &McConfig, amp: bool) -> Result<McReport> {
    cfg.validate()?;
    let basis = SineBasis::new(spec.lambda, spec.n_samples)?;
    let m = run_replicates(cfg.seed, cfg.replicates, |rng| {
        let mut y = vec![0.0; spec.n_samples];
        draw_record(spec, q, &basis, cfg, rng, &mut y);
        let a2 = basis.fit_theta(&y).expect("matching length").amp_sq();
        if amp {
            a2.sqrt()
        } else {
            a2
        }
    });
    let target = if amp {
        spec.amplitude
    } else {
        spec.amplitude * spec.amplitude
    };
    Ok(m.report(target))
}

/// Monte Carlo moments of `Â^2`.
pub fn mc_amp_sq(spec: &SineSpec, q: &QuantizerSpec, cfg: &McConfig) -> Result<McReport> {
    mc_fit(spec, q, cfg, false)
}

/// Monte Carlo moments of `Â`.
pub fn mc_amp(spec: &SineSpec, q: &QuantizerSpec, cfg: &McConfig) -> Result<McReport> {
    mc_fit(spec, q, cfg, true)
}

/// The scalar regression example: `s_i = theta cos(phi_i)` with independent
/// phases, estimated by `sum y_i h_i / sum h_i^2`.
pub fn mc_scalar_example(
    theta: f64,
    q: &QuantizerSpec,
    n: usize,
    cfg: &McConfig,
) -> Result<McReport> {
    cfg.validate()?;
    if n < 1 {
        return Err(Error::TooFewSamples(n));
    }
    let m = run_replicates(cfg.seed, cfg.replicates, |rng| {
        let (mut num, mut den) = (0.0, 0.0);
        for _ in 0..n {
            let h = (rng.gen::<f64>() * TAU).cos();
            let mut s = theta * h;
            if cfg.noise_sigma > 0.0 {
                s += cfg.noise_sigma * gaussian(rng);
            }
            let y = match cfg.model {
                McModel::Quantizer => q.quantize(s),
                McModel::SimpleUniform => s + q.step * (rng.gen::<f64>() - 0.5),
                McModel::GaussianNoQuant => s,
            };
            num += y * h;
            den += h * h;
        }
        num / den
    });
    Ok(m.report(theta))
}

/// Second-order ratio expansion of the scalar estimator under the uniform
/// error model. Returns `(mean, variance)`.
pub fn simple_model_moments(theta: f64, step: f64, n: usize) -> Result<(f64, f64)> {
    if n < 1 {
        return Err(Error::TooFewSamples(n));
    }
    let nf = n as f64;
    let (er, es) = (theta / 2.0, 0.5);
    let var_r = theta * theta / (8.0 * nf) + step * step / (24.0 * nf);
    let var_s = 1.0 / (8.0 * nf);
    let cov = theta / (8.0 * nf);
    // E(R/S) ~ ER/ES - Cov/ES^2 + ER VarS/ES^3, and likewise for the variance,
    // written without dividing by ER so theta = 0 is regular
    let mean = er / es - cov / (es * es) + er * var_s / es.powi(3);
    let var = var_r / (es * es) - 2.0 * er * cov / es.powi(3) + er * er * var_s / es.powi(4);
    Ok((mean, var))
}

/// `Var(Â^2)` for an unquantized record with Gaussian noise, by Monte Carlo.
pub fn gaussian_reference_variance(
    a: f64,
    sigma: f64,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<f64> {
    if sigma == 0.0 {
        return Ok(0.0);
    }
    let spec = SineSpec::new(a, 1, n)?;
    let cfg = McConfig::new(replicates, seed)
        .with_sigma(sigma)
        .with_model(McModel::GaussianNoQuant);
    // the quantizer is unused by this model
    let q = QuantizerSpec::new(1.0)?;
    Ok(mc_amp_sq(&spec, &q, &cfg)?.variance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(bits: u32) -> QuantizerSpec {
        QuantizerSpec::from_bits(bits).unwrap()
    }

    #[test]
    fn moments_merge_matches_direct() {
        let xs: Vec<f64> = (0..1000)
            .map(|i| ((i * 37 % 101) as f64).sqrt() + 1e6)
            .collect();
        let mut one = Moments::default();
        xs.iter().for_each(|&x| one.push(x));
        let mean = xs.iter().sum::<f64>() / 1000.0;
        let m2: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
        let m4: f64 = xs.iter().map(|x| (x - mean).powi(4)).sum();
        assert!((one.mean - mean).abs() < 1e-9);
        assert!((one.variance() - m2 / 999.0).abs() < 1e-9);
        assert!((one.fourth_central() - m4 / 1000.0).abs() < 1e-6);
        let (a, b) = xs.split_at(377);
        let mut ma = Moments::default();
        let mut mb = Moments::default();
        a.iter().for_each(|&x| ma.push(x));
        b.iter().for_each(|&x| mb.push(x));
        let m = Moments::merge(&ma, &mb);
        assert!((m.variance() - one.variance()).abs() < 1e-9);
        assert!((m.fourth_central() - one.fourth_central()).abs() < 1e-6);
    }

    #[test]
    fn config_validation() {
        let spec = SineSpec::new(0.5, 1, 8).unwrap();
        assert_eq!(
            mc_amp_sq(&spec, &q(4), &McConfig::new(1, 0)),
            Err(Error::TooFewReplicates(1))
        );
        assert!(mc_amp_sq(&spec, &q(4), &McConfig::new(10, 0).with_sigma(-1.0)).is_err());
        assert_eq!(default_replicates(100), 10_000);
        assert_eq!(default_replicates(2000), 5000);
    }

    #[test]
    fn sub_bin_is_deterministic_zero() {
        let qq = q(8);
        let spec = SineSpec::new(0.3 * qq.step, 7, 50).unwrap();
        let r = mc_amp_sq(&spec, &qq, &McConfig::new(100, 1)).unwrap();
        assert_eq!(r.mean, 0.0);
        assert_eq!(r.variance, 0.0);
        let r = mc_amp(
            &SineSpec::new(0.0, 3, 16).unwrap(),
            &q(4),
            &McConfig::new(50, 2),
        )
        .unwrap();
        assert!(r.mean >= 0.0);
    }

    #[test]
    fn unquantized_noiseless_is_exact() {
        let spec = SineSpec::new(0.7, 5, 64).unwrap();
        let cfg = McConfig::new(200, 3).with_model(McModel::GaussianNoQuant);
        let r = mc_amp(&spec, &q(8), &cfg).unwrap();
        assert!((r.mean - 0.7).abs() < 1e-14);
        assert!(r.variance < 1e-28);
    }

    #[test]
    fn reproducible_across_thread_counts() {
        let spec = SineSpec::new(0.61, 13, 100).unwrap();
        let cfg = McConfig::new(3000, 42).with_sigma(0.01);
        let a = mc_amp_sq(&spec, &q(6), &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let b = pool.install(|| mc_amp_sq(&spec, &q(6), &cfg).unwrap());
        assert_eq!(a, b);
        let c = mc_amp_sq(&spec, &q(6), &McConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn simple_model_closed_form() {
        let (m, v) = simple_model_moments(0.0, 0.25, 200).unwrap();
        assert_eq!(m, 0.0);
        assert!((v - 0.0625 / 1200.0).abs() < 1e-18);
        let (m, v) = simple_model_moments(0.8, 0.25, 50).unwrap();
        assert!((m - 0.8).abs() < 1e-15);
        assert!((v - 0.0625 / 300.0).abs() < 1e-17);
    }

    #[test]
    fn simple_model_against_scalar_mc() {
        let qq = q(3);
        let n = 200;
        let (_, v) = simple_model_moments(0.6, qq.step, n).unwrap();
        let cfg = McConfig::new(20_000, 9).with_model(McModel::SimpleUniform);
        let r = mc_scalar_example(0.6, &qq, n, &cfg).unwrap();
        assert!((r.variance / v - 1.0).abs() < 0.05, "{} vs {v}", r.variance);
    }

    #[test]
    fn gaussian_reference() {
        assert_eq!(
            gaussian_reference_variance(0.5, 0.0, 100, 10, 0).unwrap(),
            0.0
        );
        let v1 = gaussian_reference_variance(0.5, 1e-3, 100, 4000, 5).unwrap();
        let v2 = gaussian_reference_variance(0.5, 2e-3, 100, 4000, 5).unwrap();
        assert!((v2 / v1 - 4.0).abs() < 0.4, "{}", v2 / v1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn std_error_relation(seed in 0u64..1000, r in 2usize..300) {
            let spec = SineSpec::new(0.45, 3, 16).unwrap();
            let rep = mc_amp_sq(&spec, &q(5), &McConfig::new(r, seed)).unwrap();
            prop_assert_eq!(rep.replicates_used, r);
            prop_assert!(rep.variance >= 0.0);
            prop_assert!((rep.std_error_mean - (rep.variance / r as f64).sqrt()).abs() <= 1e-15);
        }
    }
}
