//! One function per experiment id. Each returns a table whose rows are ordered
//! by the independent variable(s).

use anyhow::{Context, Result};
use quantsine_core::ada::ada_moments;
use quantsine_core::fda::{
    amp_bias_delta_method, asymptotic_bias, bias_finite_n, bound_b1, bound_b2,
    nearest_envelope_level,
};
use quantsine_core::mc::{
    gaussian_reference_variance, mc_amp, mc_amp_sq, mc_scalar_example, simple_model_moments,
    McConfig, McModel, McReport,
};
use quantsine_core::signal::{QuantizerSpec, SineSpec};
use quantsine_core::special::SeriesControl;
use rayon::prelude::*;

use crate::config::{Experiment, ExperimentConfig};

pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
    /// Free-text lines for the metadata header.
    pub notes: Vec<String>,
    pub non_coprime: bool,
    pub summary: Vec<String>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
            notes: Vec::new(),
            non_coprime: false,
            summary: Vec::new(),
        }
    }

    fn column(&self, name: &str) -> impl Iterator<Item = f64> + '_ {
        let i = self
            .columns
            .iter()
            .position(|c| *c == name)
            .expect("known column");
        self.rows.iter().map(move |r| r[i])
    }
}

/// Candidates kept from the analytic ranking before Monte Carlo refinement.
const MC_CANDIDATES: usize = 8;

fn fda_ctrl() -> SeriesControl {
    SeriesControl {
        abs_tol: 1e-11,
        ..Default::default()
    }
}

fn top_amplitude(step: f64) -> f64 {
    1.0 - step / 2.0
}

/// `steps` points: `amp_min..=amp_max` if `amp_min` is given, else
/// `amp_max * j / steps` for `j = 1..=steps`.
fn amplitude_grid(cfg: &ExperimentConfig, step: f64) -> Vec<f64> {
    let p = &cfg.params;
    let hi = p.amp_max.unwrap_or_else(|| top_amplitude(step));
    let k = p.amp_steps;
    match p.amp_min {
        Some(lo) if k == 1 => vec![lo],
        Some(lo) => (0..k)
            .map(|j| lo + (hi - lo) * j as f64 / (k - 1) as f64)
            .collect(),
        None => (1..=k).map(|j| hi * j as f64 / k as f64).collect(),
    }
}

/// Envelope abscissas `(p - 1/2) step` in `(0, top]`.
fn abscissas(step: f64, top: f64) -> Vec<f64> {
    (1..)
        .map(|p| (p as f64 - 0.5) * step)
        .take_while(|&a| a <= top)
        .collect()
}

fn merge_sorted(mut v: Vec<f64>, extra: impl IntoIterator<Item = f64>) -> Vec<f64> {
    v.extend(extra);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Uniform grid plus the `k` largest envelope abscissas, where peaks sit.
fn search_grid(cfg: &ExperimentConfig, step: f64, k: usize) -> Vec<f64> {
    let ab = abscissas(step, top_amplitude(step));
    let tail = ab[ab.len().saturating_sub(k)..].to_vec();
    merge_sorted(amplitude_grid(cfg, step), tail)
}

fn quantizer(step: f64) -> Result<QuantizerSpec> {
    QuantizerSpec::new(step).context("quantizer")
}

fn bits_label(bits: Option<u32>, step: f64) -> f64 {
    bits.map_or(-step.log2() + 1.0, f64::from)
}

/// Largest value with its tag.
fn max_by_value<T: Copy + Default>(items: impl IntoIterator<Item = (f64, T)>) -> (f64, T) {
    items
        .into_iter()
        .fold((f64::NEG_INFINITY, T::default()), |best, (v, t)| {
            if v > best.0 {
                (v, t)
            } else {
                best
            }
        })
}

pub fn run(cfg: &ExperimentConfig) -> Result<Table> {
    match cfg.experiment {
        Experiment::Fig1 => fig1(cfg),
        Experiment::Fig2 => fig2(cfg),
        Experiment::Fig3 => fig3(cfg),
        Experiment::Fig4 => fig4(cfg),
        Experiment::Fig5 => fig5(cfg),
        Experiment::Fig6 => fig6(cfg),
        Experiment::Fig7 => fig7(cfg),
        Experiment::Fig8 => fig8(cfg),
        Experiment::OffsetSweep => offset_sweep(cfg),
        Experiment::NoiseBias => noise_bias(cfg),
        Experiment::NoiseVar => noise_var(cfg),
        Experiment::CustomSweep => custom_sweep(cfg),
    }
}

/// Scalar regression example: variance of the estimate relative to `step^2 / (6N)`.
fn fig1(cfg: &ExperimentConfig) -> Result<Table> {
    let (_, step) = cfg.steps()[0];
    let q = quantizer(step)?;
    let n = cfg.params.n[0];
    let r = cfg.params.records_for(n);
    let reference = step * step / (6.0 * n as f64);
    let mut t = Table::new(&[
        "theta",
        "theta_over_step",
        "var_quantizer_norm",
        "var_quantizer_se_norm",
        "var_simple_mc_norm",
        "var_simple_theory_norm",
    ]);
    t.notes.push("variances normalized to step^2/(6N)".into());
    t.rows = amplitude_grid(cfg, step)
        .par_iter()
        .map(|&theta| -> Result<Vec<f64>> {
            let base = McConfig::new(r, cfg.params.seed);
            let qm = mc_scalar_example(theta, &q, n, &base)?;
            let sm = mc_scalar_example(theta, &q, n, &base.with_model(McModel::SimpleUniform))?;
            let (_, sv) = simple_model_moments(theta, step, n)?;
            Ok(vec![
                theta,
                theta / step,
                qm.variance / reference,
                qm.std_error_variance / reference,
                sm.variance / reference,
                sv / reference,
            ])
        })
        .collect::<Result<_>>()?;
    let worst = t.column("var_quantizer_norm").fold(0.0, f64::max);
    t.summary.push(format!(
        "max quantizer variance / simple prediction = {worst:.4}"
    ));
    Ok(t)
}

/// Standard deviation of `Â^2 / A` for two values of lambda.
fn fig2(cfg: &ExperimentConfig) -> Result<Table> {
    let (_, step) = cfg.steps()[0];
    let q = quantizer(step)?;
    let n = cfg.params.n[0];
    let (l1, l2) = (cfg.params.lambda[0], cfg.params.lambda[1]);
    let r = cfg.params.records_for(n);
    let mut t = Table::new(&[
        "amplitude",
        "std_norm_lambda1",
        "std_norm_simple_lambda1",
        "std_norm_lambda2",
        "std_norm_simple_lambda2",
        "std_ratio",
    ]);
    t.non_coprime = [l1, l2]
        .iter()
        .any(|&l| quantsine_core::signal::gcd(l, n as u64) != 1);
    t.notes.push(format!(
        "lambda1={l1} lambda2={l2}; std of A^2 estimate normalized to A"
    ));
    t.rows = amplitude_grid(cfg, step)
        .par_iter()
        .map(|&a| -> Result<Vec<f64>> {
            let base = McConfig::new(r, cfg.params.seed);
            let std = |l: u64, model: McModel| -> Result<f64> {
                Ok(
                    mc_amp_sq(&SineSpec::new(a, l, n)?, &q, &base.with_model(model))?
                        .variance
                        .sqrt()
                        / a,
                )
            };
            let (q1, s1) = (
                std(l1, McModel::Quantizer)?,
                std(l1, McModel::SimpleUniform)?,
            );
            let (q2, s2) = (
                std(l2, McModel::Quantizer)?,
                std(l2, McModel::SimpleUniform)?,
            );
            Ok(vec![a, q1, s1, q2, s2, q2 / q1])
        })
        .collect::<Result<_>>()?;
    let m1 = t.column("std_norm_lambda1").fold(0.0, f64::max);
    let m2 = t.column("std_norm_lambda2").fold(0.0, f64::max);
    t.summary.push(format!(
        "max normalized std: lambda={l1} {m1:.4e}, lambda={l2} {m2:.4e}, ratio {:.3}",
        m2 / m1
    ));
    Ok(t)
}

/// Finite-N bias over amplitude, FDA and ADA, normalized to `step^(4/3)`.
fn fig3(cfg: &ExperimentConfig) -> Result<Table> {
    let n = cfg.params.n[0];
    let lambda = cfg.params.lambda[0];
    let mut t = Table::new(&[
        "bits",
        "amplitude",
        "amp_over_step",
        "fda_bias_norm",
        "ada_bias_norm",
        "asymptotic_bias_norm",
        "b2_norm",
        "fda_tail_norm",
    ]);
    t.non_coprime = quantsine_core::signal::gcd(lambda, n as u64) != 1;
    t.notes
        .push("bias normalized to step^(4/3); b2 at the nearest envelope level".into());
    for (bits, step) in cfg.steps() {
        let q = quantizer(step)?;
        let norm = step.powf(4.0 / 3.0);
        let rows: Vec<Vec<f64>> = amplitude_grid(cfg, step)
            .par_iter()
            .map(|&a| -> Result<Vec<f64>> {
                let f = bias_finite_n(a, step, n, lambda, &fda_ctrl())?;
                let ada = ada_moments(&SineSpec::new(a, lambda, n)?, &q)?;
                let b2 = bound_b2(step, nearest_envelope_level(a, step))?;
                Ok(vec![
                    bits_label(bits, step),
                    a,
                    a / step,
                    f.bias_finite_n / norm,
                    ada.bias / norm,
                    f.bias_asymptotic / norm,
                    b2 / norm,
                    f.tail_estimate / norm,
                ])
            })
            .collect::<Result<_>>()?;
        let (lo, hi) = rows
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r[4]), hi.max(r[4]))
            });
        let gap = rows.iter().map(|r| (r[3] - r[4]).abs()).fold(0.0, f64::max) * norm;
        t.summary.push(format!(
            "b={}: normalized ADA bias range [{lo:.4}, {hi:.4}], max |FDA - ADA| = {gap:.2e}",
            bits_label(bits, step)
        ));
        t.rows.extend(rows);
    }
    Ok(t)
}

/// Worst-case bias per resolution. The analytic asymptotic bias ranks a dense
/// grid; the best candidates are then refined by FDA at finite N and by Monte Carlo.
fn fig4(cfg: &ExperimentConfig) -> Result<Table> {
    let n = cfg.params.n[0];
    let lambda = cfg.params.lambda[0];
    let mut t = Table::new(&[
        "bits",
        "step",
        "argmax_amplitude",
        "max_abs_bias_asymptotic_norm",
        "max_abs_bias_fda_norm",
        "max_abs_bias_mc_norm",
        "mc_se_norm",
        "simple_max_abs_bias_norm",
        "b1_half_norm",
        "b2_abs_norm",
    ]);
    t.non_coprime = quantsine_core::signal::gcd(lambda, n as u64) != 1;
    t.notes
        .push("bias normalized to step^(4/3); simple model predicts zero bias".into());
    let steps = cfg.steps();
    t.rows = steps
        .par_iter()
        .map(|&(bits, step)| -> Result<Vec<f64>> {
            let q = quantizer(step)?;
            let norm = step.powf(4.0 / 3.0);
            let grid = merge_sorted(
                amplitude_grid(cfg, step),
                abscissas(step, top_amplitude(step)),
            );
            let mut ranked: Vec<(f64, f64)> = grid
                .iter()
                .map(|&a| (asymptotic_bias(a, step).abs(), a))
                .collect();
            ranked.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.total_cmp(&y.1)));
            ranked.truncate(MC_CANDIDATES);
            let (asym, at) = ranked[0];
            let mut fda = 0.0f64;
            let mut mc = (0.0f64, 0.0);
            for &(_, a) in &ranked {
                fda = fda.max(
                    bias_finite_n(a, step, n, lambda, &fda_ctrl())?
                        .bias_finite_n
                        .abs(),
                );
                let r = mc_amp_sq(
                    &SineSpec::new(a, lambda, n)?,
                    &q,
                    &McConfig::new(cfg.params.records_for(n), cfg.params.seed),
                )?;
                if r.bias.abs() > mc.0 {
                    mc = (r.bias.abs(), r.std_error_mean);
                }
            }
            let b2 = bound_b2(step, nearest_envelope_level(at, step))?.abs();
            Ok(vec![
                bits_label(bits, step),
                step,
                at,
                asym / norm,
                fda / norm,
                mc.0 / norm,
                mc.1 / norm,
                0.0,
                bound_b1(0.5, step)? / norm,
                b2 / norm,
            ])
        })
        .collect::<Result<_>>()?;
    for r in &t.rows {
        t.summary.push(format!(
            "b={}: max|bias|/|B2| = {:.3}, max|bias| <= B1(1/2): {}",
            r[0],
            r[3] / r[9],
            r[3] <= r[8]
        ));
    }
    Ok(t)
}

fn fixed_amplitude(cfg: &ExperimentConfig, step: f64) -> f64 {
    cfg.params.amp_min.unwrap_or(10.93 * step)
}

/// Bias against record length at fixed amplitude, normalized to `step^2`.
fn fig5(cfg: &ExperimentConfig) -> Result<Table> {
    let (_, step) = cfg.steps()[0];
    let q = quantizer(step)?;
    let a = fixed_amplitude(cfg, step);
    let lambda = cfg.params.lambda[0];
    let d2 = step * step;
    let mut t = Table::new(&[
        "n",
        "ada_bias_norm",
        "fda_bias_norm",
        "asymptotic_bias_norm",
        "mc_bias_norm",
        "mc_minus_fda_norm",
        "mc_se_norm",
    ]);
    t.notes
        .push(format!("amplitude={a:?}; bias normalized to step^2"));
    t.rows = cfg
        .params
        .n
        .par_iter()
        .map(|&n| -> Result<Vec<f64>> {
            let spec = SineSpec::new(a, lambda, n)?;
            let ada = ada_moments(&spec, &q)?;
            let f = bias_finite_n(a, step, n, lambda, &fda_ctrl())?;
            let mc = mc_amp_sq(
                &spec,
                &q,
                &McConfig::new(cfg.params.records_for(n), cfg.params.seed),
            )?;
            Ok(vec![
                n as f64,
                ada.bias / d2,
                f.bias_finite_n / d2,
                f.bias_asymptotic / d2,
                mc.bias / d2,
                (mc.bias - f.bias_finite_n) / d2,
                mc.std_error_mean / d2,
            ])
        })
        .collect::<Result<_>>()?;
    if let Some(last) = t.rows.last() {
        t.summary.push(format!(
            "N={}: exact bias/step^2 = {:.6}, asymptote {:.6}",
            last[0], last[1], last[3]
        ));
    }
    Ok(t)
}

/// Worst-case variance, squared bias and MSE per resolution.
fn fig6(cfg: &ExperimentConfig) -> Result<Table> {
    let n = cfg.params.n[0];
    let lambda = cfg.params.lambda[0];
    let mut t = Table::new(&[
        "bits",
        "step",
        "argmax_var_amplitude",
        "max_var_norm",
        "max_var_se_norm",
        "max_bias_sq_norm",
        "max_mse_norm",
        "simple_max_var_norm",
        "gaussian_ref_var_norm",
    ]);
    t.non_coprime = quantsine_core::signal::gcd(lambda, n as u64) != 1;
    t.notes.push("variance, squared bias and MSE normalized to step^2; gaussian reference uses noise variance step^2/12".into());
    let records = cfg.params.records_for(n);
    let seed = cfg.params.seed;
    let steps = cfg.steps();
    t.rows = steps
        .iter()
        .map(|&(bits, step)| -> Result<Vec<f64>> {
            let q = quantizer(step)?;
            let grid = search_grid(cfg, step, MC_CANDIDATES);
            let reports: Vec<(f64, McReport)> = grid
                .par_iter()
                .map(|&a| {
                    Ok((
                        a,
                        mc_amp_sq(
                            &SineSpec::new(a, lambda, n)?,
                            &q,
                            &McConfig::new(records, seed),
                        )?,
                    ))
                })
                .collect::<Result<_>>()?;
            let (var, (at, se)) = max_by_value(
                reports
                    .iter()
                    .map(|(a, r)| (r.variance, (*a, r.std_error_variance))),
            );
            let bias_sq = reports
                .iter()
                .map(|(_, r)| r.bias * r.bias)
                .fold(0.0, f64::max);
            let mse = reports.iter().map(|(_, r)| r.mse).fold(0.0, f64::max);
            let a_top = *grid.last().expect("non-empty grid");
            let simple = mc_amp_sq(
                &SineSpec::new(a_top, lambda, n)?,
                &q,
                &McConfig::new(records, seed).with_model(McModel::SimpleUniform),
            )?
            .variance;
            let gauss = gaussian_reference_variance(a_top, step / 12f64.sqrt(), n, records, seed)?;
            let d2 = step * step;
            Ok(vec![
                bits_label(bits, step),
                step,
                at,
                var / d2,
                se / d2,
                bias_sq / d2,
                mse / d2,
                simple / d2,
                gauss / d2,
            ])
        })
        .collect::<Result<_>>()?;
    for r in &t.rows {
        t.summary.push(format!(
            "b={}: max var / simple = {:.3}, max mse/step^2 = {:.4e}",
            r[0],
            r[3] / r[7],
            r[6]
        ));
    }
    Ok(t)
}

/// Variance against record length at fixed amplitude, normalized to `step^4`.
fn fig7(cfg: &ExperimentConfig) -> Result<Table> {
    let (_, step) = cfg.steps()[0];
    let q = quantizer(step)?;
    let a = fixed_amplitude(cfg, step);
    let lambda = cfg.params.lambda[0];
    let d4 = step.powi(4);
    let mut t = Table::new(&[
        "n",
        "ada_var_norm",
        "mc_var_norm",
        "mc_minus_ada_norm",
        "mc_var_se_norm",
    ]);
    t.notes
        .push(format!("amplitude={a:?}; variance normalized to step^4"));
    t.rows = cfg
        .params
        .n
        .par_iter()
        .map(|&n| -> Result<Vec<f64>> {
            let spec = SineSpec::new(a, lambda, n)?;
            let ada = ada_moments(&spec, &q)?;
            let mc = mc_amp_sq(
                &spec,
                &q,
                &McConfig::new(cfg.params.records_for(n), cfg.params.seed),
            )?;
            Ok(vec![
                n as f64,
                ada.variance_amp_sq / d4,
                mc.variance / d4,
                (mc.variance - ada.variance_amp_sq) / d4,
                mc.std_error_variance / d4,
            ])
        })
        .collect::<Result<_>>()?;
    if let (Some(first), Some(last)) = (t.rows.first(), t.rows.last()) {
        t.summary.push(format!(
            "variance/step^4 from N={} to N={}: {:.4e} -> {:.4e}",
            first[0], last[0], first[1], last[1]
        ));
    }
    Ok(t)
}

/// Bias of the amplitude (not squared) estimate, normalized to `step`.
fn fig8(cfg: &ExperimentConfig) -> Result<Table> {
    let (_, step) = cfg.steps()[0];
    let q = quantizer(step)?;
    let n = cfg.params.n[0];
    let lambda = cfg.params.lambda[0];
    let mut t = Table::new(&[
        "amplitude",
        "amp_over_step",
        "delta_method_bias_norm",
        "mc_bias_norm",
        "mc_minus_delta_norm",
        "mc_se_norm",
    ]);
    t.non_coprime = quantsine_core::signal::gcd(lambda, n as u64) != 1;
    t.notes.push("amplitude bias normalized to step; analytic column applies the delta method to exact moments of A^2".into());
    t.rows = amplitude_grid(cfg, step)
        .par_iter()
        .map(|&a| -> Result<Vec<f64>> {
            let spec = SineSpec::new(a, lambda, n)?;
            let m = ada_moments(&spec, &q)?;
            let predicted = amp_bias_delta_method(m.mean_amp_sq, m.variance_amp_sq)? - a;
            let mc = mc_amp(
                &spec,
                &q,
                &McConfig::new(cfg.params.records_for(n), cfg.params.seed),
            )?;
            Ok(vec![
                a,
                a / step,
                predicted / step,
                mc.bias / step,
                (mc.bias - predicted) / step,
                mc.std_error_mean / step,
            ])
        })
        .collect::<Result<_>>()?;
    let worst = t
        .rows
        .iter()
        .map(|r| (r[4] / r[5]).abs())
        .filter(|z| z.is_finite())
        .fold(0.0, f64::max);
    t.summary
        .push(format!("max |MC - delta method| = {worst:.2} std errors"));
    Ok(t)
}

/// Exact bias over amplitude for a range of input offsets.
fn offset_sweep(cfg: &ExperimentConfig) -> Result<Table> {
    let n = cfg.params.n[0];
    let lambda = cfg.params.lambda[0];
    let mut t = Table::new(&[
        "bits",
        "offset_over_step",
        "amplitude",
        "ada_bias_norm",
        "b2_norm",
    ]);
    t.non_coprime = quantsine_core::signal::gcd(lambda, n as u64) != 1;
    t.notes.push("bias normalized to step^(4/3)".into());
    for (bits, step) in cfg.steps() {
        let q = quantizer(step)?;
        let norm = step.powf(4.0 / 3.0);
        let grid = merge_sorted(
            amplitude_grid(cfg, step),
            abscissas(step, top_amplitude(step)),
        );
        let mut worst = Vec::new();
        for &d in &cfg.params.offset {
            let rows: Vec<Vec<f64>> = grid
                .par_iter()
                .map(|&a| -> Result<Vec<f64>> {
                    let m = ada_moments(&SineSpec::new(a, lambda, n)?.with_offset(d * step), &q)?;
                    let b2 = bound_b2(step, nearest_envelope_level(a, step))?;
                    Ok(vec![bits_label(bits, step), d, a, m.bias / norm, b2 / norm])
                })
                .collect::<Result<_>>()?;
            worst.push((d, rows.iter().map(|r| r[3].abs()).fold(0.0, f64::max)));
            t.rows.extend(rows);
        }
        let base = worst.iter().find(|(d, _)| *d == 0.0).map(|w| w.1);
        let top = worst.iter().map(|w| w.1).fold(0.0, f64::max);
        match base {
            Some(b) => t.summary.push(format!(
                "b={}: max|bias| over offsets / at zero offset = {:.3}",
                bits_label(bits, step),
                top / b
            )),
            None => t.summary.push(format!(
                "b={}: max normalized |bias| over offsets = {top:.4}",
                bits_label(bits, step)
            )),
        }
    }
    Ok(t)
}

/// Worst-case Monte Carlo bias and variance per (resolution, noise level).
fn noise_rows(cfg: &ExperimentConfig, variance: bool) -> Result<Vec<Vec<f64>>> {
    let n = cfg.params.n[0];
    let lambda = cfg.params.lambda[0];
    let records = cfg.params.records_for(n);
    let seed = cfg.params.seed;
    let mut rows = Vec::new();
    for (bits, step) in cfg.steps() {
        let q = quantizer(step)?;
        let grid = search_grid(cfg, step, MC_CANDIDATES);
        for &s in &cfg.params.sigma {
            let reports: Vec<(f64, McReport)> = grid
                .par_iter()
                .map(|&a| {
                    let c = McConfig::new(records, seed).with_sigma(s * step);
                    Ok((a, mc_amp_sq(&SineSpec::new(a, lambda, n)?, &q, &c)?))
                })
                .collect::<Result<_>>()?;
            let b = bits_label(bits, step);
            if variance {
                let (v, (at, se)) = max_by_value(
                    reports
                        .iter()
                        .map(|(a, r)| (r.variance, (*a, r.std_error_variance))),
                );
                let a_top = *grid.last().expect("non-empty grid");
                let simple = mc_amp_sq(
                    &SineSpec::new(a_top, lambda, n)?,
                    &q,
                    &McConfig::new(records, seed).with_model(McModel::SimpleUniform),
                )?
                .variance;
                let gauss =
                    gaussian_reference_variance(a_top, step / 12f64.sqrt(), n, records, seed)?;
                let d2 = step * step;
                rows.push(vec![b, s, at, v / d2, se / d2, simple / d2, gauss / d2]);
            } else {
                let norm = step.powf(4.0 / 3.0);
                let (m, (at, se)) = max_by_value(
                    reports
                        .iter()
                        .map(|(a, r)| (r.bias.abs(), (*a, r.std_error_mean))),
                );
                let b2 = bound_b2_at_max(step)?;
                rows.push(vec![
                    b,
                    s,
                    at,
                    m / norm,
                    se / norm,
                    0.0,
                    bound_b1(0.5, step)? / norm,
                    b2 / norm,
                ]);
            }
        }
    }
    Ok(rows)
}

fn bound_b2_at_max(step: f64) -> Result<f64> {
    Ok(quantsine_core::fda::bound_b2_max(step, top_amplitude(step))?.1)
}

fn trend_summary(t: &mut Table, value_col: usize, label: &str) {
    let mut by_bits: Vec<(f64, Vec<f64>)> = Vec::new();
    for r in &t.rows {
        match by_bits.last_mut() {
            Some((b, v)) if *b == r[0] => v.push(r[value_col]),
            _ => by_bits.push((r[0], vec![r[value_col]])),
        }
    }
    for (b, v) in by_bits {
        let s = v
            .iter()
            .map(|x| format!("{x:.4e}"))
            .collect::<Vec<_>>()
            .join(" ");
        t.summary.push(format!("b={b}: {label} by sigma [{s}]"));
    }
}

fn noise_bias(cfg: &ExperimentConfig) -> Result<Table> {
    let mut t = Table::new(&[
        "bits",
        "sigma_over_step",
        "argmax_amplitude",
        "max_abs_bias_norm",
        "mc_se_norm",
        "simple_max_abs_bias_norm",
        "b1_half_norm",
        "b2_abs_norm",
    ]);
    t.non_coprime = quantsine_core::signal::gcd(cfg.params.lambda[0], cfg.params.n[0] as u64) != 1;
    t.notes
        .push("bias normalized to step^(4/3); b2 is the largest envelope level in range".into());
    t.rows = noise_rows(cfg, false)?;
    trend_summary(&mut t, 3, "max normalized |bias|");
    Ok(t)
}

fn noise_var(cfg: &ExperimentConfig) -> Result<Table> {
    let mut t = Table::new(&[
        "bits",
        "sigma_over_step",
        "argmax_amplitude",
        "max_var_norm",
        "max_var_se_norm",
        "simple_max_var_norm",
        "gaussian_ref_var_norm",
    ]);
    t.non_coprime = quantsine_core::signal::gcd(cfg.params.lambda[0], cfg.params.n[0] as u64) != 1;
    t.notes.push(
        "variance normalized to step^2; gaussian reference uses noise variance step^2/12".into(),
    );
    t.rows = noise_rows(cfg, true)?;
    trend_summary(&mut t, 3, "max normalized variance");
    Ok(t)
}

/// All engines over an amplitude sweep with user parameters. The exact and
/// series columns describe the noiseless quantizer; FDA also assumes zero offset.
fn custom_sweep(cfg: &ExperimentConfig) -> Result<Table> {
    let (_, step) = cfg.steps()[0];
    let p = &cfg.params;
    let (n, lambda) = (p.n[0], p.lambda[0]);
    let (sigma, offset) = (p.sigma[0] * step, p.offset[0] * step);
    let q = quantizer(step)?;
    let coprime = quantsine_core::signal::gcd(lambda, n as u64) == 1;
    let mut t = Table::new(&[
        "amplitude",
        "ada_bias",
        "ada_var",
        "fda_bias",
        "fda_tail",
        "mc_bias",
        "mc_bias_se",
        "mc_var",
        "mc_var_se",
        "simple_var",
        "asymptotic_bias",
        "b1",
        "b2",
    ]);
    t.non_coprime = !coprime;
    t.notes.push(
        "ada and fda columns ignore noise; fda also ignores offset; mc uses the full model".into(),
    );
    if !coprime {
        t.notes
            .push("fda columns need coprime lambda and n; they repeat the asymptotic value".into());
    }
    let records = p.records_for(n);
    t.rows = amplitude_grid(cfg, step)
        .par_iter()
        .map(|&a| -> Result<Vec<f64>> {
            let spec = SineSpec::new(a, lambda, n)?.with_offset(offset);
            let ada = ada_moments(&spec, &q)?;
            let (fda, tail) = if coprime {
                let f = bias_finite_n(a, step, n, lambda, &fda_ctrl())?;
                (f.bias_finite_n, f.tail_estimate)
            } else {
                (asymptotic_bias(a, step), 0.0)
            };
            let base = McConfig::new(records, p.seed).with_sigma(sigma);
            let mc = mc_amp_sq(&spec, &q, &base)?;
            let simple = mc_amp_sq(&spec, &q, &base.with_model(McModel::SimpleUniform))?.variance;
            let b2 = bound_b2(step, nearest_envelope_level(a, step))?;
            Ok(vec![
                a,
                ada.bias,
                ada.variance_amp_sq,
                fda,
                tail,
                mc.bias,
                mc.std_error_mean,
                mc.variance,
                mc.std_error_variance,
                simple,
                asymptotic_bias(a, step),
                if a > 0.0 { bound_b1(a, step)? } else { 0.0 },
                b2,
            ])
        })
        .collect::<Result<_>>()?;
    if sigma == 0.0 {
        let worst = t
            .rows
            .iter()
            .map(|r| (r[5] - r[1]).abs() / r[6])
            .filter(|z| z.is_finite())
            .fold(0.0, f64::max);
        t.summary
            .push(format!("max |MC - exact| bias = {worst:.2} std errors"));
    } else {
        let worst = t.rows.iter().map(|r| r[5].abs()).fold(0.0, f64::max);
        t.summary
            .push(format!("max |MC bias| with noise = {worst:.4e}"));
    }
    Ok(t)
}
