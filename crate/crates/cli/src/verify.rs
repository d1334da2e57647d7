//! Cross-engine checks at desk scale. Reports contain no timings so that
//! repeated runs are byte-identical.

use std::f64::consts::TAU;

use anyhow::Result;
use quantsine_core::ada::{ada_moments, build_partition};
use quantsine_core::fda::{asymptotic_bias, bias_finite_n, bound_b1, h_term, h_term_direct};
use quantsine_core::lsfit::amp_sq_estimate;
use quantsine_core::mc::{mc_amp_sq, simple_model_moments, McConfig};
use quantsine_core::signal::{QuantizerSpec, SineSpec};
use quantsine_core::special::{g_closed, g_gray, g_series, SeriesControl};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Fast,
    Full,
}

pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// `perturb_g` is added to `g` wherever the checks consume it directly; a
/// nonzero value is a deliberate fault that the engine checks must catch.
pub struct Verifier {
    suite: Suite,
    perturb_g: f64,
}

fn q(bits: u32) -> QuantizerSpec {
    QuantizerSpec::from_bits(bits).expect("valid bits")
}

fn ctrl() -> SeriesControl {
    SeriesControl {
        abs_tol: 1e-11,
        ..Default::default()
    }
}

impl Verifier {
    pub fn new(suite: Suite, perturb_g: f64) -> Self {
        Self { suite, perturb_g }
    }

    fn full(&self) -> bool {
        self.suite == Suite::Full
    }

    pub fn run(&self) -> Result<Vec<Check>> {
        Ok(vec![
            self.g_forms()?,
            self.sub_bin()?,
            self.ada_vs_fda()?,
            self.mc_vs_ada()?,
            self.h_forms()?,
            self.b1_domination()?,
            self.partition()?,
            self.offset_equivalence()?,
            self.determinism()?,
            self.simple_model()?,
            self.ls_exactness()?,
        ])
    }

    fn g_forms(&self) -> Result<Check> {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mut es, mut eg) = (0.0f64, 0.0f64);
        for _ in 0..if self.full() { 200 } else { 30 } {
            let bits: u32 = rng.gen_range(4..=16);
            let step = 2f64.powi(1 - bits as i32);
            let a = step * 10f64.powf(rng.gen_range(-2.0..500f64.log10()));
            let c = g_closed(a, step) + self.perturb_g;
            es = es.max((g_series(a, step, &SeriesControl::default())?.value - c).abs());
            eg = eg.max((g_gray(a, step)? - c).abs());
        }
        Ok(Check {
            name: "g series / closed / alternative sum",
            pass: es <= 1e-8 && eg <= 1e-11,
            detail: format!("max deviations {es:.1e}, {eg:.1e}"),
        })
    }

    fn sub_bin(&self) -> Result<Check> {
        let mut worst = 0.0f64;
        let mut nonzero = 0;
        for bits in [4, 8, 12] {
            let qq = q(bits);
            for j in 1..=10 {
                let a = qq.step / 2.0 * j as f64 / 11.0;
                if ada_moments(&SineSpec::new(a, 13, 100)?, &qq)?.mean_amp_sq != 0.0 {
                    nonzero += 1;
                }
                let f = bias_finite_n(a, qq.step, 100, 13, &ctrl())?;
                worst = worst.max((f.bias_finite_n + a * a).abs());
            }
        }
        Ok(Check {
            name: "sub-bin amplitudes are erased",
            pass: nonzero == 0 && worst <= 1e-12,
            detail: format!("nonzero exact means {nonzero}, max |bias + A^2| {worst:.1e}"),
        })
    }

    fn ada_vs_fda(&self) -> Result<Check> {
        let cases: &[(usize, u32, u64)] = if self.full() {
            &[(50, 4, 7), (100, 6, 13), (200, 8, 39), (300, 10, 239)]
        } else {
            &[(50, 4, 7), (64, 6, 13)]
        };
        let per = if self.full() { 20 } else { 5 };
        let mut worst = 0.0f64;
        let mut pass = true;
        for &(n, bits, lambda) in cases {
            let qq = q(bits);
            for j in 1..=per {
                let a = (1.0 - qq.step / 2.0) * j as f64 / (per as f64 + 0.5);
                let exact = ada_moments(&SineSpec::new(a, lambda, n)?, &qq)?.bias;
                let f = bias_finite_n(a, qq.step, n, lambda, &ctrl())?;
                let fda = f.bias_finite_n + 4.0 * a * self.perturb_g;
                let d = (exact - fda).abs();
                worst = worst.max(d);
                pass &= d <= 1e-8f64.max(f.tail_estimate);
            }
        }
        Ok(Check {
            name: "exact vs series bias",
            pass,
            detail: format!("max |difference| {worst:.1e}"),
        })
    }

    fn mc_vs_ada(&self) -> Result<Check> {
        let r = if self.full() { 100_000 } else { 20_000 };
        let mut worst = 0.0f64;
        for (j, a) in [0.13, 0.5, 0.91].into_iter().enumerate() {
            let qq = q(4);
            let spec = SineSpec::new(a, 7, 50)?;
            let exact = ada_moments(&spec, &qq)?.bias;
            let mc = mc_amp_sq(&spec, &qq, &McConfig::new(r, 40 + j as u64))?;
            worst = worst.max((mc.bias - exact).abs() / mc.std_error_mean);
        }
        Ok(Check {
            name: "Monte Carlo vs exact bias",
            pass: worst <= 4.0,
            detail: format!("max {worst:.2} std errors"),
        })
    }

    fn h_forms(&self) -> Result<Check> {
        let qq = q(6);
        let mut worst = 0.0f64;
        for a in [0.2, 0.55, 0.8] {
            let h = h_term(a, qq.step, 40, 3, &ctrl())?;
            let direct = h_term_direct(a, qq.step, 40, 3, 200_001)?;
            worst = worst.max((h.value - direct).abs());
        }
        Ok(Check {
            name: "h aliased-order sum vs direct sum",
            pass: worst <= 1e-9,
            detail: format!("max {worst:.1e}"),
        })
    }

    fn b1_domination(&self) -> Result<Check> {
        let mut violations = 0;
        let points = if self.full() { 400 } else { 100 };
        for bits in [4, 6, 8] {
            let s = q(bits).step;
            for j in 1..=points {
                let a = (1.0 - s / 2.0) * j as f64 / points as f64;
                let g = g_closed(a, s) + self.perturb_g;
                let bias = if self.perturb_g == 0.0 {
                    asymptotic_bias(a, s)
                } else {
                    4.0 * g * (a + g)
                };
                if bias.abs() > bound_b1(a, s)? {
                    violations += 1;
                }
            }
        }
        Ok(Check {
            name: "B1 dominates the asymptotic bias",
            pass: violations == 0,
            detail: format!("{violations} violations"),
        })
    }

    fn partition(&self) -> Result<Check> {
        let mut worst = 0.0f64;
        let mut mismatches = 0;
        for (bits, a, n, lambda) in [(4, 0.6, 9, 2), (6, 0.33, 17, 5), (3, 0.9, 5, 1)] {
            let qq = q(bits);
            let part = build_partition(&SineSpec::new(a, lambda, n)?, &qq)?;
            worst = worst.max((part.measure() - TAU).abs());
            for s in 0..part.num_segments() {
                let seg = part.segment(s);
                let codes = part.segment_codes(s);
                let spec = part.spec().with_phase(seg.lo + 0.5 * seg.len());
                for (i, &c) in codes.iter().enumerate() {
                    if qq.code(spec.sample(i)?) != c {
                        mismatches += 1;
                    }
                }
            }
        }
        Ok(Check {
            name: "phase partition is complete",
            pass: worst < 1e-12 && mismatches == 0,
            detail: format!("measure error {worst:.1e}, code mismatches {mismatches}"),
        })
    }

    fn offset_equivalence(&self) -> Result<Check> {
        let qq = q(5);
        let mut worst = 0.0f64;
        for c in [-0.3, 0.1, 0.45] {
            let spec = SineSpec::new(0.47, 3, 21)?;
            let lhs = ada_moments(&spec, &qq.with_offset(c)?)?;
            let rhs = ada_moments(&spec.with_offset(c * qq.step), &qq)?;
            worst = worst.max((lhs.mean_amp_sq - rhs.mean_amp_sq).abs());
        }
        Ok(Check {
            name: "quantizer offset equals signal offset",
            pass: worst < 1e-12,
            detail: format!("max {worst:.1e}"),
        })
    }

    fn determinism(&self) -> Result<Check> {
        let qq = q(8);
        let spec = SineSpec::new(0.4, 7, 128)?;
        let cfg = McConfig::new(4000, 9).with_sigma(qq.step / 5.0);
        let a = mc_amp_sq(&spec, &qq, &cfg)?;
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build()?;
        let b = single.install(|| mc_amp_sq(&spec, &qq, &cfg))?;
        let pass =
            a.mean.to_bits() == b.mean.to_bits() && a.variance.to_bits() == b.variance.to_bits();
        Ok(Check {
            name: "Monte Carlo is independent of thread count",
            pass,
            detail: if pass {
                "bit-identical".into()
            } else {
                "reports differ".into()
            },
        })
    }

    fn simple_model(&self) -> Result<Check> {
        let s = q(3).step;
        let mut worst = 0.0f64;
        for theta in [0.0, 0.3, 0.8] {
            let (m, v) = simple_model_moments(theta, s, 200)?;
            worst = worst
                .max((m - theta).abs())
                .max((v / (s * s / 1200.0) - 1.0).abs());
        }
        Ok(Check {
            name: "simple model moments",
            pass: worst < 1e-12,
            detail: format!("max deviation {worst:.1e}"),
        })
    }

    fn ls_exactness(&self) -> Result<Check> {
        let mut worst = 0.0f64;
        for (a, lambda, n, phi) in [(0.7, 3, 10, 0.4), (0.05, 7, 64, 2.9), (1.0, 1, 3, 5.5)] {
            let y = SineSpec::new(a, lambda, n)?.with_phase(phi).samples();
            worst = worst.max((amp_sq_estimate(&y, lambda, n)? - a * a).abs());
        }
        Ok(Check {
            name: "least squares is exact without quantization",
            pass: worst < 1e-13,
            detail: format!("max {worst:.1e}"),
        })
    }
}

pub fn report(suite: Suite, checks: &[Check]) -> String {
    let mut out = String::new();
    for c in checks {
        out.push_str(&format!(
            "{} {}: {}\n",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        ));
    }
    let passed = checks.iter().filter(|c| c.pass).count();
    let name = match suite {
        Suite::Fast => "fast",
        Suite::Full => "full",
    };
    out.push_str(&format!(
        "verify {name}: {passed}/{} checks passed\n",
        checks.len()
    ));
    out
}
