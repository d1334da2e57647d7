//! Moments of the least-squares amplitude estimator applied to quantized
//! sine waves: closed-form asymptotics, exact finite-record evaluation, and
//! Monte Carlo reference engines.
//!
//! * [`signal`] builds coherently sampled records and quantizes them.
//! * [`lsfit`] fits the in-phase and quadrature amplitudes.
//! * [`special`] holds Bessel, zeta and the Schlömilch series `g`.
//! * [`fda`] gives the bias from the Fourier expansion of the error.
//! * [`ada`] computes exact moments over the phase circle.
//! * [`mc`] is the seeded Monte Carlo engine.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ada;
pub mod error;
pub mod fda;
pub mod lsfit;
pub mod mc;
pub mod signal;
pub mod special;
pub mod sum;

pub use ada::{
    ada_moments, build_partition, exact_moments, joint_moment, level_phi_set, MomentReport,
    PhasePartition,
};
pub use error::{Error, Result};
pub use fda::{asymptotic_bias, bias_finite_n, bound_b1, bound_b2, h_term, BiasReport};
pub use lsfit::{amp_sq_estimate, fit, SineBasis};
pub use mc::{mc_amp, mc_amp_sq, McConfig, McModel, McReport};
pub use signal::{make_record, Overload, QuantizerSpec, SineSpec};
pub use special::{bessel_j, g_closed, g_gray, g_series, GSum, SeriesControl};
