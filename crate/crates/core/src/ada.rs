//! Exact moments by partitioning the phase circle.
//!
//! With `phi` uniform on `[0, 2 pi)`, every quantized sample is a step
//! function of `phi`. Between consecutive code-change points the whole record
//! is constant, so any functional of the record has its expectation given by
//! a finite, measure-weighted sum over segments.

use std::f64::consts::TAU;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::lsfit::SineBasis;
use crate::signal::{QuantizerSpec, SineSpec};
use crate::special::clamp_unit;
use crate::sum::{pairwise_reduce, NeumaierSum};

/// Breakpoints closer than this are merged.
pub const DEDUP_TOL: f64 = 1e-14;

/// Position of the labelling point inside a segment.
const LABEL_FRACTION: f64 = 0.618_033_988_749_894_8;

/// Segments per work unit in the moment sweep.
const CHUNK: usize = 2048;

/// Half-open phase interval `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiInterval {
    pub lo: f64,
    pub hi: f64,
}

impl PhiInterval {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn contains(&self, phi: f64) -> bool {
        self.lo <= phi && phi < self.hi
    }
}

/// Phases at which `floor((-A cos(k_u + phi) + d)/step + 1/2 + c) = n`.
///
/// The result is a sorted list of disjoint intervals in `[0, 2 pi)`.
pub fn level_phi_set(
    a: f64,
    step: f64,
    c: f64,
    d: f64,
    k_u: f64,
    n: i64,
) -> Result<Vec<PhiInterval>> {
    if !(a >= 0.0 && step > 0.0) {
        return Err(invalid("amplitude must be >= 0 and step > 0"));
    }
    // code n  <=>  lower <= s < upper
    let lower = (n as f64 - 0.5 - c) * step;
    let upper = (n as f64 + 0.5 - c) * step;
    if a == 0.0 {
        let inside = lower <= d && d < upper;
        return Ok(if inside {
            vec![PhiInterval { lo: 0.0, hi: TAU }]
        } else {
            Vec::new()
        });
    }
    // -A cos(theta) + d in [lower, upper)  <=>  cos(theta) in ((d - upper)/A, (d - lower)/A]
    let lo_cos = (d - upper) / a;
    let hi_cos = (d - lower) / a;
    if hi_cos < -1.0 || lo_cos >= 1.0 {
        return Ok(Vec::new());
    }
    let alpha_l = if hi_cos >= 1.0 {
        0.0
    } else {
        clamp_unit(hi_cos)?.acos()
    };
    let alpha_r = if lo_cos <= -1.0 {
        std::f64::consts::PI
    } else {
        clamp_unit(lo_cos)?.acos()
    };
    // theta in [alpha_l, alpha_r) u (2pi - alpha_r, 2pi - alpha_l]
    let mut theta = vec![(alpha_l, alpha_r), (TAU - alpha_r, TAU - alpha_l)];
    if alpha_r >= std::f64::consts::PI {
        theta = vec![(alpha_l, TAU - alpha_l)];
    }
    let mut out = Vec::new();
    for (lo, hi) in theta {
        if hi <= lo {
            continue;
        }
        let s = (lo - k_u).rem_euclid(TAU);
        let e = s + (hi - lo);
        if e <= TAU {
            out.push(PhiInterval { lo: s, hi: e });
        } else {
            out.push(PhiInterval { lo: s, hi: TAU });
            out.push(PhiInterval {
                lo: 0.0,
                hi: e - TAU,
            });
        }
    }
    out.sort_by(|x, y| x.lo.total_cmp(&y.lo));
    let mut merged: Vec<PhiInterval> = Vec::with_capacity(out.len());
    for iv in out {
        match merged.last_mut() {
            Some(last) if iv.lo <= last.hi + DEDUP_TOL => last.hi = last.hi.max(iv.hi),
            _ => merged.push(iv),
        }
    }
    Ok(merged)
}

/// Phase-circle partition on which every sample of the record is constant.
///
/// Segment `s` is `[breakpoints[s], breakpoints[s+1])`, the last one closing
/// at `2 pi`; the first breakpoint is always `0`. For each breakpoint the
/// partition records which samples change code there.
#[derive(Debug, Clone)]
pub struct PhasePartition {
    spec: SineSpec,
    quantizer: QuantizerSpec,
    samples: Vec<usize>,
    breakpoints: Vec<f64>,
    event_offsets: Vec<usize>,
    event_samples: Vec<u32>,
}

/// Code-change phases of one sample, as `phi` values in `[0, 2 pi)`.
fn sample_crossings(
    spec: &SineSpec,
    q: &QuantizerSpec,
    u: usize,
    out: &mut Vec<f64>,
) -> Result<()> {
    let a = spec.amplitude;
    if a == 0.0 {
        return Ok(());
    }
    let (step, c, d) = (q.step, q.offset_c, spec.offset);
    let k_u = spec.angle(u);
    // boundaries t_j = (j - 1/2 - c) step strictly inside (d - A, d + A)
    let j_lo = ((d - a) / step + 0.5 + c).floor() as i64;
    let j_hi = ((d + a) / step + 0.5 + c).ceil() as i64;
    for j in j_lo..=j_hi {
        let t = (j as f64 - 0.5 - c) * step;
        let x = (d - t) / a;
        if x <= -1.0 || x >= 1.0 {
            continue;
        }
        let alpha = x.acos();
        out.push((alpha - k_u).rem_euclid(TAU));
        out.push((TAU - alpha - k_u).rem_euclid(TAU));
    }
    Ok(())
}

impl PhasePartition {
    pub fn spec(&self) -> &SineSpec {
        &self.spec
    }

    pub fn quantizer(&self) -> &QuantizerSpec {
        &self.quantizer
    }

    /// Sample indices tracked by this partition.
    pub fn samples(&self) -> &[usize] {
        &self.samples
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn num_segments(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn segment(&self, s: usize) -> PhiInterval {
        let hi = self.breakpoints.get(s + 1).copied().unwrap_or(TAU);
        PhiInterval {
            lo: self.breakpoints[s],
            hi,
        }
    }

    pub fn segment_midpoint(&self, s: usize) -> f64 {
        let iv = self.segment(s);
        0.5 * (iv.lo + iv.hi)
    }

    /// Interior phase at which segment codes are evaluated. The midpoint is
    /// avoided because a symmetric segment can have a sample touching a
    /// level boundary exactly there.
    pub fn label_phase(&self, s: usize) -> f64 {
        let iv = self.segment(s);
        iv.lo + LABEL_FRACTION * iv.len()
    }

    /// Positions (into `samples()`) of the samples whose code changes at the
    /// start of segment `s`.
    pub fn events(&self, s: usize) -> &[u32] {
        &self.event_samples[self.event_offsets[s]..self.event_offsets[s + 1]]
    }

    /// Total measure of all segments.
    pub fn measure(&self) -> f64 {
        (0..self.num_segments())
            .map(|s| self.segment(s).len())
            .collect::<NeumaierSum>()
            .value()
    }

    fn code_at(&self, pos: usize, phi: f64) -> i64 {
        let u = self.samples[pos];
        let s = -self.spec.amplitude * (self.spec.angle(u) + phi).cos() + self.spec.offset;
        self.quantizer.code(s)
    }

    /// Code vector on segment `s`.
    pub fn segment_codes(&self, s: usize) -> Vec<i64> {
        let mid = self.label_phase(s);
        (0..self.samples.len())
            .map(|p| self.code_at(p, mid))
            .collect()
    }

    /// Dense `segments x samples` code matrix. Refuses partitions whose
    /// matrix would exceed `max_cells` entries.
    pub fn code_matrix(&self, max_cells: usize) -> Result<Vec<Vec<i64>>> {
        let cells = self.num_segments().saturating_mul(self.samples.len());
        if cells > max_cells {
            return Err(invalid(format!(
                "code matrix has {cells} cells, limit {max_cells}"
            )));
        }
        Ok((0..self.num_segments())
            .map(|s| self.segment_codes(s))
            .collect())
    }

    /// Calls `f(segment, weight, codes)` for every segment in order, with
    /// `weight = length / 2 pi`. Codes are updated only where they change.
    pub fn for_each_segment(&self, mut f: impl FnMut(usize, f64, &[i64])) {
        let mut codes = self.segment_codes(0);
        for s in 0..self.num_segments() {
            if s > 0 {
                let mid = self.label_phase(s);
                for &p in self.events(s) {
                    codes[p as usize] = self.code_at(p as usize, mid);
                }
            }
            f(s, self.segment(s).len() / TAU, &codes);
        }
    }
}

/// Partition for the full record.
pub fn build_partition(spec: &SineSpec, q: &QuantizerSpec) -> Result<PhasePartition> {
    build_partition_for(spec, q, &(0..spec.n_samples).collect::<Vec<_>>())
}

/// Partition tracking only the listed samples.
pub fn build_partition_for(
    spec: &SineSpec,
    q: &QuantizerSpec,
    samples: &[usize],
) -> Result<PhasePartition> {
    for &u in samples {
        if u >= spec.n_samples {
            return Err(Error::IndexOutOfRange {
                index: u,
                len: spec.n_samples,
            });
        }
    }
    if samples.len() > u32::MAX as usize {
        return Err(invalid("too many samples"));
    }
    let per_sample: Vec<Vec<f64>> = samples
        .par_iter()
        .map(|&u| {
            let mut v = Vec::new();
            sample_crossings(spec, q, u, &mut v).map(|_| v)
        })
        .collect::<Result<_>>()?;
    let mut points: Vec<(f64, u32)> = Vec::with_capacity(per_sample.iter().map(Vec::len).sum());
    for (pos, v) in per_sample.iter().enumerate() {
        points.extend(v.iter().map(|&phi| (phi, pos as u32)));
    }
    drop(per_sample);
    points.par_sort_unstable_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));

    let mut breakpoints = vec![0.0];
    let mut event_offsets = vec![0usize];
    let mut event_samples = Vec::with_capacity(points.len());
    for (phi, pos) in points {
        let last = *breakpoints.last().expect("non-empty");
        if phi - last > DEDUP_TOL && TAU - phi > DEDUP_TOL {
            event_offsets.push(event_samples.len());
            breakpoints.push(phi);
        }
        // events within tolerance of 2 pi wrap onto the segment at 0, whose
        // codes are always evaluated directly
        if TAU - phi > DEDUP_TOL {
            event_samples.push(pos);
        }
    }
    event_offsets.push(event_samples.len());
    Ok(PhasePartition {
        spec: *spec,
        quantizer: *q,
        samples: samples.to_vec(),
        breakpoints,
        event_offsets,
        event_samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Exact,
    MonteCarlo,
}

/// Moments of `Â^2` (and of `Â`) under a uniform random phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentReport {
    pub mean_amp_sq: f64,
    pub second_moment_amp_sq: f64,
    pub variance_amp_sq: f64,
    pub bias: f64,
    pub mse: f64,
    pub mean_amp: f64,
    pub variance_amp: f64,
    pub engine: Engine,
}

#[derive(Clone, Default)]
struct Acc {
    w: NeumaierSum,
    a2: NeumaierSum,
    a: NeumaierSum,
    dev2: NeumaierSum,
    dev_amp2: NeumaierSum,
}

impl Acc {
    fn merged(x: &Acc, y: &Acc) -> Acc {
        let mut out = x.clone();
        out.w.merge(&y.w);
        out.a2.merge(&y.a2);
        out.a.merge(&y.a);
        out.dev2.merge(&y.dev2);
        out.dev_amp2.merge(&y.dev_amp2);
        out
    }
}

/// Runs `f(weight, amp_sq)` over segments `range` with incremental fits.
fn sweep_chunk(
    part: &PhasePartition,
    basis: &SineBasis,
    start: usize,
    end: usize,
    mut f: impl FnMut(f64, f64),
) {
    let step = part.quantizer.step;
    let scale = 2.0 / part.spec.n_samples as f64;
    let (cos, sin) = (basis.cos(), basis.sin());
    let mut codes = part.segment_codes(start);
    let (mut sc, mut ss) = (0.0, 0.0);
    for (&c, &u) in codes.iter().zip(&part.samples) {
        sc += c as f64 * cos[u];
        ss += c as f64 * sin[u];
    }
    for s in start..end {
        if s > start {
            let mid = part.label_phase(s);
            for &p in part.events(s) {
                let p = p as usize;
                let new = part.code_at(p, mid);
                let delta = (new - codes[p]) as f64;
                if delta != 0.0 {
                    let u = part.samples[p];
                    sc += delta * cos[u];
                    ss += delta * sin[u];
                    codes[p] = new;
                }
            }
        }
        let t1 = -scale * step * sc;
        let t2 = scale * step * ss;
        f(part.segment(s).len() / TAU, t1 * t1 + t2 * t2);
    }
}

/// Exact `E[Â^2]`, `Var[Â^2]`, `E[Â]` of the least-squares fit over the record.
///
/// Chunks of segments are swept in parallel and merged in a fixed pairwise
/// order, so the result does not depend on the thread count.
pub fn exact_moments(part: &PhasePartition) -> Result<MomentReport> {
    let spec = &part.spec;
    if part.samples.len() != spec.n_samples || part.samples.iter().enumerate().any(|(i, &u)| i != u)
    {
        return Err(invalid("exact moments need a partition of the full record"));
    }
    let basis = SineBasis::new(spec.lambda, spec.n_samples)?;
    let s_total = part.num_segments();
    let chunks: Vec<(usize, usize)> = (0..s_total)
        .step_by(CHUNK)
        .map(|s| (s, (s + CHUNK).min(s_total)))
        .collect();

    let first: Vec<Acc> = chunks
        .par_iter()
        .map(|&(s, e)| {
            let mut acc = Acc::default();
            sweep_chunk(part, &basis, s, e, |w, a2| {
                acc.w.add(w);
                acc.a2.add(w * a2);
                acc.a.add(w * a2.sqrt());
            });
            acc
        })
        .collect();
    let tot = pairwise_reduce(&first, &Acc::merged).expect("at least one segment");
    let mean = tot.a2.value();
    let mean_amp = tot.a.value();

    // second pass about the mean for an accurate variance
    let second: Vec<Acc> = chunks
        .par_iter()
        .map(|&(s, e)| {
            let mut acc = Acc::default();
            sweep_chunk(part, &basis, s, e, |w, a2| {
                let d = a2 - mean;
                let da = a2.sqrt() - mean_amp;
                acc.dev2.add(w * d * d);
                acc.dev_amp2.add(w * da * da);
            });
            acc
        })
        .collect();
    let dev = pairwise_reduce(&second, &Acc::merged).expect("at least one segment");
    let variance = dev.dev2.value().max(0.0);
    let a2 = spec.amplitude * spec.amplitude;
    let bias = mean - a2;
    Ok(MomentReport {
        mean_amp_sq: mean,
        second_moment_amp_sq: variance + mean * mean,
        variance_amp_sq: variance,
        bias,
        mse: bias * bias + variance,
        mean_amp,
        variance_amp: dev.dev_amp2.value().max(0.0),
        engine: Engine::Exact,
    })
}

/// `exact_moments(build_partition(spec, q))`.
pub fn ada_moments(spec: &SineSpec, q: &QuantizerSpec) -> Result<MomentReport> {
    exact_moments(&build_partition(spec, q)?)
}

/// `E[prod_j y_{u_j}^{m_j}]` over the random phase.
pub fn joint_moment(
    spec: &SineSpec,
    q: &QuantizerSpec,
    indices: &[usize],
    powers: &[u32],
) -> Result<f64> {
    if indices.len() != powers.len() {
        return Err(Error::LengthMismatch {
            expected: indices.len(),
            got: powers.len(),
        });
    }
    if powers.contains(&0) {
        return Err(invalid("powers must be >= 1"));
    }
    let mut distinct: Vec<usize> = indices.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let part = build_partition_for(spec, q, &distinct)?;
    let slots: Vec<usize> = indices
        .iter()
        .map(|u| distinct.binary_search(u).expect("present"))
        .collect();
    let mut acc = NeumaierSum::new();
    part.for_each_segment(|_, w, codes| {
        let prod: f64 = slots
            .iter()
            .zip(powers)
            .map(|(&p, &m)| (q.step * codes[p] as f64).powi(m as i32))
            .product();
        acc.add(w * prod);
    });
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsfit::amp_sq_estimate;
    use crate::signal::make_record;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q(bits: u32) -> QuantizerSpec {
        QuantizerSpec::from_bits(bits).unwrap()
    }

    #[test]
    fn level_sets_trivial() {
        let step = 0.25;
        let full = level_phi_set(0.1, step, 0.0, 0.0, 0.7, 0).unwrap();
        assert_eq!(full.len(), 1);
        assert!((full[0].len() - TAU).abs() < 1e-15);
        assert!(level_phi_set(0.1, step, 0.0, 0.0, 0.7, 1)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn level_set_matches_dense_grid() {
        let step = 2.0 / 8.0;
        let (a, k_u) = (0.8, 0.0);
        for n in -4..=4 {
            let set = level_phi_set(a, step, 0.0, 0.0, k_u, n).unwrap();
            assert!(set.len() <= 2);
            let grid = 100_000;
            let mut bad = 0;
            for j in 0..grid {
                let phi = TAU * (j as f64 + 0.5) / grid as f64;
                let direct = q(3).code(-a * (k_u + phi).cos()) == n;
                if set.iter().any(|iv| iv.contains(phi)) != direct {
                    bad += 1;
                }
            }
            assert_eq!(bad, 0, "level {n}");
        }
    }

    #[test]
    fn level_sets_partition_the_circle() {
        let step = 2.0 / 16.0;
        let total: f64 = (-10..=10)
            .flat_map(|n| level_phi_set(0.77, step, 0.2, 0.05, 2.5, n).unwrap())
            .map(|iv| iv.len())
            .sum();
        assert!((total - TAU).abs() < 1e-12);
    }

    #[test]
    fn sub_bin_partition() {
        let spec = SineSpec::new(0.4 * 2.0 / 256.0, 7, 50).unwrap();
        let p = build_partition(&spec, &q(8)).unwrap();
        assert_eq!(p.num_segments(), 1);
        assert!(p.segment_codes(0).iter().all(|&c| c == 0));
        let m = exact_moments(&p).unwrap();
        assert_eq!(m.mean_amp_sq, 0.0);
        assert_eq!(m.variance_amp_sq, 0.0);
        assert_eq!(m.bias, -spec.amplitude.powi(2));
    }

    #[test]
    fn zero_amplitude_partition() {
        let spec = SineSpec::new(0.0, 1, 8).unwrap();
        let p = build_partition(&spec, &q(4)).unwrap();
        assert_eq!(p.num_segments(), 1);
        let spec = spec.with_offset(0.3);
        let p = build_partition(&spec, &q(4)).unwrap();
        assert!(p.segment_codes(0).iter().all(|&c| c == 2));
    }

    #[test]
    fn small_partition_measure_and_size() {
        let spec = SineSpec::new(0.9, 1, 4).unwrap();
        let p = build_partition(&spec, &q(2)).unwrap();
        assert!((p.measure() - TAU).abs() < 1e-12);
        // 2 boundaries crossed twice per sample
        assert!(p.num_segments() <= 2 * 4 * 2 + 1);
        assert_eq!(p.code_matrix(1000).unwrap().len(), p.num_segments());
        assert!(p.code_matrix(3).is_err());
    }

    #[test]
    fn segment_labels_match_direct_quantization() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = SineSpec::new(0.93, 13, 64).unwrap();
        let qq = q(6);
        let p = build_partition(&spec, &qq).unwrap();
        let mut s = 0;
        p.for_each_segment(|seg, _, codes| {
            let iv = p.segment(seg);
            if iv.len() < 1e-9 {
                return;
            }
            for _ in 0..3 {
                let phi = iv.lo + iv.len() * rng.gen_range(0.01..0.99);
                let direct: Vec<i64> = spec
                    .with_phase(phi)
                    .samples()
                    .iter()
                    .map(|&x| qq.code(x))
                    .collect();
                assert_eq!(direct, codes, "segment {seg}");
            }
            s += 1;
        });
        assert!(s > 100);
    }

    #[test]
    fn random_phases_match_records() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = SineSpec::new(0.71, 37, 256).unwrap();
        let qq = q(12);
        let p = build_partition(&spec, &qq).unwrap();
        for _ in 0..100 {
            let phi: f64 = rng.gen_range(0.0..TAU);
            let s = p.breakpoints().partition_point(|&b| b <= phi) - 1;
            let rec = make_record(&spec.with_phase(phi), &qq, 0.0, &mut rng).unwrap();
            let codes: Vec<f64> = p
                .segment_codes(s)
                .iter()
                .map(|&c| c as f64 * qq.step)
                .collect();
            assert_eq!(rec, codes);
        }
    }

    #[test]
    fn moments_match_fine_quadrature() {
        let spec = SineSpec::new(0.61, 3, 10).unwrap();
        let qq = q(4);
        let m = ada_moments(&spec, &qq).unwrap();
        let grid = 400_000;
        let mut acc = NeumaierSum::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for j in 0..grid {
            let phi = TAU * (j as f64 + 0.5) / grid as f64;
            let y = make_record(&spec.with_phase(phi), &qq, 0.0, &mut rng).unwrap();
            acc.add(amp_sq_estimate(&y, 3, 10).unwrap());
        }
        // the midpoint rule carries O(jump * h) error at each discontinuity
        assert!(
            (acc.value() / grid as f64 - m.mean_amp_sq).abs() < 1e-5,
            "{} vs {}",
            acc.value() / grid as f64,
            m.mean_amp_sq
        );
        assert!((m.mse - (m.bias * m.bias + m.variance_amp_sq)).abs() < 1e-15);
    }

    #[test]
    fn offset_reduction() {
        let step = 2.0 / 32.0;
        let d = 0.3 * step;
        let spec = SineSpec::new(0.55, 7, 40).unwrap();
        let with_d = ada_moments(&spec.with_offset(d), &q(5)).unwrap();
        let with_c = ada_moments(&spec, &q(5).with_offset(d / step).unwrap()).unwrap();
        assert!((with_d.mean_amp_sq - with_c.mean_amp_sq).abs() < 1e-13);
        assert!((with_d.variance_amp_sq - with_c.variance_amp_sq).abs() < 1e-13);
    }

    #[test]
    fn joint_moments() {
        let qq = q(3);
        let sub = SineSpec::new(0.1, 1, 8).unwrap();
        assert_eq!(joint_moment(&sub, &qq, &[2], &[1]).unwrap(), 0.0);

        // E[y_u^2] against midpoint quadrature
        let spec = SineSpec::new(1.0 - qq.step / 2.0, 1, 8).unwrap();
        let e2 = joint_moment(&spec, &qq, &[3], &[2]).unwrap();
        let grid = 2_000_000;
        let mut acc = NeumaierSum::new();
        for j in 0..grid {
            let phi = TAU * (j as f64 + 0.5) / grid as f64;
            acc.add(qq.quantize(spec.with_phase(phi).waveform(3)).powi(2));
        }
        assert!(
            (acc.value() / grid as f64 - e2).abs() < 1e-6,
            "{} vs {e2}",
            acc.value() / grid as f64
        );
        assert!(joint_moment(&spec, &qq, &[9], &[1]).is_err());
        assert!(joint_moment(&spec, &qq, &[1], &[0]).is_err());
    }

    #[test]
    fn pair_correlation_by_interval_intersection() {
        // two samples of a 3-bit quantized sine, built from level sets
        let qq = q(3);
        let spec = SineSpec::new(0.9, 1, 8).unwrap();
        let (u1, u2) = (0usize, 3usize);
        let (k1, k2) = (spec.angle(u1), spec.angle(u2));
        let mut want = 0.0;
        for n1 in -4..=4i64 {
            for n2 in -4..=4i64 {
                let s1 = level_phi_set(spec.amplitude, qq.step, 0.0, 0.0, k1, n1).unwrap();
                let s2 = level_phi_set(spec.amplitude, qq.step, 0.0, 0.0, k2, n2).unwrap();
                for x in &s1 {
                    for y in &s2 {
                        let overlap = (x.hi.min(y.hi) - x.lo.max(y.lo)).max(0.0);
                        want += (n1 * n2) as f64 * overlap;
                    }
                }
            }
        }
        want *= qq.step * qq.step / TAU;
        let got = joint_moment(&spec, &qq, &[u1, u2], &[1, 1]).unwrap();
        assert!((got - want).abs() < 1e-14, "{got} vs {want}");
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let spec = SineSpec::new(0.83, 11, 120).unwrap();
        let p = build_partition(&spec, &q(9)).unwrap();
        let a = exact_moments(&p).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| exact_moments(&p).unwrap());
        assert_eq!(a, b);
    }
}
