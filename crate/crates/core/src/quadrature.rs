// Adaptive Gauss-Kronrod quadrature with log-space front ends.
//
// Every density in this crate is carried as a log value. The log-space
// integrators locate the peak of the log-integrand on a coarse grid,
// subtract it, integrate the exponentiated remainder, and add the shift
// back, so integrands spanning hundreds of orders of magnitude never
// underflow.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { rel_tol: 1e-8, abs_tol: 1e-12, max_subdivisions: 200 }
    }
}

impl QuadratureConfig {
    pub fn new(rel_tol: f64, abs_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let cfg = QuadratureConfig { rel_tol, abs_tol, max_subdivisions };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) || self.max_subdivisions < 1 {
            return Err(Error::Config(format!(
                "quadrature tolerances must be positive and max_subdivisions >= 1, got {:?}",
                self
            )));
        }
        Ok(())
    }

    /// Tighter copy for integrals nested inside another adaptive integral.
    pub fn nested(&self) -> Self {
        QuadratureConfig {
            rel_tol: (self.rel_tol * 1e-2).max(1e-13),
            abs_tol: (self.abs_tol * 1e-2).max(1e-300),
            max_subdivisions: self.max_subdivisions,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub abs_err: f64,
    pub evaluations: usize,
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_22,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn kronrod21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    check_finite(fc, center)?;
    let mut res_k = WGK[10] * fc;
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        check_finite(f1, center - dx)?;
        check_finite(f2, center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok((value, err))
}

fn check_finite(v: f64, x: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Numerical(format!("integrand is not finite ({v}) at x = {x}")))
    }
}

/// Adaptive 21-point Gauss-Kronrod integration of `f` over the finite
/// interval `[a, b]`. Fails with a numerical error, never a silent value,
/// when the tolerance cannot be met within `max_subdivisions` bisections.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("integration bounds must be finite, got [{a}, {b}]")));
    }
    if a == b {
        return Ok(Estimate { value: 0.0, abs_err: 0.0, evaluations: 0 });
    }
    let (value, err) = kronrod21(&mut f, a, b)?;
    let mut evaluations = 21;
    let mut total = value;
    let mut total_err = err;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, err });
    let mut subdivisions = 0;
    while total_err > cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
        if subdivisions >= cfg.max_subdivisions {
            return Err(Error::Numerical(format!(
                "quadrature on [{a}, {b}] did not reach tolerance after {} subdivisions \
                 (estimate {total:e}, error {total_err:e})",
                cfg.max_subdivisions
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::Numerical(format!(
                "quadrature interval [{}, {}] cannot be bisected further",
                worst.a, worst.b
            )));
        }
        let (v1, e1) = kronrod21(&mut f, worst.a, mid)?;
        let (v2, e2) = kronrod21(&mut f, mid, worst.b)?;
        evaluations += 42;
        subdivisions += 1;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Segment { a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, err: e2 });
        // Running sums drift; resum exactly once in a while.
        if subdivisions % 32 == 0 {
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.err).sum();
        }
    }
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let abs_err: f64 = heap.iter().map(|s| s.err).sum();
    Ok(Estimate { value, abs_err, evaluations })
}

fn finite_or_neg_inf(v: f64, x: f64) -> Result<f64> {
    if v.is_nan() || v == f64::INFINITY {
        Err(Error::Numerical(format!("log-integrand evaluated to {v} at x = {x}")))
    } else {
        Ok(v)
    }
}

fn shifted_log(est: Estimate, shift: f64) -> Result<f64> {
    if est.value < 0.0 {
        return Err(Error::Numerical(format!("integral of a positive function came out negative ({:e})", est.value)));
    }
    Ok(est.value.ln() + shift)
}

/// Log of the integral of `exp(log_f)` over the finite interval `[a, b]`.
pub fn log_integrate<F: FnMut(f64) -> f64>(mut log_f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<f64> {
    const GRID: usize = 64;
    let mut best = (f64::NEG_INFINITY, 0.5 * (a + b));
    let mut probe = |x: f64, best: &mut (f64, f64)| -> Result<()> {
        let v = finite_or_neg_inf(log_f(x), x)?;
        if v > best.0 {
            *best = (v, x);
        }
        Ok(())
    };
    for i in 0..GRID {
        probe(a + (b - a) * (i as f64 + 0.5) / GRID as f64, &mut best)?;
    }
    // Geometric probes catch peaks squeezed against either endpoint.
    for k in (4..=52).step_by(3) {
        let h = (b - a) * (2.0f64).powi(-k);
        probe(a + h, &mut best)?;
        probe(b - h, &mut best)?;
    }
    log_integrate_with_peak(log_f, a, b, best.1, best.0, cfg)
}

/// Same as [`log_integrate`] with a caller-supplied peak location and
/// log-value; the interval is split at the peak.
pub fn log_integrate_with_peak<F: FnMut(f64) -> f64>(
    mut log_f: F,
    a: f64,
    b: f64,
    peak_x: f64,
    peak_log: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if peak_log == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let mut err = None;
    let mut g = |x: f64| match finite_or_neg_inf(log_f(x), x) {
        Ok(v) => (v - peak_log).exp(),
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    };
    let split = peak_x.clamp(a, b);
    // A peak much narrower than its side would be invisible to the first
    // Kronrod rule; cut each side where the integrand has fallen far below
    // the peak so the bulk gets its own segment.
    let mut points = vec![a];
    for (end, sign) in [(a, -1.0), (b, 1.0)] {
        let len = (end - split).abs();
        let mut cut = None;
        for k in 1..=60 {
            let d = len * (2.0f64).powi(-k);
            if d == 0.0 {
                break;
            }
            if g(split + sign * d) >= BULK_DROP {
                if k > 1 {
                    cut = Some(split + sign * 2.0 * d);
                }
                break;
            }
            cut = Some(split + sign * d);
        }
        if let Some(c) = cut {
            points.push(c);
        }
    }
    points.push(split);
    points.push(b);
    points.sort_by(f64::total_cmp);
    // Bulk segments (touching the peak) first; the tails then only need
    // accuracy relative to the bulk.
    let mut total = 0.0;
    let mut tails = Vec::new();
    for w in points.windows(2) {
        if w[0] == split || w[1] == split {
            total += integrate(&mut g, w[0], w[1], cfg)?.value;
        } else {
            tails.push((w[0], w[1]));
        }
    }
    let tail_cfg = QuadratureConfig { abs_tol: cfg.abs_tol.max(0.25 * cfg.rel_tol * total), ..*cfg };
    for (lo, hi) in tails {
        total += integrate(&mut g, lo, hi, &tail_cfg)?.value;
    }
    if let Some(e) = err {
        return Err(e);
    }
    shifted_log(Estimate { value: total, abs_err: 0.0, evaluations: 0 }, peak_log)
}

// exp(-30): below this the integrand is treated as outside the bulk.
const BULK_DROP: f64 = 9.357_622_968_840_175e-14;

/// Coarse search for the maximiser of `log_f` on the whole real line,
/// followed by an estimate of the width of the peak.
fn locate_peak<F: FnMut(f64) -> f64>(log_f: &mut F, hint: f64) -> Result<(f64, f64, [f64; 2])> {
    let mut grid: Vec<f64> = vec![hint];
    for k in -6..=12 {
        let step = (2.0f64).powi(k);
        grid.push(hint - step);
        grid.push(hint + step);
    }
    grid.sort_by(f64::total_cmp);
    let mut values = Vec::with_capacity(grid.len());
    for &x in &grid {
        values.push(finite_or_neg_inf(log_f(x), x)?);
    }
    let idx = (0..grid.len()).max_by(|&i, &j| values[i].total_cmp(&values[j])).expect("grid is nonempty");
    let mut best = (values[idx], grid[idx]);
    // Golden-section polish between the neighbours of the best grid point.
    let mut lo = if idx > 0 { grid[idx - 1] } else { grid[idx] - 1.0 };
    let mut hi = if idx + 1 < grid.len() { grid[idx + 1] } else { grid[idx] + 1.0 };
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = finite_or_neg_inf(log_f(c), c)?;
    let mut fd = finite_or_neg_inf(log_f(d), d)?;
    for _ in 0..60 {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = finite_or_neg_inf(log_f(c), c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = finite_or_neg_inf(log_f(d), d)?;
        }
        if (hi - lo).abs() < 1e-10 * (1.0 + best.1.abs()) {
            break;
        }
    }
    let (fx, x) = if fc > fd { (fc, c) } else { (fd, d) };
    if fx > best.0 {
        best = (fx, x);
    }
    // Width on each side: first geometric step where the log drops by 1.
    let mut widths = [1.0, 1.0];
    for (w, sign) in widths.iter_mut().zip([-1.0, 1.0]) {
        for k in -30..=30 {
            let step = (2.0f64).powi(k);
            let x = best.1 + sign * step;
            let v = finite_or_neg_inf(log_f(x), x)?;
            if v < best.0 - 1.0 {
                *w = step;
                break;
            }
        }
    }
    Ok((best.1, best.0, widths))
}

/// Log of the integral of `exp(log_f)` over the whole real line. The
/// integrand must decay in both tails; `hint` is a rough location of its
/// bulk.
pub fn log_integrate_real_line<F: FnMut(f64) -> f64>(mut log_f: F, hint: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let (peak, peak_log, widths) = locate_peak(&mut log_f, hint)?;
    if peak_log == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let mut err = None;
    let mut total = 0.0;
    for (width, sign) in widths.into_iter().zip([-1.0, 1.0]) {
        // x = peak + sign * width * (1 - u) / u, u in (0, 1].
        let mut g = |u: f64| {
            let s = (1.0 - u) / u;
            let x = peak + sign * width * s;
            match finite_or_neg_inf(log_f(x), x) {
                Ok(v) => {
                    let e = (v - peak_log).exp();
                    if e == 0.0 {
                        0.0
                    } else {
                        e * width / (u * u)
                    }
                }
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            }
        };
        let est = integrate(&mut g, 0.0, 1.0, cfg)?;
        total += est.value;
    }
    if let Some(e) = err {
        return Err(e);
    }
    if !(total > 0.0) {
        return Err(Error::Numerical(format!("real-line integral is not positive ({total:e})")));
    }
    Ok(total.ln() + peak_log)
}

/// Numerically stable `log(sum(exp(xs)))`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
