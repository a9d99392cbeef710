// Univariate slice sampling with stepping out and shrinkage, on log
// densities.
//
// The interval is expanded in steps of `expansion_step`. The transition
// leaves the target invariant when the step equals `initial_width` (the
// default): the possible intervals then form a lattice, so any point of the
// slice would have produced the same final interval. Other step sizes are
// accepted for experimentation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SliceConfig {
    pub initial_width: f64,
    pub expansion_step: f64,
    pub max_expansions: usize,
    #[serde(skip_serializing_if = "is_unbounded")]
    pub lower_bound: f64,
    #[serde(skip_serializing_if = "is_unbounded")]
    pub upper_bound: f64,
}

// JSON has no infinities; open ends are left out and restored by the default.
fn is_unbounded(v: &f64) -> bool {
    v.is_infinite()
}

impl Default for SliceConfig {
    fn default() -> Self {
        SliceConfig {
            initial_width: 1.0,
            expansion_step: 1.0,
            max_expansions: 1000,
            lower_bound: f64::NEG_INFINITY,
            upper_bound: f64::INFINITY,
        }
    }
}

impl SliceConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.initial_width > 0.0
            && self.initial_width.is_finite()
            && self.expansion_step > 0.0
            && self.expansion_step.is_finite()
            && self.lower_bound < self.upper_bound;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid slice sampler settings {self:?}")))
        }
    }

    /// Same settings restricted to the open interval `(lo, hi)`.
    pub fn bounded(&self, lo: f64, hi: f64) -> Self {
        SliceConfig { lower_bound: lo, upper_bound: hi, ..*self }
    }
}

/// Result of one transition together with its bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceDraw {
    pub x: f64,
    pub log_f: f64,
    /// Log height of the slice; `log_f >= log_height` always holds.
    pub log_height: f64,
    /// Expansions of the left and right ends.
    pub expansions: [usize; 2],
    pub shrinks: usize,
}

const MAX_SHRINKS: usize = 10_000;

/// One slice-sampling transition from `x0` targeting `exp(log_f)` on the
/// open interval `(lower_bound, upper_bound)`.
pub fn slice_step<F, R>(log_f: F, x0: f64, cfg: &SliceConfig, rng: &mut R) -> Result<f64>
where
    F: FnMut(f64) -> f64,
    R: Rng + ?Sized,
{
    slice_step_detailed(log_f, x0, cfg, rng).map(|d| d.x)
}

pub fn slice_step_detailed<F, R>(mut log_f: F, x0: f64, cfg: &SliceConfig, rng: &mut R) -> Result<SliceDraw>
where
    F: FnMut(f64) -> f64,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    let (lo, hi) = (cfg.lower_bound, cfg.upper_bound);
    if !(x0 > lo && x0 < hi) {
        return Err(Error::Domain(format!("slice start {x0} is outside ({lo}, {hi})")));
    }
    let mut target = |x: f64| {
        if x > lo && x < hi {
            let v = log_f(x);
            if v.is_nan() {
                f64::NEG_INFINITY
            } else {
                v
            }
        } else {
            f64::NEG_INFINITY
        }
    };
    let lf0 = target(x0);
    if !lf0.is_finite() {
        return Err(Error::Domain(format!("slice start {x0} has log density {lf0}; it must be finite")));
    }
    // log U with U uniform on (0, 1] is minus a standard exponential.
    let u: f64 = 1.0 - rng.random::<f64>();
    let y = lf0 + u.ln();

    let l = cfg.initial_width * rng.random::<f64>();
    let mut a = x0 - l;
    let mut b = a + cfg.initial_width;
    let mut expansions = [0usize, 0];
    while target(a) >= y {
        if expansions[0] + expansions[1] >= cfg.max_expansions {
            return Err(expansion_error(cfg, x0));
        }
        a -= cfg.expansion_step;
        expansions[0] += 1;
    }
    while target(b) >= y {
        if expansions[0] + expansions[1] >= cfg.max_expansions {
            return Err(expansion_error(cfg, x0));
        }
        b += cfg.expansion_step;
        expansions[1] += 1;
    }
    // Points beyond the bounds are outside the slice; clipping is the same
    // as shrinking on them.
    a = a.max(lo);
    b = b.min(hi);

    let mut shrinks = 0;
    loop {
        let x1 = a + (b - a) * rng.random::<f64>();
        let lf1 = target(x1);
        if lf1 >= y {
            return Ok(SliceDraw { x: x1, log_f: lf1, log_height: y, expansions, shrinks });
        }
        shrinks += 1;
        if x1 < x0 {
            a = x1;
        } else {
            b = x1;
        }
        if b - a <= 4.0 * f64::EPSILON * x0.abs().max(1.0) {
            // Interval collapsed onto x0, which is always in the slice.
            return Ok(SliceDraw { x: x0, log_f: lf0, log_height: y, expansions, shrinks });
        }
        if shrinks >= MAX_SHRINKS {
            return Err(Error::Numerical(format!("slice shrinkage did not terminate around x0 = {x0}")));
        }
    }
}

fn expansion_error(cfg: &SliceConfig, x0: f64) -> Error {
    Error::Numerical(format!(
        "slice interval around {x0} still inside the slice after {} expansions",
        cfg.max_expansions
    ))
}
