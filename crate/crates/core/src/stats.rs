// Running sufficient statistics with exact add/remove.
//
// Sums are kept in 384-bit two's-complement fixed point (least significant
// bit 2^-190). Converting a float to fixed point is deterministic, so adding
// and later removing the same observation restores the accumulator bit for
// bit, and the value no longer depends on the order of additions.

use serde::{Deserialize, Serialize};

const LIMBS: usize = 6;
const FRAC_BITS: i32 = 190;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ExactSum {
    limbs: [u64; LIMBS],
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    fn from_f64(x: f64) -> Self {
        assert!(x.is_finite(), "cannot accumulate non-finite value {x}");
        let mut out = ExactSum::default();
        if x == 0.0 {
            return out;
        }
        let bits = x.abs().to_bits();
        let exp = ((bits >> 52) & 0x7ff) as i32;
        let (mantissa, e) =
            if exp == 0 { (bits & ((1 << 52) - 1), -1074) } else { ((bits & ((1 << 52) - 1)) | (1 << 52), exp - 1075) };
        // |x| = mantissa * 2^e; fixed-point integer is mantissa * 2^(e + FRAC_BITS).
        let shift = e + FRAC_BITS;
        assert!(shift + 53 < 64 * LIMBS as i32 - 1, "value {x} exceeds the exact accumulator range");
        if shift < 0 {
            if shift <= -64 {
                return out;
            }
            out.limbs[0] = mantissa >> (-shift);
        } else {
            let (word, bit) = ((shift / 64) as usize, (shift % 64) as u32);
            out.limbs[word] = mantissa << bit;
            if bit > 0 && word + 1 < LIMBS {
                out.limbs[word + 1] = mantissa >> (64 - bit);
            }
        }
        if x < 0.0 {
            out.negate();
        }
        out
    }

    fn negate(&mut self) {
        let mut carry = 1u64;
        for l in self.limbs.iter_mut() {
            let (v, c) = (!*l).overflowing_add(carry);
            *l = v;
            carry = c as u64;
        }
    }

    fn add_limbs(&mut self, other: &ExactSum) {
        let mut carry = 0u64;
        for (a, b) in self.limbs.iter_mut().zip(other.limbs.iter()) {
            let (s1, c1) = a.overflowing_add(*b);
            let (s2, c2) = s1.overflowing_add(carry);
            *a = s2;
            carry = (c1 || c2) as u64;
        }
    }

    pub fn add(&mut self, x: f64) {
        self.add_limbs(&ExactSum::from_f64(x));
    }

    pub fn sub(&mut self, x: f64) {
        self.add_limbs(&ExactSum::from_f64(-x));
    }

    fn is_negative(&self) -> bool {
        self.limbs[LIMBS - 1] >> 63 == 1
    }

    /// Value rounded to f64 (a deterministic function of the exact state).
    pub fn value(&self) -> f64 {
        let mut mag = *self;
        let neg = mag.is_negative();
        if neg {
            mag.negate();
        }
        let mut v = 0.0;
        for i in (0..LIMBS).rev() {
            v += mag.limbs[i] as f64 * (2.0f64).powi(64 * i as i32 - FRAC_BITS);
        }
        if neg {
            -v
        } else {
            v
        }
    }
}

/// Count, coordinate sums and upper-triangular cross-product sums of the
/// observations currently assigned to a cluster.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClusterStats {
    n: usize,
    dim: usize,
    sum: Vec<ExactSum>,
    cross: Vec<ExactSum>,
}

impl ClusterStats {
    pub fn new(dim: usize) -> Self {
        ClusterStats { n: 0, dim, sum: vec![ExactSum::new(); dim], cross: vec![ExactSum::new(); dim * (dim + 1) / 2] }
    }

    pub fn from_data<'a, I: IntoIterator<Item = &'a [f64]>>(dim: usize, data: I) -> Self {
        let mut s = ClusterStats::new(dim);
        for x in data {
            s.add(x);
        }
        s
    }

    fn tri(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * self.dim - i * (i + 1) / 2 + j
    }

    pub fn add(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.dim, "observation dimension mismatch");
        self.n += 1;
        for i in 0..self.dim {
            self.sum[i].add(x[i]);
            for j in i..self.dim {
                let t = self.tri(i, j);
                self.cross[t].add(x[i] * x[j]);
            }
        }
    }

    pub fn remove(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.dim, "observation dimension mismatch");
        assert!(self.n > 0, "removing from an empty cluster");
        self.n -= 1;
        for i in 0..self.dim {
            self.sum[i].sub(x[i]);
            for j in i..self.dim {
                let t = self.tri(i, j);
                self.cross[t].sub(x[i] * x[j]);
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sum(&self, i: usize) -> f64 {
        self.sum[i].value()
    }

    /// `sum_obs x_i x_j`.
    pub fn cross(&self, i: usize, j: usize) -> f64 {
        self.cross[self.tri(i, j)].value()
    }

    pub fn mean(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.sum(i) / self.n as f64).collect()
    }

    /// Centred scatter `sum (x - xbar)(x - xbar)^T`, row-major.
    pub fn scatter(&self) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        if self.n == 0 {
            return out;
        }
        let nf = self.n as f64;
        for i in 0..d {
            for j in i..d {
                let v = self.cross(i, j) - self.sum(i) * self.sum(j) / nf;
                out[i * d + j] = v;
                out[j * d + i] = v;
            }
        }
        for i in 0..d {
            out[i * d + i] = out[i * d + i].max(0.0);
        }
        out
    }
}
