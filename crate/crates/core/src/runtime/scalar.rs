//! Scalar abstraction for the interpreter: plain `f64` or a
//! derivative-carrying dual number.

use statrs::function::gamma::{digamma, ln_gamma};

/// Real scalar the interpreter computes with. Comparisons are on the
/// primal value only.
pub trait Scalar: Clone + std::fmt::Debug {
    fn from_f64(v: f64) -> Self;
    fn value(&self) -> f64;

    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn ln(&self) -> Self;
    fn exp(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn powf(&self, o: &Self) -> Self;
    fn ln_gamma(&self) -> Self;

    fn atan(&self) -> Self;
    fn ln_1p(&self) -> Self;
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }

    fn value(&self) -> f64 {
        *self
    }

    fn add(&self, o: &Self) -> Self {
        self + o
    }

    fn sub(&self, o: &Self) -> Self {
        self - o
    }

    fn mul(&self, o: &Self) -> Self {
        self * o
    }

    fn div(&self, o: &Self) -> Self {
        self / o
    }

    fn neg(&self) -> Self {
        -self
    }

    fn ln(&self) -> Self {
        f64::ln(*self)
    }

    fn exp(&self) -> Self {
        f64::exp(*self)
    }

    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }

    fn powf(&self, o: &Self) -> Self {
        f64::powf(*self, *o)
    }

    fn ln_gamma(&self) -> Self {
        ln_gamma(*self)
    }

    fn atan(&self) -> Self {
        f64::atan(*self)
    }

    fn ln_1p(&self) -> Self {
        f64::ln_1p(*self)
    }
}

/// Forward-mode dual number with a tangent vector, one slot per active
/// input. Constants carry an empty tangent, which stands for all zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct Dual {
    pub val: f64,
    pub dot: Vec<f64>,
}

impl Dual {
    pub fn constant(v: f64) -> Dual {
        Dual {
            val: v,
            dot: Vec::new(),
        }
    }

    /// A seeded input: unit tangent in `slot` out of `width`.
    pub fn active(v: f64, slot: usize, width: usize) -> Dual {
        let mut dot = vec![0.0; width];
        dot[slot] = 1.0;
        Dual { val: v, dot }
    }

    pub fn tangent(&self, slot: usize) -> f64 {
        self.dot.get(slot).copied().unwrap_or(0.0)
    }

    fn zip(a: &[f64], b: &[f64], ca: f64, cb: f64) -> Vec<f64> {
        if a.is_empty() && b.is_empty() {
            return Vec::new();
        }
        let n = a.len().max(b.len());
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let xa = a.get(i).copied().unwrap_or(0.0);
            let xb = b.get(i).copied().unwrap_or(0.0);
            // avoid NaN from 0 * inf when a side has no tangent
            let ta = if xa == 0.0 { 0.0 } else { ca * xa };
            let tb = if xb == 0.0 { 0.0 } else { cb * xb };
            out.push(ta + tb);
        }
        out
    }

    fn chain(&self, value: f64, deriv: f64) -> Dual {
        if self.dot.is_empty() {
            return Dual::constant(value);
        }
        Dual {
            val: value,
            dot: self
                .dot
                .iter()
                .map(|d| if *d == 0.0 { 0.0 } else { deriv * d })
                .collect(),
        }
    }
}

impl Scalar for Dual {
    fn from_f64(v: f64) -> Self {
        Dual::constant(v)
    }

    fn value(&self) -> f64 {
        self.val
    }

    fn add(&self, o: &Self) -> Self {
        Dual {
            val: self.val + o.val,
            dot: Dual::zip(&self.dot, &o.dot, 1.0, 1.0),
        }
    }

    fn sub(&self, o: &Self) -> Self {
        Dual {
            val: self.val - o.val,
            dot: Dual::zip(&self.dot, &o.dot, 1.0, -1.0),
        }
    }

    fn mul(&self, o: &Self) -> Self {
        Dual {
            val: self.val * o.val,
            dot: Dual::zip(&self.dot, &o.dot, o.val, self.val),
        }
    }

    fn div(&self, o: &Self) -> Self {
        let inv = 1.0 / o.val;
        Dual {
            val: self.val * inv,
            dot: Dual::zip(&self.dot, &o.dot, inv, -self.val * inv * inv),
        }
    }

    fn neg(&self) -> Self {
        Dual {
            val: -self.val,
            dot: self.dot.iter().map(|d| -d).collect(),
        }
    }

    fn ln(&self) -> Self {
        self.chain(self.val.ln(), 1.0 / self.val)
    }

    fn exp(&self) -> Self {
        let e = self.val.exp();
        self.chain(e, e)
    }

    fn sqrt(&self) -> Self {
        let s = self.val.sqrt();
        self.chain(s, 0.5 / s)
    }

    fn powf(&self, o: &Self) -> Self {
        let val = self.val.powf(o.val);
        // d(a^b) = a^b * (b' ln a + b a' / a)
        let da = o.val * self.val.powf(o.val - 1.0);
        let db = if o.dot.is_empty() {
            0.0
        } else {
            val * self.val.ln()
        };
        Dual {
            val,
            dot: Dual::zip(&self.dot, &o.dot, da, db),
        }
    }

    fn ln_gamma(&self) -> Self {
        self.chain(ln_gamma(self.val), digamma(self.val))
    }

    fn atan(&self) -> Self {
        self.chain(self.val.atan(), 1.0 / (1.0 + self.val * self.val))
    }

    fn ln_1p(&self) -> Self {
        self.chain(self.val.ln_1p(), 1.0 / (1.0 + self.val))
    }
}
