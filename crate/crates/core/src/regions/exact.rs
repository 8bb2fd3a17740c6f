//! Exact summation of doubles.
//!
//! Every finite double is an integer multiple of 2^-1074, so a wide enough
//! two's-complement fixed-point integer holds any sum of doubles without
//! rounding. Addition is associative and order-independent; converting back
//! rounds once, to nearest with ties to even.

use std::ops::{AddAssign, SubAssign};

const LIMBS: usize = 34;
/// Exponent of the least significant bit.
const LSB_EXP: i32 = -1074;

#[derive(Clone, PartialEq, Eq)]
pub struct ExactSum {
    limbs: [u64; LIMBS],
}

impl Default for ExactSum {
    fn default() -> Self {
        ExactSum { limbs: [0; LIMBS] }
    }
}

impl std::fmt::Debug for ExactSum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ExactSum({:e})", self.to_f64())
    }
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let mut s = Self::new();
        for v in values {
            s.add(v);
        }
        s
    }

    /// Adds a finite double. Panics on NaN or infinity.
    pub fn add(&mut self, x: f64) {
        assert!(x.is_finite(), "cannot sum {x}");
        if x == 0.0 {
            return;
        }
        let bits = x.to_bits();
        let biased = ((bits >> 52) & 0x7ff) as i32;
        let frac = bits & ((1 << 52) - 1);
        // x = mant * 2^(shift + LSB_EXP)
        let (mant, shift) = if biased == 0 {
            (frac, 0)
        } else {
            (frac | (1 << 52), (biased - 1) as u32)
        };
        let limb = (shift / 64) as usize;
        let off = shift % 64;
        let wide = u128::from(mant) << off;
        let parts = [wide as u64, (wide >> 64) as u64];
        if x > 0.0 {
            self.add_parts(limb, parts);
        } else {
            self.sub_parts(limb, parts);
        }
    }

    fn add_parts(&mut self, limb: usize, parts: [u64; 2]) {
        let mut carry = false;
        for i in limb..LIMBS {
            let addend = if i - limb < 2 { parts[i - limb] } else { 0 };
            if addend == 0 && !carry && i - limb >= 2 {
                break;
            }
            let (s1, c1) = self.limbs[i].overflowing_add(addend);
            let (s2, c2) = s1.overflowing_add(u64::from(carry));
            self.limbs[i] = s2;
            carry = c1 || c2;
        }
    }

    fn sub_parts(&mut self, limb: usize, parts: [u64; 2]) {
        let mut borrow = false;
        for i in limb..LIMBS {
            let sub = if i - limb < 2 { parts[i - limb] } else { 0 };
            if sub == 0 && !borrow && i - limb >= 2 {
                break;
            }
            let (d1, b1) = self.limbs[i].overflowing_sub(sub);
            let (d2, b2) = d1.overflowing_sub(u64::from(borrow));
            self.limbs[i] = d2;
            borrow = b1 || b2;
        }
    }

    fn is_negative(&self) -> bool {
        self.limbs[LIMBS - 1] >> 63 == 1
    }

    fn negated(&self) -> Self {
        let mut out = Self::new();
        let mut carry = true;
        for i in 0..LIMBS {
            let (v, c) = (!self.limbs[i]).overflowing_add(u64::from(carry));
            out.limbs[i] = v;
            carry = c;
        }
        out
    }

    fn bit(&self, i: usize) -> bool {
        (self.limbs[i / 64] >> (i % 64)) & 1 == 1
    }

    /// Up to 64 bits starting at bit `lo`.
    fn bits(&self, lo: usize, len: usize) -> u64 {
        let limb = lo / 64;
        let off = lo % 64;
        let mut v = self.limbs[limb] >> off;
        if off > 0 && limb + 1 < LIMBS {
            v |= self.limbs[limb + 1] << (64 - off);
        }
        if len < 64 {
            v &= (1 << len) - 1;
        }
        v
    }

    fn any_below(&self, n: usize) -> bool {
        let full = n / 64;
        if self.limbs[..full].iter().any(|l| *l != 0) {
            return true;
        }
        let rem = n % 64;
        rem > 0 && self.limbs[full] & ((1 << rem) - 1) != 0
    }

    /// The sum rounded to the nearest double, ties to even.
    pub fn to_f64(&self) -> f64 {
        if self.is_negative() {
            return -self.negated().magnitude_to_f64();
        }
        self.magnitude_to_f64()
    }

    fn magnitude_to_f64(&self) -> f64 {
        let Some(top) = (0..LIMBS).rev().find(|&i| self.limbs[i] != 0) else {
            return 0.0;
        };
        let h = top * 64 + 63 - self.limbs[top].leading_zeros() as usize;
        if h < 53 {
            // exact: at most 53 significant bits at the smallest exponent
            return self.bits(0, 53) as f64 * f64::from_bits(1);
        }
        let lo = h - 52;
        let mut mant = self.bits(lo, 53);
        let round = self.bit(lo - 1);
        let sticky = self.any_below(lo - 1);
        let mut h = h;
        if round && (sticky || mant & 1 == 1) {
            mant += 1;
            if mant == 1 << 53 {
                mant >>= 1;
                h += 1;
            }
        }
        let biased = h as i64 + i64::from(LSB_EXP) + 1023;
        if biased >= 0x7ff {
            return f64::INFINITY;
        }
        f64::from_bits(((biased as u64) << 52) | (mant & ((1 << 52) - 1)))
    }
}

impl AddAssign<&ExactSum> for ExactSum {
    fn add_assign(&mut self, rhs: &ExactSum) {
        let mut carry = false;
        for i in 0..LIMBS {
            let (s1, c1) = self.limbs[i].overflowing_add(rhs.limbs[i]);
            let (s2, c2) = s1.overflowing_add(u64::from(carry));
            self.limbs[i] = s2;
            carry = c1 || c2;
        }
    }
}

impl SubAssign<&ExactSum> for ExactSum {
    fn sub_assign(&mut self, rhs: &ExactSum) {
        let mut borrow = false;
        for i in 0..LIMBS {
            let (d1, b1) = self.limbs[i].overflowing_sub(rhs.limbs[i]);
            let (d2, b2) = d1.overflowing_sub(u64::from(borrow));
            self.limbs[i] = d2;
            borrow = b1 || b2;
        }
    }
}
