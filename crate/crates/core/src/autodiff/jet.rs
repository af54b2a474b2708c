//! Truncated bivariate Taylor jets in `(t, x)`.
//!
//! A jet stores the value of a scalar field together with a subset of its
//! partial derivatives `∂ᵗⁱ∂ˣʲ` with `i ≤ 1`, `j ≤ 3`, `i + j ≤ 3`. The
//! subset is described by a [`PartialSet`], which is always closed downward
//! (if `u_xxx` is stored, so are `u_xx`, `u_x` and `u`), so every product and
//! chain rule below only ever reads slots that are present.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::AdError;

/// Number of storable multi-indices.
pub const SLOTS: usize = 7;

/// A partial-derivative multi-index: order in `t` and order in `x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex {
    pub t: u8,
    pub x: u8,
}

/// Canonical slot layout. Slot 0 is always the value.
const SLOT_TABLE: [MultiIndex; SLOTS] = [
    MultiIndex { t: 0, x: 0 },
    MultiIndex { t: 1, x: 0 },
    MultiIndex { t: 0, x: 1 },
    MultiIndex { t: 0, x: 2 },
    MultiIndex { t: 0, x: 3 },
    MultiIndex { t: 1, x: 1 },
    MultiIndex { t: 1, x: 2 },
];

impl MultiIndex {
    pub const VALUE: Self = Self { t: 0, x: 0 };
    pub const T: Self = Self { t: 1, x: 0 };
    pub const X: Self = Self { t: 0, x: 1 };
    pub const XX: Self = Self { t: 0, x: 2 };
    pub const XXX: Self = Self { t: 0, x: 3 };
    pub const TX: Self = Self { t: 1, x: 1 };
    pub const TXX: Self = Self { t: 1, x: 2 };

    pub fn new(t: u8, x: u8) -> Result<Self, AdError> {
        if t > 1 || x > 3 || t + x > 3 {
            return Err(AdError::UnsupportedOrder { t, x });
        }
        Ok(Self { t, x })
    }

    pub fn slot(self) -> usize {
        match (self.t, self.x) {
            (0, 0) => 0,
            (1, 0) => 1,
            (0, 1) => 2,
            (0, 2) => 3,
            (0, 3) => 4,
            (1, 1) => 5,
            (1, 2) => 6,
            _ => unreachable!("multi-index validated on construction"),
        }
    }

    pub fn from_slot(slot: usize) -> Self {
        SLOT_TABLE[slot]
    }

    /// Componentwise `self ≤ other`.
    pub fn precedes(self, other: Self) -> bool {
        self.t <= other.t && self.x <= other.x
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.t == 0 && self.x == 0 {
            return write!(f, "u");
        }
        write!(f, "u_")?;
        for _ in 0..self.t {
            write!(f, "t")?;
        }
        for _ in 0..self.x {
            write!(f, "x")?;
        }
        Ok(())
    }
}

/// A downward-closed set of stored multi-indices, as a bitmask over slots.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartialSet(u8);

impl PartialSet {
    pub const VALUE_ONLY: Self = Self(1);
    pub const FULL: Self = Self(0b111_1111);

    /// Smallest downward-closed set containing every index in `indices`.
    pub fn from_indices(indices: &[MultiIndex]) -> Self {
        let mut mask = 1u8;
        for &idx in indices {
            for (slot, cand) in SLOT_TABLE.iter().enumerate() {
                if cand.precedes(idx) {
                    mask |= 1 << slot;
                }
            }
        }
        Self(mask)
    }

    /// Every index with `t ≤ max_t`, `x ≤ max_x` (and total order ≤ 3).
    pub fn for_orders(max_t: u8, max_x: u8) -> Result<Self, AdError> {
        if max_t > 1 || max_x > 3 {
            return Err(AdError::UnsupportedOrder { t: max_t, x: max_x });
        }
        let mut mask = 0u8;
        for (slot, idx) in SLOT_TABLE.iter().enumerate() {
            if idx.t <= max_t && idx.x <= max_x {
                mask |= 1 << slot;
            }
        }
        Ok(Self(mask))
    }

    pub fn contains(self, idx: MultiIndex) -> bool {
        self.has_slot(idx.slot())
    }

    pub fn has_slot(self, slot: usize) -> bool {
        self.0 & (1 << slot) != 0
    }

    pub fn union(self, other: Self) -> Self {
        Self(self.0 | other.0)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_value_only(self) -> bool {
        self.0 == 1
    }

    /// Stored slots in canonical order.
    pub fn slots(self) -> impl Iterator<Item = usize> {
        (0..SLOTS).filter(move |&s| self.has_slot(s))
    }

    pub fn indices(self) -> impl Iterator<Item = MultiIndex> {
        self.slots().map(MultiIndex::from_slot)
    }

    /// Position of `slot` within the compact storage of this set.
    pub fn position(self, slot: usize) -> Option<usize> {
        if !self.has_slot(slot) {
            return None;
        }
        Some((self.0 & ((1u8 << slot) - 1)).count_ones() as usize)
    }

    pub fn bits(self) -> u8 {
        self.0
    }
}

impl fmt::Debug for PartialSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.indices().map(|i| i.to_string())).finish()
    }
}

/// One term `coeff · a[a_slot] · b[b_slot]` of the Leibniz rule for `out_slot`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct LeibnizTerm {
    pub out: usize,
    pub a: usize,
    pub b: usize,
    pub coeff: f64,
}

fn binom(n: u8, k: u8) -> f64 {
    match (n, k) {
        (_, 0) => 1.0,
        (n, k) if k == n => 1.0,
        (2, 1) => 2.0,
        (3, 1) | (3, 2) => 3.0,
        _ => unreachable!(),
    }
}

/// Leibniz terms for a product whose output is stored in `out`, restricted to
/// the slots present in the two operands.
pub(crate) fn leibniz_terms(out: PartialSet, a: PartialSet, b: PartialSet) -> Vec<LeibnizTerm> {
    let mut terms = Vec::new();
    for s in out.slots() {
        let target = MultiIndex::from_slot(s);
        for ka in a.slots() {
            let ia = MultiIndex::from_slot(ka);
            if !ia.precedes(target) {
                continue;
            }
            let ib = MultiIndex {
                t: target.t - ia.t,
                x: target.x - ia.x,
            };
            let kb = ib.slot();
            if !b.has_slot(kb) {
                continue;
            }
            terms.push(LeibnizTerm {
                out: s,
                a: ka,
                b: kb,
                coeff: binom(target.t, ia.t) * binom(target.x, ia.x),
            });
        }
    }
    terms
}

/// Elementary scalar functions with derivatives up to order 4.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum UnaryFn {
    Tanh,
    Exp,
    Ln,
    Recip,
    Powi(i32),
}

impl UnaryFn {
    pub fn name(self) -> &'static str {
        match self {
            UnaryFn::Tanh => "tanh",
            UnaryFn::Exp => "exp",
            UnaryFn::Ln => "ln",
            UnaryFn::Recip => "recip",
            UnaryFn::Powi(_) => "powi",
        }
    }

    pub fn value(self, a: f64) -> f64 {
        match self {
            UnaryFn::Tanh => a.tanh(),
            UnaryFn::Exp => a.exp(),
            UnaryFn::Ln => a.ln(),
            UnaryFn::Recip => 1.0 / a,
            UnaryFn::Powi(n) => a.powi(n),
        }
    }

    /// `[f, f', f'', f''', f'''']` at `a`.
    pub fn derivatives(self, a: f64) -> [f64; 5] {
        match self {
            UnaryFn::Tanh => {
                let s = a.tanh();
                let d1 = 1.0 - s * s;
                let d2 = -2.0 * s * d1;
                let d3 = -2.0 * (d1 * d1 + s * d2);
                let d4 = -2.0 * (3.0 * d1 * d2 + s * d3);
                [s, d1, d2, d3, d4]
            }
            UnaryFn::Exp => {
                let e = a.exp();
                [e; 5]
            }
            UnaryFn::Ln => {
                let r = 1.0 / a;
                let r2 = r * r;
                [a.ln(), r, -r2, 2.0 * r2 * r, -6.0 * r2 * r2]
            }
            UnaryFn::Recip => {
                let r = 1.0 / a;
                let r2 = r * r;
                let r3 = r2 * r;
                [r, -r2, 2.0 * r3, -6.0 * r2 * r2, 24.0 * r3 * r2]
            }
            UnaryFn::Powi(n) => {
                let mut out = [0.0; 5];
                let mut c = 1.0;
                for (k, o) in out.iter_mut().enumerate() {
                    let e = n - k as i32;
                    *o = if c == 0.0 { 0.0 } else { c * a.powi(e) };
                    c *= e as f64;
                }
                out
            }
        }
    }
}

/// Chain rule `y = f(a)` on a dense 7-slot jet. `f[k]` is the k-th
/// derivative of `f` at `a[0]`; slots absent from `set` are left at zero.
pub(crate) fn compose(f: &[f64], a: &[f64; SLOTS], set: PartialSet) -> [f64; SLOTS] {
    let [_, a10, a01, a02, a03, a11, a12] = *a;
    let mut y = [0.0; SLOTS];
    y[0] = f[0];
    if set.has_slot(1) {
        y[1] = f[1] * a10;
    }
    if set.has_slot(2) {
        y[2] = f[1] * a01;
    }
    if set.has_slot(3) {
        y[3] = f[2] * a01 * a01 + f[1] * a02;
    }
    if set.has_slot(4) {
        y[4] = f[3] * a01 * a01 * a01 + 3.0 * f[2] * a01 * a02 + f[1] * a03;
    }
    if set.has_slot(5) {
        y[5] = f[2] * a10 * a01 + f[1] * a11;
    }
    if set.has_slot(6) {
        y[6] = f[3] * a10 * a01 * a01 + f[2] * (2.0 * a01 * a11 + a10 * a02) + f[1] * a12;
    }
    y
}

/// Adjoint of [`compose`]: given output adjoints `ybar`, returns input
/// adjoints. `f` must hold derivatives up to order 4.
#[cfg(test)]
pub(crate) fn compose_adjoint(
    f: &[f64; 5],
    a: &[f64; SLOTS],
    ybar: &[f64; SLOTS],
    set: PartialSet,
) -> [f64; SLOTS] {
    let [_, a10, a01, a02, _, a11, _] = *a;
    let mut abar = [0.0; SLOTS];
    // Sensitivity to the base value goes through every f^(k) → f^(k+1).
    let shifted = compose(&f[1..], a, set);
    abar[0] = (0..SLOTS).map(|s| ybar[s] * shifted[s]).sum();
    let [_, y10, y01, y02, y03, y11, y12] = *ybar;
    abar[1] = y10 * f[1] + y11 * f[2] * a01 + y12 * (f[3] * a01 * a01 + f[2] * a02);
    abar[2] = y01 * f[1]
        + y02 * 2.0 * f[2] * a01
        + y03 * (3.0 * f[3] * a01 * a01 + 3.0 * f[2] * a02)
        + y11 * f[2] * a10
        + y12 * (2.0 * f[3] * a10 * a01 + 2.0 * f[2] * a11);
    abar[3] = y02 * f[1] + y03 * 3.0 * f[2] * a01 + y12 * f[2] * a10;
    abar[4] = y03 * f[1];
    abar[5] = y11 * f[1] + y12 * 2.0 * f[2] * a01;
    abar[6] = y12 * f[1];
    for (s, v) in abar.iter_mut().enumerate() {
        if !set.has_slot(s) {
            *v = 0.0;
        }
    }
    abar
}

/// A scalar carrying its value and a set of `(t, x)` partial derivatives.
#[derive(Clone, Copy, PartialEq)]
pub struct DualScalar {
    coeffs: [f64; SLOTS],
    set: PartialSet,
}

impl DualScalar {
    pub fn constant(value: f64) -> Self {
        let mut coeffs = [0.0; SLOTS];
        coeffs[0] = value;
        Self {
            coeffs,
            set: PartialSet::VALUE_ONLY,
        }
    }

    /// A constant that nonetheless stores (zero) partials for `set`.
    pub fn constant_in(value: f64, set: PartialSet) -> Self {
        Self {
            set,
            ..Self::constant(value)
        }
    }

    /// The input variable `t` with the given stored set.
    pub fn seed_t(t: f64, set: PartialSet) -> Self {
        let mut d = Self::constant_in(t, set);
        if set.has_slot(1) {
            d.coeffs[1] = 1.0;
        }
        d
    }

    /// The input variable `x` with the given stored set.
    pub fn seed_x(x: f64, set: PartialSet) -> Self {
        let mut d = Self::constant_in(x, set);
        if set.has_slot(2) {
            d.coeffs[2] = 1.0;
        }
        d
    }

    pub fn from_coeffs(coeffs: [f64; SLOTS], set: PartialSet) -> Self {
        let mut c = coeffs;
        for (s, v) in c.iter_mut().enumerate() {
            if !set.has_slot(s) {
                *v = 0.0;
            }
        }
        Self { coeffs: c, set }
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn set(&self) -> PartialSet {
        self.set
    }

    /// Stored partial, or `None` when the index is not carried.
    pub fn get(&self, idx: MultiIndex) -> Option<f64> {
        self.set.contains(idx).then(|| self.coeffs[idx.slot()])
    }

    /// Stored partial, zero when not carried.
    pub fn d(&self, idx: MultiIndex) -> f64 {
        self.coeffs[idx.slot()]
    }

    pub fn coeffs(&self) -> &[f64; SLOTS] {
        &self.coeffs
    }

    pub fn apply(self, f: UnaryFn) -> Self {
        let d = f.derivatives(self.coeffs[0]);
        Self {
            coeffs: compose(&d, &self.coeffs, self.set),
            set: self.set,
        }
    }

    pub fn tanh(self) -> Self {
        self.apply(UnaryFn::Tanh)
    }

    pub fn exp(self) -> Self {
        self.apply(UnaryFn::Exp)
    }

    pub fn ln(self) -> Self {
        self.apply(UnaryFn::Ln)
    }

    pub fn recip(self) -> Self {
        self.apply(UnaryFn::Recip)
    }

    pub fn powi(self, n: i32) -> Self {
        self.apply(UnaryFn::Powi(n))
    }
}

impl fmt::Debug for DualScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for idx in self.set.indices() {
            m.entry(&idx.to_string(), &self.coeffs[idx.slot()]);
        }
        m.finish()
    }
}

impl Add for DualScalar {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let set = self.set.union(rhs.set);
        let mut coeffs = [0.0; SLOTS];
        for s in set.slots() {
            coeffs[s] = self.coeffs[s] + rhs.coeffs[s];
        }
        Self { coeffs, set }
    }
}

impl Sub for DualScalar {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for DualScalar {
    type Output = Self;
    fn neg(self) -> Self {
        let mut coeffs = self.coeffs;
        coeffs.iter_mut().for_each(|c| *c = -*c);
        Self { coeffs, ..self }
    }
}

impl Mul for DualScalar {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let set = self.set.union(rhs.set);
        let mut coeffs = [0.0; SLOTS];
        for term in leibniz_terms(set, self.set, rhs.set) {
            coeffs[term.out] += term.coeff * self.coeffs[term.a] * rhs.coeffs[term.b];
        }
        Self { coeffs, set }
    }
}

impl Div for DualScalar {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

impl Add<f64> for DualScalar {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.coeffs[0] += rhs;
        self
    }
}

impl Sub<f64> for DualScalar {
    type Output = Self;
    fn sub(mut self, rhs: f64) -> Self {
        self.coeffs[0] -= rhs;
        self
    }
}

impl Mul<f64> for DualScalar {
    type Output = Self;
    fn mul(mut self, rhs: f64) -> Self {
        for s in self.set.slots() {
            self.coeffs[s] *= rhs;
        }
        self
    }
}

impl Mul<DualScalar> for f64 {
    type Output = DualScalar;
    fn mul(self, rhs: DualScalar) -> DualScalar {
        rhs * self
    }
}

impl Div<f64> for DualScalar {
    type Output = Self;
    fn div(mut self, rhs: f64) -> Self {
        for s in self.set.slots() {
            self.coeffs[s] /= rhs;
        }
        self
    }
}

/// Input carriers for `t` and `x` storing every partial up to the given orders.
pub fn seed_inputs(
    t: f64,
    x: f64,
    max_t_order: u8,
    max_x_order: u8,
) -> Result<(DualScalar, DualScalar), AdError> {
    let set = PartialSet::for_orders(max_t_order, max_x_order)?;
    Ok((DualScalar::seed_t(t, set), DualScalar::seed_x(x, set)))
}
