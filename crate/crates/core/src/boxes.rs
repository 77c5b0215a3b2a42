//! Named boxes of the binary scenario.

use crate::corr::{Correlation, ExactBox, FloatBox, Scenario};
use crate::num::{int, ratio, Rational, Scalar};

fn pr_class_generic<T: Scalar>(alpha: u8, beta: u8, gamma: u8) -> Correlation<T> {
    let half = T::one() / T::from_usize(2);
    Correlation::from_fn(Scenario::binary(), |x, y, a, b| {
        let target = (x & y) ^ (alpha as usize & x) ^ (beta as usize & y) ^ gamma as usize;
        if a ^ b == target {
            half.clone()
        } else {
            T::zero()
        }
    })
    .expect("PR-class boxes are normalized")
}

/// `½ δ(a⊕b = xy ⊕ αx ⊕ βy ⊕ γ)`.
pub fn pr_class(alpha: u8, beta: u8, gamma: u8) -> ExactBox {
    pr_class_generic(alpha & 1, beta & 1, gamma & 1)
}

/// `½ δ(a⊕b = xy)`.
pub fn pr_box() -> ExactBox {
    pr_class(0, 0, 0)
}

pub fn noise() -> ExactBox {
    Correlation::uniform(Scenario::binary())
}

/// `(1+p)/2 · PR + (1−p)/2 · noise`, exact.
pub fn isotropic(p: &Rational) -> ExactBox {
    let one = int(1);
    let half = ratio(1, 2);
    let w_pr = (&one + p) * &half;
    let w_noise = (&one - p) * &half;
    Correlation::mix(&[(w_pr, &pr_box()), (w_noise, &noise())]).expect("weights sum to 1")
}

/// Float version of [`isotropic`] for irrational parameters.
pub fn isotropic_f64(p: f64) -> FloatBox {
    Correlation::mix(&[
        ((1.0 + p) / 2.0, &pr_box().to_float()),
        ((1.0 - p) / 2.0, &noise().to_float()),
    ])
    .expect("weights sum to 1")
}

/// `δ(a=y) δ(b=x)`: each party outputs the other's input. Signaling.
pub fn swap_box() -> ExactBox {
    Correlation::from_fn(Scenario::binary(), |x, y, a, b| {
        if a == y && b == x {
            int(1)
        } else {
            int(0)
        }
    })
    .expect("deterministic table")
}
