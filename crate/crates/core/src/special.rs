//! Gamma function and friends.
//!
//! Lanczos approximation with the Pugh (2004) coefficient set, the same
//! one used by `statrs`, applied on [0.5, 2] with upward recurrence beyond
//! and the reflection formula for `x < 0.5`.

use std::f64::consts::{E, PI};

use crate::error::{Error, Result};

/// `2 * sqrt(e / pi)`
const TWO_SQRT_E_OVER_PI: f64 = 1.860_382_734_205_265_7;
/// `ln(2 * sqrt(e / pi))`
const LN_2_SQRT_E_OVER_PI: f64 = 0.620_782_237_635_245_2;
const LN_PI: f64 = 1.144_729_885_849_400_2;

const GAMMA_R: f64 = 10.900511;

static GAMMA_DK: [f64; 11] = [
    2.485_740_891_387_535_5e-5,
    1.051_423_785_817_219_7,
    -3.456_870_972_220_162_5,
    4.512_277_094_668_948,
    -2.982_852_253_235_766_4,
    1.056_397_115_771_267,
    -1.954_287_731_916_458_7e-1,
    1.709_705_434_044_412e-2,
    -5.719_261_174_043_057e-4,
    4.633_994_733_599_057e-6,
    -2.719_949_084_886_077_2e-9,
];

// (n-1)! for n = 1..=23, exact in f64 up to 22!.
static FACTORIAL: [f64; 23] = [
    1.0,
    1.0,
    2.0,
    6.0,
    24.0,
    120.0,
    720.0,
    5040.0,
    40320.0,
    362880.0,
    3628800.0,
    39916800.0,
    479001600.0,
    6227020800.0,
    87178291200.0,
    1307674368000.0,
    20922789888000.0,
    355687428096000.0,
    6402373705728000.0,
    121645100408832000.0,
    2432902008176640000.0,
    51090942171709440000.0,
    1124000727777607680000.0,
];

fn lanczos_sum(x: f64) -> f64 {
    GAMMA_DK
        .iter()
        .enumerate()
        .skip(1)
        .fold(GAMMA_DK[0], |s, (i, d)| s + d / (x + i as f64 - 1.0))
}

fn is_pole(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

/// Γ(x) for `x` away from the poles at 0, −1, −2, ….
///
/// Relative error is a few ulps on `[0.1, 50]`; the result overflows to
/// infinity beyond x ≈ 171.6.
pub fn gamma(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Ok(f64::NAN);
    }
    if is_pole(x) {
        return Err(Error::GammaPole(x));
    }
    Ok(gamma_unchecked(x))
}

fn gamma_unchecked(x: f64) -> f64 {
    if x >= 1.0 && x == x.floor() && x <= FACTORIAL.len() as f64 {
        return FACTORIAL[x as usize - 1];
    }
    if x < 0.5 {
        // Γ(x) Γ(1 - x) = π / sin(πx)
        PI / (sin_pi(x) * gamma_unchecked(1.0 - x))
    } else if x > 2.0 && x < 172.0 {
        // shift into [1, 2) and multiply back up
        let n = (x - 1.0).floor();
        let mut y = x - n;
        let mut prod = gamma_lanczos(y);
        for _ in 0..n as usize {
            prod *= y;
            y += 1.0;
        }
        prod
    } else {
        gamma_lanczos(x)
    }
}

fn gamma_lanczos(x: f64) -> f64 {
    let base = (x - 0.5 + GAMMA_R) / E;
    // split the power so that Γ(171) does not overflow in the intermediate
    let half = base.powf(0.5 * (x - 0.5));
    lanczos_sum(x) * TWO_SQRT_E_OVER_PI * half * half
}

/// Reciprocal gamma 1/Γ(x), an entire function: zero at the poles of Γ.
pub fn rgamma(x: f64) -> f64 {
    if is_pole(x) {
        return 0.0;
    }
    if x < 0.5 {
        // 1/Γ(x) = sin(πx) Γ(1 - x) / π
        let g = gamma_unchecked(1.0 - x);
        if g.is_infinite() {
            return f64::INFINITY.copysign(sin_pi(x));
        }
        return sin_pi(x) * g / PI;
    }
    let g = gamma_unchecked(x);
    if g.is_infinite() {
        0.0
    } else {
        1.0 / g
    }
}

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        LN_PI
            - sin_pi(x).abs().ln()
            - lanczos_sum(1.0 - x).ln()
            - LN_2_SQRT_E_OVER_PI
            - (0.5 - x) * ((0.5 - x + GAMMA_R) / E).ln()
    } else {
        lanczos_sum(x).ln() + LN_2_SQRT_E_OVER_PI + (x - 0.5) * ((x - 0.5 + GAMMA_R) / E).ln()
    }
}

/// sin(πx) with exact zeros at the integers.
fn sin_pi(x: f64) -> f64 {
    let r = x - 2.0 * (0.5 * x).round();
    if r == r.trunc() {
        return 0.0;
    }
    (PI * r).sin()
}
