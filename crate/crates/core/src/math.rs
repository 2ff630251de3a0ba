//! Scalar helpers shared by the predictors and objectives.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Logistic function, evaluated without overflow for large |x|.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `ln σ(x) = -ln(1 + e^{-x})`, branching at zero so neither side overflows.
#[inline]
pub fn ln_sigmoid(x: f64) -> f64 {
    if x < 0.0 {
        x - libm::log1p(libm::exp(x))
    } else {
        -libm::log1p(libm::exp(-x))
    }
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn log2(x: f64) -> f64 {
    libm::log2(x)
}
