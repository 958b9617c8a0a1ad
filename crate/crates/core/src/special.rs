//! Small special-function helpers.

use statrs::function::factorial as sf;

/// `n!` as a float (table lookup up to 170, infinite beyond).
pub fn factorial(n: usize) -> f64 {
    sf::factorial(n as u64)
}

pub fn ln_factorial(n: usize) -> f64 {
    sf::ln_factorial(n as u64)
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    sf::binomial(n as u64, k as u64)
}

pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    sf::ln_binomial(n as u64, k as u64)
}

/// Binomial coefficient for real arguments, via log-gamma.
pub fn ln_binomial_real(n: f64, k: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
}

/// Point `index` of the Halton sequence in base `base`, in [0, 1).
pub fn halton(mut index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while index > 0 {
        f /= b;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}
