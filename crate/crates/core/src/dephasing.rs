//! Maximally non-Markovian qubit dephasing.
//!
//! The coherence decays as `e^{−Γ(t)} = 1 − 2γt·e^{−γt}` and returns to its
//! initial value at long times, so `Γ(∞) = 0`. The same dynamics is
//! generated by the local rate `γ(t) = 2γ(1 − γt)/(e^{γt} − 2γt)` or by the
//! memory kernel `k(t) = 2γ[δ(t) − γ sin(γt)]`. Chains with `n` collisions
//! generalize the coherence to `c_n(t)`.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::linops::{c, sigma, CMatrix, Superoperator};
use crate::numerics::{quadrature, KernelSpec};

/// Absolute tolerance used for the Erlang quadratures behind `c_n(t)`.
const CN_QUAD_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DephasingParams {
    gamma: f64,
}

impl DephasingParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return invalid(format!("gamma must be positive, got {gamma}"));
        }
        check_denominator_once();
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Minimum of `e^x − 2x` over a dense grid of `x = γt ∈ [0, x_max]`.
///
/// The exact minimum is `2 − 2 ln 2` at `x = ln 2`.
pub fn denominator_minimum(x_max: f64, points: usize) -> f64 {
    (0..=points)
        .map(|k| {
            let x = x_max * k as f64 / points as f64;
            x.exp() - 2.0 * x
        })
        .fold(f64::INFINITY, f64::min)
}

fn check_denominator_once() {
    static CHECK: OnceLock<f64> = OnceLock::new();
    let min = *CHECK.get_or_init(|| denominator_minimum(50.0, 100_000));
    assert!(
        min > 0.5,
        "rate denominator not bounded away from zero: {min}"
    );
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoherenceParams {
    gamma: f64,
    n: u32,
}

impl RecoherenceParams {
    /// `n` is the number of collisions and must be even and at least 2.
    pub fn new(gamma: f64, n: u32) -> Result<Self> {
        DephasingParams::new(gamma)?;
        if n < 2 || !n.is_multiple_of(2) {
            return invalid(format!(
                "number of collisions must be even and >= 2, got {n}"
            ));
        }
        Ok(Self { gamma, n })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n(&self) -> u32 {
        self.n
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return invalid(format!("time must be finite and non-negative, got {t}"));
    }
    Ok(())
}

/// `γ(t) = 2γ(1 − γt)/(e^{γt} − 2γt)`.
pub fn rate_gamma(t: f64, p: &DephasingParams) -> Result<f64> {
    check_time(t)?;
    let x = p.gamma * t;
    Ok(2.0 * p.gamma * (1.0 - x) / (x.exp() - 2.0 * x))
}

/// Coherence factor `e^{−Γ(t)} = 1 − 2γt·e^{−γt}`.
pub fn coherence_factor(t: f64, p: &DephasingParams) -> Result<f64> {
    check_time(t)?;
    let x = p.gamma * t;
    Ok(1.0 - 2.0 * x * (-x).exp())
}

/// `Γ(t) = ln[1/(1 − 2γt·e^{−γt})]`.
pub fn big_gamma(t: f64, p: &DephasingParams) -> Result<f64> {
    check_time(t)?;
    let x = p.gamma * t;
    Ok(-(-2.0 * x * (-x).exp()).ln_1p())
}

/// Jump part `ρ ↦ σ_z ρ σ_z − ρ` shared by all dephasing generators.
pub fn dephasing_dissipator() -> Superoperator {
    let z = sigma(3);
    Superoperator::sandwich(&z, &z)
        .add(&Superoperator::identity(2).scale(-1.0))
        .expect("qubit dimensions")
}

/// Diagonal qubit map multiplying both coherences by `factor`.
pub fn coherence_scaling_map(factor: f64) -> Superoperator {
    let mut m = CMatrix::identity(4, 4);
    m[(1, 1)] = c(factor);
    m[(2, 2)] = c(factor);
    Superoperator::from_matrix(2, m).expect("qubit dimensions")
}

/// Solution map `Λ_t` of the dephasing master equation.
pub fn dephasing_map(t: f64, p: &DephasingParams) -> Result<Superoperator> {
    Ok(coherence_scaling_map(coherence_factor(t, p)?))
}

/// Local generator `½γ(t)(σ_zρσ_z − ρ)`.
pub fn local_generator(t: f64, p: &DephasingParams) -> Result<Superoperator> {
    Ok(dephasing_dissipator().scale(0.5 * rate_gamma(t, p)?))
}

/// `k(t) = 2γ[δ(t) − γ sin(γt)]`.
pub fn kernel(p: &DephasingParams) -> KernelSpec {
    let g = p.gamma;
    KernelSpec::new(2.0 * g, move |t: f64| -2.0 * g * g * (g * t).sin())
}

/// Laplace transform of the kernel, `2γz²/(z² + γ²)`.
pub fn kernel_laplace(z: f64, p: &DephasingParams) -> f64 {
    let g = p.gamma;
    2.0 * g * z * z / (z * z + g * g)
}

fn ln_factorial(m: u32) -> f64 {
    (2..=m).map(|k| (k as f64).ln()).sum()
}

/// Erlang density of the time of the n-th collision.
fn erlang_density(t: f64, gamma: f64, n: u32, ln_norm: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let x = gamma * t;
    gamma * (-x + (n as f64 - 1.0) * x.ln() - ln_norm).exp()
}

/// `c_n(t) = e^{−2γt} + ∫₀ᵗ (1 − e^{−2γ(t−t₁)}) Erl_n(t₁) dt₁`, the inner
/// integral of the double-integral form already carried out.
pub fn coherence_cn(t: f64, p: &RecoherenceParams) -> Result<f64> {
    check_time(t)?;
    let (g, n) = (p.gamma, p.n);
    let ln_norm = ln_factorial(n - 1);
    let tail = quadrature(
        |t1| -(-2.0 * g * (t - t1)).exp_m1() * erlang_density(t1, g, n, ln_norm),
        0.0,
        t,
        CN_QUAD_TOL,
    )?;
    Ok((-2.0 * g * t).exp() + tail)
}

/// Time derivative of [`coherence_cn`].
pub fn coherence_cn_derivative(t: f64, p: &RecoherenceParams) -> Result<f64> {
    check_time(t)?;
    let (g, n) = (p.gamma, p.n);
    let ln_norm = ln_factorial(n - 1);
    let tail = quadrature(
        |t1| 2.0 * g * (-2.0 * g * (t - t1)).exp() * erlang_density(t1, g, n, ln_norm),
        0.0,
        t,
        CN_QUAD_TOL,
    )?;
    Ok(-2.0 * g * (-2.0 * g * t).exp() + tail)
}

/// Laplace-domain coherence for an arbitrary waiting-time transform `w_z`:
/// `c_n(z) = [(1 − w_z)/z]·(1 − w_zⁿ)/(1 + w_z) + w_zⁿ/z`.
pub fn coherence_cn_laplace(z: Complex64, n: u32, w_z: Complex64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    let wn = w_z.powi(n as i32);
    (one - w_z) / z * (one - wn) / (one + w_z) + wn / z
}

/// Laplace transform `γ/(z + γ)` of the exponential waiting density.
pub fn exponential_waiting_laplace(z: Complex64, gamma: f64) -> Complex64 {
    Complex64::new(gamma, 0.0) / (z + gamma)
}

/// `γ(t) = (d/dt) ln[1/c_n(t)] = −c_n′(t)/c_n(t)`.
pub fn rate_from_cn(t: f64, p: &RecoherenceParams) -> Result<f64> {
    let value = coherence_cn(t, p)?;
    if value <= 0.0 {
        return Err(Error::RateUndefined { t, value });
    }
    Ok(-coherence_cn_derivative(t, p)? / value)
}
