//! Random-unitary (Pauli) qubit channels `ρ ↦ Σ_α p_α(t) σ_α ρ σ_α`.
//!
//! The channel is diagonal in the Pauli basis with eigenvalues
//! `λ = H·p`, where `H` is the 4×4 Hadamard matrix. Time-local rates follow
//! as `γ_α = ½ Σ_β H_αβ (d/dt) ln λ_β` and Laplace-domain memory kernels as
//! `k_α = ½ Σ_β H_αβ μ_β` with `μ_β = (zλ_β − 1)/λ_β`.

use std::cell::RefCell;

use crate::error::{invalid, Error, Result};
use crate::linops::{c, sigma, CMatrix, DensityMatrix, Superoperator};
use crate::numerics::{
    forward_derivative, numeric_derivative, quadrature, DEFAULT_DERIVATIVE_STEP, DEFAULT_HORIZON,
};

/// Rows of the Hadamard matrix used throughout this module.
pub const HADAMARD: [[i32; 4]; 4] = [[1, 1, 1, 1], [1, 1, -1, -1], [1, -1, 1, -1], [1, -1, -1, 1]];

/// Threshold for the sufficient-condition checks.
pub const CONDITION_TOL: f64 = 1e-8;
pub const LIMIT_TOL: f64 = 1e-6;

/// `H·v`.
pub fn hadamard_apply(v: &[f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (a, row) in HADAMARD.iter().enumerate() {
        out[a] = row.iter().zip(v).map(|(&h, x)| h as f64 * x).sum();
    }
    out
}

/// Integer product `H·H`.
pub fn hadamard_squared() -> [[i32; 4]; 4] {
    let mut out = [[0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| HADAMARD[i][k] * HADAMARD[k][j]).sum();
        }
    }
    out
}

/// Weights of the Pauli conjugations, `p_0` for the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityVector(pub [f64; 4]);

impl ProbabilityVector {
    pub fn new(p: [f64; 4]) -> Result<Self> {
        if p.iter()
            .any(|x| !x.is_finite() || *x < -1e-12 || *x > 1.0 + 1e-12)
        {
            return invalid(format!("probabilities out of range: {p:?}"));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return invalid(format!("probabilities sum to {total}"));
        }
        Ok(Self(p))
    }

    /// Pauli-basis eigenvalues `λ = H·p` of the channel.
    pub fn eigenvalues(&self) -> [f64; 4] {
        hadamard_apply(&self.0)
    }
}

/// Rates of the canonical master equation. `gamma0 = −(γ₁ + γ₂ + γ₃)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateVector {
    pub gamma0: f64,
    pub rates: [f64; 3],
}

impl RateVector {
    pub fn zero() -> Self {
        Self {
            gamma0: 0.0,
            rates: [0.0; 3],
        }
    }

    pub fn from_rates(rates: [f64; 3]) -> Self {
        Self {
            gamma0: -rates.iter().sum::<f64>(),
            rates,
        }
    }

    /// Generator `½ Σ_k γ_k (σ_k ρ σ_k − ρ)`.
    pub fn generator(&self) -> Superoperator {
        let mut g = Superoperator::zero(2);
        for k in 0..3 {
            let s = sigma(k + 1);
            let term = Superoperator::sandwich(&s, &s)
                .add(&Superoperator::identity(2).scale(-1.0))
                .unwrap()
                .scale(0.5 * self.rates[k]);
            g = g.add(&term).unwrap();
        }
        g
    }
}

/// A time-dependent family of Pauli-channel weights.
pub trait ProbabilityFamily: Sync {
    fn probs(&self, t: f64) -> [f64; 4];

    /// Analytic time derivative, when available.
    fn derivative(&self, _t: f64) -> Option<[f64; 4]> {
        None
    }

    /// Characteristic time used to scale finite-difference steps.
    fn time_scale(&self) -> f64 {
        1.0
    }

    /// Pauli-basis eigenvalues `H·p(t)`. Families override this when a
    /// closed form avoids cancellation at late times.
    fn eigenvalues(&self, t: f64) -> [f64; 4] {
        hadamard_apply(&self.probs(t))
    }

    fn eigenvalue_derivatives(&self, t: f64) -> Option<[f64; 4]> {
        self.derivative(t).map(|dp| hadamard_apply(&dp))
    }
}

/// Eigenvalues of the mixture `(1 − r)·chain + r·σ_x semigroup` and their
/// derivatives.
fn mixture_eigenvalues(r: f64, gamma: f64, t: f64) -> ([f64; 4], [f64; 4]) {
    let (s, e) = se(gamma, t);
    let dse = gamma * e * (1.0 - s);
    let de = -gamma * e;
    let q = 1.0 - r;
    (
        [
            1.0,
            1.0 - 2.0 * q * s * e,
            q * (1.0 - 2.0 * s * e) + r * e,
            q + r * e,
        ],
        [0.0, -2.0 * q * dse, -2.0 * q * dse + r * de, r * de],
    )
}

/// `(s, e^{−s})` with `s = γt`.
fn se(gamma: f64, t: f64) -> (f64, f64) {
    let s = gamma * t;
    (s, (-s).exp())
}

/// The example family `p₀ = ¾ + ¼e^{−γt}(1 − 2γt)`, `p₁ = ¼(1 − e^{−γt})`,
/// `p₂ = 0`, `p₃ = ½γt e^{−γt}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExampleFamily {
    pub gamma: f64,
}

impl ProbabilityFamily for ExampleFamily {
    fn probs(&self, t: f64) -> [f64; 4] {
        let (s, e) = se(self.gamma, t);
        [
            0.75 + 0.25 * e * (1.0 - 2.0 * s),
            0.25 * (1.0 - e),
            0.0,
            0.5 * s * e,
        ]
    }

    fn derivative(&self, t: f64) -> Option<[f64; 4]> {
        let (s, e) = se(self.gamma, t);
        let g = self.gamma;
        Some([
            -0.25 * g * e * (3.0 - 2.0 * s),
            0.25 * g * e,
            0.0,
            0.5 * g * e * (1.0 - s),
        ])
    }

    fn eigenvalues(&self, t: f64) -> [f64; 4] {
        mixture_eigenvalues(0.5, self.gamma, t).0
    }

    fn eigenvalue_derivatives(&self, t: f64) -> Option<[f64; 4]> {
        Some(mixture_eigenvalues(0.5, self.gamma, t).1)
    }

    fn time_scale(&self) -> f64 {
        1.0 / self.gamma
    }
}

/// Weights of the three-state collisional chain: `p₀ = 1 − γt e^{−γt}`,
/// `p₃ = γt e^{−γt}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DephasingChainFamily {
    pub gamma: f64,
}

impl ProbabilityFamily for DephasingChainFamily {
    fn probs(&self, t: f64) -> [f64; 4] {
        let (s, e) = se(self.gamma, t);
        [1.0 - s * e, 0.0, 0.0, s * e]
    }

    fn derivative(&self, t: f64) -> Option<[f64; 4]> {
        let (s, e) = se(self.gamma, t);
        let d = self.gamma * e * (1.0 - s);
        Some([-d, 0.0, 0.0, d])
    }

    fn eigenvalues(&self, t: f64) -> [f64; 4] {
        mixture_eigenvalues(0.0, self.gamma, t).0
    }

    fn eigenvalue_derivatives(&self, t: f64) -> Option<[f64; 4]> {
        Some(mixture_eigenvalues(0.0, self.gamma, t).1)
    }

    fn time_scale(&self) -> f64 {
        1.0 / self.gamma
    }
}

/// Weights of the Markovian σ_x dephasing semigroup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovXFamily {
    pub gamma: f64,
}

impl ProbabilityFamily for MarkovXFamily {
    fn probs(&self, t: f64) -> [f64; 4] {
        let (_, e) = se(self.gamma, t);
        [0.5 * (1.0 + e), 0.5 * (1.0 - e), 0.0, 0.0]
    }

    fn derivative(&self, t: f64) -> Option<[f64; 4]> {
        let (_, e) = se(self.gamma, t);
        Some([-0.5 * self.gamma * e, 0.5 * self.gamma * e, 0.0, 0.0])
    }

    fn eigenvalues(&self, t: f64) -> [f64; 4] {
        mixture_eigenvalues(1.0, self.gamma, t).0
    }

    fn eigenvalue_derivatives(&self, t: f64) -> Option<[f64; 4]> {
        Some(mixture_eigenvalues(1.0, self.gamma, t).1)
    }

    fn time_scale(&self) -> f64 {
        1.0 / self.gamma
    }
}

/// Time-independent weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantFamily(pub [f64; 4]);

impl ProbabilityFamily for ConstantFamily {
    fn probs(&self, _t: f64) -> [f64; 4] {
        self.0
    }

    fn derivative(&self, _t: f64) -> Option<[f64; 4]> {
        Some([0.0; 4])
    }
}

/// Weight `r` of the Markovian σ_x branch in the convex mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureParams {
    r: f64,
    gamma: f64,
}

impl MixtureParams {
    pub fn new(r: f64, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r) {
            return invalid(format!("mixture weight must lie in [0, 1], got {r}"));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return invalid(format!("gamma must be positive, got {gamma}"));
        }
        Ok(Self { r, gamma })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// `(1 − r)·chain + r·σ_x semigroup`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureFamily {
    pub params: MixtureParams,
}

impl ProbabilityFamily for MixtureFamily {
    fn probs(&self, t: f64) -> [f64; 4] {
        let g = self.params.gamma;
        let r = self.params.r;
        let a = DephasingChainFamily { gamma: g }.probs(t);
        let b = MarkovXFamily { gamma: g }.probs(t);
        std::array::from_fn(|k| (1.0 - r) * a[k] + r * b[k])
    }

    fn derivative(&self, t: f64) -> Option<[f64; 4]> {
        let g = self.params.gamma;
        let r = self.params.r;
        let a = DephasingChainFamily { gamma: g }.derivative(t)?;
        let b = MarkovXFamily { gamma: g }.derivative(t)?;
        Some(std::array::from_fn(|k| (1.0 - r) * a[k] + r * b[k]))
    }

    fn eigenvalues(&self, t: f64) -> [f64; 4] {
        mixture_eigenvalues(self.params.r, self.params.gamma, t).0
    }

    fn eigenvalue_derivatives(&self, t: f64) -> Option<[f64; 4]> {
        Some(mixture_eigenvalues(self.params.r, self.params.gamma, t).1)
    }

    fn time_scale(&self) -> f64 {
        1.0 / self.params.gamma
    }
}

pub fn example_probs(t: f64, gamma: f64) -> Result<ProbabilityVector> {
    if !(t >= 0.0) {
        return invalid("time must be non-negative");
    }
    ProbabilityVector::new(ExampleFamily { gamma }.probs(t))
}

pub fn mixture_probs(t: f64, params: &MixtureParams) -> Result<ProbabilityVector> {
    if !(t >= 0.0) {
        return invalid("time must be non-negative");
    }
    ProbabilityVector::new(MixtureFamily { params: *params }.probs(t))
}

/// Rates `γ_α(t) = ½ Σ_β H_αβ (d/dt) ln λ_β(t)` with `λ = H·p`.
pub fn rates_from_probs<F: ProbabilityFamily + ?Sized>(family: &F, t: f64) -> Result<RateVector> {
    let lambda = family.eigenvalues(t);
    for (index, &value) in lambda.iter().enumerate() {
        if !(value > 0.0) {
            return Err(Error::LogSingularity { t, index, value });
        }
    }
    let dlambda = match family.eigenvalue_derivatives(t) {
        Some(d) => d,
        None => {
            let h = DEFAULT_DERIVATIVE_STEP * family.time_scale();
            std::array::from_fn(|b| {
                let f = |s: f64| family.eigenvalues(s)[b];
                if t < h {
                    forward_derivative(f, t, h)
                } else {
                    numeric_derivative(f, t, h)
                }
            })
        }
    };
    let dlog: [f64; 4] = std::array::from_fn(|b| dlambda[b] / lambda[b]);
    let all: [f64; 4] = hadamard_apply(&dlog).map(|x| 0.5 * x);
    Ok(RateVector {
        gamma0: all[0],
        rates: [all[1], all[2], all[3]],
    })
}

/// `g_a(t) = (1 − γt)/(e^{γt} − γt)`.
pub fn g_a(t: f64, gamma: f64) -> f64 {
    let s = gamma * t;
    (1.0 - s) / (s.exp() - s)
}

/// `g_b(t) = (3 − 2γt)/(1 + e^{γt} − 2γt)`.
pub fn g_b(t: f64, gamma: f64) -> f64 {
    let s = gamma * t;
    (3.0 - 2.0 * s) / (1.0 + s.exp() - 2.0 * s)
}

/// `g_c(t) = 1/(1 + e^{γt})`.
pub fn g_c(t: f64, gamma: f64) -> f64 {
    1.0 / (1.0 + (gamma * t).exp())
}

/// Closed-form rates of the example family.
pub fn example_rates(t: f64, gamma: f64) -> Result<RateVector> {
    if !(t >= 0.0) {
        return invalid("time must be non-negative");
    }
    let (a, b, cc) = (g_a(t, gamma), g_b(t, gamma), g_c(t, gamma));
    Ok(RateVector::from_rates([
        0.5 * gamma * (-a + b + cc),
        0.5 * gamma * (a - b + cc),
        0.5 * gamma * (a + b - cc),
    ]))
}

/// `g_a(r, t) = 2(1 − r)(1 − γt)/(e^{γt} − 2(1 − r)γt)`, equal to
/// `(γ₂ + γ₃)/γ` for the mixture.
pub fn mixture_ga(t: f64, r: f64, gamma: f64) -> f64 {
    let s = gamma * t;
    2.0 * (1.0 - r) * (1.0 - s) / (s.exp() - 2.0 * (1.0 - r) * s)
}

/// A time-dependent rate family.
pub trait RateFamily: Sync {
    fn rates(&self, t: f64) -> Result<RateVector>;
}

/// The closed-form example rates.
#[derive(Debug, Clone, Copy)]
pub struct ExampleRates {
    pub gamma: f64,
}

impl RateFamily for ExampleRates {
    fn rates(&self, t: f64) -> Result<RateVector> {
        example_rates(t, self.gamma)
    }
}

/// Rates recovered from a probability family.
#[derive(Debug, Clone, Copy)]
pub struct RatesOf<F>(pub F);

impl<F: ProbabilityFamily> RateFamily for RatesOf<F> {
    fn rates(&self, t: f64) -> Result<RateVector> {
        rates_from_probs(&self.0, t)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ZeroRates;

impl RateFamily for ZeroRates {
    fn rates(&self, _t: f64) -> Result<RateVector> {
        Ok(RateVector::zero())
    }
}

const RATE_QUAD_TOL: f64 = 1e-10;

/// `Γ_k(horizon) = ∫₀^horizon γ_k(τ) dτ` for k = 1, 2, 3.
pub fn gamma_integrals<R: RateFamily + ?Sized>(rates: &R, horizon: f64) -> Result<[f64; 3]> {
    if !(horizon > 0.0) {
        return invalid("horizon must be positive");
    }
    let mut out = [0.0; 3];
    for (k, slot) in out.iter_mut().enumerate() {
        let failure = RefCell::new(None);
        let value = quadrature(
            |t| match rates.rates(t) {
                Ok(r) => r.rates[k],
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            },
            0.0,
            horizon,
            RATE_QUAD_TOL,
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        *slot = value?;
    }
    Ok(out)
}

/// Asymptotic integrals of the closed-form example rates; `horizon` must be
/// at least `40/γ`.
pub fn example_gamma_integrals(gamma: f64, horizon: f64) -> Result<[f64; 3]> {
    if horizon < DEFAULT_HORIZON / gamma {
        return invalid(format!(
            "horizon must be at least {}/gamma",
            DEFAULT_HORIZON
        ));
    }
    gamma_integrals(&ExampleRates { gamma }, horizon)
}

/// `Σ_α p_α σ_α ρ σ_α` as a superoperator.
pub fn random_unitary_map(p: &ProbabilityVector) -> Superoperator {
    let mut m = CMatrix::zeros(4, 4);
    for (a, &w) in p.0.iter().enumerate() {
        let s = sigma(a);
        m += Superoperator::sandwich(&s, &s).matrix() * c(w);
    }
    Superoperator::from_matrix(2, m).expect("qubit dimensions")
}

/// Generator `½γ(σ_x ρ σ_x − ρ)` of the Markovian σ_x channel.
pub fn markov_x_generator(gamma: f64) -> Superoperator {
    RateVector::from_rates([gamma, 0.0, 0.0]).generator()
}

/// `½[(1 + e^{−γt})ρ₀ + (1 − e^{−γt})σ_x ρ₀ σ_x]`.
pub fn markov_x_solution(t: f64, gamma: f64, rho0: &DensityMatrix) -> Result<DensityMatrix> {
    if !(t >= 0.0) {
        return invalid("time must be non-negative");
    }
    let e = (-gamma * t).exp();
    let x = sigma(1);
    let r = rho0.matrix();
    DensityMatrix::new((r * c(1.0 + e) + &x * r * &x * c(1.0 - e)) * c(0.5))
}

/// Laplace transforms of the three-state chain weights.
pub fn dephasing_probs_laplace(z: f64, gamma: f64) -> [f64; 4] {
    let p3 = gamma / ((z + gamma) * (z + gamma));
    [1.0 / z - p3, 0.0, 0.0, p3]
}

/// Laplace transforms of the example family weights.
pub fn example_probs_laplace(z: f64, gamma: f64) -> [f64; 4] {
    let e = 1.0 / (z + gamma);
    let se = gamma * e * e;
    [
        0.75 / z + 0.25 * e - 0.5 * se,
        0.25 * (1.0 / z - e),
        0.0,
        0.5 * se,
    ]
}

/// Memory functions in the Laplace domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryKernels {
    /// `k_0 … k_3`.
    pub k: [f64; 4],
    /// `μ_0 … μ_3`; `μ_0` vanishes for normalized weights.
    pub mu: [f64; 4],
}

impl MemoryKernels {
    pub fn sum(&self) -> f64 {
        self.k.iter().sum()
    }
}

/// `k_α(z) = ½ Σ_β H_αβ μ_β(z)` with `μ_β = (zλ_β − 1)/λ_β`, `λ = H·p(z)`.
pub fn memory_kernels_laplace(p_z: &[f64; 4], z: f64) -> Result<MemoryKernels> {
    if !(z > 0.0) {
        return invalid("Laplace variable must be positive");
    }
    let lambda = hadamard_apply(p_z);
    let scale = p_z.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let mut mu = [0.0; 4];
    for (index, &l) in lambda.iter().enumerate() {
        if l.abs() <= 1e-14 * scale {
            return Err(Error::KernelPole { z, index });
        }
        mu[index] = (z * l - 1.0) / l;
    }
    let k = hadamard_apply(&mu).map(|x| 0.5 * x);
    Ok(MemoryKernels { k, mu })
}

/// Outcome of the sufficient conditions for maximal non-Markovianity of a
/// random-unitary evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxNonMarkovVerdict {
    /// Most negative `γ₂ + γ₃` found and where.
    pub min_rate_sum: f64,
    pub min_rate_sum_at: f64,
    pub negative_rate_sum: bool,
    pub gamma_limits: [f64; 3],
    pub gamma1_non_negative: bool,
    pub gamma23_vanish: bool,
    pub maximal: bool,
}

/// Checks (a) `γ₂(t) + γ₃(t) < 0` somewhere, (b) `Γ₁(∞) ≥ 0` and
/// (c) `Γ₂(∞) = Γ₃(∞) = 0`, with integrals truncated at `horizon`.
pub fn check_max_nonmarkov_conditions<R: RateFamily + ?Sized>(
    rates: &R,
    horizon: f64,
) -> Result<MaxNonMarkovVerdict> {
    const SCAN: usize = 4000;
    let mut min_sum = f64::INFINITY;
    let mut at = 0.0;
    for k in 0..=SCAN {
        let t = horizon * k as f64 / SCAN as f64;
        let r = rates.rates(t)?;
        let s = r.rates[1] + r.rates[2];
        if s < min_sum {
            min_sum = s;
            at = t;
        }
    }
    let limits = gamma_integrals(rates, horizon)?;
    let negative = min_sum < -CONDITION_TOL;
    let g1 = limits[0] >= -CONDITION_TOL;
    let g23 = limits[1].abs() <= LIMIT_TOL && limits[2].abs() <= LIMIT_TOL;
    Ok(MaxNonMarkovVerdict {
        min_rate_sum: min_sum,
        min_rate_sum_at: at,
        negative_rate_sum: negative,
        gamma_limits: limits,
        gamma1_non_negative: g1,
        gamma23_vanish: g23,
        maximal: negative && g1 && g23,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dephasing::{rate_gamma, DephasingParams};
    use crate::linops::{choi_of, max_abs_diff};
    use crate::numerics::{integrate_linear, TimeGrid};
    use approx::assert_abs_diff_eq;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn hadamard_involution() {
        let sq = hadamard_squared();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(sq[i][j], if i == j { 4 } else { 0 });
            }
        }
    }

    #[test]
    fn example_probability_examples() {
        assert_eq!(example_probs(0.0, 1.0).unwrap().0, [1.0, 0.0, 0.0, 0.0]);
        let inf = example_probs(40.0, 1.0).unwrap().0;
        for (a, b) in inf.iter().zip([0.75, 0.25, 0.0, 0.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        for k in 0..=4000 {
            let p = example_probs(0.01 * k as f64, 1.0).unwrap().0;
            assert!(p.iter().all(|x| (0.0..=1.0).contains(x)));
            assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
        assert!(ProbabilityVector::new([0.5, 0.6, 0.0, -0.1]).is_err());
    }

    #[test]
    fn recovered_rates_match_closed_form() {
        let fam = ExampleFamily { gamma: 1.0 };
        for k in 0..=1000 {
            let t = 0.01 * k as f64;
            let from_p = rates_from_probs(&fam, t).unwrap();
            let closed = example_rates(t, 1.0).unwrap();
            for j in 0..3 {
                assert_abs_diff_eq!(from_p.rates[j], closed.rates[j], epsilon = 1e-6);
            }
            assert_abs_diff_eq!(
                from_p.gamma0,
                -from_p.rates.iter().sum::<f64>(),
                epsilon = 1e-10
            );
        }
    }

    /// Probability family without analytic derivatives, to exercise the
    /// finite-difference path.
    struct Numeric(ExampleFamily);
    impl ProbabilityFamily for Numeric {
        fn probs(&self, t: f64) -> [f64; 4] {
            self.0.probs(t)
        }
    }

    #[test]
    fn finite_difference_rates_match_closed_form() {
        let fam = Numeric(ExampleFamily { gamma: 1.0 });
        for t in [0.0, 0.3, 1.0, 2.5, 7.0] {
            let from_p = rates_from_probs(&fam, t).unwrap();
            let closed = example_rates(t, 1.0).unwrap();
            for j in 0..3 {
                assert_abs_diff_eq!(from_p.rates[j], closed.rates[j], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn chain_probabilities_give_the_dephasing_rate() {
        let fam = DephasingChainFamily { gamma: 1.0 };
        let p = DephasingParams::new(1.0).unwrap();
        for t in [0.0, 0.5, 1.0, 3.0] {
            let r = rates_from_probs(&fam, t).unwrap();
            assert_abs_diff_eq!(r.rates[0], 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(r.rates[1], 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(r.rates[2], rate_gamma(t, &p).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn closed_form_eigenvalues_agree_with_hadamard() {
        let fams: Vec<Box<dyn ProbabilityFamily>> = vec![
            Box::new(ExampleFamily { gamma: 1.3 }),
            Box::new(DephasingChainFamily { gamma: 0.7 }),
            Box::new(MarkovXFamily { gamma: 2.0 }),
            Box::new(MixtureFamily {
                params: MixtureParams::new(0.3, 1.0).unwrap(),
            }),
        ];
        for f in &fams {
            for t in [0.0, 0.2, 1.0, 4.0] {
                let a = f.eigenvalues(t);
                let b = hadamard_apply(&f.probs(t));
                let da = f.eigenvalue_derivatives(t).unwrap();
                let db = hadamard_apply(&f.derivative(t).unwrap());
                for k in 0..4 {
                    assert_abs_diff_eq!(a[k], b[k], epsilon = 1e-14);
                    assert_abs_diff_eq!(da[k], db[k], epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn constant_probabilities_have_zero_rates() {
        let r = rates_from_probs(&ConstantFamily([1.0, 0.0, 0.0, 0.0]), 0.7).unwrap();
        assert_eq!(r.rates, [0.0; 3]);
    }

    #[test]
    fn singular_eigenvalue_is_reported() {
        let fam = ConstantFamily([0.5, 0.5, 0.0, 0.0]);
        assert!(matches!(
            rates_from_probs(&fam, 1.0),
            Err(Error::LogSingularity { index: 2, .. })
        ));
    }

    #[test]
    fn example_rate_examples() {
        let r = example_rates(0.0, 1.0).unwrap();
        assert_abs_diff_eq!(r.rates[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.rates[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.rates[2], 1.0, epsilon = 1e-15);
        for k in 0..=200 {
            let t = 0.05 * k as f64;
            let r = example_rates(t, 1.0).unwrap();
            assert_abs_diff_eq!(r.rates[1] + r.rates[2], g_a(t, 1.0), epsilon = 1e-14);
            if t > 1.0 {
                assert!(r.rates[1] + r.rates[2] < 0.0);
            }
        }
        let late = example_rates(40.0, 1.0).unwrap();
        assert!(late.rates.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn asymptotic_integrals() {
        let g = example_gamma_integrals(1.0, 40.0).unwrap();
        assert_abs_diff_eq!(g[0], LN2, epsilon = 1e-6);
        assert!(g[1].abs() <= 1e-6);
        assert!(g[2].abs() <= 1e-6);
        assert!(example_gamma_integrals(1.0, 10.0).is_err());

        let mix = RatesOf(MixtureFamily {
            params: MixtureParams::new(0.5, 1.0).unwrap(),
        });
        let gm = gamma_integrals(&mix, 40.0).unwrap();
        assert_abs_diff_eq!(gm[0], LN2, epsilon = 1e-6);
        let mix3 = RatesOf(MixtureFamily {
            params: MixtureParams::new(0.75, 1.0).unwrap(),
        });
        let g3 = gamma_integrals(&mix3, 40.0).unwrap();
        assert_abs_diff_eq!(g3[0], (1.0f64 / 0.25).ln(), epsilon = 1e-6);
    }

    #[test]
    fn map_examples() {
        let id = random_unitary_map(&ProbabilityVector::new([1.0, 0.0, 0.0, 0.0]).unwrap());
        assert!(id.max_abs_diff(&Superoperator::identity(2)) < 1e-15);

        let p = example_probs(40.0, 1.0).unwrap();
        let m = random_unitary_map(&p);
        for (a, expected) in [(1, 1.0), (2, 0.5), (3, 0.5)] {
            let s = sigma(a);
            assert!(max_abs_diff(&m.apply(&s), &(&s * c(expected))) < 1e-12);
            assert_abs_diff_eq!(p.eigenvalues()[a], expected, epsilon = 1e-12);
        }

        for k in 0..=400 {
            let m = random_unitary_map(&example_probs(0.1 * k as f64, 1.0).unwrap());
            assert!(choi_of(&m).is_psd());
            assert!(m.is_trace_preserving(1e-12));
        }
    }

    #[test]
    fn pauli_eigenvalues_of_the_map() {
        let p = example_probs(1.3, 1.0).unwrap();
        let m = random_unitary_map(&p);
        let lam = p.eigenvalues();
        for a in 0..4 {
            let s = sigma(a);
            assert!(max_abs_diff(&m.apply(&s), &(&s * c(lam[a]))) < 1e-14);
        }
    }

    #[test]
    fn markov_x_examples() {
        let rho0 = DensityMatrix::from_bloch(0.1, 0.4, 0.7).unwrap();
        let at0 = markov_x_solution(0.0, 1.0, &rho0).unwrap();
        assert!(max_abs_diff(at0.matrix(), rho0.matrix()) < 1e-15);
        let x = sigma(1);
        let limit = (rho0.matrix() + &x * rho0.matrix() * &x) * c(0.5);
        let late = markov_x_solution(40.0, 1.0, &rho0).unwrap();
        assert!(max_abs_diff(late.matrix(), &limit) < 1e-12);

        let h = 1e-6;
        let d = (markov_x_solution(h, 1.0, &rho0).unwrap().into_matrix() - rho0.matrix()) / c(h);
        let gen = markov_x_generator(1.0).apply(rho0.matrix());
        assert!(max_abs_diff(&d, &gen) <= 1e-6);
        let d2 = (markov_x_solution(2.0 * h, 1.0, &rho0)
            .unwrap()
            .into_matrix()
            * c(-1.0)
            + markov_x_solution(h, 1.0, &rho0).unwrap().into_matrix() * c(4.0)
            - rho0.matrix() * c(3.0))
            / c(2.0 * h);
        assert!(max_abs_diff(&d2, &gen) <= 1e-8);
    }

    #[test]
    fn mixture_examples() {
        for k in 0..=100 {
            let t = 0.1 * k as f64;
            let m = mixture_probs(t, &MixtureParams::new(0.5, 1.0).unwrap())
                .unwrap()
                .0;
            let e = example_probs(t, 1.0).unwrap().0;
            for j in 0..4 {
                assert_abs_diff_eq!(m[j], e[j], epsilon = 1e-12);
            }
            let p0 = mixture_probs(t, &MixtureParams::new(0.0, 1.0).unwrap())
                .unwrap()
                .0;
            assert_eq!((p0[1], p0[2]), (0.0, 0.0));
            let p1 = mixture_probs(t, &MixtureParams::new(1.0, 1.0).unwrap())
                .unwrap()
                .0;
            assert_eq!((p1[2], p1[3]), (0.0, 0.0));
        }
        assert!(MixtureParams::new(1.2, 1.0).is_err());
        assert!(MixtureParams::new(-0.1, 1.0).is_err());
    }

    #[test]
    fn mixture_map_is_convex_combination() {
        for r in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let params = MixtureParams::new(r, 1.0).unwrap();
            for t in [0.0, 0.4, 1.0, 3.3] {
                let mixed = random_unitary_map(&mixture_probs(t, &params).unwrap());
                let chain = random_unitary_map(
                    &ProbabilityVector::new(DephasingChainFamily { gamma: 1.0 }.probs(t)).unwrap(),
                );
                let x = random_unitary_map(
                    &ProbabilityVector::new(MarkovXFamily { gamma: 1.0 }.probs(t)).unwrap(),
                );
                let combo = chain.scale(1.0 - r).add(&x.scale(r)).unwrap();
                assert!(mixed.max_abs_diff(&combo) <= 1e-12);
                assert!(choi_of(&mixed).is_psd());
            }
        }
    }

    #[test]
    fn mixture_ga_examples() {
        for k in 0..=100 {
            let t = 0.1 * k as f64;
            assert_eq!(mixture_ga(t, 1.0, 1.0), 0.0);
            let p = DephasingParams::new(1.0).unwrap();
            assert_abs_diff_eq!(
                mixture_ga(t, 0.0, 1.0),
                rate_gamma(t, &p).unwrap(),
                epsilon = 1e-14
            );
            let half = mixture_ga(t, 0.5, 1.0);
            if t < 1.0 {
                assert!(half > 0.0);
            } else if t > 1.0 {
                assert!(half < 0.0);
            }
            let rates = rates_from_probs(
                &MixtureFamily {
                    params: MixtureParams::new(0.3, 1.0).unwrap(),
                },
                t,
            )
            .unwrap();
            assert_abs_diff_eq!(
                rates.rates[1] + rates.rates[2],
                mixture_ga(t, 0.3, 1.0),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn kernels_of_the_dephasing_chain() {
        let g = 1.0;
        for j in 1..=20 {
            let z = 0.25 * j as f64;
            let k = memory_kernels_laplace(&dephasing_probs_laplace(z, g), z).unwrap();
            assert!(k.k[1].abs() < 1e-12 && k.k[2].abs() < 1e-12);
            let expected = 2.0 * z * z * g / (z * z + g * g);
            assert!(((k.k[3] - expected) / expected).abs() <= 1e-10);
            assert!(k.sum().abs() < 1e-10);
            assert!(k.mu[0].abs() < 1e-12);
        }
    }

    #[test]
    fn kernels_of_identity_dynamics_vanish() {
        let z = 0.8;
        let k = memory_kernels_laplace(&[1.0 / z, 0.0, 0.0, 0.0], z).unwrap();
        assert!(k.k.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn kernel_pole_reported() {
        let z = 1.0;
        let p = [0.5 / z, 0.5 / z, 0.0, 0.0];
        assert!(matches!(
            memory_kernels_laplace(&p, z),
            Err(Error::KernelPole { .. })
        ));
    }

    #[test]
    fn example_kernels_match_numeric_laplace_transform() {
        let g = 1.0;
        let z = g;
        let fam = ExampleFamily { gamma: g };
        let numeric: [f64; 4] = std::array::from_fn(|a| {
            quadrature(|t| (-z * t).exp() * fam.probs(t)[a], 0.0, 60.0, 1e-14).unwrap()
        });
        let from_numeric = memory_kernels_laplace(&numeric, z).unwrap();
        let analytic = memory_kernels_laplace(&example_probs_laplace(z, g), z).unwrap();
        for a in 0..4 {
            assert_abs_diff_eq!(from_numeric.k[a], analytic.k[a], epsilon = 1e-8);
        }
        assert!(analytic.sum().abs() < 1e-12);
    }

    #[test]
    fn round_trip_through_the_master_equation() {
        let fam = ExampleFamily { gamma: 1.0 };
        let grid = TimeGrid::uniform(0.0, 10.0, 101).unwrap();
        let rho0 = DensityMatrix::from_bloch(0.5, 0.3, -0.6)
            .unwrap()
            .into_matrix();
        let sol = integrate_linear(
            |t| rates_from_probs(&fam, t).unwrap().generator(),
            &rho0,
            &grid,
            1e-11,
        )
        .unwrap();
        for (t, rho) in grid.points().iter().zip(&sol) {
            let exact =
                random_unitary_map(&ProbabilityVector::new(fam.probs(*t)).unwrap()).apply(&rho0);
            assert!(max_abs_diff(rho, &exact) <= 1e-6);
        }
    }

    #[test]
    fn verdicts() {
        let v = check_max_nonmarkov_conditions(&ExampleRates { gamma: 1.0 }, 40.0).unwrap();
        assert!(v.maximal, "{v:?}");
        let markov = RatesOf(MixtureFamily {
            params: MixtureParams::new(1.0, 1.0).unwrap(),
        });
        let v1 = check_max_nonmarkov_conditions(&markov, 40.0).unwrap();
        assert!(!v1.negative_rate_sum);
        assert!(!v1.maximal);
        assert!(
            !check_max_nonmarkov_conditions(&ZeroRates, 40.0)
                .unwrap()
                .maximal
        );
        for r in [0.0, 0.25, 0.5, 0.75] {
            let fam = RatesOf(MixtureFamily {
                params: MixtureParams::new(r, 1.0).unwrap(),
            });
            let v = check_max_nonmarkov_conditions(&fam, 40.0).unwrap();
            assert!(v.maximal, "r = {r}: {v:?}");
            assert_abs_diff_eq!(v.gamma_limits[0], (1.0 / (1.0 - r)).ln(), epsilon = 1e-6);
        }
    }
}
