//! Divisibility-based non-Markovianity measures.
//!
//! For a family of maps `Λ_t` the intermediate propagator is
//! `V_{t,s} = Λ_t ∘ Λ_s⁻¹`. The family is k-divisible when every `V_{t,s}` is
//! k-positive. Memory effects are quantified through
//! `λ_k(X;t) = d/dt ‖(I_k ⊗ Λ_t)[X]‖₁`, its positive and negative lobe
//! integrals `N_k^±[X]` and the ratio `M_k = sup_X N_k⁺[X]/|N_k⁻[X]|`.

use rayon::prelude::*;

use crate::dephasing::{dephasing_map, DephasingParams};
use crate::error::{invalid, Error, Result};
use crate::linops::{
    apply_extended, c, choi_of, identity, kron, min_eigenvalue, sigma, trace_norm, CMatrix,
    HermitianOperator, Superoperator, ONE,
};
use crate::numerics::{
    forward_derivative, numeric_derivative, quadrature, DEFAULT_DERIVATIVE_STEP,
};
use crate::random_unitary::{
    random_unitary_map, ExampleFamily, MarkovXFamily, MixtureFamily, MixtureParams,
    ProbabilityFamily, ProbabilityVector,
};

/// Divisibility verdicts are negative below this value.
pub const VIOLATION_THRESHOLD: f64 = -1e-4;
/// Minimum eigenvalues above this value count as clean passes.
pub const CLEAN_THRESHOLD: f64 = -1e-8;
/// `Λ_s` with a larger condition number is flagged as singular in scans.
pub const SCAN_CONDITION_BOUND: f64 = 1e6;
/// Pure states sampled for 1-positivity checks.
pub const DEFAULT_SPHERE_POINTS: usize = 200;
/// Scan points for locating the lobes of `λ_k`.
pub const DEFAULT_LOBE_SCAN: usize = 2000;
/// Grid points per axis of the default divisibility scan.
pub const DEFAULT_SCAN_POINTS: usize = 41;
/// `|λ_k|` below this fraction of `‖X‖₁·γ` is treated as zero.
pub const LAMBDA_ZERO_TOL: f64 = 1e-8;

const LOBE_QUAD_TOL: f64 = 1e-9;

/// A time-dependent family of maps `t ↦ Λ_t` with `Λ_0 = 𝟙`.
pub trait PropagatorFamily: Sync {
    fn dim(&self) -> usize;

    fn at(&self, t: f64) -> Result<Superoperator>;

    /// False for interpolated families.
    fn is_closed_form(&self) -> bool {
        true
    }

    /// Characteristic time used to scale finite-difference steps.
    fn time_scale(&self) -> f64 {
        1.0
    }

    fn name(&self) -> String;
}

/// The σ_z dephasing family with coherence factor `e^{−Γ(t)}`.
#[derive(Debug, Clone, Copy)]
pub struct DephasingFamily {
    pub params: DephasingParams,
}

impl PropagatorFamily for DephasingFamily {
    fn dim(&self) -> usize {
        2
    }

    fn at(&self, t: f64) -> Result<Superoperator> {
        dephasing_map(t, &self.params)
    }

    fn time_scale(&self) -> f64 {
        1.0 / self.params.gamma()
    }

    fn name(&self) -> String {
        "dephasing".into()
    }
}

/// Pauli channels built from a probability family.
#[derive(Debug, Clone, Copy)]
pub struct PauliFamily<F> {
    pub probabilities: F,
    pub label: &'static str,
}

impl<F: ProbabilityFamily> PropagatorFamily for PauliFamily<F> {
    fn dim(&self) -> usize {
        2
    }

    fn at(&self, t: f64) -> Result<Superoperator> {
        if !(t >= 0.0) {
            return invalid("time must be non-negative");
        }
        Ok(random_unitary_map(&ProbabilityVector::new(
            self.probabilities.probs(t),
        )?))
    }

    fn time_scale(&self) -> f64 {
        self.probabilities.time_scale()
    }

    fn name(&self) -> String {
        self.label.into()
    }
}

pub fn example_family(gamma: f64) -> PauliFamily<ExampleFamily> {
    PauliFamily {
        probabilities: ExampleFamily { gamma },
        label: "random-unitary",
    }
}

pub fn markov_x_family(gamma: f64) -> PauliFamily<MarkovXFamily> {
    PauliFamily {
        probabilities: MarkovXFamily { gamma },
        label: "markov-x",
    }
}

pub fn mixture_family(params: MixtureParams) -> PauliFamily<MixtureFamily> {
    PauliFamily {
        probabilities: MixtureFamily { params },
        label: "mixture",
    }
}

/// `Λ_t = 𝟙` for all t.
#[derive(Debug, Clone, Copy)]
pub struct IdentityFamily {
    pub dim: usize,
}

impl PropagatorFamily for IdentityFamily {
    fn dim(&self) -> usize {
        self.dim
    }

    fn at(&self, _t: f64) -> Result<Superoperator> {
        Ok(Superoperator::identity(self.dim))
    }

    fn name(&self) -> String {
        "identity".into()
    }
}

/// Maps sampled on a grid, linearly interpolated in between.
#[derive(Debug, Clone)]
pub struct TabulatedFamily {
    times: Vec<f64>,
    maps: Vec<Superoperator>,
}

impl TabulatedFamily {
    /// Requires strictly increasing times starting at 0, `Λ_0 = 𝟙` and
    /// trace-preserving maps.
    pub fn new(times: Vec<f64>, maps: Vec<Superoperator>) -> Result<Self> {
        if times.len() != maps.len() || times.len() < 2 {
            return invalid("need at least two samples and one map per time");
        }
        if times[0] != 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("times must start at 0 and increase strictly");
        }
        let d = maps[0].dim();
        if maps.iter().any(|m| m.dim() != d) {
            return invalid("maps act on different dimensions");
        }
        if maps[0].max_abs_diff(&Superoperator::identity(d)) > 1e-10 {
            return invalid("the map at t = 0 must be the identity");
        }
        if let Some(k) = maps.iter().position(|m| !m.is_trace_preserving(1e-10)) {
            return invalid(format!("map at t = {} is not trace preserving", times[k]));
        }
        Ok(Self { times, maps })
    }
}

impl PropagatorFamily for TabulatedFamily {
    fn dim(&self) -> usize {
        self.maps[0].dim()
    }

    fn at(&self, t: f64) -> Result<Superoperator> {
        let last = *self.times.last().unwrap();
        if !(0.0..=last).contains(&t) {
            return invalid(format!("time {t} outside the tabulated range [0, {last}]"));
        }
        let k = self
            .times
            .partition_point(|&s| s <= t)
            .clamp(1, self.times.len() - 1);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        self.maps[k - 1].scale(1.0 - w).add(&self.maps[k].scale(w))
    }

    fn is_closed_form(&self) -> bool {
        false
    }

    fn time_scale(&self) -> f64 {
        let last = *self.times.last().unwrap();
        (last / (self.times.len() - 1) as f64).min(1.0)
    }

    fn name(&self) -> String {
        "tabulated".into()
    }
}

/// Families selectable by name: `dephasing`, `random-unitary`,
/// `mixture` (uses `r`), `markov-x` and `identity`.
pub fn family_by_name(name: &str, gamma: f64, r: f64) -> Result<Box<dyn PropagatorFamily>> {
    Ok(match name {
        "dephasing" => Box::new(DephasingFamily {
            params: DephasingParams::new(gamma)?,
        }),
        "random-unitary" => Box::new(example_family(gamma)),
        "mixture" => Box::new(mixture_family(MixtureParams::new(r, gamma)?)),
        "markov-x" => Box::new(markov_x_family(gamma)),
        "identity" => Box::new(IdentityFamily { dim: 2 }),
        other => return invalid(format!("unknown family '{other}'")),
    })
}

pub const FAMILY_NAMES: [&str; 5] = [
    "dephasing",
    "random-unitary",
    "mixture",
    "markov-x",
    "identity",
];

/// `V_{t,s} = Λ_t ∘ Λ_s⁻¹`.
pub fn intermediate_propagator<P: PropagatorFamily + ?Sized>(
    family: &P,
    t: f64,
    s: f64,
) -> Result<Superoperator> {
    intermediate_with_bound(family, t, s, crate::linops::DEFAULT_CONDITION_BOUND)
}

fn intermediate_with_bound<P: PropagatorFamily + ?Sized>(
    family: &P,
    t: f64,
    s: f64,
    bound: f64,
) -> Result<Superoperator> {
    if !(s >= 0.0) || !(t >= s) {
        return invalid(format!("need t ≥ s ≥ 0, got t = {t}, s = {s}"));
    }
    if s == 0.0 {
        return family.at(t);
    }
    let inv = family.at(s)?.invert_with_bound(bound)?;
    family.at(t)?.compose(&inv)
}

/// A non-Markovianity witness on the `k·d` dimensional extended space.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub label: String,
    pub op: HermitianOperator,
}

impl Witness {
    pub fn new(label: impl Into<String>, op: HermitianOperator) -> Self {
        Self {
            label: label.into(),
            op,
        }
    }

    pub fn pauli(alpha: usize) -> Self {
        let label = ["identity", "sigma_x", "sigma_y", "sigma_z"][alpha.min(3)];
        Self::new(
            label,
            HermitianOperator::new(sigma(alpha)).expect("Pauli matrices are Hermitian"),
        )
    }
}

/// `|0⟩⟨0| ⊗ X` on an ancilla of dimension `k`.
pub fn embed_witness(x: &Witness, k: usize) -> Result<Witness> {
    if k == 0 {
        return invalid("ancilla dimension must be positive");
    }
    let mut p0 = CMatrix::zeros(k, k);
    p0[(0, 0)] = ONE;
    Ok(Witness::new(
        format!("{}|0><0|", x.label),
        HermitianOperator::new(kron(&p0, x.op.matrix()))?,
    ))
}

/// Projector on `Σ_i |ii⟩/√d`.
pub fn maximally_entangled_witness(d: usize) -> Witness {
    let mut m = CMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            m[(i * d + i, j * d + j)] = c(1.0 / d as f64);
        }
    }
    Witness::new(
        "bell",
        HermitianOperator::new(m).expect("projector is Hermitian"),
    )
}

/// `{σ_x, σ_y, σ_z}` for k = 1; their `|0⟩⟨0|` embeddings plus the
/// maximally entangled projector for k = 2.
pub fn default_witnesses(k: usize) -> Result<Vec<Witness>> {
    let base: Vec<Witness> = (1..=3).map(Witness::pauli).collect();
    match k {
        1 => Ok(base),
        2 => {
            let mut out: Vec<Witness> = base
                .iter()
                .map(|w| embed_witness(w, 2))
                .collect::<Result<_>>()?;
            out.push(maximally_entangled_witness(2));
            Ok(out)
        }
        _ => invalid(format!(
            "default witnesses exist for k = 1, 2 only, got {k}"
        )),
    }
}

fn check_witness<P: PropagatorFamily + ?Sized>(
    family: &P,
    x: &HermitianOperator,
    k: usize,
) -> Result<()> {
    if k == 0 {
        return invalid("k must be positive");
    }
    if x.dim() != k * family.dim() {
        return Err(Error::DimensionMismatch {
            expected: k * family.dim(),
            found: x.dim(),
        });
    }
    Ok(())
}

/// `‖(I_k ⊗ Λ_t)[X]‖₁`.
pub fn extended_trace_norm<P: PropagatorFamily + ?Sized>(
    family: &P,
    x: &HermitianOperator,
    t: f64,
    k: usize,
) -> Result<f64> {
    let img = apply_extended(&family.at(t)?, k, x.matrix())?;
    let herm = (&img + img.adjoint()) * c(0.5);
    Ok(trace_norm(&HermitianOperator::new(herm)?))
}

/// Value of `λ_k(X;t)` and whether a one-sided difference was needed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaSample {
    pub value: f64,
    pub one_sided: bool,
}

/// `λ_k(X;t) = d/dt ‖(I_k ⊗ Λ_t)[X]‖₁` by central differences, switching to
/// a second-order forward difference within one step of t = 0.
pub fn lambda_k<P: PropagatorFamily + ?Sized>(
    family: &P,
    x: &HermitianOperator,
    t: f64,
    k: usize,
) -> Result<LambdaSample> {
    check_witness(family, x, k)?;
    if !(t >= 0.0) {
        return invalid("time must be non-negative");
    }
    let h = DEFAULT_DERIVATIVE_STEP * family.time_scale();
    let one_sided = t < h;
    let mut failure = None;
    let f = |s: f64| extended_trace_norm(family, x, s, k).unwrap_or(f64::NAN);
    let value = if one_sided {
        forward_derivative(f, t, h)
    } else {
        numeric_derivative(f, t, h)
    };
    if !value.is_finite() {
        failure = Some(
            extended_trace_norm(family, x, t, k)
                .err()
                .unwrap_or_else(|| {
                    Error::InvalidArgument(format!("derivative undefined at t = {t}"))
                }),
        );
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(LambdaSample { value, one_sided }),
    }
}

fn lambda_value<P: PropagatorFamily + ?Sized>(
    family: &P,
    x: &HermitianOperator,
    t: f64,
    k: usize,
) -> f64 {
    lambda_k(family, x, t, k)
        .map(|s| s.value)
        .unwrap_or(f64::NAN)
}

fn zero_tol<P: PropagatorFamily + ?Sized>(family: &P, x: &HermitianOperator) -> f64 {
    LAMBDA_ZERO_TOL * trace_norm(x) / family.time_scale()
}

/// Times in `(0, horizon)` where `λ_k(X;t)` changes sign between `+` and `−`,
/// bracketed on a uniform scan and refined by bisection to `t_tol`.
pub fn zero_crossings<P: PropagatorFamily + ?Sized>(
    family: &P,
    x: &HermitianOperator,
    k: usize,
    horizon: f64,
    t_tol: f64,
) -> Result<Vec<f64>> {
    check_witness(family, x, k)?;
    let tol = zero_tol(family, x);
    let n = DEFAULT_LOBE_SCAN;
    let ts: Vec<f64> = (0..=n).map(|i| horizon * i as f64 / n as f64).collect();
    let vals: Vec<f64> = ts
        .par_iter()
        .map(|&t| lambda_value(family, x, t, k))
        .collect();
    let mut out = Vec::new();
    let mut last: Option<(f64, f64)> = None;
    for (&t, &v) in ts.iter().zip(&vals) {
        if !v.is_finite() {
            return Err(lambda_k(family, x, t, k).err().unwrap());
        }
        if v.abs() <= tol {
            continue;
        }
        if let Some((tp, vp)) = last {
            if vp.signum() != v.signum() {
                let (mut a, mut b) = (tp, t);
                while b - a > t_tol {
                    let m = 0.5 * (a + b);
                    if lambda_value(family, x, m, k).signum() == vp.signum() {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                out.push(0.5 * (a + b));
            }
        }
        last = Some((t, v));
    }
    Ok(out)
}

/// `(N⁺, |N⁻|)`: integrals of the positive and negative lobes of
/// `λ_k(X;t)` over `[0, horizon]`. Lobes are bracketed on a uniform scan,
/// their ends located by bisection and each integrated separately.
/// Values with `|λ| ≤ 1e-8·‖X‖₁/τ` (τ the family time scale) count as zero.
pub fn n_plus_minus<P: PropagatorFamily + ?Sized>(
    family: &P,
    x: &HermitianOperator,
    k: usize,
    horizon: f64,
) -> Result<(f64, f64)> {
    check_witness(family, x, k)?;
    if !(horizon > 0.0) || !horizon.is_finite() {
        return invalid("horizon must be positive and finite");
    }
    let tol = zero_tol(family, x);
    let class = |t: f64| -> Result<i8> {
        let v = lambda_k(family, x, t, k)?.value;
        Ok(if v > tol {
            1
        } else if v < -tol {
            -1
        } else {
            0
        })
    };
    let n = DEFAULT_LOBE_SCAN;
    let ts: Vec<f64> = (0..=n).map(|i| horizon * i as f64 / n as f64).collect();
    let classes: Vec<i8> = ts.par_iter().map(|&t| class(t)).collect::<Result<_>>()?;
    let t_tol = 1e-12 * horizon.max(1.0);

    // Segment boundaries where the class changes.
    let mut cuts = vec![(0.0, classes[0])];
    for i in 0..n {
        let (ca, cb) = (classes[i], classes[i + 1]);
        if ca == cb {
            continue;
        }
        let mut stack = vec![(ts[i], ts[i + 1], ca, cb)];
        let mut found = Vec::new();
        while let Some((a, b, ca, cb)) = stack.pop() {
            if ca == cb {
                continue;
            }
            if b - a <= t_tol {
                found.push((0.5 * (a + b), cb));
                continue;
            }
            let m = 0.5 * (a + b);
            let cm = class(m)?;
            // Right half first so boundaries pop out in increasing order.
            stack.push((m, b, cm, cb));
            stack.push((a, m, ca, cm));
        }
        cuts.extend(found);
    }

    let mut n_plus = 0.0;
    let mut n_minus = 0.0;
    for (i, &(start, cls)) in cuts.iter().enumerate() {
        let end = cuts.get(i + 1).map(|c| c.0).unwrap_or(horizon);
        if cls == 0 || end <= start {
            continue;
        }
        let value = quadrature(|t| lambda_value(family, x, t, k), start, end, LOBE_QUAD_TOL)?;
        if !value.is_finite() {
            return invalid("non-finite lobe integral");
        }
        if cls > 0 {
            n_plus += value.max(0.0);
        } else {
            n_minus += (-value).max(0.0);
        }
    }
    Ok((n_plus, n_minus))
}

/// Lobe integrals and ratio for one witness; `ratio` is `None` when both
/// integrals vanish.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessResult {
    pub label: String,
    pub n_plus: f64,
    pub n_minus: f64,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureReport {
    pub k: usize,
    pub horizon: f64,
    pub witnesses: Vec<WitnessResult>,
    /// Largest ratio over the witnesses, clipped to [0, 1]. A lower bound
    /// on the supremum over all Hermitian operators.
    pub m_k: f64,
}

/// Ratio `N⁺/|N⁻|` clipped to [0, 1]; 1 when only the positive lobe is
/// present and `None` when both vanish.
pub fn witness_ratio(n_plus: f64, n_minus: f64) -> Option<f64> {
    match (n_plus > 0.0, n_minus > 0.0) {
        (false, false) => None,
        (true, false) => Some(1.0),
        _ => Some((n_plus / n_minus).clamp(0.0, 1.0)),
    }
}

/// `M_k` over the supplied witnesses.
pub fn measure_mk<P: PropagatorFamily + ?Sized>(
    family: &P,
    k: usize,
    witnesses: &[Witness],
    horizon: f64,
) -> Result<MeasureReport> {
    if witnesses.is_empty() {
        return invalid("at least one witness is required");
    }
    let mut results = Vec::with_capacity(witnesses.len());
    for w in witnesses {
        let (n_plus, n_minus) = n_plus_minus(family, &w.op, k, horizon)?;
        results.push(WitnessResult {
            label: w.label.clone(),
            n_plus,
            n_minus,
            ratio: witness_ratio(n_plus, n_minus),
        });
    }
    let m_k = results.iter().filter_map(|r| r.ratio).fold(0.0, f64::max);
    Ok(MeasureReport {
        k,
        horizon,
        witnesses: results,
        m_k,
    })
}

/// Fibonacci-sphere Bloch vectors.
pub fn fibonacci_sphere(n: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// Minimum output eigenvalue over sampled pure qubit inputs.
pub fn min_output_eigenvalue(map: &Superoperator, samples: &[[f64; 3]]) -> Result<f64> {
    if map.dim() != 2 {
        return invalid("pure-state sampling is implemented for qubits");
    }
    let id = identity(2);
    Ok(samples
        .iter()
        .map(|n| {
            let rho = (&id + sigma(1) * c(n[0]) + sigma(2) * c(n[1]) + sigma(3) * c(n[2])) * c(0.5);
            min_eigenvalue(&map.apply(&rho))
        })
        .fold(f64::INFINITY, f64::min))
}

/// k-positivity indicator of a map: the Choi minimum eigenvalue for
/// `k ≥ d`, the sampled minimum output eigenvalue for `k = 1`.
pub fn positivity_indicator(map: &Superoperator, k: usize, samples: &[[f64; 3]]) -> Result<f64> {
    match k {
        0 => invalid("k must be positive"),
        1 if map.dim() > 1 => min_output_eigenvalue(map, samples),
        k if k >= map.dim() => Ok(choi_of(map).min_eigenvalue()),
        _ => invalid(format!(
            "{k}-positivity checks are implemented for k = 1 and k ≥ d"
        )),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivisibilityCell {
    pub t: f64,
    pub s: f64,
    /// `None` when `Λ_s` was too ill-conditioned to invert.
    pub indicator: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivisibilityScan {
    pub k: usize,
    pub cells: Vec<DivisibilityCell>,
}

impl DivisibilityScan {
    /// Most negative indicator and its cell.
    pub fn worst(&self) -> Option<&DivisibilityCell> {
        self.cells
            .iter()
            .filter(|c| c.indicator.is_some())
            .min_by(|a, b| a.indicator.unwrap().total_cmp(&b.indicator.unwrap()))
    }

    pub fn min_indicator(&self) -> f64 {
        self.worst().and_then(|c| c.indicator).unwrap_or(0.0)
    }

    pub fn violated(&self) -> bool {
        self.min_indicator() < VIOLATION_THRESHOLD
    }

    pub fn singular_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.indicator.is_none()).count()
    }
}

/// Checks k-positivity of `V_{t,s}` for every pair `s < t` of grid times.
pub fn divisibility_scan<P: PropagatorFamily + ?Sized>(
    family: &P,
    k: usize,
    times: &[f64],
) -> Result<DivisibilityScan> {
    if times.windows(2).any(|w| w[1] <= w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return invalid("scan times must be non-negative and strictly increasing");
    }
    let samples = fibonacci_sphere(DEFAULT_SPHERE_POINTS);
    let pairs: Vec<(f64, f64)> = times
        .iter()
        .enumerate()
        .flat_map(|(i, &t)| times[..i].iter().map(move |&s| (t, s)))
        .collect();
    let cells = pairs
        .par_iter()
        .map(
            |&(t, s)| match intermediate_with_bound(family, t, s, SCAN_CONDITION_BOUND) {
                Ok(v) => Ok(DivisibilityCell {
                    t,
                    s,
                    indicator: Some(positivity_indicator(&v, k, &samples)?),
                }),
                Err(Error::SingularPropagator { .. }) => Ok(DivisibilityCell {
                    t,
                    s,
                    indicator: None,
                }),
                Err(e) => Err(e),
            },
        )
        .collect::<Result<Vec<_>>>()?;
    Ok(DivisibilityScan { k, cells })
}

/// Uniform scan times on `[0, horizon]`.
pub fn scan_times(horizon: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| horizon * i as f64 / (points - 1) as f64)
        .collect()
}

/// Non-Markovianity degree of a qubit family.
#[derive(Debug, Clone, PartialEq)]
pub struct NmdVerdict {
    /// `None` when a scan is inconclusive.
    pub degree: Option<usize>,
    pub min_k1: f64,
    pub min_k2: f64,
    pub singular_cells: usize,
    pub diagnostics: String,
}

fn classify(m: f64) -> Option<bool> {
    if m < VIOLATION_THRESHOLD {
        Some(false)
    } else if m >= CLEAN_THRESHOLD {
        Some(true)
    } else {
        None
    }
}

/// Degree 0 when CP-divisible, 1 when 1- but not 2-divisible, 2 when not
/// even 1-divisible. A scan whose worst cell lies in `[−1e-4, −1e-8)` is
/// inconclusive.
pub fn nmd_classify<P: PropagatorFamily + ?Sized>(family: &P, horizon: f64) -> Result<NmdVerdict> {
    nmd_classify_on(family, &scan_times(horizon, DEFAULT_SCAN_POINTS))
}

pub fn nmd_classify_on<P: PropagatorFamily + ?Sized>(
    family: &P,
    times: &[f64],
) -> Result<NmdVerdict> {
    if family.dim() != 2 {
        return invalid("degree classification is implemented for qubits");
    }
    let k1 = divisibility_scan(family, 1, times)?;
    let k2 = divisibility_scan(family, 2, times)?;
    let (m1, m2) = (k1.min_indicator(), k2.min_indicator());
    let degree = match (classify(m1), classify(m2)) {
        (Some(false), _) => Some(2),
        (Some(true), Some(false)) => Some(1),
        (Some(true), Some(true)) => Some(0),
        _ => None,
    };
    let describe = |scan: &DivisibilityScan| match scan.worst() {
        Some(c) => format!(
            "k={}: min {:.3e} at (t={:.4}, s={:.4})",
            scan.k,
            c.indicator.unwrap(),
            c.t,
            c.s
        ),
        None => format!("k={}: no invertible cells", scan.k),
    };
    Ok(NmdVerdict {
        degree,
        min_k1: m1,
        min_k2: m2,
        singular_cells: k1.singular_cells(),
        diagnostics: format!(
            "{}; {}; {} singular cells",
            describe(&k1),
            describe(&k2),
            k1.singular_cells()
        ),
    })
}
