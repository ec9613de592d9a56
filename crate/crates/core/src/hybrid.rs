//! Quantum–classical hybrid dynamics.
//!
//! A classical environment hops between states `R` with rates `γ_{RR′}`
//! (transition `R′ → R`) and is never affected by the system. Each hop applies
//! a collision map `E_{RR′}` to the system; between hops the system evolves
//! under `−i[H_R, ·] + L_R`. The auxiliary states `ρ_R` obey the Lindblad rate
//! equation
//!
//! ```text
//! dρ_R/dt = (−i[H_R, ·] + L_R) ρ_R − Σ_{R′} γ_{R′R} ρ_R + Σ_{R′} γ_{RR′} E_{RR′}[ρ_{R′}]
//! ```
//!
//! and their traces follow the classical master equation.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::linops::{
    c, choi_of, conjugation_superop, identity, kron, min_eigenvalue, sigma, CMatrix, DensityMatrix,
    HermitianOperator, Superoperator, ONE, PSD_TOL, TRACE_TOL, ZERO,
};
use crate::numerics::{ensemble_stats, RngStream, TimeGrid};

/// Tolerance for the Lindblad-form check of conditional dissipators.
const GENERATOR_TOL: f64 = 1e-10;

/// Lindblad rate model: classical rates, collision maps and conditional
/// generators.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridModel {
    dim: usize,
    rates: DMatrix<f64>,
    collisions: BTreeMap<(usize, usize), Superoperator>,
    hamiltonians: BTreeMap<usize, HermitianOperator>,
    dissipators: BTreeMap<usize, Superoperator>,
}

impl HybridModel {
    /// A model with `n_states` classical states, no transitions and trivial
    /// conditional dynamics on a `dim`-dimensional system.
    pub fn new(n_states: usize, dim: usize) -> Result<Self> {
        if n_states == 0 {
            return invalid("a hybrid model needs at least one classical state");
        }
        if dim == 0 {
            return invalid("system dimension must be positive");
        }
        Ok(Self {
            dim,
            rates: DMatrix::zeros(n_states, n_states),
            collisions: BTreeMap::new(),
            hamiltonians: BTreeMap::new(),
            dissipators: BTreeMap::new(),
        })
    }

    pub fn n_states(&self) -> usize {
        self.rates.nrows()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check_state(&self, r: usize) -> Result<()> {
        if r >= self.n_states() {
            return invalid(format!(
                "classical state {r} out of range 0..{}",
                self.n_states()
            ));
        }
        Ok(())
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found,
            });
        }
        Ok(())
    }

    /// Sets the rate of the transition `from → to`.
    pub fn with_rate(mut self, to: usize, from: usize, rate: f64) -> Result<Self> {
        self.check_state(to)?;
        self.check_state(from)?;
        if !(rate >= 0.0) || !rate.is_finite() {
            return invalid(format!(
                "rate {from}->{to} must be non-negative, got {rate}"
            ));
        }
        self.rates[(to, from)] = rate;
        Ok(self)
    }

    /// Sets the collision map applied on the transition `from → to`. The map
    /// must be trace preserving and completely positive.
    pub fn with_collision(mut self, to: usize, from: usize, map: Superoperator) -> Result<Self> {
        self.check_state(to)?;
        self.check_state(from)?;
        self.check_dim(map.dim())?;
        let defect = map.trace_preservation_defect();
        if defect > TRACE_TOL {
            return invalid(format!(
                "collision map {from}->{to} is not trace preserving (defect {defect:e})"
            ));
        }
        let choi = choi_of(&map);
        if !choi.is_psd() {
            return invalid(format!(
                "collision map {from}->{to} is not completely positive (Choi eigenvalue {:e})",
                choi.min_eigenvalue()
            ));
        }
        self.collisions.insert((to, from), map);
        Ok(self)
    }

    pub fn with_hamiltonian(mut self, r: usize, h: HermitianOperator) -> Result<Self> {
        self.check_state(r)?;
        self.check_dim(h.dim())?;
        self.hamiltonians.insert(r, h);
        Ok(self)
    }

    /// Sets the conditional dissipator of state `r`, which must be a
    /// generator of Lindblad form.
    pub fn with_dissipator(mut self, r: usize, l: Superoperator) -> Result<Self> {
        self.check_state(r)?;
        self.check_dim(l.dim())?;
        check_lindblad_form(&l)?;
        self.dissipators.insert(r, l);
        Ok(self)
    }

    /// Rate of `from → to`.
    pub fn rate(&self, to: usize, from: usize) -> f64 {
        self.rates[(to, from)]
    }

    pub fn rates(&self) -> &DMatrix<f64> {
        &self.rates
    }

    /// Collision map of `from → to`; the identity when none was set.
    pub fn collision(&self, to: usize, from: usize) -> Superoperator {
        self.collisions
            .get(&(to, from))
            .cloned()
            .unwrap_or_else(|| Superoperator::identity(self.dim))
    }

    pub fn hamiltonian(&self, r: usize) -> Option<&HermitianOperator> {
        self.hamiltonians.get(&r)
    }

    pub fn dissipator(&self, r: usize) -> Option<&Superoperator> {
        self.dissipators.get(&r)
    }

    /// Total rate of leaving `from`, self-transitions included.
    pub fn exit_rate(&self, from: usize) -> f64 {
        self.rates.column(from).sum()
    }

    /// Conditional generator `−i[H_R, ·] + L_R` of state `r`.
    pub fn conditional_generator(&self, r: usize) -> Superoperator {
        let mut g = Superoperator::zero(self.dim);
        if let Some(h) = self.hamiltonians.get(&r) {
            g = g
                .add(&Superoperator::commutator_generator(h))
                .expect("dimensions checked");
        }
        if let Some(l) = self.dissipators.get(&r) {
            g = g.add(l).expect("dimensions checked");
        }
        g
    }

    /// Rate matrix `Q` of the classical master equation `dP/dt = Q·P`.
    pub fn classical_generator(&self) -> DMatrix<f64> {
        let n = self.n_states();
        let mut q = self.rates.clone();
        for r in 0..n {
            q[(r, r)] = 0.0;
        }
        for r in 0..n {
            let out: f64 = (0..n).filter(|&k| k != r).map(|k| self.rates[(k, r)]).sum();
            q[(r, r)] = -out;
        }
        q
    }

    /// Generator of the stacked vector `(vec ρ_0, …, vec ρ_{n−1})`.
    pub fn block_generator(&self) -> CMatrix {
        let n = self.n_states();
        let d2 = self.dim * self.dim;
        let mut g = CMatrix::zeros(n * d2, n * d2);
        for r in 0..n {
            let diag = self.conditional_generator(r).matrix() - identity(d2) * c(self.exit_rate(r));
            let mut block = g.view_mut((r * d2, r * d2), (d2, d2));
            block += diag;
            for from in 0..n {
                let rate = self.rates[(r, from)];
                if rate == 0.0 {
                    continue;
                }
                let mut block = g.view_mut((r * d2, from * d2), (d2, d2));
                block += self.collision(r, from).matrix() * c(rate);
            }
        }
        g
    }

    /// Whether nonzero rates only connect `i → i+1`.
    pub fn is_unidirectional_chain(&self) -> bool {
        let n = self.n_states();
        (0..n).all(|to| (0..n).all(|from| self.rates[(to, from)] == 0.0 || to == from + 1))
    }
}

/// Checks that `l` generates a completely positive trace-preserving
/// semigroup: trace annihilating, Hermiticity preserving and conditionally
/// completely positive.
pub fn check_lindblad_form(l: &Superoperator) -> Result<()> {
    let d = l.dim();
    let defect = l.trace_annihilation_defect();
    if defect > GENERATOR_TOL {
        return invalid(format!(
            "generator does not annihilate the trace (defect {defect:e})"
        ));
    }
    if !l.is_hermiticity_preserving(GENERATOR_TOL) {
        return invalid("generator does not preserve Hermiticity");
    }
    let mut omega = CMatrix::zeros(d * d, 1);
    for i in 0..d {
        omega[(i * d + i, 0)] = ONE;
    }
    let q = identity(d * d) - &omega * omega.adjoint() * c(1.0 / d as f64);
    let projected = &q * choi_of(l).matrix() * &q;
    let m = min_eigenvalue(&projected);
    if m < -GENERATOR_TOL {
        return invalid(format!(
            "generator is not conditionally completely positive ({m:e})"
        ));
    }
    Ok(())
}

fn check_probability_vector(p: &[f64], n: usize) -> Result<()> {
    if p.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: p.len(),
        });
    }
    if p.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return invalid("populations must be non-negative");
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return invalid(format!("populations sum to {total}"));
    }
    Ok(())
}

/// Propagates `x' = G·x` from t = 0 across the grid with exact exponentials,
/// reusing the step propagator while the spacing is unchanged.
fn propagate<T>(g: &DMatrix<T>, x0: &DMatrix<T>, grid: &TimeGrid) -> Vec<DMatrix<T>>
where
    T: nalgebra::ComplexField<RealField = f64> + Copy,
{
    let mut out = Vec::with_capacity(grid.len());
    let mut x = x0.clone();
    let mut prev = 0.0;
    let mut cached: Option<(f64, DMatrix<T>)> = None;
    for &t in grid.points() {
        let dt = t - prev;
        if dt > 0.0 {
            let reuse = matches!(&cached, Some((h, _)) if (h - dt).abs() <= 1e-12 * dt);
            if !reuse {
                cached = Some((dt, (g * T::from_real(dt)).exp()));
            }
            x = &cached.as_ref().unwrap().1 * &x;
        }
        out.push(x.clone());
        prev = t;
    }
    out
}

/// Population trajectories `P_R(t)` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationTrajectory {
    pub times: Vec<f64>,
    /// `populations[k][R]` at `times[k]`.
    pub populations: Vec<Vec<f64>>,
}

/// Solves `dP/dt = Q·P` with `P(0) = p0`.
pub fn classical_master_solve(
    model: &HybridModel,
    p0: &[f64],
    grid: &TimeGrid,
) -> Result<PopulationTrajectory> {
    let n = model.n_states();
    check_probability_vector(p0, n)?;
    let q = model.classical_generator();
    let x0 = DMatrix::from_column_slice(n, 1, p0);
    let populations = propagate(&q, &x0, grid)
        .into_iter()
        .map(|x| x.iter().copied().collect())
        .collect();
    Ok(PopulationTrajectory {
        times: grid.points().to_vec(),
        populations,
    })
}

/// The unnormalized auxiliary states `ρ_R` at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryStateSet {
    pub states: Vec<CMatrix>,
}

impl AuxiliaryStateSet {
    pub fn populations(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.trace().re).collect()
    }

    /// `ρ_t = Σ_R ρ_R`.
    pub fn system_state(&self) -> CMatrix {
        let d = self.states[0].nrows();
        self.states
            .iter()
            .fold(CMatrix::zeros(d, d), |acc, s| acc + s)
    }

    /// Smallest eigenvalue over all auxiliary states.
    pub fn min_eigenvalue(&self) -> f64 {
        self.states
            .iter()
            .map(min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_valid(&self) -> bool {
        let total: f64 = self.populations().iter().sum();
        self.min_eigenvalue() >= PSD_TOL && (total - 1.0).abs() <= 1e-10
    }
}

/// Auxiliary and system states of a Lindblad rate solve.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridSolution {
    pub times: Vec<f64>,
    pub auxiliary: Vec<AuxiliaryStateSet>,
    pub system: Vec<CMatrix>,
}

impl HybridSolution {
    pub fn populations(&self) -> Vec<Vec<f64>> {
        self.auxiliary.iter().map(|a| a.populations()).collect()
    }
}

/// Integrates the Lindblad rate equation from `ρ_R(0) = P_R(0)·ρ₀`.
pub fn lindblad_rate_solve(
    model: &HybridModel,
    rho0: &DensityMatrix,
    p0: &[f64],
    grid: &TimeGrid,
) -> Result<HybridSolution> {
    let n = model.n_states();
    let d = model.dim();
    check_probability_vector(p0, n)?;
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: rho0.dim(),
        });
    }
    let d2 = d * d;
    let mut x0 = CMatrix::zeros(n * d2, 1);
    for (r, &p) in p0.iter().enumerate() {
        for (k, z) in rho0.matrix().iter().enumerate() {
            x0[(r * d2 + k, 0)] = z * c(p);
        }
    }
    let g = model.block_generator();
    let mut auxiliary = Vec::with_capacity(grid.len());
    let mut system = Vec::with_capacity(grid.len());
    for x in propagate(&g, &x0, grid) {
        let states: Vec<CMatrix> = (0..n)
            .map(|r| CMatrix::from_iterator(d, d, x.rows(r * d2, d2).iter().copied()))
            .collect();
        let set = AuxiliaryStateSet { states };
        system.push(set.system_state());
        auxiliary.push(set);
    }
    Ok(HybridSolution {
        times: grid.points().to_vec(),
        auxiliary,
        system,
    })
}

/// Unidirectional `(n+1)`-state chain with uniform rate `γ` whose every
/// transition applies σ_z conjugation. `n` must be even and at least 2.
pub fn dephasing_chain_model(gamma: f64, n: usize) -> Result<HybridModel> {
    if n < 2 || !n.is_multiple_of(2) {
        return invalid(format!("chain length must be even and at least 2, got {n}"));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return invalid(format!("gamma must be positive, got {gamma}"));
    }
    let flip = conjugation_superop(&sigma(3))?;
    let mut model = HybridModel::new(n + 1, 2)?;
    for i in 0..n {
        model = model
            .with_rate(i + 1, i, gamma)?
            .with_collision(i + 1, i, flip.clone())?;
    }
    Ok(model)
}

/// Three-state σ_z chain plus an uncoupled state carrying Markovian σ_x
/// dephasing `½γ(σ_x ρ σ_x − ρ)`, with initial populations `(1 − r, 0, 0, r)`.
pub fn chain_mixture_model(gamma: f64, r: f64) -> Result<(HybridModel, Vec<f64>)> {
    if !(0.0..=1.0).contains(&r) {
        return invalid(format!("mixture weight must lie in [0, 1], got {r}"));
    }
    let chain = dephasing_chain_model(gamma, 2)?;
    let x = sigma(1);
    let lx = Superoperator::sandwich(&x, &x)
        .add(&Superoperator::identity(2).scale(-1.0))?
        .scale(0.5 * gamma);
    let mut model = HybridModel::new(4, 2)?;
    for (&(to, from), map) in &chain.collisions {
        model = model
            .with_rate(to, from, chain.rate(to, from))?
            .with_collision(to, from, map.clone())?;
    }
    model = model.with_dissipator(3, lx)?;
    Ok((model, vec![1.0 - r, 0.0, 0.0, r]))
}

/// Lindblad generator on system ⊗ ancilla reproducing a chain model.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteEmbedding {
    pub system_dim: usize,
    pub ancilla_dim: usize,
    pub generator: Superoperator,
    /// Jump operators `K ⊗ |i⟩⟨i−1|` with their rates.
    pub jumps: Vec<(CMatrix, f64)>,
    pub hamiltonian: CMatrix,
}

impl BipartiteEmbedding {
    /// `ρ₀ ⊗ |0⟩⟨0|`.
    pub fn initial_state(&self, rho0: &DensityMatrix) -> Result<CMatrix> {
        if rho0.dim() != self.system_dim {
            return Err(Error::DimensionMismatch {
                expected: self.system_dim,
                found: rho0.dim(),
            });
        }
        let mut anc = CMatrix::zeros(self.ancilla_dim, self.ancilla_dim);
        anc[(0, 0)] = ONE;
        Ok(kron(rho0.matrix(), &anc))
    }

    /// `⟨i|ρ^{sa}|i⟩`, an operator on the system.
    pub fn ancilla_block(&self, rho_sa: &CMatrix, i: usize) -> CMatrix {
        let n = self.ancilla_dim;
        CMatrix::from_fn(self.system_dim, self.system_dim, |a, b| {
            rho_sa[(a * n + i, b * n + i)]
        })
    }

    /// Partial trace over the ancilla.
    pub fn system_marginal(&self, rho_sa: &CMatrix) -> CMatrix {
        (0..self.ancilla_dim)
            .map(|i| self.ancilla_block(rho_sa, i))
            .fold(CMatrix::zeros(self.system_dim, self.system_dim), |a, b| {
                a + b
            })
    }
}

/// Lindblad embedding of a unidirectional chain model: the ancilla records
/// the classical state and each collision map contributes jump operators
/// `K_a ⊗ |i⟩⟨i−1|` from its Kraus decomposition. Conditional Hamiltonians
/// enter as `Σ_R H_R ⊗ |R⟩⟨R|`; conditional dissipators are not supported.
pub fn bipartite_embedding(model: &HybridModel) -> Result<BipartiteEmbedding> {
    if !model.is_unidirectional_chain() {
        return Err(Error::UnsupportedModel(
            "bipartite embedding requires a unidirectional chain".into(),
        ));
    }
    if !model.dissipators.is_empty() {
        return Err(Error::UnsupportedModel(
            "bipartite embedding does not support conditional dissipators".into(),
        ));
    }
    let d = model.dim();
    let n = model.n_states();
    let ket_bra = |i: usize, j: usize| {
        let mut m = CMatrix::zeros(n, n);
        m[(i, j)] = ONE;
        m
    };
    let mut h = CMatrix::zeros(d * n, d * n);
    for (&r, hr) in &model.hamiltonians {
        h += kron(hr.matrix(), &ket_bra(r, r));
    }
    let hop = HermitianOperator::new(h.clone())?;
    let mut generator = Superoperator::commutator_generator(&hop);
    let mut jumps = Vec::new();
    for i in 1..n {
        let rate = model.rate(i, i - 1);
        if rate == 0.0 {
            continue;
        }
        for k in choi_of(&model.collision(i, i - 1)).kraus_operators(1e-14)? {
            let v = kron(&k, &ket_bra(i, i - 1));
            generator = generator.add(&Superoperator::dissipator(&v, rate))?;
            jumps.push((v, rate));
        }
    }
    Ok(BipartiteEmbedding {
        system_dim: d,
        ancilla_dim: n,
        generator,
        jumps,
        hamiltonian: h,
    })
}

/// One collisional trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub master_seed: u64,
    pub stream_id: u64,
    pub jump_times: Vec<f64>,
    /// Classical states visited, starting with the initial one.
    pub states: Vec<usize>,
    /// Conditional system state at the last grid time.
    pub final_state: CMatrix,
}

impl TrajectoryRecord {
    /// Number of jumps at or before `t`.
    pub fn jumps_by(&self, t: f64) -> usize {
        self.jump_times.partition_point(|&s| s <= t)
    }

    pub fn state_at(&self, t: f64) -> usize {
        self.states[self.jumps_by(t)]
    }
}

/// Ensemble mean of collisional trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub times: Vec<f64>,
    pub mean: Vec<CMatrix>,
    /// Standard errors of the real and imaginary parts, entry by entry.
    pub stderr: Vec<CMatrix>,
    /// Fraction of trajectories in each classical state, per time.
    pub occupation: Vec<Vec<f64>>,
    pub occupation_stderr: Vec<Vec<f64>>,
    pub records: Vec<TrajectoryRecord>,
}

/// Samples jump times and classical states up to `t_end`.
fn sample_path(
    model: &HybridModel,
    p0: &[f64],
    t_end: f64,
    stream: &mut RngStream,
) -> (Vec<f64>, Vec<usize>) {
    let n = model.n_states();
    let u = stream.uniform();
    let mut acc = 0.0;
    let mut r = n - 1;
    for (k, &p) in p0.iter().enumerate() {
        acc += p;
        if u < acc {
            r = k;
            break;
        }
    }
    while p0[r] == 0.0 && r > 0 {
        r -= 1;
    }
    let mut times = Vec::new();
    let mut states = vec![r];
    let mut t = 0.0;
    loop {
        let a = model.exit_rate(r);
        if a <= 0.0 {
            break;
        }
        t += stream.exponential(a).expect("positive rate");
        if t > t_end {
            break;
        }
        let target = stream.uniform() * a;
        let mut acc = 0.0;
        let mut next = r;
        for to in 0..n {
            let rate = model.rate(to, r);
            if rate == 0.0 {
                continue;
            }
            acc += rate;
            next = to;
            if target < acc {
                break;
            }
        }
        times.push(t);
        states.push(next);
        r = next;
    }
    (times, states)
}

/// Conditional system states of one sampled path on the grid.
fn replay(
    model: &HybridModel,
    generators: &[Option<Superoperator>],
    rho0: &CMatrix,
    jump_times: &[f64],
    states: &[usize],
    grid: &TimeGrid,
) -> Vec<CMatrix> {
    let evolve = |rho: &CMatrix, r: usize, dt: f64| match &generators[r] {
        Some(g) if dt > 0.0 => g.exp(dt).apply(rho),
        _ => rho.clone(),
    };
    let mut out = Vec::with_capacity(grid.len());
    let mut rho = rho0.clone();
    let mut t = 0.0;
    let mut next_jump = 0;
    for &tg in grid.points() {
        while next_jump < jump_times.len() && jump_times[next_jump] <= tg {
            let tj = jump_times[next_jump];
            let from = states[next_jump];
            let to = states[next_jump + 1];
            rho = evolve(&rho, from, tj - t);
            rho = model.collision(to, from).apply(&rho);
            t = tj;
            next_jump += 1;
        }
        out.push(evolve(&rho, states[next_jump], tg - t));
        rho = out.last().unwrap().clone();
        t = tg;
    }
    out
}

/// Gillespie simulation of `n_traj` collisional trajectories. Trajectory `i`
/// draws from stream `(master_seed, i)`, so results do not depend on the
/// thread schedule.
pub fn simulate_trajectories(
    model: &HybridModel,
    rho0: &DensityMatrix,
    p0: &[f64],
    grid: &TimeGrid,
    n_traj: usize,
    master_seed: u64,
) -> Result<TrajectoryEnsemble> {
    if n_traj == 0 {
        return invalid("at least one trajectory is required");
    }
    let n = model.n_states();
    let d = model.dim();
    check_probability_vector(p0, n)?;
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: rho0.dim(),
        });
    }
    let t_end = grid.t1();
    let generators: Vec<Option<Superoperator>> = (0..n)
        .map(|r| {
            let g = model.conditional_generator(r);
            (g.matrix().iter().any(|z| *z != ZERO)).then_some(g)
        })
        .collect();
    let paths: Vec<(Vec<f64>, Vec<usize>)> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut stream = RngStream::new(master_seed, i as u64);
            sample_path(model, p0, t_end, &mut stream)
        })
        .collect();
    let m = grid.len();
    let width = m * (2 * d * d + n);
    let stats = ensemble_stats(n_traj, width, |i| {
        let (times, states) = &paths[i];
        let rhos = replay(model, &generators, rho0.matrix(), times, states, grid);
        let mut obs = Vec::with_capacity(width);
        for (k, rho) in rhos.iter().enumerate() {
            obs.extend(rho.iter().map(|z| z.re));
            obs.extend(rho.iter().map(|z| z.im));
            let r = states[times.partition_point(|&s| s <= grid.points()[k])];
            obs.extend((0..n).map(|q| if q == r { 1.0 } else { 0.0 }));
        }
        obs
    });
    let stride = 2 * d * d + n;
    let unpack = |v: &[f64], k: usize| {
        let base = k * stride;
        CMatrix::from_fn(d, d, |a, b| {
            let idx = b * d + a;
            nalgebra::Complex::new(v[base + idx], v[base + d * d + idx])
        })
    };
    let occ = |v: &[f64], k: usize| v[k * stride + 2 * d * d..(k + 1) * stride].to_vec();
    let records: Vec<TrajectoryRecord> = paths
        .into_par_iter()
        .enumerate()
        .map(|(i, (jump_times, states))| {
            let final_state = replay(
                model,
                &generators,
                rho0.matrix(),
                &jump_times,
                &states,
                grid,
            )
            .pop()
            .expect("non-empty grid");
            TrajectoryRecord {
                master_seed,
                stream_id: i as u64,
                jump_times,
                states,
                final_state,
            }
        })
        .collect();
    Ok(TrajectoryEnsemble {
        times: grid.points().to_vec(),
        mean: (0..m).map(|k| unpack(&stats.mean, k)).collect(),
        stderr: (0..m).map(|k| unpack(&stats.stderr, k)).collect(),
        occupation: (0..m).map(|k| occ(&stats.mean, k)).collect(),
        occupation_stderr: (0..m).map(|k| occ(&stats.stderr, k)).collect(),
        records,
    })
}

/// Largest population difference between solves started from `rho_a` and
/// `rho_b` with the same classical populations.
pub fn spectator_check(
    model: &HybridModel,
    rho_a: &DensityMatrix,
    rho_b: &DensityMatrix,
    p0: &[f64],
    grid: &TimeGrid,
) -> Result<f64> {
    let a = lindblad_rate_solve(model, rho_a, p0, grid)?;
    let b = lindblad_rate_solve(model, rho_b, p0, grid)?;
    let mut worst: f64 = 0.0;
    for (pa, pb) in a.populations().iter().zip(b.populations()) {
        for (x, y) in pa.iter().zip(pb) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok(worst)
}
