//! Qubit under a stochastic Hamiltonian `H + η(t)ΔH` driven by
//! Ornstein–Uhlenbeck noise `dη/dt = −γη + ξ`, `⟨ξ(t)ξ(t′)⟩ = Dδ(t − t′)`.
//!
//! Two routes to the averaged state: Langevin Monte Carlo over sampled paths,
//! and a finite-volume solve of the η-resolved auxiliary states whose trace
//! obeys the Fokker–Planck equation `∂P/∂t = γ∂(ηP)/∂η + (D/2)∂²P/∂η²`.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::linops::{c, CMatrix, DensityMatrix, HermitianOperator, I};
use crate::numerics::{ensemble_stats, RngStream, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OUParams {
    gamma: f64,
    diffusion: f64,
}

impl OUParams {
    pub fn new(gamma: f64, diffusion: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return invalid(format!("gamma must be positive, got {gamma}"));
        }
        if !(diffusion > 0.0) || !diffusion.is_finite() {
            return invalid(format!("diffusion must be positive, got {diffusion}"));
        }
        Ok(Self { gamma, diffusion })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn diffusion(&self) -> f64 {
        self.diffusion
    }

    /// `D/(2γ)`.
    pub fn stationary_variance(&self) -> f64 {
        self.diffusion / (2.0 * self.gamma)
    }

    /// Stationary correlation `(D/2γ)e^{−γ|τ|}`.
    pub fn correlation(&self, tau: f64) -> f64 {
        self.stationary_variance() * (-self.gamma * tau.abs()).exp()
    }

    /// `Var ∫₀ᵗ η = (D/γ²)[t − (1 − e^{−γt})/γ]` in the stationary regime.
    pub fn integrated_variance(&self, t: f64) -> f64 {
        let g = self.gamma;
        self.diffusion / (g * g) * (t + (-g * t).exp_m1() / g)
    }
}

/// Law of `η(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum InitialNoise {
    Fixed(f64),
    #[default]
    Stationary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseHamiltonianModel {
    pub h: HermitianOperator,
    pub delta_h: HermitianOperator,
    pub ou: OUParams,
    pub eta0: InitialNoise,
}

impl NoiseHamiltonianModel {
    pub fn new(
        h: HermitianOperator,
        delta_h: HermitianOperator,
        ou: OUParams,
        eta0: InitialNoise,
    ) -> Result<Self> {
        if h.dim() != delta_h.dim() {
            return Err(Error::DimensionMismatch {
                expected: h.dim(),
                found: delta_h.dim(),
            });
        }
        Ok(Self {
            h,
            delta_h,
            ou,
            eta0,
        })
    }

    /// `H = 0`, `ΔH = σ_z/2`, stationary start.
    pub fn pure_dephasing(ou: OUParams) -> Self {
        let dh = crate::linops::sigma(3) * c(0.5);
        Self {
            h: HermitianOperator::zeros(2),
            delta_h: HermitianOperator::new(dh).expect("Hermitian"),
            ou,
            eta0: InitialNoise::Stationary,
        }
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    /// `exp(−i(H + ηΔH)τ)`.
    fn propagator(&self, eta: f64, tau: f64) -> CMatrix {
        let m = self.h.matrix() + self.delta_h.matrix() * c(eta);
        if m.nrows() == 2 {
            qubit_propagator(&m, tau)
        } else {
            (m * (-I * tau)).exp()
        }
    }
}

/// `exp(−iMτ)` for Hermitian 2×2 `M = a₀𝟙 + a·σ`.
fn qubit_propagator(m: &CMatrix, tau: f64) -> CMatrix {
    let a0 = 0.5 * (m[(0, 0)].re + m[(1, 1)].re);
    let ax = m[(0, 1)].re;
    let ay = -m[(0, 1)].im;
    let az = 0.5 * (m[(0, 0)].re - m[(1, 1)].re);
    let norm = (ax * ax + ay * ay + az * az).sqrt();
    let phase = (-I * (a0 * tau)).exp();
    let (cs, sn) = ((norm * tau).cos(), (norm * tau).sin());
    let (nx, ny, nz) = if norm > 0.0 {
        (ax / norm, ay / norm, az / norm)
    } else {
        (0.0, 0.0, 0.0)
    };
    let a = nalgebra::Complex::new(cs, -sn * nz);
    let b = nalgebra::Complex::new(-sn * ny, -sn * nx);
    let cc = nalgebra::Complex::new(sn * ny, -sn * nx);
    let d = nalgebra::Complex::new(cs, sn * nz);
    CMatrix::from_row_slice(2, 2, &[a * phase, b * phase, cc * phase, d * phase])
}

/// Noise values `η(k·dt)`, k = 0..=n.
#[derive(Debug, Clone, PartialEq)]
pub struct OuPath {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl OuPath {
    pub fn times(&self) -> Vec<f64> {
        (0..self.values.len()).map(|k| k as f64 * self.dt).collect()
    }

    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }
}

/// Samples an OU path on `[0, t_end]` with the exact update
/// `η_{k+1} = η_k e^{−γdt} + N(0, (D/2γ)(1 − e^{−2γdt}))`.
pub fn ou_path(
    params: &OUParams,
    eta0: InitialNoise,
    dt: f64,
    t_end: f64,
    stream: &mut RngStream,
) -> Result<OuPath> {
    if !(dt > 0.0) || !dt.is_finite() {
        return invalid(format!("time step must be positive, got {dt}"));
    }
    if !(t_end >= 0.0) {
        return invalid("final time must be non-negative");
    }
    let n = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let var = params.stationary_variance();
    let decay = (-params.gamma * dt).exp();
    let kick = (var * -(-2.0 * params.gamma * dt).exp_m1()).sqrt();
    let mut eta = match eta0 {
        InitialNoise::Fixed(v) => v,
        InitialNoise::Stationary => var.sqrt() * stream.gaussian(),
    };
    let mut values = Vec::with_capacity(n + 1);
    values.push(eta);
    for _ in 0..n {
        eta = eta * decay + kick * stream.gaussian();
        values.push(eta);
    }
    Ok(OuPath { dt, values })
}

/// Conditional states along one path. Each step applies the exact
/// propagator with `η` frozen at the mean of the step's endpoint values.
pub fn stochastic_unitary_solve(
    model: &NoiseHamiltonianModel,
    path: &OuPath,
    rho0: &DensityMatrix,
) -> Result<Vec<CMatrix>> {
    if rho0.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: rho0.dim(),
        });
    }
    let mut rho = rho0.matrix().clone();
    let mut out = Vec::with_capacity(path.values.len());
    out.push(rho.clone());
    for w in path.values.windows(2) {
        let u = model.propagator(0.5 * (w[0] + w[1]), path.dt);
        rho = &u * rho * u.adjoint();
        out.push(rho.clone());
    }
    Ok(out)
}

/// Largest integration step used by [`ensemble_average`], in units of 1/γ.
pub const MAX_LANGEVIN_STEP: f64 = 0.01;

/// Number of fine steps per grid spacing and the index offset of `t0`.
fn fine_layout(grid: &TimeGrid, max_step: f64) -> Result<(f64, usize, usize)> {
    let spacing = if grid.len() == 1 {
        grid.t0().max(max_step)
    } else {
        grid.uniform_step(1e-9)
            .ok_or_else(|| Error::InvalidArgument("grid must be uniform".into()))?
    };
    let per = (spacing / max_step - 1e-9).ceil().max(1.0) as usize;
    let offset = grid.t0() / spacing;
    if (offset - offset.round()).abs() > 1e-9 {
        return invalid("grid start must be a multiple of its spacing");
    }
    Ok((spacing / per as f64, per, offset.round() as usize * per))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseEnsemble {
    pub times: Vec<f64>,
    pub mean: Vec<CMatrix>,
    /// Standard errors of the real and imaginary parts, entry by entry.
    pub stderr: Vec<CMatrix>,
}

/// Averages conditional states over `n_paths` OU realizations, path `i`
/// drawing from stream `(master_seed, i)`. The grid must be uniform with a
/// start time that is a multiple of its spacing.
pub fn ensemble_average(
    model: &NoiseHamiltonianModel,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    n_paths: usize,
    master_seed: u64,
) -> Result<NoiseEnsemble> {
    if n_paths == 0 {
        return invalid("at least one path is required");
    }
    if rho0.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: rho0.dim(),
        });
    }
    let (dt, per, offset) = fine_layout(grid, MAX_LANGEVIN_STEP / model.ou.gamma)?;
    let t_end = dt * (offset + per * (grid.len() - 1)) as f64;
    let d = model.dim();
    let m = grid.len();
    let width = 2 * d * d * m;
    let stats = ensemble_stats(n_paths, width, |i| {
        let mut stream = RngStream::new(master_seed, i as u64);
        let path = ou_path(&model.ou, model.eta0, dt, t_end, &mut stream).expect("validated step");
        let states = stochastic_unitary_solve(model, &path, rho0).expect("validated dimensions");
        let mut obs = Vec::with_capacity(width);
        for k in 0..m {
            let rho = &states[offset + k * per];
            obs.extend(rho.iter().map(|z| z.re));
            obs.extend(rho.iter().map(|z| z.im));
        }
        obs
    });
    let unpack = |v: &[f64], k: usize| {
        let base = 2 * d * d * k;
        CMatrix::from_fn(d, d, |a, b| {
            let idx = b * d + a;
            nalgebra::Complex::new(v[base + idx], v[base + d * d + idx])
        })
    };
    Ok(NoiseEnsemble {
        times: grid.points().to_vec(),
        mean: (0..m).map(|k| unpack(&stats.mean, k)).collect(),
        stderr: (0..m).map(|k| unpack(&stats.stderr, k)).collect(),
    })
}

/// Symmetric cell grid on `[−half_width, half_width]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaGrid {
    pub half_width: f64,
    pub cells: usize,
}

impl EtaGrid {
    /// `cells` cells spanning `sigmas` stationary standard deviations either
    /// side of zero.
    pub fn covering(params: &OUParams, sigmas: f64, cells: usize) -> Self {
        Self {
            half_width: sigmas * params.stationary_variance().sqrt(),
            cells,
        }
    }

    pub fn width(&self) -> f64 {
        2.0 * self.half_width / self.cells as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let h = self.width();
        (0..self.cells)
            .map(|i| -self.half_width + (i as f64 + 0.5) * h)
            .collect()
    }
}

/// Minimum half-width of the η-grid in stationary standard deviations.
pub const MIN_ETA_SIGMAS: f64 = 6.0;
/// Largest `dt·λ_max` accepted by the RK4 stepper.
pub const RK4_STABILITY_LIMIT: f64 = 2.5;

#[derive(Debug, Clone, PartialEq)]
pub struct FokkerPlanckSolution {
    pub times: Vec<f64>,
    pub eta: Vec<f64>,
    /// Cell densities `P_η(t)`, normalized so that `Σ P_η·Δη = 1`.
    pub marginals: Vec<Vec<f64>>,
    /// `ρ_t = ∫dη ρ_η(t)`.
    pub states: Vec<CMatrix>,
}

impl FokkerPlanckSolution {
    pub fn cell_width(&self) -> f64 {
        if self.eta.len() > 1 {
            self.eta[1] - self.eta[0]
        } else {
            f64::INFINITY
        }
    }

    /// `Σ P_η·Δη` at time index `k`.
    pub fn normalization(&self, k: usize) -> f64 {
        self.marginals[k].iter().sum::<f64>() * self.cell_width()
    }

    /// Mean and variance of η at time index `k`.
    pub fn moments(&self, k: usize) -> (f64, f64) {
        let h = self.cell_width();
        let p = &self.marginals[k];
        let mean: f64 = p.iter().zip(&self.eta).map(|(p, e)| p * e * h).sum();
        let var: f64 = p
            .iter()
            .zip(&self.eta)
            .map(|(p, e)| p * (e - mean).powi(2) * h)
            .sum();
        (mean, var)
    }
}

/// Rough spectral radius of the semi-discrete operator.
fn spectral_bound(model: &NoiseHamiltonianModel, eta: &EtaGrid) -> f64 {
    let h = eta.width();
    let ou = &model.ou;
    let spread = |m: &HermitianOperator| {
        let ev = m.eigenvalues();
        ev.last().unwrap() - ev.first().unwrap()
    };
    2.0 * ou.diffusion / (h * h)
        + 2.0 * ou.gamma * eta.half_width / h
        + ou.gamma
        + spread(&model.h)
        + eta.half_width * spread(&model.delta_h)
}

/// Largest stable time step for [`fokker_planck_grid_solve`], with a 20%
/// margin.
pub fn stable_step(model: &NoiseHamiltonianModel, eta: &EtaGrid) -> f64 {
    0.8 * RK4_STABILITY_LIMIT / spectral_bound(model, eta)
}

/// Initial cell densities from the model's `η(0)` law.
fn initial_density(model: &NoiseHamiltonianModel, eta: &EtaGrid) -> Vec<f64> {
    let h = eta.width();
    let centers = eta.centers();
    match model.eta0 {
        InitialNoise::Fixed(v) => {
            let idx = (((v + eta.half_width) / h).floor().max(0.0) as usize).min(eta.cells - 1);
            let mut p = vec![0.0; eta.cells];
            p[idx] = 1.0 / h;
            p
        }
        InitialNoise::Stationary => {
            let var = model.ou.stationary_variance();
            let mut p: Vec<f64> = centers
                .iter()
                .map(|e| (-e * e / (2.0 * var)).exp())
                .collect();
            let total: f64 = p.iter().sum::<f64>() * h;
            p.iter_mut().for_each(|x| *x /= total);
            p
        }
    }
}

/// Finite-volume solve of the η-resolved auxiliary states: hybrid
/// differencing of the drift (central where the cell Péclet number
/// `|v|Δη/(D/2)` is at most 2, upwind elsewhere), central diffusion,
/// zero-flux walls and classical RK4 with step at most `dt`. The η-grid must extend at least six stationary standard deviations.
pub fn fokker_planck_grid_solve(
    model: &NoiseHamiltonianModel,
    rho0: &DensityMatrix,
    eta: &EtaGrid,
    grid: &TimeGrid,
    dt: f64,
) -> Result<FokkerPlanckSolution> {
    if rho0.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: rho0.dim(),
        });
    }
    if eta.cells < 3 {
        return invalid("the eta grid needs at least three cells");
    }
    let sd = model.ou.stationary_variance().sqrt();
    if eta.half_width < MIN_ETA_SIGMAS * sd * (1.0 - 1e-12) {
        return invalid(format!(
            "eta grid half-width {} is below {MIN_ETA_SIGMAS} stationary standard deviations ({})",
            eta.half_width,
            MIN_ETA_SIGMAS * sd
        ));
    }
    if !(dt > 0.0) {
        return invalid("time step must be positive");
    }
    let bound = spectral_bound(model, eta);
    if dt * bound > RK4_STABILITY_LIMIT {
        return Err(Error::Stability(format!(
            "dt·λ_max = {:.3} exceeds {RK4_STABILITY_LIMIT}; use dt ≤ {:.3e} or a coarser eta grid",
            dt * bound,
            RK4_STABILITY_LIMIT / bound
        )));
    }

    let n = eta.cells;
    let h = eta.width();
    let centers = eta.centers();
    let gamma = model.ou.gamma;
    let half_d = 0.5 * model.ou.diffusion;
    let gens: Vec<CMatrix> = centers
        .iter()
        .map(|&e| (model.h.matrix() + model.delta_h.matrix() * c(e)) * (-I))
        .collect();
    // Interface drift velocities at η_{i+½}, i = 0..n−1.
    let velocity: Vec<f64> = (0..n - 1)
        .map(|i| -gamma * 0.5 * (centers[i] + centers[i + 1]))
        .collect();

    let rhs = |x: &[CMatrix]| -> Vec<CMatrix> {
        let mut out: Vec<CMatrix> = x.iter().zip(&gens).map(|(r, g)| g * r - r * g).collect();
        for i in 0..n - 1 {
            let v = velocity[i];
            let advected = if v.abs() * h <= 2.0 * half_d {
                (&x[i] + &x[i + 1]) * c(0.5)
            } else if v > 0.0 {
                x[i].clone()
            } else {
                x[i + 1].clone()
            };
            let flux = advected * c(v) - (&x[i + 1] - &x[i]) * c(half_d / h);
            out[i] -= &flux * c(1.0 / h);
            out[i + 1] += flux * c(1.0 / h);
        }
        out
    };
    let axpy = |x: &[CMatrix], k: &[CMatrix], s: f64| -> Vec<CMatrix> {
        x.iter().zip(k).map(|(a, b)| a + b * c(s)).collect()
    };

    let p0 = initial_density(model, eta);
    let mut x: Vec<CMatrix> = p0.iter().map(|&p| rho0.matrix() * c(p)).collect();
    let mut t = 0.0;
    let mut times = Vec::with_capacity(grid.len());
    let mut marginals = Vec::with_capacity(grid.len());
    let mut states = Vec::with_capacity(grid.len());
    for &target in grid.points() {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / dt - 1e-9).ceil().max(1.0) as usize;
            let tau = span / steps as f64;
            for _ in 0..steps {
                let k1 = rhs(&x);
                let k2 = rhs(&axpy(&x, &k1, 0.5 * tau));
                let k3 = rhs(&axpy(&x, &k2, 0.5 * tau));
                let k4 = rhs(&axpy(&x, &k3, tau));
                x = x
                    .par_iter()
                    .enumerate()
                    .map(|(i, xi)| {
                        xi + (&k1[i] + (&k2[i] + &k3[i]) * c(2.0) + &k4[i]) * c(tau / 6.0)
                    })
                    .collect();
            }
            t = target;
        }
        times.push(target);
        marginals.push(x.iter().map(|r| r.trace().re).collect());
        let d = model.dim();
        states.push(x.iter().fold(CMatrix::zeros(d, d), |acc, r| acc + r * c(h)));
    }
    Ok(FokkerPlanckSolution {
        times,
        eta: centers,
        marginals,
        states,
    })
}
