//! The acceptance checks behind `nmq validate`.
//!
//! Each check recomputes one headline result through independent routes and
//! compares at a fixed tolerance. Tolerances are multiplied by
//! [`ValidationOptions::tolerance_factor`]; setting it to zero turns every
//! comparison into an exact-equality test, which is used to exercise the
//! failure path.

use std::time::{Duration, Instant};

use crate::dephasing::{
    big_gamma, coherence_cn, coherence_factor, dephasing_dissipator, dephasing_map, kernel,
    local_generator, rate_gamma, DephasingParams, RecoherenceParams,
};
use crate::error::Result;
use crate::gaussian_noise::{
    ensemble_average, fokker_planck_grid_solve, ou_path, stable_step, EtaGrid, InitialNoise,
    NoiseHamiltonianModel, OUParams,
};
use crate::hybrid::{
    bipartite_embedding, dephasing_chain_model, lindblad_rate_solve, simulate_trajectories,
    spectator_check, HybridModel,
};
use crate::linops::{
    c, choi_of, conjugation_superop, max_abs_diff, CMatrix, DensityMatrix, HermitianOperator,
};
use crate::measures::{
    default_witnesses, divisibility_scan, example_family, markov_x_family, measure_mk,
    mixture_family, nmd_classify, scan_times, DephasingFamily, Witness,
};
use crate::numerics::{integrate_linear, quadrature, volterra_solve, RngStream, TimeGrid};
use crate::random_unitary::{
    check_max_nonmarkov_conditions, dephasing_probs_laplace, example_gamma_integrals,
    example_rates, memory_kernels_laplace, MixtureFamily, MixtureParams, RatesOf,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions {
    pub gamma: f64,
    pub seed: u64,
    pub tolerance_factor: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            seed: 42,
            tolerance_factor: 1.0,
        }
    }
}

/// Result of one acceptance check.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    /// Measured quantities, `name=value` pairs.
    pub measurements: Vec<(String, f64)>,
    pub failures: Vec<String>,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl CriterionOutcome {
    /// One machine-readable line.
    pub fn summary_line(&self) -> String {
        let values = self
            .measurements
            .iter()
            .map(|(k, v)| format!("{k}={v:.6e}"))
            .collect::<Vec<_>>()
            .join(" ");
        let mut line = format!(
            "criterion={} name={} status={} elapsed_s={:.3} budget_s={} {}",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.elapsed.as_secs_f64(),
            self.budget.as_secs(),
            values
        );
        if !self.failures.is_empty() {
            line.push_str(&format!(" failures=\"{}\"", self.failures.join("; ")));
        }
        line.trim_end().to_string()
    }
}

/// Collects measurements and failed comparisons for one check.
struct Recorder {
    factor: f64,
    measurements: Vec<(String, f64)>,
    failures: Vec<String>,
}

impl Recorder {
    fn new(options: &ValidationOptions) -> Self {
        Self {
            factor: options.tolerance_factor,
            measurements: Vec::new(),
            failures: Vec::new(),
        }
    }

    fn measure(&mut self, name: &str, value: f64) {
        self.measurements.push((name.to_string(), value));
    }

    /// `|value − target| ≤ tol`.
    fn close(&mut self, name: &str, value: f64, target: f64, tol: f64) {
        self.measure(name, value);
        let err = (value - target).abs();
        if !(err <= tol * self.factor) {
            self.failures.push(format!(
                "{name}: |{value:e} - {target:e}| = {err:e} > {:e}",
                tol * self.factor
            ));
        }
    }

    /// `value ≤ bound`.
    fn at_most(&mut self, name: &str, value: f64, bound: f64) {
        self.measure(name, value);
        let bound = if bound >= 0.0 {
            bound * self.factor
        } else {
            bound
        };
        if !(value <= bound) {
            self.failures.push(format!("{name}: {value:e} > {bound:e}"));
        }
    }

    fn holds(&mut self, name: &str, ok: bool) {
        self.measure(name, if ok { 1.0 } else { 0.0 });
        if !ok || self.factor == 0.0 {
            self.failures.push(format!("{name} does not hold"));
        }
    }

    fn fail(&mut self, msg: String) {
        self.failures.push(msg);
    }
}

fn run(
    id: usize,
    name: &'static str,
    budget_s: u64,
    options: &ValidationOptions,
    body: impl FnOnce(&mut Recorder) -> Result<()>,
) -> CriterionOutcome {
    let start = Instant::now();
    let mut rec = Recorder::new(options);
    if let Err(e) = body(&mut rec) {
        rec.fail(format!("error: {e}"));
    }
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(budget_s);
    if elapsed > budget {
        rec.fail(format!(
            "runtime {:.1}s exceeds budget {budget_s}s",
            elapsed.as_secs_f64()
        ));
    }
    CriterionOutcome {
        id,
        name,
        passed: rec.failures.is_empty(),
        measurements: rec.measurements,
        failures: rec.failures,
        elapsed,
        budget,
    }
}

fn plus_state() -> DensityMatrix {
    DensityMatrix::from_bloch(1.0, 0.0, 0.0).expect("valid Bloch vector")
}

/// Bisection for a sign change of `f` on `[a, b]`.
fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let fa = f(a);
    while b - a > tol {
        let m = 0.5 * (a + b);
        if f(m).signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Criterion 1: The integrated rate vanishes asymptotically and matches its closed
/// form.
pub fn maximality(options: &ValidationOptions) -> CriterionOutcome {
    run(1, "maximality", 1, options, |r| {
        let g = options.gamma;
        let p = DephasingParams::new(g)?;
        let horizon = 40.0 / g;
        let rate = |t: f64| rate_gamma(t, &p).unwrap_or(f64::NAN);
        let total = quadrature(rate, 0.0, horizon, 1e-13)?;
        r.at_most("abs_integral_to_40", total.abs(), 1e-10);
        let grid = TimeGrid::uniform(0.0, 10.0 / g, 1000)?;
        let mut acc = 0.0;
        let mut worst: f64 = 0.0;
        for w in grid.points().windows(2) {
            acc += quadrature(rate, w[0], w[1], 1e-14)?;
            worst = worst.max((acc - big_gamma(w[1], &p)?).abs());
        }
        r.at_most("max_closed_form_vs_quadrature", worst, 1e-8);
        Ok(())
    })
}

/// Criterion 2: Zero crossing of the rate and maximum of its integral.
pub fn figure_one(options: &ValidationOptions) -> CriterionOutcome {
    run(2, "fig1_rate_and_integral", 1, options, |r| {
        let g = options.gamma;
        let p = DephasingParams::new(g)?;
        let root = bisect(
            |t| rate_gamma(t, &p).unwrap_or(f64::NAN),
            0.5 / g,
            2.0 / g,
            1e-12,
        );
        r.close("zero_crossing_gamma_t", g * root, 1.0, 1e-8);
        let expected = (1.0 / (1.0 - 2.0 * (-1.0f64).exp())).ln();
        let peak = big_gamma(root, &p)?;
        r.close("Gamma_max", peak, expected, 1e-6);
        let by_quadrature =
            quadrature(|t| rate_gamma(t, &p).unwrap_or(f64::NAN), 0.0, root, 1e-13)?;
        r.close("Gamma_max_quadrature", by_quadrature, expected, 1e-6);
        // The maximum is global on a fine scan.
        let scan_max = (0..=4000)
            .map(|k| big_gamma(10.0 * k as f64 / 4000.0 / g, &p).unwrap_or(f64::NAN))
            .fold(f64::NEG_INFINITY, f64::max);
        r.at_most("scan_max_minus_peak", scan_max - peak, 1e-12);
        Ok(())
    })
}

/// Criterion 3: Asymptotic rate integrals of the random-unitary example.
pub fn random_unitary_limits(options: &ValidationOptions) -> CriterionOutcome {
    run(3, "random_unitary_limits", 1, options, |r| {
        let g = options.gamma;
        let limits = example_gamma_integrals(g, 40.0 / g)?;
        r.close("Gamma1_inf", limits[0], std::f64::consts::LN_2, 1e-6);
        r.at_most("abs_Gamma2_inf", limits[1].abs(), 1e-6);
        r.at_most("abs_Gamma3_inf", limits[2].abs(), 1e-6);
        let mut late_max = f64::NEG_INFINITY;
        let mut early_min = f64::INFINITY;
        for k in 1..=3000 {
            let t = 30.0 * k as f64 / 3000.0 / g;
            let rates = example_rates(t, g)?;
            let s = rates.rates[1] + rates.rates[2];
            if g * t > 1.0 + 1e-9 {
                late_max = late_max.max(s);
            } else if g * t < 1.0 - 1e-9 {
                early_min = early_min.min(s);
            }
        }
        r.measure("max_gamma2_plus_gamma3_after_1", late_max);
        r.holds("gamma2_plus_gamma3_negative_after_1", late_max < 0.0);
        r.holds("gamma2_plus_gamma3_positive_before_1", early_min > 0.0);
        Ok(())
    })
}

/// Criterion 4: Saturation of M₁ and the degree of the mixture family.
pub fn measure_saturation(options: &ValidationOptions) -> CriterionOutcome {
    run(4, "measure_saturation", 30, options, |r| {
        let g = options.gamma;
        let horizon = 40.0 / g;
        let sx = vec![Witness::pauli(1)];
        let deph = DephasingFamily {
            params: DephasingParams::new(g)?,
        };
        r.close(
            "M1_dephasing",
            measure_mk(&deph, 1, &sx, horizon)?.m_k,
            1.0,
            1e-3,
        );
        r.close(
            "M1_random_unitary",
            measure_mk(&example_family(g), 1, &sx, horizon)?.m_k,
            1.0,
            1e-3,
        );
        let mx = measure_mk(&markov_x_family(g), 1, &default_witnesses(1)?, horizon)?;
        r.close("M1_markov_x", mx.m_k, 0.0, 0.0);
        for (label, rw) in [("0", 0.0), ("0.25", 0.25), ("0.5", 0.5), ("0.75", 0.75)] {
            let params = MixtureParams::new(rw, g)?;
            let m = measure_mk(&mixture_family(params), 1, &sx, horizon)?;
            r.close(&format!("M1_mixture_r{label}"), m.m_k, 1.0, 1e-3);
            let verdict =
                check_max_nonmarkov_conditions(&RatesOf(MixtureFamily { params }), horizon)?;
            r.holds(&format!("max_conditions_mixture_r{label}"), verdict.maximal);
        }
        let markov = nmd_classify(&mixture_family(MixtureParams::new(1.0, g)?), horizon)?;
        r.holds("nmd_mixture_r1_is_0", markov.degree == Some(0));
        Ok(())
    })
}

/// Criterion 5: Closed form, local master equation, Volterra equation, Lindblad rate
/// equation and bipartite embedding agree.
pub fn representation_equivalence(options: &ValidationOptions) -> CriterionOutcome {
    run(5, "representation_equivalence", 10, options, |r| {
        let g = options.gamma;
        let p = DephasingParams::new(g)?;
        let t_end = 10.0 / g;
        let h = 1e-3 / g;
        let rho0 = DensityMatrix::from_bloch(0.6, 0.5, 0.2)?;
        let grid = TimeGrid::uniform(0.0, t_end, 101)?;

        let closed: Vec<CMatrix> = grid
            .points()
            .iter()
            .map(|&t| dephasing_map(t, &p).map(|m| m.apply(rho0.matrix())))
            .collect::<Result<_>>()?;
        let local = integrate_linear(
            |t| local_generator(t, &p).expect("t ≥ 0"),
            rho0.matrix(),
            &grid,
            1e-12,
        )?;
        let volterra = volterra_solve(
            &kernel(&p),
            &dephasing_dissipator(),
            rho0.matrix(),
            h,
            t_end,
        )?;
        let stride = ((t_end / 100.0) / h).round() as usize;
        let volterra: Vec<CMatrix> = (0..grid.len())
            .map(|k| volterra.states[k * stride].clone())
            .collect();
        let model = dephasing_chain_model(g, 2)?;
        let rate_eq = lindblad_rate_solve(&model, &rho0, &[1.0, 0.0, 0.0], &grid)?.system;
        let emb = bipartite_embedding(&model)?;
        let sa0 = emb.initial_state(&rho0)?;
        let bipartite: Vec<CMatrix> = grid
            .points()
            .iter()
            .map(|&t| emb.system_marginal(&emb.generator.exp(t).apply(&sa0)))
            .collect();

        let sup = |a: &[CMatrix], b: &[CMatrix]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| max_abs_diff(x, y))
                .fold(0.0, f64::max)
        };
        let reps: [(&str, &[CMatrix]); 5] = [
            ("closed", &closed),
            ("local", &local),
            ("volterra", &volterra),
            ("rate", &rate_eq),
            ("bipartite", &bipartite),
        ];
        for i in 0..reps.len() {
            for j in i + 1..reps.len() {
                let tol = if reps[i].0 == "volterra" || reps[j].0 == "volterra" {
                    1e-4
                } else {
                    1e-8
                };
                r.at_most(
                    &format!("sup_{}_vs_{}", reps[i].0, reps[j].0),
                    sup(reps[i].1, reps[j].1),
                    tol,
                );
            }
        }
        Ok(())
    })
}

/// Criterion 6: Collisional Monte Carlo reproduces the three-state chain.
pub fn monte_carlo_consistency(options: &ValidationOptions) -> CriterionOutcome {
    run(6, "monte_carlo_consistency", 60, options, |r| {
        let g = options.gamma;
        let n = 100_000;
        let p = DephasingParams::new(g)?;
        let model = dephasing_chain_model(g, 2)?;
        let grid = TimeGrid::uniform(0.25 / g, 5.0 / g, 20)?;
        let ens = simulate_trajectories(
            &model,
            &plus_state(),
            &[1.0, 0.0, 0.0],
            &grid,
            n,
            options.seed,
        )?;
        let mut within = 0;
        let mut worst_z: f64 = 0.0;
        for (k, &t) in grid.points().iter().enumerate() {
            let coh = 2.0 * ens.mean[k][(0, 1)].re;
            let se = 2.0 * ens.stderr[k][(0, 1)].re;
            let z = (coh - coherence_factor(t, &p)?).abs() / se;
            worst_z = worst_z.max(z);
            if z <= 3.0 * options.tolerance_factor {
                within += 1;
            }
        }
        r.measure("checkpoints_within_3se", within as f64);
        r.measure("worst_z_coherence", worst_z);
        r.holds("at_least_19_of_20", within >= 19);

        let mut worst_count_z: f64 = 0.0;
        let nf = n as f64;
        for &t in &[0.5 / g, 1.0 / g, 2.0 / g, 4.0 / g] {
            let s = g * t;
            let expected = [(-s).exp(), s * (-s).exp(), 1.0 - (1.0 + s) * (-s).exp()];
            for (jumps, &pe) in expected.iter().enumerate() {
                let observed = ens
                    .records
                    .iter()
                    .filter(|rec| rec.jumps_by(t) == jumps)
                    .count() as f64
                    / nf;
                let sigma = (pe * (1.0 - pe) / nf).sqrt();
                worst_count_z = worst_count_z.max((observed - pe).abs() / sigma);
            }
        }
        r.at_most("worst_z_jump_counts", worst_count_z, 3.0);
        Ok(())
    })
}

/// `c_n` at `x = γt` from the Poisson-sum form
/// `e^{−2x} + P(N_x ≥ n) − e^{−x}Σ_{k<n}(−1)^{n−1−k}x^k/k! − (−1)ⁿe^{−2x}`.
fn coherence_cn_series(x: f64, n: u32) -> f64 {
    let mut below = 0.0;
    let mut alternating = 0.0;
    let mut term = (-x).exp();
    for k in 0..n {
        if k > 0 {
            term *= x / k as f64;
        }
        below += term;
        let sign = if (n - 1 - k).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        alternating += sign * term;
    }
    let parity = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    (-2.0 * x).exp() + (1.0 - below) - alternating - parity * (-2.0 * x).exp()
}

/// Criterion 7: Recoherence of the n-step chains and their Markovian limit.
pub fn recoherence(options: &ValidationOptions) -> CriterionOutcome {
    run(7, "recoherence", 10, options, |r| {
        let g = options.gamma;
        for n in [2, 10] {
            let p = RecoherenceParams::new(g, n)?;
            r.close(
                &format!("c{n}_at_40"),
                coherence_cn(40.0 / g, &p)?,
                1.0,
                1e-6,
            );
        }
        // Twenty collisions have not all happened by γt = 40 with probability
        // P(Poisson(40) < 20) ≈ 2.4e-4, so c₂₀ is compared with its series
        // value there and with 1 at γt = 80.
        let p20 = RecoherenceParams::new(g, 20)?;
        let c20 = coherence_cn(40.0 / g, &p20)?;
        r.close("c20_at_40", c20, coherence_cn_series(40.0, 20), 1e-8);
        r.measure("c20_at_40_deficit", 1.0 - c20);
        r.close("c20_at_80", coherence_cn(80.0 / g, &p20)?, 1.0, 1e-6);
        let p10 = RecoherenceParams::new(g, 10)?;
        let min10 = (0..=400)
            .map(|k| coherence_cn(15.0 * k as f64 / 400.0 / g, &p10).unwrap_or(f64::NAN))
            .fold(f64::INFINITY, f64::min);
        r.at_most("min_c10", min10, 0.05);
        let p200 = RecoherenceParams::new(g, 200)?;
        let mut worst: f64 = 0.0;
        for k in 0..=300 {
            let t = 3.0 * k as f64 / 300.0 / g;
            worst = worst.max((coherence_cn(t, &p200)? - (-2.0 * g * t).exp()).abs());
        }
        r.at_most("sup_c200_vs_exp", worst, 0.01);
        Ok(())
    })
}

/// Criterion 8: Laplace-domain memory kernels of the chain probabilities.
pub fn kernel_identity(options: &ValidationOptions) -> CriterionOutcome {
    run(8, "kernel_identity", 1, options, |r| {
        let g = options.gamma;
        let mut worst_rel: f64 = 0.0;
        let mut worst_sum: f64 = 0.0;
        for j in 1..=20 {
            let z = 0.25 * j as f64 * g;
            let k = memory_kernels_laplace(&dephasing_probs_laplace(z, g), z)?;
            let expected = 2.0 * z * z * g / (z * z + g * g);
            worst_rel = worst_rel.max(((k.k[3] - expected) / expected).abs());
            let scale = k.k.iter().map(|x| x.abs()).fold(0.0, f64::max);
            worst_sum = worst_sum.max(k.sum().abs() / scale);
        }
        r.at_most("max_rel_err_k3", worst_rel, 1e-10);
        r.at_most("max_rel_kernel_sum", worst_sum, 1e-12);
        Ok(())
    })
}

fn random_model(stream: &mut RngStream) -> Result<HybridModel> {
    let n = 2 + (stream.uniform() * 3.0) as usize;
    let mut model = HybridModel::new(n, 2)?;
    let herm = |s: &mut RngStream| {
        let (a, b, cc, d) = (s.gaussian(), s.gaussian(), s.gaussian(), s.gaussian());
        CMatrix::from_row_slice(
            2,
            2,
            &[
                c(a),
                nalgebra::Complex::new(b, cc),
                nalgebra::Complex::new(b, -cc),
                c(d),
            ],
        )
    };
    for to in 0..n {
        for from in 0..n {
            let u = (herm(stream) * crate::linops::I).exp();
            model = model
                .with_rate(to, from, 2.0 * stream.uniform())?
                .with_collision(to, from, conjugation_superop(&u)?)?;
        }
        model = model.with_hamiltonian(to, HermitianOperator::new(herm(stream))?)?;
    }
    Ok(model)
}

/// Criterion 9: Environment dynamics ignore the system state.
pub fn spectator_property(options: &ValidationOptions) -> CriterionOutcome {
    run(9, "spectator_property", 10, options, |r| {
        let g = options.gamma;
        let grid = TimeGrid::uniform(0.0, 5.0 / g, 26)?;
        let mut worst: f64 = 0.0;
        for i in 0..20 {
            let mut stream = RngStream::new(options.seed, 1_000_000 + i);
            let model = random_model(&mut stream)?;
            let n = model.n_states();
            let mut p0: Vec<f64> = (0..n).map(|_| stream.uniform() + 0.01).collect();
            let total: f64 = p0.iter().sum();
            p0.iter_mut().for_each(|x| *x /= total);
            let last = p0[..n - 1].iter().sum::<f64>();
            p0[n - 1] = 1.0 - last;
            let a = plus_state();
            let b = DensityMatrix::from_bloch(0.0, -0.3, -0.9)?;
            worst = worst.max(spectator_check(&model, &a, &b, &p0, &grid)?);
        }
        r.at_most("hybrid_max_population_difference", worst, 1e-10);

        let ou = OUParams::new(g, g)?;
        let h = HermitianOperator::new(crate::linops::sigma(1) * c(0.3 * g))?;
        let dh = HermitianOperator::new(crate::linops::sigma(3) * c(0.5))?;
        let model = NoiseHamiltonianModel::new(h, dh, ou, InitialNoise::Stationary)?;
        let eta = EtaGrid::covering(&ou, 6.0, 80);
        let fgrid = TimeGrid::uniform(0.0, 2.0 / g, 5)?;
        let dt = stable_step(&model, &eta);
        let fa = fokker_planck_grid_solve(&model, &plus_state(), &eta, &fgrid, dt)?;
        let fb =
            fokker_planck_grid_solve(&model, &DensityMatrix::maximally_mixed(2), &eta, &fgrid, dt)?;
        let diff = fa
            .marginals
            .iter()
            .zip(&fb.marginals)
            .flat_map(|(x, y)| x.iter().zip(y).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        r.at_most("fokker_planck_max_marginal_difference", diff, 1e-10);
        Ok(())
    })
}

/// `exp(−½∫₀ᵗ∫₀ᵗ C(t₁ − t₂)dt₁dt₂)` by nested quadrature.
fn cumulant_oracle(t: f64, ou: &OUParams) -> Result<f64> {
    if t == 0.0 {
        return Ok(1.0);
    }
    let inner = |t1: f64| {
        let left = quadrature(|t2| ou.correlation(t1 - t2), 0.0, t1, 1e-13).unwrap_or(f64::NAN);
        let right = quadrature(|t2| ou.correlation(t1 - t2), t1, t, 1e-13).unwrap_or(f64::NAN);
        left + right
    };
    let phi = quadrature(inner, 0.0, t, 1e-10)?;
    Ok((-0.5 * phi).exp())
}

/// Criterion 10: Stationary OU statistics and Gaussian dephasing.
pub fn ou_statistics(options: &ValidationOptions) -> CriterionOutcome {
    run(10, "ou_statistics", 90, options, |r| {
        let g = options.gamma;
        let ou = OUParams::new(g, g)?;
        let n = 100_000;
        let dt = 0.25 / g;
        let lag = 4;
        let mut sum_var = 0.0;
        let mut sum_cov = 0.0;
        for i in 0..n {
            let mut s = RngStream::new(options.seed, 2_000_000 + i as u64);
            let path = ou_path(&ou, InitialNoise::Stationary, dt, 2.0 / g, &mut s)?;
            sum_var += path.values[2] * path.values[2];
            sum_cov += path.values[2] * path.values[2 + lag];
        }
        let nf = n as f64;
        let v = ou.stationary_variance();
        let cexp = ou.correlation(1.0 / g);
        let var_hat = sum_var / nf;
        let cov_hat = sum_cov / nf;
        r.measure("variance", var_hat);
        r.at_most(
            "z_variance",
            (var_hat - v).abs() / (2.0 * v * v / nf).sqrt(),
            3.0,
        );
        r.measure("lag_correlation", cov_hat);
        r.at_most(
            "z_lag_correlation",
            (cov_hat - cexp).abs() / ((v * v + cexp * cexp) / nf).sqrt(),
            3.0,
        );

        let model = NoiseHamiltonianModel::pure_dephasing(ou);
        let grid = TimeGrid::uniform(0.5 / g, 5.0 / g, 10)?;
        let ens = ensemble_average(&model, &plus_state(), &grid, n, options.seed)?;
        let mut worst: f64 = 0.0;
        for (k, &t) in grid.points().iter().enumerate() {
            let coh = 2.0 * ens.mean[k][(0, 1)].re;
            let se = 2.0 * ens.stderr[k][(0, 1)].re;
            worst = worst.max((coh - cumulant_oracle(t, &ou)?).abs() / se);
        }
        r.at_most("worst_z_coherence", worst, 3.0);
        Ok(())
    })
}

/// Criterion 11: Divisibility breaks where coherence grows while every map stays CP.
pub fn divisibility(options: &ValidationOptions) -> CriterionOutcome {
    run(11, "divisibility_scans", 10, options, |r| {
        let g = options.gamma;
        let p = DephasingParams::new(g)?;
        let fam = DephasingFamily { params: p };
        let times = scan_times(10.0 / g, 41);
        let scan = divisibility_scan(&fam, 2, &times)?;
        let mut growth_min = f64::INFINITY;
        let mut growth_max = f64::NEG_INFINITY;
        for cell in &scan.cells {
            let f = (big_gamma(cell.s, &p)? - big_gamma(cell.t, &p)?).exp();
            if f > 1.0 + 1e-3 {
                let m = cell.indicator.unwrap_or(f64::NAN);
                growth_min = growth_min.min(m);
                growth_max = growth_max.max(m);
            }
        }
        r.at_most("min_choi_growth_region", growth_min, -1e-4);
        r.at_most("max_choi_growth_region", growth_max, -1e-4);
        let lambda_min = (0..=1000)
            .map(|k| {
                dephasing_map(10.0 * k as f64 / 1000.0 / g, &p)
                    .map(|m| choi_of(&m).min_eigenvalue())
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        r.measure("min_choi_lambda_t", lambda_min);
        r.holds("lambda_t_cp", lambda_min >= -1e-10);
        Ok(())
    })
}

pub const CRITERIA: usize = 11;

/// Runs check `id` (1-based).
pub fn run_criterion(id: usize, options: &ValidationOptions) -> Option<CriterionOutcome> {
    Some(match id {
        1 => maximality(options),
        2 => figure_one(options),
        3 => random_unitary_limits(options),
        4 => measure_saturation(options),
        5 => representation_equivalence(options),
        6 => monte_carlo_consistency(options),
        7 => recoherence(options),
        8 => kernel_identity(options),
        9 => spectator_property(options),
        10 => ou_statistics(options),
        11 => divisibility(options),
        _ => return None,
    })
}

pub fn run_all(options: &ValidationOptions) -> Vec<CriterionOutcome> {
    (1..=CRITERIA)
        .filter_map(|id| run_criterion(id, options))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_criteria_pass() {
        let opts = ValidationOptions::default();
        for id in [1, 2, 3, 7, 8, 11] {
            let o = run_criterion(id, &opts).unwrap();
            assert!(o.passed, "{}", o.summary_line());
        }
    }

    #[test]
    fn zero_tolerance_fails() {
        let opts = ValidationOptions {
            tolerance_factor: 0.0,
            ..Default::default()
        };
        for id in [1, 3, 8] {
            assert!(!run_criterion(id, &opts).unwrap().passed);
        }
    }

    #[test]
    fn summary_lines_are_single_lines() {
        let o = kernel_identity(&ValidationOptions::default());
        let line = o.summary_line();
        assert!(!line.contains('\n'));
        assert!(line.starts_with("criterion=8 name=kernel_identity status=PASS"));
        assert!(run_criterion(12, &ValidationOptions::default()).is_none());
    }

    #[test]
    fn gaussian_oracle_matches_closed_form() {
        let ou = OUParams::new(1.0, 1.0).unwrap();
        for t in [0.5, 2.0, 5.0] {
            let o = cumulant_oracle(t, &ou).unwrap();
            let e = (-0.5 * ou.integrated_variance(t)).exp();
            assert!((o - e).abs() < 1e-9, "{o} {e}");
        }
    }

    #[test]
    fn poisson_series_matches_quadrature() {
        for n in [2, 4, 10, 20] {
            let p = RecoherenceParams::new(1.0, n).unwrap();
            for x in [0.0, 0.5, 3.0, 12.0, 40.0] {
                let q = coherence_cn(x, &p).unwrap();
                assert!((q - coherence_cn_series(x, n)).abs() < 1e-9, "n={n} x={x}");
            }
        }
    }
}
