//! Acceptance suite. Every criterion is checked against oracles written
//! here, independent of the library's own closed forms where possible, and
//! prints one `PASS`/`FAIL` line.

use std::time::Instant;

use nalgebra::Complex;
use nmq_core::dephasing::{
    big_gamma, coherence_cn, dephasing_dissipator, dephasing_map, kernel, local_generator,
    rate_gamma, DephasingParams, RecoherenceParams,
};
use nmq_core::gaussian_noise::{
    ensemble_average, fokker_planck_grid_solve, ou_path, stable_step, EtaGrid, InitialNoise,
    NoiseHamiltonianModel, OUParams,
};
use nmq_core::hybrid::{
    bipartite_embedding, classical_master_solve, dephasing_chain_model, lindblad_rate_solve,
    simulate_trajectories, HybridModel,
};
use nmq_core::linops::{c, choi_of, conjugation_superop, pauli, Superoperator, I};
use nmq_core::measures::{
    default_witnesses, divisibility_scan, example_family, markov_x_family, measure_mk,
    mixture_family, nmd_classify, scan_times, DephasingFamily, Witness,
};
use nmq_core::numerics::{integrate_linear, volterra_solve, RngStream, TimeGrid};
use nmq_core::random_unitary::{
    check_max_nonmarkov_conditions, example_gamma_integrals, example_rates, memory_kernels_laplace,
    MixtureFamily, MixtureParams, RatesOf,
};
use nmq_core::validation::{run_all, ValidationOptions};
use nmq_core::{CMatrix, DensityMatrix, HermitianOperator};

const GAMMA: f64 = 1.0;
const SEED: u64 = 20_240_601;

struct Criterion {
    id: usize,
    name: &'static str,
    start: Instant,
    budget_s: f64,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Criterion {
    fn new(id: usize, name: &'static str, budget_s: f64) -> Self {
        Self {
            id,
            name,
            start: Instant::now(),
            budget_s,
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn check(&mut self, label: &str, value: f64, ok: bool) {
        self.notes.push(format!("{label}={value:.3e}"));
        if !ok {
            self.failures.push(label.to_string());
        }
    }

    fn note(&mut self, label: &str, value: f64) {
        self.notes.push(format!("{label}={value:.3e}"));
    }

    fn finish(self) -> bool {
        let elapsed = self.start.elapsed().as_secs_f64();
        let passed = self.failures.is_empty();
        println!(
            "ACCEPTANCE {:>2} {:<28} {} ({:.2}s, budget {}s) {}",
            self.id,
            self.name,
            if passed { "PASS" } else { "FAIL" },
            elapsed,
            self.budget_s,
            self.notes.join(" ")
        );
        if !passed {
            println!("    failed checks: {}", self.failures.join(", "));
        }
        passed
    }
}

/// `2γ(1 − γt)/(e^{γt} − 2γt)`.
fn rate_oracle(t: f64) -> f64 {
    let x = GAMMA * t;
    2.0 * GAMMA * (1.0 - x) / (x.exp() - 2.0 * x)
}

/// `1 − 2γt e^{−γt}`.
fn coherence_oracle(t: f64) -> f64 {
    1.0 - 2.0 * GAMMA * t * (-GAMMA * t).exp()
}

/// Composite Simpson rule with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn criterion_01_maximality() -> bool {
    let mut cr = Criterion::new(1, "maximality", 1.0);
    let p = DephasingParams::new(GAMMA).unwrap();
    let total = simpson(rate_oracle, 0.0, 40.0 / GAMMA, 400_000);
    cr.check("abs_integral", total.abs(), total.abs() < 1e-10);
    let grid: Vec<f64> = (0..1000).map(|k| 10.0 * k as f64 / 999.0).collect();
    let mut acc = 0.0;
    let mut worst: f64 = 0.0;
    for w in grid.windows(2) {
        acc += simpson(rate_oracle, w[0], w[1], 20);
        worst = worst.max((acc - big_gamma(w[1], &p).unwrap()).abs());
    }
    cr.check("closed_vs_quadrature", worst, worst <= 1e-8);
    let library: f64 = simpson(|t| rate_gamma(t, &p).unwrap(), 0.0, 40.0, 400_000);
    cr.check(
        "library_rate_integral",
        library.abs(),
        library.abs() < 1e-10,
    );
    cr.finish()
}

fn criterion_02_figure_one() -> bool {
    let mut cr = Criterion::new(2, "fig1_rate_and_integral", 1.0);
    let p = DephasingParams::new(GAMMA).unwrap();
    let (mut a, mut b) = (0.3, 3.0);
    while b - a > 1e-13 {
        let m = 0.5 * (a + b);
        if rate_gamma(m, &p).unwrap() > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let root = 0.5 * (a + b);
    cr.check(
        "zero_crossing_err",
        (root - 1.0).abs(),
        (root - 1.0).abs() <= 1e-8,
    );
    let expected = (1.0 / (1.0 - 2.0 / std::f64::consts::E)).ln();
    cr.check(
        "quoted_value_err",
        (expected - 1.33089).abs(),
        (expected - 1.33089).abs() < 5e-6,
    );
    let peak = big_gamma(root, &p).unwrap();
    cr.check(
        "closed_form_peak_err",
        (peak - expected).abs(),
        (peak - expected).abs() <= 1e-6,
    );
    let quad = simpson(rate_oracle, 0.0, root, 20_000);
    cr.check(
        "quadrature_peak_err",
        (quad - expected).abs(),
        (quad - expected).abs() <= 1e-6,
    );
    let global = (0..=20_000)
        .map(|k| big_gamma(k as f64 * 1e-3, &p).unwrap())
        .fold(f64::MIN, f64::max);
    cr.check("global_max_excess", global - peak, global <= peak + 1e-12);
    cr.finish()
}

/// Weights `p₀ … p₃` of the random-unitary example.
fn example_weights(t: f64) -> [f64; 4] {
    let x = GAMMA * t;
    let e = (-x).exp();
    [
        0.75 + 0.25 * e * (1.0 - 2.0 * x),
        0.25 * (1.0 - e),
        0.0,
        0.5 * x * e,
    ]
}

/// `γ_α = ½ Σ_β H_αβ d ln λ_β` with `λ = H·p`, by central differences.
fn hadamard_rates(t: f64) -> [f64; 3] {
    let h = [
        [1.0, 1.0, 1.0, 1.0],
        [1.0, 1.0, -1.0, -1.0],
        [1.0, -1.0, 1.0, -1.0],
        [1.0, -1.0, -1.0, 1.0],
    ];
    let lam = |t: f64| {
        let p = example_weights(t);
        let mut l = [0.0; 4];
        for a in 0..4 {
            l[a] = (0..4).map(|b| h[a][b] * p[b]).sum::<f64>();
        }
        l
    };
    let d = 1e-5;
    let (lp, lm) = (lam(t + d), lam(t - d));
    let dlog: Vec<f64> = (0..4)
        .map(|b| (lp[b].ln() - lm[b].ln()) / (2.0 * d))
        .collect();
    let mut g = [0.0; 3];
    for a in 1..4 {
        g[a - 1] = 0.5 * (0..4).map(|b| h[a][b] * dlog[b]).sum::<f64>();
    }
    g
}

fn criterion_03_random_unitary_limits() -> bool {
    let mut cr = Criterion::new(3, "random_unitary_limits", 1.0);
    let lim = example_gamma_integrals(GAMMA, 40.0).unwrap();
    let e1 = (lim[0] - std::f64::consts::LN_2).abs();
    cr.check("Gamma1_err", e1, e1 <= 1e-6);
    cr.check("abs_Gamma2", lim[1].abs(), lim[1].abs() <= 1e-6);
    cr.check("abs_Gamma3", lim[2].abs(), lim[2].abs() <= 1e-6);
    // Independent asymptotics: Γ_α(∞) = −½ Σ_β H_αβ ln λ_β(∞) with
    // λ(∞) = (1, 1, ½, ½).
    let h = [
        [1.0, 1.0, 1.0, 1.0],
        [1.0, 1.0, -1.0, -1.0],
        [1.0, -1.0, 1.0, -1.0],
        [1.0, -1.0, -1.0, 1.0],
    ];
    let ln_lambda = [0.0, 0.0, 0.5f64.ln(), 0.5f64.ln()];
    let limit_oracle: Vec<f64> = (1..4)
        .map(|a| 0.5 * (0..4).map(|b| h[a][b] * ln_lambda[b]).sum::<f64>())
        .collect();
    let oracle_err = (0..3)
        .map(|k| (lim[k] - limit_oracle[k]).abs())
        .fold(0.0, f64::max);
    cr.check("limit_oracle_err", oracle_err, oracle_err <= 1e-6);
    let mut rate_err: f64 = 0.0;
    let mut late_max = f64::MIN;
    let mut early_min = f64::MAX;
    for k in 1..600 {
        let t = 0.05 * k as f64;
        let lib = example_rates(t, GAMMA).unwrap().rates;
        let ora = hadamard_rates(t);
        for a in 0..3 {
            rate_err = rate_err.max((lib[a] - ora[a]).abs());
        }
        // The oracle's finite differences lose the sign once the rates fall
        // below ~1e-9, so past γt = 15 the sign is read from the library.
        let s = if t <= 15.0 {
            ora[1] + ora[2]
        } else {
            lib[1] + lib[2]
        };
        if t > 1.0 + 1e-9 {
            late_max = late_max.max(s);
        } else if t < 1.0 - 1e-9 {
            early_min = early_min.min(s);
        }
    }
    cr.check("rates_vs_hadamard_oracle", rate_err, rate_err < 1e-7);
    cr.check("max_g2_plus_g3_after_1", late_max, late_max < 0.0);
    cr.check("min_g2_plus_g3_before_1", early_min, early_min > 0.0);
    cr.finish()
}

fn criterion_04_measure_saturation() -> bool {
    let mut cr = Criterion::new(4, "measure_saturation", 30.0);
    let horizon = 40.0;
    let sx = vec![Witness::pauli(1)];
    let deph = DephasingFamily {
        params: DephasingParams::new(GAMMA).unwrap(),
    };
    let m = measure_mk(&deph, 1, &sx, horizon).unwrap();
    cr.check(
        "M1_dephasing_err",
        (m.m_k - 1.0).abs(),
        (m.m_k - 1.0).abs() <= 1e-3,
    );
    // ‖Λ_t(σ_x)‖₁ = 2|1 − 2te^{−t}| falls by 4/e and then recovers it.
    let lobe = 4.0 / std::f64::consts::E;
    let w = &m.witnesses[0];
    let lobe_err = (w.n_plus - lobe).abs().max((w.n_minus - lobe).abs());
    cr.check("dephasing_lobe_err", lobe_err, lobe_err < 1e-5);
    let m = measure_mk(&example_family(GAMMA), 1, &sx, horizon).unwrap();
    cr.check(
        "M1_random_unitary_err",
        (m.m_k - 1.0).abs(),
        (m.m_k - 1.0).abs() <= 1e-3,
    );
    let m = measure_mk(
        &markov_x_family(GAMMA),
        1,
        &default_witnesses(1).unwrap(),
        horizon,
    )
    .unwrap();
    cr.check("M1_markov_x", m.m_k, m.m_k == 0.0);
    for r in [0.0, 0.25, 0.5, 0.75] {
        let params = MixtureParams::new(r, GAMMA).unwrap();
        let m = measure_mk(&mixture_family(params), 1, &sx, horizon).unwrap();
        cr.check(
            &format!("M1_mixture_{r}_err"),
            (m.m_k - 1.0).abs(),
            (m.m_k - 1.0).abs() <= 1e-3,
        );
        let v =
            check_max_nonmarkov_conditions(&RatesOf(MixtureFamily { params }), horizon).unwrap();
        cr.check(&format!("maximal_{r}"), v.min_rate_sum, v.maximal);
    }
    let v = nmd_classify(
        &mixture_family(MixtureParams::new(1.0, GAMMA).unwrap()),
        horizon,
    )
    .unwrap();
    cr.check(
        "nmd_r1",
        v.degree.map_or(f64::NAN, |d| d as f64),
        v.degree == Some(0),
    );
    cr.finish()
}

/// RK4 on the coherence equation `ċ = −γ(t)c`.
fn rk4_coherence(t_end: f64, steps: usize) -> Vec<f64> {
    let h = t_end / steps as f64;
    let mut y = 1.0;
    let mut out = vec![y];
    for k in 0..steps {
        let t = k as f64 * h;
        let k1 = -rate_oracle(t) * y;
        let k2 = -rate_oracle(t + 0.5 * h) * (y + 0.5 * h * k1);
        let k3 = -rate_oracle(t + 0.5 * h) * (y + 0.5 * h * k2);
        let k4 = -rate_oracle(t + h) * (y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.push(y);
    }
    out
}

fn criterion_05_representation_equivalence() -> bool {
    let mut cr = Criterion::new(5, "representation_equivalence", 10.0);
    let p = DephasingParams::new(GAMMA).unwrap();
    let rho0 = DensityMatrix::from_bloch(0.3, -0.6, 0.4).unwrap();
    let r = rho0.matrix().clone();
    let grid = TimeGrid::uniform(0.0, 10.0, 201).unwrap();
    let times = grid.points().to_vec();
    let oracle: Vec<CMatrix> = times
        .iter()
        .map(|&t| {
            let f = c(coherence_oracle(t));
            CMatrix::from_row_slice(2, 2, &[r[(0, 0)], r[(0, 1)] * f, r[(1, 0)] * f, r[(1, 1)]])
        })
        .collect();
    let rk = rk4_coherence(10.0, 20_000);
    let rk_states: Vec<CMatrix> = (0..times.len())
        .map(|k| {
            let f = c(rk[k * 100]);
            CMatrix::from_row_slice(2, 2, &[r[(0, 0)], r[(0, 1)] * f, r[(1, 0)] * f, r[(1, 1)]])
        })
        .collect();

    let closed: Vec<CMatrix> = times
        .iter()
        .map(|&t| dephasing_map(t, &p).unwrap().apply(&r))
        .collect();
    let local = integrate_linear(|t| local_generator(t, &p).unwrap(), &r, &grid, 1e-12).unwrap();
    let vol = volterra_solve(&kernel(&p), &dephasing_dissipator(), &r, 1e-3, 10.0).unwrap();
    let volterra: Vec<CMatrix> = (0..times.len())
        .map(|k| vol.states[k * 50].clone())
        .collect();
    let model = dephasing_chain_model(GAMMA, 2).unwrap();
    let rate = lindblad_rate_solve(&model, &rho0, &[1.0, 0.0, 0.0], &grid)
        .unwrap()
        .system;
    let emb = bipartite_embedding(&model).unwrap();
    let sa0 = emb.initial_state(&rho0).unwrap();
    let bip: Vec<CMatrix> = times
        .iter()
        .map(|&t| emb.system_marginal(&emb.generator.exp(t).apply(&sa0)))
        .collect();

    let sup = |a: &[CMatrix], b: &[CMatrix]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).iter().map(|z| z.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    };
    let rk_err = sup(&rk_states, &oracle);
    cr.check("rk4_oracle_self_check", rk_err, rk_err < 1e-10);
    let reps: [(&str, &Vec<CMatrix>, f64); 6] = [
        ("oracle", &oracle, 1e-8),
        ("closed", &closed, 1e-8),
        ("local", &local, 1e-8),
        ("volterra", &volterra, 1e-4),
        ("rate", &rate, 1e-8),
        ("bipartite", &bip, 1e-8),
    ];
    for i in 0..reps.len() {
        for j in i + 1..reps.len() {
            let tol = reps[i].2.max(reps[j].2);
            let e = sup(reps[i].1, reps[j].1);
            cr.check(&format!("{}_vs_{}", reps[i].0, reps[j].0), e, e <= tol);
        }
    }
    cr.finish()
}

fn criterion_06_monte_carlo() -> bool {
    let mut cr = Criterion::new(6, "monte_carlo_consistency", 60.0);
    let n = 100_000;
    let model = dephasing_chain_model(GAMMA, 2).unwrap();
    let plus = DensityMatrix::from_bloch(1.0, 0.0, 0.0).unwrap();
    let grid = TimeGrid::uniform(0.25, 5.0, 20).unwrap();
    let ens = simulate_trajectories(&model, &plus, &[1.0, 0.0, 0.0], &grid, n, SEED).unwrap();
    let mut within = 0;
    for (k, &t) in grid.points().iter().enumerate() {
        // Recompute the estimator from the per-trajectory records: the
        // coherence of a trajectory is (−1)^jumps.
        let values: Vec<f64> = ens
            .records
            .iter()
            .map(|rec| if rec.jumps_by(t) % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        let lib = 2.0 * ens.mean[k][(0, 1)].re;
        if (lib - mean).abs() > 1e-12 {
            cr.failures
                .push(format!("library mean differs from record mean at t={t}"));
        }
        if (mean - coherence_oracle(t)).abs() <= 3.0 * se {
            within += 1;
        }
    }
    cr.check("checkpoints_within_3se", within as f64, within >= 19);
    let mut worst: f64 = 0.0;
    for &t in &[0.5f64, 1.0, 2.0, 4.0] {
        let e = (-t).exp();
        for (j, pe) in [e, t * e, 1.0 - (1.0 + t) * e].into_iter().enumerate() {
            let obs = ens.records.iter().filter(|r| r.jumps_by(t) == j).count() as f64 / n as f64;
            worst = worst.max((obs - pe).abs() / (pe * (1.0 - pe) / n as f64).sqrt());
        }
    }
    cr.check("worst_jump_count_z", worst, worst <= 3.0);
    cr.finish()
}

/// `c_n(γt)` from Poisson sums, evaluated with exact integration by parts of
/// the Erlang convolution.
fn cn_oracle(x: f64, n: u32) -> f64 {
    let mut terms = Vec::with_capacity(n as usize);
    let mut term = (-x).exp();
    for k in 0..n {
        if k > 0 {
            term *= x / k as f64;
        }
        terms.push(term);
    }
    let arrived = 1.0 - terms.iter().sum::<f64>();
    let conv: f64 = terms
        .iter()
        .enumerate()
        .map(|(k, t)| {
            if (n as usize - 1 - k).is_multiple_of(2) {
                *t
            } else {
                -*t
            }
        })
        .sum::<f64>()
        + if n.is_multiple_of(2) { 1.0 } else { -1.0 } * (-2.0 * x).exp();
    (-2.0 * x).exp() + arrived - conv
}

fn criterion_07_recoherence() -> bool {
    let mut cr = Criterion::new(7, "recoherence", 10.0);
    for n in [2u32, 10, 20] {
        let p = RecoherenceParams::new(GAMMA, n).unwrap();
        let lib = coherence_cn(40.0, &p).unwrap();
        let ora = cn_oracle(40.0, n);
        cr.check(
            &format!("c{n}_vs_oracle"),
            (lib - ora).abs(),
            (lib - ora).abs() < 1e-8,
        );
        if n < 20 {
            cr.check(
                &format!("c{n}_at_40_err"),
                (lib - 1.0).abs(),
                (lib - 1.0).abs() <= 1e-6,
            );
        } else {
            // Fewer than twenty collisions by γt = 40 has probability
            // P(Poisson(40) < 20), so c₂₀(40) sits that far below 1 and
            // reaches 1 within 1e-6 only later.
            cr.note("c20_at_40_deficit", 1.0 - lib);
            let late = coherence_cn(80.0, &p).unwrap();
            cr.check(
                "c20_at_80_err",
                (late - 1.0).abs(),
                (late - 1.0).abs() <= 1e-6,
            );
        }
    }
    let c2 = RecoherenceParams::new(GAMMA, 2).unwrap();
    let c2_err = (0..=100)
        .map(|k| {
            (coherence_cn(0.1 * k as f64, &c2).unwrap() - coherence_oracle(0.1 * k as f64)).abs()
        })
        .fold(0.0, f64::max);
    cr.check("c2_equals_dephasing", c2_err, c2_err < 1e-10);
    let p10 = RecoherenceParams::new(GAMMA, 10).unwrap();
    let min10 = (0..=1500)
        .map(|k| coherence_cn(0.01 * k as f64, &p10).unwrap())
        .fold(f64::MAX, f64::min);
    let min10_oracle = (0..=1500)
        .map(|k| cn_oracle(0.01 * k as f64, 10))
        .fold(f64::MAX, f64::min);
    cr.check(
        "min_c10",
        min10,
        min10 < 0.05 && (min10 - min10_oracle).abs() < 1e-8,
    );
    let p200 = RecoherenceParams::new(GAMMA, 200).unwrap();
    let sup = (0..=300)
        .map(|k| {
            let t = 0.01 * k as f64;
            (coherence_cn(t, &p200).unwrap() - (-2.0 * t).exp()).abs()
        })
        .fold(0.0, f64::max);
    cr.check("sup_c200_vs_markov", sup, sup <= 0.01);
    cr.finish()
}

fn criterion_08_kernel_identity() -> bool {
    let mut cr = Criterion::new(8, "kernel_identity", 1.0);
    let mut worst_rel: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    for j in 0..20 {
        let z = 0.05 * 1.4f64.powi(j);
        // p₃(z) = γ/(z+γ)², p₀(z) = 1/z − p₃(z).
        let p3 = GAMMA / ((z + GAMMA) * (z + GAMMA));
        let pz = [1.0 / z - p3, 0.0, 0.0, p3];
        let k = memory_kernels_laplace(&pz, z).unwrap();
        let target = 2.0 * z * z * GAMMA / (z * z + GAMMA * GAMMA);
        // Direct: λ₁ = λ₂ = 1/z − 2p₃, λ₀ = λ₃ = 1/z, so k₃ = −μ₁.
        let lambda1 = 1.0 / z - 2.0 * p3;
        let direct = -(z * lambda1 - 1.0) / lambda1;
        worst_rel = worst_rel
            .max(((k.k[3] - target) / target).abs())
            .max(((direct - target) / target).abs());
        let scale = k.k.iter().map(|x| x.abs()).fold(0.0, f64::max);
        worst_sum = worst_sum.max(k.sum().abs() / scale);
    }
    cr.check("max_rel_err_k3", worst_rel, worst_rel <= 1e-10);
    cr.check("max_rel_kernel_sum", worst_sum, worst_sum <= 1e-12);
    cr.finish()
}

fn random_hermitian(s: &mut RngStream) -> CMatrix {
    let (a, b, x, d) = (s.gaussian(), s.gaussian(), s.gaussian(), s.gaussian());
    CMatrix::from_row_slice(2, 2, &[c(a), Complex::new(b, x), Complex::new(b, -x), c(d)])
}

fn criterion_09_spectator() -> bool {
    let mut cr = Criterion::new(9, "spectator_property", 10.0);
    let grid = TimeGrid::uniform(0.0, 4.0, 21).unwrap();
    let a = DensityMatrix::from_bloch(0.0, 0.0, 1.0).unwrap();
    let b = DensityMatrix::from_bloch(0.7, 0.7, 0.0).unwrap();
    let mut worst: f64 = 0.0;
    for case in 0..25u64 {
        let mut s = RngStream::new(SEED, 77 + case);
        let n = 2 + (case as usize % 4);
        let mut model = HybridModel::new(n, 2).unwrap();
        for to in 0..n {
            for from in 0..n {
                if to == from {
                    continue;
                }
                let u = (random_hermitian(&mut s) * I).exp();
                model = model
                    .with_rate(to, from, 3.0 * s.uniform())
                    .unwrap()
                    .with_collision(to, from, conjugation_superop(&u).unwrap())
                    .unwrap();
            }
            model = model
                .with_hamiltonian(
                    to,
                    HermitianOperator::new(random_hermitian(&mut s)).unwrap(),
                )
                .unwrap();
        }
        let mut p0: Vec<f64> = (0..n).map(|_| s.uniform()).collect();
        let tot: f64 = p0.iter().sum();
        p0.iter_mut().for_each(|x| *x /= tot);
        let classical = classical_master_solve(&model, &p0, &grid).unwrap();
        for rho in [&a, &b] {
            let sol = lindblad_rate_solve(&model, rho, &p0, &grid).unwrap();
            for (pk, qk) in sol.populations().iter().zip(&classical.populations) {
                for (x, y) in pk.iter().zip(qk) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
    }
    cr.check("hybrid_vs_classical", worst, worst <= 1e-10);

    let ou = OUParams::new(GAMMA, 2.0 * GAMMA).unwrap();
    let h = pauli(1).unwrap().scale(0.4);
    let dh = pauli(2).unwrap().scale(0.5);
    let model = NoiseHamiltonianModel::new(h, dh, ou, InitialNoise::Fixed(0.5)).unwrap();
    let eta = EtaGrid::covering(&ou, 7.0, 100);
    let fgrid = TimeGrid::uniform(0.0, 2.0, 5).unwrap();
    let dt = stable_step(&model, &eta);
    let sa = fokker_planck_grid_solve(&model, &a, &eta, &fgrid, dt).unwrap();
    let sb = fokker_planck_grid_solve(&model, &b, &eta, &fgrid, dt).unwrap();
    let mut diff: f64 = 0.0;
    for (x, y) in sa.marginals.iter().zip(&sb.marginals) {
        for (u, v) in x.iter().zip(y) {
            diff = diff.max((u - v).abs());
        }
    }
    cr.check("fokker_planck_marginals", diff, diff <= 1e-10);
    cr.finish()
}

fn criterion_10_ou_statistics() -> bool {
    let mut cr = Criterion::new(10, "ou_statistics", 90.0);
    let d = 1.5;
    let ou = OUParams::new(GAMMA, d).unwrap();
    let n = 100_000;
    let var = d / (2.0 * GAMMA);
    let cov = var * (-1.0f64).exp();
    let (mut s2, mut sc) = (0.0, 0.0);
    for i in 0..n {
        let mut s = RngStream::new(SEED, 5_000_000 + i as u64);
        let path = ou_path(&ou, InitialNoise::Stationary, 0.5, 3.0, &mut s).unwrap();
        let (x, y) = (path.values[4], path.values[6]);
        s2 += x * x;
        sc += x * y;
    }
    let nf = n as f64;
    let z_var = (s2 / nf - var).abs() / (2.0 * var * var / nf).sqrt();
    let z_cov = (sc / nf - cov).abs() / ((var * var + cov * cov) / nf).sqrt();
    cr.check("z_variance", z_var, z_var <= 3.0);
    cr.check("z_lag_correlation", z_cov, z_cov <= 3.0);

    let model = NoiseHamiltonianModel::pure_dephasing(ou);
    let plus = DensityMatrix::from_bloch(1.0, 0.0, 0.0).unwrap();
    let grid = TimeGrid::uniform(0.5, 5.0, 10).unwrap();
    let ens = ensemble_average(&model, &plus, &grid, n, SEED).unwrap();
    let mut worst: f64 = 0.0;
    for (k, &t) in grid.points().iter().enumerate() {
        // Second cumulant: ∫₀ᵗ∫₀ᵗ C(t₁ − t₂) by a 2-D midpoint rule.
        let m = 400;
        let h = t / m as f64;
        let mut phi = 0.0;
        for i in 0..m {
            for j in 0..m {
                phi += var * (-GAMMA * ((i as f64 - j as f64) * h).abs()).exp();
            }
        }
        phi *= h * h;
        // Diagonal cells of the kink: exact cell average minus midpoint value.
        let cell = 2.0 * ((GAMMA * h) - 1.0 + (-GAMMA * h).exp()) / (GAMMA * GAMMA * h * h);
        phi += m as f64 * h * h * var * (cell - 1.0);
        let oracle = (-0.5 * phi).exp();
        let coh = 2.0 * ens.mean[k][(0, 1)].re;
        let se = 2.0 * ens.stderr[k][(0, 1)].re;
        worst = worst.max((coh - oracle).abs() / se);
    }
    cr.check("worst_coherence_z", worst, worst <= 3.0);
    cr.finish()
}

fn criterion_11_divisibility() -> bool {
    let mut cr = Criterion::new(11, "divisibility_scans", 10.0);
    let p = DephasingParams::new(GAMMA).unwrap();
    let fam = DephasingFamily { params: p };
    let times = scan_times(10.0, 41);
    let scan = divisibility_scan(&fam, 2, &times).unwrap();
    let mut growth_min = f64::MAX;
    let mut growth_cells = 0;
    let mut oracle_err: f64 = 0.0;
    for cell in &scan.cells {
        // V_{t,s} multiplies coherences by f = c(t)/c(s); its Choi matrix has
        // eigenvalues 1 ± f and 0.
        let f = coherence_oracle(cell.t) / coherence_oracle(cell.s);
        if let Some(m) = cell.indicator {
            oracle_err = oracle_err.max((m - (1.0 - f.abs()).min(0.0)).abs());
            if f > 1.0 + 1e-3 {
                growth_cells += 1;
                growth_min = growth_min.min(m);
            }
        }
    }
    cr.check("choi_vs_oracle", oracle_err, oracle_err < 1e-9);
    cr.check("growth_cells", growth_cells as f64, growth_cells > 0);
    cr.check("growth_region_min_choi", growth_min, growth_min <= -1e-4);
    let mut lam_min = f64::MAX;
    for k in 0..=1000 {
        let m: Superoperator = dephasing_map(0.01 * k as f64, &p).unwrap();
        lam_min = lam_min.min(choi_of(&m).min_eigenvalue());
    }
    cr.check("min_choi_lambda_t", lam_min, lam_min >= -1e-10);
    cr.finish()
}

fn validation_report_passes() -> bool {
    let outcomes = run_all(&ValidationOptions {
        seed: SEED,
        ..Default::default()
    });
    for o in &outcomes {
        println!("  {}", o.summary_line());
    }
    outcomes.len() == 11 && outcomes.iter().all(|o| o.passed)
}

fn main() {
    let criteria: [(&str, fn() -> bool); 12] = [
        ("1", criterion_01_maximality),
        ("2", criterion_02_figure_one),
        ("3", criterion_03_random_unitary_limits),
        ("4", criterion_04_measure_saturation),
        ("5", criterion_05_representation_equivalence),
        ("6", criterion_06_monte_carlo),
        ("7", criterion_07_recoherence),
        ("8", criterion_08_kernel_identity),
        ("9", criterion_09_spectator),
        ("10", criterion_10_ou_statistics),
        ("11", criterion_11_divisibility),
        ("validate", validation_report_passes),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = Vec::new();
    for (id, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        if id == "validate" {
            println!("ACCEPTANCE validation report:");
        }
        let ok = std::panic::catch_unwind(check).unwrap_or(false);
        if id == "validate" {
            println!(
                "ACCEPTANCE validation report {}",
                if ok { "PASS" } else { "FAIL" }
            );
        }
        if !ok {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("ACCEPTANCE all criteria passed");
    } else {
        println!("ACCEPTANCE failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
