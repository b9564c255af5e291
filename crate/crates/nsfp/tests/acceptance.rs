//! Acceptance suite: every criterion runs at its stated tolerance and prints
//! one pass line (visible with `cargo test --test acceptance -- --nocapture`).

use nsfp::cli;
use nsfp::config_space::{
    build_maxwellian, kramers_stress, SpringPotential, StressForm, TruncationOps,
};
use nsfp::driver::{
    energy_report, perturbation_experiment, run_coupled, InitDensity, InitVelocity, KernelChoice,
    RunMode, SimulationConfig,
};
use nsfp::fokker_planck::{
    assemble_operators, entropy, fp_step, g_entropy, rho_and_max_principle,
    entropy_dissipation_check, FieldMode, PDFField,
};
use nsfp::io::{diagnostics_csv, SnapshotFile};
use nsfp::kernel::{
    check_alikhanov, solve_fractional_relaxation, HistorySeries, KernelSpec, KernelWeights,
};
use nsfp::navier_stokes::{
    ns_step, uniform_gradient_samples, velocity_unbounded_check, Forcing, SpectralGrid,
    StressField, VelocityField,
};
use nsfp::special::mittag_leffler;
use nsfp::tensor_norm;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn criterion_01_discrete_sonine_identity() {
    for &alpha in &[0.3, 0.5, 0.8] {
        for &n in &[64usize, 1024] {
            let kw = KernelWeights::build(&KernelSpec::abel(alpha, 1.0, n)).unwrap();
            let residual = kw.sonine_residual().unwrap();
            assert!(
                residual <= 1e-12,
                "alpha={alpha}, N={n}: Sonine residual {residual:.3e} > 1e-12"
            );
        }
    }
    println!("[PASS] criterion 1: discrete Sonine residual <= 1e-12 for alpha in {{0.3,0.5,0.8}}, N in {{64,1024}}");
}

#[test]
fn criterion_02_fractional_relaxation_oracle() {
    let reference = mittag_leffler(0.5, -1.0);
    let err_at = |n: usize| -> f64 {
        let traj = solve_fractional_relaxation(&KernelSpec::abel(0.5, 1.0, n), 1.0, 1.0).unwrap();
        (traj.samples()[n] - reference).abs() / reference.abs()
    };
    let e1024 = err_at(1024);
    let e2048 = err_at(2048);
    assert!(e1024 <= 1e-2, "relative error {e1024:.3e} > 1e-2 at N=1024");
    let order = (e1024 / e2048).log2();
    assert!(
        order >= 0.5,
        "observed order {order:.3} < 0.5 (errors {e1024:.3e} -> {e2048:.3e})"
    );
    println!(
        "[PASS] criterion 2: relaxation vs E_1/2(-1)={reference:.6}: err(1024)={e1024:.3e}, order={order:.2}"
    );
}

#[test]
fn criterion_03_alikhanov_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = f64::INFINITY;
    for &alpha in &[0.3, 0.5, 0.8] {
        let kw = KernelWeights::build(&KernelSpec::abel(alpha, 1.0, 64)).unwrap();
        for _ in 0..10_000 {
            let n = rng.gen_range(1..=64usize);
            let samples: Vec<f64> = (0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let hist = HistorySeries::new(kw.step(), samples).unwrap();
            let r = check_alikhanov(&kw, &hist).unwrap();
            worst = worst.min(r);
            assert!(r >= -1e-10, "alpha={alpha}: Alikhanov residual {r:.3e} < -1e-10");
        }
    }
    println!("[PASS] criterion 3: 3x10^4 Alikhanov residuals >= -1e-10 (worst {worst:.3e})");
}

#[test]
fn criterion_04_stress_form_equivalence() {
    let pot = SpringPotential::fene(4.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let coefs: Vec<f64> = (0..6).map(|_| rng.gen_range(-0.3..0.3)).collect();
    let mut gaps = Vec::new();
    for &n in &[16usize, 32, 64] {
        let tab = build_maxwellian(pot, n, n).unwrap();
        let psi: Vec<f64> = (0..tab.n_r())
            .flat_map(|i| (0..tab.n_theta()).map(move |j| (i, j)).collect::<Vec<_>>())
            .map(|(i, j)| {
                let q = tab.node(i, j);
                1.0 + (coefs[0] * q[0] + coefs[1] * q[1]).exp() * 0.5
                    + coefs[2] * q[0] * q[1]
                    + coefs[3] * (q[0] * q[0] - q[1] * q[1])
                    + coefs[4] * q[0]
                    + coefs[5] * q[1]
            })
            .collect();
        let sp = kramers_stress(&psi, &tab, StressForm::Potential).unwrap();
        let sg = kramers_stress(&psi, &tab, StressForm::Gradient).unwrap();
        let mut d = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                d[a][b] = sp[a][b] - sg[a][b];
            }
        }
        gaps.push(tensor_norm(&d));
    }
    assert!(
        gaps[1] < gaps[0] && gaps[2] < gaps[1],
        "gap must decrease monotonically: {gaps:?}"
    );
    let order = (gaps[0] / gaps[2]).log2() / 2.0;
    assert!(order >= 1.0, "observed order {order:.2} < 1 ({gaps:?})");
    let tab = build_maxwellian(pot, 64, 64).unwrap();
    let s1 = kramers_stress(&vec![1.0; tab.len()], &tab, StressForm::Potential).unwrap();
    for row in &s1 {
        for &v in row {
            assert!(v.abs() <= 1e-8, "S(1) entry {v:.3e} > 1e-8 at the finest table");
        }
    }
    println!(
        "[PASS] criterion 4: stress-form gap {:?} (order {order:.2}), S(1) entries <= 1e-8",
        gaps.iter().map(|g| format!("{g:.2e}")).collect::<Vec<_>>()
    );
}

#[test]
fn criterion_05_fokker_planck_structure() {
    let tab = build_maxwellian(SpringPotential::fene(4.0).unwrap(), 32, 32).unwrap();
    let ops = assemble_operators(&tab, None).unwrap();
    let trunc = TruncationOps::new(10.0).unwrap();
    let n = 256;
    let kw = KernelWeights::build(&KernelSpec::abel(0.5, 1.0, n)).unwrap();
    let samples = uniform_gradient_samples([[0.0; 2]; 2]);

    // Normalized bump relaxation: exact mass, no clipping, entropy decay.
    let raw: Vec<f64> = (0..tab.n_r())
        .flat_map(|i| {
            let r = tab.r_nodes()[i];
            std::iter::repeat((-r * r).exp()).take(tab.n_theta())
        })
        .collect();
    let mass_raw = tab.integrate(&raw);
    let init: Vec<f64> = raw.iter().map(|v| v / mass_raw).collect();
    let mut field = PDFField::new(FieldMode::Homogeneous, &tab, init.clone()).unwrap();
    let rel0 = entropy(&field, &tab) - g_entropy(1.0);
    for _ in 0..n {
        let (next, stats) = fp_step(&field, &ops, &kw, &samples, &trunc, kw.step()).unwrap();
        assert!(
            (stats.mass - 1.0).abs() <= 1e-12,
            "mass drift {:.3e} > 1e-12",
            (stats.mass - 1.0).abs()
        );
        assert_eq!(stats.clip_mass, 0.0, "clip mass must be exactly zero");
        field = next;
    }
    let rel_t = entropy(&field, &tab) - g_entropy(1.0);
    assert!(
        rel_t < rel0 && rel_t >= -1e-12,
        "relative entropy must fall below its initial value: {rel_t:.3e} vs {rel0:.3e}"
    );

    // Equilibrium is an exact fixed point.
    let mut eq = PDFField::uniform(FieldMode::Homogeneous, &tab);
    for _ in 0..n {
        eq = fp_step(&eq, &ops, &kw, &samples, &trunc, kw.step()).unwrap().0;
    }
    assert!(eq.current().iter().all(|&v| v == 1.0), "psi=1 fixed point must be exact");

    // Classical-limit variant decreases entropy monotonically every step.
    let kw_cl = KernelWeights::build(&KernelSpec::classical(1.0, n)).unwrap();
    let mut field_cl = PDFField::new(FieldMode::Homogeneous, &tab, init).unwrap();
    let mut prev = entropy(&field_cl, &tab);
    for _ in 0..n {
        field_cl = fp_step(&field_cl, &ops, &kw_cl, &samples, &trunc, kw_cl.step()).unwrap().0;
        let e = entropy(&field_cl, &tab);
        assert!(e <= prev + 1e-13, "classical entropy rose: {e} > {prev}");
        prev = e;
    }
    // The nonlocal trace obeys the convolved inequality as well.
    let diss = entropy_dissipation_check(&field, &kw, &tab).unwrap();
    assert!(diss.convolved.iter().all(|&c| c <= 1e-10));
    println!(
        "[PASS] criterion 5: homogeneous structure (mass 1e-12, clip 0, exact fixed point, entropy {rel0:.3e} -> {rel_t:.3e}, classical monotone)"
    );
}

#[test]
fn criterion_06_maximum_principle() {
    let base = SimulationConfig {
        kernel: KernelChoice::Abel { alpha: 0.5 },
        steps: 250,
        horizon: 0.25,
        b: 4.0,
        ell: 10.0,
        nx: 16,
        nr: 16,
        ntheta: 12,
        mode: RunMode::Full,
        init_u: InitVelocity::Zero,
        init_psi: InitDensity::XBump,
        ..Default::default()
    };
    for init_u in [InitVelocity::Zero, InitVelocity::TaylorGreen] {
        let cfg = SimulationConfig { init_u, ..base.clone() };
        let out = run_coupled(&cfg).unwrap();
        let (_, max_rho, flag) = rho_and_max_principle(&out.field, &out.table).unwrap();
        let rho0_max = out.diagnostics[0].max_rho;
        assert!(
            flag,
            "{init_u:?}: max rho {max_rho} exceeded initial {rho0_max} beyond 1e-8"
        );
        for d in &out.diagnostics {
            assert!(d.max_rho <= rho0_max + 1e-8, "step at t={}: {}", d.t, d.max_rho);
        }
    }
    println!("[PASS] criterion 6: maximum principle holds for u=0 and Taylor-Green runs");
}

#[test]
fn criterion_07_navier_stokes_oracle() {
    let grid = SpectralGrid::new(32).unwrap();
    let trunc = TruncationOps::new(10.0).unwrap();
    let mut u = VelocityField::taylor_green(grid.clone());
    let stress = StressField::zeros(32);
    let forcing = Forcing::none(&grid);
    let dt = 1e-3;
    for _ in 0..500 {
        let (next, _) = ns_step(&u, &stress, &forcing, &trunc, dt).unwrap();
        u = next;
        let div = u.max_divergence();
        assert!(div <= 1e-12, "divergence {div:.3e} > 1e-12");
    }
    let expected = std::f64::consts::PI.powi(2) * (-4.0f64 * 0.5).exp();
    let err = (u.kinetic_energy() - expected).abs() / expected;
    assert!(err <= 1e-3, "Taylor-Green energy decay error {err:.3e} > 1e-3");
    println!("[PASS] criterion 7: Taylor-Green decay error {err:.3e} <= 1e-3, divergence <= 1e-12");
}

fn criterion_8_config() -> SimulationConfig {
    SimulationConfig {
        kernel: KernelChoice::Abel { alpha: 0.5 },
        steps: 250,
        horizon: 0.25,
        b: 4.0,
        ell: 10.0,
        nx: 16,
        nr: 24,
        ntheta: 16,
        mode: RunMode::Full,
        init_u: InitVelocity::TaylorGreen,
        init_psi: InitDensity::Uniform,
        ..Default::default()
    }
}

#[test]
fn criterion_08_coupled_energy_estimate() {
    let cfg = criterion_8_config();
    let out = run_coupled(&cfg).unwrap();
    let kw = KernelWeights::build(&cfg.kernel_spec()).unwrap();
    let report = energy_report(&out.diagnostics, &kw).unwrap();
    let mut worst = f64::INFINITY;
    for &r in &report.residuals {
        worst = worst.min(r);
        assert!(
            r >= -1e-6 * report.rhs,
            "energy residual {r:.3e} < -1e-6 * RHS ({:.3e})",
            report.rhs
        );
    }
    for d in &out.diagnostics {
        assert!(d.min_psi >= 0.0, "min psi {} at t={}", d.min_psi, d.t);
    }
    let trunc = TruncationOps::new(10.0).unwrap();
    for v in &out.velocities {
        assert!(
            velocity_unbounded_check(v, &trunc),
            "velocity truncation must stay inactive at ell=10"
        );
    }
    // Inactive truncation means the level is bit-transparent.
    let out100 = run_coupled(&SimulationConfig { ell: 100.0, ..cfg }).unwrap();
    assert_eq!(
        out.diagnostics.len(),
        out100.diagnostics.len(),
        "runs must have equal length"
    );
    for (a, b) in out.diagnostics.iter().zip(&out100.diagnostics) {
        assert_eq!(a, b, "diagnostics must be bit-identical for ell=10 vs ell=100");
    }
    assert_eq!(
        out.field.current(),
        out100.field.current(),
        "final states must be bit-identical"
    );
    println!(
        "[PASS] criterion 8: energy residual >= -1e-6*RHS (worst {worst:.3e}, RHS {:.3e}), min psi >= 0, ell-transparent",
        report.rhs
    );
}

#[test]
fn criterion_09_perturbation_stability() {
    let cfg = criterion_8_config();
    let t6 = perturbation_experiment(&cfg, 1e-6).unwrap();
    let t7 = perturbation_experiment(&cfg, 1e-7).unwrap();
    let ratio = t6.last() / t7.last();
    assert!(
        (5.0..=20.0).contains(&ratio),
        "e(T) ratio {ratio:.2} outside [5, 20]"
    );
    let growth = t6.growth();
    assert!(growth <= 1e3, "growth e(T)/e(0) = {growth:.3e} > 1e3");
    println!(
        "[PASS] criterion 9: perturbation ratio {ratio:.2} in [5,20], growth {growth:.3e} <= 1e3"
    );
}

#[test]
fn criterion_10_determinism_and_io() {
    let cfg = SimulationConfig {
        kernel: KernelChoice::Abel { alpha: 0.5 },
        steps: 16,
        horizon: 0.08,
        nx: 8,
        nr: 8,
        ntheta: 8,
        mode: RunMode::Full,
        init_u: InitVelocity::TaylorGreen,
        init_psi: InitDensity::Uniform,
        ..Default::default()
    };
    let a = run_coupled(&cfg).unwrap();
    let b = run_coupled(&cfg).unwrap();
    let csv_a = diagnostics_csv(&a.diagnostics).unwrap();
    let csv_b = diagnostics_csv(&b.diagnostics).unwrap();
    assert_eq!(csv_a.as_bytes(), csv_b.as_bytes(), "identical configs must give identical CSV bytes");

    let (ux, uy) = a.velocities.last().unwrap().physical();
    let snap = SnapshotFile {
        mode_tag: 1,
        nx: cfg.nx as u32,
        nr: cfg.nr as u32,
        ntheta: cfg.ntheta as u32,
        time_index: cfg.steps as u32,
        psi: a.field.current().to_vec(),
        ux: ux.into_raw_vec_and_offset().0,
        uy: uy.into_raw_vec_and_offset().0,
    };
    let bytes = snap.to_bytes().unwrap();
    let back = SnapshotFile::from_bytes(&bytes).unwrap();
    assert_eq!(back, snap, "snapshot round trip must be bit-exact");
    assert_eq!(back.to_bytes().unwrap(), bytes);

    assert_eq!(cli::run(["nsfp", "selftest"]), 0, "selftest must exit 0");
    println!("[PASS] criterion 10: CSV determinism, snapshot round trip, selftest exit 0");
}
