//! Command-line surface: `simulate`, `selftest`, `pair-check`.
//!
//! Exit codes: 0 on success (`selftest` and `pair-check` require every check
//! to pass), 1 on runtime or configuration failures, 2 on usage errors
//! (clap's default).

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::driver::{energy_report, run_coupled, RunMode, SimulationConfig};
use crate::io::{parse_config, write_diagnostics, write_snapshot, SnapshotFile};
use crate::kernel::{solve_fractional_relaxation, KernelSpec, KernelWeights};
use crate::special::mittag_leffler;

#[derive(Parser)]
#[command(
    name = "nsfp",
    about = "Nonlocal-in-time Navier-Stokes-Fokker-Planck simulator for dilute polymers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a config file and write outputs.
    Simulate {
        /// Path to the flat key = value configuration.
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the full invariant suite and print pass/fail per property.
    Selftest,
    /// Print the discrete Sonine residual and the relaxation-oracle error.
    PairCheck {
        /// Subdiffusion order in (0,1).
        #[arg(long)]
        alpha: f64,
        /// Number of time steps on the unit horizon.
        #[arg(long)]
        steps: usize,
    },
}

/// Entry point behind `main`; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // clap prints usage/help itself; 2 for usage errors, 0 for --help.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Simulate { config } => match simulate(&config) {
            Ok(()) => 0,
            Err(msg) => {
                eprintln!("error: {msg}");
                1
            }
        },
        Command::Selftest => selftest(),
        Command::PairCheck { alpha, steps } => pair_check(alpha, steps),
    }
}

fn simulate(config_path: &Path) -> Result<(), String> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| format!("{}: {e}", config_path.display()))?;
    let cfg = parse_config(&text).map_err(|v| {
        let mut msg = String::from("invalid configuration:\n");
        for line in &v.0 {
            msg.push_str("  - ");
            msg.push_str(line);
            msg.push('\n');
        }
        msg
    })?;
    let out = run_coupled(&cfg).map_err(|e| e.to_string())?;

    let dir = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let csv_path = dir.join("diagnostics.csv");
    write_diagnostics(&csv_path, &out.diagnostics).map_err(|e| e.to_string())?;

    for (label, index) in [("initial", 0usize), ("final", cfg.steps)] {
        let snap = snapshot_of(&cfg, &out, index);
        let path = dir.join(format!("snapshot_{label}.bin"));
        write_snapshot(&path, &snap).map_err(|e| e.to_string())?;
    }

    let last = out.diagnostics.last().unwrap();
    println!(
        "completed {} steps to t = {}: ke = {:.6e}, entropy = {:.9}, mass = {:.12}, min psi = {:.3e}",
        cfg.steps, last.t, last.kinetic_energy, last.entropy, last.mass, last.min_psi
    );
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn snapshot_of(cfg: &SimulationConfig, out: &crate::driver::RunOutput, index: usize) -> SnapshotFile {
    let (mode_tag, nx) = match cfg.mode {
        RunMode::Homogeneous => (0, 0),
        RunMode::Full => (1, cfg.nx as u32),
    };
    let (ux, uy) = match cfg.mode {
        RunMode::Homogeneous => (Vec::new(), Vec::new()),
        RunMode::Full => {
            let (ux, uy) = out.velocities[index].physical();
            (ux.into_raw_vec_and_offset().0, uy.into_raw_vec_and_offset().0)
        }
    };
    SnapshotFile {
        mode_tag,
        nx,
        nr: cfg.nr as u32,
        ntheta: cfg.ntheta as u32,
        time_index: index as u32,
        psi: out.field.snapshot(index).to_vec(),
        ux,
        uy,
    }
}

fn pair_check(alpha: f64, steps: usize) -> i32 {
    let spec = KernelSpec::abel(alpha, 1.0, steps);
    let kw = match KernelWeights::build(&spec) {
        Ok(kw) => kw,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let residual = kw.sonine_residual().expect("resolvent filled");
    let traj = solve_fractional_relaxation(&spec, 1.0, 1.0).expect("valid spec");
    let reference = mittag_leffler(alpha, -1.0);
    let got = traj.samples()[steps];
    let rel_err = (got - reference).abs() / reference.abs();
    println!("discrete Sonine residual: {residual:.3e} (tolerance 1e-12)");
    println!(
        "relaxation y(1) = {got:.9} vs E_{{{alpha}}}(-1) = {reference:.9}, relative error {rel_err:.3e}"
    );
    let ok = residual <= 1e-12 && rel_err <= 0.05;
    println!("{}", if ok { "pair-check: PASS" } else { "pair-check: FAIL" });
    if ok {
        0
    } else {
        1
    }
}

type Check = (&'static str, fn() -> Result<(), String>);

fn selftest() -> i32 {
    let checks: &[Check] = &[
        ("sonine-residual", checks::sonine_residual),
        ("inverse-convolution", checks::inverse_convolution),
        ("relaxation-oracle", checks::relaxation_oracle),
        ("alikhanov-sweep", checks::alikhanov_sweep),
        ("kernel-norm-bound", checks::kernel_norm_bound),
        ("maxwellian-normalization", checks::maxwellian_normalization),
        ("stress-equilibrium-zero", checks::stress_equilibrium_zero),
        ("stress-form-equivalence", checks::stress_form_equivalence),
        ("truncation-identities", checks::truncation_identities),
        ("fp-equilibrium-fixed-point", checks::fp_equilibrium),
        ("fp-mass-conservation", checks::fp_mass),
        ("fp-entropy-classical-monotone", checks::fp_entropy_classical),
        ("ns-leray-projection", checks::leray),
        ("ns-taylor-green-decay", checks::taylor_green),
        ("coupled-equilibrium", checks::coupled_equilibrium),
        ("coupled-energy-residual", checks::coupled_energy),
        ("config-round-trip", checks::config_round_trip),
        ("snapshot-round-trip", checks::snapshot_round_trip),
        ("csv-determinism", checks::csv_determinism),
    ];
    let mut failures = 0;
    for (name, f) in checks {
        match f() {
            Ok(()) => println!("[pass] {name}"),
            Err(msg) => {
                failures += 1;
                println!("[FAIL] {name}: {msg}");
            }
        }
    }
    if failures == 0 {
        println!("selftest: all {} checks passed", checks.len());
        0
    } else {
        println!("selftest: {failures} of {} checks failed", checks.len());
        1
    }
}

mod checks {
    use super::*;
    use crate::config_space::{
        build_maxwellian, evaluate_truncations, kramers_stress, truncated_stress, SpringPotential,
        StressForm, TruncationOps,
    };
    use crate::driver::{InitDensity, InitVelocity, KernelChoice};
    use crate::fokker_planck::{
        assemble_operators, entropy, fp_step, FieldMode, PDFField,
    };
    use crate::io::{config_text, diagnostics_csv};
    use crate::kernel::{check_alikhanov, HistorySeries};
    use crate::navier_stokes::{
        leray_project, ns_step, Forcing, SpectralGrid, StressField, VelocityField,
    };
    use crate::tensor_norm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ensure(cond: bool, msg: String) -> Result<(), String> {
        if cond {
            Ok(())
        } else {
            Err(msg)
        }
    }

    pub fn sonine_residual() -> Result<(), String> {
        for &alpha in &[0.3, 0.5, 0.8] {
            let kw = KernelWeights::build(&KernelSpec::abel(alpha, 1.0, 256))
                .map_err(|e| e.to_string())?;
            let r = kw.sonine_residual().map_err(|e| e.to_string())?;
            ensure(r <= 1e-12, format!("alpha={alpha}: residual {r:.3e}"))?;
        }
        Ok(())
    }

    pub fn inverse_convolution() -> Result<(), String> {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let n = 128;
        let kw =
            KernelWeights::build(&KernelSpec::abel(0.4, 1.0, n)).map_err(|e| e.to_string())?;
        let y: Vec<f64> = (0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut d = vec![0.0; n + 1];
        for m in 1..=n {
            d[m] = kw.derivative_at(&y, m);
        }
        let rec = kw.apply_resolvent(&d).map_err(|e| e.to_string())?;
        let worst = (1..=n)
            .map(|m| (rec[m] - (y[m] - y[0])).abs())
            .fold(0.0f64, f64::max);
        ensure(worst <= 1e-10, format!("recovery error {worst:.3e}"))
    }

    pub fn relaxation_oracle() -> Result<(), String> {
        let spec = KernelSpec::abel(0.5, 1.0, 512);
        let traj = solve_fractional_relaxation(&spec, 1.0, 1.0).map_err(|e| e.to_string())?;
        let reference = mittag_leffler(0.5, -1.0);
        let err = (traj.samples()[512] - reference).abs() / reference;
        ensure(err <= 2e-2, format!("relative error {err:.3e}"))
    }

    pub fn alikhanov_sweep() -> Result<(), String> {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &alpha in &[0.3, 0.5, 0.8] {
            let kw = KernelWeights::build(&KernelSpec::abel(alpha, 1.0, 64))
                .map_err(|e| e.to_string())?;
            for _ in 0..1000 {
                let n = rng.gen_range(1..=64usize);
                let samples: Vec<f64> = (0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let hist = HistorySeries::new(kw.step(), samples).map_err(|e| e.to_string())?;
                let r = check_alikhanov(&kw, &hist).map_err(|e| e.to_string())?;
                ensure(r >= -1e-10, format!("alpha={alpha}: residual {r:.3e}"))?;
            }
        }
        Ok(())
    }

    pub fn kernel_norm_bound() -> Result<(), String> {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 64;
        let kw =
            KernelWeights::build(&KernelSpec::abel(0.5, 1.0, n)).map_err(|e| e.to_string())?;
        let k_end = kw.k_end().expect("abel kernel");
        let u: Vec<f64> = (0..=n).map(|_| rng.gen_range(0.0..2.0)).collect();
        for m in 1..=n {
            let lhs = kw.step() * u[1..=m].iter().map(|v| v * v).sum::<f64>();
            let sq: Vec<f64> = u.iter().map(|v| v * v).collect();
            let rhs = kw.convolve_at(&sq, m) / k_end;
            ensure(lhs <= rhs * (1.0 + 1e-12), format!("m={m}: {lhs} > {rhs}"))?;
        }
        Ok(())
    }

    pub fn maxwellian_normalization() -> Result<(), String> {
        let tab = build_maxwellian(SpringPotential::fene(4.0).map_err(|e| e.to_string())?, 24, 16)
            .map_err(|e| e.to_string())?;
        let total: f64 = tab.weights().iter().zip(tab.m()).map(|(w, m)| w * m).sum();
        ensure((total - 1.0).abs() <= 1e-10, format!("sum w M = {total}"))
    }

    pub fn stress_equilibrium_zero() -> Result<(), String> {
        let tab = build_maxwellian(SpringPotential::fene(4.0).map_err(|e| e.to_string())?, 32, 32)
            .map_err(|e| e.to_string())?;
        let ones = vec![1.0; tab.len()];
        let sp = kramers_stress(&ones, &tab, StressForm::Potential).map_err(|e| e.to_string())?;
        let sg = kramers_stress(&ones, &tab, StressForm::Gradient).map_err(|e| e.to_string())?;
        ensure(
            tensor_norm(&sp) <= 1e-8 && tensor_norm(&sg) <= 1e-12,
            format!("S(1): potential {:.3e}, gradient {:.3e}", tensor_norm(&sp), tensor_norm(&sg)),
        )
    }

    pub fn stress_form_equivalence() -> Result<(), String> {
        let pot = SpringPotential::fene(4.0).map_err(|e| e.to_string())?;
        let mut gaps = Vec::new();
        for &n in &[16usize, 32] {
            let tab = build_maxwellian(pot, n, n).map_err(|e| e.to_string())?;
            let psi: Vec<f64> = (0..tab.n_r())
                .flat_map(|i| (0..tab.n_theta()).map(move |j| (i, j)).collect::<Vec<_>>())
                .map(|(i, j)| {
                    let q = tab.node(i, j);
                    1.0 + 0.3 * (0.4 * q[0] - 0.1 * q[1]).exp() + 0.2 * q[0] * q[1]
                })
                .collect();
            let sp = kramers_stress(&psi, &tab, StressForm::Potential).map_err(|e| e.to_string())?;
            let sg = kramers_stress(&psi, &tab, StressForm::Gradient).map_err(|e| e.to_string())?;
            let mut d = [[0.0; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    d[a][b] = sp[a][b] - sg[a][b];
                }
            }
            gaps.push(tensor_norm(&d));
        }
        ensure(gaps[1] < gaps[0], format!("gaps {gaps:?} must decrease"))
    }

    pub fn truncation_identities() -> Result<(), String> {
        let ops = TruncationOps::new(2.0).map_err(|e| e.to_string())?;
        let (g, t, l) = evaluate_truncations(&ops, 1.0);
        ensure(g == 1.0 && t == 1.0 && l == 1.0, format!("below level: {:?}", (g, t, l)))?;
        let (g2, t2, l2) = evaluate_truncations(&ops, 4.0);
        ensure(
            g2 == 0.0 && l2 == 0.0 && (2.0..=4.0).contains(&t2),
            format!("at 2 ell: {:?}", (g2, t2, l2)),
        )?;
        let tab = build_maxwellian(SpringPotential::fene(4.0).map_err(|e| e.to_string())?, 16, 16)
            .map_err(|e| e.to_string())?;
        let psi = vec![3.0 * ops.level(); tab.len()];
        let s = truncated_stress(&psi, &tab, &ops).map_err(|e| e.to_string())?;
        ensure(tensor_norm(&s) <= 1e-7, format!("S_ell(3ell) = {:.3e}", tensor_norm(&s)))
    }

    pub fn fp_equilibrium() -> Result<(), String> {
        let tab = build_maxwellian(SpringPotential::fene(4.0).map_err(|e| e.to_string())?, 12, 12)
            .map_err(|e| e.to_string())?;
        let ops = assemble_operators(&tab, None).map_err(|e| e.to_string())?;
        let trunc = TruncationOps::new(10.0).map_err(|e| e.to_string())?;
        let kw =
            KernelWeights::build(&KernelSpec::abel(0.5, 1.0, 8)).map_err(|e| e.to_string())?;
        let samples = crate::navier_stokes::uniform_gradient_samples([[0.0; 2]; 2]);
        let mut field = PDFField::uniform(FieldMode::Homogeneous, &tab);
        for _ in 0..8 {
            field = fp_step(&field, &ops, &kw, &samples, &trunc, kw.step())
                .map_err(|e| e.to_string())?
                .0;
        }
        ensure(
            field.current().iter().all(|&v| v == 1.0),
            "equilibrium drifted".into(),
        )
    }

    pub fn fp_mass() -> Result<(), String> {
        let tab = build_maxwellian(SpringPotential::fene(4.0).map_err(|e| e.to_string())?, 16, 12)
            .map_err(|e| e.to_string())?;
        let ops = assemble_operators(&tab, None).map_err(|e| e.to_string())?;
        let trunc = TruncationOps::new(10.0).map_err(|e| e.to_string())?;
        let n = 64;
        let kw =
            KernelWeights::build(&KernelSpec::abel(0.5, 1.0, n)).map_err(|e| e.to_string())?;
        let raw: Vec<f64> = (0..tab.n_r())
            .flat_map(|i| {
                let r = tab.r_nodes()[i];
                std::iter::repeat((-r * r).exp()).take(tab.n_theta())
            })
            .collect();
        let mass0 = tab.integrate(&raw);
        let init: Vec<f64> = raw.into_iter().map(|v| v / mass0).collect();
        let mut field =
            PDFField::new(FieldMode::Homogeneous, &tab, init).map_err(|e| e.to_string())?;
        let samples = crate::navier_stokes::uniform_gradient_samples([[0.0; 2]; 2]);
        for _ in 0..n {
            let (next, stats) = fp_step(&field, &ops, &kw, &samples, &trunc, kw.step())
                .map_err(|e| e.to_string())?;
            ensure(
                (stats.mass - 1.0).abs() <= 1e-12,
                format!("mass drift {:.3e}", stats.mass - 1.0),
            )?;
            ensure(stats.clip_mass == 0.0, "clipping triggered".into())?;
            field = next;
        }
        Ok(())
    }

    pub fn fp_entropy_classical() -> Result<(), String> {
        let tab = build_maxwellian(SpringPotential::fene(4.0).map_err(|e| e.to_string())?, 16, 12)
            .map_err(|e| e.to_string())?;
        let ops = assemble_operators(&tab, None).map_err(|e| e.to_string())?;
        let trunc = TruncationOps::new(10.0).map_err(|e| e.to_string())?;
        let n = 64;
        let kw = KernelWeights::build(&KernelSpec::classical(1.0, n)).map_err(|e| e.to_string())?;
        let raw: Vec<f64> = (0..tab.n_r())
            .flat_map(|i| {
                let r = tab.r_nodes()[i];
                std::iter::repeat((-r * r).exp()).take(tab.n_theta())
            })
            .collect();
        let mass0 = tab.integrate(&raw);
        let init: Vec<f64> = raw.into_iter().map(|v| v / mass0).collect();
        let mut field =
            PDFField::new(FieldMode::Homogeneous, &tab, init).map_err(|e| e.to_string())?;
        let samples = crate::navier_stokes::uniform_gradient_samples([[0.0; 2]; 2]);
        let mut prev = entropy(&field, &tab);
        for _ in 0..n {
            field = fp_step(&field, &ops, &kw, &samples, &trunc, kw.step())
                .map_err(|e| e.to_string())?
                .0;
            let e = entropy(&field, &tab);
            ensure(e <= prev + 1e-13, format!("entropy rose by {:.3e}", e - prev))?;
            prev = e;
        }
        Ok(())
    }

    pub fn leray() -> Result<(), String> {
        let grid = SpectralGrid::new(16).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let ux = ndarray::Array2::from_shape_fn((16, 16), |_| rng.gen_range(-1.0..1.0));
        let uy = ndarray::Array2::from_shape_fn((16, 16), |_| rng.gen_range(-1.0..1.0));
        let mut u = VelocityField::from_physical(grid, &ux, &uy);
        leray_project(&mut u);
        ensure(
            u.max_divergence() <= 1e-12,
            format!("divergence {:.3e}", u.max_divergence()),
        )
    }

    pub fn taylor_green() -> Result<(), String> {
        let grid = SpectralGrid::new(32).map_err(|e| e.to_string())?;
        let trunc = TruncationOps::new(10.0).map_err(|e| e.to_string())?;
        let mut u = VelocityField::taylor_green(grid.clone());
        let s = StressField::zeros(32);
        let f = Forcing::none(&grid);
        let dt = 1e-3;
        for _ in 0..100 {
            u = ns_step(&u, &s, &f, &trunc, dt).map_err(|e| e.to_string())?.0;
        }
        let expected = std::f64::consts::PI.powi(2) * (-0.4f64).exp();
        let err = (u.kinetic_energy() - expected).abs() / expected;
        ensure(err <= 1e-4, format!("decay error {err:.3e}"))
    }

    pub fn coupled_equilibrium() -> Result<(), String> {
        let cfg = SimulationConfig {
            kernel: KernelChoice::Abel { alpha: 0.5 },
            steps: 8,
            horizon: 0.04,
            nx: 8,
            nr: 8,
            ntheta: 8,
            mode: RunMode::Full,
            init_u: InitVelocity::Zero,
            init_psi: InitDensity::Uniform,
            ..Default::default()
        };
        let out = run_coupled(&cfg).map_err(|e| e.to_string())?;
        ensure(
            out.field.current().iter().all(|&v| v == 1.0)
                && out.diagnostics.iter().all(|d| d.kinetic_energy == 0.0),
            "global equilibrium moved".into(),
        )
    }

    pub fn coupled_energy() -> Result<(), String> {
        let cfg = SimulationConfig {
            kernel: KernelChoice::Abel { alpha: 0.5 },
            steps: 10,
            horizon: 0.05,
            nx: 8,
            nr: 8,
            ntheta: 8,
            mode: RunMode::Full,
            init_u: InitVelocity::TaylorGreen,
            init_psi: InitDensity::Uniform,
            ..Default::default()
        };
        let out = run_coupled(&cfg).map_err(|e| e.to_string())?;
        let kw = KernelWeights::build(&cfg.kernel_spec()).map_err(|e| e.to_string())?;
        let report = energy_report(&out.diagnostics, &kw).map_err(|e| e.to_string())?;
        for &r in &report.residuals {
            ensure(
                r >= -1e-6 * report.rhs,
                format!("residual {r:.3e} vs rhs {:.3e}", report.rhs),
            )?;
        }
        Ok(())
    }

    pub fn config_round_trip() -> Result<(), String> {
        let cfg = SimulationConfig {
            kernel: KernelChoice::Abel { alpha: 0.42 },
            mode: RunMode::Full,
            init_u: InitVelocity::TaylorGreen,
            ..Default::default()
        };
        let parsed = parse_config(&config_text(&cfg)).map_err(|e| e.to_string())?;
        ensure(parsed == cfg, "round trip changed the config".into())
    }

    pub fn snapshot_round_trip() -> Result<(), String> {
        let snap = SnapshotFile {
            mode_tag: 0,
            nx: 0,
            nr: 4,
            ntheta: 4,
            time_index: 3,
            psi: (0..16).map(|i| 1.0 + (i as f64) * 1e-9).collect(),
            ux: vec![],
            uy: vec![],
        };
        let bytes = snap.to_bytes().map_err(|e| e.to_string())?;
        let back = SnapshotFile::from_bytes(&bytes).map_err(|e| e.to_string())?;
        ensure(back == snap, "snapshot round trip not bit-exact".into())
    }

    pub fn csv_determinism() -> Result<(), String> {
        let cfg = SimulationConfig {
            steps: 4,
            horizon: 0.02,
            nr: 8,
            ntheta: 8,
            ..Default::default()
        };
        let a = run_coupled(&cfg).map_err(|e| e.to_string())?;
        let b = run_coupled(&cfg).map_err(|e| e.to_string())?;
        let ca = diagnostics_csv(&a.diagnostics).map_err(|e| e.to_string())?;
        let cb = diagnostics_csv(&b.diagnostics).map_err(|e| e.to_string())?;
        ensure(ca == cb, "identical runs produced different bytes".into())
    }
}
