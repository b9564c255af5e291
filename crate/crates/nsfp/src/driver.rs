//! Two-way coupling between the flow and configuration solvers, diagnostics,
//! the coupled energy-entropy report, and the perturbation experiment.
//!
//! One step is Lie splitting in the order that produces the stress/drag
//! cancellation: the truncated stress is evaluated from the current density,
//! the velocity advances with it, and the density then advances with the new
//! velocity and gradient. All energy bookkeeping is recorded exactly as
//! tested inside the sub-solvers, so the reported inequality residual is
//! structurally nonnegative (up to rounding) whenever the run is faithful.


use crate::config_space::{
    build_maxwellian, truncated_stress, MaxwellianTable, SpringPotential, TruncationOps,
};
use crate::fokker_planck::{
    assemble_operators, entropy, fp_step, g_entropy, FieldMode, PDFField,
};
use crate::kernel::{KernelSpec, KernelWeights};
use crate::navier_stokes::{
    leray_project, ns_step, uniform_gradient_samples, Forcing, SpectralGrid, StressField,
    VelocityField,
};
use crate::{tensor_norm, Error, Result, Tensor2};

/// Kernel selection as it appears in configuration files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelChoice {
    Abel { alpha: f64 },
    Classical,
}

/// Spatial sampling mode requested by the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Full,
    Homogeneous,
}

/// Initial velocity selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitVelocity {
    Zero,
    TaylorGreen,
}

/// Initial scaled-density selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitDensity {
    /// Equilibrium `psi = 1`.
    Uniform,
    /// Normalized Gaussian in configuration space (unit mass).
    QBump,
    /// `1 + 2 exp(-|x - pi|^2)`, uniform in q (full mode only).
    XBump,
}

/// Validated simulation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub kernel: KernelChoice,
    /// Number of time steps N; dt = horizon / N everywhere.
    pub steps: usize,
    pub horizon: f64,
    /// FENE extensibility.
    pub b: f64,
    /// Truncation level.
    pub ell: f64,
    pub nx: usize,
    pub nr: usize,
    pub ntheta: usize,
    pub mode: RunMode,
    pub init_u: InitVelocity,
    pub init_psi: InitDensity,
    /// Forcing modes `(kx, ky, ax, ay, phase)`.
    pub forcing: Vec<(i32, i32, f64, f64, f64)>,
    /// Prescribed constant velocity gradient for the homogeneous mode.
    pub grad_u: Tensor2,
    pub perturb_delta: f64,
    pub out_dir: String,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            kernel: KernelChoice::Classical,
            steps: 256,
            horizon: 1.0,
            b: 4.0,
            ell: 10.0,
            nx: 16,
            nr: 16,
            ntheta: 16,
            mode: RunMode::Homogeneous,
            init_u: InitVelocity::Zero,
            init_psi: InitDensity::Uniform,
            forcing: Vec::new(),
            grad_u: [[0.0, 0.0], [0.0, 0.0]],
            perturb_delta: 1e-6,
            out_dir: "out".into(),
        }
    }
}

impl SimulationConfig {
    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn kernel_spec(&self) -> KernelSpec {
        match self.kernel {
            KernelChoice::Abel { alpha } => KernelSpec::abel(alpha, self.horizon, self.steps),
            KernelChoice::Classical => KernelSpec::classical(self.horizon, self.steps),
        }
    }

    /// Collect every violation instead of stopping at the first.
    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut errs = Vec::new();
        if let KernelChoice::Abel { alpha } = self.kernel {
            if !(alpha > 0.0 && alpha < 1.0) {
                errs.push(format!("kernel.alpha: alpha out of (0,1): {alpha}"));
            }
        }
        if self.steps == 0 {
            errs.push("kernel.N: must be at least 1".into());
        }
        if !(self.horizon > 0.0) {
            errs.push(format!("time.T: must be positive, got {}", self.horizon));
        }
        if !(self.b > 2.0) {
            errs.push(format!("fene.b: must exceed 2, got {}", self.b));
        }
        if !(self.ell > 0.0) {
            errs.push(format!("trunc.ell: must be positive, got {}", self.ell));
        }
        if self.nx < 4 || self.nx % 2 != 0 {
            errs.push(format!("grid.nx: must be even and >= 4, got {}", self.nx));
        }
        if self.nr < 4 {
            errs.push(format!("grid.nr: must be >= 4, got {}", self.nr));
        }
        if self.ntheta < 4 {
            errs.push(format!("grid.ntheta: must be >= 4, got {}", self.ntheta));
        }
        if (self.grad_u[0][0] + self.grad_u[1][1]).abs() > 1e-12 {
            errs.push("gradu: trace must vanish (incompressible gradient)".into());
        }
        match self.mode {
            RunMode::Homogeneous => {
                if self.init_u != InitVelocity::Zero {
                    errs.push("init.u: homogeneous mode supports only zero".into());
                }
                if self.init_psi == InitDensity::XBump {
                    errs.push("init.psi: x_bump requires mode=full".into());
                }
                if !self.forcing.is_empty() {
                    errs.push("forcing.modes: homogeneous mode has no flow solver".into());
                }
            }
            RunMode::Full => {
                if self.grad_u.iter().flatten().any(|&g| g != 0.0) {
                    errs.push("gradu: prescribed gradients apply to mode=homogeneous only".into());
                }
            }
        }
        if !(self.perturb_delta >= 0.0) {
            errs.push(format!(
                "perturb.delta: must be nonnegative, got {}",
                self.perturb_delta
            ));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

/// Exact per-step bookkeeping behind the energy report (not serialized).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LedgerTerms {
    pub explicit_work: f64,
    pub viscous_dissipation: f64,
    pub drift_work: f64,
    pub adv_work: f64,
    pub grad_root: f64,
    /// Ledger entropy integral `sum Omega G_delta(psi^n)`.
    pub entropy_integral: f64,
    /// `int |f|^2 dx` of the static forcing (constant along the run).
    pub forcing_l2_sq: f64,
}

/// One diagnostics row; the first ten fields are the CSV columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub kinetic_energy: f64,
    pub enstrophy: f64,
    pub entropy: f64,
    pub mass: f64,
    pub min_psi: f64,
    pub clip_mass: f64,
    pub max_rho: f64,
    pub stress_norm: f64,
    pub energy_residual: f64,
    pub ledger: LedgerTerms,
}

/// Result of one simulation run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub field: PDFField,
    /// Velocity snapshot per recorded time (empty in homogeneous mode).
    pub velocities: Vec<VelocityField>,
    pub table: MaxwellianTable,
}

fn initial_density(cfg: &SimulationConfig, tab: &MaxwellianTable) -> Vec<f64> {
    let nq = tab.len();
    let base_q: Vec<f64> = match cfg.init_psi {
        InitDensity::Uniform | InitDensity::XBump => vec![1.0; nq],
        InitDensity::QBump => {
            let raw: Vec<f64> = (0..tab.n_r())
                .flat_map(|i| {
                    let r = tab.r_nodes()[i];
                    std::iter::repeat((-r * r).exp()).take(tab.n_theta())
                })
                .collect();
            let mass = tab.integrate(&raw);
            raw.into_iter().map(|v| v / mass).collect()
        }
    };
    match cfg.mode {
        RunMode::Homogeneous => base_q,
        RunMode::Full => {
            let nx = cfg.nx;
            let dx = 2.0 * std::f64::consts::PI / nx as f64;
            let mut out = Vec::with_capacity(nx * nx * nq);
            for ix in 0..nx {
                for iy in 0..nx {
                    let amp = if cfg.init_psi == InitDensity::XBump {
                        let x = ix as f64 * dx - std::f64::consts::PI;
                        let y = iy as f64 * dx - std::f64::consts::PI;
                        1.0 + 2.0 * (-(x * x + y * y)).exp()
                    } else {
                        1.0
                    };
                    out.extend(base_q.iter().map(|v| v * amp));
                }
            }
            out
        }
    }
}

/// Normalized configuration-space bump used by the perturbation experiment;
/// unit norm in the M-weighted L2 sense over one q-fiber.
fn perturbation_bump(tab: &MaxwellianTable) -> Vec<f64> {
    let raw: Vec<f64> = (0..tab.n_r())
        .flat_map(|i| {
            let r = tab.r_nodes()[i];
            std::iter::repeat((-2.0 * r * r).exp()).take(tab.n_theta())
        })
        .collect();
    let sq: Vec<f64> = raw.iter().map(|v| v * v).collect();
    let norm = tab.integrate(&sq).sqrt();
    raw.into_iter().map(|v| v / norm).collect()
}

struct LedgerSums {
    visc: f64,
    expl: f64,
    drift: f64,
    adv: f64,
    grad_root: f64,
    e_series: Vec<f64>,
    rhs: f64,
}

impl LedgerSums {
    fn residual(&self, n: usize, kinetic: f64, kw: &KernelWeights) -> f64 {
        let h = kw.step();
        let conv_e = kw.convolve_at(&self.e_series, n);
        self.rhs - kinetic - self.visc - conv_e - h * self.grad_root
            + self.expl
            + h * (self.drift + self.adv)
    }
}

/// Run the coupled (or homogeneous) simulation described by the config.
pub fn run_coupled(cfg: &SimulationConfig) -> Result<RunOutput> {
    run_with_override(cfg, None)
}

fn ledger_entropy(field: &PDFField, tab: &MaxwellianTable, xscale: f64) -> f64 {
    let nq = tab.len();
    let state = field.current();
    let mut acc = 0.0;
    for (i, &v) in state.iter().enumerate() {
        let q = i % nq;
        let t = v + 1e-30;
        acc += tab.weights()[q] * tab.m()[q] * (t * t.ln() + 1.0 / std::f64::consts::E);
    }
    acc * xscale
}

fn stress_field(
    field: &PDFField,
    tab: &MaxwellianTable,
    trunc: &TruncationOps,
    nx: usize,
) -> Result<(StressField, f64)> {
    let mut s = StressField::zeros(nx);
    let mut norm_sq = 0.0;
    for ix in 0..nx {
        for iy in 0..nx {
            let x = ix * nx + iy;
            let t = truncated_stress(field.q_slice(x), tab, trunc)?;
            s.s11[[ix, iy]] = t[0][0];
            s.s12[[ix, iy]] = 0.5 * (t[0][1] + t[1][0]);
            s.s22[[ix, iy]] = t[1][1];
            norm_sq += tensor_norm(&t).powi(2);
        }
    }
    let mean_norm = (norm_sq / (nx * nx) as f64).sqrt();
    Ok((s, mean_norm))
}

fn run_with_override(cfg: &SimulationConfig, psi0: Option<Vec<f64>>) -> Result<RunOutput> {
    cfg.validate()
        .map_err(|v| Error::Config(v.join("; ")))?;
    let tab = build_maxwellian(SpringPotential::fene(cfg.b)?, cfg.nr, cfg.ntheta)?;
    let trunc = TruncationOps::new(cfg.ell)?;
    let kw = KernelWeights::build(&cfg.kernel_spec())?;
    let dt = cfg.dt();
    let init = psi0.unwrap_or_else(|| initial_density(cfg, &tab));

    match cfg.mode {
        RunMode::Homogeneous => {
            let ops = assemble_operators(&tab, None)?;
            let mut field = PDFField::new(FieldMode::Homogeneous, &tab, init)?;
            let samples = uniform_gradient_samples(cfg.grad_u);
            let e0 = ledger_entropy(&field, &tab, 1.0);
            let mut sums = LedgerSums {
                visc: 0.0,
                expl: 0.0,
                drift: 0.0,
                adv: 0.0,
                grad_root: 0.0,
                e_series: vec![e0],
                rhs: kw.l1_norm_upto(kw.len()) * e0,
            };
            let s0 = truncated_stress(field.current(), &tab, &trunc)?;
            let mut diagnostics = vec![DiagnosticsRecord {
                t: 0.0,
                kinetic_energy: 0.0,
                enstrophy: 0.0,
                entropy: entropy(&field, &tab),
                mass: tab.integrate(field.current()),
                min_psi: field.min_value(),
                clip_mass: 0.0,
                max_rho: tab.integrate(field.current()),
                stress_norm: tensor_norm(&s0),
                energy_residual: 0.0,
                ledger: LedgerTerms {
                    entropy_integral: e0,
                    ..Default::default()
                },
            }];
            for n in 1..=cfg.steps {
                let (next, stats) = fp_step(&field, &ops, &kw, &samples, &trunc, dt)
                    .map_err(|e| e.at_step(n))?;
                field = next;
                sums.drift += stats.drift_work;
                sums.grad_root += stats.grad_root;
                sums.e_series.push(stats.entropy_integral);
                let s = truncated_stress(field.current(), &tab, &trunc)?;
                diagnostics.push(DiagnosticsRecord {
                    t: n as f64 * dt,
                    kinetic_energy: 0.0,
                    enstrophy: 0.0,
                    entropy: entropy(&field, &tab),
                    mass: stats.mass,
                    min_psi: stats.min_psi,
                    clip_mass: stats.clip_mass,
                    max_rho: stats.mass,
                    stress_norm: tensor_norm(&s),
                    energy_residual: sums.residual(n, 0.0, &kw),
                    ledger: LedgerTerms {
                        drift_work: stats.drift_work,
                        adv_work: stats.adv_work,
                        grad_root: stats.grad_root,
                        entropy_integral: stats.entropy_integral,
                        ..Default::default()
                    },
                });
            }
            Ok(RunOutput {
                diagnostics,
                field,
                velocities: Vec::new(),
                table: tab,
            })
        }
        RunMode::Full => {
            let nx = cfg.nx;
            let grid = SpectralGrid::new(nx)?;
            let ops = assemble_operators(&tab, Some(nx))?;
            let forcing = if cfg.forcing.is_empty() {
                Forcing::none(&grid)
            } else {
                Forcing::from_modes(&grid, &cfg.forcing)
            };
            let mut u = match cfg.init_u {
                InitVelocity::Zero => VelocityField::zero(grid.clone()),
                InitVelocity::TaylorGreen => VelocityField::taylor_green(grid.clone()),
            };
            leray_project(&mut u);
            let mut field = PDFField::new(FieldMode::Full { nx }, &tab, init)?;
            let dx = grid.dx();
            let xscale = dx * dx;
            let e0 = ledger_entropy(&field, &tab, xscale);
            let mut sums = LedgerSums {
                visc: 0.0,
                expl: 0.0,
                drift: 0.0,
                adv: 0.0,
                grad_root: 0.0,
                e_series: vec![e0],
                rhs: u.kinetic_energy()
                    + kw.l1_norm_upto(kw.len()) * e0
                    + 0.5 * cfg.horizon * forcing.l2_sq(),
            };
            let forcing_l2 = forcing.l2_sq();
            let (mut s_cur, mut s_norm) = stress_field(&field, &tab, &trunc, nx)?;
            let omega: Vec<f64> = tab
                .weights()
                .iter()
                .zip(tab.m())
                .map(|(w, m)| w * m)
                .collect();
            let max_rho0 = {
                let nq = tab.len();
                (0..nx * nx)
                    .map(|x| {
                        field.current()[x * nq..(x + 1) * nq]
                            .iter()
                            .zip(&omega)
                            .map(|(v, w)| v * w)
                            .sum::<f64>()
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            let mut diagnostics = vec![DiagnosticsRecord {
                t: 0.0,
                kinetic_energy: u.kinetic_energy(),
                enstrophy: u.enstrophy(),
                entropy: entropy(&field, &tab),
                mass: xscale
                    * field
                        .current()
                        .iter()
                        .enumerate()
                        .map(|(i, v)| omega[i % tab.len()] * v)
                        .sum::<f64>(),
                min_psi: field.min_value(),
                clip_mass: 0.0,
                max_rho: max_rho0,
                stress_norm: s_norm,
                energy_residual: 0.0,
                ledger: LedgerTerms {
                    entropy_integral: e0,
                    forcing_l2_sq: forcing_l2,
                    ..Default::default()
                },
            }];
            let mut velocities = vec![u.clone()];
            for n in 1..=cfg.steps {
                let (u_next, ns_stats) =
                    ns_step(&u, &s_cur, &forcing, &trunc, dt).map_err(|e| e.at_step(n))?;
                u = u_next;
                let samples = u.samples();
                let (f_next, fp_stats) = fp_step(&field, &ops, &kw, &samples, &trunc, dt)
                    .map_err(|e| e.at_step(n))?;
                field = f_next;
                sums.visc += ns_stats.viscous_dissipation;
                sums.expl += ns_stats.explicit_work;
                sums.drift += fp_stats.drift_work;
                sums.adv += fp_stats.adv_work;
                sums.grad_root += fp_stats.grad_root;
                sums.e_series.push(fp_stats.entropy_integral);
                let nq = tab.len();
                let max_rho = (0..nx * nx)
                    .map(|x| {
                        field.current()[x * nq..(x + 1) * nq]
                            .iter()
                            .zip(&omega)
                            .map(|(v, w)| v * w)
                            .sum::<f64>()
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                let (s_next, s_next_norm) = stress_field(&field, &tab, &trunc, nx)?;
                s_cur = s_next;
                s_norm = s_next_norm;
                velocities.push(u.clone());
                diagnostics.push(DiagnosticsRecord {
                    t: n as f64 * dt,
                    kinetic_energy: u.kinetic_energy(),
                    enstrophy: u.enstrophy(),
                    entropy: entropy(&field, &tab),
                    mass: fp_stats.mass,
                    min_psi: fp_stats.min_psi,
                    clip_mass: fp_stats.clip_mass,
                    max_rho,
                    stress_norm: s_norm,
                    energy_residual: sums.residual(n, u.kinetic_energy(), &kw),
                    ledger: LedgerTerms {
                        explicit_work: ns_stats.explicit_work,
                        viscous_dissipation: ns_stats.viscous_dissipation,
                        drift_work: fp_stats.drift_work,
                        adv_work: fp_stats.adv_work,
                        grad_root: fp_stats.grad_root,
                        entropy_integral: fp_stats.entropy_integral,
                        forcing_l2_sq: forcing_l2,
                    },
                });
            }
            Ok(RunOutput {
                diagnostics,
                field,
                velocities,
                table: tab,
            })
        }
    }
}

/// Energy-inequality report rebuilt from recorded diagnostics.
#[derive(Debug, Clone)]
pub struct EnergyReport {
    /// Constant right-hand side `0.5||u0||^2 + ||k||_{L1(0,T)} E_0 + 0.5||f||^2`.
    pub rhs: f64,
    /// `rhs - lhs_n` per step; nonnegative up to rounding for faithful runs.
    pub residuals: Vec<f64>,
}

/// Recompute the coupled energy-estimate residual series from diagnostics.
pub fn energy_report(diag: &[DiagnosticsRecord], kw: &KernelWeights) -> Result<EnergyReport> {
    if diag.len() < 2 {
        return Err(Error::Diagnostics(
            "need the initial record plus at least one step".into(),
        ));
    }
    let steps = diag.len() - 1;
    if steps > kw.len() {
        return Err(Error::Diagnostics(format!(
            "{steps} steps recorded but kernel grid has {}",
            kw.len()
        )));
    }
    let e_series: Vec<f64> = diag.iter().map(|d| d.ledger.entropy_integral).collect();
    let rhs = diag[0].kinetic_energy
        + kw.l1_norm_upto(kw.len()) * e_series[0]
        + 0.5 * kw.step() * kw.len() as f64 * diag[0].ledger.forcing_l2_sq;
    let h = kw.step();
    let mut sums = LedgerSums {
        visc: 0.0,
        expl: 0.0,
        drift: 0.0,
        adv: 0.0,
        grad_root: 0.0,
        e_series,
        rhs,
    };
    let mut residuals = Vec::with_capacity(steps);
    for n in 1..=steps {
        let l = &diag[n].ledger;
        sums.visc += l.viscous_dissipation;
        sums.expl += l.explicit_work;
        sums.drift += l.drift_work;
        sums.adv += l.adv_work;
        sums.grad_root += l.grad_root;
        let conv_e = kw.convolve_at(&sums.e_series, n);
        residuals.push(
            sums.rhs - diag[n].kinetic_energy - sums.visc - conv_e - h * sums.grad_root
                + sums.expl
                + h * (sums.drift + sums.adv),
        );
    }
    Ok(EnergyReport { rhs, residuals })
}

/// Difference trace between a base run and a perturbed-data run.
#[derive(Debug, Clone)]
pub struct PerturbationTrace {
    pub times: Vec<f64>,
    /// `e(t) = ||u1 - u2||_{L2} + ||psi1 - psi2||_{L2_M}`
    pub e: Vec<f64>,
}

impl PerturbationTrace {
    pub fn initial(&self) -> f64 {
        self.e[0]
    }

    pub fn last(&self) -> f64 {
        *self.e.last().unwrap()
    }

    /// Growth factor `e(T) / e(0)`; infinite when the runs started identical.
    pub fn growth(&self) -> f64 {
        self.last() / self.initial()
    }
}

fn field_diff_norm(a: &PDFField, b: &PDFField, tab: &MaxwellianTable, step: usize, xscale: f64) -> f64 {
    let nq = tab.len();
    let (sa, sb) = (a.snapshot(step), b.snapshot(step));
    let mut acc = 0.0;
    for (i, (x, y)) in sa.iter().zip(sb).enumerate() {
        let d = x - y;
        let q = i % nq;
        acc += tab.weights()[q] * tab.m()[q] * d * d;
    }
    (acc * xscale).sqrt()
}

fn velocity_diff_norm(a: &VelocityField, b: &VelocityField) -> f64 {
    let (ax, ay) = a.coefficients();
    let (bx, by) = b.coefficients();
    let two_pi_sq = (2.0 * std::f64::consts::PI).powi(2);
    let sum: f64 = ax
        .iter()
        .zip(bx.iter())
        .map(|(p, q)| (p - q).norm_sqr())
        .chain(ay.iter().zip(by.iter()).map(|(p, q)| (p - q).norm_sqr()))
        .sum();
    (two_pi_sq * sum).sqrt()
}

/// Run the base configuration and a copy whose initial density is perturbed
/// by `delta` times a normalized bump; returns the difference trace.
pub fn perturbation_experiment(cfg: &SimulationConfig, delta: f64) -> Result<PerturbationTrace> {
    if !(delta >= 0.0) {
        return Err(Error::Config(format!(
            "perturbation magnitude must be nonnegative, got {delta}"
        )));
    }
    let base = run_coupled(cfg)?;
    let tab = &base.table;
    // Unit norm in the same L2_M(O) norm the trace uses, so e(0) = delta.
    let volume = match cfg.mode {
        RunMode::Homogeneous => 1.0,
        RunMode::Full => (2.0 * std::f64::consts::PI).powi(2),
    };
    let bump: Vec<f64> = perturbation_bump(tab)
        .into_iter()
        .map(|v| v / volume.sqrt())
        .collect();
    let mut psi0 = base.field.initial().to_vec();
    let nq = tab.len();
    for (i, v) in psi0.iter_mut().enumerate() {
        *v += delta * bump[i % nq];
    }
    let pert = run_with_override(cfg, Some(psi0))?;
    let xscale = match cfg.mode {
        RunMode::Homogeneous => 1.0,
        RunMode::Full => {
            let dx = 2.0 * std::f64::consts::PI / cfg.nx as f64;
            dx * dx
        }
    };
    let mut times = Vec::with_capacity(cfg.steps + 1);
    let mut e = Vec::with_capacity(cfg.steps + 1);
    for n in 0..=cfg.steps {
        let mut en = field_diff_norm(&base.field, &pert.field, tab, n, xscale);
        if cfg.mode == RunMode::Full {
            en += velocity_diff_norm(&base.velocities[n], &pert.velocities[n]);
        }
        times.push(n as f64 * cfg.dt());
        e.push(en);
    }
    Ok(PerturbationTrace { times, e })
}

/// Convenience entry for tests and the CLI: an x-averaged relative entropy
/// `sum w M (G(psi) - G(1))`, nonnegative at fixed unit mass.
pub fn relative_entropy(field: &PDFField, tab: &MaxwellianTable) -> f64 {
    entropy(field, tab) - g_entropy(1.0)
}

/// Full-mode helper: kinetic energy series of a run.
pub fn kinetic_series(out: &RunOutput) -> Vec<f64> {
    out.diagnostics.iter().map(|d| d.kinetic_energy).collect()
}

/// Shared stress assembly for external callers (selftest, examples):
/// builds the truncated stress field of the current state.
pub fn current_stress(
    field: &PDFField,
    tab: &MaxwellianTable,
    trunc: &TruncationOps,
    nx: usize,
) -> Result<StressField> {
    Ok(stress_field(field, tab, trunc, nx)?.0)
}

/// Placeholder-free accessor used by io writers: the ten CSV columns.
pub fn csv_columns(d: &DiagnosticsRecord) -> [f64; 10] {
    [
        d.t,
        d.kinetic_energy,
        d.enstrophy,
        d.entropy,
        d.mass,
        d.min_psi,
        d.clip_mass,
        d.max_rho,
        d.stress_norm,
        d.energy_residual,
    ]
}
