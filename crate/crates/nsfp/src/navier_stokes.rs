//! 2D incompressible periodic flow on `[0, 2pi)^2` in spectral coefficients,
//! with truncated convection and the polymer extra-stress divergence as a
//! source.
//!
//! The viscous term is integrated exactly by the spectral factor
//! `exp(-|k|^2 dt)` (the viscosity is 1); convection, stress divergence and
//! forcing are explicit, followed by Leray projection. Quadratic products are
//! dealiased by the two-thirds rule. The pressure is never materialized: the
//! projection's multiplier plays its role.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::config_space::TruncationOps;
use crate::{Error, Result, Tensor2};

/// FFT plans plus wavenumber tables for one grid size.
pub struct SpectralGrid {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Signed wavenumbers 0, 1, ..., n/2, -n/2+1, ..., -1.
    k: Vec<f64>,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid").field("n", &self.n).finish()
    }
}

impl SpectralGrid {
    pub fn new(n: usize) -> Result<Arc<Self>> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::Config(format!(
                "spatial grid must be even and at least 4, got {n}"
            )));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let k = (0..n)
            .map(|i| if i <= n / 2 { i as f64 } else { i as f64 - n as f64 })
            .collect();
        Ok(Arc::new(SpectralGrid { n, fwd, inv, k }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.n as f64
    }

    pub fn wavenumber(&self, i: usize) -> f64 {
        self.k[i]
    }

    fn transform_rows(&self, a: &mut Array2<Complex64>, fft: &Arc<dyn Fft<f64>>) {
        for mut row in a.rows_mut() {
            let slice = row.as_slice_mut().expect("row-major layout");
            fft.process(slice);
        }
    }

    fn transform_cols(&self, a: &mut Array2<Complex64>, fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let mut buf = vec![Complex64::default(); n];
        for j in 0..n {
            for i in 0..n {
                buf[i] = a[[i, j]];
            }
            fft.process(&mut buf);
            for i in 0..n {
                a[[i, j]] = buf[i];
            }
        }
    }

    /// Physical samples -> normalized coefficients (`u = sum c_k e^{i k x}`).
    pub fn forward(&self, phys: &Array2<f64>) -> Array2<Complex64> {
        let n = self.n;
        let mut a = phys.mapv(|v| Complex64::new(v, 0.0));
        self.transform_rows(&mut a, &self.fwd);
        self.transform_cols(&mut a, &self.fwd);
        let scale = 1.0 / (n * n) as f64;
        a.mapv_inplace(|v| v * scale);
        a
    }

    /// Coefficients -> physical samples (real part; imaginary parts are
    /// rounding noise as long as conjugate symmetry holds).
    pub fn inverse(&self, coef: &Array2<Complex64>) -> Array2<f64> {
        let mut a = coef.clone();
        self.transform_rows(&mut a, &self.inv);
        self.transform_cols(&mut a, &self.inv);
        a.mapv(|v| v.re)
    }

    /// Zero every mode with |k1| or |k2| above the two-thirds cutoff.
    pub fn dealias(&self, coef: &mut Array2<Complex64>) {
        let cut = self.n as f64 / 3.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if self.k[i].abs() > cut || self.k[j].abs() > cut {
                    coef[[i, j]] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }
}

/// Divergence-free velocity in spectral coefficients.
#[derive(Debug, Clone)]
pub struct VelocityField {
    grid: Arc<SpectralGrid>,
    cx: Array2<Complex64>,
    cy: Array2<Complex64>,
}

/// Symmetric 2x2 stress samples per x-node.
#[derive(Debug, Clone)]
pub struct StressField {
    pub s11: Array2<f64>,
    pub s12: Array2<f64>,
    pub s22: Array2<f64>,
}

impl StressField {
    pub fn zeros(n: usize) -> Self {
        StressField {
            s11: Array2::zeros((n, n)),
            s12: Array2::zeros((n, n)),
            s22: Array2::zeros((n, n)),
        }
    }

    /// Mean Frobenius norm over the grid (L2 average).
    pub fn mean_norm(&self) -> f64 {
        let n2 = self.s11.len() as f64;
        let sum: f64 = self
            .s11
            .iter()
            .zip(self.s12.iter())
            .zip(self.s22.iter())
            .map(|((a, b), c)| a * a + 2.0 * b * b + c * c)
            .sum();
        (sum / n2).sqrt()
    }
}

/// Static body forcing, kept in both spaces.
#[derive(Debug, Clone)]
pub struct Forcing {
    fx_hat: Array2<Complex64>,
    fy_hat: Array2<Complex64>,
    /// `int |f|^2 dx`
    l2_sq: f64,
}

impl Forcing {
    pub fn none(grid: &Arc<SpectralGrid>) -> Self {
        let n = grid.n();
        Forcing {
            fx_hat: Array2::default((n, n)),
            fy_hat: Array2::default((n, n)),
            l2_sq: 0.0,
        }
    }

    /// Superpose cosine modes `(ax, ay) cos(kx x + ky y + phase)`.
    pub fn from_modes(grid: &Arc<SpectralGrid>, modes: &[(i32, i32, f64, f64, f64)]) -> Self {
        let n = grid.n();
        let dx = grid.dx();
        let mut fx = Array2::zeros((n, n));
        let mut fy = Array2::zeros((n, n));
        for &(kx, ky, ax, ay, phase) in modes {
            for i in 0..n {
                for j in 0..n {
                    let arg = kx as f64 * (i as f64 * dx) + ky as f64 * (j as f64 * dx) + phase;
                    let c = arg.cos();
                    fx[[i, j]] += ax * c;
                    fy[[i, j]] += ay * c;
                }
            }
        }
        let l2_sq = dx * dx
            * fx.iter()
                .zip(fy.iter())
                .map(|(a, b)| a * a + b * b)
                .sum::<f64>();
        Forcing {
            fx_hat: grid.forward(&fx),
            fy_hat: grid.forward(&fy),
            l2_sq,
        }
    }

    pub fn l2_sq(&self) -> f64 {
        self.l2_sq
    }

    pub fn is_zero(&self) -> bool {
        self.l2_sq == 0.0
    }
}

/// Physical-space velocity data handed to the Fokker-Planck step.
#[derive(Debug, Clone)]
pub struct VelocitySamples {
    pub ux: Array2<f64>,
    pub uy: Array2<f64>,
    /// Velocity gradient per node: [[du_x/dx, du_x/dy], [du_y/dx, du_y/dy]].
    pub grad: Vec<Tensor2>,
    /// Streamfunction at cell corners (node (i,j) shifted by -dx/2 in both
    /// directions); differences of corner values give exactly divergence-free
    /// face fluxes for the upwind advection.
    pub psi_corner: Array2<f64>,
    pub n: usize,
}

impl VelocityField {
    pub fn zero(grid: Arc<SpectralGrid>) -> Self {
        let n = grid.n();
        VelocityField {
            grid,
            cx: Array2::default((n, n)),
            cy: Array2::default((n, n)),
        }
    }

    /// Taylor-Green vortex `u = (sin x cos y, -cos x sin y)`.
    pub fn taylor_green(grid: Arc<SpectralGrid>) -> Self {
        let n = grid.n();
        let dx = grid.dx();
        let mut ux = Array2::zeros((n, n));
        let mut uy = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (i as f64 * dx, j as f64 * dx);
                ux[[i, j]] = x.sin() * y.cos();
                uy[[i, j]] = -x.cos() * y.sin();
            }
        }
        let cx = grid.forward(&ux);
        let cy = grid.forward(&uy);
        VelocityField { grid, cx, cy }
    }

    /// Build from physical samples (no projection applied).
    pub fn from_physical(grid: Arc<SpectralGrid>, ux: &Array2<f64>, uy: &Array2<f64>) -> Self {
        let cx = grid.forward(ux);
        let cy = grid.forward(uy);
        VelocityField { grid, cx, cy }
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn coefficients(&self) -> (&Array2<Complex64>, &Array2<Complex64>) {
        (&self.cx, &self.cy)
    }

    /// Kinetic energy `0.5 ||u||^2_{L2}` by Parseval.
    pub fn kinetic_energy(&self) -> f64 {
        let two_pi_sq = (2.0 * std::f64::consts::PI).powi(2);
        0.5 * two_pi_sq
            * self
                .cx
                .iter()
                .zip(self.cy.iter())
                .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
                .sum::<f64>()
    }

    /// Enstrophy `||grad u||^2_{L2}`.
    pub fn enstrophy(&self) -> f64 {
        let n = self.n();
        let two_pi_sq = (2.0 * std::f64::consts::PI).powi(2);
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let k2 = self.grid.k[i] * self.grid.k[i] + self.grid.k[j] * self.grid.k[j];
                acc += k2 * (self.cx[[i, j]].norm_sqr() + self.cy[[i, j]].norm_sqr());
            }
        }
        two_pi_sq * acc
    }

    /// Largest divergence magnitude over all modes.
    pub fn max_divergence(&self) -> f64 {
        let n = self.n();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let d = self.grid.k[i] * self.cx[[i, j]] + self.grid.k[j] * self.cy[[i, j]];
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    pub fn physical(&self) -> (Array2<f64>, Array2<f64>) {
        (self.grid.inverse(&self.cx), self.grid.inverse(&self.cy))
    }

    /// Max of |u|^2 over the collocation grid.
    pub fn max_speed_sq(&self) -> f64 {
        let (ux, uy) = self.physical();
        ux.iter()
            .zip(uy.iter())
            .map(|(a, b)| a * a + b * b)
            .fold(0.0, f64::max)
    }

    /// Physical samples, gradients and corner streamfunction for the coupling.
    pub fn samples(&self) -> VelocitySamples {
        let n = self.n();
        let g = &self.grid;
        let (ux, uy) = self.physical();
        let deriv = |c: &Array2<Complex64>, along_x: bool| -> Array2<f64> {
            let mut d = Array2::default((n, n));
            for i in 0..n {
                for j in 0..n {
                    let k = if along_x { g.k[i] } else { g.k[j] };
                    d[[i, j]] = Complex64::new(0.0, k) * c[[i, j]];
                }
            }
            g.inverse(&d)
        };
        let g11 = deriv(&self.cx, true);
        let g12 = deriv(&self.cx, false);
        let g21 = deriv(&self.cy, true);
        let g22 = deriv(&self.cy, false);
        let mut grad = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                grad.push([[g11[[i, j]], g12[[i, j]]], [g21[[i, j]], g22[[i, j]]]]);
            }
        }
        // Streamfunction: u = (d_y phi, -d_x phi), so |k|^2 phi_hat = i k x u
        // (the vorticity); evaluate at corners by a half-cell phase shift.
        let mut phi = Array2::<Complex64>::default((n, n));
        let half = g.dx() / 2.0;
        for i in 0..n {
            for j in 0..n {
                let (k1, k2) = (g.k[i], g.k[j]);
                let k2n = k1 * k1 + k2 * k2;
                if k2n > 0.0 {
                    let vort =
                        Complex64::new(0.0, k1) * self.cy[[i, j]] - Complex64::new(0.0, k2) * self.cx[[i, j]];
                    let shift = Complex64::new(0.0, -(k1 + k2) * half).exp();
                    phi[[i, j]] = vort / k2n * shift;
                }
            }
        }
        let psi_corner = g.inverse(&phi);
        VelocitySamples {
            ux,
            uy,
            grad,
            psi_corner,
            n,
        }
    }
}

/// Constant-gradient sample set for the homogeneous mode (no x-structure).
pub fn uniform_gradient_samples(grad: Tensor2) -> VelocitySamples {
    VelocitySamples {
        ux: Array2::zeros((1, 1)),
        uy: Array2::zeros((1, 1)),
        grad: vec![grad],
        psi_corner: Array2::zeros((1, 1)),
        n: 1,
    }
}

/// Project onto divergence-free fields: `c <- (I - k k^T / |k|^2) c`,
/// zero mode pinned at 0 (no mean flow).
pub fn leray_project(u: &mut VelocityField) {
    let n = u.n();
    for i in 0..n {
        for j in 0..n {
            let (k1, k2) = (u.grid.k[i], u.grid.k[j]);
            let k2n = k1 * k1 + k2 * k2;
            if k2n == 0.0 {
                u.cx[[i, j]] = Complex64::new(0.0, 0.0);
                u.cy[[i, j]] = Complex64::new(0.0, 0.0);
            } else {
                let dot = (k1 * u.cx[[i, j]] + k2 * u.cy[[i, j]]) / k2n;
                u.cx[[i, j]] -= k1 * dot;
                u.cy[[i, j]] -= k2 * dot;
            }
        }
    }
}

/// True iff the velocity truncation is inactive: `max |u|^2 <= ell`.
pub fn velocity_unbounded_check(u: &VelocityField, trunc: &TruncationOps) -> bool {
    u.max_speed_sq() <= trunc.level()
}

/// Energy bookkeeping of one step, all terms exact by construction.
#[derive(Debug, Clone, Copy, Default)]
pub struct NsStepStats {
    /// `0.5||u_proj||^2 - 0.5||u_prev||^2`: work of the explicit terms
    /// (convection + stress + forcing) including the projection.
    pub explicit_work: f64,
    /// `0.5||u_proj||^2 - 0.5||u_new||^2 >= 0`: viscous dissipation.
    pub viscous_dissipation: f64,
    /// Recorded balance residual; zero up to rounding.
    pub balance_residual: f64,
}

/// One semi-implicit step: explicit tendency, Leray projection, exact viscous
/// decay. The stress field enters through `div S`; its divergence for fields
/// constant in x is exactly zero.
pub fn ns_step(
    u: &VelocityField,
    stress: &StressField,
    forcing: &Forcing,
    trunc: &TruncationOps,
    dt: f64,
) -> Result<(VelocityField, NsStepStats)> {
    let g = u.grid.clone();
    let n = g.n();
    if stress.s11.dim() != (n, n) {
        return Err(Error::Shape(format!(
            "stress grid {:?} does not match velocity grid {n}",
            stress.s11.dim()
        )));
    }
    // CFL guard for the explicit convection.
    let (ux, uy) = u.physical();
    let vmax = ux
        .iter()
        .zip(uy.iter())
        .map(|(a, b)| a.abs().max(b.abs()))
        .fold(0.0, f64::max);
    if vmax * dt / g.dx() > 1.0 {
        return Err(Error::Cfl(format!(
            "convection: max |u| dt / dx = {} > 1",
            vmax * dt / g.dx()
        )));
    }

    // Dealiased convection product Gamma_ell(|u|^2) u (x) u.
    let mut cx_d = u.cx.clone();
    let mut cy_d = u.cy.clone();
    g.dealias(&mut cx_d);
    g.dealias(&mut cy_d);
    let uxd = g.inverse(&cx_d);
    let uyd = g.inverse(&cy_d);
    let mut m11 = Array2::zeros((n, n));
    let mut m12 = Array2::zeros((n, n));
    let mut m22 = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (uxd[[i, j]], uyd[[i, j]]);
            let gamma = trunc.gamma(a * a + b * b);
            m11[[i, j]] = gamma * a * a;
            m12[[i, j]] = gamma * a * b;
            m22[[i, j]] = gamma * b * b;
        }
    }
    let mh11 = g.forward(&m11);
    let mh12 = g.forward(&m12);
    let mh22 = g.forward(&m22);
    let sh11 = g.forward(&stress.s11);
    let sh12 = g.forward(&stress.s12);
    let sh22 = g.forward(&stress.s22);

    let mut next = u.clone();
    for i in 0..n {
        for j in 0..n {
            let (k1, k2) = (g.k[i], g.k[j]);
            let cut = n as f64 / 3.0;
            let dealiased = k1.abs() <= cut && k2.abs() <= cut;
            let (ik1, ik2) = (Complex64::new(0.0, k1), Complex64::new(0.0, k2));
            let conv_x = if dealiased {
                -(ik1 * mh11[[i, j]] + ik2 * mh12[[i, j]])
            } else {
                Complex64::new(0.0, 0.0)
            };
            let conv_y = if dealiased {
                -(ik1 * mh12[[i, j]] + ik2 * mh22[[i, j]])
            } else {
                Complex64::new(0.0, 0.0)
            };
            let div_s_x = ik1 * sh11[[i, j]] + ik2 * sh12[[i, j]];
            let div_s_y = ik1 * sh12[[i, j]] + ik2 * sh22[[i, j]];
            let tend_x = conv_x + div_s_x + forcing.fx_hat[[i, j]];
            let tend_y = conv_y + div_s_y + forcing.fy_hat[[i, j]];
            next.cx[[i, j]] += dt * tend_x;
            next.cy[[i, j]] += dt * tend_y;
        }
    }
    leray_project(&mut next);
    let e_prev = u.kinetic_energy();
    let e_proj = next.kinetic_energy();
    // Exact viscous integrating factor.
    for i in 0..n {
        for j in 0..n {
            let k2n = g.k[i] * g.k[i] + g.k[j] * g.k[j];
            let decay = (-k2n * dt).exp();
            next.cx[[i, j]] *= decay;
            next.cy[[i, j]] *= decay;
        }
    }
    let e_new = next.kinetic_energy();
    let stats = NsStepStats {
        explicit_work: e_proj - e_prev,
        viscous_dissipation: e_proj - e_new,
        balance_residual: (e_new - e_prev) - ((e_proj - e_prev) - (e_proj - e_new)),
    };
    Ok((next, stats))
}
