//! Discrete calculus for Sonine kernel pairs.
//!
//! A kernel `k` is stored by its cell averages on a uniform time grid,
//! `k_cells[j] = (1/h) int_{jh}^{(j+1)h} k(s) ds`, computed in closed form for
//! Abel kernels. The discrete resolvent solves the lower-triangular Sonine
//! system `h * sum_{j<=n} k_cells[n-j] * kt_cells[j] = 1`, which makes the
//! inverse convolution property an exact triangular-solve duality.
//!
//! `alpha` is the subdiffusion order: the time kernel of the nonlocal
//! derivative of order `alpha` is `g_{1-alpha}(t) = t^{-alpha} / Gamma(1-alpha)`,
//! whose resolvent is `g_alpha`. The classical limit is kept as its own kind
//! (cell vector `(1/h, 0, ...)`, resolvent identically 1) so local reference
//! runs are exact rather than extrapolated.

use crate::special::gamma_fn;
use crate::{Error, Result};

/// Which kernel a [`KernelSpec`] tabulates.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelKind {
    /// Subdiffusion of order `alpha` in (0,1): kernel `g_{1-alpha}`.
    Abel { alpha: f64 },
    /// Local-in-time reference: the convolution identity.
    ClassicalLimit,
    /// Externally supplied cell averages (must be nonnegative, nonincreasing).
    Tabulated(Vec<f64>),
}

/// Kernel selection plus the time grid it is discretized on.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// Time horizon T > 0.
    pub horizon: f64,
    /// Number of uniform steps N >= 1; the step is h = T/N.
    pub steps: usize,
}

impl KernelSpec {
    pub fn abel(alpha: f64, horizon: f64, steps: usize) -> Self {
        KernelSpec {
            kind: KernelKind::Abel { alpha },
            horizon,
            steps,
        }
    }

    pub fn classical(horizon: f64, steps: usize) -> Self {
        KernelSpec {
            kind: KernelKind::ClassicalLimit,
            horizon,
            steps,
        }
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::KernelSpec("steps must be at least 1".into()));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::KernelSpec(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        match &self.kind {
            KernelKind::Abel { alpha } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(Error::KernelSpec(format!(
                        "alpha out of (0,1): {alpha}"
                    )));
                }
            }
            KernelKind::ClassicalLimit => {}
            KernelKind::Tabulated(cells) => {
                if cells.len() != self.steps {
                    return Err(Error::KernelSpec(format!(
                        "tabulated kernel has {} cells, spec has {} steps",
                        cells.len(),
                        self.steps
                    )));
                }
                if cells.iter().any(|c| !c.is_finite() || *c < 0.0) {
                    return Err(Error::KernelSpec(
                        "tabulated cells must be finite and nonnegative".into(),
                    ));
                }
                if cells.windows(2).any(|w| w[1] > w[0]) {
                    return Err(Error::KernelSpec(
                        "tabulated cells must be nonincreasing".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Discretized kernel pair on a uniform grid.
#[derive(Debug, Clone)]
pub struct KernelWeights {
    h: f64,
    classical: bool,
    k_cells: Vec<f64>,
    kt_cells: Option<Vec<f64>>,
    /// Pointwise k(T) for Abel kernels, last cell average for tabulated ones,
    /// `None` in the classical limit (where the kernel is the identity).
    k_end: Option<f64>,
}

/// Tabulate the kernel's cell averages. The resolvent is not yet filled;
/// call [`discrete_resolvent`] (or use [`KernelWeights::build`]).
pub fn tabulate_kernel(spec: &KernelSpec) -> Result<KernelWeights> {
    spec.validate()?;
    let n = spec.steps;
    let h = spec.step();
    let (k_cells, classical, k_end) = match &spec.kind {
        KernelKind::Abel { alpha } => {
            // k = g_{1-alpha}; cell average of t^{-alpha}/Gamma(1-alpha) is
            // (t_{j+1}^{1-alpha} - t_j^{1-alpha}) / (h * Gamma(2-alpha)).
            let beta = 1.0 - alpha;
            let g2 = gamma_fn(1.0 + beta);
            let cells: Vec<f64> = (0..n)
                .map(|j| {
                    let t0 = j as f64 * h;
                    let t1 = (j + 1) as f64 * h;
                    (t1.powf(beta) - t0.powf(beta)) / (h * g2)
                })
                .collect();
            let k_end = spec.horizon.powf(-alpha) / gamma_fn(beta);
            (cells, false, Some(k_end))
        }
        KernelKind::ClassicalLimit => {
            let mut cells = vec![0.0; n];
            cells[0] = 1.0 / h;
            (cells, true, None)
        }
        KernelKind::Tabulated(values) => {
            let k_end = *values.last().expect("validated nonempty");
            (values.clone(), false, Some(k_end))
        }
    };
    Ok(KernelWeights {
        h,
        classical,
        k_cells,
        kt_cells: None,
        k_end,
    })
}

/// Fill the discrete Sonine resolvent by the lower-triangular solve.
pub fn discrete_resolvent(mut kw: KernelWeights) -> Result<KernelWeights> {
    if kw.k_cells[0] <= 0.0 {
        return Err(Error::SingularKernel);
    }
    let n = kw.k_cells.len();
    let h = kw.h;
    let k = &kw.k_cells;
    let mut kt = vec![0.0; n];
    kt[0] = 1.0 / (h * k[0]);
    for m in 1..n {
        let mut acc = 0.0;
        for j in 0..m {
            acc += k[m - j] * kt[j];
        }
        kt[m] = (1.0 - h * acc) / (h * k[0]);
    }
    kw.kt_cells = Some(kt);
    Ok(kw)
}

impl KernelWeights {
    /// Tabulate and fill the resolvent in one go.
    pub fn build(spec: &KernelSpec) -> Result<KernelWeights> {
        discrete_resolvent(tabulate_kernel(spec)?)
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.k_cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k_cells.is_empty()
    }

    pub fn is_classical(&self) -> bool {
        self.classical
    }

    pub fn cells(&self) -> &[f64] {
        &self.k_cells
    }

    pub fn resolvent(&self) -> Result<&[f64]> {
        self.kt_cells
            .as_deref()
            .ok_or_else(|| Error::KernelSpec("resolvent not filled".into()))
    }

    /// Final kernel value k(T) (cell-average lower bound for tabulated input).
    pub fn k_end(&self) -> Option<f64> {
        self.k_end
    }

    /// Exact discrete L1 norm of the kernel up to t_n: `h * sum_{i<n} k_cells[i]`.
    pub fn l1_norm_upto(&self, n: usize) -> f64 {
        self.h * self.k_cells[..n].iter().sum::<f64>()
    }

    /// Max residual of the discrete Sonine identity over the whole grid.
    pub fn sonine_residual(&self) -> Result<f64> {
        let kt = self.resolvent()?;
        let k = &self.k_cells;
        let mut worst: f64 = 0.0;
        for m in 0..k.len() {
            // Compensated summation: the identity is what the invariants lean on.
            let mut acc = 0.0f64;
            let mut c = 0.0f64;
            for j in 0..=m {
                let term = k[m - j] * kt[j];
                let y = term - c;
                let t = acc + y;
                c = (t - acc) - y;
                acc = t;
            }
            worst = worst.max((self.h * acc - 1.0).abs());
        }
        Ok(worst)
    }

    /// L1 coefficients of the nonlocal derivative at step `n` applied to the
    /// increments: `D_n[y] = sum_{j=1..n} k_cells[n-j] * (y_j - y_{j-1})`.
    pub fn derivative_at(&self, samples: &[f64], n: usize) -> f64 {
        debug_assert!(n >= 1 && n < samples.len().max(1));
        if self.classical {
            return (samples[n] - samples[n - 1]) / self.h;
        }
        let k = &self.k_cells;
        let mut acc = 0.0;
        for j in 1..=n {
            acc += k[n - j] * (samples[j] - samples[j - 1]);
        }
        acc
    }

    /// Positivity budget of the implicit L1 step at index `n >= 1`:
    /// the coefficient multiplying the most recent state in the history
    /// combination, `k_cells[0] - k_cells[1]` (just `k_cells[0]` at n = 1).
    pub fn explicit_budget(&self, n: usize) -> f64 {
        if self.classical || n <= 1 || self.k_cells.len() < 2 {
            self.k_cells[0]
        } else {
            self.k_cells[0] - self.k_cells[1]
        }
    }

    /// Discrete convolution `(k * v)_n = h * sum_{j=1..n} k_cells[n-j] * v_j`
    /// of a grid function with v_0 ignored (the integrand starts at t_1).
    pub fn convolve_at(&self, values: &[f64], n: usize) -> f64 {
        let k = &self.k_cells;
        let mut acc = 0.0;
        for j in 1..=n {
            acc += k[n - j] * values[j];
        }
        self.h * acc
    }

    /// Apply the discrete resolvent to a derivative sequence
    /// (`d[n]` for n = 1..N, `d[0]` unused): returns `y_n - y_0` exactly by
    /// triangular duality.
    pub fn apply_resolvent(&self, d: &[f64]) -> Result<Vec<f64>> {
        let kt = self.resolvent()?;
        let mut out = vec![0.0; d.len()];
        for n in 1..d.len() {
            let mut acc = 0.0;
            for j in 1..=n {
                acc += kt[n - j] * d[j];
            }
            out[n] = self.h * acc;
        }
        Ok(out)
    }
}

/// Scalar trajectory on the kernel's grid; `samples[0]` is the initial value.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySeries {
    h: f64,
    samples: Vec<f64>,
}

impl HistorySeries {
    pub fn new(h: f64, samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::HistoryMismatch("history must contain y0".into()));
        }
        if !(h > 0.0) {
            return Err(Error::HistoryMismatch(format!("step must be positive, got {h}")));
        }
        Ok(HistorySeries { h, samples })
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn y0(&self) -> f64 {
        self.samples[0]
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn last_index(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn push(&mut self, value: f64) {
        self.samples.push(value);
    }
}

fn check_compatible(kw: &KernelWeights, hist: &HistorySeries) -> Result<usize> {
    if (kw.step() - hist.step()).abs() > 1e-14 * kw.step().max(1.0) {
        return Err(Error::HistoryMismatch(format!(
            "kernel step {} != history step {}",
            kw.step(),
            hist.step()
        )));
    }
    let n = hist.last_index();
    if n == 0 {
        return Err(Error::HistoryMismatch(
            "history needs at least one sample beyond y0".into(),
        ));
    }
    if n > kw.len() {
        return Err(Error::HistoryMismatch(format!(
            "history length {} exceeds kernel grid {}",
            n,
            kw.len()
        )));
    }
    Ok(n)
}

/// Nonlocal derivative `D_n = d/dt (k * [y - y0])(t_n)` at the last sample,
/// by the L1 scheme on cell-averaged kernels (backward difference in the
/// classical limit).
pub fn nonlocal_derivative(kw: &KernelWeights, hist: &HistorySeries) -> Result<f64> {
    let n = check_compatible(kw, hist)?;
    Ok(kw.derivative_at(hist.samples(), n))
}

/// Solve the fractional relaxation problem `D^k y = -lambda y`, `y(0) = y0`,
/// by the implicit L1 step. Serves as the self-contained oracle target for
/// the Mittag-Leffler comparison.
pub fn solve_fractional_relaxation(
    spec: &KernelSpec,
    lambda: f64,
    y0: f64,
) -> Result<HistorySeries> {
    if !(lambda >= 0.0) {
        return Err(Error::KernelSpec(format!(
            "relaxation rate must be nonnegative, got {lambda}"
        )));
    }
    let kw = tabulate_kernel(spec)?;
    let h = kw.step();
    let k = kw.cells();
    let mut y = Vec::with_capacity(spec.steps + 1);
    y.push(y0);
    if kw.is_classical() {
        for _ in 1..=spec.steps {
            let prev = *y.last().unwrap();
            y.push(prev / (1.0 + lambda * h));
        }
    } else {
        for n in 1..=spec.steps {
            // k0*(y_n - y_{n-1}) + hist = -lambda y_n
            let mut hist = 0.0;
            for j in 1..n {
                hist += k[n - j] * (y[j] - y[j - 1]);
            }
            let yn = (k[0] * y[n - 1] - hist) / (k[0] + lambda);
            y.push(yn);
        }
    }
    HistorySeries::new(h, y)
}

/// Discrete Alikhanov residual at the last sample:
/// `y_n D_n[y] - (1/2) D_n[y^2]`, which the L1 scheme keeps nonnegative.
pub fn check_alikhanov(kw: &KernelWeights, hist: &HistorySeries) -> Result<f64> {
    let n = check_compatible(kw, hist)?;
    let y = hist.samples();
    let squares: Vec<f64> = y.iter().map(|v| v * v).collect();
    let dy = kw.derivative_at(y, n);
    let dy2 = kw.derivative_at(&squares, n);
    Ok(y[n] * dy - 0.5 * dy2)
}
