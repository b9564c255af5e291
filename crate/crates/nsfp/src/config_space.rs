//! Spring potentials, the Maxwellian on the configuration ball, quadrature,
//! the Kramers stress in both equivalent forms, and the truncation operators.
//!
//! The quadrature is a tensor product of Gauss-Legendre in the radius against
//! the polar Jacobian and the trapezoid rule in the angle; nodes are interior
//! by construction, which keeps `U'` finite and `M > 0` at every node.

use gauss_quad::legendre::GaussLegendre;

use crate::{Error, Result, Tensor2};

/// FENE spring: `U(s) = -(b/2) ln(1 - 2s/b)` on `[0, b/2)`, ball radius `sqrt(b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpringPotential {
    b: f64,
}

impl SpringPotential {
    /// Requires `b > 2` so that the Maxwellian is C^1 up to the boundary.
    pub fn fene(b: f64) -> Result<Self> {
        if !(b > 2.0) {
            return Err(Error::Potential(format!(
                "FENE extensibility must exceed 2, got {b}"
            )));
        }
        Ok(SpringPotential { b })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Radius of the configuration ball D.
    pub fn radius(&self) -> f64 {
        self.b.sqrt()
    }

    /// `U(s)` with `s = |q|^2 / 2`.
    pub fn u(&self, s: f64) -> f64 {
        -(self.b / 2.0) * (1.0 - 2.0 * s / self.b).ln()
    }

    /// `U'(s) = b / (b - 2s) = 1 / (1 - |q|^2/b)`.
    pub fn u_prime(&self, s: f64) -> f64 {
        self.b / (self.b - 2.0 * s)
    }

    /// Unnormalized Maxwellian `exp(-U(r^2/2)) = (1 - r^2/b)^{b/2}`.
    pub fn maxwellian_raw(&self, r: f64) -> f64 {
        let x = 1.0 - r * r / self.b;
        if x <= 0.0 {
            0.0
        } else {
            x.powf(self.b / 2.0)
        }
    }
}

/// Polar quadrature table for the disk D with Maxwellian data at the nodes.
///
/// Node (i, j) sits at radius `r_nodes[i]`, angle `2*pi*j/n_theta`, with
/// weight `w[i*n_theta+j]`; `sum w*m = 1` by construction.
#[derive(Debug, Clone)]
pub struct MaxwellianTable {
    pot: SpringPotential,
    n_r: usize,
    n_theta: usize,
    r_nodes: Vec<f64>,
    dtheta: f64,
    weights: Vec<f64>,
    m: Vec<f64>,
    u_prime: Vec<f64>,
    /// Discrete normalization `Z = sum w * exp(-U)`.
    norm: f64,
}

/// Build the Maxwellian quadrature table.
pub fn build_maxwellian(pot: SpringPotential, n_r: usize, n_theta: usize) -> Result<MaxwellianTable> {
    if n_r < 4 || n_theta < 4 {
        return Err(Error::Quadrature(format!(
            "need at least 4 nodes per direction, got ({n_r}, {n_theta})"
        )));
    }
    let radius = pot.radius();
    let rule = GaussLegendre::new(n_r)
        .map_err(|e| Error::Quadrature(format!("Gauss-Legendre rule: {e}")))?;
    // Map from [-1, 1] to (0, R); gauss-quad lists nodes in descending order.
    let mut pairs: Vec<(f64, f64)> = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (0.5 * radius * (x + 1.0), 0.5 * radius * w))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let r_nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let r_weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let dtheta = 2.0 * std::f64::consts::PI / n_theta as f64;

    let mut weights = Vec::with_capacity(n_r * n_theta);
    let mut m_raw = Vec::with_capacity(n_r * n_theta);
    let mut u_prime = Vec::with_capacity(n_r * n_theta);
    for i in 0..n_r {
        let r = r_nodes[i];
        let mr = pot.maxwellian_raw(r);
        let up = pot.u_prime(0.5 * r * r);
        for _ in 0..n_theta {
            weights.push(r_weights[i] * r * dtheta);
            m_raw.push(mr);
            u_prime.push(up);
        }
    }
    let norm: f64 = weights.iter().zip(&m_raw).map(|(w, m)| w * m).sum();
    if !(norm > 0.0) {
        return Err(Error::Quadrature("Maxwellian normalization vanished".into()));
    }
    let m: Vec<f64> = m_raw.iter().map(|v| v / norm).collect();
    Ok(MaxwellianTable {
        pot,
        n_r,
        n_theta,
        r_nodes,
        dtheta,
        weights,
        m,
        u_prime,
        norm,
    })
}

impl MaxwellianTable {
    pub fn potential(&self) -> SpringPotential {
        self.pot
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    /// Number of quadrature nodes (= n_r * n_theta).
    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.pot.radius()
    }

    pub fn r_nodes(&self) -> &[f64] {
        &self.r_nodes
    }

    pub fn dtheta(&self) -> f64 {
        self.dtheta
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.dtheta
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn m(&self) -> &[f64] {
        &self.m
    }

    pub fn u_prime(&self) -> &[f64] {
        &self.u_prime
    }

    pub fn idx(&self, i_r: usize, j_theta: usize) -> usize {
        i_r * self.n_theta + j_theta
    }

    /// Cartesian coordinates of node (i, j).
    pub fn node(&self, i_r: usize, j_theta: usize) -> [f64; 2] {
        let r = self.r_nodes[i_r];
        let th = self.theta(j_theta);
        [r * th.cos(), r * th.sin()]
    }

    /// Normalized Maxwellian at an arbitrary radius (used at cell faces).
    pub fn m_at_radius(&self, r: f64) -> f64 {
        self.pot.maxwellian_raw(r) / self.norm
    }

    /// `sum w * M * f` over all nodes.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(&self.m)
            .zip(f)
            .map(|((w, m), v)| w * m * v)
            .sum()
    }

    /// Gradient of a node-sampled profile by finite differences on the polar
    /// grid: three-point nonuniform stencils radially (one-sided at the first
    /// and last ring), periodic central differences in the angle.
    pub fn gradient(&self, psi: &[f64]) -> Result<Vec<[f64; 2]>> {
        if psi.len() != self.len() {
            return Err(Error::Shape(format!(
                "profile has {} values, table has {} nodes",
                psi.len(),
                self.len()
            )));
        }
        let (n_r, n_t) = (self.n_r, self.n_theta);
        let r = &self.r_nodes;
        let mut grad = vec![[0.0; 2]; psi.len()];
        for i in 0..n_r {
            for j in 0..n_t {
                let at = |ii: usize, jj: usize| psi[self.idx(ii, jj)];
                let dr = if i == 0 {
                    let (h1, h2) = (r[1] - r[0], r[2] - r[1]);
                    let (f0, f1, f2) = (at(0, j), at(1, j), at(2, j));
                    -f0 * (2.0 * h1 + h2) / (h1 * (h1 + h2)) + f1 * (h1 + h2) / (h1 * h2)
                        - f2 * h1 / (h2 * (h1 + h2))
                } else if i == n_r - 1 {
                    let (h1, h2) = (r[n_r - 2] - r[n_r - 3], r[n_r - 1] - r[n_r - 2]);
                    let (f0, f1, f2) = (at(n_r - 3, j), at(n_r - 2, j), at(n_r - 1, j));
                    f0 * h2 / (h1 * (h1 + h2)) - f1 * (h1 + h2) / (h1 * h2)
                        + f2 * (h1 + 2.0 * h2) / (h2 * (h1 + h2))
                } else {
                    let (h1, h2) = (r[i] - r[i - 1], r[i + 1] - r[i]);
                    let (f0, f1, f2) = (at(i - 1, j), at(i, j), at(i + 1, j));
                    -f0 * h2 / (h1 * (h1 + h2)) + f1 * (h2 - h1) / (h1 * h2)
                        + f2 * h1 / (h2 * (h1 + h2))
                };
                let jp = (j + 1) % n_t;
                let jm = (j + n_t - 1) % n_t;
                let dth = (at(i, jp) - at(i, jm)) / (2.0 * self.dtheta) / r[i];
                let th = self.theta(j);
                let (c, s) = (th.cos(), th.sin());
                grad[self.idx(i, j)] = [dr * c - dth * s, dr * s + dth * c];
            }
        }
        Ok(grad)
    }
}

/// Which algebraic route computes the Kramers stress.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StressForm {
    /// `-K (int M psi) I + int M psi q q^T U' dq`
    Potential,
    /// `int M grad_q(psi) (x) q dq` with a finite-difference gradient
    Gradient,
}

/// Kramers stress of a scaled density profile at one spatial point (K = 1).
pub fn kramers_stress(psi: &[f64], tab: &MaxwellianTable, form: StressForm) -> Result<Tensor2> {
    if psi.len() != tab.len() {
        return Err(Error::Shape(format!(
            "profile has {} values, table has {} nodes",
            psi.len(),
            tab.len()
        )));
    }
    match form {
        StressForm::Potential => {
            let mut s = [[0.0; 2]; 2];
            let mut trace = 0.0;
            for i in 0..tab.n_r {
                for j in 0..tab.n_theta {
                    let id = tab.idx(i, j);
                    let wm = tab.weights[id] * tab.m[id] * psi[id];
                    let q = tab.node(i, j);
                    let up = tab.u_prime[id];
                    trace += wm;
                    for a in 0..2 {
                        for b in 0..2 {
                            s[a][b] += wm * q[a] * q[b] * up;
                        }
                    }
                }
            }
            s[0][0] -= trace;
            s[1][1] -= trace;
            Ok(s)
        }
        StressForm::Gradient => {
            let grad = tab.gradient(psi)?;
            let mut s = [[0.0; 2]; 2];
            for i in 0..tab.n_r {
                for j in 0..tab.n_theta {
                    let id = tab.idx(i, j);
                    let wm = tab.weights[id] * tab.m[id];
                    let q = tab.node(i, j);
                    for a in 0..2 {
                        for b in 0..2 {
                            s[a][b] += wm * grad[id][a] * q[b];
                        }
                    }
                }
            }
            Ok(s)
        }
    }
}

/// Smooth cutoff family at level `ell`: `Gamma_ell` equals 1 on `[-ell, ell]`,
/// vanishes outside `(-2 ell, 2 ell)`, with a C^2 quintic transition; `T_ell`
/// is its primitive and `Lambda_ell(s) = s Gamma_ell(s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationOps {
    ell: f64,
}

impl TruncationOps {
    pub fn new(ell: f64) -> Result<Self> {
        if !(ell > 0.0) {
            return Err(Error::Config(format!(
                "truncation level must be positive, got {ell}"
            )));
        }
        Ok(TruncationOps { ell })
    }

    pub fn level(&self) -> f64 {
        self.ell
    }

    /// Quintic transition profile on the reference scale: 1 on [0,1], 0 from 2 on.
    fn profile(x: f64) -> f64 {
        if x <= 1.0 {
            1.0
        } else if x >= 2.0 {
            0.0
        } else {
            let u = x - 1.0;
            1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
        }
    }

    /// Primitive of the profile; equals 1.5 from x = 2 on.
    fn profile_primitive(x: f64) -> f64 {
        if x <= 1.0 {
            x
        } else if x >= 2.0 {
            1.5
        } else {
            let u = x - 1.0;
            // int_0^u of the quintic bump: 2.5 u^4 - 3 u^5 + u^6
            1.0 + u - (2.5 - 3.0 * u + u * u) * u * u * u * u
        }
    }

    /// `Gamma_ell(s)`, an even function of `s`.
    pub fn gamma(&self, s: f64) -> f64 {
        if s.abs() <= self.ell {
            return 1.0;
        }
        Self::profile(s.abs() / self.ell)
    }

    /// `T_ell(s) = int_0^s Gamma_ell`, odd and nondecreasing.
    pub fn t(&self, s: f64) -> f64 {
        if s.abs() <= self.ell {
            return s;
        }
        s.signum() * self.ell * Self::profile_primitive(s.abs() / self.ell)
    }

    /// `Lambda_ell(s) = s Gamma_ell(s)`.
    pub fn lambda(&self, s: f64) -> f64 {
        if s.abs() <= self.ell {
            return s;
        }
        s * self.gamma(s)
    }
}

/// Evaluate `(Gamma_ell, T_ell, Lambda_ell)` at a point.
pub fn evaluate_truncations(ops: &TruncationOps, s: f64) -> (f64, f64, f64) {
    (ops.gamma(s), ops.t(s), ops.lambda(s))
}

/// Truncated Kramers stress `S_ell(psi) = S(T_ell(psi))` in potential form.
pub fn truncated_stress(psi: &[f64], tab: &MaxwellianTable, ops: &TruncationOps) -> Result<Tensor2> {
    let cut: Vec<f64> = psi.iter().map(|&v| ops.t(v)).collect();
    kramers_stress(&cut, tab, StressForm::Potential)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_norm;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn smooth_profile(tab: &MaxwellianTable) -> Vec<f64> {
        // Fixed smooth test profile, polynomial-plus-exponential in Cartesian q.
        (0..tab.n_r())
            .flat_map(|i| {
                (0..tab.n_theta()).map(move |j| (i, j)).collect::<Vec<_>>()
            })
            .map(|(i, j)| {
                let q = tab.node(i, j);
                1.0 + 0.4 * (0.3 * q[0] - 0.2 * q[1]).exp() + 0.15 * q[0] * q[1]
                    - 0.1 * (q[0] * q[0] - q[1] * q[1])
            })
            .collect()
    }

    #[test]
    fn rejects_inadmissible_extensibility() {
        assert!(SpringPotential::fene(2.0).is_err());
        assert!(SpringPotential::fene(1.0).is_err());
        assert!(SpringPotential::fene(2.0001).is_ok());
    }

    #[test]
    fn rejects_degenerate_grids() {
        let pot = SpringPotential::fene(4.0).unwrap();
        assert!(build_maxwellian(pot, 3, 16).is_err());
        assert!(build_maxwellian(pot, 16, 3).is_err());
    }

    #[test]
    fn normalization_is_forced() {
        for &b in &[2.5, 4.0, 10.0] {
            let pot = SpringPotential::fene(b).unwrap();
            let tab = build_maxwellian(pot, 24, 16).unwrap();
            let total: f64 = tab.weights().iter().zip(tab.m()).map(|(w, m)| w * m).sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn center_value_matches_closed_form_disk_integral() {
        // int_D (1 - |q|^2/b)^{b/2} dq = 2 pi b / (b + 2), so the normalized
        // density at the origin is (b+2)/(2 pi b). For b = 4 the integrand is
        // polynomial and Gauss-Legendre integrates it exactly.
        let b = 4.0;
        let pot = SpringPotential::fene(b).unwrap();
        let tab = build_maxwellian(pot, 16, 16).unwrap();
        let expected = (b + 2.0) / (2.0 * std::f64::consts::PI * b);
        assert_relative_eq!(tab.m_at_radius(0.0), expected, max_relative = 1e-12);
    }

    #[test]
    fn maxwellian_vanishes_toward_the_boundary() {
        let pot = SpringPotential::fene(4.0).unwrap();
        let tab = build_maxwellian(pot, 32, 8).unwrap();
        let r = tab.r_nodes();
        let last = tab.m()[tab.idx(tab.n_r() - 1, 0)];
        let first = tab.m()[tab.idx(0, 0)];
        assert!(last < 1e-3 * first);
        assert!(r.iter().all(|&x| x > 0.0 && x < tab.radius()));
        assert_abs_diff_eq!(tab.m_at_radius(tab.radius()), 0.0, epsilon = 1e-300);
    }

    #[test]
    fn moment_identity_behind_stress_equivalence() {
        // int M q q^T U' dq = (int M dq) I, the integration-by-parts moment.
        let pot = SpringPotential::fene(4.0).unwrap();
        let tab = build_maxwellian(pot, 32, 32).unwrap();
        let mut s = [[0.0; 2]; 2];
        for i in 0..tab.n_r() {
            for j in 0..tab.n_theta() {
                let id = tab.idx(i, j);
                let wm = tab.weights()[id] * tab.m()[id] * tab.u_prime()[id];
                let q = tab.node(i, j);
                for a in 0..2 {
                    for b in 0..2 {
                        s[a][b] += wm * q[a] * q[b];
                    }
                }
            }
        }
        assert_relative_eq!(s[0][0], 1.0, max_relative = 1e-10);
        assert_relative_eq!(s[1][1], 1.0, max_relative = 1e-10);
        assert_abs_diff_eq!(s[0][1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1][0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn stress_of_equilibrium_profile_vanishes() {
        let pot = SpringPotential::fene(4.0).unwrap();
        let tab = build_maxwellian(pot, 32, 32).unwrap();
        let ones = vec![1.0; tab.len()];
        let sp = kramers_stress(&ones, &tab, StressForm::Potential).unwrap();
        let sg = kramers_stress(&ones, &tab, StressForm::Gradient).unwrap();
        assert!(tensor_norm(&sp) <= 1e-8, "potential form {sp:?}");
        assert!(tensor_norm(&sg) <= 1e-14, "gradient form {sg:?}");
    }

    #[test]
    fn stress_forms_agree_under_refinement() {
        let pot = SpringPotential::fene(4.0).unwrap();
        let mut gaps = Vec::new();
        for &n in &[16usize, 32, 64] {
            let tab = build_maxwellian(pot, n, n).unwrap();
            let psi = smooth_profile(&tab);
            let sp = kramers_stress(&psi, &tab, StressForm::Potential).unwrap();
            let sg = kramers_stress(&psi, &tab, StressForm::Gradient).unwrap();
            let mut diff = [[0.0; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    diff[a][b] = sp[a][b] - sg[a][b];
                }
            }
            gaps.push(tensor_norm(&diff));
        }
        assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "gaps {gaps:?}");
        let order = (gaps[0] / gaps[2]).log2() / 2.0;
        assert!(order >= 1.0, "observed order {order}, gaps {gaps:?}");
    }

    #[test]
    fn radially_symmetric_profile_gives_isotropic_stress() {
        let pot = SpringPotential::fene(4.0).unwrap();
        let tab = build_maxwellian(pot, 32, 32).unwrap();
        let psi: Vec<f64> = (0..tab.n_r())
            .flat_map(|i| std::iter::repeat(1.0 + tab.r_nodes()[i].powi(2)).take(tab.n_theta()))
            .collect();
        for form in [StressForm::Potential, StressForm::Gradient] {
            let s = kramers_stress(&psi, &tab, form).unwrap();
            assert_abs_diff_eq!(s[0][1], 0.0, epsilon = 1e-10);
            assert_abs_diff_eq!(s[1][0], 0.0, epsilon = 1e-10);
            assert_relative_eq!(s[0][0], s[1][1], max_relative = 1e-8);
        }
    }

    #[test]
    fn stress_shape_mismatch_rejected() {
        let pot = SpringPotential::fene(4.0).unwrap();
        let tab = build_maxwellian(pot, 8, 8).unwrap();
        assert!(kramers_stress(&[1.0; 3], &tab, StressForm::Potential).is_err());
    }

    #[test]
    fn truncation_pointwise_values() {
        let ops = TruncationOps::new(2.0).unwrap();
        let ell = ops.level();
        // Below the level the triple is (1, s, s).
        let (g, t, l) = evaluate_truncations(&ops, ell / 2.0);
        assert_eq!((g, t, l), (1.0, ell / 2.0, ell / 2.0));
        // At 2 ell the cutoff vanishes and T_ell(2 ell) = 1.5 ell in [ell, 2 ell].
        let (g2, t2, l2) = evaluate_truncations(&ops, 2.0 * ell);
        assert_eq!(g2, 0.0);
        assert_eq!(l2, 0.0);
        assert!(t2 >= ell && t2 <= 2.0 * ell);
        assert_relative_eq!(t2, 1.5 * ell, max_relative = 1e-14);
    }

    #[test]
    fn truncation_profile_properties() {
        let ops = TruncationOps::new(1.3).unwrap();
        let mut prev_t = f64::NEG_INFINITY;
        for k in -400..=400 {
            let s = k as f64 * 0.01;
            let (g, t, l) = evaluate_truncations(&ops, s);
            assert!((0.0..=1.0).contains(&g));
            assert!(t >= prev_t, "T_ell must be nondecreasing");
            prev_t = t;
            if s.abs() <= ops.level() {
                assert_eq!(l, s);
            }
            assert!(t.abs() <= 2.0 * ops.level() + 1e-12);
        }
        // C^1 check of Gamma at the seams by symmetric differences.
        for &s in &[1.3, 2.6] {
            let d = 1e-6;
            let left = (ops.gamma(s) - ops.gamma(s - d)) / d;
            let right = (ops.gamma(s + d) - ops.gamma(s)) / d;
            assert_abs_diff_eq!(left, right, epsilon = 1e-4);
        }
    }

    #[test]
    fn truncated_stress_matches_plain_stress_below_level() {
        let pot = SpringPotential::fene(4.0).unwrap();
        let tab = build_maxwellian(pot, 24, 24).unwrap();
        let psi = smooth_profile(&tab);
        let ops = TruncationOps::new(50.0).unwrap();
        let a = truncated_stress(&psi, &tab, &ops).unwrap();
        let b = kramers_stress(&psi, &tab, StressForm::Potential).unwrap();
        assert_eq!(a, b, "T_ell is the identity below the level");
    }

    #[test]
    fn truncated_stress_of_large_constant_vanishes() {
        // psi = 3 ell truncates to the constant T_ell(3 ell), whose Kramers
        // terms cancel like the equilibrium profile's do.
        let pot = SpringPotential::fene(4.0).unwrap();
        let tab = build_maxwellian(pot, 32, 32).unwrap();
        let ops = TruncationOps::new(1.5).unwrap();
        let psi = vec![3.0 * ops.level(); tab.len()];
        let s = truncated_stress(&psi, &tab, &ops).unwrap();
        assert!(tensor_norm(&s) <= 1e-8 * 1.5, "{s:?}");
    }

    #[test]
    fn truncated_stress_uniformly_bounded_by_level() {
        let pot = SpringPotential::fene(4.0).unwrap();
        let tab = build_maxwellian(pot, 24, 24).unwrap();
        let ops = TruncationOps::new(2.0).unwrap();
        // Moment constant: |S_ell| <= 2 ell (sum wM + max sum wM U' |q_a q_b|).
        let mut moment: f64 = 1.0;
        for a in 0..2 {
            for b in 0..2 {
                let mut acc = 0.0;
                for i in 0..tab.n_r() {
                    for j in 0..tab.n_theta() {
                        let id = tab.idx(i, j);
                        let q = tab.node(i, j);
                        acc += tab.weights()[id] * tab.m()[id] * tab.u_prime()[id]
                            * (q[a] * q[b]).abs();
                    }
                }
                moment = moment.max(acc);
            }
        }
        let bound = 2.0 * ops.level() * (1.0 + moment);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let psi: Vec<f64> = (0..tab.len()).map(|_| rng.gen_range(0.0..100.0)).collect();
            let s = truncated_stress(&psi, &tab, &ops).unwrap();
            for row in &s {
                for &v in row {
                    assert!(v.abs() <= bound, "entry {v} exceeds C*ell bound {bound}");
                }
            }
        }
    }
}
