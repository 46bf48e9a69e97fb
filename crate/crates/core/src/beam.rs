//! Simply supported Kelvin–Voigt beam on a nonlinear elastic foundation
//!
//! ```text
//! ρa w_tt + (EI w_ξξ + Cd w_tξξ)_ξξ + μ w_t + k w + α w³ = b(ξ; r) u(t)
//! w = w_ξξ = 0 at ξ = 0, ℓ
//! ```
//!
//! discretized by second-order finite differences on a uniform grid. The
//! fourth derivative uses the 5-point stencil with ghost values `w₋₁ = −w₁`,
//! which is exactly the square of the Dirichlet second-difference matrix.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{invalid, usage, Error, Result};
use crate::linalg::SymBand;
use crate::system::{ActuatorDesign, Discretization, Nonlinearity, SpatialModel, StateVec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamParams {
    /// Flexural rigidity `E·I`.
    pub ei: f64,
    /// Mass per unit length `ρ·a`.
    pub rho_a: f64,
    pub length: f64,
    /// Linear foundation stiffness.
    pub k: f64,
    /// Cubic foundation coefficient.
    pub alpha: f64,
    /// Viscous foundation damping.
    pub mu: f64,
    /// Kelvin–Voigt coefficient.
    pub cd: f64,
    pub n_cells: usize,
}

impl Default for BeamParams {
    fn default() -> Self {
        BeamParams {
            ei: 1.0,
            rho_a: 1.0,
            length: 1.0,
            k: 1.0,
            alpha: 1.0,
            mu: 0.1,
            cd: 0.01,
            n_cells: 64,
        }
    }
}

impl BeamParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("EI", self.ei),
            ("rho_a", self.rho_a),
            ("length", self.length),
            ("k", self.k),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("alpha", self.alpha), ("mu", self.mu), ("cd", self.cd)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.n_cells < 8 {
            return Err(invalid(format!("n_cells must be >= 8, got {}", self.n_cells)));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n_cells as f64
    }

    /// Interior node coordinates `ξ_i = i·h`, `i = 1..n_cells-1`.
    pub fn nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        (1..self.n_cells).map(|i| i as f64 * h).collect()
    }

    fn n_nodes(&self) -> usize {
        self.n_cells - 1
    }
}

/// Raised-cosine actuator of half-width `width`; its centre is the design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamActuator {
    pub r: f64,
    pub width: f64,
}

impl BeamActuator {
    fn check(&self, length: f64) -> Result<()> {
        if !(self.width > 0.0) {
            return Err(invalid(format!(
                "actuator width must be positive, got {}",
                self.width
            )));
        }
        if !(self.r - self.width > 0.0 && self.r + self.width < length) {
            return Err(Error::ProjectionRequired(format!(
                "support [{}, {}] leaves (0, {length})",
                self.r - self.width,
                self.r + self.width
            )));
        }
        Ok(())
    }

    /// `b(ξ; r) = (1 + cos(π(ξ − r)/W)) / 2W` on `|ξ − r| < W`.
    pub fn value(&self, xi: f64) -> f64 {
        let s = xi - self.r;
        if s.abs() >= self.width {
            0.0
        } else {
            (1.0 + libm::cos(PI * s / self.width)) / (2.0 * self.width)
        }
    }

    /// `∂b/∂r`.
    pub fn r_derivative(&self, xi: f64) -> f64 {
        let s = xi - self.r;
        if s.abs() >= self.width {
            0.0
        } else {
            PI * libm::sin(PI * s / self.width) / (2.0 * self.width * self.width)
        }
    }
}

/// Six-point Gauss–Legendre rule on [−1, 1].
const GAUSS6: [(f64, f64); 6] = [
    (-0.932_469_514_203_152, 0.171_324_492_379_170_3),
    (-0.661_209_386_466_264_5, 0.360_761_573_048_138_6),
    (-0.238_619_186_083_196_9, 0.467_913_934_572_691_1),
    (0.238_619_186_083_196_9, 0.467_913_934_572_691_1),
    (0.661_209_386_466_264_5, 0.360_761_573_048_138_6),
    (0.932_469_514_203_152, 0.171_324_492_379_170_3),
];

/// Nodal loads `(1/h) ∫ f(ξ) φ_i(ξ) dξ` against the hat functions, for `f`
/// supported on the actuator interval.
///
/// Point sampling of a bump only a few cells wide makes the cost ripple
/// with period `h` as the centre moves; the hat projection removes the
/// leading aliasing term and keeps `Σ h b_i = ∫ b` exact.
fn hat_loads(params: &BeamParams, act: &BeamActuator, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let h = params.spacing();
    let (lo, hi) = (act.r - act.width, act.r + act.width);
    let quad = |a: f64, c: f64, weight: &dyn Fn(f64) -> f64| -> f64 {
        if c <= a {
            return 0.0;
        }
        let (mid, half) = (0.5 * (a + c), 0.5 * (c - a));
        GAUSS6
            .iter()
            .map(|(x, w)| {
                let xi = mid + half * x;
                w * f(xi) * weight(xi)
            })
            .sum::<f64>()
            * half
    };
    params
        .nodes()
        .into_iter()
        .map(|xi| {
            let left = quad(lo.max(xi - h), hi.min(xi), &|s| (s - (xi - h)) / h);
            let right = quad(lo.max(xi), hi.min(xi + h), &|s| ((xi + h) - s) / h);
            (left + right) / h
        })
        .collect()
}

/// Actuator shape projected onto the interior nodes.
pub fn beam_b(params: &BeamParams, act: &BeamActuator) -> Result<Vec<f64>> {
    act.check(params.length)?;
    Ok(hat_loads(params, act, |xi| act.value(xi)))
}

/// `∂/∂r` of [`beam_b`]; the shape vanishes at the support ends, so this is
/// the projection of `∂b/∂r`.
pub fn beam_b_r(params: &BeamParams, act: &BeamActuator) -> Result<Vec<f64>> {
    act.check(params.length)?;
    Ok(hat_loads(params, act, |xi| act.r_derivative(xi)))
}

/// Green's function of `h'''' = δ(ξ − η)` with simply supported ends.
pub fn greens_eval(params: &BeamParams, xi: f64, eta: f64) -> Result<f64> {
    let l = params.length;
    if !(0.0..=l).contains(&xi) || !(0.0..=l).contains(&eta) {
        return Err(usage(format!("({xi}, {eta}) lies outside [0, {l}]²")));
    }
    // branch for ξ ≤ η; the other branch is its mirror image
    let (x, y) = if xi <= eta { (xi, eta) } else { (eta, xi) };
    Ok(((2.0 * l * l * y - 3.0 * l * y * y + y * y * y) * x + (y - l) * x * x * x) / (6.0 * l))
}

/// Dirichlet second-difference matrix on the interior nodes.
fn second_difference(n: usize, h: f64) -> SymBand {
    let mut d2 = SymBand::zeros(n, 1);
    let c = 1.0 / (h * h);
    for i in 0..n {
        d2.add(i, i, -2.0 * c);
        if i + 1 < n {
            d2.add(i + 1, i, c);
        }
    }
    d2
}

/// 5-point fourth-difference matrix with ghost reflection at both ends.
fn fourth_difference(n: usize, h: f64) -> SymBand {
    let mut d4 = SymBand::zeros(n, 2);
    let c = 1.0 / (h * h * h * h);
    for i in 0..n {
        let diag = if i == 0 || i == n - 1 { 5.0 } else { 6.0 };
        d4.add(i, i, diag * c);
        if i + 1 < n {
            d4.add(i + 1, i, -4.0 * c);
        }
        if i + 2 < n {
            d4.add(i + 2, i, c);
        }
    }
    d4
}

/// Applies the 5-point fourth-difference stencil directly, padding the
/// interior values with the boundary zeros and reflected ghosts.
pub fn apply_d4(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let at = |j: isize| -> f64 {
        // padded index: -1 ghost, 0 boundary, 1..=n interior, n+1 boundary, n+2 ghost
        match j {
            0 => 0.0,
            j if j == n as isize + 1 => 0.0,
            -1 => -values[0],
            j if j == n as isize + 2 => -values[n - 1],
            j => values[(j - 1) as usize],
        }
    };
    let c = 1.0 / (h * h * h * h);
    (1..=n as isize)
        .map(|i| c * (at(i - 2) - 4.0 * at(i - 1) + 6.0 * at(i) - 4.0 * at(i + 1) + at(i + 2)))
        .collect()
}

/// Solves `EI h'''' + k h = −3α (w_ref)² g` with simply supported ends,
/// using the same fourth-difference stencil as the dynamics.
///
/// Only `EI > 0`, `k ≥ 0` is required here, so the Green's-function
/// configuration (`EI = 1`, `k = 0`) can be exercised.
pub fn beam_adjoint_h(params: &BeamParams, w_ref: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    let n = params.n_nodes();
    if w_ref.len() != n || g.len() != n {
        return Err(usage(format!("fields must have {n} entries")));
    }
    if !(params.ei > 0.0) || !(params.k >= 0.0) {
        return Err(invalid("adjoint problem needs EI > 0 and k >= 0"));
    }
    let h = params.spacing();
    let op = fourth_difference(n, h);
    let op = SymBand::zeros(n, 2)
        .add_scaled(params.ei, &op)
        .add_scaled(params.k, &SymBand::identity(n));
    let rhs: Vec<f64> = w_ref
        .iter()
        .zip(g)
        .map(|(w, g)| -3.0 * params.alpha * w * w * g)
        .collect();
    let chol = op
        .cholesky()
        .map_err(|e| Error::Internal(format!("beam adjoint operator: {e}")))?;
    Ok(chol.solve(&rhs))
}

/// Assembled beam model.
#[derive(Debug, Clone)]
pub struct Beam {
    params: BeamParams,
    width: f64,
}

impl Beam {
    pub fn new(params: BeamParams, width: f64) -> Result<Self> {
        params.validate()?;
        if !(width > 0.0) || 2.0 * (width + params.spacing()) >= params.length {
            return Err(invalid(format!(
                "actuator width {width} does not fit on a beam of length {}",
                params.length
            )));
        }
        Ok(Beam { params, width })
    }

    pub fn params(&self) -> &BeamParams {
        &self.params
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.params.nodes()
    }

    pub fn actuator(&self, r: f64) -> BeamActuator {
        BeamActuator { r, width: self.width }
    }

    fn design_r(&self, design: &ActuatorDesign) -> Result<f64> {
        match design.as_slice() {
            [r] => Ok(*r),
            other => Err(usage(format!(
                "beam design has one parameter, got {}",
                other.len()
            ))),
        }
    }

    /// Builds the discretization `A_h`, Gram operator and nonlinearity.
    pub fn assemble(&self) -> Result<Discretization> {
        assemble_beam_with(self.clone())
    }
}

/// Assembles the default-width beam (`width = 0.05·ℓ`).
pub fn assemble_beam(params: BeamParams) -> Result<Discretization> {
    let width = 0.05 * params.length;
    Beam::new(params, width)?.assemble()
}

fn assemble_beam_with(beam: Beam) -> Result<Discretization> {
    let p = beam.params;
    let n = p.n_nodes();
    let h = p.spacing();
    let d4 = fourth_difference(n, h);
    let id = SymBand::identity(n);
    let stiffness = SymBand::zeros(n, 2)
        .add_scaled(h * p.ei, &d4)
        .add_scaled(h * p.k, &id);
    let damping = if p.cd > 0.0 || p.mu > 0.0 {
        Some(
            SymBand::zeros(n, 2)
                .add_scaled(h * p.cd, &d4)
                .add_scaled(h * p.mu, &id),
        )
    } else {
        None
    };
    let nonlinearity = if p.alpha > 0.0 {
        Nonlinearity::Cubic {
            coefficient: -p.alpha / p.rho_a,
        }
    } else {
        Nonlinearity::None
    };
    Discretization::new(
        Arc::new(beam),
        vec![h * p.rho_a; n],
        stiffness,
        damping,
        nonlinearity,
    )
}

impl SpatialModel for Beam {
    fn n_nodes(&self) -> usize {
        self.params.n_nodes()
    }

    fn design_dim(&self) -> usize {
        1
    }

    fn design_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let margin = self.width + self.params.spacing();
        (vec![margin], vec![self.params.length - margin])
    }

    fn influence(&self, design: &ActuatorDesign) -> Result<Vec<f64>> {
        let b = beam_b(&self.params, &self.actuator(self.design_r(design)?))?;
        Ok(b.into_iter().map(|v| v / self.params.rho_a).collect())
    }

    fn influence_gradient(&self, design: &ActuatorDesign) -> Result<Vec<Vec<f64>>> {
        let br = beam_b_r(&self.params, &self.actuator(self.design_r(design)?))?;
        Ok(vec![br.into_iter().map(|v| v / self.params.rho_a).collect()])
    }

    fn weighted_stiffness(&self, weights: &[f64]) -> SymBand {
        let p = &self.params;
        let n = p.n_nodes();
        let h = p.spacing();
        let d2 = second_difference(n, h);
        // h·(EI·D2ᵀ diag(q) D2 + k·diag(q))
        let mut out = SymBand::zeros(n, 2);
        for i in 0..n {
            for j in i.saturating_sub(2)..=i {
                let mut s = 0.0;
                for m in i.saturating_sub(1)..=(i + 1).min(n - 1) {
                    s += d2.get(m, i) * weights[m] * d2.get(m, j);
                }
                let mut v = h * p.ei * s;
                if i == j {
                    v += h * p.k * weights[i];
                }
                out.add(i, j, v);
            }
        }
        out
    }

    fn adjoint_generator(&self, p: &StateVec) -> StateVec {
        // A*(f, g) = (−g, (EI·f'''' + k f − Cd·g'''' − μ g)/ρa)
        let bp = &self.params;
        let h = bp.spacing();
        let d4f = apply_d4(&p.w, h);
        let d4g = apply_d4(&p.v, h);
        let v = (0..p.len())
            .map(|i| (bp.ei * d4f[i] + bp.k * p.w[i] - bp.cd * d4g[i] - bp.mu * p.v[i]) / bp.rho_a)
            .collect();
        StateVec {
            w: p.v.iter().map(|g| -g).collect(),
            v,
        }
    }

    fn nonlinear_adjoint(&self, w_ref: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        beam_adjoint_h(&self.params, w_ref, g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourth_difference_is_square_of_second() {
        let n = 12;
        let h = 0.1;
        let d2 = second_difference(n, h);
        let d4 = fourth_difference(n, h);
        let x: Vec<f64> = (0..n)
            .map(|i| libm::sin(1.3 * i as f64) + 0.1 * i as f64)
            .collect();
        let a = d4.mul_vec(&x);
        let b = d2.mul_vec(&d2.mul_vec(&x));
        let c = apply_d4(&x, h);
        for i in 0..n {
            assert!((a[i] - b[i]).abs() <= 1e-9 * a[i].abs().max(1.0));
            assert!((a[i] - c[i]).abs() <= 1e-9 * a[i].abs().max(1.0));
        }
    }

    #[test]
    fn unit_weights_reproduce_stiffness() {
        let beam = Beam::new(BeamParams::default(), 0.05).unwrap();
        let disc = beam.assemble().unwrap();
        let w = beam.weighted_stiffness(&vec![1.0; beam.n_nodes()]);
        for i in 0..beam.n_nodes() {
            for j in i.saturating_sub(2)..=i {
                let a = w.get(i, j);
                let b = disc.stiffness().get(i, j);
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "({i},{j}) {a} {b}");
            }
        }
    }

    #[test]
    fn actuator_support_violation() {
        let p = BeamParams::default();
        let act = BeamActuator { r: 0.02, width: 0.05 };
        assert!(matches!(beam_b(&p, &act), Err(Error::ProjectionRequired(_))));
        assert!(matches!(beam_b_r(&p, &act), Err(Error::ProjectionRequired(_))));
    }

    #[test]
    fn params_validation() {
        let base = BeamParams::default();
        assert!(BeamParams { k: 0.0, ..base }.validate().is_err());
        assert!(BeamParams { n_cells: 4, ..base }.validate().is_err());
        assert!(BeamParams { cd: -1.0, ..base }.validate().is_err());
    }

    #[test]
    fn greens_out_of_domain() {
        let p = BeamParams::default();
        assert!(greens_eval(&p, -0.1, 0.5).is_err());
        assert!(greens_eval(&p, 0.5, 1.5).is_err());
    }

    #[test]
    fn adjoint_h_trivial_cases() {
        let p = BeamParams::default();
        let n = p.n_cells - 1;
        let w: Vec<f64> = p.nodes().iter().map(|x| libm::sin(PI * x)).collect();
        let h = beam_adjoint_h(&p, &w, &vec![0.0; n]).unwrap();
        assert!(h.iter().all(|&v| v == 0.0));
        let lin = BeamParams { alpha: 0.0, ..p };
        let h = beam_adjoint_h(&lin, &w, &vec![1.0; n]).unwrap();
        assert!(h.iter().all(|&v| v == 0.0));
    }
}
