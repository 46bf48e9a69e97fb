//! Semi-linear wave equation on a rectangle
//!
//! ```text
//! w_tt = Δw + F(w) + r(ξ) u(t)      in Ω = (0, Lx) × (0, Ly)
//! w = 0 on Γ0,   ∂w/∂ν = 0 on Γ1
//! ```
//!
//! with Γ0/Γ1 unions of whole edges. The stiffness is the matrix of the
//! first-difference Dirichlet energy `∫|∇w|²` with trapezoid edge weights,
//! the mass is the trapezoid node weight, and `Δ_h = −M⁻¹K` coincides with
//! the 5-point stencil using mirrored ghost values on Neumann edges.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{invalid, usage, Error, Result};
use crate::linalg::{BandCholesky, SymBand};
use crate::system::{ActuatorDesign, Discretization, Nonlinearity, SpatialModel, StateVec};

/// Which rectangle edges carry homogeneous Neumann conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NeumannEdges {
    pub left: bool,
    pub right: bool,
    pub bottom: bool,
    pub top: bool,
}

impl NeumannEdges {
    pub fn all_dirichlet() -> Self {
        Self::default()
    }

    pub fn is_all_neumann(&self) -> bool {
        self.left && self.right && self.bottom && self.top
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WaveNonlinearity {
    None,
    /// `F(w) = sin w`
    SineGordon,
    /// `F(w) = |w|ᵏ w`, `k ≥ 2`
    KleinGordon {
        exponent: u32,
    },
}

impl WaveNonlinearity {
    pub fn to_pointwise(self) -> Nonlinearity {
        match self {
            WaveNonlinearity::None => Nonlinearity::None,
            WaveNonlinearity::SineGordon => Nonlinearity::Sine,
            WaveNonlinearity::KleinGordon { exponent } => Nonlinearity::Power { exponent },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveParams {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    pub neumann: NeumannEdges,
    pub nonlinearity: WaveNonlinearity,
}

impl Default for WaveParams {
    fn default() -> Self {
        WaveParams {
            lx: 1.0,
            ly: 1.0,
            nx: 48,
            ny: 48,
            neumann: NeumannEdges::all_dirichlet(),
            nonlinearity: WaveNonlinearity::SineGordon,
        }
    }
}

impl WaveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lx > 0.0) || !(self.ly > 0.0) {
            return Err(invalid("rectangle sides must be positive"));
        }
        if self.nx < 8 || self.ny < 8 {
            return Err(invalid(format!(
                "grid resolution must be >= 8 per axis, got {}x{}",
                self.nx, self.ny
            )));
        }
        if self.neumann.is_all_neumann() {
            return Err(invalid("at least one edge must carry the Dirichlet condition"));
        }
        if let WaveNonlinearity::KleinGordon { exponent } = self.nonlinearity {
            if exponent < 2 {
                return Err(invalid(format!(
                    "Klein-Gordon exponent must be >= 2, got {exponent}"
                )));
            }
        }
        Ok(())
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }
}

/// Radial raised-cosine bump `r(ξ) = C (1 + cos(π|ξ − c|/W))` on the disk
/// `|ξ − c| < W`, normalized to unit integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveActuator {
    pub center: [f64; 2],
    pub width: f64,
}

impl WaveActuator {
    fn norm_const(&self) -> f64 {
        1.0 / (self.width * self.width * (PI - 4.0 / PI))
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.center[0];
        let dy = y - self.center[1];
        let rho = libm::sqrt(dx * dx + dy * dy);
        if rho >= self.width {
            0.0
        } else {
            self.norm_const() * (1.0 + libm::cos(PI * rho / self.width))
        }
    }

    /// `(∂r/∂c1, ∂r/∂c2)` at `(x, y)`.
    pub fn center_gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let dx = x - self.center[0];
        let dy = y - self.center[1];
        let rho = libm::sqrt(dx * dx + dy * dy);
        if rho >= self.width {
            return [0.0, 0.0];
        }
        let a = PI / self.width;
        // sin(aρ)/ρ, continuous through ρ = 0
        let sinc = if rho > 1e-300 { libm::sin(a * rho) / rho } else { a };
        let s = self.norm_const() * a * sinc;
        [s * dx, s * dy]
    }

    fn check(&self, params: &WaveParams) -> Result<()> {
        if !(self.width > 0.0) {
            return Err(invalid(format!(
                "actuator width must be positive, got {}",
                self.width
            )));
        }
        let [c1, c2] = self.center;
        let inside = c1 - self.width > 0.0
            && c1 + self.width < params.lx
            && c2 - self.width > 0.0
            && c2 + self.width < params.ly;
        if !inside {
            return Err(Error::ProjectionRequired(format!(
                "disk of radius {} around ({c1}, {c2}) leaves the rectangle",
                self.width
            )));
        }
        Ok(())
    }
}

/// Mesh bookkeeping: which grid nodes are unknowns and their numbering.
#[derive(Debug, Clone)]
struct Mesh {
    params: WaveParams,
    /// `index[j * (nx + 1) + i]` is the unknown number of node `(i, j)`.
    index: Vec<Option<usize>>,
    /// Grid coordinates `(i, j)` of each unknown.
    free: Vec<(usize, usize)>,
}

impl Mesh {
    fn new(params: WaveParams) -> Self {
        let (nx, ny) = (params.nx, params.ny);
        let e = params.neumann;
        let mut index = vec![None; (nx + 1) * (ny + 1)];
        let mut free = Vec::new();
        for j in 0..=ny {
            for i in 0..=nx {
                let dirichlet = (i == 0 && !e.left)
                    || (i == nx && !e.right)
                    || (j == 0 && !e.bottom)
                    || (j == ny && !e.top);
                if !dirichlet {
                    index[j * (nx + 1) + i] = Some(free.len());
                    free.push((i, j));
                }
            }
        }
        Mesh { params, index, free }
    }

    fn n(&self) -> usize {
        self.free.len()
    }

    fn id(&self, i: usize, j: usize) -> Option<usize> {
        self.index[j * (self.params.nx + 1) + i]
    }

    fn coords(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.free[k];
        (i as f64 * self.params.hx(), j as f64 * self.params.hy())
    }

    fn trapezoid(i: usize, n: usize) -> f64 {
        if i == 0 || i == n {
            0.5
        } else {
            1.0
        }
    }

    fn mass(&self) -> Vec<f64> {
        let p = &self.params;
        self.free
            .iter()
            .map(|&(i, j)| p.hx() * p.hy() * Self::trapezoid(i, p.nx) * Self::trapezoid(j, p.ny))
            .collect()
    }

    /// Edges `(a, b, coefficient)` of the Dirichlet energy; Dirichlet
    /// endpoints are reported as `None`.
    fn edges(&self) -> Vec<(Option<usize>, Option<usize>, f64)> {
        let p = &self.params;
        let (hx, hy) = (p.hx(), p.hy());
        let mut out = Vec::new();
        for j in 0..=p.ny {
            for i in 0..p.nx {
                let c = hy / hx * Self::trapezoid(j, p.ny);
                out.push((self.id(i, j), self.id(i + 1, j), c));
            }
        }
        for j in 0..p.ny {
            for i in 0..=p.nx {
                let c = hx / hy * Self::trapezoid(i, p.nx);
                out.push((self.id(i, j), self.id(i, j + 1), c));
            }
        }
        out
    }

    fn bandwidth(&self) -> usize {
        self.edges()
            .iter()
            .filter_map(|&(a, b, _)| Some(a?.abs_diff(b?)))
            .max()
            .unwrap_or(0)
    }

    fn stiffness(&self, weights: Option<&[f64]>) -> SymBand {
        let mut k = SymBand::zeros(self.n(), self.bandwidth());
        for (a, b, c) in self.edges() {
            let q = match (weights, a, b) {
                (None, _, _) => 1.0,
                (Some(_), None, None) => continue,
                (Some(q), Some(a), None) => q[a],
                (Some(q), None, Some(b)) => q[b],
                (Some(q), Some(a), Some(b)) => 0.5 * (q[a] + q[b]),
            };
            let c = c * q;
            if let Some(a) = a {
                k.add(a, a, c);
            }
            if let Some(b) = b {
                k.add(b, b, c);
            }
            if let (Some(a), Some(b)) = (a, b) {
                k.add(a, b, -c);
            }
        }
        k
    }

    /// Δ_h by the 5-point stencil with mirrored ghosts on Neumann edges.
    fn laplacian(&self, w: &[f64]) -> Vec<f64> {
        let p = &self.params;
        let (nx, ny) = (p.nx, p.ny);
        let val = |i: usize, j: usize| self.id(i, j).map_or(0.0, |k| w[k]);
        self.free
            .iter()
            .map(|&(i, j)| {
                let c = val(i, j);
                let left = if i == 0 { val(1, j) } else { val(i - 1, j) };
                let right = if i == nx { val(nx - 1, j) } else { val(i + 1, j) };
                let down = if j == 0 { val(i, 1) } else { val(i, j - 1) };
                let up = if j == ny { val(i, ny - 1) } else { val(i, j + 1) };
                (left - 2.0 * c + right) / (p.hx() * p.hx()) + (down - 2.0 * c + up) / (p.hy() * p.hy())
            })
            .collect()
    }
}

/// Assembled wave model.
#[derive(Debug, Clone)]
pub struct Wave {
    mesh: Mesh,
    width: f64,
    stiffness_factor: BandCholesky,
    mass: Vec<f64>,
}

impl Wave {
    pub fn new(params: WaveParams, width: f64) -> Result<Self> {
        params.validate()?;
        let limit = 0.5 * params.lx.min(params.ly);
        if !(width > 0.0) || width + params.hx().max(params.hy()) >= limit {
            return Err(invalid(format!(
                "actuator width {width} does not fit in the rectangle"
            )));
        }
        let mesh = Mesh::new(params);
        let stiffness_factor = mesh
            .stiffness(None)
            .cholesky()
            .map_err(|e| Error::Internal(format!("wave stiffness: {e}")))?;
        let mass = mesh.mass();
        Ok(Wave {
            mesh,
            width,
            stiffness_factor,
            mass,
        })
    }

    pub fn params(&self) -> &WaveParams {
        &self.mesh.params
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Coordinates of the unknowns, in unknown order.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        (0..self.mesh.n()).map(|k| self.mesh.coords(k)).collect()
    }

    pub fn actuator(&self, center: [f64; 2]) -> WaveActuator {
        WaveActuator {
            center,
            width: self.width,
        }
    }

    /// Applies the discrete Laplacian to a displacement field.
    pub fn laplacian(&self, w: &[f64]) -> Vec<f64> {
        self.mesh.laplacian(w)
    }

    /// Value at grid node `(i, j)`, zero on Dirichlet nodes.
    pub fn node_value(&self, w: &[f64], i: usize, j: usize) -> f64 {
        self.mesh.id(i, j).map_or(0.0, |k| w[k])
    }

    /// Bilinear interpolation of a displacement field at `(x, y)`.
    pub fn sample(&self, w: &[f64], x: f64, y: f64) -> f64 {
        let p = self.params();
        let fx = (x / p.hx()).clamp(0.0, p.nx as f64);
        let fy = (y / p.hy()).clamp(0.0, p.ny as f64);
        let i = (libm::floor(fx) as usize).min(p.nx - 1);
        let j = (libm::floor(fy) as usize).min(p.ny - 1);
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        (1.0 - tx) * (1.0 - ty) * self.node_value(w, i, j)
            + tx * (1.0 - ty) * self.node_value(w, i + 1, j)
            + (1.0 - tx) * ty * self.node_value(w, i, j + 1)
            + tx * ty * self.node_value(w, i + 1, j + 1)
    }

    fn center(&self, design: &ActuatorDesign) -> Result<[f64; 2]> {
        match design.as_slice() {
            [c1, c2] => Ok([*c1, *c2]),
            other => Err(usage(format!(
                "wave design has two parameters, got {}",
                other.len()
            ))),
        }
    }

    pub fn assemble(&self) -> Result<Discretization> {
        Discretization::new(
            Arc::new(self.clone()),
            self.mass.clone(),
            self.mesh.stiffness(None),
            None,
            self.params().nonlinearity.to_pointwise(),
        )
    }
}

/// Assembles a wave model with the default actuator width (`0.15·min(Lx, Ly)`).
pub fn assemble_wave(params: WaveParams) -> Result<Discretization> {
    Wave::new(params, 0.15 * params.lx.min(params.ly))?.assemble()
}

/// Samples of the actuator bump at the unknowns.
pub fn wave_actuator(wave: &Wave, act: &WaveActuator) -> Result<Vec<f64>> {
    act.check(wave.params())?;
    Ok(wave.nodes().into_iter().map(|(x, y)| act.value(x, y)).collect())
}

/// `∂r/∂c1` and `∂r/∂c2` at the unknowns.
pub fn wave_actuator_grad(wave: &Wave, act: &WaveActuator) -> Result<[Vec<f64>; 2]> {
    act.check(wave.params())?;
    let (g1, g2) = wave
        .nodes()
        .into_iter()
        .map(|(x, y)| {
            let g = act.center_gradient(x, y);
            (g[0], g[1])
        })
        .unzip();
    Ok([g1, g2])
}

/// Solves `Δh = −F′(w_ref) g` with `h = 0` on Γ0 and `∂h/∂ν = 0` on Γ1.
pub fn wave_adjoint_h(wave: &Wave, w_ref: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    let n = wave.mesh.n();
    if w_ref.len() != n || g.len() != n {
        return Err(usage(format!("fields must have {n} entries")));
    }
    let f = wave.params().nonlinearity.to_pointwise();
    // −Δ_h = M⁻¹K, so K h = M (F′(w) g)
    let rhs: Vec<f64> = w_ref
        .iter()
        .zip(g)
        .zip(&wave.mass)
        .map(|((&w, &g), &m)| m * f.derivative(w) * g)
        .collect();
    Ok(wave.stiffness_factor.solve(&rhs))
}

impl SpatialModel for Wave {
    fn n_nodes(&self) -> usize {
        self.mesh.n()
    }

    fn design_dim(&self) -> usize {
        2
    }

    fn design_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let p = self.params();
        let mx = self.width + p.hx();
        let my = self.width + p.hy();
        (vec![mx, my], vec![p.lx - mx, p.ly - my])
    }

    fn influence(&self, design: &ActuatorDesign) -> Result<Vec<f64>> {
        wave_actuator(self, &self.actuator(self.center(design)?))
    }

    fn influence_gradient(&self, design: &ActuatorDesign) -> Result<Vec<Vec<f64>>> {
        let [g1, g2] = wave_actuator_grad(self, &self.actuator(self.center(design)?))?;
        Ok(vec![g1, g2])
    }

    fn weighted_stiffness(&self, weights: &[f64]) -> SymBand {
        self.mesh.stiffness(Some(weights))
    }

    fn adjoint_generator(&self, p: &StateVec) -> StateVec {
        // A*(f, g) = (−g, −Δ f)
        StateVec {
            w: p.v.iter().map(|g| -g).collect(),
            v: self.mesh.laplacian(&p.w).into_iter().map(|l| -l).collect(),
        }
    }

    fn nonlinear_adjoint(&self, w_ref: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        wave_adjoint_h(self, w_ref, g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mixed() -> WaveParams {
        WaveParams {
            nx: 10,
            ny: 12,
            lx: 1.0,
            ly: 1.5,
            neumann: NeumannEdges {
                left: true,
                top: true,
                ..Default::default()
            },
            nonlinearity: WaveNonlinearity::SineGordon,
        }
    }

    #[test]
    fn all_neumann_rejected() {
        let p = WaveParams {
            neumann: NeumannEdges {
                left: true,
                right: true,
                bottom: true,
                top: true,
            },
            ..WaveParams::default()
        };
        assert!(matches!(assemble_wave(p), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn stencil_matches_assembled_operator() {
        let wave = Wave::new(mixed(), 0.2).unwrap();
        let disc = wave.assemble().unwrap();
        let n = disc.n_dof();
        let w: Vec<f64> = (0..n)
            .map(|k| libm::sin(0.7 * k as f64) + 0.01 * k as f64)
            .collect();
        let kw = disc.stiffness().mul_vec(&w);
        let lap = wave.laplacian(&w);
        for k in 0..n {
            let a = -kw[k] / disc.mass()[k];
            assert!(
                (a - lap[k]).abs() <= 1e-10 * a.abs().max(1.0),
                "{k}: {a} {}",
                lap[k]
            );
        }
    }

    #[test]
    fn unknown_count_respects_boundary_types() {
        let wave = Wave::new(mixed(), 0.2).unwrap();
        // left and top kept, right and bottom removed: (nx) x (ny) nodes
        assert_eq!(wave.n_nodes(), 10 * 12);
        let dir = Wave::new(
            WaveParams {
                nx: 10,
                ny: 12,
                ..WaveParams::default()
            },
            0.2,
        )
        .unwrap();
        assert_eq!(dir.n_nodes(), 9 * 11);
    }

    #[test]
    fn support_violation() {
        let wave = Wave::new(
            WaveParams {
                nx: 16,
                ny: 16,
                ..WaveParams::default()
            },
            0.2,
        )
        .unwrap();
        let act = wave.actuator([0.1, 0.5]);
        assert!(matches!(
            wave_actuator(&wave, &act),
            Err(Error::ProjectionRequired(_))
        ));
    }

    #[test]
    fn klein_gordon_exponent_validated() {
        let p = WaveParams {
            nonlinearity: WaveNonlinearity::KleinGordon { exponent: 1 },
            ..WaveParams::default()
        };
        assert!(p.validate().is_err());
    }
}
