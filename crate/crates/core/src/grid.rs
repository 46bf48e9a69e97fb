use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, usage, Result};

/// Uniform time grid on `[0, t_final]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, n_steps: usize) -> Result<Self> {
        if n_steps < 2 {
            return Err(invalid(alloc::format!("n_steps must be >= 2, got {n_steps}")));
        }
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(invalid(alloc::format!("horizon must be positive, got {t_final}")));
        }
        Ok(TimeGrid { t_final, n_steps })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t_final * k as f64 / self.n_steps as f64
    }

    /// Composite trapezoid weight of node `k`.
    pub fn weight(&self, k: usize) -> f64 {
        if k == 0 || k == self.n_steps {
            0.5 * self.dt()
        } else {
            self.dt()
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|k| self.weight(k)).collect()
    }

    /// Same horizon with `factor` times as many steps.
    pub fn refined(&self, factor: usize) -> Self {
        TimeGrid {
            t_final: self.t_final,
            n_steps: self.n_steps * factor,
        }
    }
}

/// Scalar control sampled at the nodes of a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    samples: Vec<f64>,
}

impl ControlSignal {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(usage("control samples must be finite"));
        }
        Ok(ControlSignal { samples })
    }

    pub fn zeros(grid: &TimeGrid) -> Self {
        ControlSignal {
            samples: vec![0.0; grid.n_nodes()],
        }
    }

    pub fn from_fn(grid: &TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        ControlSignal {
            samples: (0..grid.n_nodes()).map(|k| f(grid.time(k))).collect(),
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Average of the two end samples of step `n`.
    pub fn midpoint(&self, n: usize) -> f64 {
        0.5 * (self.samples[n] + self.samples[n + 1])
    }

    pub fn check_grid(&self, grid: &TimeGrid) -> Result<()> {
        if self.samples.len() != grid.n_nodes() {
            return Err(usage(alloc::format!(
                "control has {} samples but the grid has {} nodes",
                self.samples.len(),
                grid.n_nodes()
            )));
        }
        Ok(())
    }

    /// Trapezoid L²(0,τ) inner product.
    pub fn inner(&self, other: &ControlSignal, grid: &TimeGrid) -> f64 {
        self.samples
            .iter()
            .zip(&other.samples)
            .enumerate()
            .map(|(k, (a, b))| grid.weight(k) * a * b)
            .sum()
    }

    pub fn norm(&self, grid: &TimeGrid) -> f64 {
        libm::sqrt(self.inner(self, grid))
    }

    pub fn axpy(&mut self, alpha: f64, other: &ControlSignal) {
        crate::linalg::axpy(alpha, &other.samples, &mut self.samples);
    }

    pub fn scaled(&self, alpha: f64) -> ControlSignal {
        ControlSignal {
            samples: self.samples.iter().map(|s| alpha * s).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(1.0, 1).is_err());
        assert!(TimeGrid::new(0.0, 10).is_err());
        assert!(TimeGrid::new(-1.0, 10).is_err());
        let g = TimeGrid::new(2.0, 400).unwrap();
        assert_eq!(g.dt(), 0.005);
        assert_eq!(g.n_nodes(), 401);
        assert_eq!(g.time(400), 2.0);
    }

    #[test]
    fn trapezoid_norm_of_constant() {
        let g = TimeGrid::new(2.0, 10).unwrap();
        let u = ControlSignal::from_fn(&g, |_| 3.0);
        assert!((u.norm(&g) - libm::sqrt(18.0)).abs() < 1e-14);
        let s: f64 = g.weights().iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn non_finite_samples_rejected() {
        assert!(ControlSignal::new(vec![0.0, f64::NAN]).is_err());
    }
}
