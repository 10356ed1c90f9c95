//! Per-path simulation shared by every experiment.
//!
//! Each step draws one standard normal increment `z` for the Gaussian
//! statistics, then advances the configured martingale. Gaussian processes
//! reuse `z`; the likelihood-ratio process draws its own uniform after it.
//! Path `i` depends only on `(master_seed, i)`.

use rand_distr::{Distribution, StandardNormal};

use crate::martingale::{MixtureGrid, PathState, ProcessSpec};
use crate::rng::{derive_seed, open_uniform, path_rng, PathRng};

pub struct PathSim<'a> {
    spec: &'a ProcessSpec,
    grid: Option<&'a MixtureGrid>,
    rng: PathRng,
    state: PathState,
    /// Sum of the Gaussian increments drawn so far.
    pub z_sum: f64,
}

impl<'a> PathSim<'a> {
    /// `grid` must be the resolved grid when `spec` is a mixture.
    pub fn new(spec: &'a ProcessSpec, grid: Option<&'a MixtureGrid>, master_seed: u64, index: u64) -> Self {
        Self {
            spec,
            grid,
            rng: path_rng(master_seed, index),
            state: PathState::new(derive_seed(master_seed, index)),
            z_sum: 0.0,
        }
    }

    pub fn state(&self) -> &PathState {
        &self.state
    }

    /// Advances one step and returns the previous state.
    pub fn step(&mut self) -> PathState {
        let prev = self.state;
        let z: f64 = StandardNormal.sample(&mut self.rng);
        self.z_sum += z;
        self.state = match *self.spec {
            ProcessSpec::GaussianExp { lambda } => prev.step_gaussian_exp(lambda, z),
            ProcessSpec::Mixture { .. } => {
                let grid = self.grid.expect("mixture process needs a resolved grid");
                prev.step_mixture(grid, z, 1.0).expect("unit variance is positive")
            }
            ProcessSpec::BetaVsUniform { a } => {
                let x = open_uniform(&mut self.rng);
                prev.step_likelihood_ratio(a * x.powf(a - 1.0), 1.0)
                    .expect("uniform null density is one")
            }
        };
        prev
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_depend_only_on_seed_and_index() {
        let spec = ProcessSpec::default();
        let run = |i| {
            let mut sim = PathSim::new(&spec, None, 9, i);
            (0..50).map(|_| {
                sim.step();
                sim.state().log_m()
            }).collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn gaussian_process_uses_the_shared_increment() {
        let spec = ProcessSpec::GaussianExp { lambda: 0.5 };
        let mut sim = PathSim::new(&spec, None, 1, 0);
        for _ in 0..20 {
            sim.step();
        }
        let expected = 0.5 * sim.z_sum - 0.125 * 20.0;
        assert!((sim.state().log_m() - expected).abs() < 1e-12);
    }
}
