//! Seeded noise: Brownian increments on the finest grid, coarsening by
//! summation, and the per-step uniforms that drive action sampling.
//!
//! Every draw is addressed by `(master_seed, trajectory_index, kind, sub, position)`
//! on a ChaCha8 keystream. The master seed keys the cipher, the remaining
//! coordinates pick the stream and the word position, so any value can be
//! regenerated in isolation and results do not depend on evaluation order.

use std::io::{Read, Write};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::normal::normal_quantile;

/// Trajectory indices must stay below this bound so they fit in the stream id.
pub const MAX_TRAJECTORY_INDEX: u64 = 1 << 48;

/// Disjoint stream families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum NoiseKind {
    /// The physical Brownian motion `W`.
    Brownian = 0,
    /// Uniforms fed to the inverse-CDF action sampler.
    Action = 1,
    /// A second Brownian motion `B` independent of `W`.
    Auxiliary = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedRecord {
    pub master_seed: u64,
    pub trajectory_index: u64,
}

fn stream(seed: SeedRecord, kind: NoiseKind, sub: u8) -> ChaCha8Rng {
    assert!(
        seed.trajectory_index < MAX_TRAJECTORY_INDEX,
        "trajectory index {} exceeds 2^48",
        seed.trajectory_index
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed.master_seed);
    rng.set_stream((seed.trajectory_index << 16) | ((kind as u64) << 8) | sub as u64);
    rng
}

/// Map 64 random bits to the open interval `(0, 1)`, on the grid `(j + 1/2) 2⁻⁵²`.
#[inline]
fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Uniform for action component 0 at `step` of a trajectory.
pub fn uniform_stream(master_seed: u64, trajectory_index: u64, step_index: u64) -> f64 {
    uniform_stream_component(master_seed, trajectory_index, step_index, 0)
}

/// Uniform for action component `sub` at `step`. Each component has its own
/// stream so a step consumes the same position whatever the action dimension.
pub fn uniform_stream_component(master_seed: u64, trajectory_index: u64, step_index: u64, sub: u8) -> f64 {
    let mut rng = stream(
        SeedRecord {
            master_seed,
            trajectory_index,
        },
        NoiseKind::Action,
        sub,
    );
    rng.set_word_pos(2 * step_index as u128);
    open_unit(rng.next_u64())
}

/// Per-step action uniforms of one trajectory, `steps × action_dim` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionUniforms {
    steps: usize,
    action_dim: usize,
    values: Vec<f64>,
}

impl ActionUniforms {
    pub fn generate(master_seed: u64, trajectory_index: u64, steps: usize, action_dim: usize) -> Self {
        let seed = SeedRecord {
            master_seed,
            trajectory_index,
        };
        let mut values = vec![0.0; steps * action_dim];
        for sub in 0..action_dim {
            let mut rng = stream(seed, NoiseKind::Action, sub as u8);
            for m in 0..steps {
                values[m * action_dim + sub] = open_unit(rng.next_u64());
            }
        }
        Self {
            steps,
            action_dim,
            values,
        }
    }

    /// Wrap explicit values, e.g. for hand-built test cases.
    pub fn from_values(action_dim: usize, values: Vec<f64>) -> Result<Self> {
        if action_dim == 0 || !values.len().is_multiple_of(action_dim) {
            return Err(Error::Domain(format!(
                "{} uniforms cannot be split into rows of {action_dim}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|&&u| !(u > 0.0 && u < 1.0)) {
            return Err(Error::Domain(format!("uniform {bad} outside (0, 1)")));
        }
        Ok(Self {
            steps: values.len() / action_dim,
            action_dim,
            values,
        })
    }

    /// The first `steps` rows; shorter grids reuse the head of the same stream.
    pub fn prefix(&self, steps: usize) -> ActionUniforms {
        let steps = steps.min(self.steps);
        ActionUniforms {
            steps,
            action_dim: self.action_dim,
            values: self.values[..steps * self.action_dim].to_vec(),
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn step(&self, m: usize) -> &[f64] {
        &self.values[m * self.action_dim..(m + 1) * self.action_dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Brownian increments on a grid, `steps × dim` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Increments {
    horizon: f64,
    steps: usize,
    dim: usize,
    values: Vec<f64>,
}

impl Increments {
    pub fn from_values(horizon: f64, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) || values.is_empty() {
            return Err(Error::Domain(format!(
                "{} increments cannot be split into rows of {dim}",
                values.len()
            )));
        }
        Ok(Self {
            horizon,
            steps: values.len() / dim,
            dim,
            values,
        })
    }

    pub fn zeros(horizon: f64, steps: usize, dim: usize) -> Self {
        Self {
            horizon,
            steps,
            dim,
            values: vec![0.0; steps * dim],
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self, n: usize) -> &[f64] {
        &self.values[n * self.dim..(n + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Running sums `W_{t_n} - W_0` at every node, `(steps + 1) × dim`.
    pub fn path(&self) -> Vec<f64> {
        let mut path = vec![0.0; (self.steps + 1) * self.dim];
        for n in 0..self.steps {
            for j in 0..self.dim {
                path[(n + 1) * self.dim + j] = path[n * self.dim + j] + self.values[n * self.dim + j];
            }
        }
        path
    }
}

/// Finest-resolution Brownian increments of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianLattice {
    seed: SeedRecord,
    kind: NoiseKind,
    fine: Increments,
}

impl BrownianLattice {
    pub fn generate(seed: SeedRecord, kind: NoiseKind, fine_steps: usize, horizon: f64, dim: usize) -> Result<Self> {
        if fine_steps == 0 {
            return Err(Error::config("N_fine", "must be at least 1"));
        }
        if dim == 0 {
            return Err(Error::config("dim", "must be at least 1"));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::config("T", format!("horizon must be positive, got {horizon}")));
        }
        if kind == NoiseKind::Action {
            return Err(Error::config("kind", "the action stream is not a Brownian stream"));
        }
        let scale = (horizon / fine_steps as f64).sqrt();
        let mut rng = stream(seed, kind, 0);
        let values = (0..fine_steps * dim)
            .map(|_| scale * normal_quantile(open_unit(rng.next_u64())))
            .collect();
        Ok(Self {
            seed,
            kind,
            fine: Increments {
                horizon,
                steps: fine_steps,
                dim,
                values,
            },
        })
    }

    pub fn seed(&self) -> SeedRecord {
        self.seed
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn horizon(&self) -> f64 {
        self.fine.horizon
    }

    pub fn fine_steps(&self) -> usize {
        self.fine.steps
    }

    pub fn dim(&self) -> usize {
        self.fine.dim
    }

    pub fn increment(&self, m: usize) -> &[f64] {
        self.fine.step(m)
    }

    pub fn increments(&self) -> &Increments {
        &self.fine
    }

    /// Sum consecutive blocks of `fine_steps / coarse_steps` increments,
    /// adding in ascending index order.
    pub fn coarsen(&self, coarse_steps: usize) -> Result<Increments> {
        let fine_steps = self.fine.steps;
        if coarse_steps == 0 || !fine_steps.is_multiple_of(coarse_steps) {
            return Err(Error::config(
                "N",
                format!("{coarse_steps} does not divide the fine grid size {fine_steps}"),
            ));
        }
        let block = fine_steps / coarse_steps;
        let d = self.fine.dim;
        let mut values = vec![0.0; coarse_steps * d];
        for n in 0..coarse_steps {
            let out = &mut values[n * d..(n + 1) * d];
            for m in n * block..(n + 1) * block {
                for (o, v) in out.iter_mut().zip(self.fine.step(m)) {
                    *o += v;
                }
            }
        }
        Ok(Increments {
            horizon: self.fine.horizon,
            steps: coarse_steps,
            dim: d,
            values,
        })
    }

    /// Little-endian dump: `T: f64, N_fine: u64, d: u64, master_seed: u64,
    /// trajectory_index: u64`, then the increments row-major as `f64`.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.fine.horizon.to_le_bytes())?;
        w.write_all(&(self.fine.steps as u64).to_le_bytes())?;
        w.write_all(&(self.fine.dim as u64).to_le_bytes())?;
        w.write_all(&self.seed.master_seed.to_le_bytes())?;
        w.write_all(&self.seed.trajectory_index.to_le_bytes())?;
        for v in &self.fine.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Inverse of [`BrownianLattice::write_to`]. The stream kind is not part of
    /// the format; dumps are read back as [`NoiseKind::Brownian`].
    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |r: &mut dyn Read| -> Result<[u8; 8]> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        let horizon = f64::from_le_bytes(next(&mut r)?);
        let steps = u64::from_le_bytes(next(&mut r)?) as usize;
        let dim = u64::from_le_bytes(next(&mut r)?) as usize;
        let master_seed = u64::from_le_bytes(next(&mut r)?);
        let trajectory_index = u64::from_le_bytes(next(&mut r)?);
        let mut values = Vec::with_capacity(steps.saturating_mul(dim).min(1 << 24));
        for _ in 0..steps * dim {
            values.push(f64::from_le_bytes(next(&mut r)?));
        }
        Ok(Self {
            seed: SeedRecord {
                master_seed,
                trajectory_index,
            },
            kind: NoiseKind::Brownian,
            fine: Increments {
                horizon,
                steps,
                dim,
                values,
            },
        })
    }
}

/// Brownian lattice of the physical noise `W` for one trajectory.
pub fn generate_lattice(
    master_seed: u64,
    trajectory_index: u64,
    fine_steps: usize,
    horizon: f64,
    dim: usize,
) -> Result<BrownianLattice> {
    BrownianLattice::generate(
        SeedRecord {
            master_seed,
            trajectory_index,
        },
        NoiseKind::Brownian,
        fine_steps,
        horizon,
        dim,
    )
}

/// Lattice of the auxiliary Brownian motion `B`, independent of `W`.
pub fn generate_auxiliary_lattice(
    master_seed: u64,
    trajectory_index: u64,
    fine_steps: usize,
    horizon: f64,
    dim: usize,
) -> Result<BrownianLattice> {
    BrownianLattice::generate(
        SeedRecord {
            master_seed,
            trajectory_index,
        },
        NoiseKind::Auxiliary,
        fine_steps,
        horizon,
        dim,
    )
}

pub fn coarsen(lattice: &BrownianLattice, coarse_steps: usize) -> Result<Increments> {
    lattice.coarsen(coarse_steps)
}
