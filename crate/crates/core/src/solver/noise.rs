use crate::error::{Error, Result};
use crate::field::{lift_field, FieldTrajectory};
use crate::rough::{Grid, RoughPath};
use crate::semigroup::{profile_transform, MollifierProfile};
use rayon::prelude::*;

/// The driving field `ψ` on a spatial grid at every trajectory time, with
/// its spatial lift at each of those times.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    times: Vec<f64>,
    grid: Grid,
    dim: usize,
    hyperviscosity: f64,
    /// Per time, component-major `n × M` samples.
    values: Vec<Vec<f64>>,
    lifts: Vec<RoughPath>,
}

impl NoiseSource {
    /// Canonical lifts of every snapshot on the periodic grid with `m` cells.
    pub fn from_trajectory(trajectory: &FieldTrajectory, m: usize) -> Result<Self> {
        let grid = Grid::periodic(m)?;
        let built: Vec<(Vec<f64>, RoughPath)> = trajectory
            .snapshots()
            .par_iter()
            .map(|s| Ok((s.evaluate_components(m)?, lift_field(s, &grid)?)))
            .collect::<Result<_>>()?;
        let (values, lifts) = built.into_iter().unzip();
        Ok(Self {
            times: trajectory.times().to_vec(),
            grid,
            dim: trajectory.dim(),
            hyperviscosity: trajectory.hyperviscosity(),
            values,
            lifts,
        })
    }

    /// Canonical lifts of the trajectory after mollification `Q_ε`.
    pub fn mollified(
        trajectory: &FieldTrajectory,
        m: usize,
        eps: f64,
        profile: MollifierProfile,
    ) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::Domain(format!("mollifier width must be positive, got {eps}")));
        }
        let smoothed = trajectory.map_modes(|k| profile_transform(profile, eps * k as f64));
        Self::from_trajectory(&smoothed, m)
    }

    /// `ψ ≡ 0` at the given times.
    pub fn zero(times: &[f64], dim: usize, m: usize) -> Result<Self> {
        let grid = Grid::periodic(m)?;
        let lift = RoughPath::build(
            grid,
            dim,
            vec![0.0; (m + 1) * dim],
            crate::rough::AreaMode::Zero,
        )?;
        Ok(Self {
            times: times.to_vec(),
            grid,
            dim,
            hyperviscosity: 0.0,
            values: vec![vec![0.0; dim * m]; times.len()],
            lifts: vec![lift; times.len()],
        })
    }

    /// Same level-1 path at every time, cell areas shifted by the increments
    /// of `f` (`(M+1) × n × n` node values).
    pub fn with_area_shift(&self, f: &[f64]) -> Result<Self> {
        let lifts = self
            .lifts
            .iter()
            .map(|l| l.shift_area(f))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            lifts,
            ..self.clone()
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hyperviscosity(&self) -> f64 {
        self.hyperviscosity
    }

    /// Component-major samples of `ψ` at time index `i`.
    pub fn values(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn lift(&self, i: usize) -> &RoughPath {
        &self.lifts[i]
    }

    /// Every `step`-th time, starting with the first.
    pub fn subsample(&self, step: usize) -> Self {
        let step = step.max(1);
        let idx: Vec<usize> = (0..self.len()).step_by(step).collect();
        Self {
            times: idx.iter().map(|&i| self.times[i]).collect(),
            grid: self.grid,
            dim: self.dim,
            hyperviscosity: self.hyperviscosity,
            values: idx.iter().map(|&i| self.values[i].clone()).collect(),
            lifts: idx.iter().map(|&i| self.lifts[i].clone()).collect(),
        }
    }

    /// `⟪Ψ⟫ = sup_s (‖ψ_s‖_∞ + ‖ψ_s‖_α + ‖𝚿_s‖_{2α})` over the stored times.
    pub fn norm(&self, alpha: f64) -> f64 {
        self.lifts
            .par_iter()
            .map(|l| {
                let (x, a) = l.holder_seminorms(alpha, false);
                let sup = l.values().iter().fold(0.0f64, |s, v| s.max(v.abs()));
                sup + x + a
            })
            .reduce(|| 0.0, f64::max)
    }
}
