//! Velocity-marked configurations and the metrics that make the space of
//! configurations Polish: a vague product metric and a completed metric
//! whose extra terms control coincidences and runaway marks.

pub mod families;
pub mod metric;

pub use metric::{
    compactness_functional, dist_full, dist_star, pair_functional, pairing, pairing_windowed,
    MetricParams, WeightSeq,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::PointSet;

/// A finite set of (position, velocity) pairs with pairwise distinct
/// positions; the simulation state at a fixed time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedConfiguration {
    pos: PointSet,
    vel: PointSet,
}

impl MarkedConfiguration {
    pub fn empty(dim: usize) -> Self {
        MarkedConfiguration {
            pos: PointSet::new(dim),
            vel: PointSet::new(dim),
        }
    }

    /// Build from parallel position and velocity lists, rejecting coincident
    /// positions.
    pub fn new(pos: PointSet, vel: PointSet) -> Result<Self> {
        if pos.dim() != vel.dim() || pos.len() != vel.len() {
            return Err(Error::Config(
                "positions and velocities must have matching shape".into(),
            ));
        }
        if let Some((i, j)) = pos.has_coincidence() {
            return Err(Error::CoincidentParticles { i, j });
        }
        Ok(MarkedConfiguration { pos, vel })
    }

    /// Build without the coincidence scan; for hot paths that maintain the
    /// invariant themselves.
    pub fn from_parts_unchecked(pos: PointSet, vel: PointSet) -> Self {
        debug_assert_eq!(pos.len(), vel.len());
        MarkedConfiguration { pos, vel }
    }

    pub fn dim(&self) -> usize {
        self.pos.dim()
    }

    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    pub fn position(&self, i: usize) -> &[f64] {
        self.pos.point(i)
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        self.vel.point(i)
    }

    pub fn push(&mut self, p: &[f64], v: &[f64]) {
        self.pos.push(p);
        self.vel.push(v);
    }

    /// Projection to positions.
    pub fn positions(&self) -> &PointSet {
        &self.pos
    }

    pub fn velocities(&self) -> &PointSet {
        &self.vel
    }

    pub fn positions_mut(&mut self) -> &mut PointSet {
        &mut self.pos
    }

    pub fn velocities_mut(&mut self) -> &mut PointSet {
        &mut self.vel
    }

    pub fn points(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.pos.iter().zip(self.vel.iter())
    }
}
