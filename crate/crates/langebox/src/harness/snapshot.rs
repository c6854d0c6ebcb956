//! Versioned snapshot container for configurations, ensembles and
//! trajectories: a small binary envelope around a JSON document, closed by a
//! SHA-256 checksum. Floating-point values round-trip bit-exactly through
//! the shortest-representation encoding.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::configspace::MarkedConfiguration;
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::gibbs::GibbsEnsemble;
use crate::potential::PotentialConfig;

const MAGIC: &[u8; 4] = b"LBSN";
const VERSION: u32 = 1;

/// Self-describing run context stored with every snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub dim: usize,
    pub lambda: f64,
    pub n_particles: usize,
    pub beta: f64,
    pub kappa: Option<f64>,
    pub dt: Option<f64>,
    pub seed: u64,
    pub potential: PotentialConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum SnapshotPayload {
    Configuration(MarkedConfiguration),
    Ensemble(GibbsEnsemble),
    Trajectory(Trajectory),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub header: SnapshotHeader,
    pub payload: SnapshotPayload,
}

pub fn save_snapshot(path: &Path, snapshot: &Snapshot) -> Result<()> {
    let body = serde_json::to_vec(snapshot)?;
    let mut file = std::fs::File::create(path)?;
    let mut hasher = Sha256::new();
    hasher.update(MAGIC);
    hasher.update(VERSION.to_le_bytes());
    hasher.update((body.len() as u64).to_le_bytes());
    hasher.update(&body);
    file.write_all(MAGIC)?;
    file.write_all(&VERSION.to_le_bytes())?;
    file.write_all(&(body.len() as u64).to_le_bytes())?;
    file.write_all(&body)?;
    file.write_all(&hasher.finalize())?;
    Ok(())
}

pub fn load_snapshot(path: &Path) -> Result<Snapshot> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 4 + 4 + 8 + 32 || &bytes[0..4] != MAGIC {
        return Err(Error::SnapshotMalformed("missing or short envelope".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::VersionUnsupported(version));
    }
    let body_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    if bytes.len() != 16 + body_len + 32 {
        return Err(Error::ChecksumMismatch);
    }
    let body = &bytes[16..16 + body_len];
    let mut hasher = Sha256::new();
    hasher.update(&bytes[0..16 + body_len]);
    let digest = hasher.finalize();
    if digest.as_slice() != &bytes[16 + body_len..] {
        return Err(Error::ChecksumMismatch);
    }
    Ok(serde_json::from_slice(body)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::PointSet;

    fn sample_snapshot() -> Snapshot {
        let pos = PointSet::from_points(1, &[vec![0.1], vec![-0.7]]).unwrap();
        let vel = PointSet::from_points(1, &[vec![1.23456789012345e-3], vec![0.5]]).unwrap();
        Snapshot {
            header: SnapshotHeader {
                dim: 1,
                lambda: 2.0,
                n_particles: 2,
                beta: 1.0,
                kappa: Some(1.0),
                dt: Some(0.01),
                seed: 42,
                potential: PotentialConfig {
                    name: "ideal_gas".into(),
                    params: Default::default(),
                },
            },
            payload: SnapshotPayload::Configuration(
                MarkedConfiguration::new(pos, vel).unwrap(),
            ),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.snap");
        let p2 = dir.path().join("b.snap");
        let snap = sample_snapshot();
        save_snapshot(&p1, &snap).unwrap();
        let loaded = load_snapshot(&p1).unwrap();
        save_snapshot(&p2, &loaded).unwrap();
        let b1 = std::fs::read(&p1).unwrap();
        let b2 = std::fs::read(&p2).unwrap();
        assert_eq!(b1, b2);
        match loaded.payload {
            SnapshotPayload::Configuration(c) => {
                assert_eq!(c.velocity(0)[0], 1.23456789012345e-3);
            }
            _ => panic!("wrong payload kind"),
        }
    }

    #[test]
    fn truncation_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.snap");
        save_snapshot(&p, &sample_snapshot()).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.truncate(bytes.len() - 7);
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(load_snapshot(&p), Err(Error::ChecksumMismatch)));
    }

    #[test]
    fn corruption_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.snap");
        save_snapshot(&p, &sample_snapshot()).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(load_snapshot(&p), Err(Error::ChecksumMismatch)));
    }

    #[test]
    fn future_versions_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.snap");
        save_snapshot(&p, &sample_snapshot()).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes[4..8].copy_from_slice(&9u32.to_le_bytes());
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(
            load_snapshot(&p),
            Err(Error::VersionUnsupported(9))
        ));
    }
}
