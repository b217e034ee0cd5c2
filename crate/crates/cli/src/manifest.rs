//! Benchmark manifest: the pairs of a generated benchmark and how they were made.

use std::path::{Path, PathBuf};

use nalgebra::Matrix4;
use raylign::datagen::PairSpec;
use raylign::RigidTransform;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestPair {
    pub id: String,
    pub seed: u64,
    /// Relative to the manifest's directory.
    pub source: PathBuf,
    pub target: PathBuf,
    /// Row-major 4×4 matrix mapping source onto target.
    pub gt: [[f64; 4]; 4],
    pub crop_direction: [f64; 3],
    pub outlier_indices: Vec<usize>,
}

impl ManifestPair {
    pub fn gt_transform(&self) -> RigidTransform {
        RigidTransform::from_matrix(&Matrix4::from_fn(|r, c| self.gt[r][c]))
    }
}

pub fn matrix_rows(t: &RigidTransform) -> [[f64; 4]; 4] {
    let m = t.to_matrix();
    std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    /// Base cloud file, or `None` for the built-in synthetic shape.
    pub base: Option<PathBuf>,
    /// Size and seed of the synthetic base; unused when `base` is set.
    pub base_points: usize,
    pub base_seed: u64,
    /// Spec shared by all pairs; pair `i` uses seed `spec.seed + i`.
    pub spec: PairSpec,
    pub pairs: Vec<ManifestPair>,
}

impl Manifest {
    pub fn read(dir: &Path) -> CliResult<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let manifest: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        if manifest.pairs.is_empty() {
            return Err(CliError::Usage(format!(
                "{} lists no pairs",
                path.display()
            )));
        }
        Ok(manifest)
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        raylign::io::write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())?;
        Ok(())
    }

    pub fn find(&self, id: &str) -> CliResult<&ManifestPair> {
        self.pairs
            .iter()
            .find(|p| p.id == id)
            .ok_or_else(|| CliError::Usage(format!("pair `{id}` is not in the manifest")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    #[test]
    fn gt_rows_round_trip() {
        let t = RigidTransform::new(
            RigidTransform::from_axis_angle(&Vector3::new(0.3, -1.0, 0.2).normalize(), 0.7)
                .rotation,
            Vector3::new(0.1, -0.2, 0.05),
        );
        let pair = ManifestPair {
            id: "pair_000".into(),
            seed: 3,
            source: "a.xyz".into(),
            target: "b.xyz".into(),
            gt: matrix_rows(&t),
            crop_direction: [0.0, 0.0, 1.0],
            outlier_indices: vec![],
        };
        assert_eq!(pair.gt_transform(), t);
        let json = serde_json::to_string(&pair).unwrap();
        assert_eq!(serde_json::from_str::<ManifestPair>(&json).unwrap(), pair);
    }
}
