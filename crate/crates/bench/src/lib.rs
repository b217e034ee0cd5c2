//! Shared fixtures for the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use raylign::datagen::{make_pair, mannequin_base, CropKind, PairSpec};
use raylign::intersection::IntersectionParams;
use raylign::{
    bounding_sphere, sample_chords, Chord, ChordSampler, IndexedCloud, PointCloud, SolverConfig,
};

/// A benchmark-style pair with its indexes, intersection parameters and a chord batch.
pub struct Fixture {
    pub source: PointCloud,
    pub target: PointCloud,
    pub source_idx: IndexedCloud,
    pub target_idx: IndexedCloud,
    pub params: IntersectionParams,
    pub chords: Vec<Chord>,
}

pub fn fixture(points: usize, lines: usize) -> Fixture {
    let spec = PairSpec {
        crop: CropKind::HalfSpace,
        overlap: 0.7,
        points,
        ..PairSpec::default()
    };
    let pair = make_pair(&mannequin_base(points, 0), &spec).expect("feasible pair");
    let config = SolverConfig::default();
    let params = config.intersection_params(&pair.target).expect("params");
    let sphere = bounding_sphere(&pair.source, &pair.target).expect("sphere");
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let chords = sample_chords(
        &sphere,
        lines,
        ChordSampler::default(),
        (&pair.source, &pair.target),
        &mut rng,
    )
    .expect("chords");
    Fixture {
        source_idx: IndexedCloud::new(pair.source.clone(), config.neighbors),
        target_idx: IndexedCloud::new(pair.target.clone(), config.neighbors),
        source: pair.source,
        target: pair.target,
        params,
        chords,
    }
}
