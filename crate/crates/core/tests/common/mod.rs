#![allow(dead_code)]

use gnssmap::ingest::{build_dataset, BuildOptions, BuildingDataset, ObservationTuple, Provenance};
use gnssmap::synth::{generate, SceneSpec, SignalDistributionSpec, SimulationConfig, SyntheticDataset};

pub const TRUE_HEIGHT: f64 = 20.0;

/// The default synthetic scene: a 40 x 20 m block of height 20 m seen from
/// three sites, about 10,000 intersecting tuples.
pub fn scene(seed: u64, location_noise_sd: f64) -> (SceneSpec, SignalDistributionSpec) {
    let cfg = SimulationConfig::default();
    let spec = cfg.scene_spec(seed).unwrap();
    let dist = SignalDistributionSpec { location_noise_sd, ..cfg.signal };
    (spec, dist)
}

pub fn scene_dataset(seed: u64, location_noise_sd: f64) -> (SyntheticDataset, BuildingDataset) {
    let (spec, dist) = scene(seed, location_noise_sd);
    let synth = generate(&spec, &dist).unwrap();
    let ds = build_dataset(&synth.records, &spec.footprint, &BuildOptions::default()).unwrap();
    (synth, ds)
}

/// Dataset straight from `(cn0, height)` pairs.
pub fn tuples(rows: &[(Option<f64>, f64)]) -> BuildingDataset {
    BuildingDataset {
        building_id: "fixture".into(),
        tuples: rows
            .iter()
            .enumerate()
            .map(|(i, &(cn0, height))| ObservationTuple { label: None, cn0, height, truth: None, source_index: i })
            .collect(),
        provenance: Provenance::default(),
    }
}

/// Signal and height agree exactly: open above 15 m with strong C/N0,
/// closed below with weak C/N0.
pub fn fixed_point_rows() -> Vec<(Option<f64>, f64)> {
    (1..60)
        .map(|i| {
            let h = 0.5 * i as f64;
            let cn0 = if h > 15.0 { 36.0 + (i % 15) as f64 } else { 12.0 + (i % 13) as f64 };
            (Some(cn0), h)
        })
        .collect()
}

/// Clustered data on which the co-training loop settles into a two-cycle.
pub fn oscillating_rows() -> Vec<(Option<f64>, f64)> {
    [
        (33.8, 37.8), (33.3, 37.5), (33.9, 37.3), (33.9, 37.6), (33.1, 37.0),
        (48.7, 25.8), (48.9, 25.5), (48.9, 25.6), (48.8, 26.2), (49.4, 25.5), (48.6, 25.3), (49.6, 26.2),
        (49.0, 36.8), (49.2, 36.0), (48.6, 35.2), (48.7, 36.2), (49.2, 35.1),
        (26.8, 15.3), (25.2, 16.2), (25.7, 15.6), (26.1, 15.6),
        (33.2, 0.0), (32.5, 0.5), (33.4, 0.8), (33.1, -0.3), (32.5, 0.9),
        (29.6, 28.9), (29.0, 29.3), (28.1, 29.4), (28.9, 29.5),
    ]
    .iter()
    .map(|&(cn0, h)| (Some(cn0), h))
    .collect()
}
