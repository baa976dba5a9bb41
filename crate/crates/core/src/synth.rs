//! Seeded synthetic scenes: one extruded footprint of known height observed
//! from a few static receiver sites.
//!
//! Truth labels come from the unperturbed geometry. C/N0 is drawn from a
//! Gaussian per class, truncated to `(receiver_floor, 80)`. Closed signals
//! that clip the building within `diffraction_band` of its roof may be drawn
//! from the open class instead, and other closed signals may be blocked
//! outright. Recorded receiver positions carry isotropic horizontal noise.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{ray_entry, Footprint, FootprintCrs, FootprintDocument, GeoError, PlanarPoint, RayPath};
use crate::ingest::{save_observations, IngestError, ObservationRecord, Receiver, TruthLabel};

/// Upper limit of a valid C/N0 value, dB-Hz (exclusive).
pub const CN0_CEILING: f64 = 80.0;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scene: {0}")]
    Config(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SatelliteSampler {
    pub min_elevation: f64,
    pub max_elevation: f64,
    pub count_per_epoch: usize,
}

impl Default for SatelliteSampler {
    fn default() -> Self {
        SatelliteSampler { min_elevation: 10.0, max_elevation: 85.0, count_per_epoch: 30 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub footprint: Footprint,
    pub true_height: f64,
    pub receiver_sites: Vec<PlanarPoint>,
    pub epochs_per_site: usize,
    pub satellite_sampler: SatelliteSampler,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.true_height > 0.0 && self.true_height.is_finite()) {
            return Err(SynthError::Config(format!("true_height must be positive, got {}", self.true_height)));
        }
        if self.receiver_sites.is_empty() {
            return Err(SynthError::Config("at least one receiver site is required".into()));
        }
        for s in &self.receiver_sites {
            if !s.is_finite() {
                return Err(SynthError::Config(format!("non-finite receiver site {s:?}")));
            }
            if self.footprint.contains(s.x, s.y) {
                return Err(SynthError::Config(format!("receiver site ({}, {}) is inside the footprint", s.x, s.y)));
            }
        }
        if self.epochs_per_site == 0 {
            return Err(SynthError::Config("epochs_per_site must be at least 1".into()));
        }
        let s = &self.satellite_sampler;
        if s.count_per_epoch == 0 {
            return Err(SynthError::Config("count_per_epoch must be at least 1".into()));
        }
        if !(0.0 <= s.min_elevation && s.min_elevation < s.max_elevation && s.max_elevation <= 90.0) {
            return Err(SynthError::Config(format!(
                "elevation bounds must satisfy 0 <= min < max <= 90, got [{}, {}]",
                s.min_elevation, s.max_elevation
            )));
        }
        Ok(())
    }

    pub fn record_count(&self) -> usize {
        self.receiver_sites.len() * self.epochs_per_site * self.satellite_sampler.count_per_epoch
    }
}

/// Class-conditional C/N0 model. All values in dB-Hz, metres or
/// probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SignalDistributionSpec {
    pub open_mean: f64,
    pub open_sd: f64,
    pub closed_mean: f64,
    pub closed_sd: f64,
    pub blocked_prob_closed: f64,
    pub receiver_floor: f64,
    pub location_noise_sd: f64,
    pub diffraction_band: f64,
    pub diffraction_boost: f64,
}

impl Default for SignalDistributionSpec {
    fn default() -> Self {
        SignalDistributionSpec {
            open_mean: 40.0,
            open_sd: 5.0,
            closed_mean: 25.0,
            closed_sd: 6.0,
            blocked_prob_closed: 0.5,
            receiver_floor: 10.0,
            location_noise_sd: 1.0,
            diffraction_band: 5.0,
            diffraction_boost: 0.6,
        }
    }
}

impl SignalDistributionSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::Config(msg));
        if !(self.open_sd > 0.0 && self.closed_sd > 0.0) {
            return bad(format!("standard deviations must be positive ({}, {})", self.open_sd, self.closed_sd));
        }
        if !(self.open_mean > self.closed_mean) {
            return bad(format!("open_mean {} must exceed closed_mean {}", self.open_mean, self.closed_mean));
        }
        for (name, p) in [("blocked_prob_closed", self.blocked_prob_closed), ("diffraction_boost", self.diffraction_boost)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if !(0.0 <= self.receiver_floor && self.receiver_floor < CN0_CEILING) {
            return bad(format!("receiver_floor must lie in [0, {CN0_CEILING}), got {}", self.receiver_floor));
        }
        if !(self.location_noise_sd >= 0.0 && self.location_noise_sd.is_finite()) {
            return bad(format!("location_noise_sd must be non-negative, got {}", self.location_noise_sd));
        }
        if !(self.diffraction_band >= 0.0 && self.diffraction_band.is_finite()) {
            return bad(format!("diffraction_band must be non-negative, got {}", self.diffraction_band));
        }
        if !(self.open_mean.is_finite() && self.closed_mean.is_finite()) {
            return bad("class means must be finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneTruth {
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub records: Vec<ObservationRecord>,
    pub truth: SceneTruth,
    /// Footprint entry height of each record's ray from its unperturbed site.
    pub true_intersections: Vec<Option<f64>>,
}

/// Geometric label of a signal: open iff the ray misses the footprint or
/// enters it strictly above `height`.
pub fn truth_label(
    fp: &Footprint,
    site: PlanarPoint,
    azimuth: f64,
    elevation: f64,
    height: f64,
) -> Result<(TruthLabel, Option<f64>), GeoError> {
    let hit = ray_entry(&RayPath::new(site, azimuth, elevation)?, fp)?;
    let h = hit.map(|i| i.intersection_height);
    let label = match h {
        Some(h) if h <= height => TruthLabel::Closed,
        _ => TruthLabel::Open,
    };
    Ok((label, h))
}

/// Gaussian draw restricted to `(floor, 80)` by rejection.
pub fn sample_cn0<R: Rng + ?Sized>(rng: &mut R, normal: &Normal<f64>, floor: f64) -> f64 {
    loop {
        let v = normal.sample(rng);
        if v > floor && v < CN0_CEILING {
            return v;
        }
    }
}

fn normal(mean: f64, sd: f64) -> Result<Normal<f64>, SynthError> {
    Normal::new(mean, sd).map_err(|e| SynthError::Config(format!("normal({mean}, {sd}): {e}")))
}

/// Generates every record of the scene. Deterministic given `scene.seed`.
pub fn generate(scene: &SceneSpec, dist: &SignalDistributionSpec) -> Result<SyntheticDataset, SynthError> {
    scene.validate()?;
    dist.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    let open = normal(dist.open_mean, dist.open_sd)?;
    let closed = normal(dist.closed_mean, dist.closed_sd)?;
    let noise = normal(0.0, dist.location_noise_sd.max(f64::MIN_POSITIVE))?;
    let sampler = scene.satellite_sampler;
    let height = scene.true_height;

    let mut records = Vec::with_capacity(scene.record_count());
    let mut true_intersections = Vec::with_capacity(scene.record_count());
    for (site_idx, site) in scene.receiver_sites.iter().enumerate() {
        for epoch in 0..scene.epochs_per_site {
            let timestamp = (site_idx * scene.epochs_per_site + epoch) as f64;
            let recorded = if dist.location_noise_sd > 0.0 {
                PlanarPoint::new(site.x + noise.sample(&mut rng), site.y + noise.sample(&mut rng), site.alt)
            } else {
                *site
            };
            for k in 0..sampler.count_per_epoch {
                let azimuth = rng.random_range(0.0..360.0);
                let elevation = rng.random_range(sampler.min_elevation..sampler.max_elevation);
                let (label, h) = truth_label(&scene.footprint, *site, azimuth, elevation, height)?;
                let cn0 = match (label, h) {
                    (TruthLabel::Open, _) => Some(sample_cn0(&mut rng, &open, dist.receiver_floor)),
                    (TruthLabel::Closed, Some(h))
                        if h >= height - dist.diffraction_band && rng.random_bool(dist.diffraction_boost) =>
                    {
                        Some(sample_cn0(&mut rng, &open, dist.receiver_floor))
                    }
                    (TruthLabel::Closed, _) => {
                        if rng.random_bool(dist.blocked_prob_closed) {
                            None
                        } else {
                            Some(sample_cn0(&mut rng, &closed, dist.receiver_floor))
                        }
                    }
                };
                records.push(ObservationRecord {
                    timestamp,
                    receiver: Receiver::Planar(recorded),
                    sat_azimuth: azimuth,
                    sat_elevation: elevation,
                    cn0,
                    sat_id: format!("G{:02}", k + 1),
                    truth_label: Some(label),
                });
                true_intersections.push(h);
            }
        }
    }
    Ok(SyntheticDataset { records, truth: SceneTruth { height }, true_intersections })
}

/// Writes the records in the observation CSV schema.
pub fn export(dataset: &SyntheticDataset, path: impl AsRef<Path>) -> Result<(), SynthError> {
    Ok(save_observations(path, &dataset.records)?)
}

/// Scene section of the simulation config document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneDocument {
    pub footprint: FootprintDocument,
    pub true_height: f64,
    pub receiver_sites: Vec<PlanarPoint>,
    pub epochs_per_site: usize,
    pub satellite_sampler: SatelliteSampler,
    /// Drawn from entropy by the caller when absent.
    pub seed: Option<u64>,
}

impl Default for SceneDocument {
    fn default() -> Self {
        SceneDocument {
            footprint: FootprintDocument {
                id: "synthetic-block".into(),
                crs: FootprintCrs::LocalMetres,
                ring: vec![[0.0, 0.0], [40.0, 0.0], [40.0, 20.0], [0.0, 20.0]],
            },
            true_height: 20.0,
            receiver_sites: vec![
                PlanarPoint::new(-15.0, 10.0, 1.0),
                PlanarPoint::new(20.0, -15.0, 1.0),
                PlanarPoint::new(20.0, 35.0, 1.0),
            ],
            epochs_per_site: 430,
            satellite_sampler: SatelliteSampler::default(),
            seed: None,
        }
    }
}

/// JSON config document: `{"scene": {...}, "signal": {...}}`, every field
/// optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub scene: SceneDocument,
    pub signal: SignalDistributionSpec,
}

impl SimulationConfig {
    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        serde_json::from_str(text).map_err(|e| SynthError::Config(format!("config document: {e}")))
    }

    /// Resolves the scene, using `seed` when the document carries none.
    pub fn scene_spec(&self, seed: u64) -> Result<SceneSpec, SynthError> {
        let doc = &self.scene;
        if doc.footprint.crs != FootprintCrs::LocalMetres {
            return Err(SynthError::Config("synthetic footprints must use the local-metres crs".into()));
        }
        let spec = SceneSpec {
            footprint: doc.footprint.clone().into_footprint()?,
            true_height: doc.true_height,
            receiver_sites: doc.receiver_sites.clone(),
            epochs_per_site: doc.epochs_per_site,
            satellite_sampler: doc.satellite_sampler,
            seed: doc.seed.unwrap_or(seed),
        };
        spec.validate()?;
        self.signal.validate()?;
        Ok(spec)
    }
}
