//! Train and detect on in-memory rasters.

use std::collections::BTreeMap;

use rayon::prelude::*;
use sarcd_core::classifier::{self, LinearModel};
use sarcd_core::pcanet::{self, FeatureVector, FitStats, PcaNetModel, TrainingSource};
use sarcd_core::raster::{self, Coord, ReferenceMap, TemporalPair};
use sarcd_core::sampling::{self, SamplePartition, Strategy, TrainingSet};
use sarcd_core::seed::{self, stream};
use sarcd_core::{Error, Result};

use crate::config::RunConfig;

/// How many training samples fell in each partition set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SetCounts {
    pub boundary: usize,
    pub inner_changed: usize,
    pub inner_unchanged: usize,
}

impl SetCounts {
    pub fn of(part: &SamplePartition, ts: &TrainingSet) -> Self {
        let mut counts = SetCounts::default();
        for (c, _) in &ts.samples {
            if part.omega_b.contains(*c) {
                counts.boundary += 1;
            } else if part.omega_c.contains(*c) {
                counts.inner_changed += 1;
            } else {
                counts.inner_unchanged += 1;
            }
        }
        counts
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: PcaNetModel,
    pub training_set: TrainingSet,
    pub partition: SamplePartition,
    pub set_counts: SetCounts,
    pub fit: FitStats,
    /// Distinct coordinates in the training set.
    pub unique_coords: usize,
}

/// Draws the training set of `cfg.strategy`.
pub fn draw_training_set(
    cfg: &RunConfig,
    pair: &TemporalPair,
    reference: &ReferenceMap,
    part: &SamplePartition,
) -> Result<TrainingSet> {
    let mut rng = seed::stream_rng(cfg.seed, stream::SAMPLING);
    match cfg.strategy {
        Strategy::Uc => sampling::draw_uc(reference, cfg.rate, &mut rng),
        Strategy::Buc => sampling::draw_buc(part, reference, cfg.rate, &mut rng),
        Strategy::Obuc => {
            let buc = sampling::draw_buc(part, reference, cfg.rate, &mut rng)?;
            let mut over = seed::stream_rng(cfg.seed, stream::OVERSAMPLING);
            sampling::oversample_balance(&buc, &mut over)
        }
        Strategy::Generalize => sampling::draw_generalize(part, reference, &mut rng),
        Strategy::Pseudo => {
            let diff = raster::log_ratio(pair, cfg.log_ratio_offset)?;
            sampling::pseudolabel_baseline(&diff, cfg.rate, &mut rng)
        }
    }
}

/// Features of every distinct coordinate, in ascending coordinate order.
fn unique_features(
    extractor: &pcanet::FeatureExtractor,
    pair: &TemporalPair,
    coords: impl IntoIterator<Item = Coord>,
) -> Result<BTreeMap<Coord, FeatureVector>> {
    let mut unique: Vec<Coord> = coords.into_iter().collect();
    unique.sort_unstable();
    unique.dedup();
    let feats = unique
        .par_iter()
        .map(|&c| extractor.extract(pair, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(unique.into_iter().zip(feats).collect())
}

/// Full training run on one labelled pair.
pub fn train(cfg: &RunConfig, pair: &TemporalPair, reference: &ReferenceMap) -> Result<TrainOutcome> {
    cfg.validate()?;
    if !reference.matches(pair) {
        return Err(Error::Alignment {
            left_width: pair.width(),
            left_height: pair.height(),
            right_width: reference.width(),
            right_height: reference.height(),
        });
    }
    let part = sampling::partition(reference, cfg.radius);
    let ts = draw_training_set(cfg, pair, reference, &part)?;
    let set_counts = SetCounts::of(&part, &ts);

    let coords = ts.coords();
    let source = TrainingSource {
        pair,
        coords: &coords,
    };
    let mut filter_rng = seed::stream_rng(cfg.seed, stream::FILTERS);
    let (extractor, fit) = pcanet::fit_feature_extractor(&[source], &cfg.net, &mut filter_rng)?;

    let by_coord = unique_features(&extractor, pair, coords.iter().copied())?;
    let features: Vec<FeatureVector> = coords.iter().map(|c| by_coord[c].clone()).collect();
    let signs: Vec<f64> = ts.samples.iter().map(|(_, l)| classifier::sign_of(*l)).collect();
    let mut clf_rng = seed::stream_rng(cfg.seed, stream::CLASSIFIER);
    let linear: LinearModel = classifier::train_linear(&features, &signs, cfg.hinge, &mut clf_rng)?;

    Ok(TrainOutcome {
        model: PcaNetModel::new(extractor, linear)?,
        unique_coords: by_coord.len(),
        training_set: ts,
        partition: part,
        set_counts,
        fit,
    })
}

fn detect_rows(model: &PcaNetModel, pair: &TemporalPair) -> Result<Vec<u8>> {
    let w = pair.width();
    let rows: Vec<Vec<u8>> = (0..pair.height())
        .into_par_iter()
        .map(|row| {
            (0..w)
                .map(|col| model.predict_pixel(pair, Coord::new(row, col)))
                .collect::<Result<Vec<u8>>>()
        })
        .collect::<Result<_>>()?;
    Ok(rows.concat())
}

/// Classifies every pixel. Rows are spread over `workers` threads and
/// reassembled in row-major order, so the map does not depend on the thread count.
pub fn detect(model: &PcaNetModel, pair: &TemporalPair, workers: Option<usize>) -> Result<ReferenceMap> {
    let labels = match workers {
        None => detect_rows(model, pair)?,
        Some(0) => return Err(Error::Parameter("workers must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Parameter(format!("cannot start {n} workers: {e}")))?
            .install(|| detect_rows(model, pair))?,
    };
    ReferenceMap::new(pair.width(), pair.height(), labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sarcd_core::synthgen::{generate_scene, SceneSpec};

    fn small_scene(seed: u64) -> sarcd_core::synthgen::Scene {
        generate_scene(&SceneSpec {
            width: 40,
            height: 40,
            n_blobs: 2,
            radius_min: 4,
            radius_max: 7,
            seed,
            ..Default::default()
        })
        .unwrap()
    }

    fn small_cfg(strategy: Strategy) -> RunConfig {
        let mut net = sarcd_core::pcanet::PcaNetConfig::with_patch(5);
        net.k = 3;
        net.l1 = 4;
        net.l2 = 4;
        net.n_max = 5000;
        RunConfig {
            net,
            strategy,
            rate: 0.1,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn set_counts_add_up() {
        let s = small_scene(1);
        for strategy in Strategy::ALL {
            let cfg = small_cfg(strategy);
            let part = sampling::partition(&s.reference, cfg.radius);
            let ts = draw_training_set(&cfg, &s.pair, &s.reference, &part).unwrap();
            let c = SetCounts::of(&part, &ts);
            assert_eq!(c.boundary + c.inner_changed + c.inner_unchanged, ts.len(), "{strategy}");
        }
    }

    #[test]
    fn detect_is_worker_independent_and_replays_training() {
        let s = small_scene(2);
        let out = train(&small_cfg(Strategy::Obuc), &s.pair, &s.reference).unwrap();
        let one = detect(&out.model, &s.pair, Some(1)).unwrap();
        let three = detect(&out.model, &s.pair, Some(3)).unwrap();
        assert_eq!(one, three);
        for (c, _) in &out.training_set.samples {
            let f = out.model.extractor.extract(&s.pair, *c).unwrap();
            assert_eq!(one.get(*c), out.model.classifier.predict(&f).unwrap());
        }
    }

    #[test]
    fn obuc_on_unchanged_reference_is_imbalance() {
        let s = small_scene(3);
        let flat = ReferenceMap::unchanged(40, 40).unwrap();
        let err = train(&small_cfg(Strategy::Obuc), &s.pair, &flat).unwrap_err();
        assert!(matches!(err, Error::Imbalance { empty_class: "changed" }));
    }
}
