//! Training data plumbing: balanced epoch composition by dataset
//! replication, the milestone learning-rate schedule with linear warm-up,
//! label-map augmentation and resolution capping.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::interp::{flip_horizontal, resize_nearest_u32};
use crate::raster::{PanopticMap, SegmentMeta};

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error("anchor dataset {0:?} not present in the stats")]
    UnknownAnchor(String),
    #[error("duplicate dataset name {0:?}")]
    DuplicateDataset(String),
    #[error("dataset {0:?} has no training images")]
    EmptyDataset(String),
    #[error("replication factor must be at least 1")]
    ZeroFactor,
    #[error("schedule: {0}")]
    InvalidSchedule(String),
    #[error("augmentation scale {0} outside [{SCALE_MIN}, {SCALE_MAX}]")]
    ScaleOutOfRange(f64),
    #[error("crop {x},{y} {width}x{height} exceeds the {canvas_w}x{canvas_h} canvas")]
    CropOutsideCanvas {
        x: u32,
        y: u32,
        width: u32,
        height: u32,
        canvas_w: u32,
        canvas_h: u32,
    },
    #[error("train fraction {0} outside [0, 1]")]
    BadFraction(f64),
    #[error(transparent)]
    Raster(#[from] crate::raster::RasterError),
}

/// Training-set size of one dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub name: String,
    pub train_size: u32,
}

/// One epoch worth of samples: every anchor image once, every other image
/// `factor` times, in a seeded uniform shuffle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochPlan {
    pub seed: u64,
    pub items: Vec<PlanItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanItem {
    pub dataset: String,
    pub index: u32,
}

/// Compose one balanced epoch. The anchor dataset (the large one)
/// contributes each image once; every other dataset is replicated `factor`
/// times. Identical seeds give identical plans.
pub fn plan_epoch(
    stats: &[DatasetStats],
    anchor: &str,
    factor: u32,
    seed: u64,
) -> Result<EpochPlan, PlanError> {
    if factor == 0 {
        return Err(PlanError::ZeroFactor);
    }
    let mut names = std::collections::BTreeSet::new();
    for ds in stats {
        if !names.insert(&ds.name) {
            return Err(PlanError::DuplicateDataset(ds.name.clone()));
        }
        if ds.train_size == 0 {
            return Err(PlanError::EmptyDataset(ds.name.clone()));
        }
    }
    if !stats.iter().any(|ds| ds.name == anchor) {
        return Err(PlanError::UnknownAnchor(anchor.to_string()));
    }

    let total: usize = stats
        .iter()
        .map(|ds| {
            let reps = if ds.name == anchor {
                1
            } else {
                factor as usize
            };
            ds.train_size as usize * reps
        })
        .sum();
    let mut items = Vec::with_capacity(total);
    for ds in stats {
        let reps = if ds.name == anchor { 1 } else { factor };
        for _ in 0..reps {
            for index in 0..ds.train_size {
                items.push(PlanItem {
                    dataset: ds.name.clone(),
                    index,
                });
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    items.shuffle(&mut rng);
    Ok(EpochPlan { seed, items })
}

/// Multi-step learning-rate schedule with linear warm-up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub lr_base: f64,
    pub warmup_iters: u64,
    pub warmup_start_factor: f64,
    pub milestones: Vec<u64>,
    pub decay: f64,
}

/// SGD momentum used for training; recorded for documentation.
pub const SGD_MOMENTUM: f64 = 0.9;
/// Global batch size used for training; recorded for documentation.
pub const TRAIN_BATCH_SIZE: u32 = 4;

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule {
            lr_base: 0.01,
            warmup_iters: 200,
            warmup_start_factor: 1.0 / 3.0,
            milestones: vec![400_000, 520_000],
            decay: 10.0,
        }
    }
}

impl LrSchedule {
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.lr_base <= 0.0 || self.lr_base.is_nan() {
            return Err(PlanError::InvalidSchedule(
                "lr_base must be positive".into(),
            ));
        }
        if self.decay <= 0.0 || self.decay.is_nan() {
            return Err(PlanError::InvalidSchedule("decay must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.warmup_start_factor) {
            return Err(PlanError::InvalidSchedule(
                "warmup_start_factor must lie in [0, 1]".into(),
            ));
        }
        let mut prev = self.warmup_iters;
        for &m in &self.milestones {
            if m <= prev {
                return Err(PlanError::InvalidSchedule(format!(
                    "milestones must be strictly increasing and beyond warm-up, found {m}"
                )));
            }
            prev = m;
        }
        Ok(())
    }

    /// Learning rate at an iteration. During warm-up the rate rises
    /// linearly from `warmup_start_factor * lr_base` to `lr_base`; after
    /// that it is `lr_base / decay^k` with `k` the number of milestones at
    /// or before the iteration (the drop applies at the milestone itself).
    pub fn lr_at(&self, iter: u64) -> f64 {
        if iter < self.warmup_iters {
            let progress = iter as f64 / self.warmup_iters as f64;
            return self.lr_base
                * (self.warmup_start_factor + (1.0 - self.warmup_start_factor) * progress);
        }
        let drops = self.milestones.iter().filter(|&&m| m <= iter).count() as i32;
        self.lr_base / self.decay.powi(drops)
    }
}

pub const SCALE_MIN: f64 = 0.5;
pub const SCALE_MAX: f64 = 2.0;

/// Crop rectangle in post-scale coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropRect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

/// One sampled augmentation: scale, optional horizontal flip, and a crop of
/// the image's original (pre-scale) size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSpec {
    pub flip: bool,
    pub scale: f64,
    pub crop: CropRect,
}

/// Canvas size after scaling, rounded to the nearest pixel (at least 1).
pub fn scaled_canvas(width: u32, height: u32, scale: f64) -> (u32, u32) {
    let w = ((width as f64 * scale).round() as u32).max(1);
    let h = ((height as f64 * scale).round() as u32).max(1);
    (w, h)
}

/// Draw an augmentation: fair-coin flip, scale uniform in `[0.5, 2.0]`, and
/// a crop of the original size (clamped to the scaled canvas when the image
/// shrank) at a uniformly random valid origin. Draw order is flip, scale,
/// origin x, origin y.
pub fn sample_augmentation<R: Rng>(rng: &mut R, width: u32, height: u32) -> AugmentationSpec {
    let flip = rng.random_bool(0.5);
    let scale = rng.random_range(SCALE_MIN..=SCALE_MAX);
    let (canvas_w, canvas_h) = scaled_canvas(width, height, scale);
    let crop_w = width.min(canvas_w);
    let crop_h = height.min(canvas_h);
    let x = rng.random_range(0..=canvas_w - crop_w);
    let y = rng.random_range(0..=canvas_h - crop_h);
    AugmentationSpec {
        flip,
        scale,
        crop: CropRect {
            x,
            y,
            width: crop_w,
            height: crop_h,
        },
    }
}

/// Apply an augmentation to a label map: nearest-neighbor scale (no new
/// ids), horizontal flip, then crop. Segments that fall outside the crop
/// disappear; areas are recomputed.
pub fn apply_to_labels(
    map: &PanopticMap,
    spec: &AugmentationSpec,
) -> Result<PanopticMap, PlanError> {
    if !(SCALE_MIN..=SCALE_MAX).contains(&spec.scale) || spec.scale.is_nan() {
        return Err(PlanError::ScaleOutOfRange(spec.scale));
    }
    let (canvas_w, canvas_h) = scaled_canvas(map.width(), map.height(), spec.scale);
    let crop = spec.crop;
    if crop.width == 0
        || crop.height == 0
        || crop
            .x
            .checked_add(crop.width)
            .is_none_or(|end| end > canvas_w)
        || crop
            .y
            .checked_add(crop.height)
            .is_none_or(|end| end > canvas_h)
    {
        return Err(PlanError::CropOutsideCanvas {
            x: crop.x,
            y: crop.y,
            width: crop.width,
            height: crop.height,
            canvas_w,
            canvas_h,
        });
    }

    let scaled = if canvas_w == map.width() && canvas_h == map.height() {
        map.pixels().to_vec()
    } else {
        resize_nearest_u32(map.pixels(), map.width(), map.height(), canvas_w, canvas_h)
    };
    let oriented = if spec.flip {
        flip_horizontal(&scaled, canvas_w, canvas_h)
    } else {
        scaled
    };

    let mut pixels = Vec::with_capacity(crop.width as usize * crop.height as usize);
    for y in crop.y..crop.y + crop.height {
        let row_start = (y * canvas_w + crop.x) as usize;
        pixels.extend_from_slice(&oriented[row_start..row_start + crop.width as usize]);
    }

    let present: std::collections::BTreeSet<u32> =
        pixels.iter().copied().filter(|&id| id != 0).collect();
    let metas: Vec<SegmentMeta> = map
        .segments()
        .iter()
        .filter(|s| present.contains(&s.id))
        .map(SegmentMeta::from)
        .collect();
    Ok(PanopticMap::new(crop.width, crop.height, pixels, &metas)?)
}

/// Shrink a resolution so its longest side is at most `cap`, preserving
/// aspect ratio; the short side rounds to the nearest pixel (at least 1).
pub fn cap_longest_side(width: u32, height: u32, cap: u32) -> (u32, u32) {
    let longest = width.max(height);
    if longest <= cap {
        return (width, height);
    }
    let scale = cap as f64 / longest as f64;
    if width >= height {
        (cap, ((height as f64 * scale).round() as u32).max(1))
    } else {
        (((width as f64 * scale).round() as u32).max(1), cap)
    }
}

/// Seeded train/validation split: a uniform shuffle of `0..n` cut at
/// `floor(train_fraction * n)`.
pub fn split_train_val(
    n: u32,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<u32>, Vec<u32>), PlanError> {
    if !(0.0..=1.0).contains(&train_fraction) || train_fraction.is_nan() {
        return Err(PlanError::BadFraction(train_fraction));
    }
    let mut indices: Vec<u32> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let cut = (train_fraction * n as f64).floor() as usize;
    let val = indices.split_off(cut);
    Ok((indices, val))
}

/// Training-set sizes of the six benchmark datasets. WildDash reflects the
/// 80:20 train/val split of its 4256 training images; KITTI's published
/// "200 training and testing images" is stored as 200 training images.
pub fn preset_dataset_stats() -> Vec<DatasetStats> {
    let sizes = [
        ("coco", 118_000),
        ("cityscapes", 2_975),
        ("mapillary", 18_000),
        ("viper", 18_000),
        ("wilddash", 3_404),
        ("kitti", 200),
    ];
    sizes
        .into_iter()
        .map(|(name, train_size)| DatasetStats {
            name: name.to_string(),
            train_size,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn stats(list: &[(&str, u32)]) -> Vec<DatasetStats> {
        list.iter()
            .map(|&(name, train_size)| DatasetStats {
                name: name.into(),
                train_size,
            })
            .collect()
    }

    #[test]
    fn single_anchor_dataset_plan() {
        let plan = plan_epoch(&stats(&[("A", 100)]), "A", 3, 7).unwrap();
        assert_eq!(plan.items.len(), 100);
        let mut seen = vec![0u32; 100];
        for item in &plan.items {
            assert_eq!(item.dataset, "A");
            seen[item.index as usize] += 1;
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn replication_counts_match_factor() {
        let plan = plan_epoch(&stats(&[("A", 100), ("B", 10), ("C", 5)]), "A", 3, 1).unwrap();
        assert_eq!(plan.items.len(), 100 + 30 + 15);
        let mut counts: BTreeMap<(String, u32), u32> = BTreeMap::new();
        for item in &plan.items {
            *counts
                .entry((item.dataset.clone(), item.index))
                .or_insert(0) += 1;
        }
        for ((dataset, _), count) in counts {
            let expected = if dataset == "A" { 1 } else { 3 };
            assert_eq!(count, expected, "dataset {dataset}");
        }
    }

    #[test]
    fn preset_sizes_are_roughly_balanced_against_coco() {
        let presets = preset_dataset_stats();
        let coco = presets
            .iter()
            .find(|d| d.name == "coco")
            .unwrap()
            .train_size as f64;
        let others: u32 = presets
            .iter()
            .filter(|d| d.name != "coco")
            .map(|d| d.train_size)
            .sum();
        // COCO is roughly three times the rest combined, so a 3x
        // replication approximately balances the epoch.
        let ratio = coco / others as f64;
        assert!((2.0..4.0).contains(&ratio), "ratio {ratio}");
        let plan_len = coco as usize + 3 * others as usize;
        let replicated = 3.0 * others as f64;
        assert!((replicated / coco - 1.0).abs() < 0.25);
        let plan = plan_epoch(&presets, "coco", 3, 0).unwrap();
        assert_eq!(plan.items.len(), plan_len);
    }

    #[test]
    fn unknown_anchor_is_an_error() {
        assert!(matches!(
            plan_epoch(&stats(&[("A", 10)]), "Z", 3, 0),
            Err(PlanError::UnknownAnchor(_))
        ));
    }

    #[test]
    fn same_seed_same_plan_different_seed_different_order() {
        let s = stats(&[("A", 50), ("B", 20)]);
        let p1 = plan_epoch(&s, "A", 3, 42).unwrap();
        let p2 = plan_epoch(&s, "A", 3, 42).unwrap();
        let p3 = plan_epoch(&s, "A", 3, 43).unwrap();
        assert_eq!(p1, p2);
        assert_ne!(p1.items, p3.items);
    }

    #[test]
    fn warmup_endpoints_and_milestones() {
        let s = LrSchedule::default();
        s.validate().unwrap();
        assert!((s.lr_at(0) - 0.01 / 3.0).abs() < 1e-12);
        assert!((s.lr_at(100) - 0.01 * (1.0 / 3.0 + 2.0 / 3.0 * 0.5)).abs() < 1e-12);
        assert!((s.lr_at(200) - 0.01).abs() < 1e-12);
        assert!((s.lr_at(399_999) - 0.01).abs() < 1e-12);
        assert!((s.lr_at(400_000) - 0.001).abs() < 1e-12);
        assert!((s.lr_at(520_000) - 0.0001).abs() < 1e-12);
    }

    #[test]
    fn warmup_is_continuous_at_the_boundary() {
        let s = LrSchedule::default();
        // Evaluate the warm-up line at its end point: both branches give lr_base.
        let warm_end = s.lr_base * (s.warmup_start_factor + (1.0 - s.warmup_start_factor));
        assert_eq!(warm_end, s.lr_at(s.warmup_iters));
    }

    #[test]
    fn schedule_validation_rejects_unsorted_milestones() {
        let s = LrSchedule {
            milestones: vec![500, 400],
            ..LrSchedule::default()
        };
        assert!(s.validate().is_err());
        let s = LrSchedule {
            milestones: vec![100],
            ..LrSchedule::default()
        };
        assert!(s.validate().is_err(), "milestone inside warm-up");
    }

    #[test]
    fn identity_spec_preserves_map() {
        let map = PanopticMap::new(
            3,
            2,
            vec![0, 1, 1, 2, 2, 0],
            &[
                SegmentMeta {
                    id: 1,
                    class_id: 5,
                    ignore: false,
                },
                SegmentMeta {
                    id: 2,
                    class_id: 6,
                    ignore: false,
                },
            ],
        )
        .unwrap();
        let spec = AugmentationSpec {
            flip: false,
            scale: 1.0,
            crop: CropRect {
                x: 0,
                y: 0,
                width: 3,
                height: 2,
            },
        };
        assert_eq!(apply_to_labels(&map, &spec).unwrap(), map);
    }

    #[test]
    fn flip_twice_is_identity() {
        let map = PanopticMap::new(
            4,
            1,
            vec![1, 1, 0, 2],
            &[
                SegmentMeta {
                    id: 1,
                    class_id: 5,
                    ignore: false,
                },
                SegmentMeta {
                    id: 2,
                    class_id: 6,
                    ignore: false,
                },
            ],
        )
        .unwrap();
        let spec = AugmentationSpec {
            flip: true,
            scale: 1.0,
            crop: CropRect {
                x: 0,
                y: 0,
                width: 4,
                height: 1,
            },
        };
        let once = apply_to_labels(&map, &spec).unwrap();
        assert_ne!(once, map);
        assert_eq!(apply_to_labels(&once, &spec).unwrap(), map);
    }

    #[test]
    fn double_scale_replicates_blocks() {
        let map = PanopticMap::new(
            2,
            2,
            vec![3, 3, 3, 0],
            &[SegmentMeta {
                id: 3,
                class_id: 1,
                ignore: false,
            }],
        )
        .unwrap();
        let spec = AugmentationSpec {
            flip: false,
            scale: 2.0,
            crop: CropRect {
                x: 0,
                y: 0,
                width: 4,
                height: 4,
            },
        };
        let out = apply_to_labels(&map, &spec).unwrap();
        assert_eq!(out.width(), 4);
        assert_eq!(out.segment(3).unwrap().area, 12);
        assert_eq!(
            out.pixels(),
            &[3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 0, 0, 3, 3, 0, 0]
        );
    }

    #[test]
    fn crop_outside_canvas_rejected() {
        let map = PanopticMap::all_void(4, 4).unwrap();
        let spec = AugmentationSpec {
            flip: false,
            scale: 1.0,
            crop: CropRect {
                x: 2,
                y: 0,
                width: 4,
                height: 4,
            },
        };
        assert!(matches!(
            apply_to_labels(&map, &spec),
            Err(PlanError::CropOutsideCanvas { .. })
        ));
    }

    #[test]
    fn scaled_canvas_and_crop_clamping() {
        assert_eq!(scaled_canvas(100, 80, 2.0), (200, 160));
        assert_eq!(scaled_canvas(100, 80, 0.5), (50, 40));
        // Upscale: crop keeps the original size, origin ranges over the
        // slack; downscale: crop clamps to the canvas.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let spec = sample_augmentation(&mut rng, 100, 80);
            let (cw, ch) = scaled_canvas(100, 80, spec.scale);
            if spec.scale >= 1.0 {
                assert_eq!((spec.crop.width, spec.crop.height), (100, 80));
                assert!(spec.crop.x <= cw - 100 && spec.crop.y <= ch - 80);
            } else {
                assert_eq!(
                    (spec.crop.width, spec.crop.height),
                    (100.min(cw), 80.min(ch))
                );
            }
        }
    }

    #[test]
    fn preset_stats_carry_published_sizes() {
        let presets = preset_dataset_stats();
        let get = |name: &str| presets.iter().find(|d| d.name == name).unwrap().train_size;
        assert_eq!(get("coco"), 118_000);
        assert_eq!(get("cityscapes"), 2_975);
        assert_eq!(get("mapillary"), 18_000);
        assert_eq!(get("viper"), 18_000);
        // 80% of WildDash's 4256 training images
        assert_eq!(get("wilddash"), 3_404);
        assert_eq!(get("kitti"), 200);
    }

    #[test]
    fn documented_training_constants() {
        assert_eq!(SGD_MOMENTUM, 0.9);
        assert_eq!(TRAIN_BATCH_SIZE, 4);
    }

    #[test]
    fn cap_shrinks_only_oversized_inputs() {
        assert_eq!(cap_longest_side(6000, 4000, 1920), (1920, 1280));
        assert_eq!(cap_longest_side(1920, 1080, 1920), (1920, 1080));
        assert_eq!(cap_longest_side(1024, 768, 1920), (1024, 768));
        assert_eq!(cap_longest_side(4000, 6000, 1920), (1280, 1920));
    }

    #[test]
    fn split_is_seeded_and_sized() {
        let (train, val) = split_train_val(4256, 0.8, 9).unwrap();
        assert_eq!(train.len(), 3404);
        assert_eq!(val.len(), 4256 - 3404);
        let (train2, _) = split_train_val(4256, 0.8, 9).unwrap();
        assert_eq!(train, train2);
        let mut all: Vec<u32> = train.iter().chain(val.iter()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..4256).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn epoch_multiset_counts(
            sizes in proptest::collection::vec(1u32..30, 1..5),
            factor in 1u32..4,
            seed in any::<u64>(),
        ) {
            let s: Vec<DatasetStats> = sizes
                .iter()
                .enumerate()
                .map(|(i, &n)| DatasetStats { name: format!("d{i}"), train_size: n })
                .collect();
            let plan = plan_epoch(&s, "d0", factor, seed).unwrap();
            let mut counts: BTreeMap<(String, u32), u32> = BTreeMap::new();
            for item in &plan.items {
                prop_assert!(item.index < sizes[item.dataset[1..].parse::<usize>().unwrap()]);
                *counts.entry((item.dataset.clone(), item.index)).or_insert(0) += 1;
            }
            for ds in &s {
                let expected = if ds.name == "d0" { 1 } else { factor };
                for index in 0..ds.train_size {
                    prop_assert_eq!(counts.get(&(ds.name.clone(), index)), Some(&expected));
                }
            }
        }

        #[test]
        fn lr_never_increases_after_warmup(
            a in 200u64..600_000,
            b in 200u64..600_000,
        ) {
            let s = LrSchedule::default();
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assert!(s.lr_at(hi) <= s.lr_at(lo));
        }

        #[test]
        fn sampled_augmentation_is_always_applicable(
            seed in any::<u64>(),
            w in 1u32..40,
            h in 1u32..40,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = sample_augmentation(&mut rng, w, h);
            prop_assert!((SCALE_MIN..=SCALE_MAX).contains(&spec.scale));
            let (cw, ch) = scaled_canvas(w, h, spec.scale);
            prop_assert!(spec.crop.x + spec.crop.width <= cw);
            prop_assert!(spec.crop.y + spec.crop.height <= ch);
            prop_assert_eq!(spec.crop.width, w.min(cw));
            prop_assert_eq!(spec.crop.height, h.min(ch));
        }

        #[test]
        fn augmentation_never_invents_segment_ids(
            seed in any::<u64>(),
            w in 2u32..24,
            h in 2u32..24,
        ) {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ids = [0u32, 1, 2, 3];
            let pixels: Vec<u32> = (0..(w * h) as usize)
                .map(|_| ids[rng.random_range(0..ids.len())])
                .collect();
            let present: std::collections::BTreeSet<u32> =
                pixels.iter().copied().filter(|&i| i != 0).collect();
            let metas: Vec<SegmentMeta> = present
                .iter()
                .map(|&id| SegmentMeta { id, class_id: id, ignore: false })
                .collect();
            let map = PanopticMap::new(w, h, pixels, &metas).unwrap();
            let spec = sample_augmentation(&mut rng, w, h);
            let out = apply_to_labels(&map, &spec).unwrap();
            for seg in out.segments() {
                prop_assert!(map.segment(seg.id).is_some());
            }
        }

        #[test]
        fn cap_preserves_aspect_within_one_pixel(w in 1u32..8000, h in 1u32..8000) {
            let cap = 1920;
            let (cw, ch) = cap_longest_side(w, h, cap);
            prop_assert!(cw.max(ch) <= cap.max(w.max(h).min(cap)));
            if w.max(h) > cap {
                prop_assert_eq!(cw.max(ch), cap);
                let expected_short = if w >= h {
                    h as f64 * cap as f64 / w as f64
                } else {
                    w as f64 * cap as f64 / h as f64
                };
                let short = if w >= h { ch } else { cw };
                prop_assert!((short as f64 - expected_short).abs() <= 1.0);
            } else {
                prop_assert_eq!((cw, ch), (w, h));
            }
        }
    }
}
