//! Panoptic Quality evaluation: segment matching, mergeable accumulators
//! and the PQ/SQ/RQ report.
//!
//! Matching follows the standard panoptic benchmark rules: a prediction and
//! a ground-truth segment of the same class match iff their IoU exceeds 0.5
//! (which makes the match unique), void pixels are excluded from the IoU
//! denominator, crowd ground truth never counts as FN, and an unmatched
//! prediction mostly covered by void/crowd is exempt from FP. All counts are
//! exact integers; IoU sums are accumulated in a fixed order (ascending
//! ground-truth id) so identical inputs always give bit-identical stats.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::label_space::{Category, JointLabelSpace};
use crate::raster::PanopticMap;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("map dimensions differ: prediction {pred_w}x{pred_h}, ground truth {gt_w}x{gt_h}")]
    DimensionMismatch {
        pred_w: u32,
        pred_h: u32,
        gt_w: u32,
        gt_h: u32,
    },
    #[error("class {0} is not part of the label space")]
    UnknownClass(u32),
    #[error(transparent)]
    LabelSpace(#[from] crate::label_space::LabelSpaceError),
}

/// Per-class accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub iou_sum: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_count: u64,
}

impl ClassStats {
    fn add(&mut self, other: &ClassStats) {
        self.iou_sum += other.iou_sum;
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_count += other.fn_count;
    }

    pub fn is_empty(&self) -> bool {
        self.tp == 0 && self.fp == 0 && self.fn_count == 0
    }
}

/// Per-class PQ accumulators with an associative, commutative merge, so
/// per-image stats can be reduced across workers in any grouping.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PqStats {
    classes: BTreeMap<u32, ClassStats>,
}

impl PqStats {
    pub fn new() -> Self {
        PqStats::default()
    }

    pub fn class(&self, class_id: u32) -> ClassStats {
        self.classes.get(&class_id).copied().unwrap_or_default()
    }

    pub fn classes(&self) -> impl Iterator<Item = (u32, &ClassStats)> {
        self.classes.iter().map(|(&k, v)| (k, v))
    }

    pub fn is_empty(&self) -> bool {
        self.classes.values().all(|c| c.is_empty())
    }

    pub fn add_tp(&mut self, class_id: u32, iou: f64) {
        let entry = self.classes.entry(class_id).or_default();
        entry.tp += 1;
        entry.iou_sum += iou;
    }

    pub fn add_fp(&mut self, class_id: u32) {
        self.classes.entry(class_id).or_default().fp += 1;
    }

    pub fn add_fn(&mut self, class_id: u32) {
        self.classes.entry(class_id).or_default().fn_count += 1;
    }

    /// Componentwise accumulate.
    pub fn merge(&mut self, other: &PqStats) {
        for (&class_id, stats) in &other.classes {
            self.classes.entry(class_id).or_default().add(stats);
        }
    }
}

/// Componentwise sum over the union of class keys.
pub fn merge_stats(a: &PqStats, b: &PqStats) -> PqStats {
    let mut out = a.clone();
    out.merge(b);
    out
}

/// Fraction of a prediction's area lying on void/same-class-crowd above
/// which an unmatched prediction is not an FP.
pub const FP_EXEMPTION_FRACTION: f64 = 0.5;

/// Match segments of one image pair and accumulate TP/FP/FN and IoU.
pub fn match_segments(pred: &PanopticMap, gt: &PanopticMap) -> Result<PqStats, MetricsError> {
    if pred.width() != gt.width() || pred.height() != gt.height() {
        return Err(MetricsError::DimensionMismatch {
            pred_w: pred.width(),
            pred_h: pred.height(),
            gt_w: gt.width(),
            gt_h: gt.height(),
        });
    }

    // Contingency table over (pred id, gt id) pairs, built in one pass.
    // Consecutive pixels usually repeat the same pair, so run-length the
    // raster before sorting.
    let mut runs: Vec<(u64, u64)> = Vec::new();
    {
        let mut current_key = u64::MAX;
        let mut count = 0u64;
        for (&p, &g) in pred.pixels().iter().zip(gt.pixels()) {
            let key = ((p as u64) << 24) | g as u64;
            if key == current_key {
                count += 1;
            } else {
                if count > 0 {
                    runs.push((current_key, count));
                }
                current_key = key;
                count = 1;
            }
        }
        if count > 0 {
            runs.push((current_key, count));
        }
    }
    runs.sort_unstable_by_key(|&(key, _)| key);

    // (pred, gt) -> intersection, gt-major index for the matching scan.
    let mut intersections: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    for (key, count) in runs {
        let p = (key >> 24) as u32;
        let g = (key & 0xff_ffff) as u32;
        *intersections.entry((p, g)).or_insert(0) += count;
    }
    let mut by_gt: BTreeMap<u32, Vec<(u32, u64)>> = BTreeMap::new();
    let mut pred_void_inter: BTreeMap<u32, u64> = BTreeMap::new();
    for (&(p, g), &count) in &intersections {
        if g == 0 {
            if p != 0 {
                pred_void_inter.insert(p, count);
            }
            continue;
        }
        if p != 0 {
            by_gt.entry(g).or_default().push((p, count));
        }
    }

    let mut stats = PqStats::new();
    let mut pred_matched: std::collections::BTreeSet<u32> = std::collections::BTreeSet::new();
    let mut crowd_class_segments: BTreeMap<u32, Vec<u32>> = BTreeMap::new();

    // Segments are stored in ascending id order; iterating them fixes the
    // IoU accumulation order.
    for gt_seg in gt.segments() {
        if gt_seg.ignore {
            crowd_class_segments
                .entry(gt_seg.class_id)
                .or_default()
                .push(gt_seg.id);
            continue;
        }
        let mut matched = false;
        if let Some(partners) = by_gt.get(&gt_seg.id) {
            for &(pred_id, inter) in partners {
                let pred_seg = pred.segment(pred_id).expect("pixel ids have entries");
                if pred_seg.class_id != gt_seg.class_id {
                    continue;
                }
                let void_overlap = pred_void_inter.get(&pred_id).copied().unwrap_or(0);
                let union = pred_seg.area + gt_seg.area - inter - void_overlap;
                let iou = inter as f64 / union as f64;
                if iou > 0.5 {
                    debug_assert!(!matched, "IoU > 0.5 matches are unique");
                    stats.add_tp(gt_seg.class_id, iou);
                    pred_matched.insert(pred_id);
                    matched = true;
                }
            }
        }
        if !matched {
            stats.add_fn(gt_seg.class_id);
        }
    }

    for pred_seg in pred.segments() {
        if pred_matched.contains(&pred_seg.id) {
            continue;
        }
        // Void plus same-class crowd overlap exempts a lost prediction.
        let mut exempt = pred_void_inter.get(&pred_seg.id).copied().unwrap_or(0);
        if let Some(crowd_ids) = crowd_class_segments.get(&pred_seg.class_id) {
            for &crowd_id in crowd_ids {
                exempt += intersections
                    .get(&(pred_seg.id, crowd_id))
                    .copied()
                    .unwrap_or(0);
            }
        }
        if (exempt as f64) > FP_EXEMPTION_FRACTION * pred_seg.area as f64 {
            continue;
        }
        stats.add_fp(pred_seg.class_id);
    }

    Ok(stats)
}

/// Per-class quality scores, all in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_count: u64,
}

/// Unweighted mean over participating classes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
    /// Number of classes participating in the mean.
    pub classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PqReport {
    pub per_class: BTreeMap<u32, ClassReport>,
    pub all: GroupReport,
    pub things: GroupReport,
    pub stuff: GroupReport,
}

/// Turn accumulated stats into PQ/SQ/RQ scores.
///
/// Classes with no TP, FP or FN at all do not participate; a class with
/// activity but zero TP scores 0. `PQ = SQ * RQ` holds per class whenever
/// `tp > 0`.
pub fn finalize(stats: &PqStats, space: &JointLabelSpace) -> Result<PqReport, MetricsError> {
    let mut per_class = BTreeMap::new();
    let mut sums: BTreeMap<Category, (f64, f64, f64, usize)> = BTreeMap::new();
    let mut all = (0.0f64, 0.0f64, 0.0f64, 0usize);

    for (class_id, class_stats) in stats.classes() {
        if class_stats.is_empty() {
            continue;
        }
        let category = space
            .category_of(class_id)
            .map_err(|_| MetricsError::UnknownClass(class_id))?
            .ok_or(MetricsError::UnknownClass(class_id))?;

        let denom =
            class_stats.tp as f64 + 0.5 * class_stats.fp as f64 + 0.5 * class_stats.fn_count as f64;
        let (pq, sq, rq) = if class_stats.tp == 0 {
            (0.0, 0.0, 0.0)
        } else {
            (
                class_stats.iou_sum / denom,
                class_stats.iou_sum / class_stats.tp as f64,
                class_stats.tp as f64 / denom,
            )
        };
        per_class.insert(
            class_id,
            ClassReport {
                pq,
                sq,
                rq,
                tp: class_stats.tp,
                fp: class_stats.fp,
                fn_count: class_stats.fn_count,
            },
        );
        let group = sums.entry(category).or_insert((0.0, 0.0, 0.0, 0));
        group.0 += pq;
        group.1 += sq;
        group.2 += rq;
        group.3 += 1;
        all.0 += pq;
        all.1 += sq;
        all.2 += rq;
        all.3 += 1;
    }

    let to_group = |(pq, sq, rq, n): (f64, f64, f64, usize)| {
        if n == 0 {
            GroupReport::default()
        } else {
            GroupReport {
                pq: pq / n as f64,
                sq: sq / n as f64,
                rq: rq / n as f64,
                classes: n,
            }
        }
    };

    let group_for =
        |category: Category| to_group(sums.get(&category).copied().unwrap_or((0.0, 0.0, 0.0, 0)));
    Ok(PqReport {
        per_class,
        all: to_group(all),
        things: group_for(Category::Thing),
        stuff: group_for(Category::Stuff),
    })
}
