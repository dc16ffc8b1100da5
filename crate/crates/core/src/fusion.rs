//! Adaptive panoptic fusion: instance filtering, fused instance/semantic
//! logit planes and the combined argmax that yields a panoptic map.
//!
//! The fused score is `(sigmoid(a) + sigmoid(b)) * (a + b)` elementwise, so
//! pixels where both heads agree get amplified and pixels where they
//! disagree get attenuated. The final label per pixel is the argmax over all
//! stuff channels of the semantic head and one fused plane per surviving
//! instance; stuff regions smaller than `min_sa` pixels are relabelled void.

use serde::{Deserialize, Serialize};

use crate::interp::resize_bilinear;
use crate::label_space::{Category, JointLabelSpace};
use crate::raster::{PanopticMap, SegmentMeta};
use crate::tensor::SemanticLogits;

/// Stand-in for -inf outside an instance's retained mask; keeps fused values
/// finite while losing every realistic argmax.
pub const MASK_LOGIT_SENTINEL: f64 = -1.0e4;

#[derive(Debug, thiserror::Error)]
pub enum FusionError {
    #[error("plane shapes differ: {0} vs {1} values")]
    ShapeMismatch(usize, usize),
    #[error("instance {index}: bbox ({x0},{y0})-({x1},{y1}) invalid for {width}x{height} canvas")]
    InvalidBbox {
        index: usize,
        x0: u32,
        y0: u32,
        x1: u32,
        y1: u32,
        width: u32,
        height: u32,
    },
    #[error("instance {index}: confidence {confidence} outside [0, 1]")]
    InvalidConfidence { index: usize, confidence: f64 },
    #[error("instance {index}: mask grid is {mask_w}x{mask_h}, expected bbox or canvas size")]
    MaskSize {
        index: usize,
        mask_w: u32,
        mask_h: u32,
    },
    #[error("config: {0}")]
    InvalidConfig(String),
    #[error("instance class {class_id} has no semantic channel")]
    MissingSemanticChannel { class_id: u32 },
    #[error("instance class {class_id} is not a thing class")]
    NotAThingClass { class_id: u32 },
    #[error("semantic stuff channel {channel} carries non-stuff class {class_id}")]
    StuffChannelMismatch { channel: usize, class_id: u32 },
    #[error(transparent)]
    LabelSpace(#[from] crate::label_space::LabelSpaceError),
    #[error(transparent)]
    Raster(#[from] crate::raster::RasterError),
}

/// One detected thing: class, confidence, box and a mask-logit grid at
/// either bbox resolution (any grid size; resized bilinearly) or full canvas.
#[derive(Debug, Clone)]
pub struct InstancePrediction {
    pub class_id: u32,
    pub confidence: f64,
    /// Pixel rect, exclusive upper bounds, inside the canvas.
    pub bbox: (u32, u32, u32, u32),
    pub mask_width: u32,
    pub mask_height: u32,
    pub mask_logits: Vec<f32>,
}

/// Fusion parameters. `min_sa` is the published stuff-area floor: 512 for
/// COCO, 2048 for the other benchmark datasets.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FusionConfig {
    #[serde(default = "default_threshold")]
    pub confidence_threshold: f64,
    #[serde(default = "default_threshold")]
    pub overlap_threshold: f64,
    #[serde(default)]
    pub min_sa: u64,
}

pub const MIN_SA_COCO: u64 = 512;
pub const MIN_SA_OTHER: u64 = 2048;

fn default_threshold() -> f64 {
    0.5
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            confidence_threshold: 0.5,
            overlap_threshold: 0.5,
            min_sa: 0,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), FusionError> {
        for (name, v) in [
            ("confidence_threshold", self.confidence_threshold),
            ("overlap_threshold", self.overlap_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                return Err(FusionError::InvalidConfig(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn fuse_pair(a: f64, b: f64) -> f64 {
    (sigmoid(a) + sigmoid(b)) * (a + b)
}

/// Elementwise fused plane `(sigmoid(a) + sigmoid(b)) * (a + b)`.
///
/// Symmetric in its arguments, exactly zero where `a + b == 0`, and keeps
/// the sign of `a + b` everywhere else.
///
/// ```
/// let fused = panoptic_forge::fuse_logits(&[2.0], &[1.0]).unwrap();
/// assert!((fused[0] - 4.835567).abs() < 1e-6);
/// ```
pub fn fuse_logits(a: &[f64], b: &[f64]) -> Result<Vec<f64>, FusionError> {
    if a.len() != b.len() {
        return Err(FusionError::ShapeMismatch(a.len(), b.len()));
    }
    Ok(a.iter().zip(b).map(|(&x, &y)| fuse_pair(x, y)).collect())
}

/// An instance that survived filtering: a binarized, conflict-resolved mask
/// plus its logits, stored bbox-locally.
#[derive(Debug, Clone)]
pub struct FilteredInstance {
    pub class_id: u32,
    pub confidence: f64,
    /// Index into the input instance list.
    pub source_index: usize,
    rect: (u32, u32, u32, u32),
    logits: Vec<f64>,
    retained: Vec<bool>,
    /// Binarized mask area before conflict resolution.
    pub original_area: u64,
    /// Mask area after losing conflict pixels to higher-confidence instances.
    pub retained_area: u64,
}

impl FilteredInstance {
    pub fn rect(&self) -> (u32, u32, u32, u32) {
        self.rect
    }

    #[inline]
    fn local_index(&self, x: u32, y: u32) -> Option<usize> {
        let (x0, y0, x1, y1) = self.rect;
        if x < x0 || x >= x1 || y < y0 || y >= y1 {
            return None;
        }
        Some(((y - y0) * (x1 - x0) + (x - x0)) as usize)
    }

    /// True where the retained mask covers the canvas pixel.
    pub fn mask_at(&self, x: u32, y: u32) -> bool {
        self.local_index(x, y).is_some_and(|i| self.retained[i])
    }

    /// Instance logit placed on the canvas: the resized mask logit inside
    /// the retained mask, the negative sentinel everywhere else.
    pub fn logit_at(&self, x: u32, y: u32) -> f64 {
        match self.local_index(x, y) {
            Some(i) if self.retained[i] => self.logits[i],
            _ => MASK_LOGIT_SENTINEL,
        }
    }

    /// Full-canvas retained mask.
    pub fn canvas_mask(&self, width: u32, height: u32) -> Vec<bool> {
        let mut out = vec![false; width as usize * height as usize];
        let (x0, y0, x1, y1) = self.rect;
        for y in y0..y1 {
            for x in x0..x1 {
                let i = ((y - y0) * (x1 - x0) + (x - x0)) as usize;
                if self.retained[i] {
                    out[(y * width + x) as usize] = true;
                }
            }
        }
        out
    }

    /// Full-canvas instance logit plane (the fused plane's instance input).
    pub fn canvas_logits(&self, width: u32, height: u32) -> Vec<f64> {
        let mut out = vec![MASK_LOGIT_SENTINEL; width as usize * height as usize];
        let (x0, y0, x1, y1) = self.rect;
        for y in y0..y1 {
            for x in x0..x1 {
                let i = ((y - y0) * (x1 - x0) + (x - x0)) as usize;
                if self.retained[i] {
                    out[(y * width + x) as usize] = self.logits[i];
                }
            }
        }
        out
    }
}

/// Threshold, sort and deoverlap instance predictions.
///
/// Instances below the confidence threshold are dropped; the rest are
/// processed in descending confidence (ties keep input order). Masks are
/// binarized at logit 0; a pixel claimed by a higher-confidence instance is
/// removed from later masks, and an instance retaining less than
/// `overlap_threshold` of its binarized area is dropped entirely and claims
/// nothing.
pub fn filter_instances(
    instances: &[InstancePrediction],
    config: &FusionConfig,
    canvas_width: u32,
    canvas_height: u32,
) -> Result<Vec<FilteredInstance>, FusionError> {
    config.validate()?;

    struct Candidate {
        source_index: usize,
        rect: (u32, u32, u32, u32),
        logits: Vec<f64>,
    }

    let mut candidates: Vec<Candidate> = Vec::new();
    let mut order: Vec<usize> = Vec::new();
    for (index, inst) in instances.iter().enumerate() {
        if inst.confidence.is_nan() || !(0.0..=1.0).contains(&inst.confidence) {
            return Err(FusionError::InvalidConfidence {
                index,
                confidence: inst.confidence,
            });
        }
        let (x0, y0, x1, y1) = inst.bbox;
        if x0 >= x1 || y0 >= y1 || x1 > canvas_width || y1 > canvas_height {
            return Err(FusionError::InvalidBbox {
                index,
                x0,
                y0,
                x1,
                y1,
                width: canvas_width,
                height: canvas_height,
            });
        }
        if inst.mask_logits.len() != inst.mask_width as usize * inst.mask_height as usize {
            return Err(FusionError::MaskSize {
                index,
                mask_w: inst.mask_width,
                mask_h: inst.mask_height,
            });
        }
        if inst.confidence < config.confidence_threshold {
            continue;
        }

        let grid: Vec<f64> = inst.mask_logits.iter().map(|&v| v as f64).collect();
        let (rect, logits) = if inst.mask_width == canvas_width && inst.mask_height == canvas_height
        {
            // Full-canvas mask grid.
            ((0, 0, canvas_width, canvas_height), grid)
        } else {
            let (bw, bh) = (x1 - x0, y1 - y0);
            let resized = resize_bilinear(&grid, inst.mask_width, inst.mask_height, bw, bh);
            ((x0, y0, x1, y1), resized)
        };
        candidates.push(Candidate {
            source_index: index,
            rect,
            logits,
        });
        order.push(candidates.len() - 1);
    }

    // Descending confidence, input order on ties.
    order.sort_by(|&a, &b| {
        let ca = instances[candidates[a].source_index].confidence;
        let cb = instances[candidates[b].source_index].confidence;
        cb.partial_cmp(&ca)
            .unwrap()
            .then(candidates[a].source_index.cmp(&candidates[b].source_index))
    });

    let mut claimed = vec![false; canvas_width as usize * canvas_height as usize];
    let mut survivors = Vec::new();
    for &ci in &order {
        let cand = &candidates[ci];
        let (x0, y0, x1, y1) = cand.rect;
        let rect_w = x1 - x0;
        let mut retained = vec![false; cand.logits.len()];
        let mut original_area = 0u64;
        let mut retained_area = 0u64;
        for y in y0..y1 {
            for x in x0..x1 {
                let li = ((y - y0) * rect_w + (x - x0)) as usize;
                if cand.logits[li] > 0.0 {
                    original_area += 1;
                    if !claimed[(y * canvas_width + x) as usize] {
                        retained[li] = true;
                        retained_area += 1;
                    }
                }
            }
        }
        if (retained_area as f64) < config.overlap_threshold * original_area as f64 {
            continue;
        }
        for y in y0..y1 {
            for x in x0..x1 {
                let li = ((y - y0) * rect_w + (x - x0)) as usize;
                if retained[li] {
                    claimed[(y * canvas_width + x) as usize] = true;
                }
            }
        }
        let inst = &instances[cand.source_index];
        survivors.push(FilteredInstance {
            class_id: inst.class_id,
            confidence: inst.confidence,
            source_index: cand.source_index,
            rect: cand.rect,
            logits: candidates[ci].logits.clone(),
            retained,
            original_area,
            retained_area,
        });
    }
    Ok(survivors)
}

/// Fuse semantic logits with instance predictions into a panoptic map.
///
/// Per surviving instance, the instance logit plane (sentinel outside the
/// retained mask) is fused with the semantic channel of its class; the
/// per-pixel winner is the argmax over all stuff channels followed by the
/// fused instance planes, ties going to the earliest candidate. Stuff
/// classes whose total won area is below `min_sa` are relabelled void.
/// Segment ids are assigned deterministically: stuff winners first in
/// channel order, then instance winners in surviving order.
pub fn panoptic_fuse(
    sem: &SemanticLogits,
    instances: &[InstancePrediction],
    config: &FusionConfig,
    space: &JointLabelSpace,
) -> Result<PanopticMap, FusionError> {
    config.validate()?;
    let (width, height) = (sem.width(), sem.height());
    let plane_len = width as usize * height as usize;

    for &channel in sem.stuff_channels() {
        let class_id = sem.channel_classes()[channel];
        if space.category_of(class_id)? != Some(Category::Stuff) {
            return Err(FusionError::StuffChannelMismatch { channel, class_id });
        }
    }

    let filtered = filter_instances(instances, config, width, height)?;
    let mut instance_channels = Vec::with_capacity(filtered.len());
    for inst in &filtered {
        if space.category_of(inst.class_id)? != Some(Category::Thing) {
            return Err(FusionError::NotAThingClass {
                class_id: inst.class_id,
            });
        }
        let channel =
            sem.class_channel(inst.class_id)
                .ok_or(FusionError::MissingSemanticChannel {
                    class_id: inst.class_id,
                })?;
        instance_channels.push(channel);
    }

    // Running argmax; candidates are scanned in a fixed order so ties
    // resolve toward the earliest (stuff before instances).
    const UNSET: u32 = u32::MAX;
    let mut best_value = vec![f64::NEG_INFINITY; plane_len];
    let mut best_candidate = vec![UNSET; plane_len];

    for (slot, &channel) in sem.stuff_channels().iter().enumerate() {
        let plane = sem.plane(channel);
        for (i, &v) in plane.iter().enumerate() {
            let v = v as f64;
            if best_candidate[i] == UNSET || v > best_value[i] {
                best_value[i] = v;
                best_candidate[i] = slot as u32;
            }
        }
    }

    let stuff_count = sem.stuff_channels().len();
    for (inst_slot, (inst, &channel)) in filtered.iter().zip(&instance_channels).enumerate() {
        let semantic: Vec<f64> = sem.plane(channel).iter().map(|&v| v as f64).collect();
        let instance_plane = inst.canvas_logits(width, height);
        let fused = fuse_logits(&instance_plane, &semantic)?;
        let candidate = (stuff_count + inst_slot) as u32;
        for (i, &v) in fused.iter().enumerate() {
            if best_candidate[i] == UNSET || v > best_value[i] {
                best_value[i] = v;
                best_candidate[i] = candidate;
            }
        }
    }

    // Aggregate stuff area per class and apply the min_sa floor.
    let mut stuff_area = vec![0u64; stuff_count];
    for &c in &best_candidate {
        if c != UNSET && (c as usize) < stuff_count {
            stuff_area[c as usize] += 1;
        }
    }
    let stuff_kept: Vec<bool> = stuff_area
        .iter()
        .map(|&area| area > 0 && area >= config.min_sa)
        .collect();

    let mut candidate_segment = vec![0u32; stuff_count + filtered.len()];
    let mut metas: Vec<SegmentMeta> = Vec::new();
    let mut next_id = 1u32;
    for (slot, &kept) in stuff_kept.iter().enumerate() {
        if kept {
            candidate_segment[slot] = next_id;
            metas.push(SegmentMeta {
                id: next_id,
                class_id: sem.channel_classes()[sem.stuff_channels()[slot]],
                ignore: false,
            });
            next_id += 1;
        }
    }
    let mut instance_won = vec![false; filtered.len()];
    for &c in &best_candidate {
        if c != UNSET && (c as usize) >= stuff_count {
            instance_won[c as usize - stuff_count] = true;
        }
    }
    for (inst_slot, inst) in filtered.iter().enumerate() {
        if instance_won[inst_slot] {
            candidate_segment[stuff_count + inst_slot] = next_id;
            metas.push(SegmentMeta {
                id: next_id,
                class_id: inst.class_id,
                ignore: false,
            });
            next_id += 1;
        }
    }

    let pixels: Vec<u32> = best_candidate
        .iter()
        .map(|&c| {
            if c == UNSET {
                0
            } else {
                candidate_segment[c as usize]
            }
        })
        .collect();

    Ok(PanopticMap::new(width, height, pixels, &metas)?)
}
