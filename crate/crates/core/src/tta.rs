//! Test-time augmentation merging and final prediction upsampling.
//!
//! Scaled/flipped semantic predictions are converted to per-channel
//! probabilities, mapped back to the canonical geometry and averaged; the
//! merged result stores log-probabilities so a downstream argmax behaves
//! like plain logits. Final panoptic predictions made at a capped
//! resolution are upsampled to the original image size with
//! nearest-neighbor id resampling.

use serde::{Deserialize, Serialize};

use crate::interp::{flip_horizontal, resize_bilinear, resize_nearest_u32};
use crate::raster::{PanopticMap, SegmentMeta};
use crate::tensor::SemanticLogits;

#[derive(Debug, thiserror::Error)]
pub enum TtaError {
    #[error("no variants to merge")]
    NoVariants,
    #[error("variant {index}: channel metadata differs from the first variant")]
    ChannelMismatch { index: usize },
    #[error(
        "variant {index}: {width}x{height} is inconsistent with scale {scale} of {target_w}x{target_h}"
    )]
    ScaleSizeMismatch {
        index: usize,
        width: u32,
        height: u32,
        scale: f64,
        target_w: u32,
        target_h: u32,
    },
    #[error("variant {index}: scale {scale} is not positive")]
    BadScale { index: usize, scale: f64 },
    #[error("merged probabilities sum to {sum} at pixel {pixel}, expected 1")]
    ProbabilityNotConserved { pixel: usize, sum: f64 },
    #[error("target {target_w}x{target_h} is smaller than the {src_w}x{src_h} source")]
    TargetSmaller {
        target_w: u32,
        target_h: u32,
        src_w: u32,
        src_h: u32,
    },
    #[error("target {target_w}x{target_h} does not preserve the {src_w}x{src_h} aspect ratio")]
    AspectMismatch {
        target_w: u32,
        target_h: u32,
        src_w: u32,
        src_h: u32,
    },
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
    #[error(transparent)]
    Raster(#[from] crate::raster::RasterError),
}

/// Scale set and flip switch for test-time augmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtaConfig {
    pub scales: Vec<f64>,
    pub flip: bool,
}

impl TtaConfig {
    /// Scales used for COCO.
    pub fn coco_preset() -> Self {
        TtaConfig {
            scales: vec![0.75, 1.0, 1.25, 1.5, 1.75, 2.0],
            flip: true,
        }
    }

    /// Scales used for Cityscapes.
    pub fn cityscapes_preset() -> Self {
        TtaConfig {
            scales: vec![0.75, 1.0, 1.25, 1.5],
            flip: true,
        }
    }

    pub fn validate(&self) -> Result<(), TtaError> {
        if self.scales.is_empty() {
            return Err(TtaError::NoVariants);
        }
        for (index, &scale) in self.scales.iter().enumerate() {
            if scale <= 0.0 || scale.is_nan() {
                return Err(TtaError::BadScale { index, scale });
            }
        }
        Ok(())
    }
}

/// One augmented prediction: logits produced at `scale` of the canonical
/// size, optionally on the horizontally flipped input.
#[derive(Debug, Clone)]
pub struct PredictionVariant {
    pub logits: SemanticLogits,
    pub scale: f64,
    pub flipped: bool,
}

fn softmax_planes(logits: &SemanticLogits) -> Vec<Vec<f64>> {
    let channels = logits.channels();
    let plane_len = logits.width() as usize * logits.height() as usize;
    let mut probs = vec![vec![0.0f64; plane_len]; channels];
    for i in 0..plane_len {
        let mut max = f64::NEG_INFINITY;
        for c in 0..channels {
            max = max.max(logits.plane(c)[i] as f64);
        }
        let mut denom = 0.0;
        for (c, plane) in probs.iter_mut().enumerate() {
            let e = ((logits.plane(c)[i] as f64) - max).exp();
            plane[i] = e;
            denom += e;
        }
        for plane in probs.iter_mut() {
            plane[i] /= denom;
        }
    }
    probs
}

/// Merge scaled/flipped semantic predictions back to `target` size.
///
/// Every variant is softmaxed, unflipped, bilinearly resampled to the
/// target, and the probabilities are averaged in input order; the output
/// holds log-probabilities. Per-pixel probability mass is checked to stay
/// within 1e-5 of 1.
pub fn merge_predictions(
    variants: &[PredictionVariant],
    target_w: u32,
    target_h: u32,
) -> Result<SemanticLogits, TtaError> {
    let first = variants.first().ok_or(TtaError::NoVariants)?;
    let channels = first.logits.channels();
    let plane_len = target_w as usize * target_h as usize;

    for (index, variant) in variants.iter().enumerate() {
        if variant.logits.channel_classes() != first.logits.channel_classes()
            || variant.logits.stuff_channels() != first.logits.stuff_channels()
        {
            return Err(TtaError::ChannelMismatch { index });
        }
        if variant.scale <= 0.0 || variant.scale.is_nan() {
            return Err(TtaError::BadScale {
                index,
                scale: variant.scale,
            });
        }
        let expect_w = target_w as f64 * variant.scale;
        let expect_h = target_h as f64 * variant.scale;
        if (variant.logits.width() as f64 - expect_w).abs() > 1.0 + 1e-9
            || (variant.logits.height() as f64 - expect_h).abs() > 1.0 + 1e-9
        {
            return Err(TtaError::ScaleSizeMismatch {
                index,
                width: variant.logits.width(),
                height: variant.logits.height(),
                scale: variant.scale,
                target_w,
                target_h,
            });
        }
    }

    let mut sums = vec![vec![0.0f64; plane_len]; channels];
    for variant in variants {
        let (vw, vh) = (variant.logits.width(), variant.logits.height());
        let probs = softmax_planes(&variant.logits);
        for (c, plane) in probs.into_iter().enumerate() {
            let oriented = if variant.flipped {
                flip_horizontal(&plane, vw, vh)
            } else {
                plane
            };
            let resampled = resize_bilinear(&oriented, vw, vh, target_w, target_h);
            for (acc, v) in sums[c].iter_mut().zip(resampled) {
                *acc += v;
            }
        }
    }

    let inv = 1.0 / variants.len() as f64;
    for plane in &mut sums {
        for v in plane.iter_mut() {
            *v *= inv;
        }
    }
    for i in 0..plane_len {
        let total: f64 = sums.iter().map(|plane| plane[i]).sum();
        if (total - 1.0).abs() > 1e-5 {
            return Err(TtaError::ProbabilityNotConserved {
                pixel: i,
                sum: total,
            });
        }
    }

    let mut data = Vec::with_capacity(channels * plane_len);
    for plane in &sums {
        data.extend(plane.iter().map(|&p| p.ln() as f32));
    }
    Ok(SemanticLogits::new(
        target_w,
        target_h,
        first.logits.channel_classes().to_vec(),
        first.logits.stuff_channels().to_vec(),
        data,
    )?)
}

/// Upsample a panoptic prediction to the original image size.
///
/// Nearest-neighbor id resampling; only enlargements that preserve the
/// aspect ratio within one pixel of rounding are accepted, and the segment
/// set carries over unchanged (areas are recomputed).
pub fn upsample_panoptic(
    map: &PanopticMap,
    target_w: u32,
    target_h: u32,
) -> Result<PanopticMap, TtaError> {
    let (src_w, src_h) = (map.width(), map.height());
    if target_w < src_w || target_h < src_h {
        return Err(TtaError::TargetSmaller {
            target_w,
            target_h,
            src_w,
            src_h,
        });
    }
    if target_w == src_w && target_h == src_h {
        return Ok(map.clone());
    }
    let expected_h = src_h as f64 * target_w as f64 / src_w as f64;
    let expected_w = src_w as f64 * target_h as f64 / src_h as f64;
    let aspect_ok = (target_h as f64 - expected_h).abs() <= 1.0 + 1e-9
        || (target_w as f64 - expected_w).abs() <= 1.0 + 1e-9;
    if !aspect_ok {
        return Err(TtaError::AspectMismatch {
            target_w,
            target_h,
            src_w,
            src_h,
        });
    }

    let pixels = resize_nearest_u32(map.pixels(), src_w, src_h, target_w, target_h);
    let metas: Vec<SegmentMeta> = map.segments().iter().map(SegmentMeta::from).collect();
    Ok(PanopticMap::new(target_w, target_h, pixels, &metas)?)
}
