//! Shared fixtures for the integration and acceptance suites.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use panoptic_forge::label_space::{build_joint_space, Category, ClassDef, DatasetSchema};
use panoptic_forge::raster::{PanopticMap, SegmentMeta};
use panoptic_forge::JointLabelSpace;

/// A joint space where ids `1..=stuff` are stuff and the rest are things.
pub fn space_of(stuff: u32, things: u32) -> JointLabelSpace {
    let mut classes = Vec::new();
    for i in 0..stuff {
        classes.push(ClassDef {
            local_id: i,
            name: format!("s{i:02}"),
            category: Category::Stuff,
            eval_ignore: false,
        });
    }
    for i in 0..things {
        classes.push(ClassDef {
            local_id: stuff + i,
            name: format!("t{i:02}"),
            category: Category::Thing,
            eval_ignore: false,
        });
    }
    build_joint_space(
        &[DatasetSchema {
            dataset_id: "test".into(),
            classes,
        }],
        &[],
    )
    .unwrap()
}

/// Random panoptic map made of overlapping rectangles (later ones on top).
pub fn random_map(
    rng: &mut ChaCha8Rng,
    width: u32,
    height: u32,
    max_segments: usize,
    num_classes: u32,
    crowd_prob: f64,
) -> PanopticMap {
    let n = rng.random_range(0..=max_segments) as u32;
    let mut pixels = vec![0u32; (width * height) as usize];
    let mut table: Vec<(u32, u32, bool)> = Vec::new();
    for id in 1..=n {
        let x0 = rng.random_range(0..width);
        let y0 = rng.random_range(0..height);
        let rw = rng.random_range(1..=width - x0);
        let rh = rng.random_range(1..=height - y0);
        for y in y0..y0 + rh {
            for x in x0..x0 + rw {
                pixels[(y * width + x) as usize] = id;
            }
        }
        table.push((
            id,
            rng.random_range(1..=num_classes),
            rng.random_bool(crowd_prob),
        ));
    }
    finish_map(width, height, pixels, &table)
}

/// Prediction-style perturbation of a map: occasional class changes plus a
/// few random rectangle edits (void or re-id).
pub fn perturb_map(rng: &mut ChaCha8Rng, base: &PanopticMap, num_classes: u32) -> PanopticMap {
    let width = base.width();
    let height = base.height();
    let mut pixels = base.pixels().to_vec();
    let mut table: Vec<(u32, u32, bool)> = base
        .segments()
        .iter()
        .map(|s| {
            let class_id = if rng.random_bool(0.2) {
                rng.random_range(1..=num_classes)
            } else {
                s.class_id
            };
            // Predictions carry no crowd flags.
            (s.id, class_id, false)
        })
        .collect();
    let edits = rng.random_range(0..4);
    let mut next_id = base.segments().iter().map(|s| s.id).max().unwrap_or(0) + 1;
    for _ in 0..edits {
        let x0 = rng.random_range(0..width);
        let y0 = rng.random_range(0..height);
        let rw = rng.random_range(1..=(width - x0).min(width / 2 + 1));
        let rh = rng.random_range(1..=(height - y0).min(height / 2 + 1));
        let paint = if rng.random_bool(0.4) {
            0
        } else {
            let id = next_id;
            next_id += 1;
            table.push((id, rng.random_range(1..=num_classes), false));
            id
        };
        for y in y0..y0 + rh {
            for x in x0..x0 + rw {
                pixels[(y * width + x) as usize] = paint;
            }
        }
    }
    finish_map(width, height, pixels, &table)
}

fn finish_map(
    width: u32,
    height: u32,
    pixels: Vec<u32>,
    table: &[(u32, u32, bool)],
) -> PanopticMap {
    let present: BTreeSet<u32> = pixels.iter().copied().filter(|&id| id != 0).collect();
    let metas: Vec<SegmentMeta> = table
        .iter()
        .filter(|(id, _, _)| present.contains(id))
        .map(|&(id, class_id, ignore)| SegmentMeta {
            id,
            class_id,
            ignore,
        })
        .collect();
    PanopticMap::new(width, height, pixels, &metas).unwrap()
}
