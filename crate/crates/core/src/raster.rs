//! Panoptic map representation and bit-exact id-encoded PNG + JSON I/O.
//!
//! A panoptic map stores one segment id per pixel (0 = void) together with a
//! segment table carrying class, area and ignore flag. On disk a map is an
//! 8-bit RGB PNG whose channels encode the segment id in R-lowest order
//! (`id = R + 256*G + 256^2*B`), plus a JSON record listing the segments,
//! following the COCO panoptic layout.

use std::collections::BTreeMap;
use std::io::{BufReader, Cursor};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::fs_util::atomic_write;

/// Exclusive upper bound for segment ids (24-bit RGB encoding).
pub const SEGMENT_ID_LIMIT: u32 = 1 << 24;

#[derive(Debug, thiserror::Error)]
pub enum RasterError {
    #[error("segment id {0} exceeds the 24-bit id range")]
    IdOutOfRange(u32),
    #[error("segment table entry uses reserved void id 0")]
    VoidSegmentEntry,
    #[error("duplicate segment id {0} in segment table")]
    DuplicateSegment(u32),
    #[error("pixel buffer holds {actual} values, expected {expected} for {width}x{height}")]
    PixelCount {
        actual: usize,
        expected: usize,
        width: u32,
        height: u32,
    },
    #[error("pixel ids without a segment entry: {0:?}")]
    MissingSegments(Vec<u32>),
    #[error("segment {0} has a table entry but no pixels")]
    EmptySegment(u32),
    #[error("zero-sized canvas {0}x{1}")]
    EmptyCanvas(u32, u32),
    #[error(
        "dimension mismatch: PNG is {png_width}x{png_height}, record says {rec_width}x{rec_height}"
    )]
    DimensionMismatch {
        png_width: u32,
        png_height: u32,
        rec_width: u32,
        rec_height: u32,
    },
    #[error("expected an 8-bit RGB PNG, found {0}")]
    NotRgb8(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("png decode: {0}")]
    PngDecode(#[from] png::DecodingError),
    #[error("png encode: {0}")]
    PngEncode(#[from] png::EncodingError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl RasterError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        RasterError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Pack a segment id into PNG channels, lowest byte in R.
pub fn encode_id_rgb(id: u32) -> Result<(u8, u8, u8), RasterError> {
    if id >= SEGMENT_ID_LIMIT {
        return Err(RasterError::IdOutOfRange(id));
    }
    Ok((
        (id & 0xff) as u8,
        ((id >> 8) & 0xff) as u8,
        ((id >> 16) & 0xff) as u8,
    ))
}

/// Inverse of [`encode_id_rgb`]; total on all byte triples.
pub fn decode_id_rgb(r: u8, g: u8, b: u8) -> u32 {
    r as u32 + 256 * g as u32 + 65536 * b as u32
}

/// One row of the segment table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentInfo {
    pub id: u32,
    pub class_id: u32,
    /// Exact pixel count of this id in the raster.
    pub area: u64,
    /// Crowd/ignore flag: excluded from FN counting during evaluation.
    pub ignore: bool,
}

/// Constructor input for a segment: the area is recomputed from the pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentMeta {
    pub id: u32,
    pub class_id: u32,
    pub ignore: bool,
}

impl From<&SegmentInfo> for SegmentMeta {
    fn from(info: &SegmentInfo) -> Self {
        SegmentMeta {
            id: info.id,
            class_id: info.class_id,
            ignore: info.ignore,
        }
    }
}

/// Per-pixel segment ids plus the segment table.
///
/// Construction validates the structural invariants: every nonzero pixel id
/// has exactly one table entry, no entry is empty, ids stay below 2^24 and
/// areas are exact pixel counts. The value is immutable afterwards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanopticMap {
    width: u32,
    height: u32,
    pixels: Vec<u32>,
    segments: Vec<SegmentInfo>,
}

impl PanopticMap {
    pub fn new(
        width: u32,
        height: u32,
        pixels: Vec<u32>,
        segments: &[SegmentMeta],
    ) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyCanvas(width, height));
        }
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(RasterError::PixelCount {
                actual: pixels.len(),
                expected,
                width,
                height,
            });
        }

        let mut areas: BTreeMap<u32, u64> = BTreeMap::new();
        for &id in &pixels {
            if id >= SEGMENT_ID_LIMIT {
                return Err(RasterError::IdOutOfRange(id));
            }
            if id != 0 {
                *areas.entry(id).or_insert(0) += 1;
            }
        }

        let mut table: BTreeMap<u32, SegmentInfo> = BTreeMap::new();
        for meta in segments {
            if meta.id == 0 {
                return Err(RasterError::VoidSegmentEntry);
            }
            if meta.id >= SEGMENT_ID_LIMIT {
                return Err(RasterError::IdOutOfRange(meta.id));
            }
            let area = *areas
                .get(&meta.id)
                .ok_or(RasterError::EmptySegment(meta.id))?;
            let prev = table.insert(
                meta.id,
                SegmentInfo {
                    id: meta.id,
                    class_id: meta.class_id,
                    area,
                    ignore: meta.ignore,
                },
            );
            if prev.is_some() {
                return Err(RasterError::DuplicateSegment(meta.id));
            }
        }

        let missing: Vec<u32> = areas
            .keys()
            .filter(|id| !table.contains_key(id))
            .copied()
            .collect();
        if !missing.is_empty() {
            return Err(RasterError::MissingSegments(missing));
        }

        Ok(PanopticMap {
            width,
            height,
            pixels,
            segments: table.into_values().collect(),
        })
    }

    /// A map of the given size with every pixel void.
    pub fn all_void(width: u32, height: u32) -> Result<Self, RasterError> {
        let pixels = vec![0u32; width as usize * height as usize];
        PanopticMap::new(width, height, pixels, &[])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Row-major segment ids, one per pixel.
    pub fn pixels(&self) -> &[u32] {
        &self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> u32 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    /// Segment table, sorted by segment id.
    pub fn segments(&self) -> &[SegmentInfo] {
        &self.segments
    }

    pub fn segment(&self, id: u32) -> Option<&SegmentInfo> {
        self.segments
            .binary_search_by_key(&id, |s| s.id)
            .ok()
            .map(|i| &self.segments[i])
    }

    pub fn void_area(&self) -> u64 {
        let labelled: u64 = self.segments.iter().map(|s| s.area).sum();
        self.width as u64 * self.height as u64 - labelled
    }

    /// Same raster with the segment table rewritten through `class_for`.
    pub fn with_classes<F>(&self, mut class_for: F) -> Result<Self, RasterError>
    where
        F: FnMut(&SegmentInfo) -> u32,
    {
        let metas: Vec<SegmentMeta> = self
            .segments
            .iter()
            .map(|s| SegmentMeta {
                id: s.id,
                class_id: class_for(s),
                ignore: s.ignore,
            })
            .collect();
        PanopticMap::new(self.width, self.height, self.pixels.clone(), &metas)
    }
}

/// JSON segment record, COCO panoptic style (`iscrowd` maps to `ignore`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub id: u32,
    pub category_id: u32,
    pub area: u64,
    #[serde(default)]
    pub iscrowd: u8,
}

/// Per-image JSON record accompanying the id-encoded PNG.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PanopticRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
    pub segments_info: Vec<SegmentRecord>,
}

impl PanopticRecord {
    pub fn from_map(map: &PanopticMap, file_name: Option<String>) -> Self {
        PanopticRecord {
            file_name,
            width: Some(map.width()),
            height: Some(map.height()),
            segments_info: map
                .segments()
                .iter()
                .map(|s| SegmentRecord {
                    id: s.id,
                    category_id: s.class_id,
                    area: s.area,
                    iscrowd: s.ignore as u8,
                })
                .collect(),
        }
    }
}

fn decode_png(path: &Path) -> Result<(u32, u32, Vec<u32>), RasterError> {
    let file = std::fs::File::open(path).map_err(|e| RasterError::io(path, e))?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder.read_info()?;
    let buf_size = reader
        .output_buffer_size()
        .ok_or_else(|| RasterError::NotRgb8("oversized image".into()))?;
    let mut buf = vec![0u8; buf_size];
    let info = reader.next_frame(&mut buf)?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(RasterError::NotRgb8(format!(
            "{:?}/{:?}",
            info.color_type, info.bit_depth
        )));
    }
    let bytes = &buf[..info.buffer_size()];
    let pixels = bytes
        .chunks_exact(3)
        .map(|px| decode_id_rgb(px[0], px[1], px[2]))
        .collect();
    Ok((info.width, info.height, pixels))
}

fn encode_png(width: u32, height: u32, pixels: &[u32]) -> Result<Vec<u8>, RasterError> {
    let mut rgb = Vec::with_capacity(pixels.len() * 3);
    for &id in pixels {
        let (r, g, b) = encode_id_rgb(id)?;
        rgb.extend_from_slice(&[r, g, b]);
    }
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(Cursor::new(&mut out), width, height);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header()?;
        writer.write_image_data(&rgb)?;
    }
    Ok(out)
}

/// Read a panoptic map from an id-encoded PNG and its JSON record.
///
/// Pixel ids missing from the record are a structural error; the record's
/// width/height, when present, must match the PNG.
pub fn read_panoptic(png_path: &Path, json_path: &Path) -> Result<PanopticMap, RasterError> {
    let text = std::fs::read_to_string(json_path).map_err(|e| RasterError::io(json_path, e))?;
    let record: PanopticRecord = serde_json::from_str(&text)?;
    read_panoptic_with_record(png_path, &record)
}

/// Variant of [`read_panoptic`] taking an already-parsed record.
pub fn read_panoptic_with_record(
    png_path: &Path,
    record: &PanopticRecord,
) -> Result<PanopticMap, RasterError> {
    let (width, height, pixels) = decode_png(png_path)?;
    if let (Some(rw), Some(rh)) = (record.width, record.height) {
        if rw != width || rh != height {
            return Err(RasterError::DimensionMismatch {
                png_width: width,
                png_height: height,
                rec_width: rw,
                rec_height: rh,
            });
        }
    }
    let metas: Vec<SegmentMeta> = record
        .segments_info
        .iter()
        .map(|s| SegmentMeta {
            id: s.id,
            class_id: s.category_id,
            ignore: s.iscrowd != 0,
        })
        .collect();
    PanopticMap::new(width, height, pixels, &metas)
}

/// Write a map as PNG + JSON record. Areas in the record are recomputed from
/// the raster (they are exact by construction). Both files are written
/// atomically.
pub fn write_panoptic(
    map: &PanopticMap,
    png_path: &Path,
    json_path: &Path,
) -> Result<(), RasterError> {
    let png_bytes = encode_png(map.width(), map.height(), map.pixels())?;
    atomic_write(png_path, &png_bytes).map_err(|e| RasterError::io(png_path, e))?;

    let file_name = png_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned());
    let record = PanopticRecord::from_map(map, file_name);
    let mut text = serde_json::to_string_pretty(&record)?;
    text.push('\n');
    atomic_write(json_path, text.as_bytes()).map_err(|e| RasterError::io(json_path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn id_rgb_zero() {
        assert_eq!(encode_id_rgb(0).unwrap(), (0, 0, 0));
        assert_eq!(decode_id_rgb(0, 0, 0), 0);
    }

    #[test]
    fn id_rgb_documented_values() {
        // 300 = 44 + 256*1, 65536 = 256^2
        assert_eq!(encode_id_rgb(300).unwrap(), (44, 1, 0));
        assert_eq!(encode_id_rgb(65536).unwrap(), (0, 0, 1));
    }

    #[test]
    fn id_rgb_rejects_out_of_range() {
        assert!(matches!(
            encode_id_rgb(SEGMENT_ID_LIMIT),
            Err(RasterError::IdOutOfRange(_))
        ));
        assert!(encode_id_rgb(SEGMENT_ID_LIMIT - 1).is_ok());
    }

    #[test]
    fn map_validates_missing_segment_entries() {
        let pixels = vec![0, 7, 7, 0];
        let err = PanopticMap::new(2, 2, pixels, &[]).unwrap_err();
        match err {
            RasterError::MissingSegments(ids) => assert_eq!(ids, vec![7]),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn map_rejects_empty_segment_entry() {
        let pixels = vec![0; 4];
        let meta = [SegmentMeta {
            id: 3,
            class_id: 1,
            ignore: false,
        }];
        assert!(matches!(
            PanopticMap::new(2, 2, pixels, &meta),
            Err(RasterError::EmptySegment(3))
        ));
    }

    #[test]
    fn map_recomputes_areas() {
        let pixels = vec![7, 7, 9, 0];
        let metas = [
            SegmentMeta {
                id: 7,
                class_id: 1,
                ignore: false,
            },
            SegmentMeta {
                id: 9,
                class_id: 2,
                ignore: true,
            },
        ];
        let map = PanopticMap::new(2, 2, pixels, &metas).unwrap();
        assert_eq!(map.segment(7).unwrap().area, 2);
        assert_eq!(map.segment(9).unwrap().area, 1);
        assert!(map.segment(9).unwrap().ignore);
        assert_eq!(map.void_area(), 1);
    }

    #[test]
    fn roundtrip_all_void() {
        let dir = tempfile::tempdir().unwrap();
        let png = dir.path().join("m.png");
        let json = dir.path().join("m.json");
        let map = PanopticMap::all_void(4, 4).unwrap();
        write_panoptic(&map, &png, &json).unwrap();
        let back = read_panoptic(&png, &json).unwrap();
        assert_eq!(back, map);
        assert!(back.segments().is_empty());
    }

    #[test]
    fn roundtrip_two_segments() {
        let dir = tempfile::tempdir().unwrap();
        let png = dir.path().join("m.png");
        let json = dir.path().join("m.json");
        // 4x4 with ids 7 (5 px) and 9 (11 px)
        let mut pixels = vec![9u32; 16];
        for p in pixels.iter_mut().take(5) {
            *p = 7;
        }
        let metas = [
            SegmentMeta {
                id: 7,
                class_id: 3,
                ignore: false,
            },
            SegmentMeta {
                id: 9,
                class_id: 4,
                ignore: false,
            },
        ];
        let map = PanopticMap::new(4, 4, pixels, &metas).unwrap();
        write_panoptic(&map, &png, &json).unwrap();
        let back = read_panoptic(&png, &json).unwrap();
        assert_eq!(back, map);
        assert_eq!(back.segment(7).unwrap().area, 5);
        assert_eq!(back.segment(9).unwrap().area, 11);
    }

    #[test]
    fn read_rejects_unlisted_pixel_id() {
        let dir = tempfile::tempdir().unwrap();
        let png = dir.path().join("m.png");
        let json = dir.path().join("m.json");
        let mut pixels = vec![0u32; 16];
        pixels[3] = 7;
        let map = PanopticMap::new(
            4,
            4,
            pixels,
            &[SegmentMeta {
                id: 7,
                class_id: 1,
                ignore: false,
            }],
        )
        .unwrap();
        write_panoptic(&map, &png, &json).unwrap();
        // Rewrite the record without segment 7.
        std::fs::write(&json, r#"{"segments_info": []}"#).unwrap();
        let err = read_panoptic(&png, &json).unwrap_err();
        assert!(matches!(err, RasterError::MissingSegments(ids) if ids == vec![7]));
    }

    #[test]
    fn read_rejects_dimension_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let png = dir.path().join("m.png");
        let json = dir.path().join("m.json");
        let map = PanopticMap::all_void(4, 4).unwrap();
        write_panoptic(&map, &png, &json).unwrap();
        std::fs::write(&json, r#"{"width": 5, "height": 4, "segments_info": []}"#).unwrap();
        assert!(matches!(
            read_panoptic(&png, &json),
            Err(RasterError::DimensionMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn id_rgb_bijection(id in 0u32..SEGMENT_ID_LIMIT) {
            let (r, g, b) = encode_id_rgb(id).unwrap();
            prop_assert_eq!(decode_id_rgb(r, g, b), id);
        }

        #[test]
        fn area_matches_brute_force(
            seed in any::<u64>(),
            w in 1u32..32,
            h in 1u32..32,
            nseg in 0u32..8,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let ids: Vec<u32> = (1..=nseg).collect();
            let pixels: Vec<u32> = (0..w as usize * h as usize)
                .map(|_| {
                    if ids.is_empty() || rng.random_bool(0.3) {
                        0
                    } else {
                        ids[rng.random_range(0..ids.len())]
                    }
                })
                .collect();
            let present: std::collections::BTreeSet<u32> =
                pixels.iter().copied().filter(|&i| i != 0).collect();
            let metas: Vec<SegmentMeta> = present
                .iter()
                .map(|&id| SegmentMeta { id, class_id: id, ignore: false })
                .collect();
            let map = PanopticMap::new(w, h, pixels.clone(), &metas).unwrap();
            for seg in map.segments() {
                let brute = pixels.iter().filter(|&&p| p == seg.id).count() as u64;
                prop_assert_eq!(seg.area, brute);
            }
        }
    }
}
