//! Shared resampling primitives for label rasters and score planes.

/// Nearest-neighbor source index for a destination index: the standard
/// `floor(dst * src / dst_total)` mapping, so exact integer upscales
/// replicate pixels into blocks.
pub(crate) fn nn_index(dst: u32, src_dim: u32, dst_dim: u32) -> u32 {
    debug_assert!(src_dim > 0 && dst_dim > 0);
    let idx = (dst as u64 * src_dim as u64) / dst_dim as u64;
    (idx as u32).min(src_dim - 1)
}

/// Nearest-neighbor resample of a row-major id raster.
pub(crate) fn resize_nearest_u32(
    src: &[u32],
    src_w: u32,
    src_h: u32,
    dst_w: u32,
    dst_h: u32,
) -> Vec<u32> {
    let mut out = Vec::with_capacity(dst_w as usize * dst_h as usize);
    for y in 0..dst_h {
        let sy = nn_index(y, src_h, dst_h) as usize;
        let row = &src[sy * src_w as usize..(sy + 1) * src_w as usize];
        for x in 0..dst_w {
            out.push(row[nn_index(x, src_w, dst_w) as usize]);
        }
    }
    out
}

/// Bilinear resample of a row-major plane, half-pixel-center convention
/// (`src = (dst + 0.5) * src/dst - 0.5`, clamped). Identity when sizes match.
pub(crate) fn resize_bilinear(
    src: &[f64],
    src_w: u32,
    src_h: u32,
    dst_w: u32,
    dst_h: u32,
) -> Vec<f64> {
    debug_assert_eq!(src.len(), src_w as usize * src_h as usize);
    if src_w == dst_w && src_h == dst_h {
        return src.to_vec();
    }
    let sw = src_w as usize;
    let scale_x = src_w as f64 / dst_w as f64;
    let scale_y = src_h as f64 / dst_h as f64;
    let mut out = Vec::with_capacity(dst_w as usize * dst_h as usize);
    for y in 0..dst_h {
        let fy = ((y as f64 + 0.5) * scale_y - 0.5).clamp(0.0, (src_h - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(src_h as usize - 1);
        let wy = fy - y0 as f64;
        for x in 0..dst_w {
            let fx = ((x as f64 + 0.5) * scale_x - 0.5).clamp(0.0, (src_w - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(src_w as usize - 1);
            let wx = fx - x0 as f64;
            let top = src[y0 * sw + x0] * (1.0 - wx) + src[y0 * sw + x1] * wx;
            let bottom = src[y1 * sw + x0] * (1.0 - wx) + src[y1 * sw + x1] * wx;
            out.push(top * (1.0 - wy) + bottom * wy);
        }
    }
    out
}

/// Mirror a row-major plane around the vertical axis.
pub(crate) fn flip_horizontal<T: Copy>(src: &[T], width: u32, height: u32) -> Vec<T> {
    let w = width as usize;
    let mut out = Vec::with_capacity(src.len());
    for y in 0..height as usize {
        let row = &src[y * w..(y + 1) * w];
        out.extend(row.iter().rev());
    }
    out
}
