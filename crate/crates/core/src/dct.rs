//! Orthonormal 8x8 type-II DCT over whole planes.
//!
//! Planes whose sides are not multiples of 8 are padded by replicating the
//! last row and column. Coefficients are stored block by block in raster
//! order, each block in natural (row-major) order.

use std::sync::OnceLock;

pub const N: usize = 8;
pub const BLOCK: usize = N * N;

fn basis() -> &'static [[f64; N]; N] {
    static TABLE: OnceLock<[[f64; N]; N]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [[0.0; N]; N];
        for (k, row) in t.iter_mut().enumerate() {
            let alpha = if k == 0 { (1.0 / N as f64).sqrt() } else { (2.0 / N as f64).sqrt() };
            for (n, v) in row.iter_mut().enumerate() {
                *v = alpha * (((2 * n + 1) * k) as f64 * std::f64::consts::PI / (2 * N) as f64).cos();
            }
        }
        t
    })
}

pub fn forward_block(input: &[f64; BLOCK]) -> [f64; BLOCK] {
    let c = basis();
    let mut tmp = [0.0; BLOCK];
    for y in 0..N {
        for k in 0..N {
            tmp[y * N + k] = (0..N).map(|x| c[k][x] * input[y * N + x]).sum();
        }
    }
    let mut out = [0.0; BLOCK];
    for k in 0..N {
        for u in 0..N {
            out[k * N + u] = (0..N).map(|y| c[k][y] * tmp[y * N + u]).sum();
        }
    }
    out
}

pub fn inverse_block(input: &[f64; BLOCK]) -> [f64; BLOCK] {
    let c = basis();
    let mut tmp = [0.0; BLOCK];
    for k in 0..N {
        for x in 0..N {
            tmp[k * N + x] = (0..N).map(|u| c[u][x] * input[k * N + u]).sum();
        }
    }
    let mut out = [0.0; BLOCK];
    for y in 0..N {
        for x in 0..N {
            out[y * N + x] = (0..N).map(|k| c[k][y] * tmp[k * N + x]).sum();
        }
    }
    out
}

pub fn padded(len: usize) -> usize {
    len.div_ceil(N) * N
}

/// Edge-replicates a `w x h` plane to the next multiple of 8 on each side.
pub fn pad_plane(plane: &[f64], w: usize, h: usize) -> Vec<f64> {
    let (pw, ph) = (padded(w), padded(h));
    let mut out = Vec::with_capacity(pw * ph);
    for y in 0..ph {
        let row = &plane[y.min(h - 1) * w..][..w];
        out.extend_from_slice(row);
        out.extend(std::iter::repeat_n(row[w - 1], pw - w));
    }
    out
}

pub fn crop_plane(plane: &[f64], pw: usize, w: usize, h: usize) -> Vec<f64> {
    (0..h).flat_map(|y| plane[y * pw..y * pw + w].iter().copied()).collect()
}

/// Forward transform of a padded `pw x ph` plane.
pub fn forward_plane(plane: &[f64], pw: usize, ph: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(pw * ph);
    for by in (0..ph).step_by(N) {
        for bx in (0..pw).step_by(N) {
            let mut block = [0.0; BLOCK];
            for y in 0..N {
                block[y * N..(y + 1) * N].copy_from_slice(&plane[(by + y) * pw + bx..][..N]);
            }
            out.extend_from_slice(&forward_block(&block));
        }
    }
    out
}

/// Inverse of [`forward_plane`], returning the padded `pw x ph` plane.
pub fn inverse_plane(coeffs: &[f64], pw: usize, ph: usize) -> Vec<f64> {
    let mut out = vec![0.0; pw * ph];
    let blocks_x = pw / N;
    for (i, chunk) in coeffs.chunks_exact(BLOCK).enumerate() {
        let (bx, by) = ((i % blocks_x) * N, (i / blocks_x) * N);
        let block = inverse_block(chunk.try_into().unwrap());
        for y in 0..N {
            out[(by + y) * pw + bx..][..N].copy_from_slice(&block[y * N..(y + 1) * N]);
        }
    }
    out
}
