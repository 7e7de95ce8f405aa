//! Training-time augmentation and input normalization.
//!
//! Augmentation is per-image independent: horizontal flip with p = 0.5, then
//! zero-pad by 4 and randomly crop back to the original size. Evaluation
//! paths never call this.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::synthetic::ImageStore;
use crate::seeds;

const PAD: usize = 4;

/// Per-channel mean/std computed from a training split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl ChannelStats {
    /// Identity stats (mean 0, std 1).
    pub fn identity(channels: usize) -> Self {
        ChannelStats {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
        }
    }
}

/// Mean and standard deviation per channel over the referenced rows.
pub fn channel_stats(store: &ImageStore, rows: &[usize]) -> ChannelStats {
    let plane = store.height * store.width;
    let mut sum = vec![0.0f64; store.channels];
    let mut sum_sq = vec![0.0f64; store.channels];
    for &row in rows {
        let image = store.row(row);
        for (c, channel) in image.chunks_exact(plane).enumerate() {
            for &v in channel {
                sum[c] += v as f64;
                sum_sq[c] += (v as f64) * (v as f64);
            }
        }
    }
    let n = (rows.len() * plane) as f64;
    let mean: Vec<f32> = sum.iter().map(|s| (s / n) as f32).collect();
    let std: Vec<f32> = sum_sq
        .iter()
        .zip(mean.iter())
        .map(|(sq, &m)| {
            let var = (sq / n) - (m as f64) * (m as f64);
            (var.max(0.0).sqrt().max(1e-6)) as f32
        })
        .collect();
    ChannelStats { mean, std }
}

/// Normalize a [n, c, h, w] batch buffer in place.
pub fn normalize(batch: &mut [f32], channels: usize, plane: usize, stats: &ChannelStats) {
    for image in batch.chunks_exact_mut(channels * plane) {
        for (c, channel) in image.chunks_exact_mut(plane).enumerate() {
            let (m, s) = (stats.mean[c], stats.std[c]);
            for v in channel.iter_mut() {
                *v = (*v - m) / s;
            }
        }
    }
}

/// Transform drawn for one image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentParams {
    pub flip: bool,
    pub dy: usize,
    pub dx: usize,
}

/// Draw the flip/crop decisions for image `index` of a batch-seeded stream.
pub fn draw_params(seed: u64, index: usize) -> AugmentParams {
    let mut rng = seeds::rng(seed, &["augment", &index.to_string()]);
    AugmentParams {
        flip: rng.gen_bool(0.5),
        dy: rng.gen_range(0..=2 * PAD),
        dx: rng.gen_range(0..=2 * PAD),
    }
}

fn apply_params(
    image: &mut [f32],
    scratch: &mut [f32],
    channels: usize,
    height: usize,
    width: usize,
    params: AugmentParams,
) {
    scratch.copy_from_slice(image);
    for c in 0..channels {
        for y in 0..height {
            for x in 0..width {
                let sy = (y + params.dy) as isize - PAD as isize;
                let sx = (x + params.dx) as isize - PAD as isize;
                let value =
                    if sy < 0 || sy >= height as isize || sx < 0 || sx >= width as isize {
                        0.0
                    } else {
                        let sx = if params.flip {
                            width - 1 - sx as usize
                        } else {
                            sx as usize
                        };
                        scratch[(c * height + sy as usize) * width + sx]
                    };
                image[(c * height + y) * width + x] = value;
            }
        }
    }
}

/// Augment a [n, c, h, w] batch in place. Each image draws its own stream, so
/// the result is reproducible under the same seed regardless of batch size.
pub fn augment(batch: &mut [f32], channels: usize, height: usize, width: usize, seed: u64) {
    let image_len = channels * height * width;
    let mut scratch = vec![0.0f32; image_len];
    for (i, image) in batch.chunks_exact_mut(image_len).enumerate() {
        apply_params(
            image,
            &mut scratch,
            channels,
            height,
            width,
            draw_params(seed, i),
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_produces_identical_batches() {
        let (c, h, w) = (2, 6, 6);
        let base: Vec<f32> = (0..3 * c * h * w).map(|i| i as f32 * 0.01).collect();
        let mut a = base.clone();
        let mut b = base.clone();
        augment(&mut a, c, h, w, 99);
        augment(&mut b, c, h, w, 99);
        assert_eq!(a, b);
        let mut d = base;
        augment(&mut d, c, h, w, 100);
        assert_ne!(a, d);
    }

    #[test]
    fn identity_params_leave_the_image_unchanged() {
        let (c, h, w) = (1, 5, 5);
        let base: Vec<f32> = (0..c * h * w).map(|i| i as f32).collect();
        let mut image = base.clone();
        let mut scratch = vec![0.0; image.len()];
        apply_params(
            &mut image,
            &mut scratch,
            c,
            h,
            w,
            AugmentParams {
                flip: false,
                dy: PAD,
                dx: PAD,
            },
        );
        assert_eq!(image, base);
    }

    #[test]
    fn flip_reverses_rows() {
        let (c, h, w) = (1, 1, 4);
        let mut image = vec![1.0f32, 2.0, 3.0, 4.0];
        let mut scratch = vec![0.0; image.len()];
        apply_params(
            &mut image,
            &mut scratch,
            c,
            h,
            w,
            AugmentParams {
                flip: true,
                dy: PAD,
                dx: PAD,
            },
        );
        assert_eq!(image, vec![4.0, 3.0, 2.0, 1.0]);
    }

    #[test]
    fn flip_frequency_over_10k_draws_is_near_half() {
        let flips = (0..10_000)
            .filter(|&i| draw_params(4242, i).flip)
            .count();
        let freq = flips as f64 / 10_000.0;
        assert!((0.48..=0.52).contains(&freq), "flip frequency {freq}");
    }

    #[test]
    fn crop_offsets_cover_the_full_pad_range() {
        let mut seen_dy = [false; 2 * PAD + 1];
        let mut seen_dx = [false; 2 * PAD + 1];
        for i in 0..2000 {
            let p = draw_params(7, i);
            seen_dy[p.dy] = true;
            seen_dx[p.dx] = true;
        }
        assert!(seen_dy.iter().all(|&s| s));
        assert!(seen_dx.iter().all(|&s| s));
    }

    #[test]
    fn normalization_zeroes_mean_scales_std() {
        let data: Vec<f32> = (0..2 * 4 * 4).map(|i| (i % 7) as f32).collect();
        let store = ImageStore::new(2, 4, 4, data).unwrap();
        let stats = channel_stats(&store, &[0]);
        let mut batch = store.row(0).to_vec();
        normalize(&mut batch, 2, 16, &stats);
        for channel in batch.chunks_exact(16) {
            let mean: f32 = channel.iter().sum::<f32>() / 16.0;
            let var: f32 =
                channel.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / 16.0;
            assert!(mean.abs() < 1e-5);
            assert!((var.sqrt() - 1.0).abs() < 1e-4);
        }
    }
}
