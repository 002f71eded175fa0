//! Random affine image augmentation and class-based oversampling.
//!
//! One augmentation draw composes rotation, shear, zoom, translation, and an
//! optional horizontal flip into a single affine map. Output pixels are
//! inverse-mapped into the source and sampled bilinearly; coordinates that
//! fall outside the source clamp to the border (nearest fill), so the output
//! always keeps the input dimensions and value range.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Sampling ranges for one augmentation draw.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentParams {
    /// Rotation sampled from [-rotation_deg, +rotation_deg] degrees.
    pub rotation_deg: f64,
    /// Translation sampled from [-shift_frac, +shift_frac] of each dimension.
    pub shift_frac: f64,
    /// Shear coefficient sampled from [-shear, +shear].
    pub shear: f64,
    /// Zoom sampled from [1 - zoom, 1 + zoom].
    pub zoom: f64,
    /// Horizontal flip with probability 0.5 when enabled.
    pub hflip: bool,
}

impl Default for AugmentParams {
    fn default() -> Self {
        AugmentParams {
            rotation_deg: 20.0,
            shift_frac: 0.2,
            shear: 0.2,
            zoom: 0.2,
            hflip: true,
        }
    }
}

/// A concrete transform drawn from [`AugmentParams`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineDraw {
    pub theta: f64,
    pub shear: f64,
    pub zoom: f64,
    pub shift_x: f64,
    pub shift_y: f64,
    pub flip: bool,
}

impl AffineDraw {
    pub const IDENTITY: AffineDraw = AffineDraw {
        theta: 0.0,
        shear: 0.0,
        zoom: 1.0,
        shift_x: 0.0,
        shift_y: 0.0,
        flip: false,
    };

    /// Horizontal flip only.
    pub const FLIP: AffineDraw = AffineDraw { flip: true, ..AffineDraw::IDENTITY };

    pub fn sample(params: &AugmentParams, width: usize, height: usize, rng: &mut ChaCha8Rng) -> Self {
        let sym = |rng: &mut ChaCha8Rng, r: f64| if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 };
        AffineDraw {
            theta: sym(rng, params.rotation_deg).to_radians(),
            shear: sym(rng, params.shear),
            zoom: if params.zoom > 0.0 {
                rng.random_range(1.0 - params.zoom..=1.0 + params.zoom)
            } else {
                1.0
            },
            shift_x: sym(rng, params.shift_frac) * width as f64,
            shift_y: sym(rng, params.shift_frac) * height as f64,
            flip: params.hflip && rng.random_bool(0.5),
        }
    }
}

/// Apply one concrete transform to a flattened (height, width, channels)
/// image. The rotation/shear/zoom act about the image center.
pub fn apply_affine(
    image: &[f64],
    height: usize,
    width: usize,
    channels: usize,
    draw: &AffineDraw,
) -> Vec<f64> {
    assert_eq!(image.len(), height * width * channels, "image shape mismatch");
    // Forward map on centered coordinates: A = R(theta) * Shear * Zoom.
    let (sin_t, cos_t) = draw.theta.sin_cos();
    let (k, z) = (draw.shear, draw.zoom);
    let a00 = z * cos_t;
    let a01 = z * (cos_t * k - sin_t);
    let a10 = z * sin_t;
    let a11 = z * (sin_t * k + cos_t);
    let det = a00 * a11 - a01 * a10;
    // Inverse for output-to-input resampling.
    let i00 = a11 / det;
    let i01 = -a01 / det;
    let i10 = -a10 / det;
    let i11 = a00 / det;

    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let mut out = vec![0.0; image.len()];
    for row in 0..height {
        for col in 0..width {
            let out_col = if draw.flip { width - 1 - col } else { col };
            let xo = out_col as f64 - cx - draw.shift_x;
            let yo = row as f64 - cy - draw.shift_y;
            let xi = i00 * xo + i01 * yo + cx;
            let yi = i10 * xo + i11 * yo + cy;
            for ch in 0..channels {
                out[(row * width + col) * channels + ch] =
                    bilinear_clamped(image, height, width, channels, xi, yi, ch);
            }
        }
    }
    out
}

/// Bilinear sample at (x, y); coordinates clamp to the border, which gives
/// the nearest-pixel fill for out-of-bounds reads.
fn bilinear_clamped(
    image: &[f64],
    height: usize,
    width: usize,
    channels: usize,
    x: f64,
    y: f64,
    ch: usize,
) -> f64 {
    let x = x.clamp(0.0, width as f64 - 1.0);
    let y = y.clamp(0.0, height as f64 - 1.0);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let at = |r: usize, c: usize| image[(r * width + c) * channels + ch];
    (1.0 - fy) * ((1.0 - fx) * at(y0, x0) + fx * at(y0, x1))
        + fy * ((1.0 - fx) * at(y1, x0) + fx * at(y1, x1))
}

/// Draw one random transform and apply it.
pub fn augment(
    image: &[f64],
    height: usize,
    width: usize,
    channels: usize,
    params: &AugmentParams,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let draw = AffineDraw::sample(params, width, height, rng);
    apply_affine(image, height, width, channels, &draw)
}

/// Grow one class to `target_count` by appending augmented copies of
/// randomly chosen existing members. Other classes are untouched.
pub fn augment_minority(
    dataset: &mut Dataset,
    class_id: usize,
    target_count: usize,
    params: &AugmentParams,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    if class_id >= dataset.n_classes() {
        return Err(Error::Usage(format!("class {class_id} does not exist")));
    }
    let members: Vec<usize> = dataset
        .samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.label == class_id)
        .map(|(i, _)| i)
        .collect();
    if members.is_empty() {
        return Err(Error::Usage(format!("class {class_id} has no samples to augment")));
    }
    if target_count < members.len() {
        return Err(Error::Usage(format!(
            "target count {target_count} is below the current count {}",
            members.len()
        )));
    }
    let (h, w, c) = (
        dataset.manifest.height,
        dataset.manifest.width,
        dataset.manifest.channels,
    );
    let n_classes = dataset.n_classes();
    for _ in 0..target_count - members.len() {
        let source = members[rng.random_range(0..members.len())];
        let features = augment(&dataset.samples[source].features, h, w, c, params, rng);
        dataset
            .samples
            .push(crate::data::Sample::new(features, class_id, n_classes));
    }
    dataset.refresh_counts();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthetic_task, SyntheticSpec};
    use crate::rng::derive_rng;

    fn ramp_image(h: usize, w: usize, c: usize) -> Vec<f64> {
        (0..h * w * c).map(|i| (i % 97) as f64 / 96.0).collect()
    }

    #[test]
    fn identity_draw_is_identity() {
        let img = ramp_image(5, 7, 3);
        let out = apply_affine(&img, 5, 7, 3, &AffineDraw::IDENTITY);
        assert_eq!(out, img);
    }

    #[test]
    fn zero_ranges_sample_identity() {
        let params = AugmentParams {
            rotation_deg: 0.0,
            shift_frac: 0.0,
            shear: 0.0,
            zoom: 0.0,
            hflip: false,
        };
        let img = ramp_image(4, 4, 3);
        let out = augment(&img, 4, 4, 3, &params, &mut derive_rng(1, &[]));
        assert_eq!(out, img);
    }

    #[test]
    fn flip_is_an_involution() {
        let img = ramp_image(6, 5, 3);
        let once = apply_affine(&img, 6, 5, 3, &AffineDraw::FLIP);
        let twice = apply_affine(&once, 6, 5, 3, &AffineDraw::FLIP);
        assert_ne!(once, img);
        assert_eq!(twice, img);
    }

    #[test]
    fn output_shape_and_range_preserved() {
        let img = ramp_image(8, 8, 3);
        let out = augment(&img, 8, 8, 3, &AugmentParams::default(), &mut derive_rng(2, &[7]));
        assert_eq!(out.len(), img.len());
        assert!(out.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn augmentation_is_seed_deterministic() {
        let img = ramp_image(8, 8, 3);
        let a = augment(&img, 8, 8, 3, &AugmentParams::default(), &mut derive_rng(11, &[4]));
        let b = augment(&img, 8, 8, 3, &AugmentParams::default(), &mut derive_rng(11, &[4]));
        assert_eq!(a, b);
    }

    #[test]
    fn minority_growth_is_isolated() {
        let spec = SyntheticSpec { train_per_class: 10, val_per_class: 0, ..SyntheticSpec::default() };
        let (mut d, _) = synthetic_task(&spec, 3);
        let before = d.manifest.class_counts.clone();
        augment_minority(&mut d, 1, 30, &AugmentParams::default(), &mut derive_rng(5, &[])).unwrap();
        assert_eq!(d.manifest.class_counts[1], 30);
        assert_eq!(d.manifest.class_counts[0], before[0]);
        assert_eq!(d.manifest.class_counts[2], before[2]);
        let feat_len = d.feature_len();
        assert!(d
            .samples
            .iter()
            .all(|s| s.features.len() == feat_len
                && s.features.iter().all(|&v| (0.0..=1.0).contains(&v))));
    }

    #[test]
    fn minority_noop_at_current_count() {
        let spec = SyntheticSpec { train_per_class: 10, val_per_class: 0, ..SyntheticSpec::default() };
        let (mut d, _) = synthetic_task(&spec, 3);
        let before = d.clone();
        augment_minority(&mut d, 0, 10, &AugmentParams::default(), &mut derive_rng(5, &[])).unwrap();
        assert_eq!(d, before);
    }

    #[test]
    fn minority_below_count_is_an_error() {
        let spec = SyntheticSpec { train_per_class: 10, val_per_class: 0, ..SyntheticSpec::default() };
        let (mut d, _) = synthetic_task(&spec, 3);
        assert!(augment_minority(&mut d, 0, 5, &AugmentParams::default(), &mut derive_rng(5, &[])).is_err());
    }
}
