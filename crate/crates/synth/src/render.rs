//! Pinhole ray-cast rendering with rotated-grid 4x supersampling.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use safedrive_core::image::ColorImage;
use safedrive_core::lanes::LaneColor;
use safedrive_core::{CameraIntrinsics, Pixel, RigidPose};

use crate::spec::Degradation;
use crate::world::World;

const SUBSAMPLES: [(f64, f64); 4] = [(0.125, -0.375), (0.375, 0.125), (-0.125, 0.375), (-0.375, -0.125)];
const WARP_TERMS: usize = 12;

#[derive(Debug, Clone, Copy)]
struct WarpTerm {
    kx: f64,
    ky: f64,
    phase: f64,
    amplitude: f64,
}

/// Smooth random displacement of the sampling grid; models sub-pixel
/// geometric noise (lens residue, rolling shutter) with a given RMS per axis.
#[derive(Debug, Clone)]
pub struct WarpField {
    terms: [Vec<WarpTerm>; 2],
}

impl WarpField {
    pub fn none() -> Self {
        Self {
            terms: [Vec::new(), Vec::new()],
        }
    }

    pub fn new(seed: u64, sigma: f64) -> Self {
        if sigma <= 0.0 {
            return Self::none();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amplitude = sigma * (2.0 / WARP_TERMS as f64).sqrt();
        let mut axis = || {
            (0..WARP_TERMS)
                .map(|_| {
                    let wavelength = rng.random_range(40.0..120.0);
                    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    let k = std::f64::consts::TAU / wavelength;
                    WarpTerm {
                        kx: k * angle.cos(),
                        ky: k * angle.sin(),
                        phase: rng.random_range(0.0..std::f64::consts::TAU),
                        amplitude,
                    }
                })
                .collect()
        };
        Self {
            terms: [axis(), axis()],
        }
    }

    pub fn offset(&self, u: f64, v: f64) -> (f64, f64) {
        let eval = |terms: &[WarpTerm]| {
            terms
                .iter()
                .map(|t| t.amplitude * (t.kx * u + t.ky * v + t.phase).sin())
                .sum()
        };
        (eval(&self.terms[0]), eval(&self.terms[1]))
    }
}

/// World-frame ray through a pixel: (camera centre, unit direction).
pub fn pixel_ray(k: &CameraIntrinsics, pose: &RigidPose, p: &Pixel) -> (Vector3<f64>, Vector3<f64>) {
    let d = pose.rotation.transpose() * k.unproject(p);
    (pose.center(), d.normalize())
}

#[derive(Debug, Clone)]
pub struct RenderedView {
    pub image: ColorImage,
    /// Paint class of pixels at least half covered by paint.
    pub paint: Vec<Option<LaneColor>>,
}

pub fn render_view(
    world: &World,
    k: &CameraIntrinsics,
    width: usize,
    height: usize,
    pose: &RigidPose,
    warp: &WarpField,
    erase_paint: bool,
) -> RenderedView {
    let rows: Vec<Vec<([f32; 3], Option<LaneColor>)>> = (0..height)
        .into_par_iter()
        .map(|y| {
            (0..width)
                .map(|x| {
                    let (du, dv) = warp.offset(x as f64, y as f64);
                    let mut acc = [0.0f32; 3];
                    let (mut yellow, mut white) = (0, 0);
                    for (sx, sy) in SUBSAMPLES {
                        let p = Pixel::new(x as f64 + sx + du, y as f64 + sy + dv);
                        let (o, d) = pixel_ray(k, pose, &p);
                        let hit = world.trace(&o, &d, erase_paint);
                        for (a, c) in acc.iter_mut().zip(hit.color) {
                            *a += c;
                        }
                        match hit.paint {
                            Some(LaneColor::Yellow) => yellow += 1,
                            Some(LaneColor::White) => white += 1,
                            None => {}
                        }
                    }
                    let label = if yellow + white >= 2 {
                        Some(if yellow >= white {
                            LaneColor::Yellow
                        } else {
                            LaneColor::White
                        })
                    } else {
                        None
                    };
                    (acc.map(|v| v / SUBSAMPLES.len() as f32), label)
                })
                .collect()
        })
        .collect();
    let mut data = Vec::with_capacity(width * height);
    let mut paint = Vec::with_capacity(width * height);
    for row in rows {
        for (c, l) in row {
            data.push(c);
            paint.push(l);
        }
    }
    RenderedView {
        image: ColorImage::new(width, height, data).expect("consistent dimensions"),
        paint,
    }
}

/// Darkens and adds per-channel Gaussian noise, clamped to [0, 1].
/// Deterministic for a given seed.
pub fn degrade(image: &ColorImage, d: &Degradation, seed: u64) -> ColorImage {
    let mut out = image.clone();
    let normal = Normal::new(0.0f32, d.intensity_noise.max(0.0) as f32).expect("finite sigma");
    out.data.par_chunks_mut(image.width).enumerate().for_each(|(y, row)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (y as u64).wrapping_mul(0x9E37_79B9));
        for px in row {
            for c in px.iter_mut() {
                let noise = if d.intensity_noise > 0.0 {
                    normal.sample(&mut rng)
                } else {
                    0.0
                };
                *c = (*c * d.gain as f32 + noise).clamp(0.0, 1.0);
            }
        }
    });
    out
}
