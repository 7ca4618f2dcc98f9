//! Harris corners with minimum-spacing suppression, oriented binary
//! descriptors and mutual nearest-neighbour matching.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pixel;
use crate::image::GrayImage;

pub const MIN_IMAGE_SIDE: usize = 32;
/// Seed of the descriptor sampling pattern. Changing it invalidates every stored descriptor.
pub const DESCRIPTOR_PATTERN_SEED: u64 = 0x5AFE_D21E;
pub const DESCRIPTOR_BITS: usize = 256;
pub const PATCH_SIZE: usize = 31;
const PATCH_RADIUS: f64 = 15.0;
const PATTERN_RADIUS: f64 = 13.0;
const DESCRIPTOR_SMOOTHING: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarrisParams {
    /// Standard deviation of the Gaussian structure-tensor window.
    pub window_sigma: f64,
    pub k: f64,
    /// Responses below this fraction of the image maximum are discarded.
    pub relative_threshold: f64,
}

impl Default for HarrisParams {
    fn default() -> Self {
        Self {
            window_sigma: 1.5,
            k: 0.04,
            relative_threshold: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeaturePoint {
    pub position: Pixel,
    pub response: f64,
    /// Intensity-centroid angle in radians, in [-pi, pi].
    pub orientation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinaryDescriptor {
    pub bits: [u64; 4],
}

impl BinaryDescriptor {
    pub fn hamming(&self, other: &BinaryDescriptor) -> u32 {
        self.bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    fn set_bit(&mut self, i: usize) {
        self.bits[i / 64] |= 1 << (i % 64);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMatch {
    pub index_a: usize,
    pub index_b: usize,
    pub distance: u32,
}

pub fn detect_corners(image: &GrayImage, max_count: usize, min_spacing: f64) -> Result<Vec<FeaturePoint>> {
    detect_corners_with(image, &HarrisParams::default(), max_count, min_spacing)
}

/// Harris corners sorted by descending response, greedily thinned so that no
/// two survivors are closer than `min_spacing`.
pub fn detect_corners_with(
    image: &GrayImage,
    params: &HarrisParams,
    max_count: usize,
    min_spacing: f64,
) -> Result<Vec<FeaturePoint>> {
    if image.width < MIN_IMAGE_SIDE || image.height < MIN_IMAGE_SIDE {
        return Err(Error::ImageTooSmall {
            width: image.width,
            height: image.height,
            min: MIN_IMAGE_SIDE,
        });
    }
    if max_count == 0 || min_spacing < 0.0 || !min_spacing.is_finite() {
        return Err(Error::Config(format!(
            "max_count must be >= 1 and min_spacing >= 0 (got {max_count}, {min_spacing})"
        )));
    }

    let response = harris_response(image, params);
    let (w, h) = (image.width, image.height);
    let max_r = response.iter().copied().fold(0.0f32, f32::max);
    if max_r <= 0.0 {
        return Ok(Vec::new());
    }
    let threshold = (params.relative_threshold as f32 * max_r).max(f32::MIN_POSITIVE);

    let mut candidates = Vec::new();
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let r = response[y * w + x];
            if r < threshold {
                continue;
            }
            if is_local_max(&response, w, x, y) {
                let (dx, dy) = subpixel_offset(&response, w, x, y);
                candidates.push((r, x as f64 + dx, y as f64 + dy));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.2.total_cmp(&b.2)).then(a.1.total_cmp(&b.1)));

    let accepted = greedy_spacing(&candidates, min_spacing, max_count, w, h);
    let (gx, gy) = image.sobel();
    Ok(accepted
        .into_iter()
        .map(|(r, x, y)| {
            let (x, y) = refine_corner(&gx, &gy, w, h, x, y);
            (r, x, y)
        })
        .map(|(r, x, y)| FeaturePoint {
            position: Pixel::new(x, y),
            response: r as f64,
            orientation: intensity_centroid_angle(image, x, y),
        })
        .collect())
}

fn harris_response(image: &GrayImage, params: &HarrisParams) -> Vec<f32> {
    let (gx, gy) = image.sobel();
    let (w, h) = (image.width, image.height);
    let tensor = |f: &dyn Fn(usize) -> f32| {
        GrayImage {
            width: w,
            height: h,
            data: (0..w * h).map(f).collect(),
        }
        .gaussian_blur(params.window_sigma)
    };
    let sxx = tensor(&|i| gx[i] * gx[i]);
    let syy = tensor(&|i| gy[i] * gy[i]);
    let sxy = tensor(&|i| gx[i] * gy[i]);
    let k = params.k as f32;
    (0..w * h)
        .map(|i| {
            let (a, b, c) = (sxx.data[i], syy.data[i], sxy.data[i]);
            let tr = a + b;
            a * b - c * c - k * tr * tr
        })
        .collect()
}

fn is_local_max(r: &[f32], w: usize, x: usize, y: usize) -> bool {
    let c = r[y * w + x];
    for dy in -1isize..=1 {
        for dx in -1isize..=1 {
            if dx == 0 && dy == 0 {
                continue;
            }
            let n = r[(y as isize + dy) as usize * w + (x as isize + dx) as usize];
            // Plateaus keep only their first pixel in raster order.
            let earlier = dy < 0 || (dy == 0 && dx < 0);
            if n > c || (earlier && n == c) {
                return false;
            }
        }
    }
    true
}

fn subpixel_offset(r: &[f32], w: usize, x: usize, y: usize) -> (f64, f64) {
    let at = |xx: usize, yy: usize| r[yy * w + xx] as f64;
    let fit = |m: f64, c: f64, p: f64| {
        let denom = m - 2.0 * c + p;
        if denom.abs() < 1e-20 {
            0.0
        } else {
            (0.5 * (m - p) / denom).clamp(-0.5, 0.5)
        }
    };
    (
        fit(at(x - 1, y), at(x, y), at(x + 1, y)),
        fit(at(x, y - 1), at(x, y), at(x, y + 1)),
    )
}

const REFINE_RADIUS: isize = 4;
const REFINE_SIGMA: f64 = 2.0;
const REFINE_ITERATIONS: usize = 10;
const REFINE_MAX_SHIFT: f64 = 0.7;
/// Pixels this close to the estimate are skipped: their gradients mix edges.
const REFINE_DEAD_ZONE: f64 = 1.5;

/// Moves a corner to the point every nearby gradient is orthogonal to:
/// solves `sum(w g g^T) q = sum(w g g^T p)` over a Gaussian-weighted window.
/// Keeps the input when the system is ill-conditioned or the point drifts.
fn refine_corner(gx: &[f32], gy: &[f32], w: usize, h: usize, x0: f64, y0: f64) -> (f64, f64) {
    let (mut x, mut y) = (x0, y0);
    for _ in 0..REFINE_ITERATIONS {
        let (cx, cy) = (x.round() as isize, y.round() as isize);
        let (mut a, mut b, mut c, mut bx, mut by) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for py in cy - REFINE_RADIUS..=cy + REFINE_RADIUS {
            for px in cx - REFINE_RADIUS..=cx + REFINE_RADIUS {
                if px < 1 || py < 1 || px >= w as isize - 1 || py >= h as isize - 1 {
                    continue;
                }
                let i = py as usize * w + px as usize;
                let (u, v) = (gx[i] as f64, gy[i] as f64);
                let (dx, dy) = (px as f64 - x, py as f64 - y);
                if dx.abs() < REFINE_DEAD_ZONE && dy.abs() < REFINE_DEAD_ZONE {
                    continue;
                }
                let wt = (-(dx * dx + dy * dy) / (2.0 * REFINE_SIGMA * REFINE_SIGMA)).exp();
                let (guu, guv, gvv) = (wt * u * u, wt * u * v, wt * v * v);
                a += guu;
                b += guv;
                c += gvv;
                bx += guu * px as f64 + guv * py as f64;
                by += guv * px as f64 + gvv * py as f64;
            }
        }
        let det = a * c - b * b;
        let tr = a + c;
        if tr <= 0.0 || det <= 1e-6 * tr * tr {
            return (x0, y0);
        }
        let nx = (c * bx - b * by) / det;
        let ny = (a * by - b * bx) / det;
        let step = (nx - x).hypot(ny - y);
        (x, y) = (nx, ny);
        if (x - x0).hypot(y - y0) > REFINE_MAX_SHIFT {
            return (x0, y0);
        }
        if step < 1e-3 {
            break;
        }
    }
    (x, y)
}

fn greedy_spacing(
    candidates: &[(f32, f64, f64)],
    min_spacing: f64,
    max_count: usize,
    w: usize,
    h: usize,
) -> Vec<(f32, f64, f64)> {
    let cell = min_spacing.max(1.0);
    let gw = (w as f64 / cell).ceil() as usize + 1;
    let gh = (h as f64 / cell).ceil() as usize + 1;
    let mut grid: Vec<Vec<(f64, f64)>> = vec![Vec::new(); gw * gh];
    let mut out = Vec::new();
    let spacing_sq = min_spacing * min_spacing;
    for &(r, x, y) in candidates {
        if out.len() >= max_count {
            break;
        }
        let cx = ((x.max(0.0)) / cell) as usize;
        let cy = ((y.max(0.0)) / cell) as usize;
        let mut clear = true;
        'search: for gy in cy.saturating_sub(1)..=(cy + 1).min(gh - 1) {
            for gx in cx.saturating_sub(1)..=(cx + 1).min(gw - 1) {
                for &(px, py) in &grid[gy * gw + gx] {
                    let d2 = (px - x).powi(2) + (py - y).powi(2);
                    if d2 < spacing_sq {
                        clear = false;
                        break 'search;
                    }
                }
            }
        }
        if clear {
            grid[cy.min(gh - 1) * gw + cx.min(gw - 1)].push((x, y));
            out.push((r, x, y));
        }
    }
    out
}

/// Angle of the vector from the feature to the intensity centroid of the
/// surrounding disc of radius 15.
fn intensity_centroid_angle(image: &GrayImage, x: f64, y: f64) -> f64 {
    let (xi, yi) = (x.round() as isize, y.round() as isize);
    let r = PATCH_RADIUS as isize;
    let (mut m10, mut m01) = (0.0f64, 0.0f64);
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy > r * r {
                continue;
            }
            let v = image.get_clamped(xi + dx, yi + dy) as f64;
            m10 += dx as f64 * v;
            m01 += dy as f64 * v;
        }
    }
    m01.atan2(m10)
}

type PointPair = ([f64; 2], [f64; 2]);

fn sampling_pattern() -> &'static [PointPair; DESCRIPTOR_BITS] {
    static PATTERN: OnceLock<[PointPair; DESCRIPTOR_BITS]> = OnceLock::new();
    PATTERN.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(DESCRIPTOR_PATTERN_SEED);
        let mut disc_point = || loop {
            let p = [
                rng.random_range(-PATTERN_RADIUS..=PATTERN_RADIUS),
                rng.random_range(-PATTERN_RADIUS..=PATTERN_RADIUS),
            ];
            if p[0] * p[0] + p[1] * p[1] <= PATTERN_RADIUS * PATTERN_RADIUS {
                return p;
            }
        };
        std::array::from_fn(|_| loop {
            let a = disc_point();
            let b = disc_point();
            if (a[0] - b[0]).hypot(a[1] - b[1]) >= 2.0 {
                return (a, b);
            }
        })
    })
}

/// Descriptors for the features whose 31x31 patch fits in the image.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DescriptorSet {
    pub descriptors: Vec<BinaryDescriptor>,
    /// Index into the input feature list for each descriptor.
    pub kept: Vec<usize>,
    /// Input indices dropped because their patch crossed the border.
    pub dropped: Vec<usize>,
}

pub fn describe(image: &GrayImage, features: &[FeaturePoint]) -> DescriptorSet {
    let smoothed = image.gaussian_blur(DESCRIPTOR_SMOOTHING);
    let pattern = sampling_pattern();
    let mut set = DescriptorSet::default();
    let (maxx, maxy) = ((image.width - 1) as f64, (image.height - 1) as f64);
    for (i, f) in features.iter().enumerate() {
        let Pixel { u, v } = f.position;
        if u - PATCH_RADIUS < 0.0 || v - PATCH_RADIUS < 0.0 || u + PATCH_RADIUS > maxx || v + PATCH_RADIUS > maxy {
            set.dropped.push(i);
            continue;
        }
        let (s, c) = f.orientation.sin_cos();
        let rot = |p: &[f64; 2]| (u + c * p[0] - s * p[1], v + s * p[0] + c * p[1]);
        let mut d = BinaryDescriptor { bits: [0; 4] };
        for (bit, (p, q)) in pattern.iter().enumerate() {
            let (pu, pv) = rot(p);
            let (qu, qv) = rot(q);
            if smoothed.sample_clamped(pu, pv) < smoothed.sample_clamped(qu, qv) {
                d.set_bit(bit);
            }
        }
        set.descriptors.push(d);
        set.kept.push(i);
    }
    set
}

/// Mutual nearest neighbours under an arbitrary integer distance. Ties go to
/// the lowest index; pairs farther than `max_distance` are dropped.
pub fn mutual_nearest<F>(n_a: usize, n_b: usize, max_distance: u32, dist: F) -> Vec<FeatureMatch>
where
    F: Fn(usize, usize) -> u32 + Sync,
{
    if n_a == 0 || n_b == 0 {
        return Vec::new();
    }
    let best_b: Vec<(usize, u32)> = (0..n_a)
        .into_par_iter()
        .map(|i| argmin((0..n_b).map(|j| dist(i, j))))
        .collect();
    let best_a: Vec<(usize, u32)> = (0..n_b)
        .into_par_iter()
        .map(|j| argmin((0..n_a).map(|i| dist(i, j))))
        .collect();
    best_b
        .iter()
        .enumerate()
        .filter(|&(i, &(j, d))| best_a[j].0 == i && d <= max_distance)
        .map(|(i, &(j, d))| FeatureMatch {
            index_a: i,
            index_b: j,
            distance: d,
        })
        .collect()
}

fn argmin(it: impl Iterator<Item = u32>) -> (usize, u32) {
    let mut best = (usize::MAX, u32::MAX);
    for (i, d) in it.enumerate() {
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

pub fn match_bidirectional(
    desc_a: &[BinaryDescriptor],
    desc_b: &[BinaryDescriptor],
    max_distance: u32,
) -> Vec<FeatureMatch> {
    mutual_nearest(desc_a.len(), desc_b.len(), max_distance, |i, j| {
        desc_a[i].hamming(&desc_b[j])
    })
}

/// Default acceptance radius for descriptor matches, in bits.
pub const DEFAULT_MAX_HAMMING: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureParams {
    pub max_features: usize,
    pub min_spacing: f64,
    pub max_hamming: u32,
    pub harris: HarrisParams,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            max_features: 2000,
            min_spacing: 6.0,
            max_hamming: DEFAULT_MAX_HAMMING,
            harris: HarrisParams::default(),
        }
    }
}

/// Described features of one image; `points[i]` owns `descriptors[i]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ViewFeatures {
    pub points: Vec<FeaturePoint>,
    pub descriptors: Vec<BinaryDescriptor>,
}

impl ViewFeatures {
    pub fn pixels(&self) -> Vec<Pixel> {
        self.points.iter().map(|p| p.position).collect()
    }
}

/// Detection followed by description, keeping only described features.
pub fn extract_features(image: &GrayImage, params: &FeatureParams) -> Result<ViewFeatures> {
    let detected = detect_corners_with(image, &params.harris, params.max_features, params.min_spacing)?;
    let set = describe(image, &detected);
    Ok(ViewFeatures {
        points: set.kept.iter().map(|&i| detected[i]).collect(),
        descriptors: set.descriptors,
    })
}
