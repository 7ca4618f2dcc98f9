//! Lane-marker pixel detection: yellow/white HSV masks intersected with Canny edges.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pixel;
use crate::image::{ColorImage, GrayImage, Mask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaneColor {
    Yellow,
    White,
}

/// HSV thresholds, hue in degrees, saturation and value in [0, 1].
///
/// Value is measured after exposure normalization: the image's
/// `exposure_percentile` value maps to 1 (never dividing by less than
/// `exposure_floor`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HsvThresholds {
    pub yellow_hue_min: f64,
    pub yellow_hue_max: f64,
    pub yellow_saturation_min: f64,
    pub yellow_value_min: f64,
    pub white_saturation_max: f64,
    pub white_value_min: f64,
    pub exposure_percentile: f64,
    pub exposure_floor: f64,
}

impl Default for HsvThresholds {
    fn default() -> Self {
        Self {
            yellow_hue_min: 35.0,
            yellow_hue_max: 65.0,
            yellow_saturation_min: 0.35,
            yellow_value_min: 0.35,
            white_saturation_max: 0.18,
            white_value_min: 0.7,
            exposure_percentile: 0.995,
            exposure_floor: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CannyParams {
    pub sigma: f64,
    /// Hysteresis thresholds as fractions of the largest gradient magnitude.
    pub low_ratio: f64,
    pub high_ratio: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        Self {
            sigma: 1.4,
            low_ratio: 0.1,
            high_ratio: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct LaneDetectionParams {
    pub hsv: HsvThresholds,
    pub canny: CannyParams,
}

/// Returns (hue degrees in [0, 360), saturation, value).
pub fn rgb_to_hsv([r, g, b]: [f32; 3]) -> (f64, f64, f64) {
    let (r, g, b) = (r as f64, g as f64, b as f64);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta <= 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    (h, s, v)
}

fn exposure_scale(image: &ColorImage, t: &HsvThresholds) -> f64 {
    if image.data.is_empty() {
        return 1.0;
    }
    let mut values: Vec<f32> = image.data.iter().map(|p| p[0].max(p[1]).max(p[2])).collect();
    let idx = ((values.len() - 1) as f64 * t.exposure_percentile.clamp(0.0, 1.0)).round() as usize;
    let (_, reference, _) = values.select_nth_unstable_by(idx, f32::total_cmp);
    1.0 / (*reference as f64).max(t.exposure_floor)
}

fn classify(hsv: (f64, f64, f64), scale: f64, t: &HsvThresholds) -> Option<LaneColor> {
    let (h, s, v) = hsv;
    let v = (v * scale).min(1.0);
    if h >= t.yellow_hue_min && h <= t.yellow_hue_max && s >= t.yellow_saturation_min && v >= t.yellow_value_min {
        Some(LaneColor::Yellow)
    } else if s <= t.white_saturation_max && v >= t.white_value_min {
        Some(LaneColor::White)
    } else {
        None
    }
}

pub fn color_mask(image: &ColorImage, class: LaneColor, thresholds: &HsvThresholds) -> Mask {
    let scale = exposure_scale(image, thresholds);
    Mask {
        width: image.width,
        height: image.height,
        data: image
            .data
            .iter()
            .map(|&p| classify(rgb_to_hsv(p), scale, thresholds) == Some(class))
            .collect(),
    }
}

/// Canny with Gaussian pre-smoothing (sigma 1.4) and absolute hysteresis thresholds.
pub fn canny_edges(image: &GrayImage, low: f64, high: f64) -> Result<Mask> {
    canny_with_sigma(image, CannyParams::default().sigma, low, high)
}

/// Canny with thresholds relative to the largest gradient magnitude.
pub fn canny_edges_relative(image: &GrayImage, params: &CannyParams) -> Result<Mask> {
    check_thresholds(params.low_ratio, params.high_ratio)?;
    let (mag, dir) = gradient(image, params.sigma);
    let max = mag.iter().copied().fold(0.0f32, f32::max) as f64;
    if max <= 0.0 {
        return Ok(Mask::new(image.width, image.height));
    }
    Ok(hysteresis_nms(
        image.width,
        image.height,
        &mag,
        &dir,
        params.low_ratio * max,
        params.high_ratio * max,
    ))
}

fn canny_with_sigma(image: &GrayImage, sigma: f64, low: f64, high: f64) -> Result<Mask> {
    check_thresholds(low, high)?;
    let (mag, dir) = gradient(image, sigma);
    Ok(hysteresis_nms(image.width, image.height, &mag, &dir, low, high))
}

fn check_thresholds(low: f64, high: f64) -> Result<()> {
    if !(low >= 0.0 && low < high && high.is_finite()) {
        return Err(Error::InvalidThresholds { low, high });
    }
    Ok(())
}

/// Gradient magnitude and direction quantized to 0 (horizontal), 1 (45 deg), 2 (vertical), 3 (135 deg).
fn gradient(image: &GrayImage, sigma: f64) -> (Vec<f32>, Vec<u8>) {
    let smooth = image.gaussian_blur(sigma);
    let (gx, gy) = smooth.sobel();
    let mag = gx.iter().zip(&gy).map(|(x, y)| x.hypot(*y)).collect();
    let dir = gx
        .iter()
        .zip(&gy)
        .map(|(&x, &y)| {
            let a = (y as f64).atan2(x as f64).to_degrees().rem_euclid(180.0);
            if !(22.5..157.5).contains(&a) {
                0
            } else if a < 67.5 {
                1
            } else if a < 112.5 {
                2
            } else {
                3
            }
        })
        .collect();
    (mag, dir)
}

fn hysteresis_nms(w: usize, h: usize, mag: &[f32], dir: &[u8], low: f64, high: f64) -> Mask {
    let mut thin = vec![0u8; w * h]; // 0 none, 1 weak, 2 strong
    for y in 1..h.saturating_sub(1) {
        for x in 1..w - 1 {
            let i = y * w + x;
            let m = mag[i];
            if (m as f64) < low || m <= 0.0 {
                continue;
            }
            let (n1, n2) = match dir[i] {
                0 => (mag[i - 1], mag[i + 1]),
                1 => (mag[i - w - 1], mag[i + w + 1]),
                2 => (mag[i - w], mag[i + w]),
                _ => (mag[i - w + 1], mag[i + w - 1]),
            };
            // Asymmetric comparison keeps exactly one pixel on symmetric ridges.
            if m > n1 && m >= n2 {
                thin[i] = if m as f64 >= high { 2 } else { 1 };
            }
        }
    }
    let mut out = Mask::new(w, h);
    let mut stack: Vec<usize> = (0..w * h).filter(|&i| thin[i] == 2).collect();
    for &i in &stack {
        out.data[i] = true;
    }
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if thin[j] == 1 && !out.data[j] {
                    out.data[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    out
}

/// Lane-marker pixels with their color class; no duplicates, raster order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LanePixelSet {
    pub pixels: Vec<Pixel>,
    pub colors: Vec<LaneColor>,
}

impl LanePixelSet {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

/// Intersection of Canny edges with the 1-px dilated yellow/white masks.
pub fn detect_lane_pixels(image: &ColorImage, params: &LaneDetectionParams) -> Result<LanePixelSet> {
    let yellow = color_mask(image, LaneColor::Yellow, &params.hsv).dilate(1);
    let white = color_mask(image, LaneColor::White, &params.hsv).dilate(1);
    let edges = canny_edges_relative(&image.to_gray(), &params.canny)?;
    let mut set = LanePixelSet::default();
    for (x, y) in edges.iter_set() {
        let class = if yellow.get(x, y) {
            LaneColor::Yellow
        } else if white.get(x, y) {
            LaneColor::White
        } else {
            continue;
        };
        set.pixels.push(Pixel::new(x as f64, y as f64));
        set.colors.push(class);
    }
    Ok(set)
}
