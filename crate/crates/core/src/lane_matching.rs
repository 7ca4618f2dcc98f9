//! Row-constrained lane-pixel matching in the rectified domain and triangulation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{reprojection_error, triangulate_point, CameraIntrinsics, Pixel, Point3D, RigidPose};
use crate::image::GrayImage;
use crate::lanes::{LaneColor, LanePixelSet};
use crate::polar::{PolarCenter, PolarMap, PolarPixel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LaneMatchParams {
    /// Patch half-size; 4 gives a 9x9 patch.
    pub patch_radius: usize,
    /// Candidate band in polar rows on either side.
    pub row_band: f64,
    /// Largest accepted `1 - NCC`.
    pub max_score: f64,
}

impl Default for LaneMatchParams {
    fn default() -> Self {
        Self {
            patch_radius: 4,
            row_band: 1.0,
            max_score: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneCorrespondence {
    pub pixel_a: Pixel,
    pub pixel_b: Pixel,
    /// Mean of the two pixels' polar rows.
    pub angle_row: f64,
    pub score: f64,
    pub color: LaneColor,
}

#[derive(Debug, Clone, Copy)]
struct Located {
    index: usize,
    row: f64,
    col: f64,
}

fn locate(set: &LanePixelSet, map: &PolarMap) -> Vec<Located> {
    let mut out: Vec<Located> = set
        .pixels
        .iter()
        .enumerate()
        .filter_map(|(index, p)| {
            let q = map.to_polar(p).ok()?;
            (q.angle_row.is_finite() && q.radius_col.is_finite()).then_some(Located {
                index,
                row: q.angle_row,
                col: q.radius_col,
            })
        })
        .collect();
    out.sort_by(|a, b| a.row.total_cmp(&b.row).then(a.index.cmp(&b.index)));
    out
}

/// Entries of `sorted` whose row lies within `band` of `row`, including
/// wrap-around for full-circle maps.
fn in_band(sorted: &[Located], row: f64, band: f64, period: Option<f64>) -> impl Iterator<Item = &Located> {
    let shifts: &[f64] = match period {
        Some(_) => &[0.0, -1.0, 1.0],
        None => &[0.0],
    };
    let p = period.unwrap_or(0.0);
    shifts.iter().flat_map(move |&s| {
        let centre = row + s * p;
        let lo = sorted.partition_point(|l| l.row < centre - band);
        let hi = sorted.partition_point(|l| l.row <= centre + band);
        sorted[lo..hi].iter()
    })
}

/// Distance from the epipole below which patches stop shrinking.
const MIN_PATCH_DISTANCE: f64 = 20.0;

/// Sampling frame of one patch: the pixel's polar position and the relative
/// step `delta` (radians across rows, log-radius along them).
#[derive(Debug, Clone, Copy)]
struct PatchFrame {
    row: f64,
    col: f64,
    delta: Option<f64>,
}

/// Distance of a polar column from the epipole, or `None` when the map has
/// no finite epipole or its rows are not angular.
fn epipole_distance(map: &PolarMap, col: f64) -> Option<f64> {
    if !matches!(map.center, PolarCenter::Epipole(_)) || map.angle_step <= 0.0 || !map.rows_are_angular() {
        return None;
    }
    Some((map.radius_min + col * map.radius_step).max(MIN_PATCH_DISTANCE))
}

/// Samples a square patch around a polar position. With a `delta` the grid
/// is log-polar, so magnification about the epipole (forward motion) leaves
/// the patch unchanged; otherwise it is one polar row/column per sample.
fn patch(image: &GrayImage, map: &PolarMap, frame: PatchFrame, radius: isize) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(((2 * radius + 1) * (2 * radius + 1)) as usize);
    let scaled = frame.delta.zip(epipole_distance(map, frame.col));
    for dr in -radius..=radius {
        for dc in -radius..=radius {
            let q = match scaled {
                Some((delta, dist)) => PolarPixel {
                    angle_row: frame.row + dr as f64 * delta / map.angle_step,
                    radius_col: (dist * (dc as f64 * delta).exp() - map.radius_min) / map.radius_step,
                },
                None => PolarPixel {
                    angle_row: frame.row + dr as f64,
                    radius_col: frame.col + dc as f64,
                },
            };
            let p = map.from_polar(&q);
            if !p.is_finite() {
                return None;
            }
            out.push(image.sample_clamped(p.u, p.v) as f64);
        }
    }
    Some(out)
}

/// `1 - NCC`; flat patches score 2 so they are never accepted.
fn ncc_score(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa < 1e-12 || sbb < 1e-12 {
        return 2.0;
    }
    1.0 - sab / (saa * sbb).sqrt()
}

#[derive(Debug, Clone, Copy)]
struct Scored {
    a: usize,
    b: usize,
    col_a: f64,
    col_b: f64,
    row: f64,
    score: f64,
}

/// Better candidate: lower score, then lower radius, then lower index.
fn better(x: &Scored, y: &Scored, by_b: bool) -> bool {
    let (cx, cy, ix, iy) = if by_b {
        (x.col_b, y.col_b, x.b, y.b)
    } else {
        (x.col_a, y.col_a, x.a, y.a)
    };
    x.score
        .total_cmp(&y.score)
        .then(cx.total_cmp(&cy))
        .then(ix.cmp(&iy))
        .is_lt()
}

/// Matches lane pixels of A to lane pixels of B on shared polar rows.
///
/// Both patches are sampled on the mean row of the pair, at a scale set by
/// the mean epipole distance, so the score is symmetric in (A, B). A pair is kept when each is the other's best
/// candidate and the score passes `max_score`.
pub fn match_lane_pixels(
    lanes_a: &LanePixelSet,
    lanes_b: &LanePixelSet,
    maps: (&PolarMap, &PolarMap),
    images: (&GrayImage, &GrayImage),
    params: &LaneMatchParams,
) -> Vec<LaneCorrespondence> {
    let (map_a, map_b) = maps;
    let (img_a, img_b) = images;
    let loc_a = locate(lanes_a, map_a);
    let loc_b = locate(lanes_b, map_b);
    if loc_a.is_empty() || loc_b.is_empty() {
        return Vec::new();
    }
    let period = map_a.is_full_circle().then(|| map_a.rows() as f64);
    let radius = params.patch_radius as isize;

    let scored: Vec<Scored> = loc_a
        .par_iter()
        .flat_map_iter(|la| {
            let color = lanes_a.colors[la.index];
            in_band(&loc_b, la.row, params.row_band, period)
                .filter(|lb| lanes_b.colors[lb.index] == color)
                .filter_map(|lb| {
                    let mut row_b = lb.row;
                    if let Some(p) = period {
                        row_b += ((la.row - row_b) / p).round() * p;
                    }
                    let row = 0.5 * (la.row + row_b);
                    let delta = epipole_distance(map_a, la.col)
                        .zip(epipole_distance(map_b, lb.col))
                        .map(|(da, db)| 2.0 / (da + db));
                    let pa = patch(
                        img_a,
                        map_a,
                        PatchFrame {
                            row,
                            col: la.col,
                            delta,
                        },
                        radius,
                    )?;
                    let pb = patch(
                        img_b,
                        map_b,
                        PatchFrame {
                            row,
                            col: lb.col,
                            delta,
                        },
                        radius,
                    )?;
                    Some(Scored {
                        a: la.index,
                        b: lb.index,
                        col_a: la.col,
                        col_b: lb.col,
                        row,
                        score: ncc_score(&pa, &pb),
                    })
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let mut best_for_a: Vec<Option<Scored>> = vec![None; lanes_a.len()];
    let mut best_for_b: Vec<Option<Scored>> = vec![None; lanes_b.len()];
    for s in &scored {
        if best_for_a[s.a].is_none_or(|cur| better(s, &cur, true)) {
            best_for_a[s.a] = Some(*s);
        }
        if best_for_b[s.b].is_none_or(|cur| better(s, &cur, false)) {
            best_for_b[s.b] = Some(*s);
        }
    }

    let mut out: Vec<LaneCorrespondence> = best_for_a
        .iter()
        .flatten()
        .filter(|s| s.score <= params.max_score)
        .filter(|s| best_for_b[s.b].is_some_and(|back| back.a == s.a))
        .map(|s| {
            let mut row = s.row;
            if let Some(p) = period {
                row = row.rem_euclid(p);
            }
            LaneCorrespondence {
                pixel_a: lanes_a.pixels[s.a],
                pixel_b: lanes_b.pixels[s.b],
                angle_row: row,
                score: s.score,
                color: lanes_a.colors[s.a],
            }
        })
        .collect();
    out.sort_by(|x, y| {
        (x.pixel_a.v, x.pixel_a.u)
            .partial_cmp(&(y.pixel_a.v, y.pixel_a.u))
            .expect("finite pixels")
    });
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LanePoint3D {
    pub position: Point3D,
    pub reproj_error_a: f64,
    pub reproj_error_b: f64,
    /// Index of the source correspondence.
    pub source: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LaneTriangulation {
    pub points: Vec<LanePoint3D>,
    pub discarded: usize,
}

impl LaneTriangulation {
    pub fn mean_reprojection_error(&self) -> Option<f64> {
        if self.points.is_empty() {
            return None;
        }
        let sum: f64 = self
            .points
            .iter()
            .map(|p| 0.5 * (p.reproj_error_a + p.reproj_error_b))
            .sum();
        Some(sum / self.points.len() as f64)
    }
}

/// Triangulates each correspondence and drops points behind either camera or
/// with a reprojection error above `max_reproj` in either view.
pub fn triangulate_lane_markers(
    corrs: &[LaneCorrespondence],
    pose1: &RigidPose,
    pose2: &RigidPose,
    k: &CameraIntrinsics,
    max_reproj: f64,
) -> Result<LaneTriangulation> {
    if !(max_reproj > 0.0) {
        return Err(Error::Config(format!("max_reproj must be positive, got {max_reproj}")));
    }
    let kept: Vec<Option<LanePoint3D>> = corrs
        .par_iter()
        .enumerate()
        .map(|(source, c)| {
            let t = triangulate_point(&c.pixel_a, &c.pixel_b, pose1, pose2, k).ok()?;
            if !t.in_front {
                return None;
            }
            let ea = reprojection_error(&t.point, &c.pixel_a, pose1, k).ok()?;
            let eb = reprojection_error(&t.point, &c.pixel_b, pose2, k).ok()?;
            (ea <= max_reproj && eb <= max_reproj).then_some(LanePoint3D {
                position: t.point,
                reproj_error_a: ea,
                reproj_error_b: eb,
                source,
            })
        })
        .collect();
    let discarded = kept.iter().filter(|p| p.is_none()).count();
    Ok(LaneTriangulation {
        points: kept.into_iter().flatten().collect(),
        discarded,
    })
}
