//! Polar rectification around the epipoles.
//!
//! Rows index epipolar lines and columns index distance from the epipole, so a
//! correspondence shares (up to discretization) the same row in both maps.
//! The first map of a pair is the reference: its rows are uniform in the
//! polar angle around its own epipole. The second map defines row `r` as the
//! epipolar line corresponding to reference row `r`, transferred through F,
//! which keeps rows aligned even when the pair has a relative rotation.
//!
//! When an epipole is at infinity the corresponding map switches to parallel
//! lines: the row coordinate is the signed offset across the lines and the
//! column coordinate is the position along them.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::epipolar::{epipole_homogeneous, EpipoleSide, FundamentalMatrix};
use crate::error::{Error, Result};
use crate::geometry::Pixel;
use crate::image::{Dims, GrayImage};

const AT_EPIPOLE: f64 = 1e-9;
const EPIPOLE_MIN_W: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PolarCenter {
    Epipole(Pixel),
    /// Unit direction of the parallel epipolar lines.
    Direction([f64; 2]),
}

impl PolarCenter {
    fn from_homogeneous(e: &Vector3<f64>) -> Self {
        if e.z.abs() < EPIPOLE_MIN_W {
            let d = Vector2::new(e.x, e.y).normalize();
            PolarCenter::Direction([d.x, d.y])
        } else {
            PolarCenter::Epipole(Pixel::new(e.x / e.z, e.y / e.z))
        }
    }

    fn normal(d: &[f64; 2]) -> Vector2<f64> {
        Vector2::new(-d[1], d[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct RowTransfer {
    /// This-image point -> epipolar line in the reference image.
    to_reference: Matrix3<f64>,
    /// Reference-image point -> epipolar line in this image.
    from_reference: Matrix3<f64>,
    reference_center: PolarCenter,
    /// Orientation of lines transferred into this image (half-line selection).
    sign_from_reference: f64,
    /// Orientation of lines transferred into the reference image.
    sign_to_reference: f64,
}

/// Epipole-centred resampling grid for one image of a pair.
///
/// `angle_*` describe the row axis in the reference parameterization shared
/// by both maps of a pair (radians for a finite reference epipole, pixels of
/// line offset when the reference epipole is at infinity).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarMap {
    pub center: PolarCenter,
    pub angle_min: f64,
    pub angle_max: f64,
    pub angle_step: f64,
    pub radius_min: f64,
    pub radius_max: f64,
    pub radius_step: f64,
    transfer: Option<RowTransfer>,
}

/// Fractional (row, column) in a polar map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPixel {
    pub angle_row: f64,
    pub radius_col: f64,
}

impl PolarMap {
    pub fn rows(&self) -> usize {
        ((self.angle_max - self.angle_min) / self.angle_step).ceil() as usize
    }

    pub fn cols(&self) -> usize {
        ((self.radius_max - self.radius_min) / self.radius_step).ceil() as usize
    }

    fn full_circle(&self) -> bool {
        self.reference_is_angular() && (self.angle_max - self.angle_min) >= TAU - 1e-12
    }

    /// True when rows are polar angles (radians) of a finite reference epipole.
    pub fn rows_are_angular(&self) -> bool {
        self.reference_is_angular()
    }

    fn reference_is_angular(&self) -> bool {
        let reference = self.transfer.map_or(self.center, |t| t.reference_center);
        matches!(reference, PolarCenter::Epipole(_))
    }

    /// Row-axis coordinate (angle or offset) of a point.
    fn row_coordinate(&self, p: &Pixel) -> Result<f64> {
        let raw = match &self.transfer {
            None => match self.center {
                PolarCenter::Epipole(e) => {
                    let d = p.to_vector() - e.to_vector();
                    if d.norm() < AT_EPIPOLE {
                        return Err(Error::AtEpipole);
                    }
                    d.y.atan2(d.x)
                }
                PolarCenter::Direction(d) => PolarCenter::normal(&d).dot(&p.to_vector()),
            },
            Some(t) => {
                if let PolarCenter::Epipole(e) = self.center {
                    if p.distance(&e) < AT_EPIPOLE {
                        return Err(Error::AtEpipole);
                    }
                }
                let line = t.to_reference * p.homogeneous();
                reference_coordinate_of_line(&line, &t.reference_center, t.sign_to_reference).ok_or(Error::AtEpipole)?
            }
        };
        Ok(self.wrap(raw))
    }

    fn wrap(&self, coord: f64) -> f64 {
        if self.reference_is_angular() {
            self.angle_min + (coord - self.angle_min).rem_euclid(TAU)
        } else {
            coord
        }
    }

    fn column_coordinate(&self, p: &Pixel) -> f64 {
        match self.center {
            PolarCenter::Epipole(e) => p.distance(&e),
            PolarCenter::Direction(d) => Vector2::new(d[0], d[1]).dot(&p.to_vector()),
        }
    }

    pub fn to_polar(&self, p: &Pixel) -> Result<PolarPixel> {
        let row = self.row_coordinate(p)?;
        let col = self.column_coordinate(p);
        Ok(PolarPixel {
            angle_row: (row - self.angle_min) / self.angle_step,
            radius_col: (col - self.radius_min) / self.radius_step,
        })
    }

    pub fn from_polar(&self, q: &PolarPixel) -> Pixel {
        let coord = self.angle_min + q.angle_row * self.angle_step;
        let radius = self.radius_min + q.radius_col * self.radius_step;
        match &self.transfer {
            None => match self.center {
                PolarCenter::Epipole(e) => {
                    let (s, c) = coord.sin_cos();
                    Pixel::new(e.u + radius * c, e.v + radius * s)
                }
                PolarCenter::Direction(d) => {
                    let n = PolarCenter::normal(&d);
                    Pixel::new(coord * n.x + radius * d[0], coord * n.y + radius * d[1])
                }
            },
            Some(t) => {
                let x_ref = reference_point(&t.reference_center, coord);
                let line = t.from_reference * x_ref;
                point_on_line(&line, &self.center, t.sign_from_reference, radius)
            }
        }
    }
}

fn reference_point(center: &PolarCenter, coord: f64) -> Vector3<f64> {
    match center {
        PolarCenter::Epipole(e) => {
            let (s, c) = coord.sin_cos();
            Vector3::new(e.u + 100.0 * c, e.v + 100.0 * s, 1.0)
        }
        PolarCenter::Direction(d) => {
            let n = PolarCenter::normal(d);
            Vector3::new(coord * n.x, coord * n.y, 1.0)
        }
    }
}

/// Oriented direction `(b, -a)` of the line `ax + by + c = 0`.
fn line_direction(line: &Vector3<f64>, sign: f64) -> Option<Vector2<f64>> {
    let d = Vector2::new(line.y, -line.x) * sign;
    let n = d.norm();
    (n > 0.0 && n.is_finite()).then(|| d / n)
}

fn reference_coordinate_of_line(line: &Vector3<f64>, center: &PolarCenter, sign: f64) -> Option<f64> {
    match center {
        PolarCenter::Epipole(_) => line_direction(line, sign).map(|d| d.y.atan2(d.x)),
        PolarCenter::Direction(dir) => {
            let ab = Vector2::new(line.x, line.y);
            let norm = ab.norm();
            if norm == 0.0 {
                return None;
            }
            let n_line = ab / norm;
            let offset = -line.z / norm;
            Some(n_line.dot(&PolarCenter::normal(dir)).signum() * offset)
        }
    }
}

fn point_on_line(line: &Vector3<f64>, center: &PolarCenter, sign: f64, radius: f64) -> Pixel {
    match center {
        PolarCenter::Epipole(e) => match line_direction(line, sign) {
            Some(d) => Pixel::new(e.u + radius * d.x, e.v + radius * d.y),
            None => Pixel::new(f64::NAN, f64::NAN),
        },
        PolarCenter::Direction(d) => {
            let ab = Vector2::new(line.x, line.y);
            let foot = -line.z * ab / ab.norm_squared();
            Pixel::new(foot.x + radius * d[0], foot.y + radius * d[1])
        }
    }
}

/// Angular interval `[start, start + length)`, length in (0, 2pi].
#[derive(Debug, Clone, Copy, PartialEq)]
struct Arc {
    start: f64,
    length: f64,
}

impl Arc {
    const FULL: Arc = Arc {
        start: -PI,
        length: TAU,
    };

    /// Smallest arc containing all `angles`.
    fn spanning(angles: &[f64]) -> Arc {
        let mut a: Vec<f64> = angles.iter().map(|x| x.rem_euclid(TAU)).collect();
        a.sort_by(f64::total_cmp);
        let mut best_gap = a[0] + TAU - a[a.len() - 1];
        let mut start = a[0];
        for w in a.windows(2) {
            let gap = w[1] - w[0];
            if gap > best_gap {
                best_gap = gap;
                start = w[1];
            }
        }
        Arc {
            start,
            length: TAU - best_gap,
        }
    }

    fn is_full(&self) -> bool {
        self.length >= TAU - 1e-12
    }

    fn intersect(&self, other: &Arc) -> Option<Arc> {
        if self.is_full() {
            return Some(*other);
        }
        if other.is_full() {
            return Some(*self);
        }
        // Shift `other` into the frame where `self` starts at zero and try both windings.
        let off = (other.start - self.start).rem_euclid(TAU);
        let mut best: Option<Arc> = None;
        for shift in [off, off - TAU] {
            let lo = shift.max(0.0);
            let hi = (shift + other.length).min(self.length);
            if hi > lo && best.is_none_or(|b| hi - lo > b.length) {
                best = Some(Arc {
                    start: self.start + lo,
                    length: hi - lo,
                });
            }
        }
        best
    }
}

fn inside(dims: &Dims, p: &Pixel) -> bool {
    dims.contains(p.u, p.v)
}

fn corner_pixels(dims: &Dims) -> [Pixel; 4] {
    dims.corners().map(|(u, v)| Pixel::new(u, v))
}

fn distance_to_rect(dims: &Dims, p: &Pixel) -> f64 {
    let [tl, _, br, _] = corner_pixels(dims);
    let dx = (tl.u - p.u).max(0.0).max(p.u - br.u);
    let dy = (tl.v - p.v).max(0.0).max(p.v - br.v);
    dx.hypot(dy)
}

fn column_range(center: &PolarCenter, dims: &Dims) -> (f64, f64) {
    let corners = corner_pixels(dims);
    match center {
        PolarCenter::Epipole(e) => {
            let rmin = if inside(dims, e) {
                0.0
            } else {
                distance_to_rect(dims, e)
            };
            let rmax = corners.iter().map(|c| c.distance(e)).fold(0.0, f64::max);
            (rmin, rmax)
        }
        PolarCenter::Direction(d) => {
            let s: Vec<f64> = corners.iter().map(|c| d[0] * c.u + d[1] * c.v).collect();
            (
                s.iter().copied().fold(f64::INFINITY, f64::min),
                s.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )
        }
    }
}

/// Builds both maps of a pair, picking the half-line orientation that keeps
/// corresponding epipolar directions aligned. Suited to small relative
/// rotations such as consecutive frames of a driving sequence.
pub fn build_polar_maps(f: &FundamentalMatrix, dims_a: Dims, dims_b: Dims) -> Result<(PolarMap, PolarMap)> {
    build(f, dims_a, dims_b, None)
}

/// Like [`build_polar_maps`] but orients the half-line transfer by majority
/// vote over known correspondences, which is valid for any motion.
pub fn build_polar_maps_oriented(
    f: &FundamentalMatrix,
    dims_a: Dims,
    dims_b: Dims,
    pixels_a: &[Pixel],
    pixels_b: &[Pixel],
) -> Result<(PolarMap, PolarMap)> {
    build(f, dims_a, dims_b, Some((pixels_a, pixels_b)))
}

fn build(
    f: &FundamentalMatrix,
    dims_a: Dims,
    dims_b: Dims,
    anchors: Option<(&[Pixel], &[Pixel])>,
) -> Result<(PolarMap, PolarMap)> {
    let fm = *f.matrix();
    let center_a = PolarCenter::from_homogeneous(&epipole_homogeneous(f, EpipoleSide::Right));
    let center_b = PolarCenter::from_homogeneous(&epipole_homogeneous(f, EpipoleSide::Left));

    let sign_from = match center_b {
        PolarCenter::Direction(_) => 1.0,
        PolarCenter::Epipole(eb) => orientation_sign(&fm, &center_a, &eb, anchors),
    };
    let mut transfer = RowTransfer {
        to_reference: fm.transpose(),
        from_reference: fm,
        reference_center: center_a,
        sign_from_reference: sign_from,
        sign_to_reference: 1.0,
    };
    transfer.sign_to_reference = round_trip_sign(&transfer, &center_b);

    let range = reference_range(&transfer, &center_a, &center_b, &dims_a, &dims_b)?;
    let (rmin_a, rmax_a) = column_range(&center_a, &dims_a);
    let (rmin_b, rmax_b) = column_range(&center_b, &dims_b);

    let provisional = match center_a {
        PolarCenter::Epipole(_) => 1.0 / rmax_a.max(1.0),
        PolarCenter::Direction(_) => 1.0,
    };
    let mut map_a = PolarMap {
        center: center_a,
        angle_min: range.start,
        angle_max: range.start + range.length,
        angle_step: provisional,
        radius_min: rmin_a,
        radius_max: rmax_a,
        radius_step: 1.0,
        transfer: None,
    };
    let mut map_b = PolarMap {
        center: center_b,
        radius_min: rmin_b,
        radius_max: rmax_b,
        transfer: Some(transfer),
        ..map_a
    };
    // Shrink the step until neither image moves more than a pixel per row at its outermost column.
    let speed = row_speed(&map_a).max(row_speed(&map_b)).max(1.0);
    map_a.angle_step = provisional / speed;
    map_b.angle_step = map_a.angle_step;
    Ok((map_a, map_b))
}

/// Largest pixel displacement per row over the map.
fn row_speed(map: &PolarMap) -> f64 {
    const SAMPLES: usize = 720;
    let span = (map.angle_max - map.angle_min) / map.angle_step;
    let cols = [0.0, (map.radius_max - map.radius_min) / map.radius_step];
    let mut worst: f64 = 0.0;
    for i in 0..SAMPLES {
        let row = span * (i as f64 + 0.5) / SAMPLES as f64;
        for &col in &cols {
            let p0 = map.from_polar(&PolarPixel {
                angle_row: row,
                radius_col: col,
            });
            let p1 = map.from_polar(&PolarPixel {
                angle_row: row + 1e-3,
                radius_col: col,
            });
            let speed = p0.distance(&p1) / 1e-3;
            if speed.is_finite() {
                worst = worst.max(speed);
            }
        }
    }
    worst
}

fn orientation_sign(
    fm: &Matrix3<f64>,
    center_a: &PolarCenter,
    eb: &Pixel,
    anchors: Option<(&[Pixel], &[Pixel])>,
) -> f64 {
    let mut vote = 0.0;
    if let Some((pa, pb)) = anchors {
        for (a, b) in pa.iter().zip(pb) {
            if let Some(d) = line_direction(&(fm * a.homogeneous()), 1.0) {
                vote += d.dot(&(b.to_vector() - eb.to_vector())).signum();
            }
        }
    }
    if vote == 0.0 {
        // Corresponding half-lines point the same way when the rotation is small.
        for i in 0..360 {
            let theta = (i as f64).to_radians();
            let x_ref = match center_a {
                PolarCenter::Epipole(_) => reference_point(center_a, theta),
                PolarCenter::Direction(d) => {
                    let n = PolarCenter::normal(d);
                    Vector3::new((i as f64 - 180.0) * n.x, (i as f64 - 180.0) * n.y, 1.0)
                }
            };
            let dir_a = match center_a {
                PolarCenter::Epipole(ea) => Vector2::new(x_ref.x - ea.u, x_ref.y - ea.v),
                PolarCenter::Direction(d) => Vector2::new(d[0], d[1]),
            };
            if let Some(d) = line_direction(&(fm * x_ref), 1.0) {
                vote += d.dot(&dir_a).signum();
            }
        }
    }
    if vote < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Orientation of the backward transfer that makes to_polar(from_polar(q)) = q.
fn round_trip_sign(t: &RowTransfer, center_b: &PolarCenter) -> f64 {
    let PolarCenter::Epipole(_) = t.reference_center else {
        return 1.0;
    };
    let probe = 0.3;
    let x_ref = reference_point(&t.reference_center, probe);
    let p = point_on_line(&(t.from_reference * x_ref), center_b, t.sign_from_reference, 50.0);
    let line = t.to_reference * p.homogeneous();
    match line_direction(&line, 1.0) {
        Some(d) => {
            let (s, c) = probe.sin_cos();
            if d.dot(&Vector2::new(c, s)) < 0.0 {
                -1.0
            } else {
                1.0
            }
        }
        None => 1.0,
    }
}

/// Range of the shared row axis covering epipolar lines that cross both images.
fn reference_range(
    t: &RowTransfer,
    center_a: &PolarCenter,
    center_b: &PolarCenter,
    dims_a: &Dims,
    dims_b: &Dims,
) -> Result<Arc> {
    let corners_a = corner_pixels(dims_a);
    let corners_b = corner_pixels(dims_b);
    let b_covers_all = matches!(center_b, PolarCenter::Epipole(e) if inside(dims_b, e));
    let to_ref = |p: &Pixel| {
        let line = t.to_reference * p.homogeneous();
        reference_coordinate_of_line(&line, center_a, t.sign_to_reference)
    };
    match center_a {
        PolarCenter::Epipole(ea) => {
            let arc_a = if inside(dims_a, ea) {
                Arc::FULL
            } else {
                let angles: Vec<f64> = corners_a.iter().map(|c| (c.v - ea.v).atan2(c.u - ea.u)).collect();
                Arc::spanning(&angles)
            };
            let arc_b = if b_covers_all {
                Arc::FULL
            } else {
                let angles: Vec<f64> = corners_b.iter().filter_map(to_ref).collect();
                if angles.len() < 2 {
                    Arc::FULL
                } else {
                    Arc::spanning(&angles)
                }
            };
            let arc = arc_a
                .intersect(&arc_b)
                .ok_or(Error::DegenerateConfiguration("images share no epipolar lines"))?;
            Ok(if arc.is_full() { Arc::FULL } else { arc })
        }
        PolarCenter::Direction(d) => {
            let n = PolarCenter::normal(d);
            let offs_a: Vec<f64> = corners_a.iter().map(|c| n.dot(&c.to_vector())).collect();
            let (mut lo, mut hi) = min_max(&offs_a);
            if !b_covers_all {
                let offs_b: Vec<f64> = corners_b.iter().filter_map(to_ref).collect();
                if offs_b.len() >= 2 {
                    let (lb, hb) = min_max(&offs_b);
                    lo = lo.max(lb);
                    hi = hi.min(hb);
                }
            }
            if hi <= lo {
                return Err(Error::DegenerateConfiguration("images share no epipolar lines"));
            }
            Ok(Arc {
                start: lo,
                length: hi - lo,
            })
        }
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    })
}

/// Resamples `image` onto the map's grid with bilinear interpolation; cells
/// that fall outside the source are zero.
pub fn rectify_image(image: &GrayImage, map: &PolarMap) -> GrayImage {
    let (rows, cols) = (map.rows(), map.cols());
    let mut data = vec![0.0f32; rows * cols];
    data.par_chunks_mut(cols.max(1)).enumerate().for_each(|(r, row)| {
        for (c, out) in row.iter_mut().enumerate() {
            let p = map.from_polar(&PolarPixel {
                angle_row: r as f64,
                radius_col: c as f64,
            });
            *out = image.sample(p.u, p.v).unwrap_or(0.0);
        }
    });
    GrayImage {
        width: cols,
        height: rows,
        data,
    }
}

impl PolarMap {
    /// True if the map covers the full circle of directions around its epipole.
    pub fn is_full_circle(&self) -> bool {
        self.full_circle()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epipolar::fundamental_from_pose;
    use crate::geometry::{CameraIntrinsics, RigidPose};

    fn forward_pair() -> (FundamentalMatrix, CameraIntrinsics) {
        let k = CameraIntrinsics::new(1000.0, 1000.0, 640.0, 360.0).unwrap();
        let rel = RigidPose {
            rotation: Matrix3::identity(),
            translation: Vector3::new(0.0, 0.0, -1.0),
        };
        (fundamental_from_pose(&rel, &k, &k).unwrap(), k)
    }

    #[test]
    fn centred_epipole_spans_full_circle() {
        let (f, _) = forward_pair();
        let dims = Dims::new(1280, 720);
        let (a, b) = build_polar_maps(&f, dims, dims).unwrap();
        assert!(a.is_full_circle() && b.is_full_circle());
        assert!((a.angle_min + PI).abs() < 1e-12 && (a.angle_max - PI).abs() < 1e-12);
        let farthest = (640.5f64).hypot(360.5);
        assert!((a.radius_max - farthest).abs() < 1e-6);
        assert_eq!(a.radius_min, 0.0);
    }

    #[test]
    fn one_pixel_right_of_epipole() {
        let (f, _) = forward_pair();
        let dims = Dims::new(1280, 720);
        let (a, _) = build_polar_maps(&f, dims, dims).unwrap();
        let PolarCenter::Epipole(e) = a.center else {
            panic!("finite epipole expected")
        };
        let q = a.to_polar(&Pixel::new(e.u + 1.0, e.v)).unwrap();
        assert!((a.angle_min + q.angle_row * a.angle_step).abs() < 1e-12);
        assert!((q.radius_col - 1.0).abs() < 1e-12);
        assert!(matches!(a.to_polar(&e), Err(Error::AtEpipole)));
    }

    #[test]
    fn exterior_epipole_subtends_less_than_half_turn() {
        let k = CameraIntrinsics::new(1000.0, 1000.0, 640.0, 360.0).unwrap();
        let rel = RigidPose {
            rotation: Matrix3::identity(),
            translation: Vector3::new(1.0, 0.0, -0.3),
        };
        let f = fundamental_from_pose(&rel, &k, &k).unwrap();
        let dims = Dims::new(1280, 720);
        let (a, b) = build_polar_maps(&f, dims, dims).unwrap();
        assert!(a.angle_max - a.angle_min < PI);
        assert!(!a.is_full_circle());
        assert!(a.radius_min > 0.0);
        assert_eq!(a.rows(), b.rows());
    }

    #[test]
    fn rectified_size_follows_ranges() {
        let (f, _) = forward_pair();
        let dims = Dims::new(160, 90);
        let (a, _) = build_polar_maps(&f, dims, dims).unwrap();
        let img = GrayImage::filled(160, 90, 0.7);
        let rect = rectify_image(&img, &a);
        assert_eq!(
            rect.height,
            ((a.angle_max - a.angle_min) / a.angle_step).ceil() as usize
        );
        assert_eq!(rect.width, a.cols());
        // Cells whose source point is inside the image keep the uniform value.
        for r in 0..rect.height {
            for c in 0..rect.width {
                let p = a.from_polar(&PolarPixel {
                    angle_row: r as f64,
                    radius_col: c as f64,
                });
                if img.sample(p.u, p.v).is_some() {
                    assert!((rect.get(c, r) - 0.7).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn arc_spanning_and_intersection() {
        let arc = Arc::spanning(&[3.0, -3.0, 3.1]);
        assert!(arc.length < 0.5);
        let other = Arc {
            start: 3.05,
            length: 1.0,
        };
        let i = arc.intersect(&other).unwrap();
        assert!((i.length - (arc.start + arc.length - 3.05)).abs() < 1e-9);
        assert!(Arc {
            start: 0.0,
            length: 0.5
        }
        .intersect(&Arc {
            start: 1.0,
            length: 0.5
        })
        .is_none());
    }
}
