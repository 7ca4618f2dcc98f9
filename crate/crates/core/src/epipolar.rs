//! Fundamental-matrix estimation, epipoles and relative pose recovery.
//!
//! Convention: for a correspondence `a <-> b`, `b^T F a = 0`. The relative
//! pose returned by [`recover_relative_pose`] maps camera-A coordinates into
//! camera B: `X_b = R X_a + t`.

use nalgebra::{DMatrix, Matrix3, SMatrix, SVector, Vector2, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{parallax_angle, skew, triangulate_point, CameraIntrinsics, Pixel, RigidPose};

const MIN_CORRESPONDENCES: usize = 8;
const EPIPOLE_MIN_W: f64 = 1e-10;

/// Rank-2 fundamental matrix with unit Frobenius norm and its largest-magnitude entry positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FundamentalMatrix {
    m: Matrix3<f64>,
}

impl FundamentalMatrix {
    /// Enforces rank 2 (smallest singular value zeroed) and canonical scaling.
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) || m.norm() == 0.0 {
            return Err(Error::DegenerateConfiguration(
                "fundamental matrix is zero or not finite",
            ));
        }
        let svd = m.svd(true, true);
        let (u, v_t) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
        let min = svd.singular_values.imin();
        // Removing only the smallest component leaves an exact rank-2 input untouched.
        let rank2 = m - svd.singular_values[min] * u.column(min) * v_t.row(min);
        Ok(Self {
            m: canonical_scale(&rank2),
        })
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn transpose(&self) -> Self {
        Self {
            m: canonical_scale(&self.m.transpose()),
        }
    }

    /// Epipolar line in image B of pixel `a` in image A.
    pub fn line_in_b(&self, a: &Pixel) -> Vector3<f64> {
        self.m * a.homogeneous()
    }

    /// Epipolar line in image A of pixel `b` in image B.
    pub fn line_in_a(&self, b: &Pixel) -> Vector3<f64> {
        self.m.transpose() * b.homogeneous()
    }

    /// First-order geometric distance of a correspondence from the epipolar constraint, in pixels.
    pub fn sampson_distance(&self, a: &Pixel, b: &Pixel) -> f64 {
        let (xa, xb) = (a.homogeneous(), b.homogeneous());
        let fx = self.m * xa;
        let ftx = self.m.transpose() * xb;
        let num = xb.dot(&fx);
        let den = fx.x * fx.x + fx.y * fx.y + ftx.x * ftx.x + ftx.y * ftx.y;
        if den <= 0.0 {
            return f64::INFINITY;
        }
        (num * num / den).sqrt()
    }

    /// Absolute cosine between the vectorized matrices (scale and sign free).
    pub fn cosine_similarity(&self, other: &Matrix3<f64>) -> f64 {
        (self.m.dot(other) / (self.m.norm() * other.norm())).abs()
    }
}

fn canonical_scale(m: &Matrix3<f64>) -> Matrix3<f64> {
    let n = m / m.norm();
    let largest = n
        .iter()
        .copied()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(1.0);
    if largest < 0.0 {
        -n
    } else {
        n
    }
}

/// `F = K_b^-T [t]x R K_a^-1` for the relative pose `X_b = R X_a + t`.
pub fn fundamental_from_pose(
    relative: &RigidPose,
    k_a: &CameraIntrinsics,
    k_b: &CameraIntrinsics,
) -> Result<FundamentalMatrix> {
    let e = skew(&relative.translation) * relative.rotation;
    FundamentalMatrix::new(k_b.inverse_matrix().transpose() * e * k_a.inverse_matrix())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FundamentalRansac {
    /// Sampson inlier threshold, pixels.
    pub threshold: f64,
    pub confidence: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for FundamentalRansac {
    fn default() -> Self {
        Self {
            threshold: 1.0,
            confidence: 0.999,
            max_iterations: 2000,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpipolarEstimate {
    pub f: FundamentalMatrix,
    pub inlier_indices: Vec<usize>,
    /// Sampson distance of every input correspondence under `f`.
    pub residuals: Vec<f64>,
}

/// Normalized eight-point inside RANSAC, re-fit on the consensus set.
pub fn estimate_fundamental(
    pixels_a: &[Pixel],
    pixels_b: &[Pixel],
    params: &FundamentalRansac,
) -> Result<EpipolarEstimate> {
    assert_eq!(pixels_a.len(), pixels_b.len(), "correspondence lists differ in length");
    let n = pixels_a.len();
    if n < MIN_CORRESPONDENCES {
        return Err(Error::InsufficientMatches {
            needed: MIN_CORRESPONDENCES,
            got: n,
        });
    }
    if is_collinear(pixels_a) || is_collinear(pixels_b) {
        return Err(Error::DegenerateConfiguration("correspondences are collinear"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(FundamentalMatrix, usize)> = None;
    let mut needed = params.max_iterations;
    let mut iteration = 0;
    let (mut sa, mut sb) = (Vec::with_capacity(8), Vec::with_capacity(8));
    while iteration < needed.min(params.max_iterations) {
        iteration += 1;
        sa.clear();
        sb.clear();
        for i in sample(&mut rng, n, MIN_CORRESPONDENCES).iter() {
            sa.push(pixels_a[i]);
            sb.push(pixels_b[i]);
        }
        let Ok(f) = eight_point(&sa, &sb) else { continue };
        let count = count_inliers(&f, pixels_a, pixels_b, params.threshold);
        if best.as_ref().is_none_or(|(_, c)| count > *c) {
            best = Some((f, count));
            let w = count as f64 / n as f64;
            needed = iterations_needed(w, MIN_CORRESPONDENCES, params.confidence).min(params.max_iterations);
        }
    }
    let (mut f, mut count) = best.ok_or(Error::DegenerateConfiguration("no non-degenerate sample"))?;

    // Re-fit on the consensus set until it stops growing.
    for _ in 0..5 {
        let inliers = inlier_indices(&f, pixels_a, pixels_b, params.threshold);
        if inliers.len() < MIN_CORRESPONDENCES {
            break;
        }
        let ia: Vec<Pixel> = inliers.iter().map(|&i| pixels_a[i]).collect();
        let ib: Vec<Pixel> = inliers.iter().map(|&i| pixels_b[i]).collect();
        let Ok(refit) = eight_point(&ia, &ib) else { break };
        let refit_count = count_inliers(&refit, pixels_a, pixels_b, params.threshold);
        if refit_count < count {
            break;
        }
        let grew = refit_count > count;
        f = refit;
        count = refit_count;
        if !grew {
            break;
        }
    }

    let residuals: Vec<f64> = pixels_a
        .iter()
        .zip(pixels_b)
        .map(|(a, b)| f.sampson_distance(a, b))
        .collect();
    let inlier_indices: Vec<usize> = (0..n).filter(|&i| residuals[i] <= params.threshold).collect();
    if inlier_indices.len() < MIN_CORRESPONDENCES {
        return Err(Error::InsufficientMatches {
            needed: MIN_CORRESPONDENCES,
            got: inlier_indices.len(),
        });
    }
    Ok(EpipolarEstimate {
        f,
        inlier_indices,
        residuals,
    })
}

pub(crate) fn iterations_needed(inlier_ratio: f64, sample_size: usize, confidence: f64) -> usize {
    let p = inlier_ratio.powi(sample_size as i32);
    if p >= 1.0 - 1e-12 {
        return 1;
    }
    if p <= 0.0 {
        return usize::MAX;
    }
    // ln_1p keeps tiny sample probabilities from rounding `1 - p` to 1.
    let n = ((1.0 - confidence).ln() / (-p).ln_1p()).ceil();
    if n.is_finite() {
        n.max(1.0) as usize
    } else {
        usize::MAX
    }
}

fn count_inliers(f: &FundamentalMatrix, a: &[Pixel], b: &[Pixel], threshold: f64) -> usize {
    a.iter()
        .zip(b)
        .filter(|(a, b)| f.sampson_distance(a, b) <= threshold)
        .count()
}

fn inlier_indices(f: &FundamentalMatrix, a: &[Pixel], b: &[Pixel], threshold: f64) -> Vec<usize> {
    (0..a.len())
        .filter(|&i| f.sampson_distance(&a[i], &b[i]) <= threshold)
        .collect()
}

fn is_collinear(points: &[Pixel]) -> bool {
    let n = points.len() as f64;
    let mean = points.iter().fold(Vector2::zeros(), |acc, p| acc + p.to_vector()) / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let d = p.to_vector() - mean;
        sxx += d.x * d.x;
        syy += d.y * d.y;
        sxy += d.x * d.y;
    }
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let (lmax, lmin) = (tr / 2.0 + disc, tr / 2.0 - disc);
    lmax <= 0.0 || lmin <= 1e-12 * lmax
}

/// Similarity that moves the centroid to the origin and the RMS distance to sqrt(2).
fn hartley_normalization(points: &[Pixel]) -> (Matrix3<f64>, Vec<Vector2<f64>>) {
    let n = points.len() as f64;
    let mean = points.iter().fold(Vector2::zeros(), |acc, p| acc + p.to_vector()) / n;
    let rms = (points
        .iter()
        .map(|p| (p.to_vector() - mean).norm_squared())
        .sum::<f64>()
        / n)
        .sqrt();
    let s = if rms > 0.0 { std::f64::consts::SQRT_2 / rms } else { 1.0 };
    let t = Matrix3::new(s, 0.0, -s * mean.x, 0.0, s, -s * mean.y, 0.0, 0.0, 1.0);
    let normalized = points.iter().map(|p| (p.to_vector() - mean) * s).collect();
    (t, normalized)
}

/// Normalized eight-point solve over all given correspondences.
pub fn eight_point(a: &[Pixel], b: &[Pixel]) -> Result<FundamentalMatrix> {
    if a.len() < MIN_CORRESPONDENCES {
        return Err(Error::InsufficientMatches {
            needed: MIN_CORRESPONDENCES,
            got: a.len(),
        });
    }
    let (ta, na) = hartley_normalization(a);
    let (tb, nb) = hartley_normalization(b);
    let rows = na.len().max(9);
    let mut design = DMatrix::<f64>::zeros(rows, 9);
    for (i, (pa, pb)) in na.iter().zip(&nb).enumerate() {
        let row = [
            pb.x * pa.x,
            pb.x * pa.y,
            pb.x,
            pb.y * pa.x,
            pb.y * pa.y,
            pb.y,
            pa.x,
            pa.y,
            1.0,
        ];
        for (j, v) in row.into_iter().enumerate() {
            design[(i, j)] = v;
        }
    }
    let svd = design.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::DegenerateConfiguration("svd failed"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let (smallest, second) = (order[0], order[1]);
    let largest = svd.singular_values[order[order.len() - 1]];
    if svd.singular_values[second] <= 1e-10 * largest {
        return Err(Error::DegenerateConfiguration(
            "eight-point system has a multi-dimensional null space",
        ));
    }
    let f = v_t.row(smallest);
    let fhat = Matrix3::new(f[0], f[1], f[2], f[3], f[4], f[5], f[6], f[7], f[8]);
    // Rank 2 must be enforced in normalized coordinates before undoing the normalization.
    let fhat = *FundamentalMatrix::new(fhat)?.matrix();
    FundamentalMatrix::new(tb.transpose() * fhat * ta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpipoleSide {
    /// Null vector of F, lying in image A.
    Right,
    /// Null vector of F^T, lying in image B.
    Left,
}

/// Unit-norm homogeneous epipole.
pub fn epipole_homogeneous(f: &FundamentalMatrix, which: EpipoleSide) -> Vector3<f64> {
    let svd = f.matrix().svd(true, true);
    let idx = svd.singular_values.imin();
    let e: Vector3<f64> = match which {
        EpipoleSide::Right => svd.v_t.expect("v_t").row(idx).transpose(),
        EpipoleSide::Left => svd.u.expect("u").column(idx).into_owned(),
    };
    let e = e.normalize();
    if e.z < 0.0 {
        -e
    } else {
        e
    }
}

pub fn epipole_of(f: &FundamentalMatrix, which: EpipoleSide) -> Result<Pixel> {
    let e = epipole_homogeneous(f, which);
    if e.z.abs() < EPIPOLE_MIN_W {
        let d = Vector2::new(e.x, e.y).normalize();
        return Err(Error::EpipoleAtInfinity { direction: [d.x, d.y] });
    }
    Ok(Pixel::new(e.x / e.z, e.y / e.z))
}

/// The four (R, t) factorizations of an essential matrix, `t` unit length.
pub fn decompose_essential(e: &Matrix3<f64>) -> [RigidPose; 4] {
    let svd = e.svd(true, true);
    let mut u = svd.u.expect("u");
    let mut v_t = svd.v_t.expect("v_t");
    // Order columns so the zero singular value comes last.
    let idx = svd.singular_values.imin();
    if idx != 2 {
        u.swap_columns(idx, 2);
        v_t.swap_rows(idx, 2);
    }
    if u.determinant() < 0.0 {
        u = -u;
    }
    if v_t.determinant() < 0.0 {
        v_t = -v_t;
    }
    let w = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let r1 = u * w * v_t;
    let r2 = u * w.transpose() * v_t;
    let t = u.column(2).normalize();
    [
        RigidPose {
            rotation: r1,
            translation: t,
        },
        RigidPose {
            rotation: r1,
            translation: -t,
        },
        RigidPose {
            rotation: r2,
            translation: t,
        },
        RigidPose {
            rotation: r2,
            translation: -t,
        },
    ]
}

/// Fraction of inlier votes the winning decomposition must collect.
pub const CHEIRALITY_MAJORITY: f64 = 0.75;

/// Ray angle, in pixels of focal length, below which a point abstains from
/// the cheirality vote: near-infinite points land in front or behind by noise.
const VOTE_MIN_PARALLAX_PX: f64 = 2.0;

/// Decomposes `E = K^T F K` and keeps the candidate that places the most
/// correspondences in front of both cameras. Translation has unit norm.
/// Points with negligible parallax do not vote; the winner needs
/// [`CHEIRALITY_MAJORITY`] of the remaining votes.
pub fn recover_relative_pose(
    f: &FundamentalMatrix,
    k: &CameraIntrinsics,
    inlier_pixels_a: &[Pixel],
    inlier_pixels_b: &[Pixel],
) -> Result<RigidPose> {
    assert_eq!(inlier_pixels_a.len(), inlier_pixels_b.len());
    let total = inlier_pixels_a.len();
    if total == 0 {
        return Err(Error::InsufficientMatches { needed: 1, got: 0 });
    }
    let km = k.matrix();
    let e = km.transpose() * f.matrix() * km;
    let identity = RigidPose::identity();
    let min_parallax = VOTE_MIN_PARALLAX_PX / k.fx.max(k.fy);
    let mut best: Option<(RigidPose, usize, usize)> = None;
    for candidate in decompose_essential(&e) {
        let (mut votes, mut cast) = (0, 0);
        for (a, b) in inlier_pixels_a.iter().zip(inlier_pixels_b) {
            if parallax_angle(a, b, &identity, &candidate, k) < min_parallax {
                continue;
            }
            cast += 1;
            if triangulate_point(a, b, &identity, &candidate, k).is_ok_and(|t| t.in_front) {
                votes += 1;
            }
        }
        if best.as_ref().is_none_or(|(_, v, _)| votes > *v) {
            best = Some((candidate, votes, cast));
        }
    }
    let (pose, votes, cast) = best.expect("four candidates");
    if votes == 0 || (votes as f64) < CHEIRALITY_MAJORITY * cast as f64 {
        return Err(Error::CheiralityAmbiguous {
            best: votes,
            total: cast,
        });
    }
    Ok(RigidPose {
        rotation: RigidPose::orthonormalize(&pose.rotation),
        translation: pose.translation.normalize(),
    })
}

/// Signed Sampson residual of `b^T E' a` where `E'` is the pixel-space F of a pose.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativePoseEstimate {
    /// Maps view-a coordinates to view-b coordinates, with unit translation.
    pub pose: RigidPose,
    /// Correspondences within the threshold of the refined geometry.
    pub inlier_indices: Vec<usize>,
}

/// Refinement draws on correspondences within this multiple of the inlier
/// threshold; the Cauchy loss handles the wider tail.
const REFINE_GATE_FACTOR: f64 = 3.0;

/// Recovers the pose from a RANSAC estimate and refines it, then re-gathers
/// correspondences from the full set under the refined geometry and refines
/// again until that set settles. The RANSAC consensus was chosen under an
/// unrefined `F`: it can hold a gross mismatch that `F` happened to fit while
/// missing good matches that disagree with it, and refining on that set alone
/// can settle on the same error.
pub fn estimate_relative_pose(
    estimate: &EpipolarEstimate,
    k: &CameraIntrinsics,
    pixels_a: &[Pixel],
    pixels_b: &[Pixel],
    threshold: f64,
) -> Result<RelativePoseEstimate> {
    let k_inv = k.inverse_matrix();
    let pick = |idx: &[usize]| -> (Vec<Pixel>, Vec<Pixel>) { idx.iter().map(|&i| (pixels_a[i], pixels_b[i])).unzip() };
    let within = |pose: &RigidPose, gate: f64| -> Vec<usize> {
        let f = pose_fundamental(pose, &k_inv);
        (0..pixels_a.len())
            .filter(|&i| sampson_signed(&f, &pixels_a[i], &pixels_b[i]).abs() <= gate)
            .collect()
    };
    let (in_a, in_b) = pick(&estimate.inlier_indices);
    let coarse = recover_relative_pose(&estimate.f, k, &in_a, &in_b)?;
    let mut pose = refine_relative_pose(&coarse, k, &in_a, &in_b);
    let mut support = estimate.inlier_indices.clone();
    for _ in 0..3 {
        let gathered = within(&pose, REFINE_GATE_FACTOR * threshold);
        if gathered == support || gathered.len() < MIN_CORRESPONDENCES {
            break;
        }
        support = gathered;
        let (a, b) = pick(&support);
        pose = refine_relative_pose(&pose, k, &a, &b);
    }
    let inlier_indices = within(&pose, threshold);
    if inlier_indices.len() < MIN_CORRESPONDENCES {
        return Err(Error::InsufficientMatches {
            needed: MIN_CORRESPONDENCES,
            got: inlier_indices.len(),
        });
    }
    Ok(RelativePoseEstimate { pose, inlier_indices })
}

fn sampson_signed(f: &Matrix3<f64>, a: &Pixel, b: &Pixel) -> f64 {
    let (xa, xb) = (a.homogeneous(), b.homogeneous());
    let fa = f * xa;
    let ftb = f.transpose() * xb;
    let denom = fa.x * fa.x + fa.y * fa.y + ftb.x * ftb.x + ftb.y * ftb.y;
    if denom <= 0.0 {
        return 0.0;
    }
    xb.dot(&fa) / denom.sqrt()
}

fn pose_fundamental(pose: &RigidPose, k_inv: &Matrix3<f64>) -> Matrix3<f64> {
    k_inv.transpose() * skew(&pose.translation) * pose.rotation * k_inv
}

/// Two unit vectors completing `t` to an orthonormal basis.
fn tangent_basis(t: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if t.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = t.cross(&helper).normalize();
    (u, t.cross(&u))
}

/// Applies a 5-vector update: rotation vector (left-multiplied) and a
/// tangent step of the unit translation.
fn perturb(pose: &RigidPose, d: &SVector<f64, 5>) -> RigidPose {
    let r = RigidPose::from_rotation_vector(Vector3::new(d[0], d[1], d[2]), Vector3::zeros()).rotation;
    let (u, w) = tangent_basis(&pose.translation);
    RigidPose {
        rotation: RigidPose::orthonormalize(&(r * pose.rotation)),
        translation: (pose.translation + u * d[3] + w * d[4]).normalize(),
    }
}

/// Cauchy scale as a multiple of the robust residual spread.
const ROBUST_SCALE_FACTOR: f64 = 2.0;
const MIN_ROBUST_SCALE: f64 = 0.05;

/// Levenberg-Marquardt on the Sampson distance over the five degrees of
/// freedom of a calibrated relative pose (unit translation), under a Cauchy
/// loss. Fitting E rather than F keeps the epipolar geometry constrained in
/// image regions without correspondences; the loss limits the pull of
/// repeated-structure mismatches that survive the inlier threshold.
/// Returns the input if nothing improves.
pub fn refine_relative_pose(
    pose: &RigidPose,
    k: &CameraIntrinsics,
    pixels_a: &[Pixel],
    pixels_b: &[Pixel],
) -> RigidPose {
    assert_eq!(pixels_a.len(), pixels_b.len());
    let k_inv = k.inverse_matrix();
    let residuals = |p: &RigidPose| -> Vec<f64> {
        let f = pose_fundamental(p, &k_inv);
        pixels_a
            .iter()
            .zip(pixels_b)
            .map(|(a, b)| sampson_signed(&f, a, b))
            .collect()
    };
    let mut best = RigidPose {
        rotation: pose.rotation,
        translation: pose.translation.normalize(),
    };
    let mut r = residuals(&best);
    if r.is_empty() {
        return best;
    }
    let mut abs: Vec<f64> = r.iter().map(|x| x.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let c = (ROBUST_SCALE_FACTOR * 1.4826 * abs[abs.len() / 2]).max(MIN_ROBUST_SCALE);
    let cost = |r: &[f64]| r.iter().map(|x| (1.0 + (x / c).powi(2)).ln()).sum::<f64>();
    let mut current = cost(&r);
    let mut mu = 1e-3;
    const H: f64 = 1e-7;
    for _ in 0..50 {
        let mut jac = vec![[0.0; 5]; r.len()];
        for j in 0..5 {
            let mut d = SVector::<f64, 5>::zeros();
            d[j] = H;
            let plus = residuals(&perturb(&best, &d));
            d[j] = -H;
            let minus = residuals(&perturb(&best, &d));
            for (row, (p, m)) in jac.iter_mut().zip(plus.iter().zip(&minus)) {
                row[j] = (p - m) / (2.0 * H);
            }
        }
        let mut jtj = SMatrix::<f64, 5, 5>::zeros();
        let mut jtr = SVector::<f64, 5>::zeros();
        for (row, ri) in jac.iter().zip(&r) {
            let w = 1.0 / (1.0 + (ri / c).powi(2));
            let jv = SVector::<f64, 5>::from_column_slice(row);
            jtj += jv * jv.transpose() * w;
            jtr += jv * (w * ri);
        }
        let mut improved = false;
        for _ in 0..10 {
            let mut damped = jtj;
            for i in 0..5 {
                damped[(i, i)] += mu * jtj[(i, i)].max(1e-12);
            }
            let Some(step) = damped.cholesky().map(|ch| ch.solve(&(-jtr))) else {
                mu *= 10.0;
                continue;
            };
            let candidate = perturb(&best, &step);
            let rc = residuals(&candidate);
            let cc = cost(&rc);
            if cc < current {
                let gain = current - cc;
                best = candidate;
                r = rc;
                current = cc;
                mu = (mu * 0.3).max(1e-12);
                improved = gain > 1e-12 * current.max(1e-30);
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    best
}
