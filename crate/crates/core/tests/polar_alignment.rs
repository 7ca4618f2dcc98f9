use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safedrive_core::epipolar::fundamental_from_pose;
use safedrive_core::geometry::{project, CameraIntrinsics, Pixel, Point3D, RigidPose};
use safedrive_core::image::Dims;
use safedrive_core::polar::{build_polar_maps, build_polar_maps_oriented, PolarMap};

fn correspondences(rel: &RigidPose, k: &CameraIntrinsics, dims: Dims, n: usize, seed: u64) -> (Vec<Pixel>, Vec<Pixel>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    while a.len() < n {
        let p = Point3D::new(
            rng.random_range(-12.0..12.0),
            rng.random_range(-6.0..2.0),
            rng.random_range(4.0..60.0),
        );
        let (Ok(pa), Ok(pb)) = (project(&p, &RigidPose::identity(), k), project(&p, rel, k)) else {
            continue;
        };
        if pa.depth > 0.0
            && pb.depth > 0.0
            && dims.contains(pa.pixel.u, pa.pixel.v)
            && dims.contains(pb.pixel.u, pb.pixel.v)
        {
            a.push(pa.pixel);
            b.push(pb.pixel);
        }
    }
    (a, b)
}

fn max_row_gap(ma: &PolarMap, mb: &PolarMap, a: &[Pixel], b: &[Pixel]) -> f64 {
    a.iter()
        .zip(b)
        .filter_map(|(pa, pb)| Some((ma.to_polar(pa).ok()?.angle_row - mb.to_polar(pb).ok()?.angle_row).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn rotated_forward_pair_rows_align() {
    let k = CameraIntrinsics::reference_phone();
    let dims = Dims::new(1280, 720);
    for (i, (rot, t)) in [
        (Vector3::new(0.0, 0.0, 0.0), Vector3::new(0.0, 0.0, -1.0)),
        (Vector3::new(0.004, 0.02, -0.003), Vector3::new(-0.07, 0.096, -0.99)),
        (Vector3::new(-0.01, -0.035, 0.01), Vector3::new(0.3, 0.0, -1.0)),
        (Vector3::new(0.0, 0.05, 0.0), Vector3::new(1.0, 0.1, -0.2)),
    ]
    .into_iter()
    .enumerate()
    {
        let rel = RigidPose::from_rotation_vector(rot, t);
        let f = fundamental_from_pose(&rel, &k, &k).unwrap();
        let (a, b) = correspondences(&rel, &k, dims, 500, i as u64);
        let (ma, mb) = build_polar_maps_oriented(&f, dims, dims, &a, &b).unwrap();
        let gap = max_row_gap(&ma, &mb, &a, &b);
        assert!(gap <= 1.0, "case {i}: row gap {gap}");
        if i < 3 {
            let (ha, hb) = build_polar_maps(&f, dims, dims).unwrap();
            assert!(max_row_gap(&ha, &hb, &a, &b) <= 1.0, "case {i}: heuristic orientation");
        }
        // Round trip in both maps.
        for (m, pts) in [(&ma, &a), (&mb, &b)] {
            for p in pts.iter() {
                let back = m.from_polar(&m.to_polar(p).unwrap());
                assert!(back.distance(p) < 1e-4, "case {i}: round trip {p:?} -> {back:?}");
            }
        }
    }
}
