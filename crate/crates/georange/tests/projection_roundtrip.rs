//! Forward projection and ground-plane back-projection are exact mutual
//! inverses over the working envelope of a dash-mounted camera.

use proptest::prelude::*;

use georange::camera::{
    camera_ray_to_pixel, pixel_to_camera_ray, project_ground_point, CameraIntrinsics, PixelPoint,
};
use georange::groundplane::{back_project, CameraExtrinsics, GroundPoint};

fn camera() -> CameraIntrinsics {
    CameraIntrinsics::from_fov(960, 720, 86.7f64.to_radians()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn ground_point_survives_projection_roundtrip(
        lateral in -10.0f64..10.0,
        forward in 5.0f64..100.0,
        pitch_deg in -10.0f64..10.0,
        height in 1.0f64..2.0,
    ) {
        let k = camera();
        let ext = CameraExtrinsics::new(pitch_deg.to_radians(), height).unwrap();
        let point = GroundPoint::new(lateral, forward);
        let proj = project_ground_point(point, &ext, &k).unwrap();
        let back = back_project(proj.pixel, &ext, &k).unwrap();
        prop_assert!((back.lateral_m - lateral).abs() < 1e-9,
            "lateral {} vs {}", back.lateral_m, lateral);
        prop_assert!((back.forward_m - forward).abs() < 1e-9,
            "forward {} vs {}", back.forward_m, forward);
    }

    #[test]
    fn ray_pixel_conversion_is_identity(
        u in -200.0f64..1200.0,
        v in -200.0f64..1000.0,
    ) {
        let k = camera();
        let p = PixelPoint::new(u, v);
        let back = camera_ray_to_pixel(pixel_to_camera_ray(p, &k), &k);
        prop_assert!((back.u - u).abs() < 1e-12 && (back.v - v).abs() < 1e-12);
    }

    #[test]
    fn below_horizon_pixels_roundtrip_through_ground(
        u in 1.0f64..959.0,
        drop in 5.0f64..350.0,
        pitch_deg in -8.0f64..8.0,
        height in 1.0f64..2.0,
    ) {
        let k = camera();
        let ext = CameraExtrinsics::new(pitch_deg.to_radians(), height).unwrap();
        let (_, h2) = k.principal();
        // Keep the pixel below the horizon for the sampled pitch.
        let horizon_drop = k.focal_px() * ext.pitch_rad.tan();
        prop_assume!(drop > horizon_drop + 5.0);
        let pixel = PixelPoint::new(u, h2 + drop);
        let ground = back_project(pixel, &ext, &k).unwrap();
        prop_assert!(ground.forward_m > 0.0);
        let proj = project_ground_point(ground, &ext, &k).unwrap();
        prop_assert!((proj.pixel.u - pixel.u).abs() < 1e-9);
        prop_assert!((proj.pixel.v - pixel.v).abs() < 1e-9);
    }
}
