//! Shared test fixtures: small hands and synthetic clouds that unit tests
//! across the crate reuse. Compiled only for tests.

use nalgebra::Vector3;

use crate::hand::{load_hand_spec_str, HandSpec};
use crate::object::ObjectCloud;
use crate::PointSet;

pub(crate) use crate::hand::fixtures::{pincer_hand, random_interior_state, three_finger_hand};

/// Deterministic near-uniform covering of an ellipsoid with semi-axes
/// `(a, b, c)` via the golden-angle spiral.
pub(crate) fn fibonacci_ellipsoid(n: usize, a: f64, b: f64, c: f64) -> PointSet {
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    (0..n)
        .map(|i| {
            let t = (i as f64 + 0.5) / n as f64;
            let z = 1.0 - 2.0 * t;
            let r = (1.0 - z * z).sqrt();
            let ang = std::f64::consts::TAU * (i as f64 / golden).fract();
            Vector3::new(a * r * ang.cos(), b * r * ang.sin(), c * z)
        })
        .collect()
}

/// A unit-sphere cloud whose every point is boxed in by six dedicated guard
/// spheres sitting `gap` away along the coordinate axes. The guards are
/// deliberately fat (radius 0.2): a sphere of radius R placed R + gap from a
/// point blocks every endpoint displacement of that point between roughly
/// `gap` and `2R/sqrt(3)` along the worst-case diagonal, so with the default
/// escape box (2 cm translations, 0.05 rad rotations through the one-meter
/// lever arms, under 0.13 of point motion in total) nothing in the box gets
/// past the shell. At `gap` zero every nonzero displacement collides; a
/// positive `gap` opens a free pocket whose radius is a small multiple of
/// the gap and is easy to bound by hand.
pub(crate) fn guarded_shell_scene(n_cloud: usize, gap: f64) -> (HandSpec, ObjectCloud) {
    let cloud = ObjectCloud::from_points(fibonacci_ellipsoid(n_cloud, 1.0, 1.0, 1.0)).unwrap();
    let radius = 0.2;
    let mut points = Vec::new();
    for y in cloud.points() {
        for axis in 0..3 {
            for sign in [-1.0, 1.0] {
                let mut offset = *y;
                offset[axis] += sign * (radius + gap);
                points.push(serde_json::json!({
                    "frame": 0,
                    "offset": [offset[0], offset[1], offset[2]],
                    "radius": radius,
                }));
            }
        }
    }
    let json = serde_json::json!({
        "name": "guard shell",
        "dof": 0,
        "point_count": points.len(),
        "frames": [
            {"parent": null, "fixed": {"rotvec": [0.0, 0.0, 0.0], "translation": [0.0, 0.0, 0.0]}}
        ],
        "joints": [],
        "base_limits": {
            "lower": [-1e-6, -1e-6, -1e-6, -1e-6, -1e-6, -1e-6],
            "upper": [1e-6, 1e-6, 1e-6, 1e-6, 1e-6, 1e-6]
        },
        "points": points,
        "links": [],
        "fingertip_subset": [{"point": 0, "contact_threshold": 0.001}],
        "self_collision_pairs": [],
        "palm_offset": {"rotvec": [0.0, 0.0, 0.0], "translation": [0.0, 0.0, 0.0]}
    });
    let spec = load_hand_spec_str(&json.to_string()).expect("guard shell fixture must validate");
    (spec, cloud)
}
