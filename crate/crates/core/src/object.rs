//! Target object model: a point cloud sampled from the object surface, the
//! bounded displacement twist the adversary controls, and loaders for the
//! simple cloud file formats the tool ships with.
//!
//! The adversary never moves the object arbitrarily; its six displacement
//! coordinates live in a box `[-eps, eps]` (meters for translation, radians
//! for rotation) and are produced from unconstrained coordinates through the
//! same logistic squash the hand uses, so the inner solvers stay
//! unconstrained.

use nalgebra::{SMatrix, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::Error;
use crate::hand::{sigmoid, squash_scalar_derivative};
use crate::se3::{ExpActionJacobian, Twist};
use crate::{PointSet, Result};

/// Minimum number of cloud points: anything less cannot define an object
/// frame, let alone a cage.
pub const MIN_CLOUD_POINTS: usize = 4;

/// Surface point cloud, re-centered so its centroid is the origin of the
/// object frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectCloud {
    points: PointSet,
}

impl ObjectCloud {
    /// Validates and re-centers a raw point set.
    pub fn from_points(mut points: PointSet) -> Result<Self> {
        if points.len() < MIN_CLOUD_POINTS {
            return Err(Error::Cloud(format!(
                "need at least {MIN_CLOUD_POINTS} points, got {}",
                points.len()
            )));
        }
        if !points.iter().all(|p| p.iter().all(|x| x.is_finite())) {
            return Err(Error::Cloud("cloud has non-finite coordinates".into()));
        }
        let centroid = points.iter().sum::<Vector3<f64>>() / points.len() as f64;
        for p in &mut points {
            *p -= centroid;
        }
        Ok(ObjectCloud { points })
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest distance from the centroid to any point.
    pub fn radius(&self) -> f64 {
        self.points.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }
}

/// Box bounds on the object displacement twist: translation coordinates in
/// `[-translation, translation]` meters, rotation coordinates in
/// `[-rotation, rotation]` radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscapeBounds {
    pub translation: f64,
    pub rotation: f64,
}

impl Default for EscapeBounds {
    fn default() -> Self {
        EscapeBounds {
            translation: 0.02,
            rotation: 0.05,
        }
    }
}

impl EscapeBounds {
    pub fn validate(&self) -> Result<()> {
        if !(self.translation.is_finite() && self.translation > 0.0)
            || !(self.rotation.is_finite() && self.rotation > 0.0)
        {
            return Err(Error::OutOfBounds(format!(
                "escape bounds must be positive and finite, got translation {} rotation {}",
                self.translation, self.rotation
            )));
        }
        Ok(())
    }

    /// Per-coordinate half-widths in twist order (translation first).
    pub fn as_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.translation,
            self.translation,
            self.translation,
            self.rotation,
            self.rotation,
            self.rotation,
        )
    }

    /// Whether a twist sits inside the box (boundary counts as inside).
    pub fn contains(&self, twist: &Twist) -> bool {
        let eps = self.as_vector();
        let d = twist.to_vector6();
        (0..6).all(|i| d[i].abs() <= eps[i])
    }
}

/// Unconstrained coordinates for the object displacement, length 6.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectVariable {
    pub omega: Vector6<f64>,
}

impl ObjectVariable {
    pub fn zeros() -> Self {
        ObjectVariable {
            omega: Vector6::zeros(),
        }
    }
}

/// Maps unconstrained coordinates to a displacement twist strictly inside
/// the escape box. Zero coordinates map to the exactly-zero twist.
pub fn squash_object(bounds: &EscapeBounds, var: &ObjectVariable) -> Result<Twist> {
    if !var.omega.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite {
            context: "squash_object",
        });
    }
    let eps = bounds.as_vector();
    let d = Vector6::from_fn(|i, _| {
        let e = eps[i];
        let x = 2.0 * e * sigmoid(var.omega[i]) - e;
        // The sigmoid saturates in floating point around |w| ~ 37; keep the
        // displacement strictly inside the box for every finite input.
        x.clamp((-e).next_up(), e.next_down())
    });
    Ok(Twist::from_vector6(&d))
}

/// Per-coordinate derivative of [`squash_object`] with respect to omega.
pub fn squash_object_derivative(bounds: &EscapeBounds, var: &ObjectVariable) -> Vector6<f64> {
    let eps = bounds.as_vector();
    Vector6::from_fn(|i, _| squash_scalar_derivative(-eps[i], eps[i], var.omega[i]))
}

/// Cloud points displaced by the twist `delta`, plus the context needed for
/// per-point derivatives with respect to the twist coordinates.
pub struct DisplacedCloud {
    pub points: PointSet,
    jac: ExpActionJacobian,
}

impl DisplacedCloud {
    /// Jacobian of displaced point `n` with respect to the six twist
    /// coordinates.
    pub fn point_jacobian(&self, n: usize) -> SMatrix<f64, 3, 6> {
        self.jac.point_jacobian(&self.points[n])
    }
}

/// Applies the rigid displacement `exp(delta)` to every cloud point.
pub fn transform_object(cloud: &ObjectCloud, delta: &Twist) -> Result<DisplacedCloud> {
    let jac = ExpActionJacobian::new(delta)?;
    let points = cloud
        .points
        .iter()
        .map(|p| jac.transform.apply(p))
        .collect();
    Ok(DisplacedCloud { points, jac })
}

// ---------------------------------------------------------------------------
// File loading
// ---------------------------------------------------------------------------

/// Reads a cloud file (`.xyz` or ASCII `.ply`) and keeps at most `target`
/// points via farthest-point subsampling.
///
/// Subsampling is deterministic: it seeds with the point farthest from the
/// centroid and always prefers the lowest index among ties, so repeated runs
/// load bit-identical clouds.
pub fn load_object_cloud(path: &Path, target: Option<usize>) -> Result<ObjectCloud> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    let points = match ext.as_deref() {
        Some("ply") => parse_ply(&text)?,
        _ => parse_xyz(&text)?,
    };
    let points = match target {
        Some(n) => subsample_farthest(points, n)?,
        None => points,
    };
    ObjectCloud::from_points(points)
}

/// Parses whitespace-separated `x y z` lines; `#` starts a comment.
pub fn parse_xyz(text: &str) -> Result<PointSet> {
    let mut points = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 3 {
            return Err(Error::Cloud(format!(
                "line {}: expected three coordinates, got {:?}",
                lineno + 1,
                line
            )));
        }
        let mut p = Vector3::zeros();
        for (i, f) in fields[..3].iter().enumerate() {
            p[i] = f.parse::<f64>().map_err(|_| {
                Error::Cloud(format!(
                    "line {}: cannot parse `{f}` as a number",
                    lineno + 1
                ))
            })?;
        }
        points.push(p);
    }
    Ok(points)
}

/// Parses an ASCII PLY file, reading the x/y/z properties of the vertex
/// element and ignoring everything else.
pub fn parse_ply(text: &str) -> Result<PointSet> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(Error::Cloud("missing `ply` magic line".into()));
    }

    let mut vertex_count: Option<usize> = None;
    let mut in_vertex_element = false;
    // Column index for x, y, z among the vertex properties.
    let mut coord_cols: [Option<usize>; 3] = [None; 3];
    let mut prop_index = 0usize;
    let mut format_seen = false;
    for raw in lines.by_ref() {
        let line = raw.trim();
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.first().copied() {
            Some("format") => {
                if fields.get(1) != Some(&"ascii") {
                    return Err(Error::Cloud(format!(
                        "only ascii format is supported, got {line:?}"
                    )));
                }
                format_seen = true;
            }
            Some("comment") | Some("obj_info") => {}
            Some("element") => {
                in_vertex_element = fields.get(1) == Some(&"vertex");
                if in_vertex_element {
                    let n = fields
                        .get(2)
                        .and_then(|s| s.parse::<usize>().ok())
                        .ok_or_else(|| Error::Cloud(format!("bad vertex element line {line:?}")))?;
                    vertex_count = Some(n);
                    prop_index = 0;
                }
            }
            Some("property") if in_vertex_element => {
                match fields.last().copied() {
                    Some("x") => coord_cols[0] = Some(prop_index),
                    Some("y") => coord_cols[1] = Some(prop_index),
                    Some("z") => coord_cols[2] = Some(prop_index),
                    _ => {}
                }
                prop_index += 1;
            }
            Some("property") => {}
            Some("end_header") => break,
            _ => {
                return Err(Error::Cloud(format!("unexpected header line {line:?}")));
            }
        }
    }
    if !format_seen {
        return Err(Error::Cloud("header missing `format ascii` line".into()));
    }
    let count = vertex_count.ok_or_else(|| Error::Cloud("header has no vertex element".into()))?;
    let [Some(cx), Some(cy), Some(cz)] = coord_cols else {
        return Err(Error::Cloud("vertex element lacks x/y/z properties".into()));
    };

    let mut points = Vec::with_capacity(count);
    for raw in lines {
        if points.len() == count {
            break;
        }
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let mut p = Vector3::zeros();
        for (axis, col) in [cx, cy, cz].into_iter().enumerate() {
            let f = fields.get(col).ok_or_else(|| {
                Error::Cloud(format!("vertex row {:?} is missing column {col}", line))
            })?;
            p[axis] = f
                .parse::<f64>()
                .map_err(|_| Error::Cloud(format!("cannot parse `{f}` as a number")))?;
        }
        points.push(p);
    }
    if points.len() != count {
        return Err(Error::Cloud(format!(
            "header promised {count} vertices but file has {}",
            points.len()
        )));
    }
    Ok(points)
}

/// Greedy farthest-point subsampling; keeps all points when `target` is not
/// smaller than the input.
pub fn subsample_farthest(points: PointSet, target: usize) -> Result<PointSet> {
    if target < MIN_CLOUD_POINTS {
        return Err(Error::Cloud(format!(
            "subsample target {target} is below the minimum of {MIN_CLOUD_POINTS}"
        )));
    }
    if points.len() <= target {
        return Ok(points);
    }
    let centroid = points.iter().sum::<Vector3<f64>>() / points.len() as f64;
    // Seed with the point farthest from the centroid, lowest index on ties.
    let mut seed = 0;
    let mut best = f64::NEG_INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = (p - centroid).norm_squared();
        if d > best {
            best = d;
            seed = i;
        }
    }

    let mut chosen = Vec::with_capacity(target);
    let mut min_dist = vec![f64::INFINITY; points.len()];
    let mut current = seed;
    chosen.push(seed);
    while chosen.len() < target {
        let mut next = usize::MAX;
        let mut far = f64::NEG_INFINITY;
        for (i, p) in points.iter().enumerate() {
            let d = (p - points[current]).norm_squared();
            if d < min_dist[i] {
                min_dist[i] = d;
            }
            if min_dist[i] > far && !chosen.contains(&i) {
                far = min_dist[i];
                next = i;
            }
        }
        chosen.push(next);
        current = next;
    }
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| points[i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_cloud(n: usize, rng: &mut StdRng) -> PointSet {
        (0..n)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect()
    }

    #[test]
    fn from_points_recenteres_cloud() {
        let mut rng = StdRng::seed_from_u64(11);
        let cloud = ObjectCloud::from_points(random_cloud(50, &mut rng)).unwrap();
        let centroid = cloud.points().iter().sum::<Vector3<f64>>() / 50.0;
        assert!(centroid.norm() < 1e-12);
    }

    #[test]
    fn from_points_rejects_tiny_and_nonfinite() {
        let p = vec![Vector3::zeros(); 3];
        assert!(ObjectCloud::from_points(p).is_err());
        let mut p = vec![Vector3::zeros(); 5];
        p[2][1] = f64::NAN;
        assert!(ObjectCloud::from_points(p).is_err());
    }

    #[test]
    fn squash_zero_gives_exactly_zero_twist() {
        let bounds = EscapeBounds::default();
        let d = squash_object(&bounds, &ObjectVariable::zeros()).unwrap();
        assert_eq!(d.to_vector6(), Vector6::zeros());
    }

    #[test]
    fn squash_saturated_stays_strictly_inside_box() {
        let bounds = EscapeBounds {
            translation: 0.02,
            rotation: 0.05,
        };
        let eps = bounds.as_vector();
        for w in [-1e9, -50.0, 50.0, 1e9] {
            let var = ObjectVariable {
                omega: Vector6::from_element(w),
            };
            let d = squash_object(&bounds, &var).unwrap().to_vector6();
            for i in 0..6 {
                assert!(d[i].abs() < eps[i], "coordinate {i} reached the bound");
                assert!(eps[i] - d[i].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn squash_derivative_matches_finite_differences() {
        let bounds = EscapeBounds::default();
        let mut rng = StdRng::seed_from_u64(21);
        let h = 1e-6;
        for _ in 0..50 {
            let omega = Vector6::from_fn(|_, _| rng.random_range(-4.0..4.0));
            let var = ObjectVariable { omega };
            let grad = squash_object_derivative(&bounds, &var);
            for i in 0..6 {
                let mut op = omega;
                op[i] += h;
                let mut om = omega;
                om[i] -= h;
                let dp = squash_object(&bounds, &ObjectVariable { omega: op })
                    .unwrap()
                    .to_vector6();
                let dm = squash_object(&bounds, &ObjectVariable { omega: om })
                    .unwrap()
                    .to_vector6();
                let fd = (dp[i] - dm[i]) / (2.0 * h);
                assert_relative_eq!(grad[i], fd, epsilon = 1e-8, max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn transform_object_matches_per_point_exponential() {
        let mut rng = StdRng::seed_from_u64(31);
        let cloud = ObjectCloud::from_points(random_cloud(20, &mut rng)).unwrap();
        let d = Twist {
            v: Vector3::new(0.01, -0.02, 0.005),
            w: Vector3::new(0.03, 0.02, -0.04),
        };
        let displaced = transform_object(&cloud, &d).unwrap();
        let t = crate::se3::twist_exp(&d).unwrap();
        for (orig, moved) in cloud.points().iter().zip(&displaced.points) {
            assert_relative_eq!(t.apply(orig), *moved, epsilon = 1e-14);
        }
    }

    #[test]
    fn displaced_point_jacobian_matches_finite_differences() {
        let mut rng = StdRng::seed_from_u64(41);
        let cloud = ObjectCloud::from_points(random_cloud(8, &mut rng)).unwrap();
        let base = Vector6::new(0.004, -0.002, 0.001, 0.02, -0.015, 0.03);
        let displaced = transform_object(&cloud, &Twist::from_vector6(&base)).unwrap();
        let h = 1e-7;
        for n in 0..cloud.len() {
            let jac = displaced.point_jacobian(n);
            for c in 0..6 {
                let mut dp = base;
                dp[c] += h;
                let mut dm = base;
                dm[c] -= h;
                let pp = transform_object(&cloud, &Twist::from_vector6(&dp))
                    .unwrap()
                    .points[n];
                let pm = transform_object(&cloud, &Twist::from_vector6(&dm))
                    .unwrap()
                    .points[n];
                let fd = (pp - pm) / (2.0 * h);
                for r in 0..3 {
                    assert_relative_eq!(jac[(r, c)], fd[r], epsilon = 1e-6, max_relative = 1e-5);
                }
            }
        }
    }

    #[test]
    fn xyz_parser_reads_comments_and_blanks() {
        let text = "# a cloud\n0.1 0.2 0.3\n\n0.4 0.5 0.6 # trailing\n0 0 1\n1 0 0\n";
        let pts = parse_xyz(text).unwrap();
        assert_eq!(pts.len(), 4);
        assert_relative_eq!(pts[1], Vector3::new(0.4, 0.5, 0.6));
        assert!(parse_xyz("0.1 0.2\n").is_err());
        assert!(parse_xyz("0.1 0.2 zebra\n").is_err());
    }

    #[test]
    fn ply_parser_reads_vertices_with_extra_properties() {
        let text = "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 3\n\
                    property float x\nproperty float y\nproperty float z\n\
                    property uchar red\nend_header\n\
                    0.0 0.0 1.0 255\n1.0 0.0 0.0 0\n0.0 1.0 0.0 0\n";
        let pts = parse_ply(text).unwrap();
        assert_eq!(pts.len(), 3);
        assert_relative_eq!(pts[0], Vector3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn ply_parser_rejects_binary_and_truncated_files() {
        let binary = "ply\nformat binary_little_endian 1.0\nelement vertex 1\n\
                      property float x\nproperty float y\nproperty float z\nend_header\n";
        assert!(parse_ply(binary).is_err());
        let truncated = "ply\nformat ascii 1.0\nelement vertex 5\n\
                         property float x\nproperty float y\nproperty float z\nend_header\n\
                         0 0 0\n1 1 1\n";
        assert!(parse_ply(truncated).is_err());
        assert!(parse_ply("not a ply\n").is_err());
    }

    /// Straightforward quadratic-time reimplementation of greedy
    /// farthest-point sampling used to cross-check the production routine.
    fn oracle_fps(points: &PointSet, target: usize) -> Vec<usize> {
        let centroid = points.iter().sum::<Vector3<f64>>() / points.len() as f64;
        let mut chosen: Vec<usize> = Vec::new();
        let mut seed = 0;
        let mut best = f64::NEG_INFINITY;
        for (i, p) in points.iter().enumerate() {
            let d = (p - centroid).norm();
            if d > best {
                best = d;
                seed = i;
            }
        }
        chosen.push(seed);
        while chosen.len() < target {
            let mut next = usize::MAX;
            let mut far = f64::NEG_INFINITY;
            for i in 0..points.len() {
                if chosen.contains(&i) {
                    continue;
                }
                let d = chosen
                    .iter()
                    .map(|&c| (points[i] - points[c]).norm())
                    .fold(f64::INFINITY, f64::min);
                if d > far {
                    far = d;
                    next = i;
                }
            }
            chosen.push(next);
        }
        chosen.sort_unstable();
        chosen
    }

    #[test]
    fn subsample_matches_quadratic_oracle() {
        let mut rng = StdRng::seed_from_u64(51);
        for _ in 0..10 {
            let points = random_cloud(60, &mut rng);
            let expect: PointSet = oracle_fps(&points, 12)
                .into_iter()
                .map(|i| points[i])
                .collect();
            let got = subsample_farthest(points, 12).unwrap();
            assert_eq!(got.len(), 12);
            for (g, e) in got.iter().zip(&expect) {
                assert_eq!(g, e);
            }
        }
    }

    #[test]
    fn subsample_keeps_small_clouds_and_is_deterministic() {
        let mut rng = StdRng::seed_from_u64(61);
        let points = random_cloud(30, &mut rng);
        let all = subsample_farthest(points.clone(), 100).unwrap();
        assert_eq!(all.len(), 30);
        let a = subsample_farthest(points.clone(), 10).unwrap();
        let b = subsample_farthest(points, 10).unwrap();
        assert_eq!(a, b);
        assert!(subsample_farthest(all, 2).is_err());
    }

    #[test]
    fn load_cloud_from_files() {
        let dir = std::env::temp_dir().join("graspgame-object-test");
        std::fs::create_dir_all(&dir).unwrap();
        let xyz = dir.join("cloud.xyz");
        std::fs::write(&xyz, "0 0 0\n1 0 0\n0 1 0\n0 0 1\n1 1 1\n").unwrap();
        let cloud = load_object_cloud(&xyz, None).unwrap();
        assert_eq!(cloud.len(), 5);
        let subsampled = load_object_cloud(&xyz, Some(4)).unwrap();
        assert_eq!(subsampled.len(), 4);
        assert!(load_object_cloud(&dir.join("missing.xyz"), None).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
