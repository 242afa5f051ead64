#!/usr/bin/env python3
"""Regenerates everything under assets/: hand descriptions, object clouds,
scene configurations, and the default solver configuration.

The suite scenes come in two families.

Caged scenes surround every cloud point with six fat guard spheres at exact
tangency. A guard of radius R placed R away from a point blocks every
endpoint displacement of that point shorter than 2R/sqrt(3) along the worst
diagonal direction, so choosing R comfortably above the largest point motion
the escape box allows makes the scene escape-free by construction. Tangency
survives the round trip through JSON and the cloud loader because the clouds
are written as adjacent antipodal pairs (their mean is exactly zero, so
recentring is a no-op) and guard offsets are the point coordinates plus R
along one axis (exact in double precision).

Open scenes leave generous escape room (either a slack version of a guard
shell or an articulated claw around a small cloud) so the adversary finds a
multi-millimeter escape no matter how early its solver settles.

Every generated scene is checked here with a small endpoint-feasibility
sampler that is independent of the Rust implementation.
"""

import json
import math
import os
import shutil

import numpy as np

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
ASSETS = os.path.join(ROOT, "assets")

# Default escape box (meters for the three translations, radians for the
# three rotations) shared by every scene that does not override it.
EPS_DEFAULT = {"translation": 0.02, "rotation": 0.05}

AL_DEFAULTS = {
    "max_outer": 100,
    "penalty_growth": 10.0,
    "penalty_init": 1.0,
    "multiplier_init": 0.0,
    "constraint_tol": 1e-5,
    "rel_improve_tol": 1e-2,
    "inner_max_iters": 200,
    "inner_grad_tol": 1e-6,
    "memory": 10,
}

GAME_DEFAULTS = {
    "max_rounds": 10,
    "firm_tol": 1e-3,
    "stall_tol": 1e-5,
    "epsilon_bounds": EPS_DEFAULT,
    "cycle_window": 3,
    "fresh_player1_starts": False,
}


def fmt(x):
    """Shortest decimal text that parses back to the same double."""
    return repr(float(x))


def write_json(path, doc):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


def write_xyz(path, points, comment):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as f:
        f.write(f"# {comment}\n")
        for p in points:
            f.write(f"{fmt(p[0])} {fmt(p[1])} {fmt(p[2])}\n")


def write_ply(path, points, comment):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as f:
        f.write("ply\n")
        f.write("format ascii 1.0\n")
        f.write(f"comment {comment}\n")
        f.write(f"element vertex {len(points)}\n")
        f.write("property double x\n")
        f.write("property double y\n")
        f.write("property double z\n")
        f.write("end_header\n")
        for p in points:
            f.write(f"{fmt(p[0])} {fmt(p[1])} {fmt(p[2])}\n")


def rotvec_from_matrix(R):
    """Axis-angle log of a rotation matrix."""
    tr = np.trace(R)
    c = max(-1.0, min(1.0, (tr - 1.0) / 2.0))
    angle = math.acos(c)
    if angle < 1e-12:
        return np.zeros(3)
    if math.pi - angle < 1e-6:
        # Near half turn: extract the axis from the symmetric part.
        A = (R + np.eye(3)) / 2.0
        axis = np.sqrt(np.maximum(np.diag(A), 0.0))
        # Fix signs from the largest component.
        k = int(np.argmax(axis))
        axis[(k + 1) % 3] = A[k, (k + 1) % 3] / axis[k] if axis[k] > 0 else 0.0
        axis[(k + 2) % 3] = A[k, (k + 2) % 3] / axis[k] if axis[k] > 0 else 0.0
        axis = axis / np.linalg.norm(axis)
        return axis * angle
    axis = (
        np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
        / (2.0 * math.sin(angle))
    )
    return axis * angle


def matrix_from_rotvec(v):
    angle = np.linalg.norm(v)
    if angle < 1e-12:
        return np.eye(3)
    k = v / angle
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * K @ K


def rz(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


# --------------------------------------------------------------------------
# Clouds


def antipodal_fibonacci(n_pairs, a, b, c):
    """2*n_pairs points on an ellipsoid: a golden-angle hemisphere covering
    plus the exact antipode of each point, interleaved so sequential
    summation cancels pairwise and the mean is exactly zero."""
    golden = (1.0 + math.sqrt(5.0)) / 2.0
    pts = []
    for i in range(n_pairs):
        t = (i + 0.5) / (2 * n_pairs)
        z = 1.0 - 2.0 * t  # upper hemisphere: z in (0, 1)
        r = math.sqrt(max(0.0, 1.0 - z * z))
        ang = math.tau * ((i / golden) % 1.0)
        p = np.array([a * r * math.cos(ang), b * r * math.sin(ang), c * z])
        pts.append(p)
        pts.append(-p)
    return np.array(pts)


def octahedron(r):
    pts = []
    for axis in range(3):
        p = np.zeros(3)
        p[axis] = r
        pts.append(p.copy())
        pts.append(-p)
    return np.array(pts)


def fibonacci_ellipsoid(n, a, b, c):
    golden = (1.0 + math.sqrt(5.0)) / 2.0
    pts = []
    for i in range(n):
        t = (i + 0.5) / n
        z = 1.0 - 2.0 * t
        r = math.sqrt(max(0.0, 1.0 - z * z))
        ang = math.tau * ((i / golden) % 1.0)
        pts.append(np.array([a * r * math.cos(ang), b * r * math.sin(ang), c * z]))
    return np.array(pts)


# --------------------------------------------------------------------------
# Guard-shell hands


def guard_shell_hand(name, cloud, radius, gap, triad=np.eye(3), joint=None):
    """Hand made of six guard spheres per cloud point, offset radius+gap
    along the (possibly rotated) coordinate axes. With `joint` set, the whole
    assembly hangs off one revolute joint about the base z-axis."""
    points = []
    for y in cloud:
        for axis in range(3):
            for sign in (-1.0, 1.0):
                u = triad[:, axis]
                off = y + sign * (radius + gap) * u
                points.append(
                    {
                        "frame": 1 if joint else 0,
                        "offset": [off[0], off[1], off[2]],
                        "radius": radius,
                    }
                )
    frames = [
        {
            "parent": None,
            "fixed": {"rotvec": [0.0, 0.0, 0.0], "translation": [0.0, 0.0, 0.0]},
        }
    ]
    joints = []
    if joint:
        lo, hi = joint
        frames.append(
            {"parent": 0, "dh": {"a": 0.0, "alpha": 0.0, "d": 0.0, "theta0": 0.0}}
        )
        joints.append({"frame": 1, "lower": lo, "upper": hi})
    tiny = 1e-6
    return {
        "name": name,
        "dof": len(joints),
        "point_count": len(points),
        "frames": frames,
        "joints": joints,
        "base_limits": {"lower": [-tiny] * 6, "upper": [tiny] * 6},
        "points": points,
        "links": [],
        "fingertip_subset": [{"point": 0, "contact_threshold": 0.001}],
        "self_collision_pairs": [],
        "palm_offset": {"rotvec": [0.0, 0.0, 0.0], "translation": [0.0, 0.0, 0.0]},
    }


# --------------------------------------------------------------------------
# Claw hands


def claw_hand(name, fingers):
    """Radially arranged planar fingers, four revolute curl joints each.

    Each finger lives in the vertical plane through its palm-rim anchor; the
    local frame at the anchor has x pointing up (palm normal) and z along
    the negated rim tangent, so positive joint angles curl the finger inward
    over the palm.
    """
    palm_radius = 0.045
    lengths = [0.05, 0.04, 0.03, 0.022]
    seg_radii = [0.011, 0.010, 0.009]
    tip_radius = 0.008
    # Midpoints curl the finger moderately inward (cumulative 0.6 rad at the
    # tip) so neighboring tips stay clear of each other even with four
    # fingers.
    limits = [(-0.5, 0.6), (-0.4, 0.6), (-0.3, 0.7), (-0.35, 0.85)]

    frames = [
        {
            "parent": None,
            "fixed": {"rotvec": [0.0, 0.0, 0.0], "translation": [0.0, 0.0, 0.0]},
        }
    ]
    joints = []
    points = [{"frame": 0, "offset": [0.0, 0.0, 0.01], "radius": 0.025}]
    links = []
    fingertips = []
    self_pairs = []
    tip_ids = []

    for f in range(fingers):
        psi = math.tau * f / fingers
        r_hat = np.array([math.cos(psi), math.sin(psi), 0.0])
        t_hat = np.array([-math.sin(psi), math.cos(psi), 0.0])
        R = np.column_stack([np.array([0.0, 0.0, 1.0]), -r_hat, -t_hat])
        rotvec = rotvec_from_matrix(R)
        anchor = palm_radius * r_hat
        root = len(frames)
        frames.append(
            {
                "parent": 0,
                "fixed": {
                    "rotvec": [rotvec[0], rotvec[1], rotvec[2]],
                    "translation": [anchor[0], anchor[1], anchor[2]],
                },
            }
        )
        # Joint k's frame translates by the previous link before rotating,
        # so link k sits along frame k's x-axis.
        a_params = [0.0] + lengths[:3]
        for k in range(4):
            frames.append(
                {
                    "parent": root + k,
                    "dh": {"a": a_params[k], "alpha": 0.0, "d": 0.0, "theta0": 0.0},
                }
            )
            lo, hi = limits[k]
            joints.append({"frame": root + 1 + k, "lower": lo, "upper": hi})
        seg_ids = []
        for k in range(3):
            seg_ids.append(len(points))
            points.append(
                {
                    "frame": root + 1 + k,
                    "offset": [lengths[k] / 2.0, 0.0, 0.0],
                    "radius": seg_radii[k],
                }
            )
        tip = len(points)
        tip_ids.append(tip)
        points.append(
            {
                "frame": root + 4,
                "offset": [lengths[3], 0.0, 0.0],
                "radius": tip_radius,
            }
        )
        for a, b in zip(seg_ids, seg_ids[1:] + [tip]):
            # Focal threshold: inter-point distance at the joint midpoints
            # plus a tube allowance; computed below after FK.
            links.append({"a": a, "b": b, "threshold": 0.0})
        fingertips.append({"point": tip, "contact_threshold": 0.004})
        self_pairs.append({"points": [tip, 0]})
    for f in range(fingers):
        self_pairs.append({"points": [tip_ids[f], tip_ids[(f + 1) % fingers]]})

    spec = {
        "name": name,
        "dof": len(joints),
        "point_count": len(points),
        "frames": frames,
        "joints": joints,
        "base_limits": {
            "lower": [-0.5, -0.5, -0.5, -3.2, -3.2, -3.2],
            "upper": [0.5, 0.5, 0.5, 3.2, 3.2, 3.2],
        },
        "points": points,
        "links": links,
        "fingertip_subset": fingertips,
        "self_collision_pairs": self_pairs,
        "palm_offset": {"rotvec": [0.0, 0.0, 0.0], "translation": [0.0, 0.0, 0.0]},
    }

    # Fill link thresholds and the palm offset from the midpoint pose.
    world = claw_fk(spec, mid_joints(spec))
    for link in spec["links"]:
        pa = world[link["a"]]
        pb = world[link["b"]]
        ra = spec["points"][link["a"]]["radius"]
        link["threshold"] = float(np.linalg.norm(pa - pb) + 2.0 * ra)
    tips = np.array([world[t] for t in tip_ids])
    center = tips.mean(axis=0)
    # Grasp center: inside the cavity below the tip plane, where an object a
    # few centimeters across sits clear of the palm and the curled fingers.
    spec["palm_offset"]["translation"] = [0.0, 0.0, float(center[2] - 0.045)]
    return spec


def mid_joints(spec):
    return [(j["lower"] + j["upper"]) / 2.0 for j in spec["joints"]]


def claw_fk(spec, joint_values):
    """World point positions with an identity base; mirrors theproximal DH
    convention Rx(alpha)*Tx(a)*Rz(theta)*Tz(d)."""
    joint_of_frame = {j["frame"]: idx for idx, j in enumerate(spec["joints"])}
    world = []
    for idx, fr in enumerate(spec["frames"]):
        parent = np.eye(4) if fr["parent"] is None else world[fr["parent"]]
        if "fixed" in fr and fr["fixed"] is not None:
            local = np.eye(4)
            local[:3, :3] = matrix_from_rotvec(np.array(fr["fixed"]["rotvec"]))
            local[:3, 3] = fr["fixed"]["translation"]
        else:
            dh = fr["dh"]
            theta = dh["theta0"]
            if idx in joint_of_frame:
                theta += joint_values[joint_of_frame[idx]]
            ca, sa = math.cos(dh["alpha"]), math.sin(dh["alpha"])
            ct, st = math.cos(theta), math.sin(theta)
            Rx = np.eye(4)
            Rx[:3, :3] = np.array([[1, 0, 0], [0, ca, -sa], [0, sa, ca]])
            Tx = np.eye(4)
            Tx[0, 3] = dh["a"]
            Rz = np.eye(4)
            Rz[:3, :3] = np.array([[ct, -st, 0], [st, ct, 0], [0, 0, 1]])
            Tz = np.eye(4)
            Tz[2, 3] = dh["d"]
            local = Rx @ Tx @ Rz @ Tz
        world.append(parent @ local)
    pts = []
    for p in spec["points"]:
        M = world[p["frame"]]
        pts.append(M[:3, :3] @ np.array(p["offset"]) + M[:3, 3])
    return pts


# --------------------------------------------------------------------------
# Endpoint feasibility sampler (independent cross-check used only here)


def hand_world_points(spec, joint_values=None):
    if joint_values is None:
        joint_values = mid_joints(spec)
    return claw_fk(spec, joint_values)


def exp_twist(delta):
    v, w = np.array(delta[:3]), np.array(delta[3:])
    angle = np.linalg.norm(w)
    R = matrix_from_rotvec(w)
    if angle < 1e-12:
        V = np.eye(3)
    else:
        K = (
            np.array([[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]])
            / angle
        )
        V = (
            np.eye(3)
            + (1 - math.cos(angle)) / angle * K
            + (1 - math.sin(angle) / angle) * K @ K
        )
    return R, V @ v


def scene_escape_scan(hand_pts, hand_radii, cloud, eps, n_dirs=300, n_mags=24):
    """Best collision-free endpoint twist found by a direction/magnitude
    sweep; returns 0 when nothing above 1e-6 is free."""
    rng = np.random.default_rng(7)
    dirs = []
    for i in range(6):
        for s in (1.0, -1.0):
            u = np.zeros(6)
            u[i] = s
            dirs.append(u)
    while len(dirs) < n_dirs:
        u = rng.normal(size=6)
        n = np.linalg.norm(u)
        if n > 1e-9:
            dirs.append(u / n)
    eps = np.array(eps)
    best = 0.0
    hand_pts = np.array(hand_pts)
    hand_radii = np.array(hand_radii)

    def feasible(delta):
        R, t = exp_twist(delta)
        moved = cloud @ R.T + t
        d = np.linalg.norm(moved[:, None, :] - hand_pts[None, :, :], axis=2)
        return np.all(d - hand_radii[None, :] >= 0.0)

    for u in dirs:
        with np.errstate(divide="ignore"):
            m_hi = np.min(np.where(np.abs(u) > 0, eps / np.abs(u), np.inf))
        if not np.isfinite(m_hi) or m_hi <= 0:
            continue
        found = 0.0
        if feasible(m_hi * u):
            found = m_hi
        else:
            lo, lo_ok, hi = 0.0, False, m_hi
            for _ in range(n_mags):
                mid = 0.5 * (lo + hi)
                if feasible(mid * u):
                    lo, lo_ok = mid, True
                else:
                    hi = mid
            if lo_ok:
                found = lo
            else:
                for k in range(n_mags, 0, -1):
                    m = m_hi * k / (n_mags + 1)
                    if feasible(m * u):
                        found = m
                        break
        best = max(best, found)
    return best


# --------------------------------------------------------------------------
# Scene emission


def scene_doc(hand, obj, game_overrides=None, epsilon=None, sample_n=None):
    game = dict(GAME_DEFAULTS)
    if game_overrides:
        game.update(game_overrides)
    doc = {
        "hand_path": f"../hands/{hand}",
        "object_path": f"../objects/{obj}",
        "object_sample_n": sample_n,
        "epsilon_bounds": epsilon,
        "game": game,
        "al1": dict(AL_DEFAULTS),
        "al2": dict(AL_DEFAULTS),
        "seed": 0,
        "output_dir": None,
    }
    return doc


def main():
    if os.path.isdir(ASSETS):
        shutil.rmtree(ASSETS)

    report = []

    # ---- Objects -------------------------------------------------------
    clouds = {}

    def add_cloud(name, pts, writer=write_xyz, comment=""):
        clouds[name] = np.asarray(pts)
        writer(os.path.join(ASSETS, "objects", name), pts, comment or name)

    add_cloud("sphere12_unit.xyz", antipodal_fibonacci(6, 1.0, 1.0, 1.0),
              comment="unit sphere, 6 antipodal pairs")
    add_cloud("sphere20_unit.xyz", antipodal_fibonacci(10, 1.0, 1.0, 1.0),
              comment="unit sphere, 10 antipodal pairs")
    add_cloud("sphere24_unit.xyz", antipodal_fibonacci(12, 1.0, 1.0, 1.0),
              comment="unit sphere, 12 antipodal pairs")
    add_cloud("ellipsoid16_unit.xyz", antipodal_fibonacci(8, 1.0, 0.9, 0.8),
              comment="ellipsoid 1.0 x 0.9 x 0.8, 8 antipodal pairs")
    add_cloud("octahedron_unit.xyz", octahedron(1.0),
              comment="octahedron vertices, unit radius")
    add_cloud("sphere24_2cm.xyz", antipodal_fibonacci(12, 0.02, 0.02, 0.02),
              comment="2 cm sphere, 12 antipodal pairs")
    add_cloud("octa_cluster_8mm.xyz", octahedron(0.008),
              comment="octahedron vertices, 8 mm")
    add_cloud("ellipsoid48_big.xyz", fibonacci_ellipsoid(48, 0.2, 0.19, 0.18),
              comment="oversized ellipsoid")
    add_cloud("ellipsoid256.ply",
              fibonacci_ellipsoid(256, 0.022, 0.02, 0.017),
              writer=write_ply, comment="dense ellipsoid for timing runs")

    morph_base = antipodal_fibonacci(8, 1.0, 0.85, 0.7)
    for k in range(5):
        pts = morph_base @ rz(0.15 * k).T
        write_xyz(
            os.path.join(ASSETS, "objects", "morph", f"step_{k}.xyz"),
            pts,
            f"morph step {k}: base ellipsoid rotated {0.15 * k:.2f} rad about z",
        )
    # A broken variant: the final step spins past the tracking joint's range.
    for k in range(4):
        pts = morph_base @ rz(0.15 * k).T
        write_xyz(
            os.path.join(ASSETS, "objects", "morph_bad", f"step_{k}.xyz"),
            pts,
            f"morph step {k}",
        )
    write_xyz(
        os.path.join(ASSETS, "objects", "morph_bad", "step_4.xyz"),
        morph_base @ rz(1.65).T,
        "morph step 4: rotated beyond the tracking joint's reach",
    )

    # ---- Guard-shell hands ----------------------------------------------
    triad_rot = matrix_from_rotvec(np.array([0.3, 0.4, 0.12]))
    shells = [
        ("cage_sphere12.json", "sphere12_unit.xyz", 0.2, 0.0, np.eye(3), None),
        ("cage_sphere20_rot.json", "sphere20_unit.xyz", 0.2, 0.0, triad_rot, None),
        ("cage_sphere24.json", "sphere24_unit.xyz", 0.2, 0.0, np.eye(3), None),
        ("cage_ellipsoid16.json", "ellipsoid16_unit.xyz", 0.18, 0.0, np.eye(3), None),
        ("cage_octahedron.json", "octahedron_unit.xyz", 0.2, 0.0, np.eye(3), None),
        ("slack_sphere12.json", "sphere12_unit.xyz", 0.2, 0.005, np.eye(3), None),
        ("slack_ellipsoid16_rot.json", "ellipsoid16_unit.xyz", 0.18, 0.012,
         triad_rot, None),
        ("cage_track.json", "morph/step_0.xyz", 0.2, 0.0, np.eye(3), (-0.76, 0.76)),
    ]
    shell_specs = {}
    for name, cloud_name, radius, gap, triad, joint in shells:
        key = cloud_name if cloud_name in clouds else None
        cloud = clouds[key] if key else morph_base
        spec = guard_shell_hand(name.removesuffix(".json"), cloud, radius, gap,
                                triad, joint)
        shell_specs[name] = (spec, cloud, radius, gap)
        write_json(os.path.join(ASSETS, "hands", name), spec)

    # Shell sanity: rest clearances, spacing, and escape bound.
    for name, (spec, cloud, radius, gap) in shell_specs.items():
        pts = np.array([p["offset"] for p in spec["points"]])
        radii = np.array([p["radius"] for p in spec["points"]])
        d = np.linalg.norm(cloud[:, None, :] - pts[None, :, :], axis=2) - radii
        min_rest = float(d.min())
        assert min_rest >= -1e-12, f"{name}: rest penetration {min_rest}"
        n = len(cloud)
        if n > 1:
            dd = np.linalg.norm(cloud[:, None, :] - cloud[None, :, :], axis=2)
            np.fill_diagonal(dd, np.inf)
            spacing = float(dd.min())
            assert spacing > 2 * radius + gap + 0.01, (
                f"{name}: spacing {spacing} too tight for guard radius {radius}"
            )
        eps_vec = [EPS_DEFAULT["translation"]] * 3 + [EPS_DEFAULT["rotation"]] * 3
        if name == "cage_octahedron.json":
            eps_vec = [0.01] * 3 + [0.03] * 3
        best = scene_escape_scan(pts, radii, cloud, eps_vec)
        report.append(f"{name}: rest {min_rest:.2e}, best endpoint escape {best:.4e}")
        if gap == 0.0:
            assert best <= 1e-9, f"{name}: caged shell leaks {best}"
        else:
            assert best >= 5e-3, f"{name}: slack shell pocket only {best}"

    # ---- Claw hands ------------------------------------------------------
    for fingers, name in [(2, "claw8.json"), (3, "claw12.json"), (4, "claw16.json")]:
        spec = claw_hand(name.removesuffix(".json"), fingers)
        write_json(os.path.join(ASSETS, "hands", name), spec)
        world = hand_world_points(spec)
        tips = [world[ft["point"]] for ft in spec["fingertip_subset"]]
        tips = np.array(tips)
        pair_min = np.inf
        for sp in spec["self_collision_pairs"]:
            a, b = sp["points"]
            pair_min = min(
                pair_min,
                float(np.linalg.norm(world[a] - world[b]))
                - spec["points"][a]["radius"],
            )
        report.append(
            f"{name}: midpoint tip centroid {tips.mean(axis=0).round(4).tolist()}, "
            f"tip spread {np.linalg.norm(tips - tips.mean(axis=0), axis=1).max():.3f}, "
            f"min self clearance {pair_min:.4f}"
        )
        assert pair_min > 0.003, f"{name}: self-colliding at the midpoint pose"

        # Rest feasibility against every cloud this claw faces: with the
        # palm frame on the cloud centroid, no hand sphere may swallow a
        # cloud point. Spherical clouds make this rotation-proof; the
        # ellipsoids initialize axis-aligned.
        palm_z = spec["palm_offset"]["translation"][2]
        faced = {
            "claw8.json": ["sphere24_2cm.xyz"],
            "claw12.json": ["ellipsoid48_big.xyz", "octa_cluster_8mm.xyz"],
            "claw16.json": ["octa_cluster_8mm.xyz", "ellipsoid256.ply"],
        }[name]
        for cloud_name in faced:
            cloud = clouds[cloud_name]
            shifted = np.array(world) - np.array([0.0, 0.0, palm_z])
            radii = np.array([p["radius"] for p in spec["points"]])
            d = (
                np.linalg.norm(cloud[:, None, :] - shifted[None, :, :], axis=2)
                - radii
            )
            rest = float(d.min())
            report.append(f"{name} vs {cloud_name}: rest clearance {rest:.4f}")
            assert rest > 0.002, f"{name} vs {cloud_name}: starts in collision"

    # ---- Scenes ----------------------------------------------------------
    scenes = {
        # Caged: the game should end firm and the escape search should agree.
        "cage_sphere12.json": scene_doc("cage_sphere12.json", "sphere12_unit.xyz"),
        "cage_sphere20_rot.json": scene_doc(
            "cage_sphere20_rot.json", "sphere20_unit.xyz"
        ),
        "cage_sphere24.json": scene_doc("cage_sphere24.json", "sphere24_unit.xyz"),
        "cage_ellipsoid16.json": scene_doc(
            "cage_ellipsoid16.json", "ellipsoid16_unit.xyz"
        ),
        "cage_octahedron.json": scene_doc(
            "cage_octahedron.json",
            "octahedron_unit.xyz",
            epsilon={"translation": 0.01, "rotation": 0.03},
        ),
        "cage_track.json": scene_doc("cage_track.json", "morph/step_0.xyz"),
        # Open: a real escape exists and the game must not call the grasp firm.
        "slack_sphere12.json": scene_doc("slack_sphere12.json", "sphere12_unit.xyz"),
        "slack_ellipsoid16_rot.json": scene_doc(
            "slack_ellipsoid16_rot.json", "ellipsoid16_unit.xyz"
        ),
        "open_claw8.json": scene_doc("claw8.json", "sphere24_2cm.xyz"),
        "oversized_claw12.json": scene_doc("claw12.json", "ellipsoid48_big.xyz"),
        "cap1_claw12.json": scene_doc(
            "claw12.json", "octa_cluster_8mm.xyz", game_overrides={"max_rounds": 1}
        ),
        "open_claw16.json": scene_doc("claw16.json", "octa_cluster_8mm.xyz"),
    }
    for name, doc in scenes.items():
        write_json(os.path.join(ASSETS, "scenes", name), doc)
    write_json(
        os.path.join(ASSETS, "scenes", "perf_claw16.json"),
        scene_doc("claw16.json", "ellipsoid256.ply"),
    )
    write_json(
        os.path.join(ASSETS, "scenes", "morph_track.json"),
        scene_doc("cage_track.json", "morph/step_0.xyz"),
    )

    suite = {
        "cageable": [
            "cage_sphere12.json",
            "cage_sphere20_rot.json",
            "cage_sphere24.json",
            "cage_ellipsoid16.json",
            "cage_octahedron.json",
            "cage_track.json",
        ],
        "uncageable": [
            "slack_sphere12.json",
            "slack_ellipsoid16_rot.json",
            "open_claw8.json",
            "oversized_claw12.json",
            "cap1_claw12.json",
            "open_claw16.json",
        ],
    }
    write_json(os.path.join(ASSETS, "scenes", "suite.json"), suite)

    # ---- Default config --------------------------------------------------
    write_json(
        os.path.join(ASSETS, "configs", "default.json"),
        {
            "hand_path": None,
            "object_path": None,
            "object_sample_n": None,
            "epsilon_bounds": None,
            "game": dict(GAME_DEFAULTS),
            "al1": dict(AL_DEFAULTS),
            "al2": dict(AL_DEFAULTS),
            "seed": 0,
            "output_dir": None,
        },
    )

    print("\n".join(report))
    print(f"assets written under {ASSETS}")


if __name__ == "__main__":
    main()
