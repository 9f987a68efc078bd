"""Pinhole camera and the capsule-body silhouette proxy.

A camera maps world points through rotation/translation into a frame with
x right, y down, z forward, then projects by perspective division and
intrinsic scaling. Silhouettes come from per-bone capsules: each bone
projects to a generalized stadium (two circles of per-endpoint pixel radius
joined by external tangents), and the body outline is sampled densely on
every stadium boundary, dropping samples that land inside another stadium.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    BehindCameraError,
    EmptySilhouetteError,
    InvalidInputError,
)
from .jsonio import load_document, require_array, save_document
from .skeleton import fk_frames

CAMERA_FORMAT = "camera/1"

# camera-space points closer than this to the image plane are treated as invisible
Z_EPS = 1e-6


@dataclass
class Camera:
    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        self.fx = float(self.fx)
        self.fy = float(self.fy)
        self.cx = float(self.cx)
        self.cy = float(self.cy)
        self.rotation = np.asarray(self.rotation, dtype=float)
        self.translation = np.asarray(self.translation, dtype=float)
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidInputError("focal lengths must be positive")
        if self.rotation.shape != (3, 3) or self.translation.shape != (3,):
            raise InvalidInputError("rotation must be 3x3 and translation a 3-vector")
        if np.max(np.abs(self.rotation.T @ self.rotation - np.eye(3))) > 1e-9:
            raise InvalidInputError("rotation must be orthonormal")
        if np.linalg.det(self.rotation) < 0.0:
            raise InvalidInputError("rotation must be proper (det +1)")

    def to_camera(self, points):
        """World -> camera frame for an (n, 3) array (or single 3-vector)."""
        points = np.asarray(points, dtype=float)
        return points @ self.rotation.T + self.translation


def look_at(position, target, fx, fy, cx, cy):
    """Camera at `position` whose optical axis passes through `target`, y-up world."""
    position = np.asarray(position, dtype=float)
    forward = np.asarray(target, dtype=float) - position
    norm = np.linalg.norm(forward)
    if norm < 1e-12:
        raise InvalidInputError("camera position and target coincide")
    forward = forward / norm
    right = np.cross(forward, np.array([0.0, 1.0, 0.0]))
    rnorm = np.linalg.norm(right)
    if rnorm < 1e-9:
        raise InvalidInputError("camera looking straight along the world up axis")
    right = right / rnorm
    down = np.cross(forward, right)
    rotation = np.stack([right, down, forward])
    return Camera(fx, fy, cx, cy, rotation, -rotation @ position)


def project(camera, point):
    """Project one world point to pixels. Raises if it sits at or behind the camera."""
    p = camera.to_camera(np.asarray(point, dtype=float))
    if p[2] <= Z_EPS:
        raise BehindCameraError(f"point at camera-space z={p[2]:.3g}")
    return np.array(
        [camera.fx * p[0] / p[2] + camera.cx, camera.fy * p[1] / p[2] + camera.cy]
    )


def project_points(camera, points):
    """Batched projection.

    Returns (uv, z, valid); rows with z <= Z_EPS get uv = 0 and valid False,
    so callers can mask residuals instead of handling exceptions.
    """
    p = camera.to_camera(points)
    z = p[:, 2]
    valid = z > Z_EPS
    safe_z = np.where(valid, z, 1.0)
    uv = np.empty((p.shape[0], 2))
    uv[:, 0] = camera.fx * p[:, 0] / safe_z + camera.cx
    uv[:, 1] = camera.fy * p[:, 1] / safe_z + camera.cy
    uv[~valid] = 0.0
    return uv, z, valid


def save_camera(path, camera):
    save_document(
        path,
        {
            "format": CAMERA_FORMAT,
            "fx": camera.fx,
            "fy": camera.fy,
            "cx": camera.cx,
            "cy": camera.cy,
            "rotation": camera.rotation.tolist(),
            "translation": camera.translation.tolist(),
        },
    )


def load_camera(path):
    doc = load_document(path, CAMERA_FORMAT)
    vals = {}
    for key in ("fx", "fy", "cx", "cy"):
        vals[key] = float(require_array(doc, path, key, ()))
    return Camera(
        rotation=require_array(doc, path, "rotation", (3, 3)),
        translation=require_array(doc, path, "translation", (3,)),
        **vals,
    )


@dataclass
class CapsuleBody:
    """One radius (meters) per kinematic-tree edge, aligned with skeleton.bones."""

    radii: np.ndarray

    def __post_init__(self):
        self.radii = np.asarray(self.radii, dtype=float)
        if self.radii.ndim != 1 or np.any(self.radii <= 0.0):
            raise InvalidInputError("capsule radii must be positive")


def default_body(skeleton):
    """Plausible flesh radii keyed on the child joint's body region."""
    by_region = {
        "torso": 0.08,
        "left_arm": 0.04,
        "right_arm": 0.04,
        "left_leg": 0.055,
        "right_leg": 0.055,
    }
    radii = [by_region[skeleton.region_map[child]] for _, child in skeleton.bones]
    return CapsuleBody(np.array(radii))


def bone_stadiums(camera, skeleton, pose, body):
    """Per visible bone: projected endpoints and per-endpoint pixel radii.

    Returns a list of dicts {bone, a, b, ra, rb}; bones with either endpoint
    at or behind the camera plane are dropped.
    """
    if len(body.radii) != len(skeleton.bones):
        raise InvalidInputError(
            f"body has {len(body.radii)} radii, skeleton has {len(skeleton.bones)} bones"
        )
    pos, _ = fk_frames(skeleton, pose)
    uv, z, valid = project_points(camera, pos)
    out = []
    for k, (i, j) in enumerate(skeleton.bones):
        if not (valid[i] and valid[j]):
            continue
        out.append(
            {
                "bone": k,
                "a": uv[i],
                "b": uv[j],
                "ra": camera.fx * body.radii[k] / z[i],
                "rb": camera.fx * body.radii[k] / z[j],
            }
        )
    return out


def _stadium_pieces(st):
    """Boundary pieces of one generalized stadium as (kind, length) pairs.

    Kinds: "arc_a", "arc_b", "seg_hi", "seg_lo" for the tangent-joined shape,
    or a single "circle" when one projected endpoint circle swallows the other.
    """
    d = float(np.linalg.norm(st["b"] - st["a"]))
    dr = st["rb"] - st["ra"]
    if d <= abs(dr) + 1e-12:
        r = max(st["ra"], st["rb"])
        return [("circle", 2.0 * np.pi * r)], None
    beta = float(np.arccos(np.clip((st["ra"] - st["rb"]) / d, -1.0, 1.0)))
    seg = float(np.sqrt(max(d * d - dr * dr, 0.0)))
    pieces = [
        ("arc_a", st["ra"] * (2.0 * np.pi - 2.0 * beta)),
        ("seg_hi", seg),
        ("arc_b", st["rb"] * 2.0 * beta),
        ("seg_lo", seg),
    ]
    return pieces, beta


def _piece_points(st, kind, fracs):
    """Points at fractional positions along one boundary piece."""
    a, b, ra, rb = st["a"], st["b"], st["ra"], st["rb"]
    v = b - a
    d = float(np.linalg.norm(v))
    if kind == "circle":
        s = 0.0 if ra >= rb else 1.0
        r = max(ra, rb)
        ang = 2.0 * np.pi * fracs
        centre = a + s * v
        return centre + r * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    psi = float(np.arctan2(v[1], v[0]))
    beta = float(np.arccos(np.clip((ra - rb) / d, -1.0, 1.0)))
    if kind == "arc_a":
        theta = psi + beta + fracs * (2.0 * np.pi - 2.0 * beta)
        return a + ra * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    if kind == "arc_b":
        theta = psi - beta + fracs * (2.0 * beta)
        return (a + v) + rb * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    sign = 1.0 if kind == "seg_hi" else -1.0
    n = np.array([np.cos(psi + sign * beta), np.sin(psi + sign * beta)])
    # tangent segment = sweep centre + swept radius along the common normal
    s = fracs[:, None]
    return a + s * v + (ra + s * (rb - ra)) * n


def stadium_signed_distance(points, st):
    """Signed distance (px) from points to one stadium; negative inside.

    The stadium is the union of discs centred on the segment a->b with
    linearly interpolated radius, so the distance is min over the sweep
    parameter of |p - c(s)| - r(s), minimized in closed form.
    """
    points = np.atleast_2d(points)
    a, b, ra, rb = st["a"], st["b"], st["ra"], st["rb"]
    v = b - a
    vv = float(v @ v)
    dr = rb - ra
    w = points - a
    if vv <= dr * dr + 1e-15:
        s_big = 0.0 if ra >= rb else 1.0
        centre = a + s_big * v
        return np.linalg.norm(points - centre, axis=1) - max(ra, rb)
    wv = w @ v
    ww = np.sum(w * w, axis=1)
    # candidate sweep parameters: ends plus stationary points of the distance
    cands = [np.zeros_like(wv), np.ones_like(wv)]
    aa = vv * (vv - dr * dr)
    bb = -2.0 * wv * (vv - dr * dr)
    cc = wv * wv - dr * dr * ww
    disc = bb * bb - 4.0 * aa * cc
    ok = disc > 0.0
    root = np.sqrt(np.where(ok, disc, 0.0))
    for sgn in (-1.0, 1.0):
        s = np.where(ok, (-bb + sgn * root) / (2.0 * aa), 0.0)
        cands.append(np.clip(s, 0.0, 1.0))
    best = None
    for s in cands:
        g = np.sqrt(np.maximum(ww - 2.0 * s * wv + s * s * vv, 0.0)) - (ra + s * dr)
        best = g if best is None else np.minimum(best, g)
    return best


def sample_outline(camera, skeleton, pose, body, n, oversample=4):
    """Outline candidates plus the bookkeeping needed to re-derive each one.

    Returns (points (m,2), records, kept_idx): records[i] is (stadium, kind,
    frac) for candidate i, and kept_idx lists the candidates that survived
    the inside-another-stadium cull. The records let an optimizer freeze the
    sampling structure and move points analytically with the pose.
    """
    stadiums = bone_stadiums(camera, skeleton, pose, body)
    if not stadiums:
        raise EmptySilhouetteError("no bone is visible from the camera")
    budget = max(8 * oversample, n * oversample)
    pieces = []
    for st in stadiums:
        for kind, length in _stadium_pieces(st)[0]:
            pieces.append((st, kind, length))
    total = sum(p[2] for p in pieces)
    if total <= 0.0:
        raise EmptySilhouetteError("projected body has zero outline length")
    points = []
    records = []
    for st, kind, length in pieces:
        count = max(1, int(round(budget * length / total)))
        fracs = (np.arange(count) + 0.5) / count
        pts = _piece_points(st, kind, fracs)
        points.append(pts)
        records.extend((st, kind, float(f)) for f in fracs)
    points = np.concatenate(points, axis=0)

    keep = np.ones(len(points), dtype=bool)
    for st in stadiums:
        sd = stadium_signed_distance(points, st)
        others = np.array([rec[0] is not st for rec in records])
        keep &= ~((sd < -1e-6) & others)
    kept_idx = np.flatnonzero(keep)
    if kept_idx.size == 0:
        raise EmptySilhouetteError("every outline sample fell inside the body")
    return points, records, kept_idx


def silhouette_structure(camera, skeleton, pose, body, n):
    """n outline points plus their (stadium, kind, frac) sampling records."""
    if n < 8:
        raise InvalidInputError("need at least 8 silhouette points")
    points, records, kept_idx = sample_outline(camera, skeleton, pose, body, n)
    pick = kept_idx[np.round(np.linspace(0, kept_idx.size - 1, n)).astype(int)]
    return points[pick], [records[i] for i in pick]


def silhouette_points(camera, skeleton, pose, body, n):
    """n points (pixels) on the outline of the projected capsule body."""
    return silhouette_structure(camera, skeleton, pose, body, n)[0]
