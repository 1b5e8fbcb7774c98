"""Synthetic pose-transfer samples: an 18-joint stick figure drawn at two poses.

Coordinates are normalized: ``x`` spans the image width and ``y`` the image
height, both mapped to ``[0, 1]`` over pixel centres. Lengths are expressed
as fractions of the image height so a figure looks the same at any size.
"""

from __future__ import annotations

import colorsys
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError

JOINT_NAMES = (
    "nose", "neck",
    "r_shoulder", "r_elbow", "r_wrist",
    "l_shoulder", "l_elbow", "l_wrist",
    "r_hip", "r_knee", "r_ankle",
    "l_hip", "l_knee", "l_ankle",
    "r_eye", "l_eye", "r_ear", "l_ear",
)
N_JOINTS = len(JOINT_NAMES)
J = {name: i for i, name in enumerate(JOINT_NAMES)}

BONES = (
    ("neck", "r_shoulder"), ("r_shoulder", "r_elbow"), ("r_elbow", "r_wrist"),
    ("neck", "l_shoulder"), ("l_shoulder", "l_elbow"), ("l_elbow", "l_wrist"),
    ("neck", "r_hip"), ("r_hip", "r_knee"), ("r_knee", "r_ankle"),
    ("neck", "l_hip"), ("l_hip", "l_knee"), ("l_knee", "l_ankle"),
    ("neck", "nose"), ("nose", "r_eye"), ("nose", "l_eye"), ("r_eye", "r_ear"), ("l_eye", "l_ear"),
)

BACKGROUND = 0.5

# segment lengths in units of (image height - 1), reference figure at 64 px
_REF = 63.0
_HEAD = 7.0 / _REF
_SHOULDER = 4.0 / _REF
_UPPER_ARM = 5.5 / _REF
_FOREARM = 5.0 / _REF
_TORSO = 17.0 / _REF
_HIP = 3.0 / _REF
_THIGH = 13.0 / _REF
_SHIN = 13.0 / _REF
_NECK_Y = 15.0 / _REF
_EYE = (2.0 / _REF, -2.0 / _REF)
_EAR = (3.5 / _REF, 0.0)


@dataclass
class PoseConstraints:
    """Half-widths of the uniform joint-angle ranges (radians) and root jitter."""

    torso: float = 0.15
    head: float = 0.3
    shoulder: float = 1.6
    elbow: float = 1.2
    hip: float = 0.45
    knee: float = 0.5
    translate_x: float = 3.0 / _REF
    translate_y: float = 2.0 / _REF
    min_joint_separation: float = 2.4 / _REF
    max_tries: int = 2000

    def zero(self) -> "PoseConstraints":
        return PoseConstraints(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, self.min_joint_separation, self.max_tries)


@dataclass
class BodyProportions:
    scale: float = 1.0  # multiplies every bone length
    limb_radius: float = 1.3 / _REF


@dataclass
class Skeleton:
    joints: np.ndarray  # 18 × 2, (x, y) normalized
    proportions: BodyProportions = field(default_factory=BodyProportions)

    def pixels(self, size) -> np.ndarray:
        h, w = size
        return self.joints * np.array([w - 1, h - 1], dtype=np.float64)


@dataclass
class Identity:
    identity_id: int
    skin: tuple
    shirt: tuple
    pants: tuple
    joint_colors: np.ndarray  # 18 × 3 in [0, 1]
    proportions: BodyProportions


def _dir(angle: float) -> np.ndarray:
    return np.array([math.cos(angle), math.sin(angle)])


def _pose_pixels_free(rng: np.random.Generator, c: PoseConstraints, props: BodyProportions, aspect: float):
    """Forward kinematics in height units; x is later divided by ``aspect``."""
    u = lambda r: rng.uniform(-r, r) if r > 0 else 0.0  # noqa: E731
    s = props.scale
    pts = np.zeros((N_JOINTS, 2))
    neck = np.array([0.5 * aspect + u(c.translate_x), _NECK_Y + u(c.translate_y)])
    pts[J["neck"]] = neck

    torso_angle = math.pi / 2 + u(c.torso)
    down = _dir(torso_angle)
    across = np.array([-down[1], down[0]])  # points to image-left for an upright torso
    pelvis = neck + s * _TORSO * down
    pts[J["r_hip"]] = pelvis + s * _HIP * across
    pts[J["l_hip"]] = pelvis - s * _HIP * across
    pts[J["r_shoulder"]] = neck + s * _SHOULDER * across
    pts[J["l_shoulder"]] = neck - s * _SHOULDER * across

    head_angle = -math.pi / 2 + u(c.head)
    nose = neck + s * _HEAD * _dir(head_angle)
    pts[J["nose"]] = nose
    rot = head_angle + math.pi / 2
    cr, sr = math.cos(rot), math.sin(rot)
    R = np.array([[cr, -sr], [sr, cr]])
    for side, sign in (("r", -1.0), ("l", 1.0)):
        pts[J[f"{side}_eye"]] = nose + s * R @ np.array([sign * _EYE[0], _EYE[1]])
        pts[J[f"{side}_ear"]] = nose + s * R @ np.array([sign * _EAR[0], _EAR[1]])

    for side, base in (("r", math.pi), ("l", 0.0)):
        upper = base + (torso_angle - math.pi / 2) + u(c.shoulder)
        lower = upper + u(c.elbow)
        elbow = pts[J[f"{side}_shoulder"]] + s * _UPPER_ARM * _dir(upper)
        pts[J[f"{side}_elbow"]] = elbow
        pts[J[f"{side}_wrist"]] = elbow + s * _FOREARM * _dir(lower)

        thigh = torso_angle + u(c.hip)
        shin = thigh + u(c.knee)
        knee = pts[J[f"{side}_hip"]] + s * _THIGH * _dir(thigh)
        pts[J[f"{side}_knee"]] = knee
        pts[J[f"{side}_ankle"]] = knee + s * _SHIN * _dir(shin)
    return pts


def sample_pose(rng: np.random.Generator, constraints: Optional[PoseConstraints] = None,
                proportions: Optional[BodyProportions] = None, size=(64, 32)) -> Skeleton:
    """Draw a skeleton whose joints all lie inside the frame.

    Poses are rejected until every joint is in ``[0, 1]²`` and no two joints
    are closer than ``min_joint_separation``.
    """
    c = constraints or PoseConstraints()
    props = proportions or BodyProportions()
    ranges = (c.torso, c.head, c.shoulder, c.elbow, c.hip, c.knee, c.translate_x, c.translate_y)
    if any(r < 0 for r in ranges) or c.max_tries < 1:
        raise ConfigurationError("pose constraint ranges must be nonnegative")
    h, w = size
    aspect = (w - 1) / (h - 1)
    for _ in range(c.max_tries):
        pts = _pose_pixels_free(rng, c, props, aspect)
        joints = np.column_stack([pts[:, 0] / aspect, pts[:, 1]])
        if joints.min() < 0 or joints.max() > 1:
            continue
        d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
        d[np.diag_indices(N_JOINTS)] = np.inf
        if d.min() < c.min_joint_separation * props.scale:
            continue
        return Skeleton(joints, props)
    raise ConfigurationError(f"no valid pose found in {c.max_tries} tries; constraints are unsatisfiable")


def _hsv(h, s, v) -> tuple:
    return tuple(float(x) for x in colorsys.hsv_to_rgb(h % 1.0, s, v))


def _limb_color(rng) -> tuple:
    if rng.random() < 0.5:
        return _hsv(rng.random(), rng.uniform(0.3, 0.9), rng.uniform(0.05, 0.2))
    return _hsv(rng.random(), rng.uniform(0.1, 0.4), rng.uniform(0.8, 1.0))


def make_identity(seed: int, identity_id: int) -> Identity:
    rng = np.random.default_rng([seed, 7919, identity_id])
    skin, shirt, pants = (_limb_color(rng) for _ in range(3))
    offset = rng.random()
    order = rng.permutation(N_JOINTS)
    joint_colors = np.array([_hsv(offset + order[k] / N_JOINTS, 1.0, 1.0) for k in range(N_JOINTS)])
    props = BodyProportions(scale=float(rng.uniform(0.9, 1.05)), limb_radius=float(rng.uniform(1.0, 1.6)) / _REF)
    return Identity(identity_id, skin, shirt, pants, joint_colors, props)


_LIMB_PART = {
    ("neck", "r_hip"): "shirt", ("neck", "l_hip"): "shirt",
    ("neck", "r_shoulder"): "shirt", ("neck", "l_shoulder"): "shirt",
    ("r_shoulder", "r_elbow"): "shirt", ("l_shoulder", "l_elbow"): "shirt",
    ("r_elbow", "r_wrist"): "skin", ("l_elbow", "l_wrist"): "skin",
    ("r_hip", "r_knee"): "pants", ("l_hip", "l_knee"): "pants",
    ("r_knee", "r_ankle"): "pants", ("l_knee", "l_ankle"): "pants",
    ("neck", "nose"): "skin",
}
_DRAW_ORDER = (
    ("neck", "r_hip", 1.6), ("neck", "l_hip", 1.6), ("r_hip", "l_hip", 1.6),
    ("r_hip", "r_knee", 1.0), ("r_knee", "r_ankle", 1.0), ("l_hip", "l_knee", 1.0), ("l_knee", "l_ankle", 1.0),
    ("neck", "r_shoulder", 1.0), ("neck", "l_shoulder", 1.0),
    ("r_shoulder", "r_elbow", 1.0), ("r_elbow", "r_wrist", 0.9),
    ("l_shoulder", "l_elbow", 1.0), ("l_elbow", "l_wrist", 0.9),
    ("neck", "nose", 1.0),
)
_MIN_COVERAGE = 0.05
MARKER_RADIUS = 1.2 / _REF
HEAD_RADIUS = 3.2 / _REF


def _segment_distance(px, py, a, b):
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.hypot(px - a[0], py - a[1])
    t = np.clip(((px - a[0]) * ab[0] + (py - a[1]) * ab[1]) / denom, 0.0, 1.0)
    return np.hypot(px - (a[0] + t * ab[0]), py - (a[1] + t * ab[1]))


def _coverage(dist, radius):
    cov = np.clip(radius + 0.5 - dist, 0.0, 1.0)
    cov[cov < _MIN_COVERAGE] = 0.0
    return cov


def render_figure(skeleton: Skeleton, identity: Identity, size=(64, 32)):
    """Return ``(image, mask)``: a 3×h×w image in [-1, 1] and a 1×h×w 0/1 mask.

    Limbs are anti-aliased capsules over a flat gray background; every joint
    carries a small disk in the identity's colour for that joint.
    """
    h, w = size
    unit = h - 1
    pix = skeleton.pixels(size)
    py, px = np.mgrid[0:h, 0:w].astype(np.float64)
    img = np.full((h, w, 3), BACKGROUND)
    drawn = np.zeros((h, w))
    parts = {"skin": identity.skin, "shirt": identity.shirt, "pants": identity.pants}

    def paint(cov, color):
        nonlocal img, drawn
        img = img * (1.0 - cov[..., None]) + np.asarray(color) * cov[..., None]
        np.maximum(drawn, cov, out=drawn)

    limb_r = skeleton.proportions.limb_radius * unit
    for a, b, k in _DRAW_ORDER:
        part = _LIMB_PART.get((a, b), "shirt")
        dist = _segment_distance(px, py, pix[J[a]], pix[J[b]])
        paint(_coverage(dist, limb_r * k), parts[part])
    nose = pix[J["nose"]]
    paint(_coverage(np.hypot(px - nose[0], py - nose[1]), HEAD_RADIUS * unit * skeleton.proportions.scale),
          identity.skin)
    for k in range(N_JOINTS):
        cx, cy = pix[k]
        paint(_coverage(np.hypot(px - cx, py - cy), MARKER_RADIUS * unit), identity.joint_colors[k])

    image = (img.transpose(2, 0, 1) * 2.0 - 1.0).astype(np.float32)
    mask = (drawn > 0).astype(np.float32)[None]
    return image, mask


def joints_to_pixels(joints: np.ndarray, size):
    """Nearest pixel of each joint, clamped into the frame; also report clamping."""
    h, w = size
    ix = np.rint(joints[:, 0] * (w - 1)).astype(int)
    iy = np.rint(joints[:, 1] * (h - 1)).astype(int)
    clamped = bool((ix < 0).any() or (ix >= w).any() or (iy < 0).any() or (iy >= h).any())
    return np.clip(ix, 0, w - 1), np.clip(iy, 0, h - 1), clamped


def keypoints_to_heatmaps(skeleton, size=(64, 32), radius: int = 2) -> np.ndarray:
    """Binary disks: channel k is 1 on pixels within ``radius`` of joint k."""
    heatmaps, _ = keypoints_to_heatmaps_flagged(skeleton, size, radius)
    return heatmaps


def keypoints_to_heatmaps_flagged(skeleton, size=(64, 32), radius: int = 2):
    if radius < 1:
        raise ConfigurationError("heatmap radius must be at least one pixel")
    joints = skeleton.joints if isinstance(skeleton, Skeleton) else np.asarray(skeleton)
    h, w = size
    ix, iy, clamped = joints_to_pixels(joints, size)
    yy, xx = np.mgrid[0:h, 0:w]
    d2 = (xx[None] - ix[:, None, None]) ** 2 + (yy[None] - iy[:, None, None]) ** 2
    return (d2 <= radius * radius).astype(np.float32), clamped


def default_radius(size) -> int:
    return max(1, int(round(2 * size[0] / 64)))


@dataclass
class PoseSample:
    I_a: np.ndarray
    I_b: np.ndarray
    P_a: np.ndarray
    P_b: np.ndarray
    mask_b: np.ndarray
    joints_a: np.ndarray
    joints_b: np.ndarray
    identity_id: int
    index: int = 0
    split: str = "train"
    clamped: bool = False


_SPLIT_CODE = {"train": 0, "test": 1}


class PoseDataset:
    """Deterministic pose pairs; ``(seed, split, index)`` fixes a sample.

    Train samples cycle through identities ``0 .. n_train-1``; test samples use
    identities ``n_train .. n_train+n_test-1``, so the splits never share a
    person.
    """

    def __init__(self, seed: int = 0, split: str = "train", size=(64, 32), n_train_identities: int = 200,
                 n_test_identities: int = 50, radius: Optional[int] = None,
                 constraints: Optional[PoseConstraints] = None):
        if split not in _SPLIT_CODE:
            raise ConfigurationError(f"unknown split {split!r}")
        if size[0] < 32 or size[1] < 16:
            raise ConfigurationError("images must be at least 32×16")
        self.seed = seed
        self.split = split
        self.size = tuple(size)
        self.n_train = n_train_identities
        self.n_test = n_test_identities
        self.radius = radius or default_radius(size)
        self.constraints = constraints or PoseConstraints()
        self._identities = {}

    def identity_ids(self) -> range:
        if self.split == "train":
            return range(0, self.n_train)
        return range(self.n_train, self.n_train + self.n_test)

    def identity(self, identity_id: int) -> Identity:
        if identity_id not in self._identities:
            self._identities[identity_id] = make_identity(self.seed, identity_id)
        return self._identities[identity_id]

    def identity_for(self, index: int) -> int:
        ids = self.identity_ids()
        return ids[index % len(ids)]

    def __getitem__(self, index: int) -> PoseSample:
        ident = self.identity(self.identity_for(index))
        rng = np.random.default_rng([self.seed, _SPLIT_CODE[self.split], index])
        skel_a = sample_pose(rng, self.constraints, ident.proportions, self.size)
        skel_b = sample_pose(rng, self.constraints, ident.proportions, self.size)
        I_a, _ = render_figure(skel_a, ident, self.size)
        I_b, mask_b = render_figure(skel_b, ident, self.size)
        P_a, clamp_a = keypoints_to_heatmaps_flagged(skel_a, self.size, self.radius)
        P_b, clamp_b = keypoints_to_heatmaps_flagged(skel_b, self.size, self.radius)
        return PoseSample(I_a, I_b, P_a, P_b, mask_b, skel_a.joints, skel_b.joints, ident.identity_id,
                          index, self.split, clamp_a or clamp_b)

    def batch(self, indices) -> dict:
        samples = [self[i] for i in indices]
        return collate(samples)


def collate(samples) -> dict:
    out = {k: np.stack([getattr(s, k) for s in samples]) for k in ("I_a", "I_b", "P_a", "P_b", "mask_b",
                                                                     "joints_a", "joints_b")}
    out["identity_id"] = [s.identity_id for s in samples]
    out["index"] = [s.index for s in samples]
    return out
