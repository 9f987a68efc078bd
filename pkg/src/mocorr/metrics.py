"""World-frame accuracy metrics between motion maps.

All positions come from forward kinematics of the stored poses; no alignment
(root centering, Procrustes) is applied before comparison.
"""

import numpy as np

from .errors import InvalidInputError
from .motion import extract_poses
from .skeleton import forward_kinematics, identity_pose


def joint_positions(motion, skeleton):
    """FK positions for every frame, shaped (T, n_joints, 3), in meters."""
    poses = extract_poses(motion, skeleton)
    return np.stack([forward_kinematics(skeleton, p) for p in poses])


def _paired_errors(pred, gt, skeleton):
    if pred.n_frames != gt.n_frames or pred.n_joints != gt.n_joints:
        raise InvalidInputError("motions must share frame and joint counts")
    pp = joint_positions(pred, skeleton)
    pg = joint_positions(gt, skeleton)
    return np.linalg.norm(pp - pg, axis=2), pg


def mpjpe(pred, gt, skeleton):
    """Mean per-joint position error in millimeters."""
    errors, _ = _paired_errors(pred, gt, skeleton)
    return float(errors.mean() * 1000.0)


def frame_mpjpe(pred, gt, skeleton):
    """Per-frame mean joint error in millimeters, shaped (T,)."""
    errors, _ = _paired_errors(pred, gt, skeleton)
    return errors.mean(axis=1) * 1000.0


def _neck_joint(skeleton):
    """Torso joint farthest from the root in the rest pose."""
    rest = forward_kinematics(skeleton, identity_pose(skeleton))
    torso = [j for j in skeleton.region_joints("torso") if j != 0]
    if not torso:
        raise InvalidInputError("skeleton has no torso joint besides the root")
    dists = [np.linalg.norm(rest[j] - rest[0]) for j in torso]
    return torso[int(np.argmax(dists))]


def pck(pred, gt, skeleton, alpha):
    """Percent of joint-frames with error below alpha times the torso length.

    The reference length is the ground-truth pelvis-to-neck distance of each
    frame, where the neck is the torso joint farthest from the root at rest.
    """
    if alpha <= 0.0:
        raise InvalidInputError("alpha must be positive")
    errors, pg = _paired_errors(pred, gt, skeleton)
    neck = _neck_joint(skeleton)
    torso_len = np.linalg.norm(pg[:, neck, :] - pg[:, 0, :], axis=1)
    hits = errors < alpha * torso_len[:, None]
    return float(hits.mean() * 100.0)
