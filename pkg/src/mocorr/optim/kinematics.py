"""Derivatives of forward kinematics and projection.

Pose parameters are stacked as [theta (total_dof), root_rot (3),
root_trans (3)], the layout every residual builder in this package uses.
"""

import numpy as np

from .. import quat
from ..camera import Z_EPS
from ..skeleton import SkeletalPose, fk_frames


def pose_params(pose):
    return np.concatenate([pose.theta, pose.root_rot, pose.root_trans])


def params_to_pose(skeleton, p):
    d = skeleton.total_dof
    return SkeletalPose(p[:d], p[d:d + 3], p[d + 3:d + 6])


def fk_jacobian(skeleton, pose):
    """Joint positions, world rotations, and d(positions)/d(pose params).

    Returns (pos (n,3), rot (n,3,3), jac (n,3,total_dof+6)). An angle moves a
    joint by omega x (joint - pivot) where omega is the rotation axis in
    world coordinates; the root axis-angle derivative uses the closed-form
    rotation-matrix differential.
    """
    pos, rot = fk_frames(skeleton, pose)
    n = skeleton.n_joints
    d = skeleton.total_dof
    jac = np.zeros((n, 3, d + 6))

    jac[:, :, d + 3:] = np.eye(3)

    # root rotation: pos_i = t + R(v) s_i with s_i fixed in the body frame
    body = (pos - pose.root_trans) @ rot[0]
    d_rot = quat.rotvec_matrix_jacobian(pose.root_rot)
    for k in range(3):
        jac[:, :, d + k] = body @ d_rot[k].T

    for j, joint in enumerate(skeleton.joints):
        if not joint.dof:
            continue
        parent_rot = rot[joint.parent] if joint.parent is not None else np.eye(3)
        before = np.eye(3)
        angles = pose.theta[skeleton.theta_slice(j)]
        col = int(skeleton.dof_start[j])
        moved = skeleton.descendants[j]
        lever = pos[moved] - pos[j]
        for m, ax in enumerate(joint.dof):
            omega = parent_rot @ before @ quat.axis_unit(ax)
            jac[moved, :, col + m] = np.cross(omega, lever)
            before = before @ quat.axis_rotation(ax, angles[m])
    return pos, rot, jac


def projection_jacobian(camera, world_point):
    """(duv/dworld (2,3), camera-space z, visible?) for one world point."""
    p = camera.to_camera(world_point)
    z = p[2]
    if z <= Z_EPS:
        return np.zeros((2, 3)), z, False
    duv_dcam = np.array(
        [
            [camera.fx / z, 0.0, -camera.fx * p[0] / (z * z)],
            [0.0, camera.fy / z, -camera.fy * p[1] / (z * z)],
        ]
    )
    return duv_dcam @ camera.rotation, z, True
