"""Independent reference implementations used only by tests.

These deliberately avoid the package's own math: rotations go through
scipy.spatial.transform, forward kinematics through explicit 4x4 homogeneous
matrices, projections through a 3x4 matrix, distances through brute-force
loops.
"""

import numpy as np
from scipy.spatial.transform import Rotation

from mocorr.skeleton import AXES


def scipy_quat(q_wxyz):
    """Package order (w,x,y,z) -> scipy Rotation."""
    q = np.asarray(q_wxyz, dtype=float)
    return Rotation.from_quat(np.concatenate([q[1:], q[:1]]))


def quat_from_scipy(rot):
    x, y, z, w = rot.as_quat()
    q = np.array([w, x, y, z])
    return q if q[0] >= 0 else -q


def local_rotation_matrix(joint, theta):
    """Rx * Ry * Rz restricted to the joint's declared axes."""
    mat = np.eye(3)
    for axis, angle in zip(joint.dof, theta):
        mat = mat @ Rotation.from_euler(axis.lower(), angle).as_matrix()
    return mat


def fk_homogeneous(skeleton, pose):
    """Forward kinematics with explicit 4x4 matrix chains."""
    n = skeleton.n_joints
    world = [None] * n
    positions = np.zeros((n, 3))
    for i, joint in enumerate(skeleton.joints):
        local = np.eye(4)
        if joint.parent is None:
            local[:3, :3] = Rotation.from_rotvec(pose.root_rot).as_matrix()
            local[:3, 3] = pose.root_trans
            world[i] = local
        else:
            local[:3, :3] = local_rotation_matrix(
                joint, pose.theta[skeleton.theta_slice(i)])
            local[:3, 3] = joint.offset
            world[i] = world[joint.parent] @ local
        positions[i] = world[i][:3, 3]
    return positions, [w[:3, :3] for w in world]


def project_matrix(camera, points):
    """Pinhole projection via the stacked 3x4 matrix P = K [R | t]."""
    k = np.array([[camera.fx, 0.0, camera.cx],
                  [0.0, camera.fy, camera.cy],
                  [0.0, 0.0, 1.0]])
    p = k @ np.hstack([camera.rotation, camera.translation[:, None]])
    homo = np.hstack([points, np.ones((len(points), 1))])
    proj = homo @ p.T
    return proj[:, :2] / proj[:, 2:3], proj[:, 2]


def chamfer_sq(a, b):
    """Mean squared nearest-neighbor distance from each of a to b."""
    total = 0.0
    for p in a:
        best = min(float(np.sum((p - q) ** 2)) for q in b)
        total += best
    return total / len(a)


def axis_matrix(axis, angle):
    return Rotation.from_euler(AXES[axis].lower() if isinstance(axis, int)
                               else axis.lower(), angle).as_matrix()


def central_diff(f, x, step):
    """Dense central-difference Jacobian of a vector function."""
    x = np.asarray(x, dtype=float)
    r0 = np.asarray(f(x))
    jac = np.zeros((r0.size, x.size))
    for i in range(x.size):
        h = step * max(1.0, abs(x[i]))
        xp = x.copy(); xp[i] += h
        xm = x.copy(); xm[i] -= h
        jac[:, i] = (np.asarray(f(xp)) - np.asarray(f(xm))) / (2.0 * h)
    return jac


def grad_check(analytic, numeric, rtol=1e-4, floor=1e-7):
    """Relative-error comparison with an absolute floor for tiny entries."""
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), floor / rtol)
    rel = np.abs(analytic - numeric) / denom
    return float(rel.max())
