"""Manipulator fixtures.

``fanuc_am120ib_10l``
    Standard-DH model of the Fanuc AM120iB/10L as published in the Robotics
    Toolbox for MATLAB (``mdl_fanuc10L``).  At ``q = 0`` it sits at
    ``(1.02, 0, -1.06)`` with identity orientation.
``puma560``
    Standard-DH PUMA560 (``mdl_puma560``, base offset dropped).  Its constant
    DH entries form the template for randomly sampled manipulators; the values
    are kept in ``data/puma_template.json``.
"""

import json
from functools import lru_cache
from importlib import resources

import numpy as np

from .kinematics import Chain, Manipulator, frames_batch

PI = np.pi


@lru_cache(maxsize=None)
def puma_template():
    text = resources.files("jacobnet").joinpath("data/puma_template.json").read_text()
    return json.loads(text)


def puma560():
    t = puma_template()
    return Manipulator.from_dh(t["d"], t["a"], t["alpha"], t["offset"], name="PUMA560")


def fanuc_am120ib_10l():
    return Manipulator.from_dh(
        d=[0.0, 0.0, 0.0, -0.96, 0.0, -0.1],
        a=[0.15, 0.77, 0.1, 0.0, 0.0, 0.0],
        alpha=[-PI / 2, PI, -PI / 2, PI / 2, -PI / 2, 0.0],
        name="Fanuc AM120iB/10L",
    )


def planar(*lengths):
    """All-revolute planar arm in the xy-plane with the given link lengths."""
    n = len(lengths)
    return Manipulator.from_dh(np.zeros(n), lengths, np.zeros(n), name=f"planar{n}")


def puma_canonical_ik(chain, targets, tol=1e-9, clip=False):
    """Closed-form IK for PUMA-template chains on one fixed branch.

    The branch is shoulder in front (the wrist centre lies on the positive
    side of the shoulder plane), elbow up (``sin(q3 + atan2(d4, a3)) >= 0``)
    and wrist unflipped (``sin(q5) >= 0``).  Returns ``(q, ok)``; rows whose
    chain does not have the template structure, or whose position lies
    outside the branch's reach, have ``ok = False``.  With ``clip`` the
    position equations are clamped instead, giving the nearest arm pose on
    the branch for targets just out of reach.
    """
    targets = np.asarray(targets, dtype=float)
    N = targets.shape[0]
    d, a, alpha, offset = (np.broadcast_to(np.asarray(x, dtype=float), (N, 6)) for x in chain)
    t = puma_template()
    shaped = (np.all(np.abs(alpha - np.asarray(t["alpha"])) < tol, axis=1)
              & np.all(np.abs(offset) < tol, axis=1)
              & np.all(np.abs(d[:, [0, 1, 4, 5]]) < tol, axis=1)
              & np.all(np.abs(a[:, [0, 3, 4, 5]]) < tol, axis=1)
              & (a[:, 1] > 0))
    d3, d4, a2, a3 = d[:, 2], d[:, 3], a[:, 1], a[:, 2]
    px, py, pz = targets[:, 0, 3], targets[:, 1, 3], targets[:, 2, 3]
    u2 = px ** 2 + py ** 2 - d3 ** 2
    u = np.sqrt(np.maximum(u2, 0.0))
    L2 = np.hypot(a3, d4)
    phi = np.arctan2(d4, a3)
    with np.errstate(divide="ignore", invalid="ignore"):
        K = (u ** 2 + pz ** 2 - a2 ** 2 - L2 ** 2) / (2.0 * a2)
        c = K / L2
    ok = shaped & (L2 > 0)
    if not clip:
        ok &= (u2 >= 0) & (np.abs(c) <= 1.0)
    q = np.zeros((N, 6))
    q[:, 0] = np.arctan2(py, px) - np.arctan2(-d3, u)
    q[:, 2] = np.arccos(np.clip(np.nan_to_num(c), -1.0, 1.0)) - phi
    X = a2 + a3 * np.cos(q[:, 2]) - d4 * np.sin(q[:, 2])
    Y = a3 * np.sin(q[:, 2]) + d4 * np.cos(q[:, 2])
    q[:, 1] = np.arctan2(pz, u) - np.arctan2(Y, X)
    # wrist: R36 = Rz(q4) Ry(-q5) Rz(q6)
    F = frames_batch(Chain(d, a, alpha, offset), q)
    R = np.einsum("nji,njk->nik", F[:, 3, :3, :3], targets[:, :3, :3])
    s5 = np.hypot(R[:, 0, 2], R[:, 1, 2])
    q[:, 3] = np.arctan2(-R[:, 1, 2], -R[:, 0, 2])
    q[:, 4] = np.arctan2(s5, R[:, 2, 2])
    q[:, 5] = np.arctan2(-R[:, 2, 1], R[:, 2, 0])
    return q, ok
