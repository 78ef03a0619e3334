"""Rigid-body kinematics for all-revolute serial chains (standard DH).

Everything here is vectorised over a leading batch axis: the ``*_batch``
functions take DH arrays broadcastable to ``(N, n)`` and joint arrays of shape
``(N, n)``.  The single-manipulator functions (:func:`fkine`, :func:`jacob0`,
:func:`ikine_num`, ...) are thin wrappers that run a batch of one, so the
scalar and batched paths share every floating point operation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .exceptions import DimensionMismatch, NonFinite, NotSkewSymmetric, SingularUpdate

TWO_PI = 2.0 * np.pi
SKEW_TOL = 1e-8


# --------------------------------------------------------------------------- #
# SO(3) helpers
# --------------------------------------------------------------------------- #

def skew(w):
    """Return the 3x3 antisymmetric matrix ``S`` with ``S @ x == cross(w, x)``.

    Accepts a 3-vector or a stack ``(..., 3)``.
    """
    w = np.asarray(w, dtype=float)
    if w.shape[-1] != 3:
        raise DimensionMismatch(f"skew expects 3-vectors, got shape {w.shape}")
    S = np.zeros(w.shape[:-1] + (3, 3))
    S[..., 0, 1] = -w[..., 2]
    S[..., 0, 2] = w[..., 1]
    S[..., 1, 0] = w[..., 2]
    S[..., 1, 2] = -w[..., 0]
    S[..., 2, 0] = -w[..., 1]
    S[..., 2, 1] = w[..., 0]
    return S


def vex(S, tol=SKEW_TOL, check=True):
    """Inverse of :func:`skew`.

    The result is the vector of the antisymmetric part of ``S``.  With
    ``check`` set, ``S`` must satisfy ``|S + S^T| <= tol`` elementwise.
    """
    S = np.asarray(S, dtype=float)
    if S.shape[-2:] != (3, 3):
        raise DimensionMismatch(f"vex expects 3x3 matrices, got shape {S.shape}")
    if check:
        sym = np.abs(S + np.swapaxes(S, -1, -2))
        if np.any(sym > tol):
            raise NotSkewSymmetric(
                f"matrix is not skew-symmetric: max |S + S^T| = {sym.max():.3e} > {tol:g}"
            )
    return 0.5 * np.stack(
        [
            S[..., 2, 1] - S[..., 1, 2],
            S[..., 0, 2] - S[..., 2, 0],
            S[..., 1, 0] - S[..., 0, 1],
        ],
        axis=-1,
    )


def rotx(t):
    c, s = np.cos(t), np.sin(t)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def roty(t):
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotz(t):
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rpy2r(angles):
    """Roll-pitch-yaw to rotation, ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``.

    ``angles`` is ``(..., 3)`` ordered (roll, pitch, yaw).
    """
    angles = np.asarray(angles, dtype=float)
    r, p, y = angles[..., 0], angles[..., 1], angles[..., 2]
    cr, sr = np.cos(r), np.sin(r)
    cp, sp = np.cos(p), np.sin(p)
    cy, sy = np.cos(y), np.sin(y)
    R = np.empty(angles.shape[:-1] + (3, 3))
    R[..., 0, 0] = cy * cp
    R[..., 0, 1] = cy * sp * sr - sy * cr
    R[..., 0, 2] = cy * sp * cr + sy * sr
    R[..., 1, 0] = sy * cp
    R[..., 1, 1] = sy * sp * sr + cy * cr
    R[..., 1, 2] = sy * sp * cr - cy * sr
    R[..., 2, 0] = -sp
    R[..., 2, 1] = cp * sr
    R[..., 2, 2] = cp * cr
    return R


def is_rotation(R, tol=1e-10):
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    return bool(
        np.all(np.abs(R @ R.T - np.eye(3)) <= tol) and abs(np.linalg.det(R) - 1.0) <= tol
    )


def wrap_angles(q):
    """Map angles into ``[0, 2*pi)``."""
    w = np.mod(np.asarray(q, dtype=float), TWO_PI)
    # mod can round up to exactly 2*pi for tiny negative inputs
    return np.where(w >= TWO_PI, 0.0, w)


# --------------------------------------------------------------------------- #
# Domain types
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class Pose:
    """Rigid transform: rotation ``R`` (3x3) and translation ``t`` (metres)."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        R = np.array(self.R, dtype=float).reshape(3, 3)
        t = np.array(self.t, dtype=float).reshape(3)
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, T):
        T = np.asarray(T, dtype=float)
        if T.shape != (4, 4):
            raise DimensionMismatch(f"expected a 4x4 homogeneous matrix, got {T.shape}")
        return cls(T[:3, :3], T[:3, 3])

    @classmethod
    def from_rpy(cls, position, angles):
        return cls(rpy2r(angles), position)

    @property
    def matrix(self):
        T = np.eye(4)
        T[:3, :3] = self.R
        T[:3, 3] = self.t
        return T

    def inv(self):
        return Pose(self.R.T, -self.R.T @ self.t)

    def __matmul__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        return Pose(self.R @ other.R, self.R @ other.t + self.t)

    def is_valid(self, tol=1e-10):
        return is_rotation(self.R, tol) and bool(np.all(np.isfinite(self.t)))


@dataclass(frozen=True)
class DHLink:
    """One revolute joint in standard Denavit-Hartenberg form."""

    d: float = 0.0
    a: float = 0.0
    alpha: float = 0.0
    offset: float = 0.0

    def __post_init__(self):
        if not all(np.isfinite([self.d, self.a, self.alpha, self.offset])):
            raise ValueError(f"DH parameters must be finite: {self}")


@dataclass(frozen=True)
class DynamicsParams:
    """Per-link rigid-body and drive parameters.

    They are carried as dataset features only; no dynamics are simulated.
    """

    m: float = 0.0
    r: tuple = (0.0, 0.0, 0.0)
    I: tuple = (0.0, 0.0, 0.0)
    B: float = 0.0
    Tc: tuple = (0.0, 0.0)
    G: float = 1.0
    Jm: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "r", tuple(float(x) for x in self.r))
        object.__setattr__(self, "I", tuple(float(x) for x in self.I))
        object.__setattr__(self, "Tc", tuple(float(x) for x in self.Tc))
        if len(self.r) != 3 or len(self.I) != 3 or len(self.Tc) != 2:
            raise DimensionMismatch("r and I need 3 components, Tc needs 2")
        if self.m < 0 or min(self.I) < 0 or self.B < 0 or self.Jm < 0:
            raise ValueError("mass, inertia, viscous friction and motor inertia must be >= 0")
        if not (self.Tc[0] >= 0 >= self.Tc[1]):
            raise ValueError("Coulomb friction must be (nonnegative, nonpositive)")


class Chain(NamedTuple):
    """DH parameter arrays, each broadcastable to ``(N, n)``."""

    d: np.ndarray
    a: np.ndarray
    alpha: np.ndarray
    offset: np.ndarray


@dataclass(frozen=True)
class Manipulator:
    links: tuple
    dynamics: Optional[tuple] = None
    name: str = ""
    chain: Chain = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        links = tuple(self.links)
        if len(links) < 1:
            raise ValueError("a manipulator needs at least one link")
        object.__setattr__(self, "links", links)
        if self.dynamics is not None:
            dyn = tuple(self.dynamics)
            if len(dyn) != len(links):
                raise DimensionMismatch(
                    f"{len(dyn)} dynamics records for {len(links)} links"
                )
            object.__setattr__(self, "dynamics", dyn)
        arrays = [np.array([getattr(L, k) for L in links], dtype=float)
                  for k in ("d", "a", "alpha", "offset")]
        for arr in arrays:
            arr.setflags(write=False)
        object.__setattr__(self, "chain", Chain(*arrays))

    @classmethod
    def from_dh(cls, d, a, alpha, offset=None, dynamics=None, name=""):
        n = len(d)
        if offset is None:
            offset = np.zeros(n)
        if not (len(a) == len(alpha) == len(offset) == n):
            raise DimensionMismatch("DH arrays must have equal length")
        links = [DHLink(float(d[i]), float(a[i]), float(alpha[i]), float(offset[i]))
                 for i in range(n)]
        return cls(tuple(links), dynamics, name)

    @property
    def n(self):
        return len(self.links)

    def fkine(self, q):
        return fkine(self, q)

    def jacob0(self, q):
        return jacob0(self, q)

    def jacobe(self, q):
        return jacobe(self, q)


# --------------------------------------------------------------------------- #
# Batched kernels
# --------------------------------------------------------------------------- #

def _compose(A, B):
    # einsum without optimize keeps each product independent of batch size
    return np.einsum("...ij,...jk->...ik", A, B)


def link_transforms(chain, q):
    """Per-link standard-DH transforms, shape ``(N, n, 4, 4)``."""
    q = np.asarray(q, dtype=float)
    d, a, alpha, offset = (np.broadcast_to(np.asarray(x, dtype=float), q.shape) for x in chain)
    th = q + offset
    ct, st = np.cos(th), np.sin(th)
    ca, sa = np.cos(alpha), np.sin(alpha)
    A = np.zeros(q.shape + (4, 4))
    A[..., 0, 0] = ct
    A[..., 0, 1] = -st * ca
    A[..., 0, 2] = st * sa
    A[..., 0, 3] = a * ct
    A[..., 1, 0] = st
    A[..., 1, 1] = ct * ca
    A[..., 1, 2] = -ct * sa
    A[..., 1, 3] = a * st
    A[..., 2, 1] = sa
    A[..., 2, 2] = ca
    A[..., 2, 3] = d
    A[..., 3, 3] = 1.0
    return A


def frames_batch(chain, q):
    """Cumulative frames ``T_0 .. T_n`` (``T_0`` = base), shape ``(N, n+1, 4, 4)``."""
    A = link_transforms(chain, q)
    N, n = A.shape[:2]
    F = np.empty((N, n + 1, 4, 4))
    F[:, 0] = np.eye(4)
    for i in range(n):
        F[:, i + 1] = _compose(F[:, i], A[:, i])
    return F


def fkine_batch(chain, q):
    return frames_batch(chain, q)[:, -1]


def jacob0_batch(chain, q, frames=None):
    """World-frame geometric Jacobians, shape ``(N, 6, n)``."""
    F = frames_batch(chain, q) if frames is None else frames
    n = F.shape[1] - 1
    z = F[:, :n, :3, 2]
    o = F[:, :n, :3, 3]
    pe = F[:, n:, :3, 3]
    J = np.empty((F.shape[0], 6, n))
    J[:, :3, :] = np.swapaxes(np.cross(z, pe - o), 1, 2)
    J[:, 3:, :] = np.swapaxes(z, 1, 2)
    return J


def pose_error_batch(current, target):
    """Stacked 6-vector errors between homogeneous transforms ``(N, 4, 4)``."""
    e = np.empty(current.shape[:-2] + (6,))
    e[..., :3] = target[..., :3, 3] - current[..., :3, 3]
    Rerr = _compose(target[..., :3, :3], np.swapaxes(current[..., :3, :3], -1, -2))
    e[..., 3:] = vex(Rerr, check=False)
    return e


def _rotation_cos(current, target):
    # cos of the residual rotation angle, from trace(Rt Rc^T)
    tr = np.einsum("...ij,...ij->...", target[..., :3, :3], current[..., :3, :3])
    return 0.5 * (tr - 1.0)


class IKBatchResult(NamedTuple):
    q: np.ndarray
    converged: np.ndarray
    residual: np.ndarray
    iterations: np.ndarray
    singular: np.ndarray


def ikine_batch(chain, targets, q0, plim=50, cutoff=0.03, lam=0.1, history=None, mask=None):
    """Damped least squares IK run independently for every row of a batch.

    A trial step ``dq = (J^T J + lam I)^-1 J^T e`` is accepted only if it lowers
    the error norm, after which ``lam`` is halved; a rejected step doubles
    ``lam``.  The residual sequence is therefore non-increasing.  Convergence
    requires ``|e| < cutoff`` and a residual rotation angle below 90 degrees,
    which excludes the spurious zero of the sine-type error at a half turn.

    Rows whose damped normal matrix stays non-finite after 8 doublings of
    ``lam`` are dropped and flagged in ``singular``.

    ``mask`` (6 booleans over x, y, z, rx, ry, rz) restricts the error to a
    subset of task-space axes, e.g. position only for short arms.  The
    half-turn guard applies only when all rotation axes are kept.
    """
    sel = np.ones(6, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if sel.shape != (6,) or not sel.any():
        raise ValueError("mask must hold 6 booleans with at least one set")
    guard = bool(sel[3:].all())
    q = np.array(q0, dtype=float, copy=True)
    if q.ndim != 2:
        raise DimensionMismatch("q0 must be (N, n)")
    N, n = q.shape
    targets = np.asarray(targets, dtype=float)
    if targets.shape != (N, 4, 4):
        raise DimensionMismatch(f"targets must be ({N}, 4, 4), got {targets.shape}")
    if plim < 1 or cutoff <= 0:
        raise ValueError("plim must be >= 1 and cutoff > 0")
    chain = Chain(*(np.broadcast_to(np.asarray(x, dtype=float), (N, n)) for x in chain))

    def rot_ok(Tc, Tt):
        return _rotation_cos(Tc, Tt) > 0.0 if guard else np.ones(len(Tc), dtype=bool)

    T = fkine_batch(chain, q)
    e = pose_error_batch(T, targets)[:, sel]
    r = np.linalg.norm(e, axis=1)
    ok = (r < cutoff) & rot_ok(T, targets)
    lam_v = np.full(N, float(lam))
    iters = np.zeros(N, dtype=int)
    singular = np.zeros(N, dtype=bool)
    active = ~ok
    eye = np.eye(n)
    if history is not None:
        history.append(r.copy())

    for _ in range(plim):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        sub = Chain(*(x[idx] for x in chain))
        F = frames_batch(sub, q[idx])
        J = jacob0_batch(sub, q[idx], frames=F)[:, sel]
        Jt = np.swapaxes(J, 1, 2)
        JtJ = _compose(Jt, J)
        g = np.einsum("kij,kj->ki", Jt, e[idx])
        lam_i = lam_v[idx]
        dq = _damped_solve(JtJ, g, lam_i, eye)
        bad = ~np.all(np.isfinite(dq), axis=1)
        if np.any(bad):
            singular[idx[bad]] = True
            active[idx[bad]] = False
            keep = ~bad
            idx, dq, lam_i = idx[keep], dq[keep], lam_i[keep]
            sub = Chain(*(x[idx] for x in chain))
        q_new = q[idx] + dq
        T_new = fkine_batch(sub, q_new)
        e_new = pose_error_batch(T_new, targets[idx])[:, sel]
        r_new = np.linalg.norm(e_new, axis=1)
        better = r_new < r[idx]
        acc = idx[better]
        q[acc] = q_new[better]
        T[acc] = T_new[better]
        e[acc] = e_new[better]
        r[acc] = r_new[better]
        lam_v[idx] = np.where(better, np.maximum(lam_i * 0.5, 1e-9), np.minimum(lam_i * 2.0, 1e9))
        iters[idx] += 1
        ok[idx] = (r[idx] < cutoff) & rot_ok(T[idx], targets[idx])
        active[idx] = ~ok[idx]
        if history is not None:
            history.append(r.copy())
    return IKBatchResult(q, ok, r, iters, singular)


def _damped_solve(JtJ, g, lam, eye, retries=8):
    lam = lam.copy()
    dq = np.full(g.shape, np.nan)
    todo = np.arange(g.shape[0])
    for _ in range(retries + 1):
        A = JtJ[todo] + lam[todo, None, None] * eye
        try:
            sol = np.linalg.solve(A, g[todo][..., None])[..., 0]
        except np.linalg.LinAlgError:
            sol = np.full((todo.size, g.shape[1]), np.nan)
            for k, j in enumerate(todo):
                try:
                    sol[k] = np.linalg.solve(A[k], g[j])
                except np.linalg.LinAlgError:
                    pass
        good = np.all(np.isfinite(sol), axis=1)
        dq[todo[good]] = sol[good]
        todo = todo[~good]
        if todo.size == 0:
            break
        lam[todo] *= 2.0
    return dq


def multistart_batch(chain, targets, starts, plim=50, cutoff=0.03, lam=0.1, mask=None):
    """Run :func:`ikine_batch` over starts ``(N, S, n)`` until each row converges.

    Start ``s`` is only attempted for rows where starts ``0..s-1`` failed, so
    the solution returned is the one reached from the earliest successful
    start.  Returns ``(q, converged, residual, start_index)``; ``start_index``
    is -1 for rows that never converged.
    """
    starts = np.asarray(starts, dtype=float)
    N, S, n = starts.shape
    chain = Chain(*(np.broadcast_to(np.asarray(x, dtype=float), (N, n)) for x in chain))
    targets = np.asarray(targets, dtype=float)
    q = starts[:, 0].copy()
    ok = np.zeros(N, dtype=bool)
    res = np.full(N, np.inf)
    which = np.full(N, -1)
    for s in range(S):
        idx = np.flatnonzero(~ok)
        if idx.size == 0:
            break
        out = ikine_batch(Chain(*(x[idx] for x in chain)), targets[idx], starts[idx, s],
                          plim=plim, cutoff=cutoff, lam=lam, mask=mask)
        # keep the best residual seen for rows that never converge
        improve = out.converged | (out.residual < res[idx])
        upd = idx[improve]
        q[upd] = out.q[improve]
        res[upd] = out.residual[improve]
        ok[idx] = out.converged
        which[idx[out.converged]] = s
    return q, ok, res, which


# --------------------------------------------------------------------------- #
# Single-manipulator API
# --------------------------------------------------------------------------- #

def _check_q(m, q):
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.size != m.n:
        raise DimensionMismatch(f"expected {m.n} joint angles, got {q.size}")
    return q


def fkine(m, q):
    """End-effector pose of manipulator ``m`` at joint angles ``q``."""
    q = _check_q(m, q)
    return Pose.from_matrix(fkine_batch(m.chain, q[None])[0])


def jacobian_fd(m, q, h=1e-9):
    """Forward-difference Jacobian built column by column from pose increments.

    Column ``i`` is ``[dp / h ; vex((R(q + h e_i) - R(q)) / h @ R(q)^T)]`` in the
    world frame.  The default step is tiny; ``h=1e-6`` is better conditioned
    in double precision.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    q = _check_q(m, q)
    n = q.size
    Q = np.tile(q, (n + 1, 1))
    Q[1:] += h * np.eye(n)
    T = fkine_batch(m.chain, Q)
    T0, Ti = T[0], T[1:]
    J = np.empty((6, n))
    J[:3] = ((Ti[:, :3, 3] - T0[:3, 3]) / h).T
    dR = (Ti[:, :3, :3] - T0[:3, :3]) / h
    J[3:] = vex(_compose(dR, T0[:3, :3].T), check=False).T
    if not np.all(np.isfinite(J)):
        raise NonFinite("finite-difference Jacobian overflowed")
    return J


def jacob0(m, q):
    """World-frame geometric Jacobian (6 x n), rows (vx, vy, vz, wx, wy, wz)."""
    q = _check_q(m, q)
    return jacob0_batch(m.chain, q[None])[0]


def jacobe(m, q):
    """Jacobian expressed in the end-effector frame."""
    q = _check_q(m, q)
    F = frames_batch(m.chain, q[None])
    J = jacob0_batch(m.chain, q[None], frames=F)[0]
    Rt = F[0, -1, :3, :3].T
    return np.vstack([Rt @ J[:3], Rt @ J[3:]])


def pose_error(current, target):
    """``[t_target - t_current ; vex(antisym(R_target @ R_current^T))]``."""
    return pose_error_batch(current.matrix[None], target.matrix[None])[0]


class IKSolution(NamedTuple):
    q: np.ndarray
    converged: bool
    residual: float
    iterations: int
    residuals: list


def ikine_num(m, target, q0=None, plim=50, cutoff=0.03, lam=0.1):
    """Single-start damped least squares IK.

    ``residuals`` holds the error norm after every iteration (non-increasing).
    Raises :class:`SingularUpdate` if the damped system cannot be solved.
    """
    q0 = np.zeros(m.n) if q0 is None else _check_q(m, q0)
    hist = []
    out = ikine_batch(m.chain, target.matrix[None], q0[None], plim=plim, cutoff=cutoff,
                      lam=lam, history=hist)
    if out.singular[0]:
        raise SingularUpdate("damped normal matrix singular after 8 lambda doublings")
    return IKSolution(out.q[0], bool(out.converged[0]), float(out.residual[0]),
                      int(out.iterations[0]), [float(h[0]) for h in hist])


def ik_starts(n, rng, n_random=8):
    """Zero configuration followed by ``n_random`` uniform draws on ``[0, 2pi)^n``."""
    return np.vstack([np.zeros((1, n)), rng.uniform(0.0, TWO_PI, size=(n_random, n))])


def ikine_multistart(m, target, rng=None, n_random=8, plim=50, cutoff=0.03, lam=0.1,
                     starts: Optional[Sequence] = None):
    """Multi-start IK: zero configuration first, then random restarts."""
    if starts is None:
        rng = np.random.default_rng(rng)
        starts = ik_starts(m.n, rng, n_random)
    starts = np.asarray(starts, dtype=float)
    q, ok, res, _ = multistart_batch(m.chain, target.matrix[None], starts[None],
                                     plim=plim, cutoff=cutoff, lam=lam)
    return IKSolution(q[0], bool(ok[0]), float(res[0]), -1, [])
