"""Discretised workspaces from the IK oracle or from a trained confidence net.

Cells are evaluated at their centres.  Grid cells are flattened in C order
over ``(ix, iy, iz)``.  For the ``orientation`` kind the three axes are roll,
pitch and yaw (radians) at a fixed position instead of x, y, z.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kinematics as kin
from .dataset import vectorize_manipulator
from .exceptions import GridMismatch, ShapeMismatch, SpecMismatch

KINDS = ("reachable", "constant-orientation", "total-orientation", "dexterous", "orientation")
CHUNK = 2048


def r2rpy(R):
    """Inverse of :func:`kinematics.rpy2r`, angles wrapped to ``[0, 2pi)``."""
    R = np.asarray(R, dtype=float)
    pitch = np.arctan2(-R[..., 2, 0], np.hypot(R[..., 0, 0], R[..., 1, 0]))
    roll = np.arctan2(R[..., 2, 1], R[..., 2, 2])
    yaw = np.arctan2(R[..., 1, 0], R[..., 0, 0])
    return kin.wrap_angles(np.stack([roll, pitch, yaw], axis=-1))


@dataclass
class WorkspaceSpec:
    kind: str = "constant-orientation"
    fixed_rotation: Optional[np.ndarray] = None
    orientation_range: Optional[tuple] = None
    orientation_samples: int = 16
    fixed_position: Optional[np.ndarray] = None

    def validate(self):
        if self.kind not in KINDS:
            raise SpecMismatch(f"unknown workspace kind {self.kind!r}")
        if self.kind == "constant-orientation":
            if self.fixed_rotation is None or not kin.is_rotation(self.fixed_rotation, 1e-8):
                raise SpecMismatch("constant-orientation needs a valid fixed_rotation")
        if self.kind == "total-orientation":
            rng = np.asarray(self.orientation_range if self.orientation_range is not None else [],
                             dtype=float)
            if rng.shape != (3, 2) or np.any(rng[:, 0] > rng[:, 1]):
                raise SpecMismatch("total-orientation needs three (low, high) angle ranges")
        if self.kind == "orientation" and self.fixed_position is None:
            raise SpecMismatch("the orientation kind needs a fixed_position")
        if self.kind != "orientation" and self.fixed_position is not None:
            raise SpecMismatch("fixed_position only applies to the orientation kind")
        if self.kind in ("reachable", "total-orientation", "dexterous") \
                and self.orientation_samples < 1:
            raise SpecMismatch("orientation_samples must be >= 1")
        return self


@dataclass(frozen=True)
class GridGeometry:
    bounds: tuple
    resolution: tuple

    def __post_init__(self):
        b = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        r = tuple(int(x) for x in self.resolution)
        if len(b) != 3 or len(r) != 3:
            raise SpecMismatch("grid needs three axes")
        if any(lo >= hi for lo, hi in b) or min(r) < 1:
            raise SpecMismatch("bounds must be increasing and resolutions positive")
        object.__setattr__(self, "bounds", b)
        object.__setattr__(self, "resolution", r)

    @classmethod
    def cube(cls, half=0.4, n=20):
        return cls(((-half, half),) * 3, (n, n, n))

    @property
    def size(self):
        return int(np.prod(self.resolution))

    def axes(self):
        return [lo + (np.arange(n) + 0.5) * (hi - lo) / n
                for (lo, hi), n in zip(self.bounds, self.resolution)]

    def centers(self):
        gx, gy, gz = np.meshgrid(*self.axes(), indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])


@dataclass
class WorkspaceGrid:
    bounds: tuple
    resolution: tuple
    occupancy: np.ndarray
    kind: str = "constant-orientation"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.occupancy = np.asarray(self.occupancy, dtype=bool).ravel()
        self.geometry = GridGeometry(self.bounds, self.resolution)
        self.bounds, self.resolution = self.geometry.bounds, self.geometry.resolution
        if self.occupancy.size != self.geometry.size:
            raise ShapeMismatch(f"occupancy has {self.occupancy.size} cells, grid has "
                                f"{self.geometry.size}")

    @property
    def count(self):
        return int(self.occupancy.sum())

    def as_array(self):
        return self.occupancy.reshape(self.resolution)

    def to_csv(self, path):
        """Point list ``x,y,z,occupied`` with a header row."""
        pts = self.geometry.centers()
        with open(path, "w") as fh:
            fh.write("x,y,z,occupied\n")
            for (x, y, z), occ in zip(pts, self.occupancy):
                fh.write(f"{x:.17g},{y:.17g},{z:.17g},{int(occ)}\n")

    def to_rle(self):
        """Run-length text form; see ``read_rle``."""
        occ = self.occupancy.astype(np.int8)
        change = np.flatnonzero(np.diff(occ)) + 1
        edges = np.concatenate([[0], change, [occ.size]])
        runs = np.diff(edges)
        lines = [
            "# jacobnet occupancy grid v1",
            f"kind {self.kind}",
            "bounds " + " ".join(f"{lo:.17g} {hi:.17g}" for lo, hi in self.bounds),
            "resolution " + " ".join(str(n) for n in self.resolution),
            f"start {int(occ[0]) if occ.size else 0}",
            "runs " + " ".join(str(int(r)) for r in runs),
        ]
        return "\n".join(lines) + "\n"

    def write_rle(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_rle())


def read_rle(text_or_path):
    """Parse the run-length format written by :meth:`WorkspaceGrid.to_rle`.

    Lines are ``key value...``; runs alternate between the ``start`` value
    and its complement and must sum to the cell count.
    """
    text = text_or_path
    if isinstance(text_or_path, (str, os.PathLike)) and os.path.exists(text_or_path):
        with open(text_or_path) as fh:
            text = fh.read()
    fields = {}
    for line in str(text).splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, rest = line.partition(" ")
        fields[key] = rest.split()
    try:
        vals = [float(v) for v in fields["bounds"]]
        bounds = tuple(zip(vals[0::2], vals[1::2]))
        res = tuple(int(v) for v in fields["resolution"])
        start = int(fields["start"][0])
        runs = [int(v) for v in fields.get("runs", [])]
        kind = fields.get("kind", ["constant-orientation"])[0]
    except (KeyError, ValueError, IndexError) as exc:
        raise ValueError(f"malformed grid file: {exc}") from None
    values = np.concatenate([np.full(r, (start + i) % 2, dtype=bool) for i, r in enumerate(runs)]) \
        if runs else np.zeros(0, dtype=bool)
    return WorkspaceGrid(bounds, res, values, kind)


# --------------------------------------------------------------------------- #
# Orientation sampling shared by the IK and NN generators
# --------------------------------------------------------------------------- #

def _cell_rng(seed, cell):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(cell), 0xCE11]))


def _orientation_set(spec, rng):
    """RPY triples tested for one cell, shape ``(K, 3)``."""
    if spec.kind == "constant-orientation":
        return r2rpy(np.asarray(spec.fixed_rotation, dtype=float))[None]
    if spec.kind == "reachable":
        return rng.uniform(0.0, kin.TWO_PI, size=(spec.orientation_samples, 3))
    if spec.kind == "total-orientation":
        r = np.asarray(spec.orientation_range, dtype=float)
        return rng.uniform(r[:, 0], r[:, 1], size=(spec.orientation_samples, 3))
    if spec.kind == "dexterous":
        k = spec.orientation_samples
        ax = np.arange(k) * kin.TWO_PI / k
        g = np.meshgrid(ax, ax, ax, indexing="ij")
        return np.column_stack([x.ravel() for x in g])
    raise SpecMismatch(spec.kind)


def _cell_queries(spec, geometry, seed, n_starts, dof=6, free=False):
    """Positions, RPY and IK starts for every (cell, orientation) pair."""
    centers = geometry.centers()
    if spec.kind == "orientation":
        pos = np.broadcast_to(np.asarray(spec.fixed_position, float), centers.shape)
        rpy = centers[:, None, :]
    else:
        pos = centers
        rpy = None
    per_cell = []
    for c in range(geometry.size):
        rng = _cell_rng(seed, c)
        if free:
            ori = np.zeros((1, 3))
        else:
            ori = rpy[c] if rpy is not None else _orientation_set(spec, rng)
        starts = np.stack([kin.ik_starts(dof, rng, n_starts) for _ in range(len(ori))]) \
            if n_starts is not None else None
        per_cell.append((ori, starts))
    return pos, per_cell


def _combine(kind, hits):
    # hits: (cells, K) boolean
    if kind in ("total-orientation", "dexterous"):
        return hits.all(axis=1)
    return hits.any(axis=1)


# --------------------------------------------------------------------------- #
# IK oracle
# --------------------------------------------------------------------------- #

def _ik_chunk(args):
    chain, targets, starts, plim, cutoff, lam, mask = args
    return kin.multistart_batch(chain, targets, starts, plim=plim, cutoff=cutoff, lam=lam,
                                mask=mask)[1]


def gen_workspace_ik(m, spec, geometry, seed=0, n_starts=8, plim=50, cutoff=0.03, lam=0.1,
                     n_jobs=1):
    """Occupancy from multi-start numerical IK at every cell centre.

    For arms with fewer than six joints a random orientation is almost never
    attainable, so the ``reachable`` kind solves for position only there.
    """
    spec.validate()
    free = spec.kind == "reachable" and m.n < 6
    mask = (True, True, True, False, False, False) if free else None
    pos, per_cell = _cell_queries(spec, geometry, seed, n_starts, m.n, free)
    K = max(len(o) for o, _ in per_cell)
    hits = np.zeros((geometry.size, K), dtype=bool)
    decided = np.zeros(geometry.size, dtype=bool)
    chain = tuple(np.asarray(x) for x in m.chain)
    all_mode = spec.kind in ("total-orientation", "dexterous")
    for k in range(K):
        # skip cells whose outcome is already fixed
        todo = np.flatnonzero(~decided)
        if todo.size == 0:
            break
        targets = np.empty((todo.size, 4, 4))
        starts = np.empty((todo.size, n_starts + 1, m.n))
        for j, c in enumerate(todo):
            ori, st = per_cell[c]
            targets[j] = kin.Pose.from_rpy(pos[c], ori[k]).matrix
            starts[j] = st[k]
        jobs = [(chain, targets[s:s + CHUNK], starts[s:s + CHUNK], plim, cutoff, lam, mask)
                for s in range(0, todo.size, CHUNK)]
        if n_jobs != 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=n_jobs or os.cpu_count()) as pool:
                ok = np.concatenate(list(pool.map(_ik_chunk, jobs)))
        else:
            ok = np.concatenate([_ik_chunk(j) for j in jobs])
        hits[todo, k] = ok
        if all_mode:
            hits[todo[~ok], k + 1:] = False
            decided[todo[~ok]] = True
        else:
            hits[todo[ok], k + 1:] = True
            decided[todo[ok]] = True
    if all_mode:
        # undecided cells passed every orientation
        hits[~decided] = True
        occ = ~decided
    else:
        occ = decided
    return WorkspaceGrid(geometry.bounds, geometry.resolution, occ, spec.kind,
                         {"source": "ik", "seed": seed, "position_only": free})


# --------------------------------------------------------------------------- #
# Neural network
# --------------------------------------------------------------------------- #

def manipulator_features(m, width):
    """Manipulator block of the feature vector for a model of ``width`` inputs."""
    if width == 24:
        return np.concatenate([m.chain.d, m.chain.a, m.chain.alpha])
    if width == 96:
        if m.dynamics is None:
            raise ShapeMismatch("a 96-wide model needs a manipulator with dynamics parameters")
        return vectorize_manipulator(m)
    raise ShapeMismatch(f"no feature layout with {width} columns")


def gen_workspace_nn(model, m, spec, geometry, threshold=0.5, seed=0, batch=8192):
    """Occupancy where the model's confidence reaches ``threshold``.

    ``model`` needs ``input_dim`` and ``confidence(features) -> (N,)``.
    Orientation samples are drawn exactly as in :func:`gen_workspace_ik`.
    """
    spec.validate()
    width = model.input_dim
    mvec = manipulator_features(m, width)
    pos, per_cell = _cell_queries(spec, geometry, seed, None)
    K = max(len(o) for o, _ in per_cell)
    rows = np.empty((geometry.size * K, width))
    for c, (ori, _) in enumerate(per_cell):
        block = np.empty((K, width))
        block[:, :mvec.size] = mvec
        block[:, mvec.size:mvec.size + 3] = pos[c]
        block[:, mvec.size + 3:] = kin.wrap_angles(ori)
        rows[c * K:(c + 1) * K] = block
    conf = np.concatenate([np.asarray(model.confidence(rows[s:s + batch]), float).ravel()
                           for s in range(0, rows.shape[0], batch)])
    if conf.size != rows.shape[0]:
        raise ShapeMismatch("model returned the wrong number of confidences")
    hits = (conf >= threshold).reshape(geometry.size, K)
    return WorkspaceGrid(geometry.bounds, geometry.resolution, _combine(spec.kind, hits),
                         spec.kind, {"source": "nn", "threshold": threshold, "seed": seed})


def compare_workspaces(truth, pred):
    """Cell counts and IoU of ``pred`` against ``truth`` (IoU is symmetric)."""
    if truth.bounds != pred.bounds or truth.resolution != pred.resolution:
        raise GridMismatch("grids differ in bounds or resolution")
    a, b = truth.occupancy, pred.occupancy
    tp = int(np.sum(a & b))
    fp = int(np.sum(~a & b))
    fn = int(np.sum(a & ~b))
    tn = int(np.sum(~a & ~b))
    union = tp + fp + fn
    return {"iou": tp / union if union else 1.0, "true_pos": tp, "false_pos": fp,
            "false_neg": fn, "true_neg": tn}
