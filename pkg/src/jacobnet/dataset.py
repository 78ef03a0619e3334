"""Random manipulator / pose sampling, IK-based labelling and the CSV schema.

Feature layout (columns are zero-based)::

    0-17   DH block [d1..d6, a1..a6, alpha1..alpha6]; free columns 2, 3, 7, 8
    kinematic variants (24 columns):
    18-20  position (m)           21-23  roll, pitch, yaw (rad)
    dynamic variants (96 columns):
    18-23  m     24-41  r (per link x, y, z)     42-59  I (per link xx, yy, zz)
    60-65  B     66-77  Tc (per link +, -)       78-83  G       84-89  Jm
    90-92  position                              93-95  roll, pitch, yaw

Every sample draws from its own generator seeded by ``(seed, index)``, and
samples are labelled in fixed-size chunks, so serial and process-parallel
generation produce bitwise identical files.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import kinematics as kin
from .exceptions import MalformedRow, ShapeMismatch
from .robots import puma_canonical_ik, puma_template

log = logging.getLogger(__name__)

VARIANTS = ("conf-kine", "conf-dyna", "jacob-e", "jacob-0")
DOF = 6
N_DH = 3 * DOF
CHUNK = 1024

FILE_STEMS = {
    "conf-kine": ("conf_feature_{}.csv", "conf_label_{}.csv", "conf_meta.json"),
    "conf-dyna": ("conf_feature_dyna_{}.csv", "conf_label_dyna_{}.csv", "conf_dyna_meta.json"),
    "jacob-e": ("jacob_feature_{}.csv", "jacob_label_{}.csv", "jacob_meta.json"),
    "jacob-0": ("jacob0_feature_{}.csv", "jacob0_label_{}.csv", "jacob0_meta.json"),
}

# (first column, last column + 1, low, high)
DYNA_RANGES = {
    "m": (18, 24, 0.0, 10.0),
    "r": (24, 42, -0.05, 0.05),
    "I": (42, 60, 0.0, 1.0),
    "B": (60, 66, 0.0, 0.005),
    "Tc+": (66, 78, 0.0, 0.5),
    "Tc-": (66, 78, -0.5, 0.0),
    "G": (78, 84, -50.0, 50.0),
    "Jm": (84, 90, 0.0, 5e-4),
}


def is_dynamic(variant):
    return variant != "conf-kine"


def is_jacobian(variant):
    return variant.startswith("jacob")


@dataclass
class SampleOptions:
    """Sampling options; names follow the ``NNsample`` option list.

    ``mani``, ``type``, ``r``, ``dist``, ``pose_r`` and ``ikine`` are recorded in
    the metadata sidecar but do not change sampling.
    """

    variant: str = "conf-kine"
    dof: int = DOF
    pose_position_range: tuple = (-0.4, 0.4)
    dh_free_range: tuple = (0.0, 0.5)
    plim: int = 50
    cutoff: float = 0.03
    test_ratio: float = 0.01
    seed: int = 0
    parallel: bool = False
    n_jobs: int | None = None
    n_starts: int = 8
    lam: float = 0.1
    mani: str = "kine"
    type: str = "spherical"
    r: float = 0.5
    dist: str = "uniform"
    pose_r: float = 0.8
    ikine: str = "numeric"
    format: str = "csv"
    branch: str = "canonical"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.dof != DOF:
            raise ValueError("only 6-DOF manipulators are sampled")
        if self.plim < 1 or self.cutoff <= 0:
            raise ValueError("plim must be >= 1 and cutoff > 0")
        if not 0 < self.test_ratio < 1:
            raise ValueError("test_ratio must lie in (0, 1)")
        if self.branch not in ("canonical", "first"):
            raise ValueError("branch must be 'canonical' or 'first'")
        self.pose_position_range = tuple(float(x) for x in self.pose_position_range)
        self.dh_free_range = tuple(float(x) for x in self.dh_free_range)


@dataclass(frozen=True)
class FeatureLayout:
    variant: str
    width: int
    free_columns: tuple = (2, 3, 7, 8)
    constant_columns: tuple = (0, 1, 4, 5, 6) + tuple(range(9, 18))
    position_columns: tuple = ()
    orientation_columns: tuple = ()
    n_targets: int = 1

    @classmethod
    def for_variant(cls, variant):
        width = 96 if is_dynamic(variant) else 24
        return cls(
            variant=variant,
            width=width,
            position_columns=tuple(range(width - 6, width - 3)),
            orientation_columns=tuple(range(width - 3, width)),
            n_targets=36 if is_jacobian(variant) else 1,
        )

    def ranges(self, opts=None):
        """Per-column ``(low, high)`` bounds as two arrays."""
        opts = opts or SampleOptions(variant=self.variant)
        lo = np.empty(self.width)
        hi = np.empty(self.width)
        tmpl = _template_vector()
        lo[:N_DH] = hi[:N_DH] = tmpl
        lo[list(self.free_columns)] = opts.dh_free_range[0]
        hi[list(self.free_columns)] = opts.dh_free_range[1]
        if self.width == 96:
            for name, (a, b, low, high) in DYNA_RANGES.items():
                cols = slice(a, b, 2) if name == "Tc+" else slice(a + 1, b, 2) if name == "Tc-" else slice(a, b)
                lo[cols], hi[cols] = low, high
        lo[list(self.position_columns)] = opts.pose_position_range[0]
        hi[list(self.position_columns)] = opts.pose_position_range[1]
        lo[list(self.orientation_columns)] = 0.0
        hi[list(self.orientation_columns)] = kin.TWO_PI
        return lo, hi


@dataclass
class DatasetFile:
    features: np.ndarray
    labels: np.ndarray
    variant: str = "conf-kine"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.labels = np.asarray(self.labels, dtype=float)
        if self.labels.ndim == 1:
            self.labels = self.labels[:, None]
        if self.features.shape[0] != self.labels.shape[0]:
            raise ShapeMismatch("features and labels have different row counts")

    def __len__(self):
        return self.features.shape[0]

    @property
    def reachable(self):
        """Boolean mask of rows with a solution (label 1 or finite Jacobian)."""
        if is_jacobian(self.variant):
            return np.all(np.isfinite(self.labels), axis=1)
        return self.labels[:, 0] == 1

    def positive_ratio(self):
        return float(np.mean(self.reachable)) if len(self) else float("nan")


# --------------------------------------------------------------------------- #
# Sampling
# --------------------------------------------------------------------------- #

def _template_vector():
    t = puma_template()
    return np.concatenate([t["d"], t["a"], t["alpha"]]).astype(float)


def sample_rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def _draw_free(rng, opts):
    lo, hi = opts.dh_free_range
    return rng.uniform(lo, hi, size=4)


def _draw_dynamics(rng):
    m = rng.uniform(0.0, 10.0, DOF)
    r = rng.uniform(-0.05, 0.05, (DOF, 3))
    inertia = rng.uniform(0.0, 1.0, (DOF, 3))
    B = rng.uniform(0.0, 0.005, DOF)
    tc = np.stack([rng.uniform(0.0, 0.5, DOF), rng.uniform(-0.5, 0.0, DOF)], axis=1)
    G = rng.uniform(-50.0, 50.0, DOF)
    Jm = rng.uniform(0.0, 5e-4, DOF)
    return np.concatenate([m, r.ravel(), inertia.ravel(), B, tc.ravel(), G, Jm])


def _draw_pose(rng, opts):
    lo, hi = opts.pose_position_range
    return rng.uniform(lo, hi, 3), rng.uniform(0.0, kin.TWO_PI, 3)


def _dh_vector(free):
    v = _template_vector()
    v[[2, 3, 7, 8]] = free
    return v


def parse_manipulator(vec):
    """Rebuild a :class:`Manipulator` from its 18- or 90-long vector."""
    vec = np.asarray(vec, dtype=float)
    if vec.size not in (N_DH, N_DH + 72):
        raise ShapeMismatch(f"manipulator vectors have 18 or 90 entries, got {vec.size}")
    d, a, alpha = vec[:6], vec[6:12], vec[12:18]
    dyn = None
    if vec.size > N_DH:
        x = vec[N_DH:]
        m, r, inertia, B = x[0:6], x[6:24].reshape(6, 3), x[24:42].reshape(6, 3), x[42:48]
        tc, G, Jm = x[48:60].reshape(6, 2), x[60:66], x[66:72]
        dyn = tuple(
            kin.DynamicsParams(m[i], r[i], inertia[i], B[i], tc[i], G[i], Jm[i]) for i in range(6)
        )
    return kin.Manipulator.from_dh(d, a, alpha, dynamics=dyn)


def vectorize_manipulator(m):
    c = m.chain
    parts = [c.d, c.a, c.alpha]
    if m.dynamics is not None:
        dy = m.dynamics
        parts += [
            [p.m for p in dy],
            np.ravel([p.r for p in dy]),
            np.ravel([p.I for p in dy]),
            [p.B for p in dy],
            np.ravel([p.Tc for p in dy]),
            [p.G for p in dy],
            [p.Jm for p in dy],
        ]
    return np.concatenate([np.asarray(p, dtype=float) for p in parts])


def rand_kine(rng, opts=None):
    """PUMA-template manipulator with d3, d4, a2, a3 drawn uniformly."""
    opts = opts or SampleOptions()
    return parse_manipulator(_dh_vector(_draw_free(rng, opts)))


def rand_dyna(rng, opts=None):
    opts = opts or SampleOptions(variant="conf-dyna")
    dh = _dh_vector(_draw_free(rng, opts))
    return parse_manipulator(np.concatenate([dh, _draw_dynamics(rng)]))


def rand_pose(rng, opts=None):
    """Uniform position in the cube and RPY angles uniform on ``[0, 2pi)``."""
    opts = opts or SampleOptions()
    pos, ang = _draw_pose(rng, opts)
    return kin.Pose.from_rpy(pos, ang)


def pose_features(pose_or_position, angles=None):
    """Six pose columns (position, RPY) for a position and angle triple."""
    return np.concatenate([np.asarray(pose_or_position, float), kin.wrap_angles(angles)])


# --------------------------------------------------------------------------- #
# Labelling
# --------------------------------------------------------------------------- #

def _solve(m, pose, opts, rng):
    return kin.ikine_multistart(m, pose, rng=rng, n_random=opts.n_starts, plim=opts.plim,
                                cutoff=opts.cutoff, lam=opts.lam)


def label_confidence(m, pose, opts=None, rng=None):
    """1 if multi-start IK reaches ``pose`` within the cutoff, else 0."""
    opts = opts or SampleOptions()
    return int(_solve(m, pose, opts, np.random.default_rng(rng)).converged)


def _label_branch(chain, targets, q, ok, opts):
    """Joint solutions used for Jacobian labels.

    Existence is decided by multi-start IK alone.  With ``branch="canonical"``
    reachable rows are re-solved from the closed-form solution of one fixed
    arm configuration, so that the Jacobian label is a single-valued function
    of the pose; rows where that fails keep the multi-start solution.
    """
    if opts.branch != "canonical" or not np.any(ok):
        return q
    q = q.copy()
    qa, good = puma_canonical_ik(chain, targets, clip=True)
    idx = np.flatnonzero(ok & good)
    if idx.size:
        sub = kin.Chain(*(np.broadcast_to(np.asarray(x, float), q.shape)[idx] for x in chain))
        res = kin.ikine_batch(sub, targets[idx], qa[idx], plim=opts.plim, cutoff=opts.cutoff,
                              lam=opts.lam)
        q[idx[res.converged]] = res.q[res.converged]
    return q


def label_jacobian(m, pose, frame="world", opts=None, rng=None):
    """Row-major 36-vector Jacobian at the IK solution, or all ``inf``."""
    if frame not in ("world", "end-effector"):
        raise ValueError("frame must be 'world' or 'end-effector'")
    opts = opts or SampleOptions(variant="jacob-0")
    sol = _solve(m, pose, opts, np.random.default_rng(rng))
    if not sol.converged:
        return np.full(36, np.inf)
    q = _label_branch(m.chain, pose.matrix[None], sol.q[None], np.array([True]), opts)[0]
    J = kin.jacob0(m, q) if frame == "world" else kin.jacobe(m, q)
    return J.ravel()


def _sample_chunk(args):
    """Draw and label samples ``indices`` (one chunk)."""
    opts, indices = args
    variant = opts.variant
    layout = FeatureLayout.for_variant(variant)
    k = len(indices)
    feats = np.empty((k, layout.width))
    starts = np.empty((k, opts.n_starts + 1, DOF))
    targets = np.empty((k, 4, 4))
    for row, idx in enumerate(indices):
        rng = sample_rng(opts.seed, idx)
        dh = _dh_vector(_draw_free(rng, opts))
        parts = [dh]
        if is_dynamic(variant):
            parts.append(_draw_dynamics(rng))
        pos, ang = _draw_pose(rng, opts)
        parts.append(pos_ang := pose_features(pos, ang))
        feats[row] = np.concatenate(parts)
        targets[row] = kin.Pose.from_rpy(pos_ang[:3], pos_ang[3:]).matrix
        starts[row] = kin.ik_starts(DOF, rng, opts.n_starts)
    dh = feats[:, :N_DH]
    chain = kin.Chain(dh[:, 0:6], dh[:, 6:12], dh[:, 12:18], np.zeros((k, DOF)))
    q, ok, _, _ = kin.multistart_batch(chain, targets, starts, plim=opts.plim,
                                       cutoff=opts.cutoff, lam=opts.lam)
    if not is_jacobian(variant):
        return feats, ok.astype(float)[:, None]
    q = _label_branch(chain, targets, q, ok, opts)
    labels = np.full((k, 36), np.inf)
    if np.any(ok):
        sub = kin.Chain(*(x[ok] for x in chain))
        F = kin.frames_batch(sub, q[ok])
        J = kin.jacob0_batch(sub, q[ok], frames=F)
        if variant == "jacob-e":
            Rt = np.swapaxes(F[:, -1, :3, :3], 1, 2)
            J = np.concatenate([kin._compose(Rt, J[:, :3]), kin._compose(Rt, J[:, 3:])], axis=1)
        labels[ok] = J.reshape(-1, 36)
    return feats, labels


def generate(num, opts):
    """Draw and label ``num`` samples; returns ``(features, labels)``."""
    if num < 1:
        raise ValueError("num must be >= 1")
    chunks = [(opts, range(s, min(s + CHUNK, num))) for s in range(0, num, CHUNK)]
    if opts.parallel and len(chunks) > 1:
        workers = opts.n_jobs or os.cpu_count() or 1
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_sample_chunk, chunks))
    else:
        parts = [_sample_chunk(c) for c in chunks]
    return np.vstack([p[0] for p in parts]), np.vstack([p[1] for p in parts])


def split_indices(num, test_ratio, seed):
    n_test = int(round(num * test_ratio))
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5EED]))
    test = np.sort(rng.permutation(num)[:n_test])
    mask = np.zeros(num, dtype=bool)
    mask[test] = True
    return np.flatnonzero(~mask), test


def nnsample(num, opts):
    """Generate a labelled dataset and split it into ``(train, test)``."""
    X, Y = generate(num, opts)
    tr, te = split_indices(num, opts.test_ratio, opts.seed)
    meta = metadata(opts, num, X, Y)
    train = DatasetFile(X[tr], Y[tr], opts.variant, meta)
    test = DatasetFile(X[te], Y[te], opts.variant, meta)
    log.info("%s: %d train / %d test rows, positive ratio %.3f", opts.variant, len(train),
             len(test), meta["positive_ratio"])
    return train, test


def metadata(opts, num, X, Y):
    reach = np.all(np.isfinite(Y), axis=1) if is_jacobian(opts.variant) else Y[:, 0] == 1
    opts_d = asdict(opts)
    return {
        "options": opts_d,
        "num": int(num),
        "seed": int(opts.seed),
        "template": puma_template(),
        "positive_ratio": float(np.mean(reach)),
        "positives": int(np.sum(reach)),
        "negatives": int(np.sum(~reach)),
        "features": int(X.shape[1]),
        "targets": int(Y.shape[1]),
    }


# --------------------------------------------------------------------------- #
# CSV
# --------------------------------------------------------------------------- #

def write_csv(path, matrix):
    """Headerless CSV, one row per sample, 17 significant digits per value."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w", newline="") as fh:
        for row in matrix:
            fh.write(",".join("%.17g" % v for v in row))
            fh.write("\n")


def read_csv(path, width=None):
    """Parse a headerless numeric CSV into a 2-D float array.

    Raises :class:`MalformedRow` with the zero-based row index when a row has
    the wrong number of columns or a non-numeric value.
    """
    rows = []
    expected = width
    with open(path) as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if expected is None:
                expected = len(cells)
            if len(cells) != expected:
                raise MalformedRow(f"{path}: row {i} has {len(cells)} columns, expected {expected}", i)
            try:
                rows.append([float(c) for c in cells])
            except ValueError as exc:
                raise MalformedRow(f"{path}: row {i}: {exc}", i) from None
    if not rows:
        return np.empty((0, expected or 0))
    return np.array(rows, dtype=float)


def dataset_paths(directory, variant, split):
    feat, lab, _ = FILE_STEMS[variant]
    d = Path(directory)
    return d / feat.format(split), d / lab.format(split)


def save_dataset(directory, train, test, meta=None):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    variant = train.variant
    written = []
    for split, ds in (("train", train), ("test", test)):
        fp, lp = dataset_paths(directory, variant, split)
        write_csv(fp, ds.features)
        write_csv(lp, ds.labels)
        written += [fp, lp]
    meta_path = directory / FILE_STEMS[variant][2]
    with open(meta_path, "w") as fh:
        json.dump(meta if meta is not None else train.meta, fh, indent=2, default=float)
    written.append(meta_path)
    return written


def load_dataset(directory, variant, split):
    fp, lp = dataset_paths(directory, variant, split)
    layout = FeatureLayout.for_variant(variant)
    X = read_csv(fp, layout.width)
    Y = read_csv(lp, layout.n_targets)
    if X.shape[0] != Y.shape[0]:
        raise ShapeMismatch(f"{fp.name} has {X.shape[0]} rows but {lp.name} has {Y.shape[0]}")
    return DatasetFile(X, Y, variant)


# --------------------------------------------------------------------------- #
# Views between layouts
# --------------------------------------------------------------------------- #

KINEMATIC_COLUMNS = np.r_[0:N_DH, 90:96]


def kinematic_view(features):
    """Drop the dynamics block of 96-wide features, giving the 24-wide layout."""
    features = np.asarray(features, dtype=float)
    if features.shape[1] == 24:
        return features
    if features.shape[1] != 96:
        raise ShapeMismatch(f"expected 24 or 96 feature columns, got {features.shape[1]}")
    return features[:, KINEMATIC_COLUMNS]


def confidence_view(ds):
    """Existence labels implied by a Jacobian dataset (finite row = reachable)."""
    if not is_jacobian(ds.variant):
        return ds
    variant = "conf-dyna"
    return DatasetFile(ds.features, ds.reachable.astype(float), variant, ds.meta)
