import numpy as np
import pytest

from jacobnet import kinematics as kin
from jacobnet.exceptions import DimensionMismatch, NotSkewSymmetric, SingularUpdate
from jacobnet.kinematics import (DHLink, DynamicsParams, Manipulator, Pose, fkine, ikine_num,
                                 jacob0, jacobe, jacobian_fd, pose_error, skew, vex)
from jacobnet.robots import planar, puma_canonical_ik


# --- skew / vex -------------------------------------------------------------

def test_skew_unit_z():
    np.testing.assert_array_equal(skew([0, 0, 1]), [[0, -1, 0], [1, 0, 0], [0, 0, 0]])


def test_skew_zero():
    np.testing.assert_array_equal(skew([0, 0, 0]), np.zeros((3, 3)))


def test_skew_antisymmetric_and_cross(rng):
    w = rng.normal(size=3)
    S = skew(w)
    np.testing.assert_array_equal(S + S.T, np.zeros((3, 3)))
    x = rng.normal(size=3)
    np.testing.assert_allclose(S @ x, np.cross(w, x), atol=1e-15)


def test_vex_unit_z():
    np.testing.assert_array_equal(vex([[0, -1, 0], [1, 0, 0], [0, 0, 0]]), [0, 0, 1])


def test_vex_skew_roundtrip(rng):
    W = rng.normal(size=(100, 3))
    np.testing.assert_array_equal(vex(skew(W)), W)


def test_vex_rejects_symmetric_part():
    with pytest.raises(NotSkewSymmetric):
        vex(np.eye(3))


def test_vex_tolerance_boundary():
    S = skew([1.0, 2.0, 3.0])
    S[0, 1] += 5e-9
    vex(S)
    S[0, 1] += 1e-7
    with pytest.raises(NotSkewSymmetric):
        vex(S)


# --- poses ------------------------------------------------------------------

def test_pose_identity_and_composition(rng):
    a = Pose.from_rpy(rng.normal(size=3), rng.uniform(0, 6, 3))
    b = Pose.from_rpy(rng.normal(size=3), rng.uniform(0, 6, 3))
    c = Pose.from_rpy(rng.normal(size=3), rng.uniform(0, 6, 3))
    np.testing.assert_allclose((a @ Pose.identity()).matrix, a.matrix)
    np.testing.assert_allclose(((a @ b) @ c).matrix, (a @ (b @ c)).matrix, atol=1e-14)
    np.testing.assert_allclose((a @ a.inv()).matrix, np.eye(4), atol=1e-14)


def test_rpy_zero_is_identity():
    np.testing.assert_array_equal(kin.rpy2r([0.0, 0.0, 0.0]), np.eye(3))


def test_rpy_composition_order():
    r, p, y = 0.3, -0.2, 1.1
    expected = kin.rotz(y) @ kin.roty(p) @ kin.rotx(r)
    np.testing.assert_allclose(kin.rpy2r([r, p, y]), expected, atol=1e-15)


def test_wrap_angles_range():
    w = kin.wrap_angles([-1e-18, -np.pi, 7.0, 2 * np.pi])
    assert np.all((w >= 0) & (w < 2 * np.pi))


# --- validation of domain types --------------------------------------------

def test_dynamics_validation():
    DynamicsParams(1.0, [0, 0, 0], [1, 1, 1], 0.0, [0.1, -0.1], 1.0, 0.0)
    with pytest.raises(ValueError):
        DynamicsParams(-1.0, [0, 0, 0], [1, 1, 1], 0.0, [0.1, -0.1], 1.0, 0.0)
    with pytest.raises(ValueError):
        DynamicsParams(1.0, [0, 0, 0], [1, 1, 1], 0.0, [-0.1, 0.1], 1.0, 0.0)


def test_manipulator_needs_links_and_matching_dynamics():
    with pytest.raises(ValueError):
        Manipulator(())
    dyn = DynamicsParams(1.0, [0, 0, 0], [1, 1, 1], 0.0, [0.1, -0.1], 1.0, 0.0)
    with pytest.raises(DimensionMismatch):
        Manipulator((DHLink(0, 1, 0), DHLink(0, 1, 0)), dynamics=(dyn,))


def test_dhlink_rejects_nonfinite():
    with pytest.raises(ValueError):
        DHLink(np.nan, 0.0, 0.0)


# --- forward kinematics ----------------------------------------------------

def test_fkine_one_link():
    T = fkine(planar(0.7), [0.0])
    np.testing.assert_allclose(T.t, [0.7, 0, 0])
    np.testing.assert_allclose(T.R, np.eye(3))


def test_fkine_two_link_geometry():
    T = fkine(planar(1.0, 1.0), [np.pi / 2, 0.0])
    np.testing.assert_allclose(T.t, [0, 2, 0], atol=1e-15)


def test_fkine_fanuc_home(fanuc):
    T = fkine(fanuc, np.zeros(6))
    np.testing.assert_allclose(T.t, [1.02, 0.0, -1.06], atol=1e-12)
    np.testing.assert_allclose(T.R, np.eye(3), atol=1e-12)


def test_fkine_dimension_mismatch(puma):
    with pytest.raises(DimensionMismatch):
        fkine(puma, np.zeros(5))


def test_fkine_association_order(puma, rng):
    q = rng.uniform(-np.pi, np.pi, 6)
    A = kin.link_transforms(puma.chain, q[None])[0]
    left = np.eye(4)
    for Ai in A:
        left = left @ Ai
    right = np.eye(4)
    for Ai in A[::-1]:
        right = Ai @ right
    np.testing.assert_allclose(left, right, atol=1e-14)
    np.testing.assert_allclose(fkine(puma, q).matrix, left, atol=1e-14)


def test_batched_fkine_matches_single(puma, rng):
    Q = rng.uniform(-np.pi, np.pi, (7, 6))
    T = kin.fkine_batch(puma.chain, Q)
    for i in range(7):
        np.testing.assert_array_equal(T[i], fkine(puma, Q[i]).matrix)


# --- Jacobians -------------------------------------------------------------

def test_fd_fanuc_first_column(fanuc):
    J = jacobian_fd(fanuc, np.zeros(6), h=1e-6)
    np.testing.assert_allclose(J[:, 0], [0, 1.02, 0, 0, 0, 1], atol=1e-5)


def test_fd_fanuc_translational_rows(fanuc):
    J = jacobian_fd(fanuc, np.zeros(6), h=1e-6)
    np.testing.assert_allclose(J[0], [0, -1.06, 1.06, 0, 0.1, 0], atol=1e-5)
    np.testing.assert_allclose(J[2], [0, -0.87, 0.1, 0, 0, 0], atol=1e-5)


def test_fd_one_link():
    J = jacobian_fd(planar(0.8), [0.0], h=1e-6)
    np.testing.assert_allclose(J[:, 0], [0, 0.8, 0, 0, 0, 1], atol=1e-6)


def test_fd_default_step_is_tiny(fanuc):
    # the default step still gives the right first column, only less precisely
    J = jacobian_fd(fanuc, np.zeros(6))
    np.testing.assert_allclose(J[:, 0], [0, 1.02, 0, 0, 0, 1], atol=1e-5)


def test_fd_rejects_bad_step(fanuc):
    with pytest.raises(ValueError):
        jacobian_fd(fanuc, np.zeros(6), h=0.0)


def test_jacob0_matches_fd_on_family(puma_family, rng):
    worst = 0.0
    for m in puma_family:
        for _ in range(2):
            q = rng.uniform(-np.pi, np.pi, 6)
            worst = max(worst, np.abs(jacob0(m, q) - jacobian_fd(m, q, h=1e-6)).max())
    assert worst <= 1e-5


def test_jacob0_one_link():
    np.testing.assert_allclose(jacob0(planar(0.8), [0.0])[:, 0], [0, 0.8, 0, 0, 0, 1],
                               atol=1e-15)


def test_jacob0_degenerate_chain():
    m = Manipulator.from_dh(np.zeros(3), np.zeros(3), [0.3, -1.0, 2.0])
    J = jacob0(m, [0.1, 0.2, 0.3])
    assert np.all(np.isfinite(J))
    np.testing.assert_array_equal(J[:3], np.zeros((3, 3)))


def test_jacobe_equals_jacob0_at_identity_rotation(fanuc):
    np.testing.assert_allclose(jacobe(fanuc, np.zeros(6)), jacob0(fanuc, np.zeros(6)),
                               atol=1e-12)


def test_jacobe_frame_relation(puma_family, rng):
    for m in puma_family[:20]:
        q = rng.uniform(-np.pi, np.pi, 6)
        R = fkine(m, q).R
        Je, J0 = jacobe(m, q), jacob0(m, q)
        np.testing.assert_allclose(np.vstack([R @ Je[:3], R @ Je[3:]]), J0, atol=1e-10)
        np.testing.assert_allclose(np.linalg.norm(Je[:3], axis=0),
                                   np.linalg.norm(J0[:3], axis=0), atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(Je[3:], axis=0),
                                   np.linalg.norm(J0[3:], axis=0), atol=1e-12)


# --- pose error --------------------------------------------------------------

def test_pose_error_cases():
    a = Pose.from_rpy([0.1, 0.2, 0.3], [0.4, 0.5, 0.6])
    np.testing.assert_allclose(pose_error(a, a), np.zeros(6), atol=1e-15)
    b = Pose(a.R, a.t + [0.05, 0, 0])
    np.testing.assert_allclose(pose_error(a, b), [0.05, 0, 0, 0, 0, 0], atol=1e-15)
    th = 0.2
    c = Pose(kin.rotz(th), np.zeros(3))
    np.testing.assert_allclose(pose_error(Pose.identity(), c), [0, 0, 0, 0, 0, np.sin(th)],
                               atol=1e-15)


# --- inverse kinematics ------------------------------------------------------

def test_ik_fixed_point(puma, rng):
    q = rng.uniform(-np.pi, np.pi, 6)
    sol = ikine_num(puma, fkine(puma, q), q0=q)
    assert sol.converged and sol.iterations <= 1 and sol.residual < 1e-12


def test_ik_unreachable_planar():
    m = planar(1.0, 1.0)
    sol = ikine_num(m, Pose(np.eye(3), np.array([3.0, 0.0, 0.0])), q0=[0.1, 0.1], plim=50)
    assert not sol.converged
    assert sol.iterations == 50


def test_ik_residuals_monotone_and_translation_bound(puma, rng):
    q = rng.uniform(-np.pi, np.pi, 6)
    target = fkine(puma, q)
    sol = ikine_num(puma, target, q0=q + 0.3, cutoff=1e-6)
    assert np.all(np.diff(sol.residuals) <= 0)
    if sol.converged:
        assert np.linalg.norm(fkine(puma, sol.q).t - target.t) < 1e-6


def test_ik_multistart_converges_on_family(puma_family, rng):
    ok = 0
    total = 0
    for m in puma_family:
        for _ in range(10):
            target = fkine(m, rng.uniform(-np.pi, np.pi, 6))
            ok += kin.ikine_multistart(m, target, rng=rng, cutoff=1e-6).converged
            total += 1
    assert ok / total >= 0.95


def test_ik_singular_update():
    # a NaN in the Jacobian can never be fixed by damping
    m = Manipulator.from_dh([0.0], [1.0], [0.0])
    target = Pose(np.eye(3), np.array([0.5, 0.5, 0.0]))
    with pytest.raises(SingularUpdate):
        ikine_num(m, target, q0=[np.nan])


def test_ik_rejects_bad_options(puma):
    with pytest.raises(ValueError):
        ikine_num(puma, Pose.identity(), plim=0)
    with pytest.raises(ValueError):
        ikine_num(puma, Pose.identity(), cutoff=0.0)


def test_ik_position_mask_planar():
    m = planar(1.0, 1.0)
    target = np.eye(4)
    target[:3, 3] = [1.2, 0.5, 0.0]
    target[:3, :3] = kin.rotx(1.0)  # unattainable orientation, ignored by the mask
    out = kin.ikine_batch(m.chain, target[None], np.array([[0.3, 0.3]]),
                          mask=[1, 1, 1, 0, 0, 0])
    assert out.converged[0]
    np.testing.assert_allclose(fkine(m, out.q[0]).t, [1.2, 0.5, 0.0], atol=0.03)


# --- closed-form branch used for Jacobian labels ------------------------------

def test_puma_canonical_ik_reproduces_pose(puma_family, rng):
    for m in puma_family[:10]:
        Q = rng.uniform(-np.pi, np.pi, (50, 6))
        T = kin.fkine_batch(m.chain, Q)
        qa, ok = puma_canonical_ik(m.chain, T)
        assert ok.all()
        np.testing.assert_allclose(kin.fkine_batch(m.chain, qa), T, atol=1e-10)
        assert np.all(np.sin(qa[:, 4]) >= -1e-12)


def test_puma_canonical_ik_rejects_other_structures(fanuc):
    _, ok = puma_canonical_ik(fanuc.chain, fkine(fanuc, np.zeros(6)).matrix[None])
    assert not ok.any()
