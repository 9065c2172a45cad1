import numpy as np
import pytest

from mtrack.errors import ShapeMismatch, TooShort
from mtrack.metrics import UNIT_KEYS, compute_metrics
from mtrack.motion import MotionSequence
from mtrack.synthetic import humanoid_skeleton, random_sequence, static_stand


def seq(points, q=None, fps=30.0, contact=None):
    T = len(points)
    return MotionSequence(fps=fps, psi=np.zeros((T, 3)), joint_rotations=np.zeros((T, 0, 3)),
                          body_points=np.asarray(points, float), joint_positions=q, contact=contact)


def test_identity_is_zero():
    s = random_sequence(np.random.default_rng(0), n_frames=10)
    rep = compute_metrics(s, s)
    assert rep.e_g_mpbpe == rep.e_mpbpe == rep.e_mpjpe == rep.e_mpjve == rep.e_mpbve == rep.e_mpbae == 0.0


def test_units_and_metadata():
    d = compute_metrics(seq(np.zeros((4, 2, 3))), seq(np.zeros((4, 2, 3)))).to_dict()
    assert set(d) == set(UNIT_KEYS.values()) | {"_averaging"}


def test_per_frame_units_ignore_fps():
    rng = np.random.default_rng(1)
    P, R = rng.normal(size=(2, 8, 3, 3))
    a = compute_metrics(seq(P), seq(R))
    b = compute_metrics(seq(P, fps=60.0), seq(R, fps=60.0))
    assert a == b


def test_single_body_offset_by_hand():
    R = np.zeros((3, 2, 3))
    P = R.copy()
    P[:, 1, 0] = 0.002  # 2 mm on body 1 only
    rep = compute_metrics(seq(P), seq(R), root=0)
    assert rep.e_g_mpbpe == pytest.approx(1.0) and rep.e_mpbpe == pytest.approx(1.0)
    assert rep.e_mpbve == 0.0 and rep.e_mpbae == 0.0


def test_joint_velocity_excludes_first_frame():
    q, qr = np.array([[0.0], [0.001], [0.001]]), np.zeros((3, 1))
    rep = compute_metrics(seq(np.zeros((3, 1, 3)), q), seq(np.zeros((3, 1, 3)), qr))
    assert rep.e_mpjve == pytest.approx(0.5)  # |1| and |0| milli-rad over two differences
    assert rep.e_mpjpe == pytest.approx(2 / 3)


def test_root_from_skeleton(skel):
    s = static_stand(5)
    moved = s.replace(body_points=s.body_points + np.array([0.1, 0.0, 0.0]))
    rep = compute_metrics(moved, s, skeleton=skel)
    assert rep.e_mpbpe == pytest.approx(0.0, abs=1e-9) and rep.e_g_mpbpe == pytest.approx(100.0)


def test_contact_metric():
    c1 = np.array([[1, 0], [1, 1], [0, 0]], dtype=np.int8)
    c2 = np.array([[1, 1], [0, 0], [0, 0]], dtype=np.int8)
    rep = compute_metrics(seq(np.zeros((3, 1, 3)), contact=c1), seq(np.zeros((3, 1, 3)), contact=c2))
    assert rep.e_contact_mask == pytest.approx(1.0)
    assert compute_metrics(seq(np.zeros((3, 1, 3))), seq(np.zeros((3, 1, 3)))).e_contact_mask is None


def test_too_short():
    with pytest.raises(TooShort):
        compute_metrics(seq(np.zeros((2, 1, 3))), seq(np.zeros((2, 1, 3))))


@pytest.mark.parametrize("a, b", [((4, 2), (5, 2)), ((4, 2), (4, 3))])
def test_shape_mismatch(a, b):
    with pytest.raises(ShapeMismatch):
        compute_metrics(seq(np.zeros((*a, 3))), seq(np.zeros((*b, 3))))


def test_bad_root():
    with pytest.raises(ShapeMismatch):
        compute_metrics(seq(np.zeros((4, 2, 3))), seq(np.zeros((4, 2, 3))), root=5)
