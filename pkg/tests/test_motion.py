import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mtrack.errors import InconsistentFrame, IoFailure, MalformedFile, NonFinite
from mtrack.motion import (Joint, MotionFrame, MotionSequence, Segment, SkeletonSpec, canonical_dumps,
                           interpolate_boundaries, load_motion, load_skeleton, motion_dumps, motion_loads,
                           motion_to_dict, save_motion, save_skeleton, stack_frames)
from mtrack.synthetic import default_pose, random_sequence, static_stand


def two_frame():
    return MotionSequence(fps=30, psi=np.zeros((2, 3)), joint_rotations=np.zeros((2, 1, 3)),
                          body_points=np.arange(12.0).reshape(2, 2, 3), joint_names=("j",),
                          segment_names=("a", "b"))


def test_two_frame_file_round_trip(tmp_path):
    p = tmp_path / "m.json"
    save_motion(two_frame(), p)
    seq = load_motion(p)
    assert len(seq) == 2 and seq.fps == 30.0
    assert seq == two_frame()


def test_missing_body_point_is_inconsistent(tmp_path):
    d = json.loads(motion_dumps(two_frame()))
    d["frames"][1]["body_points"] = d["frames"][1]["body_points"][:-3]
    with pytest.raises(InconsistentFrame):
        motion_loads(json.dumps(d))


@pytest.mark.parametrize("mutate", [
    lambda d: d.pop("fps"),
    lambda d: d.update(frames=[]),
    lambda d: d.update(source="mocap"),
    lambda d: d["frames"][0].update(psi="x"),
    lambda d: d.update(joint_names=[1]),
])
def test_schema_violations(mutate):
    d = json.loads(motion_dumps(two_frame()))
    mutate(d)
    with pytest.raises(MalformedFile):
        motion_loads(json.dumps(d))


def test_not_json_is_malformed():
    with pytest.raises(MalformedFile):
        motion_loads("{not json")


def test_nan_coordinate_rejected():
    text = motion_dumps(two_frame()).replace("[0,0,0]", "[NaN,0,0]", 1)
    with pytest.raises(NonFinite):
        motion_loads(text)


def test_io_failures(tmp_path):
    with pytest.raises(IoFailure):
        load_motion(tmp_path / "missing.json")
    with pytest.raises(IoFailure):
        save_motion(two_frame(), tmp_path / "no" / "such" / "dir.json")


def test_empty_name_round_trip(tmp_path):
    seq = two_frame().replace(name="")
    save_motion(seq, tmp_path / "e.json")
    assert load_motion(tmp_path / "e.json") == seq


def test_500_frames_gives_500_records(tmp_path):
    seq = static_stand(n_frames=500)
    save_motion(seq, tmp_path / "s.json")
    d = json.loads((tmp_path / "s.json").read_text())
    assert len(d["frames"]) == 500
    # one frame record per line between the brackets
    assert (tmp_path / "s.json").read_text().count("\n") == 500 + 2


@pytest.mark.parametrize("seed", range(25))
def test_random_round_trip_is_byte_exact(seed, tmp_path):
    seq = random_sequence(np.random.default_rng(seed))
    p = tmp_path / "r.json"
    save_motion(seq, p)
    first = p.read_bytes()
    back = load_motion(p)
    assert back == seq
    np.testing.assert_allclose(back.body_points, seq.body_points, rtol=0, atol=1e-12)
    save_motion(back, p)
    assert p.read_bytes() == first


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=3, max_size=3))
def test_any_finite_float_survives(psi):
    seq = MotionSequence(fps=50, psi=np.array([psi]), joint_rotations=np.zeros((1, 0, 3)),
                         body_points=np.zeros((1, 1, 3)), segment_names=("p",))
    assert np.array_equal(motion_loads(motion_dumps(seq)).psi, seq.psi)


def test_canonical_dumps_sorted_and_compact():
    assert canonical_dumps({"b": 1, "a": [0.5, None, True]}) == '{"a":[0.5,null,true],"b":1}'
    assert canonical_dumps(0.1) == "0.10000000000000001"


def test_arrays_are_read_only():
    seq = two_frame()
    with pytest.raises(ValueError):
        seq.body_points[0, 0, 0] = 1.0


def test_contact_must_be_binary():
    with pytest.raises(InconsistentFrame):
        two_frame().replace(contact=np.array([[0, 2], [1, 1]]))


def test_bind_checks_point_count(skel):
    with pytest.raises(InconsistentFrame):
        two_frame().bind(skel)
    assert static_stand().bind(skel) is not None


@pytest.mark.parametrize("segments, msg", [
    ((Segment("a", 0.0),), "mass"),
    ((Segment("a", 1.0), Segment("b", 1.0)), "root"),
    ((Segment("a", 1.0), Segment("b", 1.0, "c"), Segment("c", 1.0, "b")), "cycle|root"),
])
def test_skeleton_invariants(segments, msg):
    with pytest.raises(ValueError, match=msg):
        SkeletonSpec(segments=segments)


def test_joint_limits_ordered():
    with pytest.raises(ValueError):
        SkeletonSpec(segments=(Segment("a", 1.0),), joints=(Joint("j", 1.0, 1.0),))


def test_skeleton_round_trip(skel, tmp_path):
    save_skeleton(skel, tmp_path / "k.json")
    assert load_skeleton(tmp_path / "k.json") == skel


class TestInterpolateBoundaries:
    def test_zero_ramp_is_identity(self):
        seq = static_stand(10)
        assert interpolate_boundaries(seq, default_pose(), 0) is seq

    def test_constant_when_motion_is_default_pose(self):
        pose = default_pose()
        seq = stack_frames([pose], fps=30, joint_names=(), segment_names=())
        out = interpolate_boundaries(seq, pose, 5)
        assert len(out) == 11
        for t in range(11):
            np.testing.assert_array_equal(out.body_points[t], pose.body_points)
            np.testing.assert_array_equal(out.psi[t], pose.psi)

    def test_ramp_midpoint_is_mean(self, rng):
        seq = random_sequence(rng, n_frames=4, n_joints=5, n_segments=11, with_q=False, with_contact=False)
        pose = MotionFrame(psi=rng.normal(size=3), joint_rotations=rng.normal(size=(5, 3)),
                           body_points=rng.normal(size=(11, 3)))
        R = 10
        out = interpolate_boundaries(seq, pose, R)
        assert len(out) == len(seq) + 2 * R
        np.testing.assert_allclose(out.body_points[R // 2], (pose.body_points + seq.body_points[0]) / 2, atol=1e-12)
        np.testing.assert_allclose(out.psi[R + len(seq) - 1 + R // 2], (seq.psi[-1] + pose.psi) / 2, atol=1e-12)
        np.testing.assert_array_equal(out.body_points[R:R + len(seq)], seq.body_points)
        np.testing.assert_array_equal(out.body_points[0], pose.body_points)
        np.testing.assert_allclose(out.body_points[-1], pose.body_points, rtol=0, atol=1e-12)

    def test_negative_ramp_rejected(self):
        with pytest.raises(ValueError):
            interpolate_boundaries(static_stand(3), default_pose(), -1)


def test_motion_to_dict_keys():
    d = motion_to_dict(two_frame())
    assert set(d) == {"fps", "name", "source", "joint_names", "segment_names", "frames"}
