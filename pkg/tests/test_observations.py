import numpy as np
import pytest

from mtrack.errors import HistoryUnderflow, ShapeMismatch
from mtrack.observations import (DR_SIZES, ProprioStep, actor_dim, actor_slots, build_actor_obs,
                                 build_critic_obs, critic_dim, slot)


def history(n=5, dof=23):
    return [ProprioStep.zeros(dof) for _ in range(n)]


def test_dims():
    assert actor_dim() == 380 and critic_dim() == 630 and sum(DR_SIZES) == 73


def test_slots_tile_actor():
    s = sorted(actor_slots().values(), key=lambda x: x.start)
    assert s[0].start == 0 and s[-1].stop == 380
    assert all(a.stop == b.start for a, b in zip(s, s[1:]))


def test_oldest_first():
    h = history()
    for k, st in enumerate(h):
        st.q[:] = k
    obs = build_actor_obs(h, 0.0)
    assert [obs[slot(23, "q", k)][0] for k in range(5)] == [0, 1, 2, 3, 4]


def test_uses_most_recent_steps():
    h = history(7)
    h[0].q[:] = 9.0
    h[1].q[:] = 9.0
    assert not build_actor_obs(h, 0.0)[actor_slots()["q"]].any()


def test_phase_block():
    np.testing.assert_array_equal(build_actor_obs(history(), 0.25)[actor_slots()["phase"]], 0.25)


def test_history_underflow():
    with pytest.raises(HistoryUnderflow):
        build_actor_obs(history(4), 0.0)


def test_wrong_dof():
    with pytest.raises(ShapeMismatch):
        build_actor_obs(history(dof=22), 0.0)


@pytest.mark.parametrize("bad", ["root_lin_vel", "ref", "diff", "dr"])
def test_critic_shapes(bad):
    args = dict(root_lin_vel=np.zeros(15), ref=np.zeros(81), diff=np.zeros(81), dr=np.zeros(73))
    args[bad] = np.zeros(args[bad].size + 1)
    with pytest.raises(ShapeMismatch):
        build_critic_obs(history(), 0.0, args["root_lin_vel"], args["ref"], args["diff"], args["dr"])


def test_critic_tail_order():
    obs = build_critic_obs(history(), 0.0, np.full(15, 1.0), np.full(81, 2.0), np.full(81, 3.0), np.full(73, 4.0))
    np.testing.assert_array_equal(obs[380:395], 1.0)
    np.testing.assert_array_equal(obs[395:476], 2.0)
    np.testing.assert_array_equal(obs[476:557], 3.0)
    np.testing.assert_array_equal(obs[557:], 4.0)


def test_small_configuration():
    assert build_actor_obs(history(3, dof=2), 0.0, dof=2, n_history=3).shape == (actor_dim(2, 3),)
