import numpy as np
import pytest
from scipy.stats import kstest

from mtrack.errors import DimensionMismatch
from mtrack.motion import MotionSequence
from mtrack.randomization import DomainRandomizationRanges
from mtrack.rewards import TrackingFactors
from mtrack.synthetic import sinusoid_reference
from mtrack.toy_env import (PD_GAINS, PhaseTablePolicy, ToyEnv, ToyEnvConfig, batched_returns,
                            episode_length_ratio, env_step, reference_velocity, rollout, rsi_reset,
                            sample_env_params)

F = TrackingFactors.preset("ours_init")


def still_reference(pose, n=20):
    q = np.tile(np.asarray(pose, dtype=float), (n, 1))
    return MotionSequence(fps=30.0, psi=np.zeros((n, 3)), joint_rotations=np.zeros((n, 0, 3)),
                          body_points=np.zeros((n, 0, 3)), joint_positions=q)


@pytest.fixture
def env():
    return ToyEnv(ToyEnvConfig(sinusoid_reference()))


def test_gain_table():
    assert PD_GAINS["waist"] == (400.0, 5.0) and PD_GAINS["knee"] == (150.0, 4.0)
    assert PD_GAINS["ankle"] == (40.0, 2.0) and PD_GAINS["shoulder_yaw"] == (50.0, 2.0)


def test_needs_joint_positions(skel):
    from mtrack.synthetic import static_stand
    with pytest.raises(ValueError):
        ToyEnvConfig(static_stand(5))


def test_equilibrium_is_exact():
    env = ToyEnv(ToyEnvConfig(still_reference([0.2, -0.4])))
    rec = rollout(PhaseTablePolicy.constant(env, [0.2, -0.4]), env, F)
    for s in rec.snapshots:
        np.testing.assert_array_equal(s.q, [0.2, -0.4])
        np.testing.assert_array_equal(s.tau, 0.0)


def test_torque_saturates():
    env = ToyEnv(ToyEnvConfig(still_reference([0.0, 0.0]), torque_limits=[5.0, 7.0]))
    _, snap = env_step(env, rsi_reset(env, phase=0.0), np.array([2.0, -2.0]))
    np.testing.assert_array_equal(snap.tau, [5.0, -7.0])


def test_bad_action_shape(env):
    with pytest.raises(DimensionMismatch):
        env_step(env, rsi_reset(env, phase=0.0), np.zeros(3))


def test_ideal_replay_tracks_exactly():
    env = ToyEnv(ToyEnvConfig(sinusoid_reference(), ideal=True))
    rec = rollout(PhaseTablePolicy.replay(env), env, F)
    assert episode_length_ratio([rec], env.n_steps) == 1.0
    assert max(np.abs(s.q - s.ref_q).max() for s in rec.snapshots) == 0.0


def test_tight_threshold_stops_after_one_step(env):
    rec = rollout(PhaseTablePolicy.constant(env, [1.0, 1.0]), env, F, theta=1e-6)
    assert rec.length == 1 and rec.termination_cause == "deviation"
    assert rec.snapshots[0].termination


def test_return_oracle(env):
    rec = rollout(PhaseTablePolicy.replay(env), env, F, penalty_scale=0.3)
    manual = sum(0.99 ** k * rec.rewards[k].sum() for k in range(rec.length))
    assert abs(rec.total_return - manual) <= 1e-10
    np.testing.assert_allclose(rec.recompute_returns(), rec.returns, rtol=0, atol=1e-10)


@pytest.mark.parametrize("seed", range(8))
def test_batched_matches_rollout(seed):
    rng = np.random.default_rng(seed)
    cfg = ToyEnvConfig(sinusoid_reference(), dr_ranges=DomainRandomizationRanges())
    env = ToyEnv(cfg)
    params = sample_env_params(env, seed)
    tables = env.ref_q[1:][None] + rng.normal(0, 0.05, size=(3, env.n_steps, env.dof))
    start = int(rng.integers(env.n_steps))
    theta = 0.2 if seed % 2 else None
    got = batched_returns(env, tables, start, F, penalty_scale=0.4, theta=theta, params=params)
    for b in range(3):
        rec = rollout(PhaseTablePolicy(tables[b]), env, F, state=rsi_reset(env.with_params(params),
                      phase=start / env.n_steps), penalty_scale=0.4, theta=theta, params=params)
        assert abs(got[b] - rec.total_return) <= 1e-10


def test_rsi_phase_uniform(env):
    phases = [rsi_reset(env, seed=s).phase for s in range(10_000)]
    assert kstest(phases, "uniform").statistic < 0.02


def test_rsi_state_on_reference(env):
    st = rsi_reset(env, phase=0.5)
    k = round(0.5 * env.n_steps)
    np.testing.assert_array_equal(st.q, env.ref_q[k])
    np.testing.assert_array_equal(st.dq, env.ref_dq[k])


def test_energy_never_grows_under_fixed_target():
    env = ToyEnv(ToyEnvConfig(sinusoid_reference(n_frames=200)))
    kp, kd, m, _ = env.gains()
    st = rsi_reset(env, phase=0.0)
    target = np.zeros(2)
    energy = []
    for _ in range(150):
        energy.append(np.sum(0.5 * m * st.dq ** 2 + 0.5 * kp * (st.q - target) ** 2))
        st, _ = env_step(env, st, target)
    assert np.all(np.diff(energy) <= 1e-12)


def test_control_delay_shifts_actions():
    ranges = DomainRandomizationRanges.nominal()
    env = ToyEnv(ToyEnvConfig(still_reference([0.0, 0.0]), dr_ranges=ranges))
    p = sample_env_params(env, 0)
    p.control_delay_ms = 2000.0 / 30.0  # two steps at 30 fps
    delayed = env.with_params(p)
    st = rsi_reset(delayed, phase=0.0)
    taus = []
    for a in ([1.0, 1.0], [0.0, 0.0], [0.0, 0.0]):
        st, snap = env_step(delayed, st, np.array(a))
        taus.append(snap.tau.copy())
    assert np.all(taus[0] == 0) and np.all(taus[1] == 0) and np.all(taus[2] > 0)


def test_reference_velocity():
    dq = reference_velocity(np.array([[0.0], [1.0], [3.0]]), 0.5)
    np.testing.assert_array_equal(dq[:, 0], [2.0, 2.0, 4.0])


class _Rec:
    def __init__(self, length):
        self.length = length


@pytest.mark.parametrize("lengths, want", [([10, 10], 1.0), ([5, 5, 5], 0.5), ([10, 2, 7, 1], 0.5)])
def test_episode_length_ratio(lengths, want):
    assert episode_length_ratio([_Rec(n) for n in lengths], 10) == want
