import csv

import numpy as np
import pytest

from mtrack.adaptive import TrackingFactorState
from mtrack.rewards import RewardWeights, TrackingFactors
from mtrack.synthetic import sinusoid_reference
from mtrack.toy_env import PhaseTablePolicy, ToyEnv, ToyEnvConfig
from mtrack.training import ADAPT_TERMS, Curricula, OptimizerConfig, _objective, fd_gradient, train_adaptive

F = TrackingFactors.preset("ours_init")


@pytest.fixture
def env():
    return ToyEnv(ToyEnvConfig(sinusoid_reference(n_frames=30)))


def state():
    return TrackingFactorState.from_factors(F, ADAPT_TERMS)


@pytest.mark.parametrize("kw", [dict(cadence="epoch"), dict(iters=-1), dict(inner_iters=0), dict(fd_step=0.0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        OptimizerConfig(**kw)


def test_fd_gradient_matches_perturbation(env):
    rng = np.random.default_rng(0)
    table = env.ref_q[1:] + rng.normal(0, 0.05, size=(env.n_steps, env.dof))
    cur = Curricula()
    J0, g = fd_gradient(env, table, [0], F, RewardWeights.default(), cur, env.params, 1e-5)
    d = rng.normal(size=table.shape)
    eps = 1e-6
    J = _objective(env, np.stack([table + eps * d, table - eps * d]), [0], F, RewardWeights.default(), cur,
                   env.params)
    assert (J[0] - J[1]) / (2 * eps) == pytest.approx(float(np.sum(g * d)), rel=1e-4)
    assert J0 == pytest.approx(_objective(env, table[None], [0], F, RewardWeights.default(), cur, env.params)[0])


def test_fixed_run_leaves_sigma(env):
    s = state()
    before = s.sigma.copy()
    _, tr = train_adaptive(env, OptimizerConfig(iters=3, adapt=False), s, base_factors=F)
    np.testing.assert_array_equal(s.sigma, before)
    np.testing.assert_array_equal(tr.sigma(), np.tile(before, (4, 1)))


@pytest.mark.parametrize("cadence", ["iteration", "step"])
def test_sigma_trace_monotone(env, cadence):
    _, tr = train_adaptive(env, OptimizerConfig(iters=4, cadence=cadence), state(), base_factors=F)
    assert (np.diff(tr.sigma(), axis=0) <= 0).all()
    assert len(tr.rows) == 5


def test_training_improves_tracking(env):
    _, tr = train_adaptive(env, OptimizerConfig(iters=6), state(), base_factors=F)
    err = tr.column("mean_err")
    assert err[-1] < err[0]


def test_curricula_advance(env):
    _, tr = train_adaptive(env, OptimizerConfig(iters=3), state(), base_factors=F)
    theta, alpha = tr.column("theta"), tr.column("alpha")
    assert (np.diff(theta) < 0).all() and (np.diff(alpha) > 0).all()


def test_deterministic(env):
    runs = [train_adaptive(env, OptimizerConfig(iters=3, seed=11), state(), base_factors=F) for _ in range(2)]
    np.testing.assert_array_equal(runs[0][0].table, runs[1][0].table)
    assert runs[0][1].rows == runs[1][1].rows


def test_policy_stays_in_limits(env):
    start = PhaseTablePolicy(np.full((env.n_steps, env.dof), 3.0))
    pol, _ = train_adaptive(env, OptimizerConfig(iters=1, adapt=False), state(), base_factors=F, policy=start)
    lo, hi = env.config.q_limits
    assert pol.table.min() >= lo and pol.table.max() <= hi


def test_trace_csv(env, tmp_path):
    _, tr = train_adaptive(env, OptimizerConfig(iters=2, randomize=True), state(), base_factors=F)
    p = tmp_path / "trace.csv"
    tr.write_csv(p)
    rows = list(csv.DictReader(p.open()))
    assert list(rows[0]) == tr.columns and len(rows) == 3
    assert float(rows[-1]["sigma_jpos"]) == tr.rows[-1]["sigma_jpos"]
