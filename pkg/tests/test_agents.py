import itertools

import numpy as np
import pytest

from agrichain import nn
from agrichain.agents import (DqnAgent, DqnConfig, PpoCentralAgent, PpoConfig, ReplayBuffer, SacAgent, SacConfig,
                              SSPolicy, dqn_act, dqn_target_sync, dqn_train_step, ppo_central_update, sac_act,
                              ss_grid_tune)
from agrichain.agents.common import (action_from_fractions, episode_seed, evaluate, global_features,
                                     headroom_vector, squash_fraction)
from agrichain.agents.dqn import epsilon_at, td_targets
from agrichain.agents.ppo import Rollout, clip_ratio, discounted_returns, surrogate, surrogate_gradient
from agrichain.agents.ss import ss_decide
from agrichain.env import Action, SupplyChainEnv
from conftest import tiny_scenario


# --- (s, S) -------------------------------------------------------------------

@pytest.mark.parametrize("s, S, ip, want", [(50, 120, 40, 80), (50, 120, 50, 0), (50, 120, 130, 0)])
def test_ss_decide_examples(s, S, ip, want):
    assert ss_decide(s, S, ip) == want


def test_ss_decide_bounds():
    rng = np.random.default_rng(0)
    for _ in range(500):
        s, S = sorted(rng.uniform(0, 100, 2))
        ip = rng.uniform(0, 150)
        q = ss_decide(s, S, ip)
        assert 0 <= q <= max(S - ip, 0)
        if ip >= s:
            assert q == 0


def test_ss_policy_validation():
    with pytest.raises(ValueError):
        SSPolicy([[5.0]], [[4.0]], [[0.0]], [[0.0]])
    with pytest.raises(ValueError):
        SSPolicy([[0.0]], [[600.0]], [[0.0]], [[0.0]], dc_capacity=[[500.0]])


def test_ss_policy_acts_on_inventory_position():
    env = SupplyChainEnv(tiny_scenario(), seed=0)
    obs = env.observe()  # DC 50, retailer 5 on hand, nothing in transit
    pol = SSPolicy([[60.0]], [[80.0]], [[4.0]], [[10.0]])
    a = pol(obs)
    assert a.dc_orders[0, 0] == 30.0 and a.retailer_orders[0, 0] == 0.0


def _ss_env(demand, horizon=3, **kw):
    sc = tiny_scenario(demand=demand, lead=("deterministic", 0.0), floor=0, horizon=horizon, ret_initial=0.0,
                       dc_initial=1000.0, dc_cap=1000.0, zero_costs=True, handling_loss=0.0, shelf_life=10, **kw)
    return SupplyChainEnv(sc, seed=0)


def test_ss_tune_single_candidate_returned():
    env = _ss_env(("deterministic", 5.0))
    pol = ss_grid_tune(env, [2.0], [7.0], episodes=1, nodes=[("retailer", 0, 0)])
    assert pol.get(("retailer", 0, 0)) == (2.0, 7.0)


def test_ss_tune_tie_prefers_smaller_S():
    env = _ss_env(("deterministic", 0.0))
    pol = ss_grid_tune(env, [0.0, 1.0], [3.0, 5.0], episodes=1, nodes=[("retailer", 0, 0)])
    assert pol.get(("retailer", 0, 0)) == (0.0, 3.0)


def test_ss_tune_deterministic_demand_matches_enumeration():
    # hand recursion of the same period: order up to S if IP < s, sell min(d, stock), hold the rest
    price, hold = 10.0, 0.5
    d, T = 5.0, 3

    def oracle(s, S):
        stock, total = 0.0, 0.0
        for _ in range(T):
            if stock < s:
                stock = S
            sold = min(d, stock)
            total += price * sold - hold * max(stock - d, 0.0)
            stock -= sold
        return total

    grid_s, grid_S = [0.0, 2.0, 4.0, 6.0], [3.0, 5.0, 8.0, 10.0, 15.0]
    env = _ss_env(("deterministic", d))
    pol = ss_grid_tune(env, grid_s, grid_S, episodes=1, nodes=[("retailer", 0, 0)])
    pairs = sorted([(s, S) for s, S in itertools.product(grid_s, grid_S) if s <= S], key=lambda x: (x[1], x[0]))
    best = max(pairs, key=lambda p: (oracle(*p), -p[1], -p[0]))
    assert pol.get(("retailer", 0, 0)) == best
    assert best[1] == d  # S tracks one period of demand


# --- replay -----------------------------------------------------------------

def test_replay_ring_evicts_oldest():
    buf = ReplayBuffer(5, 2, 1)
    for i in range(8):
        buf.add(np.full(2, i), [i], float(i), np.full(2, i + 1), False)
    assert len(buf) == 5
    assert sorted(buf.ids[:5].tolist()) == [3, 4, 5, 6, 7]
    batch = buf.sample(5, np.random.default_rng(0))
    assert set(batch["ids"].tolist()) <= {3, 4, 5, 6, 7}
    assert np.all(batch["z"] == batch["ids"])


def test_replay_refuses_small_sample():
    buf = ReplayBuffer(10, 1, 1)
    buf.add([0.0], [0.0], 0.0, [0.0], True)
    with pytest.raises(ValueError):
        buf.sample(2, np.random.default_rng(0))


# --- DQN ----------------------------------------------------------------------

def test_td_target_examples():
    q = np.zeros((2, 1, 3))
    q[:, 0, 1] = 10.0
    t = td_targets(q, np.array([5.0, 5.0]), np.array([False, True]), 0.9)
    assert t[:, 0].tolist() == [14.0, 5.0]


def test_epsilon_schedule():
    cfg = DqnConfig()
    assert epsilon_at(0, 100, cfg) == 1.0
    assert epsilon_at(50, 100, cfg) == pytest.approx(0.05)
    assert epsilon_at(90, 100, cfg) == pytest.approx(0.05)
    assert epsilon_at(25, 100, cfg) == pytest.approx(0.525)


def _dqn(**kw):
    return DqnAgent(tiny_scenario(), DqnConfig(hidden=(8,), **kw), seed=0, total_steps=100)


def test_dqn_uniform_exploration():
    ag = _dqn()
    x = global_features(ag.env.observe(), ag.horizon)
    cells = np.array([ag.select_cells(x, 1.0, np.random.default_rng(i)) for i in range(3000)]).ravel()
    counts = np.bincount(cells, minlength=11)
    assert counts.min() > 200


def test_dqn_zero_net_takes_lowest_cell():
    ag = _dqn()
    ag.q = nn.zero_network(ag.q.layer_sizes, "relu")
    x = global_features(ag.env.observe(), ag.horizon)
    assert np.all(ag.select_cells(x, 0.0, np.random.default_rng(0)) == 0)
    assert dqn_act(ag, ag.env.observe(), np.random.default_rng(0), 0.0).dc_orders.sum() == 0


def test_dqn_picks_favoured_cell():
    ag = _dqn()
    z = nn.zero_network(ag.q.layer_sizes, "relu")
    b = [bb.copy() for bb in z.biases]
    b[-1][3::11] = 1.0
    ag.q = z.with_arrays(z.weights, b)
    x = global_features(ag.env.observe(), ag.horizon)
    assert np.all(ag.select_cells(x, 0.0, np.random.default_rng(0)) == 3)


def test_dqn_fixed_point_has_zero_loss():
    ag = _dqn()
    c, gamma = 2.0, ag.cfg.gamma
    z = nn.zero_network(ag.q.layer_sizes, "relu")
    b = [bb.copy() for bb in z.biases]
    b[-1][:] = c
    ag.q = ag.q_target = z.with_arrays(z.weights, b)
    batch = {"x": np.random.default_rng(0).random((4, ag.obs_dim)), "y": np.zeros((4, ag.heads), dtype=int),
             "z": np.full(4, c * (1 - gamma)), "x2": np.random.default_rng(1).random((4, ag.obs_dim)),
             "done": np.zeros(4, dtype=bool)}
    loss, grad = ag.loss_and_grad(batch)
    assert loss == pytest.approx(0.0, abs=1e-20) and grad.max_abs() == pytest.approx(0.0, abs=1e-15)


def test_dqn_target_sync_semantics():
    ag = _dqn(target_sync=1000, batch=4)
    init = ag.q
    assert ag.q_target is init
    rng = np.random.default_rng(0)
    batch = {"x": rng.random((4, ag.obs_dim)), "y": rng.integers(0, 11, (4, ag.heads)), "z": rng.random(4),
             "x2": rng.random((4, ag.obs_dim)), "done": np.zeros(4, dtype=bool)}
    before = td_targets(ag.q_values(batch["x2"], ag.q_target), batch["z"], batch["done"], ag.cfg.gamma)
    dqn_train_step(ag, batch)
    assert not ag.q.same_values(init)
    after = td_targets(ag.q_values(batch["x2"], ag.q_target), batch["z"], batch["done"], ag.cfg.gamma)
    assert np.array_equal(before, after)
    dqn_target_sync(ag)
    assert ag.q_target.same_values(ag.q)


def test_dqn_sync_every_step():
    ag = _dqn(target_sync=1, batch=4)
    rng = np.random.default_rng(0)
    batch = {"x": rng.random((4, ag.obs_dim)), "y": rng.integers(0, 11, (4, ag.heads)), "z": rng.random(4),
             "x2": rng.random((4, ag.obs_dim)), "done": np.zeros(4, dtype=bool)}
    dqn_train_step(ag, batch)
    assert ag.q_target is ag.q


def test_dqn_training_epoch_runs():
    ag = _dqn(batch=8)
    stats = ag.train_epoch(1)
    assert stats.steps == 10 and np.isfinite(stats.reward)


# --- SAC ----------------------------------------------------------------------

def _sac(**kw):
    return SacAgent(tiny_scenario(), SacConfig(hidden=(8,), **kw), seed=0)


def test_sac_deterministic_zero_net_is_midpoint():
    ag = _sac()
    ag.actor = nn.zero_network(ag.actor.layer_sizes, "tanh", "gaussian")
    obs = ag.env.observe()
    a = sac_act(ag, obs, deterministic=True)
    assert np.allclose(np.concatenate([a.dc_orders.ravel(), a.retailer_orders.ravel()]),
                       0.5 * headroom_vector(obs))


def test_sac_deterministic_repeatable_and_temperature_free():
    a1, a2 = _sac(temperature=0.2), _sac(temperature=5.0)
    obs = a1.env.observe()
    x = sac_act(a1, obs, deterministic=True)
    assert np.array_equal(x.dc_orders, sac_act(a1, obs, deterministic=True).dc_orders)
    y1 = sac_act(a1, obs, rng=np.random.default_rng(3))
    y2 = sac_act(a2, obs, rng=np.random.default_rng(3))
    assert np.array_equal(y1.retailer_orders, y2.retailer_orders)


def _batch(ag, n=6, seed=0):
    rng = np.random.default_rng(seed)
    return {"x": rng.random((n, ag.obs_dim)), "y": rng.random((n, ag.act_dim)), "z": rng.standard_normal(n),
            "x2": rng.random((n, ag.obs_dim)), "done": rng.random(n) < 0.3}


def test_sac_policy_gradient_matches_finite_differences():
    ag = _sac(temperature=0.3)
    rng = np.random.default_rng(1)
    x = rng.random((5, ag.obs_dim))
    noise = rng.standard_normal((5, ag.act_dim))
    _, g = ag.policy_loss_and_grad(x, noise)
    base = ag.actor
    d = [rng.standard_normal(a.shape) for a in base.arrays()]
    n = base.n_layers
    h = 1e-6

    def loss_at(sign):
        ag.actor = base.with_arrays([a + sign * h * e for a, e in zip(base.weights, d[:n])],
                                    [a + sign * h * e for a, e in zip(base.biases, d[n:])])
        return ag.policy_loss_and_grad(x, noise)[0]

    num = (loss_at(1) - loss_at(-1)) / (2 * h)
    ag.actor = base
    ana = sum(np.sum(a * e) for a, e in zip(g.arrays(), d))
    assert abs(ana - num) / max(abs(ana), abs(num)) < 1e-4


def test_sac_zero_temperature_policy_loss_is_negative_q():
    ag = _sac(temperature=0.0)
    rng = np.random.default_rng(2)
    x = rng.random((4, ag.obs_dim))
    noise = rng.standard_normal((4, ag.act_dim))
    loss, _ = ag.policy_loss_and_grad(x, noise)
    mean, log_std, _ = nn.split_gaussian(nn.predict(ag.actor, x))
    a = squash_fraction(mean + np.exp(log_std) * noise)
    assert loss == pytest.approx(-np.mean(ag._q_min(x, a)), rel=1e-12)


def test_sac_value_fixed_point():
    ag = _sac()
    rng = np.random.default_rng(4)
    x = rng.random((1, ag.obs_dim))
    noise = rng.standard_normal((1, ag.act_dim))
    mean, log_std, _ = nn.split_gaussian(nn.predict(ag.actor, x))
    u = mean + np.exp(log_std) * noise
    from agrichain.agents.sac import squashed_log_prob
    target = ag._q_min(x, squash_fraction(u)) - ag.cfg.temperature * squashed_log_prob(mean, log_std, u)
    z = nn.zero_network(ag.value.layer_sizes, "relu")
    b = [bb.copy() for bb in z.biases]
    b[-1][:] = target
    ag.value = z.with_arrays(z.weights, b)
    loss, g = ag.value_loss_and_grad(x, noise)
    assert loss == pytest.approx(0.0, abs=1e-24) and g.max_abs() == pytest.approx(0.0, abs=1e-12)


def test_sac_twin_min_rule():
    ag = _sac()
    rng = np.random.default_rng(5)
    x, a = rng.random((7, ag.obs_dim)), rng.random((7, ag.act_dim))
    xa = np.concatenate([x, a], axis=1)
    want = np.minimum(nn.predict(ag.q1, xa)[:, 0], nn.predict(ag.q2, xa)[:, 0])
    assert np.array_equal(ag._q_min(x, a), want)
    single = _sac(twin_min=False)
    assert np.array_equal(single._q_min(x, a), nn.predict(single.q1, xa)[:, 0])


def test_sac_train_step_updates_all_networks():
    ag = _sac()
    before = ag.networks()
    lv, lp = ag.train_step(_batch(ag))
    assert np.isfinite(lv) and np.isfinite(lp)
    for k, v in ag.networks().items():
        assert not v.same_values(before[k]), k


# --- PPO ----------------------------------------------------------------------

def test_clip_ratio_saturation():
    r = np.array([0.5, 0.8, 1.0, 1.2, 1.7])
    assert clip_ratio(r, 0.2).tolist() == [0.8, 0.8, 1.0, 1.2, 1.2]


def test_surrogate_inside_range_equals_unclipped():
    r = np.array([0.85, 1.0, 1.15])
    a = np.array([2.0, -1.0, 0.5])
    assert np.array_equal(surrogate(r, a, 0.2), r * a)


def test_zero_advantage_gives_zero_gradient():
    p = nn.init_network([3, 5, 2], "tanh", "gaussian", seed=0)
    x = np.random.default_rng(0).random((4, 3))
    u = np.random.default_rng(1).standard_normal((4, 2))
    logp, _ = nn.gaussian_log_prob(p, x, u)
    g, ratio = surrogate_gradient(p, x, u, logp, np.zeros(4), np.ones(4), 0.2)
    assert g.max_abs() == 0.0
    assert np.allclose(ratio, 1.0, atol=0, rtol=0)


def test_discounted_returns_oracle():
    r = np.array([1.0, 2.0, 3.0, 4.0])
    done = np.array([False, True, False, True])
    assert discounted_returns(r, done, 0.5).tolist() == [2.0, 2.0, 5.0, 4.0]


def test_ppo_empty_rollout_raises():
    ag = PpoCentralAgent(tiny_scenario(), PpoConfig(hidden=(8,)), seed=0)
    with pytest.raises(ValueError):
        ppo_central_update(ag, Rollout())


def test_ppo_update_refreshes_old_policy():
    ag = PpoCentralAgent(tiny_scenario(), PpoConfig(hidden=(8,)), seed=0)
    ro, _ = ag.collect(1)
    info = ppo_central_update(ag, ro)
    assert info["transitions"] == 10
    assert ag.actor_old is ag.actor


# --- shared helpers -------------------------------------------------------------

def test_action_from_fractions_respects_headroom():
    env = SupplyChainEnv(tiny_scenario(), seed=0)
    obs = env.observe()
    a = action_from_fractions(obs, np.array([1.5, -0.2]))
    assert a.dc_orders[0, 0] == obs.dc_headroom()[0, 0] and a.retailer_orders[0, 0] == 0.0


def test_episode_seed_stable_and_distinct():
    assert episode_seed(1, 2, 3) == episode_seed(1, 2, 3)
    assert len({episode_seed(1, 2, e) for e in range(100)}) == 100


def test_acting_does_not_touch_environment():
    for ag in (_dqn(), _sac(), PpoCentralAgent(tiny_scenario(), PpoConfig(hidden=(8,)), seed=0)):
        t, stock = ag.env.t, ag.env.ret_stock.copy()
        ag.policy()(ag.env.observe())
        assert ag.env.t == t and np.array_equal(ag.env.ret_stock, stock)


def test_evaluate_is_deterministic():
    env = SupplyChainEnv(tiny_scenario(demand=("uniform_int", 0, 3)), seed=0)
    pol = SSPolicy([[30.0]], [[60.0]], [[3.0]], [[8.0]])
    assert evaluate(env, pol, 3, 7) == evaluate(env, pol, 3, 7)
