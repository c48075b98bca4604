import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rxfault.neuralnet import (
    ALGORITHMS,
    CascadeNet,
    NormalizationSpec,
    Topology,
    TrainConfig,
    TrainingError,
    dminmax,
    dminmax_inverse,
    forward,
    gradient,
    init_weights,
    jacobian,
    lm_step,
    mse,
    residuals,
    train,
)

SPEC = NormalizationSpec(5.0, 200.0)


def test_dminmax_endpoints_and_value():
    assert dminmax(5.0, SPEC) == 0.1
    assert dminmax(200.0, SPEC) == 0.9
    assert dminmax(175.0, SPEC) == pytest.approx(0.8 * 170 / 195 + 0.1, abs=1e-15)
    assert dminmax(175.0, SPEC) == pytest.approx(0.79744, abs=1e-5)
    with pytest.raises(ValueError):
        NormalizationSpec(3.0, 3.0)


@given(st.floats(5.0, 200.0))
def test_dminmax_round_trip(d):
    assert abs(dminmax_inverse(dminmax(d, SPEC), SPEC) - d) <= 1e-9


def straight_forward(topo: Topology, params: np.ndarray, x: np.ndarray) -> float:
    """Unvectorized forward pass reading the flat parameter layout directly."""
    sizes = list(topo.hidden) + [topo.output_dim]
    outputs = [list(x)]
    pos = 0
    for layer, n in enumerate(sizes):
        srcs = range(layer + 1) if topo.cascade else [layer]
        inp = [v for s in srcs for v in outputs[s]]
        weights = params[pos:pos + n * len(inp)].reshape(n, len(inp))
        pos += n * len(inp)
        bias = params[pos:pos + n]
        pos += n
        act = []
        for u in range(n):
            z = bias[u] + sum(weights[u, k] * inp[k] for k in range(len(inp)))
            act.append(z if layer == len(sizes) - 1 else np.tanh(z))
        outputs.append(act)
    assert pos == len(params)
    return outputs[-1][0]


@pytest.mark.parametrize("cascade", [True, False])
def test_forward_matches_straight_line_version(cascade):
    topo = Topology(6, (5, 4, 3), cascade=cascade)
    rng = np.random.default_rng(0)
    net = CascadeNet(topo, rng.normal(size=topo.n_params))
    for x in rng.normal(size=(5, 6)):
        assert forward(net, x) == pytest.approx(straight_forward(topo, net.params, x), abs=1e-12)


def test_zero_cascade_blocks_give_feedforward():
    topo = Topology(4, (3, 3, 2), cascade=True)
    plain = Topology(4, (3, 3, 2), cascade=False)
    rng = np.random.default_rng(1)
    ff = init_weights(plain, 1)
    full = CascadeNet(topo, np.zeros(topo.n_params))
    for l, ((w, b), (wf, bf)) in enumerate(zip(full.layers(), ff.layers())):
        # the feedforward link is the last source block of each cascade layer
        w[:, -wf.shape[1]:] = wf
        b[:] = bf
    x = rng.normal(size=(7, 4))
    np.testing.assert_allclose(forward(full, x), forward(ff, x), atol=1e-14)


def test_zero_net_outputs_zero():
    topo = Topology(5)
    assert forward(CascadeNet(topo, np.zeros(topo.n_params)), np.ones(5)) == 0.0


def test_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        forward(init_weights(Topology(3), 0), np.ones(4))


def test_init_weights_contract():
    topo = Topology(128)
    a, b, c = init_weights(topo, 5), init_weights(topo, 5), init_weights(topo, 6)
    np.testing.assert_array_equal(a.params, b.params)
    assert not np.array_equal(a.params, c.params)
    for l, (w, bias) in enumerate(a.layers()):
        assert np.all(np.abs(w) <= 1 / np.sqrt(topo.fan_in(l)))
        assert not bias.any()


def test_topology_counts():
    assert Topology(128).n_params == 7999
    assert Topology(584).n_params == 32623
    assert Topology(5, (4, 3, 2)).fan_in(2) == 5 + 4 + 3


def small_problem(seed=0):
    topo = Topology(5, (4, 3, 2))
    rng = np.random.default_rng(seed)
    net = CascadeNet(topo, rng.normal(scale=0.7, size=topo.n_params))
    x = rng.normal(size=(9, 5))
    y = rng.normal(size=9)
    return net, x, y


def half_sse(net, x, y, p):
    r = forward(CascadeNet(net.topology, p), x) - y
    return 0.5 * float(r @ r)


@pytest.mark.parametrize("seed", range(3))
def test_gradient_matches_central_differences(seed):
    net, x, y = small_problem(seed)
    g = gradient(net, x, y)
    h = 1e-6
    fd = np.empty_like(g)
    for k in range(len(g)):
        e = np.zeros_like(g)
        e[k] = h
        fd[k] = (half_sse(net, x, y, net.params + e) - half_sse(net, x, y, net.params - e)) / (2 * h)
    assert np.linalg.norm(g - fd) / np.linalg.norm(fd) < 1e-6


def test_jacobian_consistent_with_gradient():
    net, x, y = small_problem(4)
    jt_r = jacobian(net, x).T @ residuals(net, x, y)
    g = gradient(net, x, y)
    assert np.linalg.norm(jt_r - g) <= 1e-10 * np.linalg.norm(g)


def test_gradient_is_additive_over_samples():
    net, x, y = small_problem(2)
    total = sum(gradient(net, x[i:i + 1], y[i:i + 1]) for i in range(len(y)))
    np.testing.assert_allclose(gradient(net, x, y), total, atol=1e-12)


def test_zero_residual_zero_gradient():
    net, x, _ = small_problem(1)
    assert not np.any(gradient(net, x, forward(net, x)))


@pytest.mark.parametrize("n", [9, 80])
def test_lm_step_approaches_steepest_descent(n):
    topo = Topology(5, (4, 3, 2))
    rng = np.random.default_rng(n)
    net = CascadeNet(topo, rng.normal(size=topo.n_params))
    x, y = rng.normal(size=(n, 5)), rng.normal(size=n)
    jac, r = jacobian(net, x), residuals(net, x, y)
    step = lm_step(jac, r, 1e8)
    g = jac.T @ r
    assert -(step @ g) / (np.linalg.norm(step) * np.linalg.norm(g)) > 0.999


def test_lm_step_primal_and_dual_agree():
    rng = np.random.default_rng(0)
    jac, r = rng.normal(size=(6, 20)), rng.normal(size=6)
    primal = -np.linalg.solve(jac.T @ jac + 0.3 * np.eye(20), jac.T @ r)
    np.testing.assert_allclose(lm_step(jac, r, 0.3), primal, atol=1e-10)


def test_lm_fits_constant_quickly():
    x = np.random.default_rng(0).normal(size=(10, 3))
    y = np.full(10, 0.5)
    _, log = train(init_weights(Topology(3, (4,)), 0), x, y, TrainConfig("lm", max_epochs=5))
    assert log.final_mse < 1e-10
    assert log.epochs <= 5


def sine_data():
    x = np.linspace(-3, 3, 20)[:, None]
    return x, np.sin(x[:, 0])


def test_lm_fits_sine():
    x, y = sine_data()
    net, log = train(init_weights(Topology(1, (8,)), 0), x, y, TrainConfig("lm", max_epochs=200))
    assert log.final_mse < 1e-4
    assert mse(net, x, y) == pytest.approx(log.final_mse)
    assert all(b <= a for a, b in zip(log.mse, log.mse[1:]))


@pytest.mark.parametrize("algo", ["cgb", "scg", "oss", "gdx"])
def test_other_trainers_reduce_error(algo):
    x, y = sine_data()
    start = init_weights(Topology(1, (8,)), 0)
    net, log = train(start, x, y, TrainConfig(algo, max_epochs=300))
    assert log.final_mse < 0.1 * mse(start, x, y)
    assert log.final_mse < 5e-3


@pytest.mark.parametrize("algo", ALGORITHMS)
def test_training_is_deterministic(algo):
    x, y = sine_data()
    cfg = TrainConfig(algo, max_epochs=30)
    a, la = train(init_weights(Topology(1, (6, 3)), 2), x, y, cfg)
    b, lb = train(init_weights(Topology(1, (6, 3)), 2), x, y, cfg)
    assert a.params.tobytes() == b.params.tobytes()
    assert la.mse == lb.mse


def test_goal_stops_training():
    x, y = sine_data()
    _, log = train(init_weights(Topology(1, (8,)), 0), x, y, TrainConfig("lm", goal_mse=1e-2))
    assert log.stop_reason == "goal"
    assert log.final_mse <= 1e-2


def test_lm_refuses_large_nets():
    net = init_weights(Topology(584), 0)
    with pytest.raises(MemoryError):
        train(net, np.zeros((3, 584)), np.zeros(3), TrainConfig("lm"))


@pytest.mark.filterwarnings("ignore:invalid value:RuntimeWarning")
def test_non_finite_loss_aborts():
    x, y = sine_data()
    y = y.copy()
    y[0] = np.inf
    with pytest.raises(TrainingError, match="non-finite"):
        train(init_weights(Topology(1, (3,)), 0), x, y, TrainConfig("cgb", max_epochs=3))


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig("adam")
    with pytest.raises(ValueError):
        TrainConfig(max_epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0.0)
