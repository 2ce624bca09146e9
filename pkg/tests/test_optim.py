import numpy as np
import pytest
from hypothesis import given, strategies as st

from pdlab.nnet import ArchitectureSpec, Network, build_network
from pdlab.optim import OptimizerConfig, make_state, step
from pdlab.rng import make_stream


def _toy_net(w):
    # a linear net whose first two weights are the coordinates under test
    spec = ArchitectureSpec("linear")
    W = np.zeros((32, 1))
    W[:2, 0] = w
    return Network(spec, [W, np.zeros(1)])


def _toy_grads(g):
    G = np.zeros((32, 1))
    G[:2, 0] = g
    return [G, np.zeros(1)]


def test_adagrad_hand_values():
    cfg = OptimizerConfig("adagrad", lr=0.1, acc_init=0.1)
    net = _toy_net([1.0, -2.0])
    state = make_state(net, cfg)
    for _ in range(2):
        step(state, net, _toy_grads([0.5, -1.0]), cfg)
    # acc: 0.1 -> 0.35 -> 0.6 and 0.1 -> 1.1 -> 2.1
    assert net.params[0][0, 0] == pytest.approx(0.8509348520903581, abs=1e-15)
    assert net.params[0][1, 0] == pytest.approx(-1.8356471851412053, abs=1e-15)
    assert state.slots[0][0, 0] == pytest.approx(0.6)
    assert state.step_counter == 2


def test_sgd_momentum_hand_values():
    cfg = OptimizerConfig("sgd", lr=0.1, momentum=0.9, decay=0.001)
    net = _toy_net([1.0, -2.0])
    state = make_state(net, cfg)
    for _ in range(3):
        step(state, net, _toy_grads([0.5, -1.0]), cfg)
    assert net.params[0][0, 0] == pytest.approx(0.7196947054941066, abs=1e-15)
    assert net.params[0][1, 0] == pytest.approx(-1.4393894109882133, abs=1e-15)


def test_zero_gradient_leaves_weights():
    for cfg in (OptimizerConfig("adagrad"), OptimizerConfig("sgd")):
        net = build_network(ArchitectureSpec("double"), make_stream(0))
        before = net.buffer.copy()
        state = make_state(net, cfg)
        step(state, net, [np.zeros_like(p) for p in net.params], cfg)
        assert np.array_equal(net.buffer, before)


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=20))
def test_adagrad_accumulator_monotone(gs):
    cfg = OptimizerConfig("adagrad")
    net = _toy_net([0.0, 0.0])
    state = make_state(net, cfg)
    prev = state.buffer.copy()
    for g in gs:
        step(state, net, _toy_grads([g, -g]), cfg)
        assert np.all(state.buffer >= prev)
        prev = state.buffer.copy()
    assert net.is_finite()


@given(st.floats(-100, 100))
def test_adagrad_first_step_bounded_by_lr(g):
    # |dw| = lr |g| / sqrt(0.1 + g^2) < lr
    cfg = OptimizerConfig("adagrad", lr=0.1)
    net = _toy_net([0.0, 0.0])
    step(make_state(net, cfg), net, _toy_grads([g, 0.0]), cfg)
    assert abs(net.params[0][0, 0]) < 0.1


def test_shape_mismatch_rejected():
    cfg = OptimizerConfig()
    net = build_network(ArchitectureSpec("double"), make_stream(0))
    state = make_state(net, cfg)
    with pytest.raises(ValueError):
        step(state, net, [np.zeros((32, 1)), np.zeros(1)], cfg)


@pytest.mark.parametrize(
    "kwargs", [{"kind": "adam"}, {"lr": 0.0}, {"acc_init": -1.0}, {"momentum": 1.0}, {"decay": -0.1}]
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        OptimizerConfig(**kwargs)


def test_scaled_and_label():
    cfg = OptimizerConfig("adagrad", lr=0.1).scaled(0.1)
    assert cfg.lr == pytest.approx(0.01)
    assert OptimizerConfig("sgd", lr=0.05).label() == "sgd0.05"


def test_state_copy_independent():
    net = build_network(ArchitectureSpec("double"), make_stream(0))
    state = make_state(net, OptimizerConfig())
    copy = state.copy()
    state.buffer += 1
    assert not np.array_equal(state.buffer, copy.buffer)
