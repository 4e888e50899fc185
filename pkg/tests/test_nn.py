"""Network forward/backward correctness (finite differences), init
distribution, dropout behavior, Adam update math, serialization."""

import numpy as np
import pytest

from frailnet.errors import NonFiniteError, SpecError
from frailnet.nn import Adam, Mlp, MlpSpec


def sample_safe_case(spec, batch, seed, margin=1e-3):
    """Net + inputs whose hidden pre-activations stay away from the ReLU
    kink, so finite differences see a locally linear function."""
    for attempt in range(200):
        rng = np.random.default_rng(seed + 1000 * attempt)
        net = Mlp.init(spec, rng)
        for b in net.biases[:-1]:
            b += rng.uniform(-0.5, 0.5, size=b.shape)
        x = rng.uniform(-1.0, 1.0, size=(batch, spec.input_dim))
        if min_preact_gap(net, x) > margin:
            return net, x
    raise AssertionError("could not find a kink-free configuration")


def min_preact_gap(net, x):
    a = x
    gap = np.inf
    for i in range(len(net.weights) - 1):
        z = a @ net.weights[i] + net.biases[i]
        gap = min(gap, float(np.min(np.abs(z))))
        a = np.maximum(z, 0.0)
    return gap


def numeric_param_grads(net, x, upstream, h=1e-6):
    grads = []
    for arr in net.param_list():
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + h
            up, _ = net.forward(x)
            arr[idx] = orig - h
            dn, _ = net.forward(x)
            arr[idx] = orig
            g[idx] = float(upstream @ (up - dn)) / (2 * h)
        grads.append(g)
    return grads


def test_init_he_uniform_bounds_and_variance():
    spec = MlpSpec(input_dim=50, hidden=(400, 200))
    net = Mlp.init(spec, np.random.default_rng(3))
    for w, fan_in in zip(net.weights, spec.layer_dims):
        bound = np.sqrt(6.0 / fan_in)
        assert np.all(np.abs(w) <= bound)
        # U(-b, b) has variance b^2/3 = 2/fan_in
        assert np.var(w) == pytest.approx(2.0 / fan_in, rel=0.15)
    for b in net.biases:
        assert np.all(b == 0.0)


def test_init_deterministic_from_seed():
    spec = MlpSpec(input_dim=4, hidden=(8,))
    n1 = Mlp.init(spec, 123)
    n2 = Mlp.init(spec, 123)
    for a, b in zip(n1.param_list(), n2.param_list()):
        np.testing.assert_array_equal(a, b)
    n3 = Mlp.init(spec, 124)
    assert any(not np.array_equal(a, b) for a, b in zip(n1.param_list(), n3.param_list()))


def test_linear_net_weight_gradient_is_input():
    # no hidden layer: out = w @ x + b, so d out / d w_j = x_j and d out / d b = 1
    spec = MlpSpec(input_dim=3, hidden=())
    net = Mlp.init(spec, 0)
    x = np.array([0.5, -1.5, 2.0])
    _, tape = net.forward(x)
    grads, dx = net.backward(tape, 1.0)
    np.testing.assert_allclose(grads.weights[0][:, 0], x, atol=0)
    np.testing.assert_allclose(grads.biases[0], [1.0], atol=0)
    np.testing.assert_allclose(dx[0], net.weights[0][:, 0], atol=0)


@pytest.mark.parametrize(
    "hidden,seed", [((6,), 0), ((5, 4), 1), ((8, 8, 4), 2), ((3,), 3)]
)
def test_backward_matches_finite_differences(hidden, seed):
    spec = MlpSpec(input_dim=3, hidden=hidden)
    net, x = sample_safe_case(spec, batch=5, seed=seed)
    rng = np.random.default_rng(seed + 77)
    upstream = rng.uniform(-2.0, 2.0, size=5)
    _, tape = net.forward(x)
    grads, _ = net.backward(tape, upstream)
    numeric = numeric_param_grads(net, x, upstream)
    for got, want in zip(net.grad_list(grads), numeric):
        np.testing.assert_allclose(got, want, rtol=1e-6, atol=1e-9)


def test_input_gradient_matches_finite_differences():
    spec = MlpSpec(input_dim=4, hidden=(7, 5))
    net, x = sample_safe_case(spec, batch=3, seed=9)
    upstream = np.array([1.0, -0.5, 2.0])
    _, tape = net.forward(x)
    _, dx = net.backward(tape, upstream)
    h = 1e-6
    num = np.zeros_like(x)
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            xp, xm = x.copy(), x.copy()
            xp[i, j] += h
            xm[i, j] -= h
            up, _ = net.forward(xp)
            dn, _ = net.forward(xm)
            num[i, j] = float(upstream @ (up - dn)) / (2 * h)
    np.testing.assert_allclose(dx, num, rtol=1e-6, atol=1e-9)


def test_batched_forward_equals_rowwise():
    spec = MlpSpec(input_dim=5, hidden=(9, 3))
    net = Mlp.init(spec, 21)
    x = np.random.default_rng(4).normal(size=(11, 5))
    batch_out, _ = net.forward(x)
    row_out = np.array([net.forward(row)[0] for row in x])
    # batched and single-row matmuls may take different BLAS paths, so
    # agreement is to rounding, not bit-exact
    np.testing.assert_allclose(batch_out, row_out, rtol=1e-13, atol=1e-15)


def test_dropout_zero_is_identity_and_deterministic():
    spec = MlpSpec(input_dim=3, hidden=(10,))
    net = Mlp.init(spec, 5)
    x = np.random.default_rng(6).normal(size=(7, 3))
    a, _ = net.forward(x)
    b, _ = net.forward(x, dropout_p=0.0)
    c, _ = net.forward(x)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(a, c)


def test_dropout_mc_mean_matches_eval():
    # with one hidden layer the output is linear in the dropout mask, so
    # the inverted scaling makes the train-time mean equal the eval output
    spec = MlpSpec(input_dim=3, hidden=(16,))
    net = Mlp.init(spec, 8)
    x = np.array([[0.3, -0.7, 1.1]])
    eval_out, _ = net.forward(x)
    rng = np.random.default_rng(98)
    draws = np.array([net.forward(x, dropout_p=0.4, rng=rng)[0][0] for _ in range(20000)])
    se = draws.std() / np.sqrt(draws.size)
    assert abs(draws.mean() - eval_out[0]) < 5 * se + 1e-12


def test_dropout_stream_deterministic():
    spec = MlpSpec(input_dim=2, hidden=(8, 8))
    net = Mlp.init(spec, 11)
    x = np.random.default_rng(1).normal(size=(4, 2))
    o1, _ = net.forward(x, dropout_p=0.3, rng=np.random.default_rng(42))
    o2, _ = net.forward(x, dropout_p=0.3, rng=np.random.default_rng(42))
    np.testing.assert_array_equal(o1, o2)
    with pytest.raises(SpecError):
        net.forward(x, dropout_p=0.3)


def test_dropout_gradient_uses_same_mask():
    # a hidden unit dropped in every row contributes nothing to the
    # gradient of its incoming weights
    spec = MlpSpec(input_dim=3, hidden=(16,))
    net = Mlp.init(spec, 13)
    x = np.random.default_rng(14).normal(size=(2, 3))
    for seed in range(50):
        _, tape = net.forward(x, dropout_p=0.5, rng=np.random.default_rng(seed))
        col_dead = np.all(tape.drop_masks[0] == 0.0, axis=0)
        if np.any(col_dead):
            break
    else:
        raise AssertionError("no fully dropped unit in 50 seeds")
    grads, _ = net.backward(tape, np.ones(2))
    assert np.all(grads.weights[0][:, col_dead] == 0.0)
    assert np.any(grads.weights[0][:, ~col_dead] != 0.0)


def test_adam_first_step_magnitude():
    p = np.array([1.0, -2.0, 0.5])
    g = np.array([0.3, -4.0, 1e-3])
    opt = Adam([p], lr=0.01)
    opt.step([p], [g])
    delta = np.abs(p - np.array([1.0, -2.0, 0.5]))
    assert np.all(delta <= 0.01 + 1e-12)
    assert np.all(delta >= 0.0099)


def test_adam_maximize_climbs():
    p = np.array([0.0])
    opt = Adam([p], lr=0.05)
    for _ in range(2000):
        grad = np.array([-2.0 * (p[0] - 3.0)])  # gradient of -(p-3)^2... ascent target p=3
        opt.step([p], [grad], maximize=True)
    assert abs(p[0] - 3.0) < 0.05


def test_adam_weight_decay_hand_formula():
    p = np.array([2.0])
    opt = Adam([p], lr=0.1, weight_decay=0.01)
    opt.step([p], [np.array([0.3])])
    g_eff = 0.3 + 0.01 * 2.0
    want = 2.0 - 0.1 * g_eff / (np.sqrt(g_eff**2) + 1e-8)
    assert p[0] == pytest.approx(want, abs=1e-15)


def test_adam_decay_flags_exempt_params():
    p1, p2 = np.array([2.0]), np.array([2.0])
    opt = Adam([p1, p2], lr=0.1, weight_decay=0.5, decay_flags=[True, False])
    opt.step([p1, p2], [np.array([0.0]), np.array([0.0])])
    assert p1[0] != 2.0  # decay alone moves it
    assert p2[0] == 2.0


def test_adam_rejects_nonfinite_gradient():
    p = np.array([1.0])
    opt = Adam([p], lr=0.1)
    with pytest.raises(NonFiniteError):
        opt.step([p], [np.array([np.nan])])


def test_json_round_trip_is_exact():
    spec = MlpSpec(input_dim=3, hidden=(5, 4))
    net = Mlp.init(spec, 31)
    # drag parameters through non-representable decimals
    for w in net.weights:
        w *= 1.0 / 3.0
    clone = Mlp.from_json(net.to_json())
    assert clone.spec == net.spec
    for a, b in zip(net.param_list(), clone.param_list()):
        np.testing.assert_array_equal(a, b)


def test_spec_validation():
    with pytest.raises(SpecError):
        MlpSpec(input_dim=0)
    with pytest.raises(SpecError):
        MlpSpec(input_dim=2, hidden=(0,))
    net = Mlp.init(MlpSpec(input_dim=2, hidden=(3,)), 0)
    with pytest.raises(SpecError):
        net.forward(np.zeros((4, 5)))
    with pytest.raises(SpecError):
        net.forward(np.zeros((4, 2)), dropout_p=1.0)
