import numpy as np
import pytest

from cchmm.core.errors import NonFiniteError, ShapeMismatchError, SingularMatrixError, TapeError
from cchmm.diffcore import ComputationTape, Tensor, backward, check_gradients, locate_faulty_op, ops, solve_small
from cchmm.diffcore.linalg import MAX_SOLVE_SIZE
from cchmm.diffcore.ops import emit


def test_elementwise_values():
    assert ops.sigmoid(Tensor(0.0)).item() == pytest.approx(0.5)
    assert ops.softmax(Tensor([0.0, 0.0, 0.0])).numpy() == pytest.approx([1 / 3, 1 / 3, 1 / 3])
    assert ops.relu(ops.tanh(Tensor(-2.0))).item() == 0.0


def test_sum_of_squares_gradient():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with ComputationTape() as tape:
        root = ops.sum(ops.mul(x, x))
    backward(tape, root)

    assert x.grad.tolist() == [2.0, 4.0]


def test_leading_axis_broadcast_sums_gradient():
    x = Tensor(np.ones((2, 3)), requires_grad=True)
    b = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    with ComputationTape() as tape:
        root = ops.sum(ops.add(x, b))
    backward(tape, root)

    assert b.grad.tolist() == [2.0, 2.0, 2.0]
    assert x.grad.shape == (2, 3)


def test_constant_root_leaves_gradients_at_zero():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with ComputationTape() as tape:
        root = ops.sum(Tensor([3.0, 4.0]))
    backward(tape, root)

    assert x.grad is None
    assert len(tape) == 0


def test_backward_rejects_non_scalar_root():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with ComputationTape() as tape:
        y = ops.mul(x, x)

    with pytest.raises(TapeError):
        backward(tape, y)


def test_backward_rejects_detached_root():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with ComputationTape() as other:
        root = ops.sum(x)

    with pytest.raises(TapeError):
        backward(ComputationTape(), root)
    with pytest.raises(TapeError):
        backward(other, Tensor(1.0, requires_grad=True))


def test_requires_grad_propagates_without_a_tape():
    x = Tensor([1.0, 2.0], requires_grad=True)

    assert ops.square(x).requires_grad
    assert not ops.square(Tensor([1.0, 2.0])).requires_grad


def test_backward_rejects_root_computed_outside_tape():
    x = Tensor([1.0, 2.0], requires_grad=True)
    root = ops.sum(ops.square(x))

    with pytest.raises(TapeError):
        backward(ComputationTape(), root)
    assert x.grad is None


def test_backward_rejects_intermediate_computed_outside_tape():
    x = Tensor([1.0, 2.0], requires_grad=True)
    y = ops.square(x)
    with ComputationTape() as tape:
        root = ops.sum(ops.mul(y, 3.0))

    with pytest.raises(TapeError):
        backward(tape, root)


def test_tape_can_only_be_consumed_once():
    x = Tensor([1.0], requires_grad=True)
    with ComputationTape() as tape:
        root = ops.sum(ops.square(x))
    backward(tape, root)

    with pytest.raises(TapeError):
        backward(tape, root)


def test_gradients_are_bitwise_reproducible():
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal((4, 4)), rng.standard_normal((4, 2))

    def run():
        x = Tensor(a, requires_grad=True)
        with ComputationTape() as tape:
            root = ops.sum(ops.tanh(ops.matmul(x, b)))
        backward(tape, root)
        return root.item(), x.grad

    first, second = run(), run()
    assert first[0] == second[0]
    assert np.array_equal(first[1], second[1])


def test_tensors_are_immutable():
    x = Tensor([1.0, 2.0])
    with pytest.raises(ValueError):
        x.data[0] = 5.0


def test_shape_mismatch_names_operation():
    with pytest.raises(ShapeMismatchError) as excinfo:
        ops.add(Tensor(np.ones((2, 3))), Tensor(np.ones((3, 2))))
    assert excinfo.value.op == "add"
    assert (2, 3) in excinfo.value.shapes

    with pytest.raises(ShapeMismatchError):
        ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_non_finite_output_is_rejected():
    with np.errstate(over="ignore"):
        with pytest.raises(NonFiniteError) as excinfo:
            ops.exp(Tensor([1000.0]))
    assert excinfo.value.where == "exp"


def test_solve_identity_returns_rhs():
    b = np.array([[1.0, -2.0], [3.0, 0.5]])

    assert np.array_equal(solve_small(np.eye(2), b).numpy(), b)


def test_solve_lower_triangular_by_forward_substitution():
    a, b1, b2 = 0.7, 2.0, -1.0
    x = solve_small(np.array([[1.0, 0.0], [-a, 1.0]]), np.array([[b1], [b2]])).numpy()

    assert x[:, 0] == pytest.approx([b1, a * b1 + b2])


def test_solve_matches_dense_product():
    rng = np.random.default_rng(4)
    for _ in range(20):
        k = int(rng.integers(1, MAX_SOLVE_SIZE + 1))
        a = rng.standard_normal((k, k)) + k * np.eye(k)
        b = rng.standard_normal((k, 3))
        x = solve_small(a, b).numpy()
        assert np.max(np.abs(a @ x - b)) < 1e-10


def test_solve_singular_matrix_reports_pivot():
    with pytest.raises(SingularMatrixError) as excinfo:
        solve_small(np.array([[0.0, 1.0], [0.0, 0.0]]), np.ones((2, 1)))
    assert excinfo.value.pivot == 0.0


def test_solve_rejects_large_systems():
    k = MAX_SOLVE_SIZE + 1
    with pytest.raises(ShapeMismatchError):
        solve_small(np.eye(k), np.ones((k, 1)))


def test_gradcheck_sigmoid():
    result = check_gradients(lambda t: ops.sum(ops.sigmoid(t["x"])), {"x": np.linspace(-2.0, 2.0, 7)})

    assert result.max_rel_err < 1e-6
    assert result.checked_elements == 7


def test_gradcheck_trace_of_matrix_power():
    rng = np.random.default_rng(1)

    def f(t):
        a = t["A"]
        return ops.trace(ops.matrix_power(ops.add(np.eye(4), ops.mul(a, a)), 5))

    result = check_gradients(f, {"A": 0.3 * rng.standard_normal((4, 4))})
    assert result.max_rel_err < 1e-5


def test_gradcheck_through_solve():
    rng = np.random.default_rng(2)
    weights = rng.standard_normal((3, 2))

    def f(t):
        return ops.sum(ops.mul(solve_small(t["A"], t["B"]), weights))

    leaves = {"A": rng.standard_normal((3, 3)) + 3 * np.eye(3), "B": rng.standard_normal((3, 2))}
    assert check_gradients(f, leaves).max_rel_err < 1e-6


def test_gradcheck_constant_function():
    result = check_gradients(lambda t: ops.sum(Tensor([1.0, 2.0])), {"x": np.array([0.5, -0.5])})

    assert result.max_rel_err == 0.0
    assert result.per_leaf == {"x": 0.0}


def test_gradcheck_catches_wrong_backward():
    def bad_square(x):
        # forgets the factor 2
        return emit("bad_square", (x,), x.data * x.data, lambda g: (g * x.data,))

    result = check_gradients(lambda t: ops.sum(bad_square(t["x"])), {"x": np.array([1.0, 2.0])})
    assert result.max_rel_err == pytest.approx(0.5, rel=1e-6)
    assert result.worst_leaf == "x"


def _weighted_sum(out):
    weights = np.random.default_rng(out.data.size).standard_normal(out.shape)
    return ops.sum(ops.mul(out, weights))


PRIMITIVES = [
    pytest.param(lambda t: ops.add(t["x"], t["y"]), id="add"),
    pytest.param(lambda t: ops.sub(t["x"], t["y"]), id="sub"),
    pytest.param(lambda t: ops.mul(t["x"], t["y"]), id="mul"),
    pytest.param(lambda t: ops.neg(t["x"]), id="neg"),
    pytest.param(lambda t: ops.scale(t["x"], 0.7), id="scale"),
    pytest.param(lambda t: ops.matmul(t["m"], t["x"]), id="matmul"),
    pytest.param(
        lambda t: ops.linear(t["x"], ops.swapaxes(t["y"], 0, 1), ops.select(t["m"], 0, axis=0)),
        id="linear",
    ),
    pytest.param(lambda t: ops.trace(t["m"]), id="trace"),
    pytest.param(lambda t: ops.matrix_power(ops.scale(t["m"], 0.3), 3), id="matrix_power"),
    pytest.param(lambda t: ops.sigmoid(t["x"]), id="sigmoid"),
    pytest.param(lambda t: ops.tanh(t["x"]), id="tanh"),
    pytest.param(lambda t: ops.relu(t["x"]), id="relu"),
    pytest.param(lambda t: ops.exp(t["x"]), id="exp"),
    pytest.param(lambda t: ops.log(ops.add(t["x"], 3.0)), id="log"),
    pytest.param(lambda t: ops.square(t["x"]), id="square"),
    pytest.param(lambda t: ops.clip(t["x"], -1.0, 1.0), id="clip"),
    pytest.param(lambda t: ops.softmax(t["x"]), id="softmax"),
    pytest.param(lambda t: ops.softmax(t["x"], axis=0), id="softmax_axis0"),
    pytest.param(lambda t: ops.sum(t["x"], axis=0), id="sum_axis"),
    pytest.param(lambda t: ops.mean(t["x"]), id="mean"),
    pytest.param(lambda t: ops.mean(t["x"], axis=1), id="mean_axis"),
    pytest.param(lambda t: ops.squared_error(t["x"], t["y"]), id="squared_error"),
    pytest.param(lambda t: ops.concat([t["x"], t["y"]], axis=0), id="concat"),
    pytest.param(lambda t: ops.stack([t["x"], t["y"]]), id="stack"),
    pytest.param(lambda t: ops.select(t["x"], 1, axis=1), id="select"),
    pytest.param(lambda t: ops.slice_axis(t["x"], 1, 3, axis=1), id="slice_axis"),
    pytest.param(lambda t: ops.reshape(t["x"], (4, 3)), id="reshape"),
    pytest.param(lambda t: ops.swapaxes(t["x"], 0, 1), id="swapaxes"),
    pytest.param(lambda t: ops.moveaxis(ops.stack([t["x"], t["y"]]), 0, 2), id="moveaxis"),
    pytest.param(lambda t: solve_small(ops.add(t["m"], 6.0 * np.eye(3)), t["y"]), id="solve_small"),
]


@pytest.mark.parametrize("primitive", PRIMITIVES)
def test_gradcheck_every_primitive(primitive):
    rng = np.random.default_rng(9)
    leaves = {
        "x": rng.uniform(-2.0, 2.0, size=(3, 4)),
        "y": rng.uniform(-2.0, 2.0, size=(3, 4)),
        "m": rng.uniform(-2.0, 2.0, size=(3, 3)),
    }

    result = check_gradients(lambda t: _weighted_sum(primitive(t)), leaves)
    assert result.max_rel_err < 1e-6


def _bad_square(x):
    # forgets the factor 2
    return emit("bad_square", (x,), x.data * x.data, lambda g: (g * x.data,))


def test_locate_faulty_op_names_the_wrong_backward():
    def f(t):
        return ops.sum(ops.tanh(_bad_square(ops.scale(t["x"], 0.5))))

    fault = locate_faulty_op(f, {"x": np.array([1.0, -2.0, 0.7])})

    assert fault is not None
    assert fault.op == "bad_square"
    assert fault.index == 1
    assert fault.rel_err == pytest.approx(0.5, rel=1e-4)


def test_locate_faulty_op_accepts_correct_gradients():
    rng = np.random.default_rng(3)

    def f(t):
        return ops.sum(ops.tanh(ops.matmul(t["A"], ops.sigmoid(t["B"]))))

    assert locate_faulty_op(f, {"A": rng.standard_normal((3, 3)), "B": rng.standard_normal((3, 2))}) is None
