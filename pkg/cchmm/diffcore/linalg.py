import numpy as np

from cchmm.core.errors import ShapeMismatchError, SingularMatrixError
from cchmm.diffcore.ops import Operand, as_tensor, emit
from cchmm.diffcore.tensor import Tensor

MAX_SOLVE_SIZE = 16
PIVOT_TOLERANCE = 1e-10


def gauss_solve(a: np.ndarray, b: np.ndarray, context: str = "") -> np.ndarray:
    """Solve a @ x = b by Gauss elimination with partial pivoting; b may hold many columns."""
    a = np.array(a, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    n = a.shape[0]

    for k in range(n):
        p = int(np.argmax(np.abs(a[k:, k]))) + k
        pivot = abs(a[p, k])
        if pivot < PIVOT_TOLERANCE:
            raise SingularMatrixError(float(pivot), context)
        if p != k:
            a[[k, p]] = a[[p, k]]
            b[[k, p]] = b[[p, k]]
        lam = a[k + 1:, k] / a[k, k]
        a[k + 1:, k:] -= np.outer(lam, a[k, k:])
        b[k + 1:] -= np.outer(lam, b[k])

    x = np.zeros_like(b)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - a[k, k + 1:] @ x[k + 1:]) / a[k, k]
    return x


def solve_small(a: Operand, b: Operand, context: str = "") -> Tensor:
    """X with A·X = B for k×k A (k <= 16) and k×m B, differentiable in both."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeMismatchError("solve_small", [a.shape, b.shape], "A must be square")
    if a.shape[0] > MAX_SOLVE_SIZE:
        raise ShapeMismatchError("solve_small", [a.shape], f"k must be <= {MAX_SOLVE_SIZE}")
    if b.ndim != 2 or b.shape[0] != a.shape[0]:
        raise ShapeMismatchError("solve_small", [a.shape, b.shape])

    x = gauss_solve(a.data, b.data, context)

    def grad_fn(g):
        grad_b = gauss_solve(a.data.T, g, context)
        grad_a = -grad_b @ x.T
        return grad_a, grad_b

    return emit("solve_small", (a, b), x, grad_fn)
