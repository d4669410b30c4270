import numpy as np
import pytest

from pkt.autodiff import Tensor

# pass/fail lines collected by test_acceptance.py, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def numerical_grad(build, arrays, h=1e-5):
    """Central-difference gradients of a scalar function of numpy arrays.

    ``build(*arrays) -> float`` must evaluate the function from plain
    arrays with no autodiff involved. Returns one gradient array per
    input, computed entry by entry.
    """
    arrays = [np.asarray(a, dtype=float) for a in arrays]
    grads = []
    for k, base in enumerate(arrays):
        g = np.zeros_like(base)
        it = np.nditer(base, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            bumped = [a.copy() if i == k else a for i, a in enumerate(arrays)]
            bumped[k][idx] = base[idx] + h
            up = build(*bumped)
            bumped[k][idx] = base[idx] - h
            down = build(*bumped)
            g[idx] = (up - down) / (2.0 * h)
            it.iternext()
        grads.append(g)
    return grads


def check_gradients(fn, shapes, seed=0, scale=1.0, h=1e-5, rtol=1e-6, atol=1e-8):
    """Compare ``fn``'s backward pass against numerical_grad.

    ``fn`` maps Tensors to a scalar Tensor and must be evaluable from raw
    arrays too (it only sees Tensor ops, so wrapping suffices).
    """
    rng = np.random.default_rng(seed)
    arrays = [np.asarray(scale * rng.standard_normal(s)) for s in shapes]
    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    out = fn(*tensors)
    assert out.value.shape in ((), (1,)) or out.value.size == 1
    out.backward()

    def rebuild(*raw):
        return float(fn(*[Tensor(r) for r in raw]).value)

    expected = numerical_grad(rebuild, arrays, h=h)
    for t, e in zip(tensors, expected):
        np.testing.assert_allclose(t.grad, e, rtol=rtol, atol=atol)
    return tensors


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
