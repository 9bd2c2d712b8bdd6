import numpy as np
import pytest

from projnewton import ObjectiveOracle


def quad_oracle(A, b=None, c=0.0):
    A = np.asarray(A, dtype=float)
    b = np.zeros(A.shape[0]) if b is None else np.asarray(b, dtype=float)
    return ObjectiveOracle(
        A.shape[0],
        lambda x: 0.5 * x @ A @ x + b @ x + c,
        lambda x: A @ x + b,
        lambda x, v: A @ v,
    )


def random_symmetric(rng, n, kind):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    if kind == "psd":
        lam = rng.uniform(0.0, 3.0, n)
    elif kind == "indefinite":
        lam = rng.uniform(-3.0, 3.0, n)
    else:  # near-singular
        lam = rng.uniform(0.0, 2.0, n)
        lam[: max(1, n // 3)] = rng.uniform(-1e-6, 1e-6, max(1, n // 3))
    return (Q * lam) @ Q.T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def inf_upper_twin(bounds):
    """Same constraints, expressed through the two-sided code path with u = +inf."""
    from projnewton import BoundSpec
    return BoundSpec(bounds.dim, bounds.mask, np.full(bounds.dim, np.inf))


def same_bits(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return a.shape == b.shape and a.tobytes() == b.tobytes()


def trace_invariants(rep, bounds, oracle, f0):
    """Feasible iterates, strictly decreasing f, consistent counters."""
    problems = []
    fs = [f0] + [r.f for r in rep.trace]
    if any(not b < a for a, b in zip(fs, fs[1:])):
        problems.append("objective did not decrease strictly")
    if not bounds.is_feasible(rep.x_final):
        problems.append("final iterate infeasible")
    if sum(rep.step_counts.values()) != rep.outer_iters:
        problems.append("step counts do not add up")
    if rep.trace and len(rep.trace) != rep.outer_iters:
        problems.append("trace length differs from outer_iters")
    if rep.trace and rep.trace[-1].f != rep.f_final:
        problems.append("last trace value differs from f_final")
    return problems


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
