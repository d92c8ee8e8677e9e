import functools
import time

import numpy as np
import pytest

from pauli_crystals import AnnealSchedule, Geometry, GeometryKind, anneal, build_basis

KINDS = ["1d", "2d", "3d", "sphere"]


def geom(kind: str, scale: float = 1.0) -> Geometry:
    return Geometry(GeometryKind(kind), scale)


def basis(kind: str, shells: int, scale: float = 1.0):
    return build_basis(geom(kind, scale), shells)


@functools.lru_cache(maxsize=None)
def optimized(kind: str, shells: int, seed: int = 0):
    """Annealed pattern with default schedule and its wall time, shared across modules."""
    t0 = time.perf_counter()
    pattern = anneal(basis(kind, shells), AnnealSchedule(seed=seed))
    return pattern, time.perf_counter() - t0


def random_points(kind: str, n: int, rng, size=None):
    shape = (n,) if size is None else (size, n)
    if kind == "sphere":
        v = rng.normal(size=shape + (3,))
        return v / np.linalg.norm(v, axis=-1, keepdims=True)
    d = {"1d": 1, "2d": 2, "3d": 3}[kind]
    return rng.normal(scale=1.0, size=shape + (d,))


def random_rotation(dim: int, rng) -> np.ndarray:
    if dim == 1:
        return np.array([[rng.choice([-1.0, 1.0])]])
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
