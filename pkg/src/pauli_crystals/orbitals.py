"""Single-particle eigenfunctions for isotropic harmonic traps and the sphere.

Conventions: natural units (oscillator length ``a`` or sphere radius ``R``
equal to ``Geometry.scale``), physicists' Hermite polynomials, and complex
spherical harmonics carrying the Condon-Shortley phase ``(-1)**m``.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GeometryKind",
    "Geometry",
    "OrbitalBasis",
    "hermite_eval",
    "ho_orbital_eval",
    "assoc_legendre",
    "ylm_eval",
    "closed_shell_count",
    "shell_sizes",
    "build_basis",
    "orbital_values",
]


class GeometryKind(str, enum.Enum):
    HARMONIC_1D = "1d"
    HARMONIC_2D = "2d"
    HARMONIC_3D = "3d"
    SPHERE = "sphere"


@dataclass(frozen=True)
class Geometry:
    """Trap geometry. ``scale`` is the oscillator length or the sphere radius."""

    kind: GeometryKind
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", GeometryKind(self.kind))
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    @property
    def is_sphere(self) -> bool:
        return self.kind is GeometryKind.SPHERE

    @property
    def dim(self) -> int:
        """Dimension of the embedding coordinates (3 for the sphere)."""
        return {"1d": 1, "2d": 2, "3d": 3, "sphere": 3}[self.kind.value]

    @property
    def unit_name(self) -> str:
        return "R" if self.is_sphere else "a"


def hermite_eval(n: int, x: float) -> float:
    """Physicists' Hermite polynomial H_n(x) by three-term recurrence."""
    if n < 0:
        raise ValueError("n must be non-negative")
    h_prev, h = 0.0, 1.0
    for k in range(n):
        h_prev, h = h, 2.0 * x * h - 2.0 * k * h_prev
    return h


def _ho_1d(n: int, x: float, a: float) -> float:
    norm = 1.0 / math.sqrt(2.0**n * math.factorial(n) * math.sqrt(math.pi) * a)
    xi = x / a
    return norm * hermite_eval(n, xi) * math.exp(-0.5 * xi * xi)


def ho_orbital_eval(geometry: Geometry, index, point) -> float:
    """Harmonic-oscillator orbital: product of 1D eigenfunctions per axis."""
    if geometry.is_sphere:
        raise ValueError("ho_orbital_eval needs a harmonic geometry")
    index = tuple(np.atleast_1d(index).tolist())
    point = np.atleast_1d(np.asarray(point, dtype=float))
    if len(index) != geometry.dim or point.shape != (geometry.dim,):
        raise ValueError(
            f"{geometry.kind.value} orbital needs {geometry.dim} coordinates, "
            f"got index {index} and point of shape {point.shape}"
        )
    out = 1.0
    for n, x in zip(index, point):
        out *= _ho_1d(int(n), float(x), geometry.scale)
    return out


def assoc_legendre(l: int, m: int, u: float) -> float:
    """Associated Legendre function P_l^m(u), Condon-Shortley phase included."""
    if not (0 <= m <= l):
        raise ValueError(f"need 0 <= m <= l, got l={l}, m={m}")
    if not -1.0 <= u <= 1.0:
        raise ValueError(f"u={u} outside [-1, 1]")
    # diagonal P_m^m, then upward in l
    pmm = 1.0
    s = math.sqrt((1.0 - u) * (1.0 + u))
    for i in range(1, m + 1):
        pmm *= -(2 * i - 1) * s
    if l == m:
        return pmm
    pm1 = u * (2 * m + 1) * pmm
    for ll in range(m + 2, l + 1):
        pmm, pm1 = pm1, (u * (2 * ll - 1) * pm1 - (ll + m - 1) * pmm) / (ll - m)
    return pm1


def ylm_eval(l: int, m: int, theta: float, phi: float) -> complex:
    """Orthonormal complex spherical harmonic Y_lm(theta, phi)."""
    if not 0.0 <= theta <= math.pi:
        raise ValueError(f"polar angle {theta} outside [0, pi]")
    if abs(m) > l:
        raise ValueError(f"|m| > l for l={l}, m={m}")
    am = abs(m)
    norm = math.sqrt(
        (2 * l + 1) / (4 * math.pi) * math.factorial(l - am) / math.factorial(l + am)
    )
    y = norm * assoc_legendre(l, am, math.cos(theta)) * complex(
        math.cos(am * phi), math.sin(am * phi)
    )
    if m < 0:
        y = (-1) ** am * y.conjugate()
    return y


def shell_sizes(kind: GeometryKind, shells: int) -> list[int]:
    kind = GeometryKind(kind)
    if kind is GeometryKind.HARMONIC_1D:
        return [1] * shells
    if kind is GeometryKind.HARMONIC_2D:
        return [k + 1 for k in range(shells)]
    if kind is GeometryKind.HARMONIC_3D:
        return [(k + 1) * (k + 2) // 2 for k in range(shells)]
    return [2 * l + 1 for l in range(shells)]


def closed_shell_count(kind: GeometryKind, shells: int) -> int:
    """Number of states in the lowest ``shells`` energy shells."""
    return sum(shell_sizes(kind, shells))


@dataclass(frozen=True)
class OrbitalBasis:
    """Closed-shell set of occupied orbitals, ordered by energy then index."""

    geometry: Geometry
    shells: int
    indices: tuple = field(default=())

    @property
    def n(self) -> int:
        return len(self.indices)

    @property
    def is_complex(self) -> bool:
        return self.geometry.is_sphere

    def shell_of(self, index) -> int:
        return index[0] if self.geometry.is_sphere else sum(index)

    def __len__(self):
        return len(self.indices)


def build_basis(geometry: Geometry, shells: int) -> OrbitalBasis:
    if shells < 1:
        raise ValueError(f"shells must be >= 1, got {shells}")
    kind = geometry.kind
    indices: list[tuple[int, ...]] = []
    for k in range(shells):
        if kind is GeometryKind.SPHERE:
            indices.extend((k, m) for m in range(-k, k + 1))
        else:
            d = geometry.dim
            shell = [t for t in itertools.product(range(k + 1), repeat=d) if sum(t) == k]
            indices.extend(sorted(shell))
    return OrbitalBasis(geometry=geometry, shells=shells, indices=tuple(indices))


# -- vectorized evaluation ---------------------------------------------------

def _ho_table(x: np.ndarray, nmax: int) -> np.ndarray:
    """Normalized 1D oscillator functions phi_0..phi_nmax at x (units of a=1).

    Uses the normalized recurrence, which stays finite where H_n/sqrt(2^n n!)
    would overflow.
    """
    out = np.empty((nmax + 1,) + x.shape)
    out[0] = math.pi**-0.25 * np.exp(-0.5 * x * x)
    if nmax >= 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for k in range(1, nmax):
        out[k + 1] = math.sqrt(2.0 / (k + 1)) * x * out[k] - math.sqrt(k / (k + 1)) * out[k - 1]
    return out


def _ylm_table(z: np.ndarray, x: np.ndarray, y: np.ndarray, lmax: int) -> dict:
    """All Y_lm with l <= lmax, m >= 0 on unit vectors, keyed by (l, m)."""
    ct = np.clip(z, -1.0, 1.0)
    st = np.sqrt(np.maximum(0.0, 1.0 - ct * ct))
    phi = np.arctan2(y, x)
    out = {}
    pmm = np.full(ct.shape, 1.0 / math.sqrt(4.0 * math.pi))
    for m in range(lmax + 1):
        if m > 0:
            pmm = -math.sqrt((2 * m + 1) / (2.0 * m)) * st * pmm
        eimp = np.exp(1j * m * phi)
        out[(m, m)] = pmm * eimp
        if m == lmax:
            break
        p_lm2 = pmm
        p_lm1 = math.sqrt(2 * m + 3) * ct * pmm
        out[(m + 1, m)] = p_lm1 * eimp
        for l in range(m + 2, lmax + 1):
            a = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            p_lm2, p_lm1 = p_lm1, a * (ct * p_lm1 - b * p_lm2)
            out[(l, m)] = p_lm1 * eimp
    return out


def orbital_values(basis: OrbitalBasis, points: np.ndarray) -> np.ndarray:
    """Evaluate every orbital of ``basis`` at ``points``.

    points has shape (..., d); the result has shape (..., n_orbitals) and is
    real for traps, complex for the sphere.
    """
    geom = basis.geometry
    points = np.asarray(points, dtype=float)
    if points.shape[-1] != geom.dim:
        raise ValueError(
            f"{geom.kind.value} points need {geom.dim} coordinates, got shape {points.shape}"
        )
    lead = points.shape[:-1]
    if geom.is_sphere:
        r = points / np.linalg.norm(points, axis=-1, keepdims=True)
        table = _ylm_table(r[..., 2], r[..., 0], r[..., 1], basis.shells - 1)
        out = np.empty(lead + (basis.n,), dtype=complex)
        for j, (l, m) in enumerate(basis.indices):
            if m >= 0:
                out[..., j] = table[(l, m)]
            else:
                out[..., j] = (-1) ** m * np.conj(table[(l, -m)])
        return out / geom.scale

    a = geom.scale
    xi = points / a
    nmax = basis.shells - 1
    tables = [_ho_table(xi[..., ax], nmax) for ax in range(geom.dim)]
    out = np.empty(lead + (basis.n,))
    for j, idx in enumerate(basis.indices):
        v = tables[0][idx[0]]
        for ax in range(1, geom.dim):
            v = v * tables[ax][idx[ax]]
        out[..., j] = v
    return out * a ** (-0.5 * geom.dim)
