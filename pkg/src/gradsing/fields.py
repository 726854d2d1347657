"""Radial grids, spherical-harmonic mode fields and the weighted sup norms.

Everything radial lives on a log-uniform grid ``s = ln r`` with constant
spacing ``h``. Fields behave like powers of ``r`` near the singular point,
which are smooth exponentials in ``s``; finite differences in ``s`` are
therefore accurate all the way down to ``r_min``.

A :class:`ModeField` stores coefficient profiles ``a_{k,m}(r)`` of the real
orthonormal harmonics on the unit sphere. With that normalization a radial
function ``f(r)`` has ``a_{0,0} = sqrt(|S^{N-1}|) f``.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.special import roots_legendre, sph_harm_y

from .errors import BandLimitError, ConfigError, DomainError
from .params import Params, Regime, sphere_area

DEFAULT_FD_ORDER = 6
MIN_SOLVER_POINTS = 16


# ---------------------------------------------------------------------------
# finite-difference and quadrature weights on an integer lattice


@functools.lru_cache(maxsize=None)
def fd_weights(offsets: tuple, deriv: int) -> np.ndarray:
    """Weights ``w`` with ``sum w_j f(x + o_j h) = h^deriv f^(deriv)(x) + O(h^len)``."""
    o = np.asarray(offsets, dtype=float)
    n = len(o)
    V = np.vander(o, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[deriv] = math.factorial(deriv)
    return np.linalg.solve(V, rhs)


@functools.lru_cache(maxsize=None)
def _interval_weights(offsets: tuple, lo: float) -> np.ndarray:
    """``int_lo^{lo+1}`` of the Lagrange basis on integer ``offsets``."""
    o = np.asarray(offsets, dtype=float)
    n = len(o)
    V = np.vander(o, n, increasing=True).T
    k = np.arange(n)
    moments = ((lo + 1.0) ** (k + 1) - lo ** (k + 1)) / (k + 1)
    return np.linalg.solve(V, moments)


def _lagrange_row(x: float, n: int, M: int) -> tuple[int, np.ndarray]:
    """Start index and weights to interpolate at fractional index ``x``."""
    j0 = int(np.clip(math.floor(x) - n // 2 + 1, 0, M - n))
    nodes = np.arange(j0, j0 + n, dtype=float)
    w = np.ones(n)
    for a in range(n):
        for b in range(n):
            if a != b:
                w[a] *= (x - nodes[b]) / (nodes[a] - nodes[b])
    return j0, w


# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Log-uniform nodes ``r_i = exp(s0 + i h)``."""

    s0: float
    h: float
    M: int
    fd_order: int = DEFAULT_FD_ORDER

    @functools.cached_property
    def s(self) -> np.ndarray:
        return self.s0 + self.h * np.arange(self.M)

    @functools.cached_property
    def r(self) -> np.ndarray:
        return np.exp(self.s)

    @property
    def points(self) -> np.ndarray:
        return self.r

    @property
    def r_min(self) -> float:
        return float(self.r[0])

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    @functools.cached_property
    def quad_weights(self) -> np.ndarray:
        """Trapezoid weights for ``int g(r) dr/r = int g ds``."""
        w = np.full(self.M, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    def slice(self, i0: int, i1: int) -> "RadialGrid":
        """Sub-grid of nodes ``i0 .. i1-1`` with the same spacing."""
        if not (0 <= i0 < i1 <= self.M):
            raise DomainError("bad slice bounds")
        return RadialGrid(self.s0 + i0 * self.h, self.h, i1 - i0, self.fd_order)

    def index_of(self, r: float, rtol: float = 1e-9) -> int:
        """Index of the node equal to ``r``; DomainError if ``r`` is not a node."""
        x = (math.log(r) - self.s0) / self.h
        i = int(round(x))
        if not (0 <= i < self.M) or abs(x - i) > rtol / self.h + 1e-9:
            raise DomainError(f"r={r} is not a grid node")
        return i

    def require_resolution(self, minimum: int = MIN_SOLVER_POINTS):
        if self.M < max(minimum, self.fd_order + 3):
            raise DomainError(f"grid needs at least {max(minimum, self.fd_order + 3)} points, has {self.M}")

    # differentiation in s --------------------------------------------------

    def _diff_matrix(self, deriv: int) -> sparse.csr_matrix:
        self.require_resolution(0)
        q, M = self.fd_order, self.M
        half = q // 2
        width = q + 1 if deriv == 1 else q + 2
        rows, cols, vals = [], [], []
        for i in range(M):
            if half <= i < M - half:
                start, n = i - half, q + 1
            else:
                n = width
                start = 0 if i < half else M - n
            offs = tuple(range(start - i, start - i + n))
            w = fd_weights(offs, deriv) / self.h**deriv
            rows.extend([i] * n)
            cols.extend(range(start, start + n))
            vals.extend(w)
        return sparse.csr_matrix((vals, (rows, cols)), shape=(M, M))

    @functools.cached_property
    def D1(self) -> sparse.csr_matrix:
        """``d/ds`` on the nodes."""
        return self._diff_matrix(1)

    @functools.cached_property
    def D2(self) -> sparse.csr_matrix:
        """``d^2/ds^2`` on the nodes."""
        return self._diff_matrix(2)

    def ds(self, a: np.ndarray) -> np.ndarray:
        return self.D1 @ a

    def dr(self, a: np.ndarray) -> np.ndarray:
        """``a'(r) = (Da)/r``; works along the last axis."""
        a = np.asarray(a, dtype=float)
        return (self.D1 @ a.T).T / self.r

    def drr(self, a: np.ndarray) -> np.ndarray:
        """``a''(r) = (D^2 a - D a)/r^2``."""
        a = np.asarray(a, dtype=float)
        return ((self.D2 @ a.T).T - (self.D1 @ a.T).T) / self.r**2

    # integration and interpolation -----------------------------------------

    @functools.cached_property
    def _panel_matrix(self) -> sparse.csr_matrix:
        """Row ``i`` integrates over ``[s_i, s_{i+1}]`` with a local Lagrange rule."""
        n = min(self.fd_order, self.M)
        rows, cols, vals = [], [], []
        for i in range(self.M - 1):
            j0 = int(np.clip(i - n // 2 + 1, 0, self.M - n))
            offs = tuple(range(j0 - i, j0 - i + n))
            w = _interval_weights(offs, 0.0) * self.h
            rows.extend([i] * n)
            cols.extend(range(j0, j0 + n))
            vals.extend(w)
        return sparse.csr_matrix((vals, (rows, cols)), shape=(self.M - 1, self.M))

    def cumulative(self, f_s: np.ndarray) -> np.ndarray:
        """``F_i = int_{s_0}^{s_i} f ds`` (high order, ``F_0 = 0``)."""
        panels = self._panel_matrix @ np.asarray(f_s, dtype=float)
        return np.concatenate([[0.0], np.cumsum(panels)])

    def cumulative_from_end(self, f_s: np.ndarray) -> np.ndarray:
        """``F_i = int_{s_i}^{s_{M-1}} f ds``."""
        panels = self._panel_matrix @ np.asarray(f_s, dtype=float)
        return np.concatenate([np.cumsum(panels[::-1])[::-1], [0.0]])

    def integrate(self, f_s: np.ndarray) -> float:
        return float(self.cumulative(f_s)[-1])

    def interp(self, a: np.ndarray, r) -> np.ndarray | float:
        """Local Lagrange interpolation in ``s`` at radii ``r`` inside the grid."""
        rr = np.atleast_1d(np.asarray(r, dtype=float))
        x = (np.log(rr) - self.s0) / self.h
        if np.any(x < -1e-9) or np.any(x > self.M - 1 + 1e-9):
            raise DomainError("interpolation point outside the grid")
        n = min(self.fd_order, self.M)
        out = np.empty(len(rr))
        for idx, xi in enumerate(x):
            j0, w = _lagrange_row(float(xi), n, self.M)
            out[idx] = w @ a[j0 : j0 + n]
        return out if np.ndim(r) else float(out[0])

    def to_dict(self) -> dict:
        return {"r_min": self.r_min, "r_max": self.r_max, "M": self.M, "fd_order": self.fd_order}


def make_log_grid(r_min: float, r_max: float, M: int, fd_order: int = DEFAULT_FD_ORDER) -> RadialGrid:
    """Log-uniform grid with both endpoints as nodes."""
    if not (r_min > 0 and r_max > r_min and np.isfinite(r_max)):
        raise DomainError(f"need 0 < r_min < r_max, got ({r_min}, {r_max})")
    if int(M) != M or M < 2:
        raise DomainError(f"M must be an integer >= 2, got {M}")
    if fd_order < 2 or fd_order % 2:
        raise DomainError("fd_order must be an even integer >= 2")
    s0, s1 = math.log(r_min), math.log(r_max)
    return RadialGrid(s0, (s1 - s0) / (M - 1), int(M), fd_order)


def grid_with_spacing(s_lo: float, s_hi: float, h: float, fd_order: int = DEFAULT_FD_ORDER) -> RadialGrid:
    """Grid with spacing at most ``h`` covering ``[s_lo, s_hi]`` exactly."""
    M = max(int(math.ceil((s_hi - s_lo) / h - 1e-9)) + 1, MIN_SOLVER_POINTS)
    return RadialGrid(s_lo, (s_hi - s_lo) / (M - 1), M, fd_order)


# ---------------------------------------------------------------------------
# angular quadrature and real harmonics on S^2


def sh_labels(K: int) -> list[tuple[int, int]]:
    return [(k, m) for k in range(K + 1) for m in range(-k, k + 1)]


def sh_index(k: int, m: int) -> int:
    return k * k + m + k


def _real_from_complex(z: np.ndarray, m: int) -> np.ndarray:
    if m > 0:
        return math.sqrt(2.0) * (-1) ** m * z.real
    if m < 0:
        return math.sqrt(2.0) * (-1) ** m * z.imag
    return z.real


@dataclass(frozen=True, eq=False)
class AngularSet:
    """Gauss-Legendre (in cos theta) times uniform (in phi) product rule.

    With ``2K+2`` polar and ``4K+4`` azimuthal nodes it integrates harmonics
    of degree ``<= 4K+3`` exactly, so coefficients up to degree ``2K+1`` are
    recovered exactly from band-limited samples.
    """

    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray
    exact_degree: int

    @property
    def n(self) -> int:
        return len(self.weights)

    @functools.cached_property
    def directions(self) -> np.ndarray:
        st = np.sin(self.theta)
        return np.stack([st * np.cos(self.phi), st * np.sin(self.phi), np.cos(self.theta)], axis=1)

    @property
    def max_decomposable_degree(self) -> int:
        return self.exact_degree // 2

    @functools.lru_cache(maxsize=8)
    def basis(self, K: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Real harmonics and tangential derivatives, each ``(n_modes, n_dirs)``.

        Returns ``(Y, dY/dtheta, (1/sin theta) dY/dphi)``.
        """
        labels = sh_labels(K)
        Y = np.empty((len(labels), self.n))
        Yt = np.empty_like(Y)
        Yp = np.empty_like(Y)
        st = np.sin(self.theta)
        for i, (k, m) in enumerate(labels):
            z, dz = sph_harm_y(k, abs(m), self.theta, self.phi, diff_n=1)
            Y[i] = _real_from_complex(z, m)
            Yt[i] = _real_from_complex(dz[..., 0], m)
            Yp[i] = _real_from_complex(dz[..., 1], m) / st
        return Y, Yt, Yp


def gauss_product_set(K: int) -> AngularSet:
    """Product rule sized for band limit ``K`` (exact to degree ``4K+3``)."""
    if K < 0:
        raise ConfigError("K must be nonnegative")
    n_t, n_p = 2 * K + 2, 4 * K + 4
    x, wx = roots_legendre(n_t)
    th = np.arccos(x)
    ph = 2.0 * np.pi * np.arange(n_p) / n_p
    T, P = np.meshgrid(th, ph, indexing="ij")
    W = np.outer(wx, np.full(n_p, 2.0 * np.pi / n_p))
    return AngularSet(T.ravel(), P.ravel(), W.ravel(), 4 * K + 3)


_DATA = Path(__file__).with_name("data")
DEFAULT_ANGULAR_K = 8
ANGULAR_TABLE = _DATA / f"angular_gauss_K{DEFAULT_ANGULAR_K}.csv"


def load_angular_table(path: Path = ANGULAR_TABLE) -> AngularSet:
    """Read a shipped angular table (columns theta, phi, weight)."""
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    with open(path) as fh:
        header = fh.readline()
    exact = int(header.split("exact_degree=")[1].split(",")[0]) if "exact_degree=" in header else None
    if exact is None:
        raise ConfigError(f"angular table {path} lacks an exact_degree tag")
    return AngularSet(data[:, 0].copy(), data[:, 1].copy(), data[:, 2].copy(), exact)


def write_angular_table(aset: AngularSet, path: Path):
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# exact_degree={aset.exact_degree}, theta,phi,weight\n")
        for t, p, w in zip(aset.theta, aset.phi, aset.weights):
            fh.write(f"{t:.17e},{p:.17e},{w:.17e}\n")


@functools.lru_cache(maxsize=1)
def default_angular_set() -> AngularSet:
    if ANGULAR_TABLE.exists():
        return load_angular_table()
    return gauss_product_set(DEFAULT_ANGULAR_K)


def angular_set_for(K: int) -> AngularSet:
    """Smallest convenient set able to decompose degree ``K`` exactly."""
    aset = default_angular_set()
    if 2 * K <= aset.exact_degree:
        return aset
    return gauss_product_set(K)


# ---------------------------------------------------------------------------
# mode fields


@dataclass(eq=False)
class ModeField:
    """Coefficient profiles ``a_{k,m}`` on a radial grid.

    ``labels[i] = (k, m)`` names row ``i`` of ``coeffs``. For ``N = 3`` the
    labels are real spherical harmonics; for other ``N`` only radial fields
    (label ``(0, 0)``) can be evaluated pointwise, while the mode solvers
    accept any labels since they only need ``lambda_k``.
    """

    grid: RadialGrid
    labels: list
    coeffs: np.ndarray
    params: Params
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.labels = [tuple(int(v) for v in lab) for lab in self.labels]
        self.coeffs = np.atleast_2d(np.asarray(self.coeffs, dtype=float))
        if self.coeffs.shape != (len(self.labels), self.grid.M):
            raise ConfigError(
                f"coeffs shape {self.coeffs.shape} does not match {len(self.labels)} modes x {self.grid.M} nodes"
            )

    # constructors ----------------------------------------------------------

    @classmethod
    def zeros(cls, grid: RadialGrid, params: Params, K: int = 0) -> "ModeField":
        labels = sh_labels(K) if params.N == 3 else [(0, 0)]
        return cls(grid, labels, np.zeros((len(labels), grid.M)), params)

    @classmethod
    def from_radial(cls, grid: RadialGrid, values, params: Params) -> "ModeField":
        """Radial function given by pointwise values (array or callable of r)."""
        v = values(grid.r) if callable(values) else np.asarray(values, dtype=float)
        return cls(grid, [(0, 0)], math.sqrt(sphere_area(params.N)) * v[None, :], params)

    @property
    def N(self) -> int:
        return self.params.N

    @property
    def K_max(self) -> int:
        return max(k for k, _ in self.labels)

    @property
    def is_radial(self) -> bool:
        return all(k == 0 for k, _ in self.labels)

    def mode(self, k: int, m: int = 0) -> np.ndarray:
        try:
            return self.coeffs[self.labels.index((k, m))]
        except ValueError:
            return np.zeros(self.grid.M)

    def radial_values(self) -> np.ndarray:
        """Pointwise values of the ``k = 0`` part."""
        return self.mode(0, 0) / math.sqrt(sphere_area(self.N))

    def copy(self) -> "ModeField":
        return ModeField(self.grid, list(self.labels), self.coeffs.copy(), self.params, dict(self.meta))

    def with_coeffs(self, coeffs: np.ndarray) -> "ModeField":
        return ModeField(self.grid, list(self.labels), coeffs, self.params)

    def with_labels(self, labels: list) -> "ModeField":
        """Same field expressed on ``labels`` (missing modes are zero; dropped modes must vanish)."""
        out = np.zeros((len(labels), self.grid.M))
        index = {lab: i for i, lab in enumerate(labels)}
        for lab, row in zip(self.labels, self.coeffs):
            if lab in index:
                out[index[lab]] = row
            elif np.any(row != 0):
                raise BandLimitError(f"mode {lab} is nonzero and not representable")
        return ModeField(self.grid, list(labels), out, self.params)

    def _aligned(self, other: "ModeField"):
        if other.grid is not self.grid and not (
            other.grid.M == self.grid.M and np.allclose(other.grid.r, self.grid.r, rtol=1e-13)
        ):
            raise ConfigError("fields live on different grids")
        if other.labels == self.labels:
            return self, other
        labels = sorted(set(self.labels) | set(other.labels), key=lambda km: sh_index(*km))
        return self.with_labels(labels), other.with_labels(labels)

    def __add__(self, other: "ModeField") -> "ModeField":
        a, b = self._aligned(other)
        return a.with_coeffs(a.coeffs + b.coeffs)

    def __sub__(self, other: "ModeField") -> "ModeField":
        a, b = self._aligned(other)
        return a.with_coeffs(a.coeffs - b.coeffs)

    def __mul__(self, c: float) -> "ModeField":
        return self.with_coeffs(self.coeffs * float(c))

    __rmul__ = __mul__

    def __neg__(self) -> "ModeField":
        return self * -1.0

    def multiply_radial(self, w: np.ndarray) -> "ModeField":
        """Pointwise product with a radial function given on the nodes."""
        return self.with_coeffs(self.coeffs * np.asarray(w)[None, :])

    # pointwise evaluation ----------------------------------------------------

    def _basis(self, aset: AngularSet | None):
        if self.is_radial:
            c = 1.0 / math.sqrt(sphere_area(self.N))
            Y = np.full((len(self.labels), 1), c)
            return Y, np.zeros_like(Y), np.zeros_like(Y)
        if self.N != 3:
            raise ConfigError("pointwise evaluation of non-radial fields needs N = 3")
        aset = aset or angular_set_for(self.K_max)
        Y, Yt, Yp = aset.basis(self.K_max)
        rows = [sh_index(k, m) for k, m in self.labels]
        return Y[rows], Yt[rows], Yp[rows]

    def values(self, aset: AngularSet | None = None) -> np.ndarray:
        """Field values, shape ``(M, n_dirs)`` (one column for radial fields)."""
        Y, _, _ = self._basis(aset)
        return self.coeffs.T @ Y

    def gradient(self, aset: AngularSet | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(d_r, theta-hat, phi-hat)`` components, each ``(M, n_dirs)``."""
        Y, Yt, Yp = self._basis(aset)
        da = self.grid.dr(self.coeffs)
        a_over_r = self.coeffs / self.grid.r
        return da.T @ Y, a_over_r.T @ Yt, a_over_r.T @ Yp

    def gradient_cartesian(self, aset: AngularSet | None = None) -> np.ndarray:
        """Cartesian gradient, shape ``(M, n_dirs, 3)`` (N = 3 only)."""
        if self.N != 3:
            raise ConfigError("Cartesian gradients are provided for N = 3")
        aset = aset or angular_set_for(self.K_max)
        gr, gt, gp = self.gradient(aset)
        th, ph = aset.theta, aset.phi
        if gr.shape[1] == 1:
            gr, gt, gp = (np.repeat(g, aset.n, axis=1) for g in (gr, gt, gp))
        rhat = aset.directions
        that = np.stack([np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph), -np.sin(th)], axis=1)
        phat = np.stack([-np.sin(ph), np.cos(ph), np.zeros_like(ph)], axis=1)
        return gr[..., None] * rhat + gt[..., None] * that + gp[..., None] * phat

    # serialization -----------------------------------------------------------

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "m", "r", "a"])
            for (k, m), row in zip(self.labels, self.coeffs):
                for r, a in zip(self.grid.r, row):
                    w.writerow([k, m, f"{r:.17g}", f"{a:.17g}"])

    @classmethod
    def from_csv(cls, path, params: Params, fd_order: int = DEFAULT_FD_ORDER) -> "ModeField":
        rows: dict = {}
        radii: list = []
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                lab = (int(rec["k"]), int(rec["m"]))
                if lab not in rows:
                    rows[lab] = []
                rows[lab].append(float(rec["a"]))
                if len(rows) == 1:
                    radii.append(float(rec["r"]))
        grid = make_log_grid(radii[0], radii[-1], len(radii), fd_order)
        labels = list(rows)
        return cls(grid, labels, np.array([rows[lab] for lab in labels]), params)


def mode_gradient_sq(fld: ModeField, i: int, aset: AngularSet | None = None) -> np.ndarray:
    """``|grad phi|^2`` at node ``i`` over the angular directions."""
    gr, gt, gp = fld.gradient(aset)
    return gr[i] ** 2 + gt[i] ** 2 + gp[i] ** 2


def gradient_norm(fld: ModeField, aset: AngularSet | None = None) -> np.ndarray:
    gr, gt, gp = fld.gradient(aset)
    return np.sqrt(gr**2 + gt**2 + gp**2)


# ---------------------------------------------------------------------------
# decomposition / synthesis on S^2


def decompose_N3(samples, grid: RadialGrid, params: Params, K_max: int, aset: AngularSet | None = None) -> ModeField:
    """Project pointwise samples onto real harmonics of degree ``<= K_max``.

    ``samples`` is an array ``(M, n_dirs)`` or a callable ``f(r, dirs)``
    returning one; ``dirs`` is ``(n_dirs, 3)``.
    """
    if params.N != 3:
        raise ConfigError("decompose_N3 requires N = 3")
    aset = aset or angular_set_for(K_max)
    if 2 * K_max > aset.exact_degree:
        raise BandLimitError(
            f"degree {K_max} exceeds what the angular set resolves (exact to {aset.exact_degree})"
        )
    if callable(samples):
        vals = np.asarray(samples(grid.r[:, None], aset.directions[None, :, :]), dtype=float)
    else:
        vals = np.asarray(samples, dtype=float)
    vals = np.broadcast_to(vals, (grid.M, aset.n))
    Y, _, _ = aset.basis(K_max)
    coeffs = (Y * aset.weights) @ vals.T
    return ModeField(grid, sh_labels(K_max), coeffs, params)


def synthesize_N3(fld: ModeField, theta: float, phi: float = 0.0) -> np.ndarray:
    """Radial profile of the field along the direction ``(theta, phi)``."""
    if fld.N != 3:
        raise ConfigError("synthesize_N3 requires N = 3")
    vals = np.empty(len(fld.labels))
    for i, (k, m) in enumerate(fld.labels):
        vals[i] = _real_from_complex(np.asarray(sph_harm_y(k, abs(m), theta, phi)), m)
    return vals @ fld.coeffs


# ---------------------------------------------------------------------------
# weighted norms


@dataclass
class WeightedNormReport:
    """Measured weighted sup norms and where they are attained."""

    norm_X: float
    norm_Y: float
    zero_order: float
    gradient: float
    argmax_r_X: float
    argmax_r_Y: float
    gradient_only: bool = False

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _range_mask(grid: RadialGrid, r_range) -> np.ndarray:
    if r_range is None:
        return np.ones(grid.M, dtype=bool)
    lo, hi = r_range
    return (grid.r >= lo * (1 - 1e-12)) & (grid.r <= hi * (1 + 1e-12))


def norms(fld: ModeField, params: Params | None = None, aset: AngularSet | None = None, r_range=None) -> WeightedNormReport:
    """``||.||_X`` (field reading) and ``||.||_Y`` (right-hand-side reading) of ``fld``.

    The exterior X-norm keeps only the gradient term.
    """
    params = params or fld.params
    r = fld.grid.r
    mask = _range_mask(fld.grid, r_range)
    sig = params.sigma
    vals = np.abs(fld.values(aset))
    grad = gradient_norm(fld, aset)
    zero = r[:, None] ** sig * vals
    gterm = r[:, None] ** (sig + 1.0) * grad
    exterior = params.regime is Regime.EXTERIOR
    xpt = gterm if exterior else zero + gterm
    ypt = r[:, None] ** (sig + 2.0) * vals
    xpt, ypt, zero, gterm = (np.where(mask[:, None], a, 0.0) for a in (xpt, ypt, zero, gterm))
    ix = np.unravel_index(np.argmax(xpt), xpt.shape)[0]
    iy = np.unravel_index(np.argmax(ypt), ypt.shape)[0]
    return WeightedNormReport(
        norm_X=float(xpt.max()),
        norm_Y=float(ypt.max()),
        zero_order=float(zero.max()),
        gradient=float(gterm.max()),
        argmax_r_X=float(r[ix]),
        argmax_r_Y=float(r[iy]),
        gradient_only=exterior,
    )


def norm_X(fld: ModeField, aset: AngularSet | None = None, r_range=None) -> float:
    return norms(fld, aset=aset, r_range=r_range).norm_X


def norm_Y(fld: ModeField, aset: AngularSet | None = None, r_range=None) -> float:
    """Y-norm without computing gradients."""
    r = fld.grid.r
    mask = _range_mask(fld.grid, r_range)
    ypt = r[:, None] ** (fld.params.sigma + 2.0) * np.abs(fld.values(aset))
    return float(np.where(mask[:, None], ypt, 0.0).max())
