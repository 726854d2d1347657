"""Randomized falsification of the elementary gradient-power inequalities.

For ``1 < p <= 2`` and all ``x, y, z``:

* I1: ``0 <= |x+y|^p - |x|^p - p|x|^(p-2) x.y <= C |y|^p``
* I2: ``| F(x,y) - F(x,z) | <= C (|y|^(p-1) + |z|^(p-1)) |y-z|`` with ``F`` the bracket in I1
* I3: ``| |x+y|^p - |x+z|^p | <= C (|y|^(p-1) + |z|^(p-1) + |x|^(p-1)) |y-z|``

and for ``p > 2`` the variant ``|F(x,y)| <= C |y|^p + C |x|^(p-2) |y|^2``.

All sides are homogeneous of degree ``p``, so the best constant is a sup over
shapes; magnitudes are drawn log-uniformly to hit every relative scale.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import profiles
from .brackets import gradient_bracket
from .errors import ConfigError, HypothesisError, RegimeError
from .params import Params, Regime

MAG_RANGE = (1e-6, 1e6)
MAX_DIM = 8
SHARD_SIZE = 1 << 17
# a ratio this large means the bound has no finite constant on the sample
RATIO_CAP = 1e3


class Inequality(str, enum.Enum):
    I1 = "I1"
    I2 = "I2"
    I3 = "I3"
    I3_PGT2 = "I3_pgt2"


@dataclass
class OracleReport:
    ineq: str
    p: float
    dim: int
    n_samples: int
    seed: int
    violations: int
    lower_violations: int
    degenerate: int
    C_est: float
    worst_sample: dict

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["ok"] = self.ok
        return d


def _check_hypothesis(ineq: Inequality, p: float):
    if ineq is Inequality.I3_PGT2:
        if not p > 2:
            raise HypothesisError(f"{ineq.value} needs p > 2, got {p}")
    elif not 1 < p <= 2:
        raise HypothesisError(f"{ineq.value} needs 1 < p <= 2, got {p}")


def sample_vectors(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    """Gaussian directions with log-uniform magnitudes in ``MAG_RANGE``."""
    d = rng.standard_normal((n, dim))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    lo, hi = np.log(MAG_RANGE)
    return d * np.exp(rng.uniform(lo, hi, n))[:, None]


def power_difference(x: np.ndarray, y: np.ndarray, z: np.ndarray, p: float) -> np.ndarray:
    """``|x+y|^p - |x+z|^p`` without cancellation when ``y`` is close to ``z``.

    ``|x+y| - |x+z|`` is formed from ``y - z`` directly, so tiny offsets on a
    huge ``x`` are not rounded away.
    """
    A = np.linalg.norm(x + y, axis=-1)
    B = np.linalg.norm(x + z, axis=-1)
    diff = np.sum((y - z) * (2.0 * x + y + z), axis=-1) / np.where(A + B > 0, A + B, 1.0)
    out = np.empty_like(A)
    pos = B > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        # A/B = 1 + diff/B >= 0; clamp roundoff below -1
        rel = np.maximum(diff[pos] / B[pos], -1.0)
        out[pos] = B[pos] ** p * np.expm1(p * np.log1p(rel))
    out[~pos] = A[~pos] ** p
    return out


def _shard(ineq: Inequality, p: float, dim: int, n: int, rng: np.random.Generator):
    x = sample_vectors(rng, n, dim)
    y = sample_vectors(rng, n, dim)
    ny = np.linalg.norm(y, axis=1)
    if ineq in (Inequality.I1, Inequality.I3_PGT2):
        lhs = gradient_bracket(x, y, p)
        nx = np.linalg.norm(x, axis=1)
        if ineq is Inequality.I1:
            bound = ny**p
        else:
            bound = ny**p + nx ** (p - 2.0) * ny**2
        lower = lhs < -1e-12 * (ny**p + nx ** (p - 2.0) * ny**2)
        lhs = np.abs(lhs) if ineq is Inequality.I3_PGT2 else lhs
        z = None
    else:
        z = sample_vectors(rng, n, dim)
        # a third of the pairs nearly coincide: y ~ z is where the bounds are tight
        near = rng.random(n) < 1.0 / 3.0
        rel = np.exp(rng.uniform(np.log(1e-6), 0.0, n))[:, None]
        pert = sample_vectors(rng, n, dim)
        pert *= (rel * ny[:, None]) / np.linalg.norm(pert, axis=1, keepdims=True)
        z = np.where(near[:, None], y + pert, z)
        nz = np.linalg.norm(z, axis=1)
        dyz = np.linalg.norm(y - z, axis=1)
        if ineq is Inequality.I2:
            lhs = np.abs(gradient_bracket(x, y, p) - gradient_bracket(x, z, p))
            bound = (ny ** (p - 1.0) + nz ** (p - 1.0)) * dyz
        else:
            lhs = np.abs(power_difference(x, y, z, p))
            nx = np.linalg.norm(x, axis=1)
            bound = (ny ** (p - 1.0) + nz ** (p - 1.0) + nx ** (p - 1.0)) * dyz
        lower = np.zeros(n, dtype=bool)
    return x, y, z, lhs, bound, lower


def check_ineq(ineq, p: float, dim: int, n_samples: int, seed: int = 0) -> OracleReport:
    """Sample ``n_samples`` triples and report violations and the largest ratio LHS/bound."""
    ineq = Inequality(ineq)
    p = float(p)
    _check_hypothesis(ineq, p)
    if not 1 <= int(dim) <= MAX_DIM:
        raise ConfigError(f"dim must lie in 1..{MAX_DIM}")
    if n_samples < 1:
        raise ConfigError("n_samples must be positive")
    n_shards = -(-n_samples // SHARD_SIZE)
    children = np.random.SeedSequence(seed).spawn(n_shards)
    best, worst = 0.0, {}
    violations = lower_total = degenerate = 0
    left = n_samples
    for child in children:
        n = min(SHARD_SIZE, left)
        left -= n
        x, y, z, lhs, bound, lower = _shard(ineq, p, int(dim), n, np.random.default_rng(child))
        zero = bound == 0
        degenerate += int(np.count_nonzero(zero))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(zero, 0.0, lhs / np.where(zero, 1.0, bound))
        bad = ~np.isfinite(ratio) | (ratio > RATIO_CAP) | lower | (zero & (np.abs(lhs) > 0))
        violations += int(np.count_nonzero(bad))
        lower_total += int(np.count_nonzero(lower))
        i = int(np.nanargmax(np.where(np.isfinite(ratio), ratio, -np.inf)))
        if ratio[i] > best:
            best = float(ratio[i])
            worst = {
                "ratio": best,
                "norm_x": float(np.linalg.norm(x[i])),
                "norm_y": float(np.linalg.norm(y[i])),
                "norm_z": float(np.linalg.norm(z[i])) if z is not None else None,
            }
    return OracleReport(ineq.value, p, int(dim), int(n_samples), int(seed), violations, lower_total, degenerate, best, worst)


# ---------------------------------------------------------------------------
# constants of the ball fixed-point lemmas


def _random_gradients(rng, r: np.ndarray, R: float, sigma: float, n_fields: int) -> np.ndarray:
    """Radial gradient profiles with ``sup r^(sigma+1)|phi_r| = R``."""
    s = (np.log(r) - np.log(r[0])) / (np.log(r[-1]) - np.log(r[0]))
    out = np.empty((n_fields, r.size))
    for j in range(n_fields):
        c = rng.standard_normal(8)
        shape = sum(ci * np.cos(math.pi * (k + 1) * s + rng.uniform(0, 2 * math.pi)) for k, ci in enumerate(c))
        shape /= np.abs(shape).max()
        out[j] = R * shape * r ** (-sigma - 1.0)
    return out


def estimate_lemma_constants(params: Params, t: float, delta: float, R: float, n_fields: int = 32, g_amplitude: float = 0.5, g_exponent: float = 1.0, seed: int = 0, r_min: float = 1e-8, M: int = 2001) -> dict:
    """Measured stand-ins for the constants in the Into and Contraction lemmas on ``B_1``.

    The perturbation is ``g = g_amplitude r^g_exponent``; fields are sampled
    directly as gradient profiles in ``B_R``.
    """
    if params.regime is not Regime.BALL:
        raise RegimeError("lemma constants are for the ball regime")
    N, p, sig, alpha = params.N, params.p, params.sigma, params.alpha
    expo = (N - 1) * p - sig - 2.0
    if not expo > 0:
        raise HypothesisError(f"(N-1)p - sigma - 2 = {expo} must be positive")
    if not (0 < delta < 1 and 0 <= R < 1 and t > 1):
        raise ConfigError("need 0 < delta < 1, 0 <= R < 1 and t > 1")
    rng = np.random.default_rng(seed)
    r = np.geomspace(r_min, 1.0, M)
    du = profiles.du_ball(params, t, r)
    g = g_amplitude * r**g_exponent
    w = r ** (sig + 2.0)
    grads = _random_gradients(rng, r, R, sig, n_fields) if R > 0 else np.zeros((1, r.size))
    g_sup = float(g[r < delta].max()) if np.any(r < delta) else 0.0
    tail = 1.0 / (t ** (p / (p - 1.0)) * delta**expo)
    into_terms = {"R^p": R**p, "sup_g": g_sup, "tail": tail}
    into_lhs = float(max(np.max(w * g * np.abs(du + gr) ** p) for gr in grads))
    bracket_lhs = float(max(np.max(w * np.abs(gradient_bracket(du[:, None], gr[:, None], p))) for gr in grads))
    contr_terms = {"R^(p-1)": R ** (p - 1.0), "sup_g": g_sup, "tail": 1.0 / (t * delta ** (alpha - 1.0))}
    c_I, c_J = 0.0, 0.0
    for a, b in zip(grads[::2], grads[1::2]):
        d = np.max(r ** (sig + 1.0) * np.abs(a - b))
        if d == 0:
            continue
        I = gradient_bracket(du[:, None], a[:, None], p) - gradient_bracket(du[:, None], b[:, None], p)
        J = g * (np.abs(du + a) ** p - np.abs(du + b) ** p)
        c_I = max(c_I, float(np.max(w * np.abs(I)) / d))
        c_J = max(c_J, float(np.max(w * np.abs(J)) / d))
    s_into = sum(into_terms.values())
    s_contr = sum(contr_terms.values())
    return {
        "t": t,
        "delta": delta,
        "R": R,
        "exponent": expo,
        "into_terms": into_terms,
        "into_lhs": into_lhs,
        "C_into": into_lhs / s_into if s_into > 0 else 0.0,
        "bracket_lhs": bracket_lhs,
        "C_bracket": bracket_lhs / R**p if R > 0 else 0.0,
        "contraction_terms": contr_terms,
        "C_contraction_I": c_I / R ** (p - 1.0) if R > 0 else 0.0,
        "C_contraction_J": c_J / s_contr if s_contr > 0 else 0.0,
    }
