"""Seeded simulation of Gaussian VAR processes.

Reproducibility contract
------------------------
Innovations come from ``numpy.random.Generator(Philox(SeedSequence(seed)))``
(the Philox-4x64 counter-based generator seeded through ``SeedSequence``);
standard normals are drawn with the generator's ziggurat sampler as one
``(burnin + T, n)`` C-ordered block and coloured as ``eps_t = L w_t`` with ``L``
the lower Cholesky factor of ``sigma``. The recursion starts from a zero state
and the first ``burnin`` samples are discarded. Identical
``(model, T, seed, burnin)`` give bit-identical output on a given platform.
Independent streams for replication ``i`` of a study use ``seed + i``
(distinct ``SeedSequence`` entropy).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .errors import CovarianceError, DimensionError, StabilityError
from .var_model import VARModel, check_stability

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap(args[0]) if args and callable(args[0]) else wrap


BURNIN_MIN = 100
BURNIN_MAX = 100_000
TRANSIENT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """``T x n`` observation record (row = time step, column = variable)."""

    data: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        data = np.array(self.data, dtype=float, copy=True)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise DimensionError(f"time series must be a non-empty T x n array, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("time series contains non-finite values")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def T(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]


def model_hash(model: VARModel) -> str:
    """Short content hash of a model's parameters (for provenance records)."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(model.coeffs, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(model.sigma, dtype="<f8").tobytes())
    return h.hexdigest()[:16]


def default_burnin(model: VARModel) -> int:
    """Burn-in long enough for the zero-state transient to decay below 1e-9."""
    rho = check_stability(model)
    return burnin_for_radius(rho)


def burnin_for_radius(rho: float) -> int:
    if not rho < 1.0:
        raise StabilityError(f"spectral radius {rho:.6g} >= 1; no stationary burn-in exists")
    if rho <= 0.0:
        return BURNIN_MIN
    raw = math.ceil(math.log(TRANSIENT_TOL) / math.log(rho))
    return int(min(max(raw, BURNIN_MIN), BURNIN_MAX))


@njit(cache=True)
def _var_recursion(coeffs, eps):  # pragma: no cover - compiled
    p, n, _ = coeffs.shape
    total = eps.shape[0]
    u = np.zeros((total, n))
    for t in range(total):
        for i in range(n):
            acc = 0.0
            for k in range(p):
                s = t - k - 1
                if s < 0:
                    break
                for j in range(n):
                    acc += coeffs[k, i, j] * u[s, j]
            u[t, i] = acc + eps[t, i]
    return u


def simulate(model: VARModel, T: int, seed: int, burnin: Optional[int] = None) -> TimeSeries:
    """Draw ``T`` post-burn-in samples of the VAR process.

    Parameters
    ----------
    model : VARModel
        Stable model to simulate.
    T : int
        Number of retained samples.
    seed : int
        Unsigned 64-bit seed.
    burnin : int, optional
        Discarded leading samples; defaults to :func:`default_burnin`.
    """
    if int(T) < 1:
        raise ValueError("T must be >= 1")
    if not 0 <= int(seed) < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    rho = check_stability(model)
    if not rho < 1.0:
        raise StabilityError(f"cannot simulate unstable model (spectral radius {rho:.6g})")
    if burnin is None:
        burnin = burnin_for_radius(rho)
    if burnin < 0:
        raise ValueError("burnin must be non-negative")
    try:
        L = np.linalg.cholesky(model.sigma)
    except np.linalg.LinAlgError:
        raise CovarianceError("innovations covariance is not positive-definite") from None

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    w = rng.standard_normal((burnin + T, model.n))
    eps = w @ L.T
    u = _var_recursion(np.ascontiguousarray(model.coeffs), np.ascontiguousarray(eps))
    meta = {"model_hash": model_hash(model), "seed": int(seed), "burnin": int(burnin)}
    return TimeSeries(u[burnin:], meta)
