"""VAR model representation and its analytic transforms.

Coefficient stacks are stored as arrays of shape ``(p, n, n)`` where
``coeffs[k - 1]`` is the lag-``k`` matrix ``A_k`` in

    u_t = sum_k A_k u_{t-k} + eps_t,    cov(eps_t) = sigma.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from .errors import CovarianceError, DimensionError, NumericalError, StabilityError

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-12
NEAR_UNIT_MARGIN = 1e-6
LYAPUNOV_TOL = 1e-14
DECAY_TOL = 1e-12
MAX_AUTOCOV_LAGS = 4096


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class VARModel:
    """Vector autoregression ``A_1..A_p`` with innovations covariance ``sigma``.

    Construction checks shapes and that ``sigma`` is symmetric
    positive-definite. Stability is *not* enforced here (an unstable model is
    a legal object; operations that need stationarity check it themselves).
    """

    coeffs: np.ndarray
    sigma: np.ndarray

    def __post_init__(self) -> None:
        coeffs = np.asarray(self.coeffs, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        if coeffs.ndim == 2:
            coeffs = coeffs[None]
        if coeffs.ndim != 3 or coeffs.shape[0] < 1 or coeffs.shape[1] != coeffs.shape[2]:
            raise DimensionError(
                f"coeffs must have shape (p, n, n) with p >= 1, got {coeffs.shape}"
            )
        n = coeffs.shape[1]
        if n < 1:
            raise DimensionError("model must have at least one variable")
        if sigma.shape != (n, n):
            raise DimensionError(f"sigma must be {n}x{n}, got {sigma.shape}")
        if not (np.all(np.isfinite(coeffs)) and np.all(np.isfinite(sigma))):
            raise DimensionError("model parameters must be finite")
        scale = max(1.0, float(np.max(np.abs(sigma))))
        if np.max(np.abs(sigma - sigma.T)) > SYMMETRY_TOL * scale:
            raise CovarianceError("sigma is not symmetric")
        try:
            np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError:
            raise CovarianceError("sigma is not positive-definite") from None
        object.__setattr__(self, "coeffs", _frozen(coeffs))
        object.__setattr__(self, "sigma", _frozen(sigma))

    @property
    def n(self) -> int:
        return self.coeffs.shape[1]

    @property
    def p(self) -> int:
        return self.coeffs.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VARModel):
            return NotImplemented
        return (
            self.coeffs.shape == other.coeffs.shape
            and np.array_equal(self.coeffs, other.coeffs)
            and np.array_equal(self.sigma, other.sigma)
        )

    __hash__ = None  # type: ignore[assignment]

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready dict ``{"n", "p", "A", "Sigma"}``; ``A`` is ``[lag-1][row][col]``."""
        return {
            "n": self.n,
            "p": self.p,
            "A": self.coeffs.tolist(),
            "Sigma": self.sigma.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "VARModel":
        try:
            n, p = int(d["n"]), int(d["p"])
            coeffs = np.array(d["A"], dtype=float)
            sigma = np.array(d["Sigma"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise DimensionError(f"malformed model description: {exc}") from None
        if coeffs.shape != (p, n, n):
            raise DimensionError(f"'A' has shape {coeffs.shape}, expected {(p, n, n)}")
        return cls(coeffs, sigma)

    def permuted(self, order) -> "VARModel":
        """Model for the reordered process ``u[order]``."""
        order = np.asarray(order)
        return VARModel(
            self.coeffs[:, order][:, :, order], self.sigma[np.ix_(order, order)]
        )

    def scaled(self, factors) -> "VARModel":
        """Model for the rescaled process ``D u`` with ``D = diag(factors)``."""
        d = np.asarray(factors, dtype=float)
        ratio = d[:, None] / d[None, :]
        return VARModel(self.coeffs * ratio, self.sigma * np.outer(d, d))


@dataclass(frozen=True, eq=False)
class MACoefficients:
    """Moving-average coefficients ``B_0..B_K`` (``B_0`` is the identity)."""

    mats: np.ndarray

    @property
    def order(self) -> int:
        return self.mats.shape[0] - 1

    def __getitem__(self, k: int) -> np.ndarray:
        return self.mats[k]


@dataclass(frozen=True, eq=False)
class AutocovSequence:
    """One-sided autocovariance sequence ``Gamma_0..Gamma_q``.

    ``gammas[k]`` is ``E[u_t u_{t-k}^T]``; use :meth:`lag` for negative lags.
    """

    gammas: np.ndarray

    @property
    def q(self) -> int:
        return self.gammas.shape[0] - 1

    @property
    def n(self) -> int:
        return self.gammas.shape[1]

    def lag(self, k: int) -> np.ndarray:
        if k < 0:
            return self.gammas[-k].T
        return self.gammas[k]

    def subset(self, idx) -> "AutocovSequence":
        idx = np.asarray(idx)
        return AutocovSequence(self.gammas[:, idx][:, :, idx])


@dataclass(frozen=True, eq=False)
class MultiStepAR:
    """Coefficients of the h-lagged AR form, lags ``h..K``.

    ``coeffs[j]`` holds the lag ``h + j`` matrix; lags below ``h`` are
    structurally zero and not stored.
    """

    horizon: int
    coeffs: np.ndarray

    @property
    def max_lag(self) -> int:
        return self.horizon + self.coeffs.shape[0] - 1

    def lag(self, k: int) -> np.ndarray:
        if k < 1 or k > self.max_lag:
            raise IndexError(f"lag {k} outside 1..{self.max_lag}")
        if k < self.horizon:
            return np.zeros(self.coeffs.shape[1:])
        return self.coeffs[k - self.horizon]

    def as_lag_array(self) -> np.ndarray:
        """All lags ``1..K`` as a ``(K, n, n)`` array, zeros below the horizon."""
        n = self.coeffs.shape[1]
        out = np.zeros((self.max_lag, n, n))
        out[self.horizon - 1:] = self.coeffs
        return out


def companion_matrix(coeffs: np.ndarray) -> np.ndarray:
    p, n, _ = coeffs.shape
    top = np.concatenate(list(coeffs), axis=1)
    if p == 1:
        return top.copy()
    bottom = np.eye((p - 1) * n, p * n)
    return np.vstack([top, bottom])


def check_stability(model: VARModel) -> float:
    """Spectral radius of the companion matrix; the model is stable iff it is < 1."""
    coeffs = np.asarray(model.coeffs)
    if coeffs.ndim != 3 or coeffs.shape[1] != coeffs.shape[2]:
        raise DimensionError(f"inconsistent coefficient shape {coeffs.shape}")
    return float(np.max(np.abs(np.linalg.eigvals(companion_matrix(coeffs)))))


def require_stable(model: VARModel) -> float:
    """Return the spectral radius, raising :class:`StabilityError` if >= 1."""
    rho = check_stability(model)
    if not rho < 1.0:
        raise StabilityError(f"VAR model is unstable (spectral radius {rho:.6g} >= 1)")
    if rho >= 1.0 - NEAR_UNIT_MARGIN:
        warnings.warn(
            f"VAR model is near the unit circle (spectral radius {rho:.10f}); "
            "autocovariance decay will be very slow",
            RuntimeWarning,
            stacklevel=2,
        )
    return rho


def _ma_recursion(coeffs: np.ndarray, K: int) -> np.ndarray:
    p, n, _ = coeffs.shape
    B = np.zeros((K + 1, n, n))
    B[0] = np.eye(n)
    for k in range(1, K + 1):
        lo = max(0, k - p)
        # B_k = sum_{l=lo}^{k-1} B_l A_{k-l}
        B[k] = np.matmul(B[lo:k], coeffs[k - lo - 1::-1][: k - lo]).sum(axis=0)
    return B


def ma_coefficients(model: VARModel, K: int) -> MACoefficients:
    """MA coefficients ``B_0..B_K`` via ``B_k = A_k + sum_{l=1}^{k-1} B_l A_{k-l}``."""
    if K < 0:
        raise ValueError("K must be non-negative")
    require_stable(model)
    return MACoefficients(_frozen(_ma_recursion(model.coeffs, K)))


def multistep_ar(model: VARModel, h: int, K: int) -> MultiStepAR:
    """Coefficients ``A^(h)_h..A^(h)_K`` of the h-step predictor.

    Uses the recursion ``A^(g+1)_{g+k} = A^(g)_{g+k} + A^(g)_g A_k`` starting
    from ``A^(1)_k = A_k``.
    """
    if h < 1:
        raise ValueError("horizon h must be >= 1")
    if K < h:
        raise ValueError(f"K ({K}) must be >= h ({h})")
    require_stable(model)
    p, n, _ = model.coeffs.shape
    A = np.zeros((K + 1, n, n))  # 1-based lag index
    m = min(p, K)
    A[1:m + 1] = model.coeffs[:m]
    Ah = A.copy()
    for g in range(1, h):
        lead = Ah[g].copy()
        Ah[g + 1:] += lead @ A[1:K - g + 1]
        Ah[:g + 1] = 0.0
    return MultiStepAR(h, _frozen(Ah[h:]))


def _lyapunov_doubling(C: np.ndarray, Q: np.ndarray, tol: float = LYAPUNOV_TOL,
                       max_iter: int = 100) -> np.ndarray:
    """Solve ``P = C P C^T + Q`` by the doubling iteration."""
    P = Q.copy()
    M = C.copy()
    for _ in range(max_iter):
        dP = M @ P @ M.T
        P = P + dP
        if np.max(np.abs(dP)) <= tol * np.max(np.abs(P)):
            return 0.5 * (P + P.T)
        M = M @ M
    raise NumericalError("Lyapunov doubling iteration did not converge")


def _extend_autocov(coeffs: np.ndarray, G: list[np.ndarray], q: int) -> None:
    p = coeffs.shape[0]
    while len(G) <= q:
        k = len(G)
        G.append(sum(coeffs[l] @ G[k - 1 - l] for l in range(p)))


def autocovariance(model: VARModel, q: Optional[int] = None) -> AutocovSequence:
    """Autocovariance sequence ``Gamma_0..Gamma_q`` of the stationary process.

    The companion-form state covariance is found by Lyapunov doubling and the
    sequence is extended by the Yule-Walker recursion
    ``Gamma_k = sum_l A_l Gamma_{k-l}``. With ``q=None`` lags are added until
    ``max|Gamma_k| < 1e-12 max|Gamma_0|`` holds for ``p`` consecutive lags
    (capped at 4096).
    """
    if q is not None and q < 0:
        raise ValueError("q must be non-negative")
    require_stable(model)
    coeffs = np.asarray(model.coeffs)
    p, n, _ = coeffs.shape
    C = companion_matrix(coeffs)
    Q = np.zeros((p * n, p * n))
    Q[:n, :n] = model.sigma
    P = _lyapunov_doubling(C, Q)
    G = [P[:n, j * n:(j + 1) * n].copy() for j in range(p)]
    G[0] = 0.5 * (G[0] + G[0].T)
    if q is not None:
        _extend_autocov(coeffs, G, q)
        return AutocovSequence(_frozen(np.array(G[:q + 1])))

    g0 = np.max(np.abs(G[0]))
    run = 0
    k = 0
    while True:
        if k >= len(G):
            _extend_autocov(coeffs, G, k)
        if np.max(np.abs(G[k])) < DECAY_TOL * g0:
            run += 1
            if run >= p:
                break
        else:
            run = 0
        if k >= MAX_AUTOCOV_LAGS:
            warnings.warn(
                f"autocovariance truncated at {MAX_AUTOCOV_LAGS} lags before decaying "
                f"below {DECAY_TOL:g} relative",
                RuntimeWarning,
                stacklevel=2,
            )
            break
        k += 1
    logger.debug("autocovariance: selected q=%d", k)
    return AutocovSequence(_frozen(np.array(G[:k + 1])))


def decay_lags(model: VARModel) -> int:
    """Number of lags the automatic truncation rule of :func:`autocovariance` picks."""
    return autocovariance(model).q
