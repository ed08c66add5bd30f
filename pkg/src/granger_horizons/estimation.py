"""Full and reduced autoregressive fits.

Two routes produce the residual covariances that GC statistics compare:

* sample route: OLS on mean-centred data. All regressions for one series and
  order share a single lag design ``X = [u_{t-1} .. u_{t-p}]`` (rows
  ``t = p..T-1``), so reduced fits are column subsets of one Gram matrix.
* analytic route: Yule-Walker solves on the model autocovariance sequence,
  with regressor rows/columns deleted for the reduced predictor sets.

Residual covariances are normalised by ``N = T - p`` (maximum likelihood).
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np
from scipy import linalg

from .errors import ConditioningError, DimensionError, SingularityError
from .simulation import TimeSeries
from .var_model import AutocovSequence, VARModel, autocovariance

logger = logging.getLogger(__name__)

RANK_TOL = 1e-10
RIDGE_FACTOR = 1e-10


@dataclass(frozen=True, eq=False)
class FitResult:
    """Fitted (full or reduced) autoregression.

    Attributes
    ----------
    coeffs : ndarray, shape (p, len(targets), n_vars)
        Lag coefficients. Regressor slots removed by a reduced spec are zero.
    sigma : ndarray
        Residual covariance of the target equations.
    N : int or None
        Regression rows used (``None`` for Yule-Walker reductions).
    logdet : float
        ``log det sigma``; ``-inf`` for a degenerate (noiseless) fit.
    targets : tuple of int
        Original variable indices of the rows of ``sigma``.
    """

    coeffs: np.ndarray
    sigma: np.ndarray
    N: Optional[int]
    logdet: float
    targets: tuple[int, ...]

    @property
    def model(self) -> VARModel:
        if self.coeffs.shape[1] != self.coeffs.shape[2]:
            raise DimensionError("fit does not describe a square VAR system")
        return VARModel(self.coeffs, self.sigma)

    def block(self, idx: Sequence[int]) -> np.ndarray:
        """Residual covariance restricted to the original variable indices ``idx``."""
        pos = [self.targets.index(i) for i in idx]
        return self.sigma[np.ix_(pos, pos)]

    def to_dict(self) -> dict:
        d = self.model.to_dict()
        d.update({"SigmaHat": self.sigma.tolist(), "N": self.N, "logdet": self.logdet})
        return d


@dataclass(frozen=True)
class ReducedSpec:
    """Which regressors a reduced model drops.

    ``kind="omit-variables"`` drops every lag of ``omitted`` (and those
    variables as targets); ``kind="omit-single-lag"`` drops only the ``source``
    block at lag ``lag``.
    """

    kind: Literal["omit-variables", "omit-single-lag"]
    omitted: tuple[int, ...] = ()
    source: tuple[int, ...] = ()
    lag: Optional[int] = None

    @classmethod
    def omit_variables(cls, idx: Sequence[int]) -> "ReducedSpec":
        return cls("omit-variables", omitted=tuple(sorted(int(i) for i in idx)))

    @classmethod
    def omit_single_lag(cls, source: Sequence[int], lag: int) -> "ReducedSpec":
        return cls("omit-single-lag", source=tuple(sorted(int(i) for i in source)), lag=int(lag))

    def validate(self, n: int, p: int) -> None:
        if self.kind == "omit-variables":
            idx = self.omitted
            if not idx or len(idx) >= n:
                raise DimensionError("omit-variables needs a non-empty proper subset")
        elif self.kind == "omit-single-lag":
            idx = self.source
            if not idx:
                raise DimensionError("omit-single-lag needs a non-empty source block")
            if self.lag is None or not 1 <= self.lag <= p:
                raise DimensionError(f"lag must lie in 1..{p}, got {self.lag}")
        else:
            raise DimensionError(f"unknown reduced-model kind {self.kind!r}")
        if len(set(idx)) != len(idx) or min(idx) < 0 or max(idx) >= n:
            raise DimensionError(f"variable indices {idx} invalid for n={n}")


def centred(ts: TimeSeries) -> np.ndarray:
    return ts.data - ts.data.mean(axis=0)


class LagRegression:
    """Sufficient statistics of the regression of ``u_t`` on ``u_{t-1..t-p}``.

    Column ``(k - 1) * n + j`` of the design holds variable ``j`` at lag ``k``.
    ``start`` is the first target row; it defaults to ``p`` and may be set
    larger so that several orders share one estimation sample.
    """

    def __init__(self, data: np.ndarray, p: int, start: Optional[int] = None):
        T, n = data.shape
        start = p if start is None else start
        if p < 1:
            raise ValueError("model order p must be >= 1")
        if start < p or start >= T:
            raise ValueError(f"series of length {T} too short for order {p}")
        self.n, self.p, self.N = n, p, T - start
        Y = data[start:]
        X = np.empty((self.N, n * p))
        for k in range(1, p + 1):
            X[:, (k - 1) * n:k * n] = data[start - k:T - k]
        self.gram = X.T @ X
        self.cross = X.T @ Y
        self.yy = Y.T @ Y
        self.scale = np.sqrt(np.diag(self.gram))

    @classmethod
    def from_series(cls, ts: TimeSeries, p: int, start: Optional[int] = None) -> "LagRegression":
        if ts.T <= ts.n * p + p:
            raise ValueError(
                f"series too short: need T > n*p + p = {ts.n * p + p}, got T={ts.T}"
            )
        return cls(centred(ts), p, start)

    def columns(self, lags: Sequence[int], variables: Sequence[int]) -> np.ndarray:
        lags = np.asarray(lags, dtype=int)
        variables = np.asarray(variables, dtype=int)
        return ((lags[:, None] - 1) * self.n + variables[None, :]).ravel()

    def all_columns(self) -> np.ndarray:
        return np.arange(self.n * self.p)

    def solve(self, cols: np.ndarray, targets: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        """OLS coefficients (``len(cols) x len(targets)``) and residual covariance."""
        targets = list(targets)
        s = self.scale[cols]
        if np.any(s == 0):
            raise SingularityError("design has an all-zero regressor column")
        G = self.gram[np.ix_(cols, cols)] / np.outer(s, s)
        C = self.cross[np.ix_(cols, targets)] / s[:, None]
        try:
            L = np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            raise SingularityError(
                f"rank-deficient lag design (order {self.p}, {len(cols)} regressors)"
            ) from None
        if np.min(np.diag(L)) ** 2 < RANK_TOL:
            raise SingularityError(
                f"rank-deficient lag design (order {self.p}, {len(cols)} regressors)"
            )
        Bs = linalg.cho_solve((L, True), C)
        resid = self.yy[np.ix_(targets, targets)] - C.T @ Bs
        resid = 0.5 * (resid + resid.T) / self.N
        return Bs / s[:, None], resid

    def fit(self, cols: np.ndarray, targets: Sequence[int]) -> FitResult:
        B, resid = self.solve(cols, targets)
        coeffs = np.zeros((self.p, len(targets), self.n))
        lag_idx, var_idx = np.divmod(cols, self.n)
        coeffs[lag_idx, :, var_idx] = B
        return FitResult(coeffs, resid, self.N, _logdet_or_ninf(resid), tuple(int(t) for t in targets))


def _logdet_or_ninf(S: np.ndarray) -> float:
    sign, ld = np.linalg.slogdet(S)
    return float(ld) if sign > 0 else float("-inf")


def fit_var_ols(ts: TimeSeries, p: int) -> FitResult:
    """OLS VAR(p) fit on rows ``p..T-1`` of the centred series."""
    reg = LagRegression.from_series(ts, p)
    return reg.fit(reg.all_columns(), range(ts.n))


def fit_reduced_ols(ts: TimeSeries, p: int, spec: ReducedSpec) -> FitResult:
    """OLS fit of a reduced model.

    ``omit-variables``: the retained variables regressed on their own joint
    history. ``omit-single-lag``: all ``n`` variables regressed on the full
    history minus the source block at the given lag.
    """
    spec.validate(ts.n, p)
    reg = LagRegression.from_series(ts, p)
    return fit_reduced_from(reg, spec)


def fit_reduced_from(reg: LagRegression, spec: ReducedSpec) -> FitResult:
    n, p = reg.n, reg.p
    lags = np.arange(1, p + 1)
    if spec.kind == "omit-variables":
        keep = [i for i in range(n) if i not in spec.omitted]
        return reg.fit(reg.columns(lags, keep), keep)
    drop = set(reg.columns([spec.lag], spec.source).tolist())
    cols = np.array([c for c in reg.all_columns() if c not in drop])
    return reg.fit(cols, range(n))


def order_criteria(ts: TimeSeries, pmax: int,
                   criterion: Literal["aic", "bic"] = "bic") -> dict[int, float]:
    """Information criterion for orders ``1..pmax`` on the common sample ``t >= pmax``.

    Orders whose design is rank-deficient score ``+inf``.
    """
    criterion = criterion.lower()
    if criterion not in ("aic", "bic"):
        raise ValueError(f"unknown criterion {criterion!r}")
    if pmax < 1:
        raise ValueError("pmax must be >= 1")
    reg = LagRegression.from_series(ts, pmax)
    n, N = ts.n, reg.N
    penalty = 2.0 if criterion == "aic" else np.log(N)
    values: dict[int, float] = {}
    for p in range(1, pmax + 1):
        try:
            _, resid = reg.solve(reg.columns(np.arange(1, p + 1), range(n)), range(n))
        except SingularityError:
            values[p] = float("inf")
            continue
        values[p] = _logdet_or_ninf(resid) + penalty * p * n * n / N
    if all(np.isinf(v) and v > 0 for v in values.values()):
        raise SingularityError("every candidate order gives a rank-deficient design")
    return values


def select_order(ts: TimeSeries, pmax: int, criterion: Literal["aic", "bic"] = "bic") -> int:
    """Order in ``1..pmax`` minimising AIC or BIC (ties go to the smaller order)."""
    values = order_criteria(ts, pmax, criterion)
    best = min(values.values())
    return min(p for p, v in values.items() if v == best)


# --------------------------------------------------------------------------
# Yule-Walker reductions from a known model


def cholesky_guarded(M: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor; one ridge-regularised retry before giving up."""
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        pass
    ridge = RIDGE_FACTOR * np.trace(M) / M.shape[0]
    warnings.warn(
        f"{what} not numerically positive-definite; retrying with ridge {ridge:.3g}",
        RuntimeWarning,
        stacklevel=3,
    )
    try:
        return np.linalg.cholesky(M + ridge * np.eye(M.shape[0]))
    except np.linalg.LinAlgError:
        raise ConditioningError(
            f"{what} is not positive-definite even after ridge regularisation; "
            "try more autocovariance lags"
        ) from None


class YuleWalkerSystem:
    """``Gamma_0``, ``[Gamma_1 .. Gamma_q]`` and the block-Toeplitz ``Lambda_q``.

    ``Lambda_q`` block ``(i, j)`` is ``Gamma_{j-i}``; block ``i`` of the
    regressor vector is the lag ``i + 1`` sample.
    """

    def __init__(self, gammas: AutocovSequence, q: int):
        if q < 1 or q > gammas.q:
            raise ValueError(f"need 1 <= q <= {gammas.q}, got {q}")
        n = gammas.n
        self.n, self.q = n, q
        self.g0 = np.array(gammas.gammas[0])
        self.gq = np.concatenate([gammas.gammas[k] for k in range(1, q + 1)], axis=1)
        seq = np.concatenate([gammas.gammas[q - 1:0:-1].transpose(0, 2, 1), gammas.gammas[:q]])
        # seq[m] = Gamma_{m - (q - 1)}
        lam = np.empty((q * n, q * n))
        for i in range(q):
            row = seq[q - 1 - i:2 * q - 1 - i]
            lam[i * n:(i + 1) * n] = row.transpose(1, 0, 2).reshape(n, q * n)
        self.lam = lam

    def index(self, lag: int, variables: Sequence[int]) -> np.ndarray:
        return (lag - 1) * self.n + np.asarray(variables, dtype=int)

    def solve(self, keep: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
        """Coefficients ``Gamma' Lambda'^{-1}`` and residual covariance for kept regressors."""
        gq, lam = self.gq, self.lam
        if keep is not None:
            gq = gq[:, keep]
            lam = lam[np.ix_(keep, keep)]
        L = cholesky_guarded(lam, "Yule-Walker block-Toeplitz matrix")
        X = linalg.cho_solve((L, True), gq.T)
        sigma = self.g0 - gq @ X
        return X.T, 0.5 * (sigma + sigma.T)


def reduced_model_yw(model: VARModel, omit: Sequence[int], q: Optional[int] = None,
                     gammas: Optional[AutocovSequence] = None) -> FitResult:
    """Order-``q`` truncation of the reduced AR for the variables not in ``omit``.

    Returns a :class:`FitResult` with ``N=None`` whose ``targets`` are the
    retained variable indices in increasing order.
    """
    n = model.n
    omit = sorted(set(int(i) for i in omit))
    if not omit or len(omit) >= n or omit[0] < 0 or omit[-1] >= n:
        raise DimensionError("omit must be a non-empty proper subset of the variables")
    keep = [i for i in range(n) if i not in omit]
    if gammas is None:
        gammas = autocovariance(model, q)
    q = gammas.q if q is None else q
    yw = YuleWalkerSystem(gammas.subset(keep), q)
    A, sigma = yw.solve()
    m = len(keep)
    coeffs = A.reshape(m, q, m).transpose(1, 0, 2)
    return FitResult(coeffs, sigma, None, _logdet_or_ninf(sigma), tuple(keep))


def reduced_sigma_single_lag(model: VARModel, source: Sequence[int], lag: int,
                             q: Optional[int] = None,
                             gammas: Optional[AutocovSequence] = None,
                             system: Optional[YuleWalkerSystem] = None) -> np.ndarray:
    """Residual covariance with the ``source`` block at ``lag`` removed from the predictors.

    Deletes the source columns of lag block ``lag`` in ``[Gamma_1 .. Gamma_q]``
    and the matching rows/columns of ``Lambda_q``, then evaluates
    ``Gamma_0 - Gamma' Lambda'^{-1} Gamma'^T`` by Cholesky solve.
    """
    if system is None:
        if gammas is None:
            gammas = autocovariance(model, q)
        system = YuleWalkerSystem(gammas, gammas.q if q is None else q)
    source = sorted(set(int(i) for i in source))
    if not source or source[0] < 0 or source[-1] >= system.n:
        raise DimensionError(f"invalid source block {source}")
    if not 1 <= lag <= system.q:
        raise ValueError(f"lag must lie in 1..{system.q}, got {lag}")
    drop = system.index(lag, source)
    keep = np.setdiff1d(np.arange(system.n * system.q), drop)
    _, sigma = system.solve(keep)
    return sigma
