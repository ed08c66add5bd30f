"""Granger-Geweke causality: one-step, multi-step, full-future and single-lag.

Every statistic is a log ratio of generalised variances (nats),

    F = log det(Sigma_reduced_xx) - log det(Sigma_full_xx),

and comes in an analytic form (from model parameters, via Yule-Walker
reductions) and, except full-future, a sample form (independently fitted
full and reduced OLS regressions).
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Literal, Optional, Sequence

import numpy as np

from .errors import DimensionError, NumericalError, SingularityError
from .estimation import (
    FitResult,
    LagRegression,
    YuleWalkerSystem,
    cholesky_guarded,
    fit_var_ols,
    reduced_model_yw,
    reduced_sigma_single_lag,
)
from .inference import SignificanceSpec, critical_level, gc_pvalue
from .simulation import TimeSeries
from .var_model import (
    MACoefficients,
    VARModel,
    _ma_recursion,
    autocovariance,
    require_stable,
)

logger = logging.getLogger(__name__)

CLAMP_TOL = 1e-10
SAMPLE_SINGULAR_TOL = 1e-12
FULLFUTURE_TOL = 1e-10
FULLFUTURE_HMAX = 256

Variant = Literal["onestep", "multistep", "fullfuture", "singlelag"]


@dataclass(frozen=True)
class Partition:
    """Targets ``x``, sources ``y`` and conditioning set ``z`` (0-based indices)."""

    x: tuple[int, ...]
    y: tuple[int, ...]
    z: tuple[int, ...] = ()

    @classmethod
    def make(cls, n: int, x: Iterable[int], y: Iterable[int],
             z: Optional[Iterable[int]] = None) -> "Partition":
        x = tuple(sorted(int(i) for i in np.atleast_1d(x)))
        y = tuple(sorted(int(i) for i in np.atleast_1d(y)))
        if z is None:
            z = tuple(i for i in range(n) if i not in x and i not in y)
        else:
            z = tuple(sorted(int(i) for i in z))
        part = cls(x, y, z)
        part.validate(n)
        return part

    @property
    def nx(self) -> int:
        return len(self.x)

    @property
    def ny(self) -> int:
        return len(self.y)

    @property
    def retained(self) -> tuple[int, ...]:
        return tuple(sorted(self.x + self.z))

    def validate(self, n: int) -> None:
        if not self.x or not self.y:
            raise DimensionError("x and y must both be non-empty")
        allidx = self.x + self.y + self.z
        if len(set(allidx)) != len(allidx):
            raise DimensionError("x, y and z must be pairwise disjoint")
        if sorted(allidx) != list(range(n)):
            raise DimensionError(f"partition must cover exactly the variables 0..{n - 1}")


@dataclass(frozen=True)
class GCResult:
    """A GC value (nats) with its sampling metadata.

    ``dof``, ``N`` and ``pvalue`` are ``None`` for analytic statistics.
    """

    value: float
    variant: Variant
    h: Optional[int] = None
    tau: Optional[int] = None
    dof: Optional[int] = None
    N: Optional[int] = None
    pvalue: Optional[float] = None


@dataclass(frozen=True, eq=False)
class FullFutureTrace:
    horizons: np.ndarray
    values: np.ndarray
    converged: bool
    limit: float
    tol: float


def clamp_analytic(value: float) -> float:
    """Map round-off negatives in ``[-1e-10, 0)`` to 0; reject anything below."""
    if value < -CLAMP_TOL:
        raise NumericalError(
            f"analytic GC evaluated to {value:.3e} < 0; the reduction is inconsistent"
        )
    return max(0.0, float(value))


def logdet_pd(S: np.ndarray, what: str = "covariance") -> float:
    L = cholesky_guarded(np.atleast_2d(S), what)
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def _sample_logdet(S: np.ndarray, scale: float) -> float:
    w = np.linalg.eigvalsh(S)
    if w[0] <= SAMPLE_SINGULAR_TOL * scale:
        raise SingularityError(
            "residual covariance is singular (zero residual variance: noiseless data?)"
        )
    return float(np.sum(np.log(w)))


# --------------------------------------------------------------------------
# analytic statistics


class _Analytic:
    """Cache of the autocovariance / Yule-Walker objects for one model."""

    def __init__(self, model: VARModel, q: Optional[int] = None):
        require_stable(model)
        self.model = model
        self.gammas = autocovariance(model, q)
        self.q = self.gammas.q
        self._system: Optional[YuleWalkerSystem] = None
        self._reduced: dict[tuple[int, ...], FitResult] = {}
        self._lag_sigma: dict[tuple[tuple[int, ...], int], np.ndarray] = {}

    @property
    def system(self) -> YuleWalkerSystem:
        if self._system is None:
            self._system = YuleWalkerSystem(self.gammas, self.q)
        return self._system

    def reduced(self, omit: tuple[int, ...]) -> FitResult:
        if omit not in self._reduced:
            self._reduced[omit] = reduced_model_yw(self.model, omit, self.q, self.gammas)
        return self._reduced[omit]

    def lag_sigma(self, source: tuple[int, ...], tau: int) -> np.ndarray:
        """Reduced innovations covariance with ``source`` deleted at lag ``tau``."""
        key = (source, tau)
        if key not in self._lag_sigma:
            self._lag_sigma[key] = reduced_sigma_single_lag(self.model, source, tau, system=self.system)
        return self._lag_sigma[key]


def _check_part(part: Partition, n: int) -> None:
    part.validate(n)


def gc_onestep_analytic(model: VARModel, part: Partition, q: Optional[int] = None,
                        _cache: Optional[_Analytic] = None) -> GCResult:
    """Conditional one-step GC ``log det Sigma^[y]_xx / det Sigma_xx`` from model parameters."""
    _check_part(part, model.n)
    an = _cache or _Analytic(model, q)
    red = an.reduced(part.y)
    full = logdet_pd(model.sigma[np.ix_(part.x, part.x)])
    reduced = logdet_pd(red.block(part.x))
    return GCResult(clamp_analytic(reduced - full), "onestep")


def _horizon_cov(B: np.ndarray, sigma: np.ndarray, rows: Sequence[int], h: int) -> np.ndarray:
    """``sum_{k<h} B_k sigma B_k^T`` restricted to ``rows``; the ``k=0`` term is exact."""
    rows = list(rows)
    S = sigma[np.ix_(rows, rows)].copy()
    if h > 1:
        Bx = B[1:h, rows, :]
        S = S + np.einsum("kij,jl,kml->im", Bx, sigma, Bx)
    return S


def multistep_curve(model: VARModel, part: Partition, horizons: Sequence[int],
                    q: Optional[int] = None, _cache: Optional[_Analytic] = None) -> list[GCResult]:
    """Analytic multi-step GC for each horizon in ``horizons``."""
    _check_part(part, model.n)
    horizons = [int(h) for h in horizons]
    if not horizons or min(horizons) < 1:
        raise ValueError("horizons must be >= 1")
    an = _cache or _Analytic(model, q)
    red = an.reduced(part.y)
    H = max(horizons)
    B = _ma_recursion(model.coeffs, H - 1)
    Bred = _ma_recursion(red.coeffs, H - 1)
    xr = [red.targets.index(i) for i in part.x]
    out = []
    for h in horizons:
        full = logdet_pd(_horizon_cov(B, model.sigma, part.x, h))
        reduced = logdet_pd(_horizon_cov(Bred, red.sigma, xr, h))
        out.append(GCResult(clamp_analytic(reduced - full), "multistep", h=h))
    return out


def gc_multistep_analytic(model: VARModel, part: Partition, h: int,
                          q: Optional[int] = None) -> GCResult:
    """h-step GC: compares ``Sigma^(h) = sum_{k<h} B_k Sigma B_k^T`` of full and reduced models."""
    return multistep_curve(model, part, [h], q)[0]


def build_fullfuture_cov(mc: MACoefficients | np.ndarray, sigma: np.ndarray, h: int,
                         x: Sequence[int]) -> np.ndarray:
    """Covariance of the stacked x-prediction errors for horizons ``1..h``.

    Block ``(i, j)`` is ``sum_k B_{i-k,x} Sigma B_{j-k,x}^T``; this is
    ``B{h}_x diag(Sigma, ..., Sigma) B{h}_x^T`` with ``B{h}_x`` the block
    lower-triangular Toeplitz matrix of MA coefficients restricted to x rows.
    """
    B = mc.mats if isinstance(mc, MACoefficients) else np.asarray(mc)
    if h < 1:
        raise ValueError("h must be >= 1")
    if B.shape[0] < h:
        raise ValueError(f"need MA coefficients B_0..B_{h - 1}, have {B.shape[0]}")
    x = list(x)
    n, nx = B.shape[1], len(x)
    Bx = B[:h, x, :]
    big = np.zeros((h * nx, h * n))
    for i in range(h):
        # block row i: B_{i,x} .. B_{0,x} in columns 0..i
        big[i * nx:(i + 1) * nx, :(i + 1) * n] = Bx[i::-1].transpose(1, 0, 2).reshape(nx, (i + 1) * n)
    right = (big.reshape(h * nx, h, n) @ sigma).reshape(h * nx, h * n)
    S = right @ big.T
    return 0.5 * (S + S.T)


def _leading_logdets(S: np.ndarray, block: int) -> np.ndarray:
    L = cholesky_guarded(S, "full-future covariance")
    logs = 2.0 * np.log(np.diag(L))
    return np.cumsum(logs)[block - 1::block]


def gc_fullfuture(model: VARModel, part: Partition, tol: float = FULLFUTURE_TOL,
                  hmax: int = FULLFUTURE_HMAX, q: Optional[int] = None,
                  hmin: int = 1, _cache: Optional[_Analytic] = None) -> FullFutureTrace:
    """Full-future GC trace ``F{1}, F{2}, ...`` until successive values differ by < ``tol``.

    The ``h``-horizon covariance is the leading ``h``-block principal
    submatrix of the ``H``-horizon one, so a single Cholesky factor yields the
    whole trace up to ``H``; ``H`` doubles until convergence or ``hmax``.
    The trace always reports at least ``min(hmin, hmax)`` horizons.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if hmax < 2:
        raise ValueError("hmax must be >= 2")
    _check_part(part, model.n)
    an = _cache or _Analytic(model, q)
    red = an.reduced(part.y)
    xr = [red.targets.index(i) for i in part.x]
    nx = part.nx
    H = min(hmax, max(32, hmin))
    while True:
        B = _ma_recursion(model.coeffs, H - 1)
        Bred = _ma_recursion(red.coeffs, H - 1)
        full = _leading_logdets(build_fullfuture_cov(B, model.sigma, H, part.x), nx)
        reduced = _leading_logdets(build_fullfuture_cov(Bred, red.sigma, H, xr), nx)
        F = reduced - full
        diffs = np.abs(np.diff(F))
        hit = np.nonzero(diffs < tol)[0]
        if hit.size or H >= hmax:
            break
        H = min(hmax, 2 * H)
    if hit.size:
        stop = int(hit[0]) + 2
        converged = True
    else:
        stop = H
        converged = False
    stop = max(stop, min(hmin, H))
    values = np.array([clamp_analytic(v) for v in F[:stop]])
    return FullFutureTrace(np.arange(1, stop + 1), values, converged, float(values[-1]), tol)


def gc_singlelag_analytic(model: VARModel, part: Partition, tau: int,
                          q: Optional[int] = None,
                          _cache: Optional[_Analytic] = None) -> GCResult:
    """Single-lag GC from the Yule-Walker solve with the lag-``tau`` source block deleted."""
    _check_part(part, model.n)
    an = _cache or _Analytic(model, q)
    if not 1 <= tau <= an.q:
        raise ValueError(f"tau must lie in 1..{an.q}")
    sig = an.lag_sigma(part.y, tau)
    full = logdet_pd(model.sigma[np.ix_(part.x, part.x)])
    reduced = logdet_pd(sig[np.ix_(part.x, part.x)])
    return GCResult(clamp_analytic(reduced - full), "singlelag", tau=tau)


# --------------------------------------------------------------------------
# sample statistics


class _Sample:
    """Shared lag design for all sample statistics on one series and order."""

    def __init__(self, ts: TimeSeries, p: int):
        self.reg = LagRegression.from_series(ts, p)
        self.p = p
        self.N = self.reg.N
        self.var = np.var(ts.data, axis=0)

    def resid_logdet(self, cols: np.ndarray, x: Sequence[int]) -> float:
        _, S = self.reg.solve(cols, x)
        return _sample_logdet(S, float(np.max(self.var[list(x)])))

    def stat(self, full_cols: np.ndarray, red_cols: np.ndarray, x: Sequence[int]) -> float:
        F = self.resid_logdet(red_cols, x) - self.resid_logdet(full_cols, x)
        # nested least squares: the reduced fit can never beat the full one
        return max(0.0, F)

    def lag_cols(self, lags: Sequence[int], exclude: Sequence[int] = ()) -> np.ndarray:
        vars_ = [i for i in range(self.reg.n) if i not in set(exclude)]
        return self.reg.columns(lags, vars_)


def _sample_result(F: float, variant: Variant, dof: int, N: int, **kw) -> GCResult:
    return GCResult(F, variant, dof=dof, N=N, pvalue=gc_pvalue(F, N, dof), **kw)


def gc_onestep_sample(ts: TimeSeries, p: int, part: Partition,
                      _cache: Optional[_Sample] = None) -> GCResult:
    """Sample one-step GC from independent full and reduced OLS VAR(p) fits."""
    _check_part(part, ts.n)
    s = _cache or _Sample(ts, p)
    lags = range(1, p + 1)
    F = s.stat(s.lag_cols(lags), s.lag_cols(lags, part.y), part.x)
    return _sample_result(F, "onestep", p * part.nx * part.ny, s.N)


def gc_multistep_sample(ts: TimeSeries, p: int, part: Partition, h: int,
                        _cache: Optional[_Sample] = None) -> GCResult:
    """Sample h-step GC: regress on lags ``h..p`` only, with and without the sources."""
    if not 1 <= h <= p:
        raise ValueError(f"horizon h must lie in 1..p ({p}), got {h}")
    _check_part(part, ts.n)
    s = _cache or _Sample(ts, p)
    lags = range(h, p + 1)
    F = s.stat(s.lag_cols(lags), s.lag_cols(lags, part.y), part.x)
    return _sample_result(F, "multistep", (p - h + 1) * part.nx * part.ny, s.N, h=h)


def gc_singlelag_sample(ts: TimeSeries, p: int, part: Partition, tau: int,
                        _cache: Optional[_Sample] = None) -> GCResult:
    """Sample single-lag GC: full VAR(p) versus the same regression minus ``y`` at lag ``tau``."""
    if not 1 <= tau <= p:
        raise ValueError(f"tau must lie in 1..p ({p}), got {tau}")
    _check_part(part, ts.n)
    s = _cache or _Sample(ts, p)
    full = s.lag_cols(range(1, p + 1))
    drop = set(s.reg.columns([tau], part.y).tolist())
    red = np.array([c for c in full if c not in drop])
    F = s.stat(full, red, part.x)
    return _sample_result(F, "singlelag", part.nx * part.ny, s.N, tau=tau)


# --------------------------------------------------------------------------
# causal graphs


@dataclass(frozen=True)
class GCCell:
    x: int
    y: int
    F: float
    tau: Optional[int] = None
    h: Optional[int] = None
    dof: Optional[int] = None
    pvalue: Optional[float] = None
    significant: bool = False
    critical: Optional[float] = None


@dataclass(frozen=True, eq=False)
class GCGraph:
    """Pairwise-conditional GC over all ordered pairs ``(x, y)``, ``x != y``.

    Cell indices are 0-based; serialisations in :mod:`granger_horizons.io`
    write them 1-based.
    """

    variant: Variant
    n: int
    p: Optional[int]
    alpha: float
    correction: str
    m: int
    N: Optional[int]
    cells: tuple[GCCell, ...]
    extra: dict[str, Any] = field(default_factory=dict)

    def cell(self, x: int, y: int, tau: Optional[int] = None, h: Optional[int] = None) -> GCCell:
        for c in self.cells:
            if c.x == x and c.y == y and c.tau == tau and c.h == h:
                return c
        raise KeyError((x, y, tau, h))

    def significant_cells(self) -> list[GCCell]:
        return [c for c in self.cells if c.significant]

    def decision_array(self) -> np.ndarray:
        """Boolean decisions as ``[x, y]`` or, for single-lag, ``[x, y, tau - 1]``."""
        if self.variant == "singlelag":
            out = np.zeros((self.n, self.n, self.p), dtype=bool)
            for c in self.cells:
                out[c.x, c.y, c.tau - 1] = c.significant
            return out
        out = np.zeros((self.n, self.n), dtype=bool)
        for c in self.cells:
            out[c.x, c.y] |= c.significant
        return out


def _pairs(n: int, pairs: Optional[Sequence[tuple[int, int]]]) -> list[tuple[int, int]]:
    if n < 2:
        raise DimensionError("a causal graph needs at least two variables")
    if pairs is None:
        return [(x, y) for x in range(n) for y in range(n) if x != y]
    return [(int(x), int(y)) for x, y in pairs]


def _run(tasks: list[Callable[[], Any]], jobs: int) -> list[Any]:
    if jobs <= 1 or len(tasks) <= 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda t: t(), tasks))  # map preserves task order


def gc_graph(ts: TimeSeries, p: int, variant: Variant = "singlelag", *,
             horizons: Sequence[int] = (1,), alpha: float = 0.05,
             correction: str = "bonferroni", pairs: Optional[Sequence[tuple[int, int]]] = None,
             tol: float = FULLFUTURE_TOL, hmax: int = FULLFUTURE_HMAX,
             q: Optional[int] = None, jobs: int = 1) -> GCGraph:
    """Sample Granger-causal graph, each pair conditioned on all remaining variables.

    ``singlelag`` sweeps ``tau = 1..p``; ``multistep`` sweeps ``horizons``.
    Bonferroni uses ``m`` = number of tested cells. ``fullfuture`` has no
    sampling theory here; it is evaluated on the fitted VAR(p) (plug-in) and
    carries no p-values.
    """
    n = ts.n
    plist = _pairs(n, pairs)
    if variant == "fullfuture":
        fit = fit_var_ols(ts, p)
        g = gc_graph_analytic(fit.model, "fullfuture", alpha=alpha, correction=correction,
                              pairs=plist, tol=tol, hmax=hmax, q=q, jobs=jobs)
        cells = tuple(
            GCCell(c.x, c.y, c.F, h=c.h, dof=p) for c in g.cells
        )
        return GCGraph("fullfuture", n, p, alpha, correction, len(cells), fit.N, cells, g.extra)

    s = _Sample(ts, p)
    keys: list[tuple[int, int, Optional[int], Optional[int]]] = []
    tasks: list[Callable[[], GCResult]] = []
    for x, y in plist:
        part = Partition.make(n, [x], [y])
        if variant == "onestep":
            keys.append((x, y, None, None))
            tasks.append(lambda part=part: gc_onestep_sample(ts, p, part, _cache=s))
        elif variant == "multistep":
            for h in horizons:
                keys.append((x, y, None, int(h)))
                tasks.append(lambda part=part, h=int(h): gc_multistep_sample(ts, p, part, h, _cache=s))
        elif variant == "singlelag":
            for tau in range(1, p + 1):
                keys.append((x, y, tau, None))
                tasks.append(lambda part=part, tau=tau: gc_singlelag_sample(ts, p, part, tau, _cache=s))
        else:
            raise ValueError(f"unknown variant {variant!r}")
    results = _run(tasks, jobs)
    spec = SignificanceSpec(alpha, correction, max(1, len(results)))
    cells = []
    crit_cache: dict[int, float] = {}
    for (x, y, tau, h), r in zip(keys, results):
        if r.dof not in crit_cache:
            crit_cache[r.dof] = critical_level(spec, s.N, r.dof)
        cells.append(GCCell(x, y, r.value, tau=tau, h=h, dof=r.dof, pvalue=r.pvalue,
                            significant=r.pvalue < spec.alpha_eff, critical=crit_cache[r.dof]))
    return GCGraph(variant, n, p, alpha, correction, spec.m, s.N, tuple(cells))


def gc_graph_analytic(model: VARModel, variant: Variant = "singlelag", *,
                      horizons: Sequence[int] = (1,), lags: Optional[Sequence[int]] = None,
                      alpha: float = 0.05, correction: str = "bonferroni",
                      pairs: Optional[Sequence[tuple[int, int]]] = None,
                      tol: float = FULLFUTURE_TOL, hmax: int = FULLFUTURE_HMAX,
                      q: Optional[int] = None, jobs: int = 1) -> GCGraph:
    """Population GC graph computed from model parameters (no significance decisions).

    ``fullfuture`` emits one cell per horizon of each pair's trace; the
    per-pair convergence flags land in ``extra["converged"]``.
    """
    n = model.n
    plist = _pairs(n, pairs)
    an = _Analytic(model, q)
    if lags is None:
        lags = range(1, model.p + 1)
    keys: list[tuple[int, int, Optional[int], Optional[int]]] = []
    tasks: list[Callable[[], Any]] = []
    for x, y in plist:
        part = Partition.make(n, [x], [y])
        if variant == "onestep":
            keys.append((x, y, None, None))
            tasks.append(lambda part=part: [gc_onestep_analytic(model, part, _cache=an)])
        elif variant == "multistep":
            keys.append((x, y, None, None))
            tasks.append(lambda part=part: multistep_curve(model, part, horizons, _cache=an))
        elif variant == "singlelag":
            for tau in lags:
                keys.append((x, y, int(tau), None))
                tasks.append(lambda part=part, tau=int(tau):
                             [gc_singlelag_analytic(model, part, tau, _cache=an)])
        elif variant == "fullfuture":
            keys.append((x, y, None, None))
            tasks.append(lambda part=part: gc_fullfuture(model, part, tol, hmax, _cache=an))
        else:
            raise ValueError(f"unknown variant {variant!r}")
    # reduced models are cached per source; build them before any threads start
    for y in sorted({y for _, y in plist}):
        if variant != "singlelag":
            an.reduced((y,))
    if variant == "singlelag":
        an.system
    results = _run(tasks, jobs)
    cells: list[GCCell] = []
    extra: dict[str, Any] = {"q": an.q}
    converged = {}
    for (x, y, tau, _), r in zip(keys, results):
        if variant == "fullfuture":
            converged[f"{x},{y}"] = r.converged
            for h, v in zip(r.horizons, r.values):
                cells.append(GCCell(x, y, float(v), h=int(h)))
        else:
            for res in r:
                cells.append(GCCell(x, y, res.value, tau=res.tau if tau is not None else None, h=res.h))
    if converged:
        extra["converged"] = converged
    return GCGraph(variant, n, model.p, alpha, correction, len(cells), None, tuple(cells), extra)
