"""The 5-variable, order-20 demonstration model with lagged causal feedback."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .var_model import VARModel, check_stability
from .errors import StabilityError

# (target, source, lag, coefficient), 1-based variable indices
CROSS_TERMS: tuple[tuple[int, int, int, float], ...] = (
    (1, 2, 11, 0.221),
    (2, 1, 5, 0.306),
    (3, 1, 8, -0.403),
    (4, 3, 20, -0.215),
    (3, 5, 4, 0.352),
)

N_VARS = 5
ORDER = 20
# Not published. 0.9 makes the model explosive (the 1<->2 feedback loop has
# gain 0.221*0.306/(1-a)^2 at zero frequency); every a >= 0.74 is unstable.
DEFAULT_SELF_COEFF = 0.5


@dataclass(frozen=True)
class DemoModelSpec:
    rho_self: float = DEFAULT_SELF_COEFF
    n: int = N_VARS
    p: int = ORDER

    def build(self, check: bool = True) -> VARModel:
        A = np.zeros((self.p, self.n, self.n))
        A[0] = self.rho_self * np.eye(self.n)
        for x, y, lag, value in CROSS_TERMS:
            A[lag - 1, x - 1, y - 1] = value
        model = VARModel(A, np.eye(self.n))
        if check:
            rho = check_stability(model)
            if not rho < 1.0:
                raise StabilityError(
                    f"demo model with self-coefficient {self.rho_self} is unstable "
                    f"(spectral radius {rho:.4f})"
                )
        return model

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "rho_self": self.rho_self,
            "sigma": "identity",
            "cross_terms": [list(r) for r in CROSS_TERMS],
        }


def demo_model(rho_self: float = DEFAULT_SELF_COEFF) -> VARModel:
    return DemoModelSpec(rho_self).build()


def causal_cells() -> list[tuple[int, int, int]]:
    """True ``(x, y, lag)`` cells, 0-based variables."""
    return [(x - 1, y - 1, lag) for x, y, lag, _ in CROSS_TERMS]


def causal_pairs() -> list[tuple[int, int]]:
    return [(x, y) for x, y, _ in causal_cells()]
