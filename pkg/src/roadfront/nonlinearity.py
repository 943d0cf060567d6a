"""Reaction terms for the field equation.

Two variants: the KPP logistic f(v) = r v (1 - v), and the cumulative SIR
term f(v) = S0 (1 - exp(-beta v)) - alpha v obtained by integrating the
infected compartments in time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoPositiveRoot

ROOT_TOL = 1e-12


@dataclass(frozen=True)
class KppLogistic:
    r: float = 1.0

    name = "kpp"

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"KPP rate r must be positive, got {self.r}")

    def __call__(self, v):
        # the logistic formula is already negative for v > 1
        return self.r * v * (1.0 - v)

    def fprime(self, v):
        return self.r * (1.0 - 2.0 * v)

    def fprime0(self) -> float:
        return self.r

    def v_star(self) -> float:
        return 1.0

    def max_decay(self) -> float:
        """Bound on max(0, -f') over [0, 1]; used for the monotone time step."""
        return self.r


@dataclass(frozen=True)
class SirCumulative:
    S0: float = 2.0
    beta: float = 1.0
    alpha: float = 1.0

    name = "sir"

    def __post_init__(self):
        for key in ("S0", "beta", "alpha"):
            if not getattr(self, key) > 0:
                raise ValueError(f"SIR parameter {key} must be positive, got {getattr(self, key)}")

    @property
    def R0(self) -> float:
        return self.S0 * self.beta / self.alpha

    def __call__(self, v):
        return -self.S0 * np.expm1(-self.beta * np.asarray(v, dtype=float)) - self.alpha * v

    def fprime(self, v):
        return self.S0 * self.beta * np.exp(-self.beta * np.asarray(v, dtype=float)) - self.alpha

    def fprime0(self) -> float:
        return self.alpha * (self.R0 - 1.0)

    def v_star(self) -> float:
        """Unique positive zero of f, by bisection."""
        if self.fprime0() <= 0:
            raise NoPositiveRoot(f"f has no positive zero when R0 = {self.R0:.6g} <= 1")
        lo = ROOT_TOL
        # f(v) < S0 - alpha v, so the root lies below S0 / alpha
        hi = 10.0 * max(1.0, self.S0 / self.alpha)
        while float(self(hi)) > 0:
            hi *= 2.0
        for _ in range(200):
            if hi - lo <= ROOT_TOL:
                break
            mid = 0.5 * (lo + hi)
            if float(self(mid)) > 0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def max_decay(self) -> float:
        return self.alpha


Nonlinearity = KppLogistic | SirCumulative


def make_nonlinearity(kind: str, **kw) -> Nonlinearity:
    """Build a reaction term from its config name ("kpp" or "sir")."""
    kind = kind.lower()
    if kind == "kpp":
        return KppLogistic(r=float(kw.get("r", 1.0)))
    if kind == "sir":
        return SirCumulative(S0=float(kw.get("S0", 2.0)), beta=float(kw.get("beta", 1.0)),
                             alpha=float(kw.get("alpha", 1.0)))
    raise ValueError(f"unknown nonlinearity {kind!r}; expected 'kpp' or 'sir'")
