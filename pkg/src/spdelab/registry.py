"""Named coefficient registry.

Configs refer to drift/diffusion/initial functions by name so that the
declared Lipschitz constants stay honest and experiment files remain
auditable (no arbitrary code in configs).  Every entry carries the function,
its derivative and a global Lipschitz constant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class NamedFunction:
    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    params: tuple = ()

    def __call__(self, u):
        return self.fn(np.asarray(u, dtype=float))

    def d(self, u):
        return self.deriv(np.asarray(u, dtype=float))

    @property
    def is_zero(self) -> bool:
        return self.name == "zero" or (self.name == "affine" and self.params == (0.0, 0.0))

    def describe(self):
        if self.params:
            return {"name": self.name, "params": list(self.params)}
        return self.name


def _sigmoid(u):
    return 1.0 / (1.0 + np.exp(-u))


def make_fn(spec) -> NamedFunction:
    """Build a registry function from a name or {name, params} mapping.

    Known names: zero, one, identity, affine (params a, b -> a + b*u), sin,
    sigmoid.
    """
    if isinstance(spec, str):
        name, params = spec, {}
    elif isinstance(spec, dict):
        spec = dict(spec)
        name = spec.pop("name", None)
        params = spec
        if name is None:
            raise ConfigError("function spec mapping requires a 'name' field")
    else:
        raise ConfigError(f"function spec must be a name or mapping, got {type(spec).__name__}")

    if name == "zero":
        return NamedFunction("zero", lambda u: np.zeros_like(u), lambda u: np.zeros_like(u), 0.0)
    if name == "one":
        return NamedFunction("one", lambda u: np.ones_like(u), lambda u: np.zeros_like(u), 0.0)
    if name == "identity":
        return NamedFunction("identity", lambda u: u, lambda u: np.ones_like(u), 1.0)
    if name == "affine":
        a = float(params.pop("a", 0.0))
        b = float(params.pop("b", 1.0))
        if params:
            raise ConfigError(f"affine takes params a, b; extra {sorted(params)}")
        return NamedFunction(
            "affine",
            lambda u, a=a, b=b: a + b * u,
            lambda u, b=b: np.full_like(u, b),
            abs(b),
            params=(a, b),
        )
    if name == "sin":
        return NamedFunction("sin", np.sin, np.cos, 1.0)
    if name == "sigmoid":
        return NamedFunction(
            "sigmoid", _sigmoid, lambda u: _sigmoid(u) * (1.0 - _sigmoid(u)), 0.25
        )
    raise ConfigError(f"unknown function name {name!r}")


@dataclass(frozen=True)
class Coefficients:
    """Drift b(u), diffusion sigma(u) and initial condition u0(x).

    ``rho`` is the declared Holder exponent of u0; for d >= 2 the named u0
    function is applied to the first coordinate.
    """

    b: NamedFunction
    sigma: NamedFunction
    u0: NamedFunction
    rho: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.rho):
            raise ValueError("rho must be positive")

    @property
    def lipschitz_b(self) -> float:
        return self.b.lipschitz

    @property
    def lipschitz_sigma(self) -> float:
        return self.sigma.lipschitz

    def initial_on_grid(self, grid) -> np.ndarray:
        nodes = grid.nodes()
        return self.u0(nodes[:, 0])

    def initial_at(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return self.u0(points[..., 0])


def make_coefficients(b="zero", sigma="zero", u0="zero", rho=1.0) -> Coefficients:
    return Coefficients(b=make_fn(b), sigma=make_fn(sigma), u0=make_fn(u0), rho=float(rho))
