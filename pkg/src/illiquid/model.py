"""Domain types, parameter validation, and grid construction.

The market has a bond with rate ``r`` and a stock following geometric
Brownian motion with drift ``mu`` and volatility ``sigma``. Trades only
succeed at arrival times of a Poisson process with intensity ``lam``, and a
successful trade pays proportional costs: buying stock worth m costs
``(1 + cost_buy) * m`` from the bond account, selling returns
``(1 - cost_sell) * m``. The investor maximizes expected log wealth at the
horizon ``T``.

The state is the fraction of wealth held in stock, ``x in [0, 1]``. Interior
computations use the log-odds coordinate ``z = log(x / (1 - x))``, where the
state diffusion has constant coefficients; ``logistic`` and ``log_odds``
convert between the two. The endpoints x = 0 and x = 1 are absorbing between
trades and carry their own value curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import expit, logit

__all__ = [
    "ModelParams",
    "GridSpec",
    "ValueSurface",
    "NoTradeBoundaries",
    "AsymptoticReport",
    "ValidationError",
    "validate",
    "make_grid",
    "logistic",
    "log_odds",
    "load_config",
    "CONFIG_KEYS",
    "CONCAVITY_TOL",
]

# Slack allowed on second differences when asserting concavity of a slice.
CONCAVITY_TOL = 1e-8


class ValidationError(ValueError):
    """A model parameter or grid setting violates its constraints."""


def logistic(z):
    """Map log-odds to a fraction in [0, 1]: z -> e^z / (1 + e^z)."""
    return expit(z)


def log_odds(x):
    """Map a fraction in (0, 1) to log-odds: x -> log(x / (1 - x))."""
    return logit(x)


@dataclass(frozen=True)
class ModelParams:
    """Market and friction constants.

    mu, r are per unit time, sigma per square-root time, lam is the Poisson
    intensity of trading opportunities, horizon the terminal time. cost_buy
    and cost_sell are the proportional transaction costs for buying and
    selling stock.
    """

    mu: float
    r: float
    sigma: float
    lam: float
    horizon: float
    cost_buy: float = 0.0
    cost_sell: float = 0.0

    def __post_init__(self):
        _check_params(self)

    def merton_fraction(self) -> float:
        """Constant optimal stock fraction of the frictionless market."""
        return (self.mu - self.r) / self.sigma**2

    def with_costs(self, cost: float) -> "ModelParams":
        """Copy with both proportional costs set to ``cost``."""
        return replace(self, cost_buy=cost, cost_sell=cost)


def _check_params(p: ModelParams) -> None:
    if not p.sigma > 0:
        raise ValidationError("sigma must be positive")
    if not p.horizon > 0:
        raise ValidationError("horizon must be positive")
    if p.lam < 0:
        raise ValidationError("lambda must be >= 0")
    if p.cost_buy < 0:
        raise ValidationError("cost_buy must be >= 0")
    if not 0 <= p.cost_sell < 1:
        raise ValidationError("cost_sell must be < 1 and >= 0")
    for name in ("mu", "r", "sigma", "lam", "horizon", "cost_buy", "cost_sell"):
        if not math.isfinite(getattr(p, name)):
            raise ValidationError(f"{name} must be finite")


def validate(params: ModelParams) -> ModelParams:
    """Return ``params`` unchanged if every field invariant holds.

    Construction already validates; this re-checks explicitly so callers that
    build parameters through other paths can assert validity.
    """
    _check_params(params)
    return params


@dataclass(frozen=True)
class GridSpec:
    """Uniform discretization settings for the solver.

    z_min/z_max truncate the log-odds axis (defaults cover x from ~3.4e-4 to
    1 - 3.4e-4; the x endpoints are handled by their own curves, not by the
    interior grid). n_state and n_time count nodes inclusive of both ends.
    n_quad is the Gauss-Hermite order for expectations. picard_tol is the
    sup-norm threshold for the per-slice fixed-point iteration.
    """

    z_min: float = -8.0
    z_max: float = 8.0
    n_state: int = 401
    n_time: int = 200
    n_quad: int = 64
    picard_tol: float = 1e-11
    picard_max_iter: int = 120

    def __post_init__(self):
        if not (self.z_min < 0.0 < self.z_max):
            raise ValidationError("need z_min < 0 < z_max")
        if self.n_state < 3:
            raise ValidationError("n_state must be >= 3")
        if self.n_time < 2:
            raise ValidationError("n_time must be >= 2")
        if self.n_quad < 2:
            raise ValidationError("n_quad must be >= 2")
        if not self.picard_tol > 0:
            raise ValidationError("picard_tol must be positive")
        if self.picard_max_iter < 1:
            raise ValidationError("picard_max_iter must be >= 1")


def make_grid(spec: GridSpec, params: ModelParams):
    """Uniform time grid on [0, T] and uniform log-odds grid on [z_min, z_max]."""
    times = np.linspace(0.0, params.horizon, spec.n_time)
    z_nodes = np.linspace(spec.z_min, spec.z_max, spec.n_state)
    return times, z_nodes


def second_differences_x(x_nodes, values):
    """Divided second differences of ``values`` against the fraction grid.

    Nonpositive (up to noise) on every interior triple iff the slice is
    concave in x.
    """
    x = np.asarray(x_nodes, dtype=float)
    v = np.asarray(values, dtype=float)
    hl = x[1:-1] - x[:-2]
    hr = x[2:] - x[1:-1]
    return 2.0 * ((v[2:] - v[1:-1]) / hr - (v[1:-1] - v[:-2]) / hl) / (hl + hr)


def _lagrange4_weights(f):
    """Cubic interpolation weights for nodes at offsets (-1, 0, 1, 2).

    ``f`` is the fractional position in [0, 1) inside the (0, 1) cell.
    Exact for cubic polynomials.
    """
    w0 = -f * (f - 1.0) * (f - 2.0) / 6.0
    w1 = (f * f - 1.0) * (f - 2.0) / 2.0
    w2 = -f * (f + 1.0) * (f - 2.0) / 2.0
    w3 = f * (f * f - 1.0) / 6.0
    return w0, w1, w2, w3


def interp_uniform_cubic(z0, dz, values, zq):
    """Local cubic interpolation of samples on a uniform grid.

    The 4-point stencil is clamped at the edges; queries must lie inside
    [z0, z0 + (n-1) dz].
    """
    v = np.asarray(values, dtype=float)
    zq = np.asarray(zq, dtype=float)
    n = v.shape[0]
    if n < 4:
        # fall back to linear on very small grids
        pos = np.clip((zq - z0) / dz, 0.0, n - 1.0)
        i0 = np.clip(np.floor(pos).astype(np.int64), 0, n - 2)
        f = pos - i0
        return (1.0 - f) * v[i0] + f * v[i0 + 1]
    pos = (zq - z0) / dz
    cell = np.clip(np.floor(pos).astype(np.int64), 1, n - 3)
    f = pos - cell
    w0, w1, w2, w3 = _lagrange4_weights(f)
    return w0 * v[cell - 1] + w1 * v[cell] + w2 * v[cell + 1] + w3 * v[cell + 2]


def eval_slice(z_nodes, u_row, v_zero, v_one, zq):
    """Value of one time slice at arbitrary log-odds points.

    Inside the truncation the slice is interpolated cubically. Beyond it the
    value blends linearly in x toward the known endpoint value, which is the
    correct first-order behavior since the value is Lipschitz in x.
    """
    z_nodes = np.asarray(z_nodes, dtype=float)
    zq = np.atleast_1d(np.asarray(zq, dtype=float))
    z0, z1 = z_nodes[0], z_nodes[-1]
    dz = z_nodes[1] - z_nodes[0]
    out = np.empty(zq.shape, dtype=float)

    inside = (zq >= z0) & (zq <= z1)
    if np.any(inside):
        out[inside] = interp_uniform_cubic(z0, dz, u_row, zq[inside])
    below = zq < z0
    if np.any(below):
        x_edge = logistic(z0)
        w = logistic(zq[below]) / x_edge
        out[below] = v_zero + (u_row[0] - v_zero) * w
    above = zq > z1
    if np.any(above):
        x_edge = logistic(z1)
        w = (1.0 - logistic(zq[above])) / (1.0 - x_edge)
        out[above] = v_one + (u_row[-1] - v_one) * w
    return out


@dataclass(frozen=True)
class ValueSurface:
    """Discretized value function on the time-by-log-odds grid.

    ``u_values[i, j]`` holds the value at ``(times[i], logistic(z_nodes[j]))``;
    ``v_at_zero`` and ``v_at_one`` carry the endpoint curves, which are not
    part of the interior grid because the state derivatives need not extend
    continuously to x in {0, 1}.
    """

    times: np.ndarray
    z_nodes: np.ndarray
    u_values: np.ndarray
    v_at_zero: np.ndarray
    v_at_one: np.ndarray
    validated: bool = field(default=True, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "z_nodes", np.asarray(self.z_nodes, dtype=float))
        object.__setattr__(self, "u_values", np.asarray(self.u_values, dtype=float))
        object.__setattr__(self, "v_at_zero", np.asarray(self.v_at_zero, dtype=float))
        object.__setattr__(self, "v_at_one", np.asarray(self.v_at_one, dtype=float))
        if self.u_values.shape != (self.times.size, self.z_nodes.size):
            raise ValidationError("u_values shape must be (n_time, n_state)")
        if self.validated:
            self.check_invariants()

    @property
    def x_nodes(self) -> np.ndarray:
        return logistic(self.z_nodes)

    def check_invariants(self) -> None:
        """Terminal slice identically zero; every earlier slice concave in x."""
        if np.any(self.u_values[-1] != 0.0):
            raise ValidationError("terminal slice must be identically zero")
        if self.v_at_zero[-1] != 0.0 or self.v_at_one[-1] != 0.0:
            raise ValidationError("terminal endpoint values must be zero")
        x = self.x_nodes
        for i in range(self.times.size - 1):
            d2 = second_differences_x(x, self.u_values[i])
            worst = float(d2.max(initial=-np.inf))
            if worst > CONCAVITY_TOL:
                raise ValidationError(
                    f"slice t={self.times[i]:.6g} violates concavity "
                    f"(max second difference {worst:.3e})"
                )

    def slice_fn(self, i: int):
        """Callable x -> value for time slice ``i``."""
        row = self.u_values[i]
        v0 = float(self.v_at_zero[i])
        v1 = float(self.v_at_one[i])

        def fn(x):
            x = np.atleast_1d(np.asarray(x, dtype=float))
            out = np.empty(x.shape, dtype=float)
            at0 = x <= 0.0
            at1 = x >= 1.0
            mid = ~(at0 | at1)
            out[at0] = v0
            out[at1] = v1
            if np.any(mid):
                out[mid] = eval_slice(self.z_nodes, row, v0, v1, log_odds(x[mid]))
            return out if out.size > 1 else float(out[0])

        return fn

    def value_at(self, t: float, x: float) -> float:
        """Value at an arbitrary point, linear in t between slices."""
        t = float(np.clip(t, self.times[0], self.times[-1]))
        i = int(np.searchsorted(self.times, t, side="right") - 1)
        i = min(max(i, 0), self.times.size - 2)
        w = (t - self.times[i]) / (self.times[i + 1] - self.times[i])
        lo = self.slice_fn(i)(x)
        hi = self.slice_fn(i + 1)(x)
        return float((1.0 - w) * lo + w * hi)


@dataclass(frozen=True)
class NoTradeBoundaries:
    """Per-time lower and upper no-trade boundaries with clamp flags.

    A clamp flag is set when the boundary sits at 0 or 1 because the interior
    first-order condition has no root there, rather than at an interior root.
    """

    times: np.ndarray
    y_lo: np.ndarray
    y_hi: np.ndarray
    lo_clamped: np.ndarray
    hi_clamped: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "y_lo", np.asarray(self.y_lo, dtype=float))
        object.__setattr__(self, "y_hi", np.asarray(self.y_hi, dtype=float))
        object.__setattr__(self, "lo_clamped", np.asarray(self.lo_clamped, dtype=bool))
        object.__setattr__(self, "hi_clamped", np.asarray(self.hi_clamped, dtype=bool))
        if np.any(self.y_lo < -1e-15) or np.any(self.y_hi > 1 + 1e-15):
            raise ValidationError("boundaries must lie in [0, 1]")
        if np.any(self.y_lo > self.y_hi + 1e-12):
            raise ValidationError("need y_lo <= y_hi at every time")

    def at(self, t, mode: str = "linear"):
        """Boundary pair at time ``t``.

        ``linear`` interpolates both curves between slices (the boundaries
        vary continuously in t); ``nearest`` snaps to the closest slice.
        """
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        if mode == "nearest":
            idx = np.clip(
                np.searchsorted(self.times, t_arr, side="left"), 0, self.times.size - 1
            )
            left = np.maximum(idx - 1, 0)
            use_left = np.abs(t_arr - self.times[left]) <= np.abs(self.times[idx] - t_arr)
            idx = np.where(use_left, left, idx)
            lo, hi = self.y_lo[idx], self.y_hi[idx]
        elif mode == "linear":
            lo = np.interp(t_arr, self.times, self.y_lo)
            hi = np.interp(t_arr, self.times, self.y_hi)
        else:
            raise ValueError(f"unknown lookup mode: {mode!r}")
        if np.isscalar(t) or np.asarray(t).ndim == 0:
            return float(lo[0]), float(hi[0])
        return lo, hi


@dataclass(frozen=True)
class AsymptoticReport:
    """First-order small-cost expansion data on a time grid (t < T only).

    ``y0`` is the zero-cost trade target, ``vxx0`` the zero-cost second state
    derivative there, ``f_at_y0`` and ``g`` the expansion kernels, and
    ``slope_lo``/``slope_hi``/``value_slope`` the first-order sensitivities of
    the boundaries and of the value to the cost parameter (with equal buy and
    sell costs).
    """

    times: np.ndarray
    y0: np.ndarray
    vxx0: np.ndarray
    f_at_y0: np.ndarray
    g: np.ndarray
    slope_lo: np.ndarray
    slope_hi: np.ndarray
    value_slope: np.ndarray

    def __post_init__(self):
        for name in ("times", "y0", "vxx0", "f_at_y0", "g", "slope_lo", "slope_hi", "value_slope"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(self.slope_lo >= 0.0) or np.any(self.slope_hi <= 0.0):
            raise ValidationError("boundary slopes must satisfy slope_lo < 0 < slope_hi")
        if np.any(np.abs(self.f_at_y0) >= 1.0):
            raise ValidationError("f_at_y0 must lie strictly inside (-1, 1)")

    def y0_at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.y0))

    def value_slope_at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.value_slope))


# ---------------------------------------------------------------------------
# configuration files

CONFIG_KEYS = (
    "mu",
    "r",
    "sigma",
    "lambda",
    "horizon",
    "cost_buy",
    "cost_sell",
    "z_min",
    "z_max",
    "n_state",
    "n_time",
    "n_quad",
    "picard_tol",
    "picard_max_iter",
)

_MODEL_KEYS = ("mu", "r", "sigma", "lambda", "horizon", "cost_buy", "cost_sell")
_INT_KEYS = ("n_state", "n_time", "n_quad", "picard_max_iter")


class ConfigError(ValueError):
    """A configuration file is missing, malformed, or inconsistent."""


def load_config(path) -> tuple[ModelParams, GridSpec]:
    """Parse a flat ``key = value`` file into model and grid settings.

    Blank lines and lines starting with ``#`` are ignored. Model keys are
    required; grid keys fall back to the defaults of :class:`GridSpec`.
    """
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    values: dict[str, float] = {}
    for lineno, raw in enumerate(p.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{p}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{p}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{p}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = float(val.strip())
        except ValueError as exc:
            raise ConfigError(f"{p}:{lineno}: bad number for {key!r}: {val.strip()!r}") from exc

    missing = [k for k in _MODEL_KEYS if k not in values]
    if missing:
        raise ConfigError(f"{p}: missing required keys: {', '.join(missing)}")

    try:
        params = ModelParams(
            mu=values["mu"],
            r=values["r"],
            sigma=values["sigma"],
            lam=values["lambda"],
            horizon=values["horizon"],
            cost_buy=values["cost_buy"],
            cost_sell=values["cost_sell"],
        )
        grid_kwargs = {}
        for key in CONFIG_KEYS:
            if key in _MODEL_KEYS or key not in values:
                continue
            grid_kwargs[key] = int(values[key]) if key in _INT_KEYS else values[key]
        grid = GridSpec(**grid_kwargs)
    except ValidationError as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    return params, grid


def composite_simpson_rows(n_nodes: int, dt: float) -> np.ndarray:
    """Quadrature weights for tail integrals on a uniform time grid.

    Row ``i`` integrates a tabulated function over [t_i, t_{n-1}]. Even
    interval counts use composite Simpson; odd counts use Simpson on the
    leading part and a 3/8 closing panel; a single interval falls back to the
    trapezoid rule. Weights in each row sum exactly to the interval length.
    """
    W = np.zeros((n_nodes, n_nodes))
    for i in range(n_nodes):
        m = n_nodes - 1 - i
        if m == 0:
            continue
        if m == 1:
            W[i, i] += 0.5 * dt
            W[i, i + 1] += 0.5 * dt
            continue
        if m % 2 == 0:
            simpson_end = n_nodes - 1
        else:
            simpson_end = n_nodes - 4
            W[i, simpson_end : simpson_end + 4] += (3.0 * dt / 8.0) * np.array(
                [1.0, 3.0, 3.0, 1.0]
            )
        k = simpson_end - i
        if k > 0:
            coeff = np.ones(k + 1)
            coeff[1:-1:2] = 4.0
            coeff[2:-1:2] = 2.0
            W[i, i : simpson_end + 1] += (dt / 3.0) * coeff
    return W
