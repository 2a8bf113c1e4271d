"""Closed-form law of the uncontrolled stock fraction and expectations of it.

Between trades the stock fraction evolves autonomously: starting from x at
time t it reaches

    Y = x * A / (x * A + 1 - x),   A = exp((mu - r - sigma^2/2) (s - t)
                                           + sigma (B_s - B_t)),

which in log-odds form is a Gaussian shift, z -> z + a (s - t) + sigma
sqrt(s - t) g with a = mu - r - sigma^2/2 and g standard normal. The
endpoints 0 and 1 are fixed points of the map. Everything downstream
(the value solver, the zero-cost derivatives, the expansion kernels) reduces
to expectations of functions of Y, evaluated here by Gauss-Hermite
quadrature; integrands with a known kink or jump in Y are split at the
matching normal quantile so each piece stays smooth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .model import log_odds, logistic

__all__ = [
    "QuadratureRule",
    "gauss_hermite",
    "drift_rate",
    "flow",
    "flow_sensitivity",
    "density",
    "expect",
    "expect_split",
]

# Standard normal quantiles beyond this carry less than 1e-16 of mass.
GAUSS_TAIL = 8.5


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights integrating a function of a standard normal draw."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        if self.nodes.shape != self.weights.shape or self.nodes.ndim != 1:
            raise ValueError("nodes and weights must be 1-d arrays of equal length")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1 (standard normal measure)")

    def __len__(self) -> int:
        return self.nodes.size


def gauss_hermite(n: int) -> QuadratureRule:
    """Gauss-Hermite rule rescaled to the standard normal measure.

    Exact for polynomial integrands up to degree 2 n - 1.
    """
    x, w = np.polynomial.hermite.hermgauss(n)
    return QuadratureRule(nodes=np.sqrt(2.0) * x, weights=w / np.sqrt(np.pi))


def drift_rate(params) -> float:
    """Drift of the log-odds coordinate between trades."""
    return params.mu - params.r - 0.5 * params.sigma**2


def flow(t, x, s, g, params):
    """Fraction reached at time s from (t, x) when the normal draw is g.

    The endpoints are absorbing: x = 0 and x = 1 map to themselves for any
    horizon and draw.
    """
    if np.any(np.asarray(s) < np.asarray(t) - 1e-15):
        raise ValueError("need s >= t")
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    dt = np.asarray(s, dtype=float) - np.asarray(t, dtype=float)
    shift = drift_rate(params) * dt + params.sigma * np.sqrt(np.maximum(dt, 0.0)) * np.asarray(g, dtype=float)
    interior = (x_arr > 0.0) & (x_arr < 1.0)
    z = np.where(interior, log_odds(np.where(interior, x_arr, 0.5)), 0.0)
    out = np.where(interior, logistic(z + shift), x_arr)
    return out if out.size > 1 or np.asarray(x).ndim else float(out[0])


def flow_sensitivity(t, x, s, g, params):
    """Derivative of the flow with respect to its starting fraction.

    Equals Y (1 - Y) / (x (1 - x)) at the realized Y; strictly positive for
    interior x and undefined at the endpoints.
    """
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0.0) or np.any(x_arr >= 1.0):
        raise ValueError("flow_sensitivity requires x strictly inside (0, 1)")
    y = flow(t, x, s, g, params)
    return y * (1.0 - y) / (x_arr * (1.0 - x_arr))


def density(s, y_state, t, x, params):
    """Transition density of the fraction at time s started from (t, x).

    Log-normal in odds space, expressed on the fraction scale.
    """
    dt = float(s) - float(t)
    if dt <= 0.0:
        raise ValueError("density requires s > t")
    y_arr = np.asarray(y_state, dtype=float)
    x = float(x)
    if not 0.0 < x < 1.0 or np.any(y_arr <= 0.0) or np.any(y_arr >= 1.0):
        raise ValueError("density requires interior states")
    sig = params.sigma * np.sqrt(dt)
    resid = log_odds(y_arr) - log_odds(x) - drift_rate(params) * dt
    norm = np.exp(-0.5 * (resid / sig) ** 2) / (sig * np.sqrt(2.0 * np.pi))
    return norm / (y_arr * (1.0 - y_arr))


def expect(t, x, s, integrand, rule: QuadratureRule, params):
    """Gauss-Hermite approximation of E[integrand(Y_s)] from (t, x).

    Evaluates pointwise when s = t or when x sits at an absorbing endpoint,
    avoiding the degenerate zero-variance normal.
    """
    dt = float(s) - float(t)
    if dt < 0.0:
        raise ValueError("need s >= t")
    x = float(x)
    if dt == 0.0 or x <= 0.0 or x >= 1.0:
        return float(np.asarray(integrand(np.atleast_1d(x))).reshape(-1)[0])
    z = log_odds(x) + drift_rate(params) * dt + params.sigma * np.sqrt(dt) * rule.nodes
    vals = np.asarray(integrand(logistic(z)), dtype=float)
    return float(vals @ rule.weights)


def _gauss_legendre_piece(a, b, n):
    """Gauss-Legendre nodes/weights on [a, b] (empty when a >= b)."""
    if b <= a:
        return np.empty(0), np.empty(0)
    x, w = np.polynomial.legendre.leggauss(n)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


def expect_split(t, x, s, integrand, threshold, rule: QuadratureRule, params):
    """Expectation of integrand(Y_s) split at a known threshold in Y.

    Returns the pair (below, above) with below = E[integrand(Y) ; Y < y*] and
    above = E[integrand(Y) ; Y > y*]. The threshold maps to a normal quantile
    in closed form (the flow is a monotone map of the Gaussian driver), and
    each smooth piece is integrated by Gauss-Legendre against the normal
    density, restoring spectral accuracy for kinked or discontinuous
    integrands.
    """
    dt = float(s) - float(t)
    if dt <= 0.0:
        raise ValueError("expect_split requires s > t")
    x = float(x)
    if not 0.0 < x < 1.0:
        raise ValueError("expect_split requires interior x")
    c = float(threshold)
    sig = params.sigma * np.sqrt(dt)
    z0 = log_odds(x) + drift_rate(params) * dt
    if c <= 0.0:
        g_star = -GAUSS_TAIL
    elif c >= 1.0:
        g_star = GAUSS_TAIL
    else:
        g_star = float(np.clip((log_odds(c) - z0) / sig, -GAUSS_TAIL, GAUSS_TAIL))

    n = max(len(rule), 8)
    out = []
    for lo, hi in ((-GAUSS_TAIL, g_star), (g_star, GAUSS_TAIL)):
        g, w = _gauss_legendre_piece(lo, hi, n)
        if g.size == 0:
            out.append(0.0)
            continue
        y = logistic(z0 + sig * g)
        phi = np.exp(-0.5 * g * g) / np.sqrt(2.0 * np.pi)
        out.append(float(np.asarray(integrand(y), dtype=float) @ (w * phi)))
    return out[0], out[1]


def crossing_quantile(t, x, s, threshold, params) -> float:
    """Standard-normal quantile at which the flow crosses ``threshold``."""
    dt = float(s) - float(t)
    if dt <= 0.0:
        raise ValueError("crossing_quantile requires s > t")
    sig = params.sigma * np.sqrt(dt)
    return (log_odds(threshold) - log_odds(x) - drift_rate(params) * dt) / sig


def prob_below(t, x, s, threshold, params) -> float:
    """P(Y_s < threshold) from (t, x), by the exact Gaussian quantile."""
    return float(ndtr(crossing_quantile(t, x, s, threshold, params)))
