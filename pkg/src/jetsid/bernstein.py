"""Bernstein polynomial lifting of sampled signals.

A signal sampled at the m+1 points i*T/m defines the degree-m Bernstein
polynomial.  This module evaluates it stably (de Casteljau recursion),
extracts its jet at t=0 via exact endpoint forward differences, rebuilds
polynomial signals from jets, and certifies the uniform approximation
error from a modulus of continuity.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np

from .errors import DomainError, ShapeError

if TYPE_CHECKING:
    from .signals import SampledSignal

# Endpoint forward differences amplify sample noise roughly like 2^l, so
# jet extraction is only supported up to this many samples.
MAX_WELL_CONDITIONED_K = 20


@dataclass(frozen=True)
class JetVector:
    """Derivative values (f(0), f'(0), ..., f^(m)(0)) at t=0."""

    derivs: np.ndarray

    def __post_init__(self):
        d = np.atleast_1d(np.asarray(self.derivs, dtype=float))
        if d.ndim != 1 or d.size < 1:
            raise ShapeError(f"jet needs a 1-d derivative vector, got shape {d.shape}")
        if not np.isfinite(d).all():
            raise DomainError("jet contains nonfinite entries")
        object.__setattr__(self, "derivs", d)

    @property
    def order(self) -> int:
        return self.derivs.size - 1

    def to_json_dict(self) -> dict:
        return {"order": self.order, "derivs": self.derivs.tolist()}

    @staticmethod
    def from_json_dict(doc: dict) -> "JetVector":
        jet = JetVector(np.asarray(doc["derivs"], dtype=float))
        if jet.order != int(doc["order"]):
            raise ShapeError(f"order field {doc['order']} != {jet.order} derivatives")
        return jet


def _decasteljau(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Evaluate the Bernstein form with coefficients `coeffs` at x in [0,1]."""
    b = np.repeat(coeffs[:, None], x.size, axis=1)
    one_minus = 1.0 - x
    for _ in range(coeffs.size - 1):
        b = b[:-1] * one_minus + b[1:] * x
    return b[0]


def bernstein_eval(signal: "SampledSignal", t):
    """Degree-m Bernstein polynomial of the signal, evaluated at t.

    Accepts a scalar or an array of times, all required in [0, T].
    """
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    T = signal.horizon_T
    if ts.size and (ts.min() < 0.0 or ts.max() > T):
        raise DomainError(f"evaluation times outside [0, {T}]")
    out = _decasteljau(signal.values, ts / T)
    return float(out[0]) if np.isscalar(t) or np.asarray(t).ndim == 0 else out


def bernstein_jet(signal: "SampledSignal", k: int) -> JetVector:
    """Jet of order k-1 at t=0 of the degree-(k-1) Bernstein polynomial.

    The signal must hold exactly k samples at the nodes i*T/(k-1).  Entry
    l is (k-1)!/(k-1-l)! * T^(-l) times the l-th forward difference of
    the samples, which equals the l-th derivative of the Bernstein
    polynomial at 0; the map is linear in the samples.
    """
    if k < 2:
        raise DomainError(f"k must be >= 2, got {k}")
    vals = signal.values
    if vals.size != k:
        raise ShapeError(f"expected {k} samples, got {vals.size}")
    if k > MAX_WELL_CONDITIONED_K:
        warnings.warn(
            f"jet extraction from {k} samples amplifies noise by ~2^{k-1}; "
            f"results beyond k={MAX_WELL_CONDITIONED_K} are ill-conditioned",
            RuntimeWarning,
            stacklevel=2,
        )
    m = k - 1
    T = signal.horizon_T
    derivs = np.empty(k)
    diff = vals
    for ell in range(k):
        derivs[ell] = math.perm(m, ell) * diff[0] / T**ell
        diff = np.diff(diff)
    return JetVector(derivs)


def jet_poly_eval(jet: JetVector, t):
    """Evaluate sum_l derivs[l] * t^l / l!, the jet's Taylor polynomial.

    Accepts a scalar or an array of times.
    """
    factorials = np.array([math.factorial(ell) for ell in range(jet.order + 1)])
    coeffs = jet.derivs / factorials
    out = np.polynomial.polynomial.polyval(np.asarray(t, dtype=float), coeffs)
    return float(out) if np.isscalar(t) or np.asarray(t).ndim == 0 else out


def bernstein_error_bound(omega: Callable[[float], float], k: int, T: float) -> float:
    """Certified uniform error 2*omega(T/sqrt(k)) of degree-k lifting.

    omega must be a nondecreasing modulus of continuity with omega(0)=0.
    """
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    return 2.0 * omega(T / math.sqrt(k))
