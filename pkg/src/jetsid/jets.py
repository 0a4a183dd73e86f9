"""Truncated power-series arithmetic at t=0 and output-jet propagation.

The recurrent model dx/dt = tanh(A x + b u), y = c^T x maps an input
jet of order k-1 to an output jet of order k.  The map is evaluated
exactly (up to roundoff) by propagating truncated Taylor series of the
state through the integration recurrence, using the tanh derivative
identity s' = (1 - s^2) a' instead of symbolic differentiation.

Factorials up to k! are formed without an overflow guard; k <= 20 keeps
everything comfortably inside double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .bernstein import JetVector, bernstein_jet
from .errors import DomainError, ShapeError

if TYPE_CHECKING:
    from .signals import SampledSignal


@dataclass(frozen=True)
class TruncatedSeries:
    """Taylor coefficients (c_0, ..., c_K) of a function at t=0."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if c.ndim != 1 or c.size < 1:
            raise ShapeError(f"series needs a 1-d coefficient vector, got {c.shape}")
        if not np.isfinite(c).all():
            raise DomainError("series contains nonfinite coefficients")
        object.__setattr__(self, "coeffs", c)

    @property
    def order(self) -> int:
        return self.coeffs.size - 1


def _check_orders(a: TruncatedSeries, b: TruncatedSeries):
    if a.order != b.order:
        raise ShapeError(f"truncation orders differ: {a.order} vs {b.order}")


def series_add(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    _check_orders(a, b)
    return TruncatedSeries(a.coeffs + b.coeffs)


def series_scale(a: TruncatedSeries, s: float) -> TruncatedSeries:
    return TruncatedSeries(a.coeffs * float(s))


def series_mul(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    """Cauchy product truncated at the common order."""
    _check_orders(a, b)
    K = a.order
    return TruncatedSeries(np.convolve(a.coeffs, b.coeffs)[: K + 1])


def series_tanh(a: TruncatedSeries) -> TruncatedSeries:
    """tanh of a truncated series.

    Computed from s' = (1 - s^2) a' with s_0 = tanh(a_0), i.e.
    s_j = (1/j) * sum_{i<j} w_i * (j-i) * a_{j-i} with w = 1 - s^2.
    """
    K = a.order
    c = a.coeffs
    s = np.zeros(K + 1)
    w = np.zeros(K + 1)
    s[0] = math.tanh(c[0])
    w[0] = 1.0 - s[0] ** 2
    for j in range(1, K + 1):
        s[j] = np.dot(w[:j], np.arange(j, 0, -1) * c[j:0:-1]) / j
        w[j] = -np.dot(s[: j + 1], s[j::-1])
    return TruncatedSeries(s)


def jet_to_series(jet: JetVector) -> TruncatedSeries:
    """Derivative values to Taylor coefficients (divide by l!)."""
    facts = np.array([math.factorial(ell) for ell in range(jet.order + 1)])
    return TruncatedSeries(jet.derivs / facts)


def series_to_jet(series: TruncatedSeries) -> JetVector:
    """Taylor coefficients to derivative values (multiply by l!)."""
    facts = np.array([math.factorial(ell) for ell in range(series.order + 1)])
    return JetVector(series.coeffs * facts)


@dataclass(frozen=True)
class RnnParams:
    """Weights (A, b, c) and initial state xi of one recurrent model.

    Feasibility for a norm budget M (spectral norm of A and Euclidean
    norms of b, c, xi all <= M) is checked separately; the dataclass
    itself only requires finite entries of consistent shape.
    """

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise ShapeError(f"A must be square, got {A.shape}")
        for name, v in (("b", b), ("c", c), ("xi", xi)):
            if v.shape != (n,):
                raise ShapeError(f"{name} must have shape ({n},), got {v.shape}")
        for name, v in (("A", A), ("b", b), ("c", c), ("xi", xi)):
            if not np.isfinite(v).all():
                raise DomainError(f"{name} contains nonfinite entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "xi", xi)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def norms(self) -> dict[str, float]:
        """Spectral norm of A and Euclidean norms of b, c, xi."""
        return {
            "A": float(np.linalg.norm(self.A, 2)),
            "b": float(np.linalg.norm(self.b)),
            "c": float(np.linalg.norm(self.c)),
            "xi": float(np.linalg.norm(self.xi)),
        }

    def to_json_dict(self) -> dict:
        return {
            "A": self.A.flatten().tolist(),
            "b": self.b.tolist(),
            "c": self.c.tolist(),
            "xi": self.xi.tolist(),
            "n": self.n,
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "RnnParams":
        n = int(doc["n"])
        return RnnParams(
            A=np.asarray(doc["A"], dtype=float).reshape(n, n),
            b=np.asarray(doc["b"], dtype=float),
            c=np.asarray(doc["c"], dtype=float),
            xi=np.asarray(doc["xi"], dtype=float),
        )


def output_jet(params: RnnParams, input_jet: JetVector, k: int) -> JetVector:
    """Output jet (y(0), ..., y^(k)(0)) from an input jet of order k-1.

    The state series X obeys X_{j+1} = S_j / (j+1) with
    S = tanh(A X + b U) componentwise, X_0 = xi; the tanh series uses
    the same derivative identity as series_tanh.  All jet entries are
    exact in exact arithmetic.
    """
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    if input_jet.order != k - 1:
        raise ShapeError(f"input jet has order {input_jet.order}, expected {k - 1}")
    n = params.n
    facts = np.array([math.factorial(ell) for ell in range(k + 1)])
    u = np.zeros(k + 1)
    u[:k] = input_jet.derivs / facts[:k]

    X = np.zeros((k + 1, n))
    S = np.zeros((k, n))
    W = np.zeros((k, n))
    ARG = np.zeros((k, n))
    X[0] = params.xi
    for j in range(k):
        ARG[j] = params.A @ X[j] + params.b * u[j]
        if j == 0:
            S[0] = np.tanh(ARG[0])
        else:
            weights = np.arange(j, 0, -1)[:, None]
            S[j] = (W[:j] * (weights * ARG[j:0:-1])).sum(axis=0) / j
        W[j] = -(S[: j + 1] * S[j::-1]).sum(axis=0)
        if j == 0:
            W[0] += 1.0
        X[j + 1] = S[j] / (j + 1)
    y_coeffs = X @ params.c
    # entry 0 is c.xi by definition; the direct dot keeps it bit-exact
    y_coeffs[0] = params.c @ params.xi
    return JetVector(y_coeffs * facts)


def predicted_output_jet(params: RnnParams, input_signal: "SampledSignal", k: int) -> JetVector:
    """Output jet of the model fed the Bernstein lift of a sampled input.

    Evaluating the result with jet_poly_eval gives the model's predicted
    degree-k output polynomial for that input.
    """
    return output_jet(params, bernstein_jet(input_signal, k), k)
