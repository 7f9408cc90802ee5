"""Exact rational coefficients for Adams-Bashforth and multirate AB schemes.

Everything in this module is computed with ``fractions.Fraction``; floating
point enters only through the ``*_float`` helpers used by the integrator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial

import numpy as np

K_MAX = 20
P_MAX = 1000


class RationalPoly:
    """Polynomial with exact rational coefficients, stored ascending in degree."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        cs = [Fraction(c) for c in coeffs]
        while len(cs) > 1 and cs[-1] == 0:
            cs.pop()
        if not cs:
            cs = [Fraction(0)]
        self.coeffs = tuple(cs)

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def __call__(self, x):
        """Evaluate by Horner's rule; exact for Fraction/int arguments."""
        acc = Fraction(0)
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def derivative(self):
        if self.degree == 0:
            return RationalPoly([0])
        return RationalPoly([i * c for i, c in enumerate(self.coeffs)][1:])

    def antiderivative(self):
        """Antiderivative with zero constant term."""
        return RationalPoly([Fraction(0)] + [c / (i + 1) for i, c in enumerate(self.coeffs)])

    def __eq__(self, other):
        return isinstance(other, RationalPoly) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __repr__(self):
        terms = [f"({c})*x^{i}" for i, c in enumerate(self.coeffs) if c != 0]
        return " + ".join(terms) if terms else "0"


def _check_k(k):
    if not 1 <= k <= K_MAX:
        raise ValueError(f"step count k={k} outside supported range [1, {K_MAX}]")


def _check_p(p):
    if not 1 <= p <= P_MAX:
        raise ValueError(f"refinement ratio p={p} outside supported range [1, {P_MAX}]")


def _rising_factorial_poly(j):
    """Coefficients of x(x+1)...(x+j-1) / j! as a RationalPoly."""
    coeffs = [Fraction(1)]
    for t in range(j):
        # multiply by (x + t)
        shifted = [Fraction(0)] + coeffs
        coeffs = [shifted[i] + (t * coeffs[i] if i < len(coeffs) else 0)
                  for i in range(len(shifted))]
    return RationalPoly([c / factorial(j) for c in coeffs])


def gamma_tilde_poly(j):
    """Interpolation weight polynomial for derivative data at offset j.

    Equals x(x+1)...(x+j-1)/j!; the j = 0 case is the constant 1.
    """
    if j < 0:
        raise ValueError("j must be >= 0")
    return _rising_factorial_poly(j)


def gamma_poly(j):
    """Integrated interpolation weight polynomial; the antiderivative of
    :func:`gamma_tilde_poly` vanishing at 0."""
    if j < 0:
        raise ValueError("j must be >= 0")
    return gamma_tilde_poly(j).antiderivative()


def ab_coefficients(k):
    """Weights of the k-step Adams-Bashforth scheme as exact Fractions.

    Obtained by expanding the backward differences of the Newton form at
    unit step offset, so any order up to K_MAX is generated uniformly.
    """
    _check_k(k)
    g1 = [gamma_poly(j)(1) for j in range(k)]
    return tuple(
        sum(((-1) ** l) * comb(j, l) * g1[j] for j in range(l, k))
        for l in range(k)
    )


def _gamma_tilde_at(j, a, p):
    """gamma_tilde_j(a/p) without building the polynomial: the product
    (a)(a+p)...(a+(j-1)p) / (p^j * j!) stays in integer arithmetic."""
    num = 1
    for t in range(j):
        num *= a + t * p
    return Fraction(num, p**j * factorial(j))


def lts_beta(k, p):
    """p x k matrix of inner-substep weights for the multirate AB scheme.

    Row m gives the weights applied to the retained coarse states during
    substep m; computed exactly from the AB weights and the gamma_tilde
    polynomials evaluated at the fractional offsets (m - i)/p.
    """
    _check_k(k)
    _check_p(p)
    alpha = ab_coefficients(k)
    # g[l][a - a_min] = sum_{j>=l} (-1)^l C(j,l) gamma_tilde_j(a/p)
    a_min = -(k - 1)
    args = range(a_min, p)
    gt = [[_gamma_tilde_at(j, a, p) for a in args] for j in range(k)]
    g = [
        [sum(((-1) ** l) * comb(j, l) * gt[j][idx] for j in range(l, k))
         for idx in range(len(gt[0]))]
        for l in range(k)
    ]
    beta = tuple(
        tuple(
            sum(alpha[i] * g[l][(m - i) - a_min] for i in range(k))
            for l in range(k)
        )
        for m in range(p)
    )
    return beta


def verify_identities(k, p):
    """Check the algebraic identities the scheme relies on, exactly.

    Returns a dict with one boolean per identity plus a combined flag:
      * ``sum_alpha``:  the AB weights sum to one;
      * ``beta_row_sum``: summing the substep weights over m gives p * alpha;
      * ``reduction``: for p = 1 the substep weights equal the AB weights.
    """
    alpha = ab_coefficients(k)
    beta = lts_beta(k, p)
    report = {
        "sum_alpha": sum(alpha) == 1,
        "beta_row_sum": all(
            sum(beta[m][l] for m in range(p)) == p * alpha[l] for l in range(k)
        ),
    }
    if p == 1:
        report["reduction"] = all(beta[0][l] == alpha[l] for l in range(k))
    report["ok"] = all(report.values())
    return report


@dataclass(frozen=True)
class CoefficientSet:
    """All exact coefficients needed by the k-step scheme with ratio p."""

    k: int
    p: int
    alpha: tuple
    beta: tuple
    gamma: tuple = field(repr=False)
    gamma_tilde: tuple = field(repr=False)

    def alpha_float(self):
        cached = getattr(self, "_alpha_f", None)
        if cached is None:
            cached = np.array([float(a) for a in self.alpha])
            object.__setattr__(self, "_alpha_f", cached)
        return cached

    def beta_float(self):
        cached = getattr(self, "_beta_f", None)
        if cached is None:
            cached = np.array([[float(b) for b in row] for row in self.beta])
            object.__setattr__(self, "_beta_f", cached)
        return cached


def coefficient_set(k, p):
    """Build and validate the full coefficient set for (k, p).

    The row-sum identity has only been established computationally, so it
    is re-checked here on every construction rather than assumed.
    """
    report = verify_identities(k, p)
    if not report["ok"]:
        raise ArithmeticError(f"coefficient identities failed for k={k}, p={p}: {report}")
    return CoefficientSet(
        k=k,
        p=p,
        alpha=ab_coefficients(k),
        beta=lts_beta(k, p),
        gamma=tuple(gamma_poly(j) for j in range(k)),
        gamma_tilde=tuple(gamma_tilde_poly(j) for j in range(k)),
    )
