"""Standard and local time-stepping Adams-Bashforth integrators.

The local scheme advances the coarse part with the k-step AB formula and
takes p inner substeps on the fine part; per global step it costs one
product with B(I-P) on the full state plus p products with B P restricted
to the fine columns.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import kernels

log = logging.getLogger(__name__)


class InstabilityError(RuntimeError):
    """Raised when the state norm blows past the divergence guard."""


@dataclass
class SchemeConfig:
    k: int
    p: int
    dt: float
    startup: str = "exact"       # "exact" | "rk4"
    method: str = "auto"         # "auto" | "ab" | "lts"

    def __post_init__(self):
        if not 1 <= self.k <= 20:
            raise ValueError("k must be in [1, 20]")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.startup not in ("exact", "rk4"):
            raise ValueError("startup must be 'exact' or 'rk4'")
        if self.method not in ("auto", "ab", "lts"):
            raise ValueError("method must be 'auto', 'ab' or 'lts'")

    def resolved_method(self, system):
        if self.method != "auto":
            return self.method
        return "lts" if (self.p > 1 and system.partition.n_fine > 0) else "ab"


class PreparedOperators:
    """Kernel-ready operators for one system: B, B(I-P), B P and the mask."""

    def __init__(self, system):
        b_coarse, b_fine = system.split
        self.b_full = kernels.prepare_csr(system.B)
        self.b_coarse = kernels.prepare_csr(b_coarse)
        self.b_fine = kernels.prepare_csr(b_fine)
        self.mask = system.partition.fine_mask.astype(float)
        self.dim = system.dim


def prepared_operators(system):
    cached = getattr(system, "_prepared_ops", None)
    if cached is None:
        cached = PreparedOperators(system)
        system._prepared_ops = cached
    return cached


class StateHistory:
    """Ring storage for the k retained coarse states, their cached coarse
    products, and the k-1 projected fine substep states.

    The coarse states and products live in (k, n) ring matrices addressed
    by a moving head; the fine substep states live in the sweep ring
    itself, which is carried across steps (their stale coarse components
    are annihilated by the masked operator, so no per-step projection
    copies are needed; the `fine_hist` property materializes the projected
    values on demand).
    """

    def __init__(self, k, p, dim, counters=None):
        self.k = k
        self.p = p
        self.dim = dim
        self.Y = np.zeros((k, dim))
        self.W = np.zeros((k, dim))
        self.ring = np.zeros((k, dim))
        self.head = 0            # row of y_n in Y/W
        self.offset = 0          # ring position of the current substep index
        self.n = 0
        self.n_filled = 0
        self.fine_filled = 0
        self.counters = counters if counters is not None else {"full": 0, "masked": 0}
        self._u_pre = np.empty((p, dim))
        self._mask = None

    # -- ordered views ------------------------------------------------------

    def _pos(self, l):
        return (self.head - l) % self.k

    @property
    def y_hist(self):
        return [self.Y[self._pos(l)] for l in range(min(self.n_filled, self.k))]

    @property
    def w_hist(self):
        return [self.W[self._pos(l)] for l in range(min(self.n_filled, self.k))]

    @property
    def fine_hist(self):
        if self._mask is None:
            return []
        return [
            self._mask * self.ring[(self.offset - j) % self.k]
            for j in range(1, min(self.fine_filled + 1, self.k))
        ]

    def order(self):
        """Row indices of Y/W in history order y_n, y_{n-1}, ..."""
        return [(self.head - l) % self.k for l in range(self.k)]

    # -- filling ------------------------------------------------------------

    def set_states(self, y_rows, w_rows, fine_rows, mask):
        """Install a warmed history: y_rows[l] = y_{n-l}, fine_rows[j-1] =
        the fine state at substep -j."""
        k = self.k
        if len(y_rows) != k or len(w_rows) != k:
            raise ValueError("need exactly k coarse states and products")
        self.head = 0
        self.offset = 0
        for l in range(k):
            self.Y[(-l) % k] = y_rows[l]
            self.W[(-l) % k] = w_rows[l]
        self.ring[0] = y_rows[0]
        for j, row in enumerate(fine_rows, start=1):
            self.ring[(-j) % k] = row
        self._mask = np.asarray(mask, dtype=float)
        self.n_filled = k
        self.fine_filled = len(fine_rows)

    def warmed(self, need_fine):
        ok = self.n_filled >= self.k
        if need_fine:
            ok = ok and self.fine_filled >= self.k - 1
        return ok

    def push_ab(self, y_new):
        """Rotate in a new state for the plain AB scheme (no products)."""
        self.head = (self.head + 1) % self.k
        self.Y[self.head] = y_new
        self.n += 1
        self.n_filled = min(self.n_filled + 1, self.k)


def ab_apply(prep, coeffs, dt, y_rows, counters=None):
    """One k-step AB update from the state rows y_{n-l}; returns y_{n+1}."""
    alpha = coeffs.alpha_float()
    s = alpha @ np.asarray(y_rows).reshape(len(y_rows), -1)
    v = kernels.csr_matvec(prep.b_full, s)
    if counters is not None:
        counters["full"] += 1
    return y_rows[0] + dt * v


def lts_apply(prep, coeffs, dt, y_rows, f_rows, w_rows=None, counters=None):
    """One local time-stepping update; returns (y_{n+1}, new fine rows).

    y_rows[l] = y_{n-l}; f_rows[j-1] = P y_{n-j/p}; w_rows[l] = B(I-P)
    y_{n-l} (recomputed here when not supplied, as in operator probing).
    This is the reference implementation on plain vectors; the in-place
    ring path below must stay numerically identical to it.
    """
    k, p = coeffs.k, coeffs.p
    dtau = dt / p
    if w_rows is None:
        w_rows = [kernels.csr_matvec(prep.b_coarse, y) for y in y_rows]
        if counters is not None:
            counters["full"] += k
    u_pre = coeffs.beta_float() @ np.asarray(w_rows).reshape(k, -1)
    ring = np.empty((k, prep.dim))
    ring[0] = y_rows[0]
    for j in range(1, k):
        ring[(-j) % k] = f_rows[j - 1]
    nmv = kernels.lts_sweep(prep.b_fine, ring, u_pre, coeffs.alpha_float(), dtau, p, 0)
    if counters is not None:
        counters["masked"] += nmv
    y_next = ring[p % k].copy()
    new_f = [prep.mask * ring[(p - j) % k] for j in range(1, k)]
    return y_next, new_f


def ab_step(system, coeffs, hist, dt):
    """Advance the standard AB scheme by one step, rotating the history."""
    if not hist.warmed(need_fine=False):
        raise RuntimeError("history is cold: warm_start must fill k states")
    prep = prepared_operators(system)
    y_next = ab_apply(prep, coeffs, dt, hist.y_hist, hist.counters)
    hist.push_ab(y_next)
    return y_next


def lts_ab_step(system, coeffs, hist, dt):
    """Advance the local time-stepping scheme by one step.

    The cached coarse products stay aligned with the state history: the
    single full-width product of this step is the one for the state being
    pushed, so W rows always hold B(I-P) applied to the matching Y rows.
    """
    if not hist.warmed(need_fine=True):
        raise RuntimeError("history is cold: warm_start must fill k states")
    if coeffs.k != hist.k or coeffs.p != hist.p:
        raise ValueError("coefficient set does not match the history shape")
    prep = prepared_operators(system)
    k, p = hist.k, hist.p
    # permute the (small) weight matrix instead of gathering W rows
    beta = coeffs.beta_float()
    beta_p = np.empty_like(beta)
    for l, r in enumerate(hist.order()):
        beta_p[:, r] = beta[:, l]
    np.matmul(beta_p, hist.W, out=hist._u_pre)
    nmv = kernels.lts_sweep(
        prep.b_fine, hist.ring, hist._u_pre, coeffs.alpha_float(),
        dt / p, p, hist.offset,
    )
    hist.counters["masked"] += nmv
    hist.offset = (hist.offset + p) % k
    hist.head = (hist.head + 1) % k
    hist.Y[hist.head] = hist.ring[hist.offset]
    kernels.csr_matvec(prep.b_coarse, hist.Y[hist.head], out=hist.W[hist.head])
    hist.counters["full"] += 1
    hist.n += 1
    # a view into the rotating history: copy to retain across steps
    return hist.Y[hist.head]


def rk4_step(prep, y, h):
    k1 = kernels.csr_matvec(prep.b_full, y)
    k2 = kernels.csr_matvec(prep.b_full, y + 0.5 * h * k1)
    k3 = kernels.csr_matvec(prep.b_full, y + 0.5 * h * k2)
    k4 = kernels.csr_matvec(prep.b_full, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def warm_start(system, config, coeffs=None, exact=None, y0=None):
    """Fill the history needed to take the first step.

    exact mode samples the provided state callable at t = -l dt and the
    fine substep times -l dt/p.  rk4 mode integrates forward from t = 0
    with substep dt/p and shifts indices so the multistep scheme starts at
    step k-1; it returns (history, start_step) with start_step = k-1.
    """
    from .coeffs import coefficient_set

    if coeffs is None:
        coeffs = coefficient_set(config.k, config.p)
    prep = prepared_operators(system)
    k, p, dt = config.k, config.p, config.dt
    hist = StateHistory(k, p, system.dim)
    if config.startup == "exact":
        if exact is None:
            raise ValueError("exact startup requires an exact state callable")
        y_rows = [np.asarray(exact(-l * dt), dtype=float) for l in range(k)]
        fine_rows = [
            prep.mask * np.asarray(exact(-j * dt / p), dtype=float)
            for j in range(1, k)
        ]
        start_step = 0
    else:
        if y0 is None:
            if exact is None:
                raise ValueError("rk4 startup needs y0 (or an exact callable for it)")
            y0 = np.asarray(exact(0.0), dtype=float)
        states = [np.asarray(y0, dtype=float)]
        for _ in range((k - 1) * p):
            states.append(rk4_step(prep, states[-1], dt / p))
        y_rows = [states[(k - 1 - l) * p] for l in range(k)]
        fine_rows = [prep.mask * states[(k - 1) * p - j] for j in range(1, k)]
        hist.startup_states = [states[i * p] for i in range(k)]
        start_step = k - 1
    w_rows = [kernels.csr_matvec(prep.b_coarse, y) for y in y_rows]
    hist.set_states(y_rows, w_rows, fine_rows, prep.mask)
    hist.n = start_step
    return hist, start_step


def run(system, config, T, observer=None, exact=None, y0=None, coeffs=None,
        guard=1e12):
    """Advance from t = 0 to T, calling observer(step, t, state) each global
    step.  Returns the final state.  Aborts with InstabilityError when the
    norm exceeds `guard` times the initial norm."""
    from .coeffs import coefficient_set

    if coeffs is None:
        coeffs = coefficient_set(config.k, config.p)
    dt = config.dt
    n_steps = int(round(T / dt)) if T > 0 else 0
    if abs(n_steps * dt - T) > 1e-9 * max(1.0, abs(T)):
        log.warning("T=%g snapped to %d steps of dt=%g (T_eff=%g)",
                    T, n_steps, dt, n_steps * dt)
    method = config.resolved_method(system)
    hist, start_step = warm_start(system, config, coeffs, exact=exact, y0=y0)
    norm0 = float(np.linalg.norm(hist.Y[hist.head]))
    limit = guard * max(norm0, 1e-30)
    if observer is not None:
        if config.startup == "rk4":
            # the rk4 warmup already produced global steps 0..start_step
            for i, y in enumerate(hist.startup_states):
                observer(i, i * dt, y)
        else:
            observer(0, 0.0, hist.Y[hist.head])
    if n_steps <= start_step:
        if config.startup == "rk4":
            return hist.startup_states[n_steps]
        return hist.Y[hist.head].copy()
    stepper = ab_step if method == "ab" else lts_ab_step
    check_every = max(1, min(64, n_steps // 1000 or 1))
    for step in range(start_step, n_steps):
        y = stepper(system, coeffs, hist, dt)
        t = (step + 1) * dt
        if observer is not None or (step + 1) % check_every == 0 or step + 1 == n_steps:
            norm = float(np.linalg.norm(y))
            if not np.isfinite(norm) or norm > limit:
                raise InstabilityError(
                    f"divergence at step {step + 1} (t={t:.6g}): |y|={norm:.3e} "
                    f"exceeds {guard:.1e} x initial"
                )
        if observer is not None:
            observer(step + 1, t, y)
    return hist.Y[hist.head].copy()
