"""Resolvent integrals of the ODE y' = f(y) and their inverses.

All tail integrals are carried in scaled form.  For a numerator N(s),

    I_N(X) = int_X^inf N(s) / f(s) ds = e^{-X} J_N(X),
    J_N(X) = int_0^inf e^{-tau} N(X + tau) / L(X + tau) dtau,

so that J_N stays of moderate size for every X and nothing overflows.
G uses N = 1 and H uses N = A0 + log f(s).  J_N is tabulated on a uniform
node grid (step 0.5) by a downward recurrence of 16-point Gauss-Legendre
panels seeded with a 64-point Gauss-Laguerre rule at the top node; an
arbitrary X costs one partial panel plus a cached node value.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .nonlin import NonlinearityFamily


class DomainError(ValueError):
    """Argument outside the certified domain of a resolvent function."""


_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_LAG_X, _LAG_W = np.polynomial.laguerre.laggauss(64)


class _ScaledTail:
    """Tabulated J_N for one numerator N."""

    def __init__(self, fam: NonlinearityFamily, numerator, x_floor: float, step: float, n_nodes: int):
        self.fam = fam
        self.numerator = numerator
        self.x_floor = x_floor
        self.step = step
        self.nodes = x_floor + step * np.arange(n_nodes + 1)
        self.x_top = float(self.nodes[-1])
        self.values = self._build()

    def _phi(self, s):
        return self.numerator(s) / self.fam.L_log(s)

    def laguerre(self, X):
        X = np.atleast_1d(np.asarray(X, dtype=float))
        s = X[:, None] + _LAG_X[None, :]
        return self._phi(s) @ _LAG_W

    def panel(self, X, width):
        """int_0^width e^{-tau} N/L (X + tau) dtau, vectorised."""
        X = np.atleast_1d(np.asarray(X, dtype=float))
        width = np.broadcast_to(np.asarray(width, dtype=float), X.shape)
        tau = 0.5 * width[:, None] * (_GL_X[None, :] + 1.0)
        vals = np.exp(-tau) * self._phi(X[:, None] + tau)
        return 0.5 * width * (vals @ _GL_W)

    def _build(self):
        nodes = self.nodes
        panels = self.panel(nodes[:-1], self.step)
        values = np.empty_like(nodes)
        values[-1] = self.laguerre(nodes[-1])[0]
        decay = math.exp(-self.step)
        for k in range(nodes.size - 2, -1, -1):
            values[k] = panels[k] + decay * values[k + 1]
        return values

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        scalar = X.ndim == 0
        X = np.atleast_1d(X)
        out = np.empty_like(X)
        hi = X >= self.x_top
        if np.any(hi):
            out[hi] = self.laguerre(X[hi])
        lo = ~hi
        if np.any(lo):
            Xl = X[lo]
            k = np.ceil((Xl - self.x_floor) / self.step).astype(int)
            k = np.clip(k, 0, self.nodes.size - 1)
            d = self.nodes[k] - Xl
            out[lo] = self.panel(Xl, d) + np.exp(-d) * self.values[k]
        return out[0] if scalar else out


@dataclass
class ResolventTable:
    """Evaluators for G, H, Q and their inverses for one family.

    ``tol`` is the relative tolerance of the inversions; the forward integrals
    are accurate to a few ulps.  ``A0`` is the additive constant inside H.
    """

    fam: NonlinearityFamily
    tol: float = 1e-12
    A0: float = 3.0
    step: float = 0.5
    span: float = 60.0
    _tails: dict = field(default_factory=dict, init=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def __post_init__(self):
        if self.A0 + self.fam.log_f(self.x_floor) <= 0:
            raise ValueError(f"A0={self.A0} leaves A0 + log f <= 0 at the domain floor")

    @property
    def x_floor(self) -> float:
        return self.fam.x_floor

    @property
    def X_max(self) -> float:
        return self._tail("G").x_top

    def _tail(self, which: str) -> _ScaledTail:
        tail = self._tails.get(which)
        if tail is None:
            with self._lock:
                tail = self._tails.get(which)
                if tail is None:
                    n_nodes = int(round(self.span / self.step))
                    tail = _ScaledTail(self.fam, self._numerator(which), self.x_floor, self.step, n_nodes)
                    self._tails[which] = tail
        return tail

    def _numerator(self, which):
        if which == "G":
            return lambda s: np.ones_like(s)
        A0, fam = self.A0, self.fam
        return lambda s: A0 + fam.log_f(s)

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if np.any(~(X >= self.x_floor)):
            raise DomainError(f"argument below the domain floor {self.x_floor:.6g} (f not certified positive)")
        return X

    def G_node_table(self):
        """(x_floor, step, node values of e^X G(X)) for the compiled kernels."""
        tail = self._tail("G")
        return tail.x_floor, tail.step, tail.values

    # -- scaled forms -----------------------------------------------------
    def J_G(self, X):
        """e^X G(X)."""
        return self._tail("G")(self._check(X))

    def J_H(self, X):
        """e^X H(X)."""
        return self._tail("H")(self._check(X))

    def logG(self, X):
        X = self._check(X)
        return -X + np.log(self._tail("G")(X))

    def logH(self, X):
        X = self._check(X)
        return -X + np.log(self._tail("H")(X))

    # -- forward functions -----------------------------------------------
    def G(self, X):
        return np.exp(self.logG(X))

    def H(self, X):
        return np.exp(self.logH(X))

    def dG(self, X):
        return -1.0 / self.fam.f(self._check(X))

    def Q(self, X):
        """int_X^inf d eta / (eta^2 L(eta)); equal to G(log X)."""
        X = np.asarray(X, dtype=float)
        return self.G(np.log(X))

    def Q_at_log(self, x):
        return self.G(x)

    def logQ_at_log(self, x):
        return self.logG(x)

    def Q_scaled_at_log(self, x):
        """X Q(X) at X = e^x, finite for any x."""
        return self.J_G(x)

    # -- inverses ---------------------------------------------------------
    def first_order_G_inv(self, logY):
        """-log(Y L(1/Y)) written in log Y."""
        x = -np.asarray(logY, dtype=float)
        return x - self.fam.logL(np.maximum(x, self.x_floor))

    def G_inv(self, Y):
        return self._invert("G", np.log(np.asarray(Y, dtype=float)))

    def G_inv_log(self, logY):
        return self._invert("G", logY)

    def H_inv(self, Y):
        return self._invert("H", np.log(np.asarray(Y, dtype=float)))

    def H_inv_log(self, logY):
        return self._invert("H", logY)

    def _invert(self, which, logY):
        logY = np.asarray(logY, dtype=float)
        if logY.ndim:
            return self._invert_array(which, logY.ravel()).reshape(logY.shape)
        return self._invert_scalar(which, float(logY))

    def _invert_array(self, which: str, logY: np.ndarray) -> np.ndarray:
        """Vectorised form of _invert_scalar: same bracket, bisection and Newton steps."""
        tail = self._tail(which)
        numer = self._numerator(which)
        floor = self.x_floor
        log_top = -floor + math.log(tail(floor))
        if np.any(~(logY <= log_top)):
            raise DomainError(f"log Y={float(np.max(logY)):.6g} exceeds log {which}(floor)={log_top:.6g}")

        def phi(X, ly):
            return -X + np.log(tail(X)) - ly

        guess = np.maximum(self.first_order_G_inv(logY), floor)
        lo, hi = guess.copy(), guess.copy()
        width = np.ones_like(lo)
        need = phi(lo, logY) < 0
        while np.any(need):
            lo[need] = np.maximum(lo[need] - width[need], floor)
            width[need] *= 2
            need[need] = phi(lo[need], logY[need]) < 0
        width = np.ones_like(hi)
        need = phi(hi, logY) >= 0
        while np.any(need):
            hi[need] += width[need]
            width[need] *= 2
            need[need] = phi(hi[need], logY[need]) >= 0
        wide = hi - lo > 1e-3
        while np.any(wide):
            mid = 0.5 * (lo[wide] + hi[wide])
            up = phi(mid, logY[wide]) >= 0
            lo_w, hi_w = lo[wide], hi[wide]
            lo_w[up] = mid[up]
            hi_w[~up] = mid[~up]
            lo[wide], hi[wide] = lo_w, hi_w
            wide = hi - lo > 1e-3
        X = 0.5 * (lo + hi)
        active = np.ones(X.shape, dtype=bool)
        for _ in range(60):
            if not np.any(active):
                break
            Xa, la, ha = X[active], lo[active], hi[active]
            J = tail(Xa)
            val = -Xa + np.log(J) - logY[active]
            pos = val >= 0
            la = np.where(pos, Xa, la)
            ha = np.where(pos, ha, Xa)
            slope = -numer(Xa) / (self.fam.L_log(Xa) * J)
            Xn = Xa - val / slope
            bad = ~((la <= Xn) & (Xn <= ha))
            Xn[bad] = 0.5 * (la[bad] + ha[bad])
            done = np.abs(Xn - Xa) <= 0.1 * self.tol * np.maximum(1.0, np.abs(Xa))
            X[active], lo[active], hi[active] = Xn, la, ha
            idx = np.nonzero(active)[0]
            active[idx[done]] = False
        X[logY == log_top] = floor
        return X

    def _invert_scalar(self, which: str, logY: float) -> float:
        tail = self._tail(which)
        numer = self._numerator(which)
        fam = self.fam
        floor = self.x_floor
        log_top = -floor + math.log(tail(floor))
        if not logY <= log_top:
            raise DomainError(f"log Y={logY:.6g} exceeds log {which}(floor)={log_top:.6g}")

        def phi(X):
            return -X + math.log(tail(X)) - logY

        if logY == log_top:
            return floor
        # bracket around the first-order guess: phi decreasing, phi(lo) >= 0 > phi(hi)
        guess = max(float(self.first_order_G_inv(logY)), floor)
        lo, hi = guess, guess
        width = 1.0
        while phi(lo) < 0:
            lo = max(lo - width, floor)
            width *= 2
        width = 1.0
        while phi(hi) >= 0:
            hi = hi + width
            width *= 2
        while hi - lo > 1e-3:
            mid = 0.5 * (lo + hi)
            if phi(mid) >= 0:
                lo = mid
            else:
                hi = mid
        X = 0.5 * (lo + hi)
        for _ in range(60):
            val = phi(X)
            if val >= 0:
                lo = X
            else:
                hi = X
            # phi' = -N / (L J)
            slope = -float(numer(np.asarray(X))) / (float(fam.L_log(X)) * float(tail(X)))
            X_new = X - val / slope
            if not lo <= X_new <= hi:
                X_new = 0.5 * (lo + hi)
            if abs(X_new - X) <= 0.1 * self.tol * max(1.0, abs(X)):
                return X_new
            X = X_new
        return X


@dataclass(frozen=True)
class OdeSolution:
    """psi(t) = G^{-1}(T - t): the flat solution of y' = f(y) blowing up at T."""

    T: float
    table: ResolventTable

    def psi(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(~(t < self.T)):
            raise DomainError("psi requires t < T")
        return self.table.G_inv(self.T - t)

    def psi1(self, s):
        """psi(T - e^{-s}) = G^{-1}(e^{-s})."""
        s = np.asarray(s, dtype=float)
        if np.any(~(s > -math.log(self.T))):
            raise DomainError("psi1 requires s > -log T")
        return self.table.G_inv_log(-s)

    def log_h(self, s):
        p = self.psi1(s)
        return -np.asarray(s, dtype=float) + p + self.table.fam.logL(p)

    def h(self, s):
        """e^{-s} f(psi1(s)), evaluated in log space."""
        return np.exp(self.log_h(s))


# ---------------------------------------------------------------------------
# asymptotic lemma certification


def _tail_sup(v):
    v = np.asarray(v, dtype=float)
    return np.maximum.accumulate(v[::-1])[::-1]


def _decreasing(v, rtol=1e-9):
    v = np.asarray(v, dtype=float)
    return bool(np.all(np.diff(v) <= rtol * np.abs(v[:-1])))


def certify_asymptotic_lemmas(
    table: ResolventTable,
    X_grid=None,
    dam_logY=None,
    eps_values=(0.5, 0.1, 0.01),
    eps_X=(20.0, 50.0),
    C1: float = 3.0,
) -> dict:
    """Evaluate the asymptotic relations between G, H, f and their inverses.

    Each o(1) relation is certified as a decreasing trend (on the tail
    supremum, so oscillating families are judged by their envelope) with a
    threshold at the last grid point.
    """
    fam = table.fam
    if X_grid is None:
        X_grid = np.geomspace(max(10.0, table.x_floor + 1.0), 1000.0, 12)
    X = np.asarray(X_grid, dtype=float)
    if dam_logY is None:
        dam_logY = np.log([1e-4, 1e-8, 1e-12])
    dam_logY = np.asarray(dam_logY, dtype=float)

    JG = table.J_G(X)
    JH = table.J_H(X)
    L = fam.L_log(X)
    logG = -X + np.log(JG)
    r_G = np.abs(JG * L - 1.0)  # |G f - 1|
    r_H = np.abs(JH * L / X - 1.0)  # |H f / X - 1|
    r_HG = np.abs(JH / (JG * np.abs(logG)) - 1.0)  # |H / (G |log G|) - 1|

    def trend(values, threshold):
        env = _tail_sup(values)
        return {
            "values": values.tolist(),
            "envelope": env.tolist(),
            "decreasing": _decreasing(env),
            "last": float(values[-1]),
            "threshold": threshold,
            "passed": _decreasing(env) and float(values[-1]) < threshold,
        }

    report = {
        "family": fam.name,
        "params": dict(fam.params),
        "A0": table.A0,
        "X_grid": X.tolist(),
        "G_f_minus_1": trend(r_G, 0.1),
        "H_f_over_X_minus_1": trend(r_H, 0.1),
        "H_over_G_logG_minus_1": trend(r_HG, 0.1),
    }

    gaps = []
    for ly in dam_logY:
        ly_shift = ly - math.log(abs(ly))
        gaps.append(abs(float(table.H_inv_log(ly)) - float(table.G_inv_log(ly_shift))))
    gaps = np.array(gaps)
    report["H_inv_minus_G_inv_shifted"] = {
        "log_Y": dam_logY.tolist(),
        "gap": gaps.tolist(),
        "decreasing": _decreasing(gaps),
        "last": float(gaps[-1]),
        "threshold": 0.05,
        "passed": _decreasing(gaps) and float(gaps[-1]) < 0.05,
    }

    rows = []
    ok = True
    for Xe in eps_X:
        for eps in eps_values:
            f_ratio = float(np.exp(fam.log_f(Xe - eps) - fam.log_f(Xe)))
            G_ratio = float(np.exp(table.logG(Xe - eps) - table.logG(Xe)))
            f_ok = f_ratio >= (1.0 - eps) ** 2
            G_ok = G_ratio <= 1.0 + C1 * eps
            ok = ok and f_ok and G_ok
            rows.append({"X": Xe, "eps": eps, "f_ratio": f_ratio, "f_ok": f_ok, "G_ratio": G_ratio, "G_ok": G_ok})
    report["eps_controls"] = {"C1": C1, "rows": rows, "passed": ok}
    report["passed"] = all(
        report[k]["passed"]
        for k in ("G_f_minus_1", "H_f_over_X_minus_1", "H_over_G_logG_minus_1", "H_inv_minus_G_inv_shifted", "eps_controls")
    )
    return report
