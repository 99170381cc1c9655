"""Slowly varying factors L and the exponential nonlinearity f(s) = e^s L(e^s).

Every builtin is coded in the log argument ``x = log X`` because the physically
interesting arguments (X = e^psi with psi in the hundreds) overflow a double.
For each family we hand-code

    L(x),   Lx(x) = dL/dx = X L'(X),   Lxx(x) = d^2 L / dx^2,

from which ``X^2 L''(X) = Lxx - Lx`` and ``theta(X) = X L'(X) / L(X) = Lx / L``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

ArrayFn = Callable[[np.ndarray], np.ndarray]

BUILTIN_NAMES = (
    "pure_exp",
    "power_log",
    "log_power",
    "exp_shift",
    "oscillating_sin_log",
    "oscillating_cos_power",
    "amplitude_sin",
)

# integer codes shared with the compiled kernel
KIND_CODES = {name: i for i, name in enumerate(BUILTIN_NAMES)}


class FamilyError(ValueError):
    """Unknown builtin or parameters outside the admissible ranges."""


@dataclass(frozen=True)
class NonlinearityFamily:
    name: str
    params: Mapping[str, float]
    s_pos: float
    L_log: ArrayFn = field(repr=False)
    Lx_log: ArrayFn = field(repr=False)
    Lxx_log: ArrayFn = field(repr=False)
    logL_log: ArrayFn | None = field(default=None, repr=False)
    theta_log: ArrayFn | None = field(default=None, repr=False)
    dtheta_log: ArrayFn | None = field(default=None, repr=False)

    @property
    def x_floor(self) -> float:
        """Smallest log-argument where L (hence f) is certified positive."""
        return math.log(self.s_pos)

    @property
    def kind_code(self) -> int:
        return KIND_CODES[self.name]

    def param_vector(self) -> np.ndarray:
        """Flat parameter array in the layout expected by the compiled kernel."""
        p = self.params
        if self.name in ("power_log", "log_power"):
            return np.array([p["q"], p["K"], 0.0], dtype=float)
        if self.name == "exp_shift":
            return np.array([p["nu"], p["sign"], 0.0], dtype=float)
        if self.name == "oscillating_cos_power":
            return np.array([p["nu"], p["gamma"], 0.0], dtype=float)
        if self.name == "amplitude_sin":
            return np.array([p["nu"], p["a"], 0.0], dtype=float)
        return np.zeros(3)

    # -- log-argument evaluation (primary) -------------------------------
    def eval_at_log(self, x):
        """Return ``(L, X L'(X), X^2 L''(X))`` at ``X = e^x``."""
        x = np.asarray(x, dtype=float)
        L = self.L_log(x)
        Lx = self.Lx_log(x)
        Lxx = self.Lxx_log(x)
        return L, Lx, Lxx - Lx

    def logL(self, x):
        x = np.asarray(x, dtype=float)
        if self.logL_log is not None:
            return self.logL_log(x)
        return np.log(self.L_log(x))

    def theta_at_log(self, x):
        """theta(X) = X L'(X) / L(X) at X = e^x."""
        x = np.asarray(x, dtype=float)
        if self.theta_log is not None:
            return self.theta_log(x)
        return self.Lx_log(x) / self.L_log(x)

    def dtheta_at_log(self, x):
        """X theta'(X), i.e. d theta / d log X."""
        x = np.asarray(x, dtype=float)
        if self.dtheta_log is not None:
            return self.dtheta_log(x)
        L = self.L_log(x)
        th = self.Lx_log(x) / L
        return self.Lxx_log(x) / L - th * th

    # -- direct evaluation (small X only) --------------------------------
    def eval_at(self, X):
        """Return ``(L, L', L'')`` at X; overflows for huge X, prefer eval_at_log."""
        X = np.asarray(X, dtype=float)
        L, XL1, X2L2 = self.eval_at_log(np.log(X))
        return L, XL1 / X, X2L2 / (X * X)

    # -- the nonlinearity f(s) = e^s L(e^s) ------------------------------
    def f(self, s):
        s = np.asarray(s, dtype=float)
        return np.exp(s) * self.L_log(s)

    def df(self, s):
        s = np.asarray(s, dtype=float)
        return np.exp(s) * (self.L_log(s) + self.Lx_log(s))

    def d2f(self, s):
        s = np.asarray(s, dtype=float)
        return np.exp(s) * (self.L_log(s) + 2.0 * self.Lx_log(s) + self.Lxx_log(s))

    def log_f(self, s):
        s = np.asarray(s, dtype=float)
        return s + self.logL(s)

    def f_increasing_from(self, s_grid) -> float:
        """Smallest grid point beyond which f' > 0 on the rest of the grid."""
        s_grid = np.asarray(s_grid, dtype=float)
        bad = np.nonzero(~(self.df(s_grid) > 0))[0]
        if bad.size == 0:
            return float(s_grid[0])
        if bad[-1] + 1 >= s_grid.size:
            return math.inf
        return float(s_grid[bad[-1] + 1])


# ---------------------------------------------------------------------------
# builtins


def _const(value):
    return lambda x: np.full_like(np.asarray(x, dtype=float), value)


def _pure_exp(params):
    return dict(s_pos=1.0, L=_const(1.0), Lx=_const(0.0), Lxx=_const(0.0), logL=_const(0.0))


def _power_log(params):
    # f(s) = (s+K)^q e^s  ->  L(x) = (x+K)^q
    q, K = params["q"], params["K"]
    if K < 0:
        raise FamilyError("power_log requires K > 0, or K = 0 with q >= 1")
    if K == 0 and q < 1:
        raise FamilyError("power_log with K=0 requires q >= 1")

    def L(x):
        return (x + K) ** q

    def Lx(x):
        return q * (x + K) ** (q - 1.0)

    def Lxx(x):
        return q * (q - 1.0) * (x + K) ** (q - 2.0)

    def logL(x):
        return q * np.log(x + K)

    return dict(s_pos=1.0 if K > 0 else math.e, L=L, Lx=Lx, Lxx=Lxx, logL=logL)


def _log_power(params):
    # f(s) = log^q(s+K) e^s  ->  L(x) = log(x+K)^q
    q, K = params["q"], params["K"]
    if K < 1:
        raise FamilyError("log_power requires K > 1, or K = 1 with q >= 1")
    if K == 1 and q < 1:
        raise FamilyError("log_power with K=1 requires q >= 1")

    def L(x):
        return np.log(x + K) ** q

    def Lx(x):
        ell = np.log(x + K)
        return q * ell ** (q - 1.0) / (x + K)

    def Lxx(x):
        ell = np.log(x + K)
        return q * ((q - 1.0) * ell ** (q - 2.0) - ell ** (q - 1.0)) / (x + K) ** 2

    def logL(x):
        return q * np.log(np.log(x + K))

    return dict(s_pos=1.0 if K > 1 else math.e, L=L, Lx=Lx, Lxx=Lxx, logL=logL)


def _check_nu(nu):
    if not 0.0 < nu < 0.5:
        raise FamilyError(f"nu must lie in (0, 1/2), got {nu}")


def _exp_shift(params):
    # f(s) = exp(s +- (s+1)^nu)  ->  L(x) = exp(sign (x+1)^nu)
    nu, sign = params["nu"], params["sign"]
    _check_nu(nu)
    if sign not in (1.0, -1.0):
        raise FamilyError("exp_shift sign must be +1 or -1")

    def logL(x):
        return sign * (x + 1.0) ** nu

    def L(x):
        return np.exp(logL(x))

    def d1(x):
        return sign * nu * (x + 1.0) ** (nu - 1.0)

    def d2(x):
        return sign * nu * (nu - 1.0) * (x + 1.0) ** (nu - 2.0)

    def Lx(x):
        return L(x) * d1(x)

    def Lxx(x):
        g = d1(x)
        return L(x) * (d2(x) + g * g)

    return dict(s_pos=1.0, L=L, Lx=Lx, Lxx=Lxx, logL=logL, theta=d1, dtheta=d2)


def _oscillating_sin_log(params):
    # f(s) = (s+1)^{sin log(s+1)} e^s  ->  log L = sin(l) l,  l = log(x+1)
    def logL(x):
        ell = np.log(x + 1.0)
        return np.sin(ell) * ell

    def L(x):
        return np.exp(logL(x))

    def d1(x):
        ell = np.log(x + 1.0)
        return (np.cos(ell) * ell + np.sin(ell)) / (x + 1.0)

    def d2(x):
        ell = np.log(x + 1.0)
        num = (-np.sin(ell) * ell + 2.0 * np.cos(ell)) - (np.cos(ell) * ell + np.sin(ell))
        return num / (x + 1.0) ** 2

    def Lx(x):
        return L(x) * d1(x)

    def Lxx(x):
        g = d1(x)
        return L(x) * (d2(x) + g * g)

    return dict(s_pos=1.0, L=L, Lx=Lx, Lxx=Lxx, logL=logL, theta=d1, dtheta=d2)


def _oscillating_cos_power(params):
    # f(s) = exp(s + (s+1)^nu cos((s+1)^gamma))
    nu, gam = params["nu"], params["gamma"]
    if not (nu > 0 and gam > 0 and nu + gam < 0.5):
        raise FamilyError(f"oscillating_cos_power needs nu, gamma > 0 and nu + gamma < 1/2 (got nu+gamma={nu + gam})")

    def logL(x):
        z = x + 1.0
        return z**nu * np.cos(z**gam)

    def L(x):
        return np.exp(logL(x))

    def d1(x):
        z = x + 1.0
        c, s = np.cos(z**gam), np.sin(z**gam)
        return nu * z ** (nu - 1.0) * c - gam * z ** (nu + gam - 1.0) * s

    def d2(x):
        z = x + 1.0
        c, s = np.cos(z**gam), np.sin(z**gam)
        return (
            nu * (nu - 1.0) * z ** (nu - 2.0) * c
            - nu * gam * z ** (nu + gam - 2.0) * s
            - gam * (nu + gam - 1.0) * z ** (nu + gam - 2.0) * s
            - gam * gam * z ** (nu + 2.0 * gam - 2.0) * c
        )

    def Lx(x):
        return L(x) * d1(x)

    def Lxx(x):
        g = d1(x)
        return L(x) * (d2(x) + g * g)

    return dict(s_pos=1.0, L=L, Lx=Lx, Lxx=Lxx, logL=logL, theta=d1, dtheta=d2)


def _amplitude_sin(params):
    # f(s) = [1 + a sin((s+1)^nu)] e^s
    nu, a = params["nu"], params["a"]
    _check_nu(nu)
    if not abs(a) < 1.0:
        raise FamilyError(f"amplitude_sin needs |a| < 1, got a={a}")

    def L(x):
        return 1.0 + a * np.sin((x + 1.0) ** nu)

    def Lx(x):
        z = x + 1.0
        return a * nu * z ** (nu - 1.0) * np.cos(z**nu)

    def Lxx(x):
        z = x + 1.0
        return a * nu * (
            (nu - 1.0) * z ** (nu - 2.0) * np.cos(z**nu) - nu * z ** (2.0 * nu - 2.0) * np.sin(z**nu)
        )

    return dict(s_pos=1.0, L=L, Lx=Lx, Lxx=Lxx, logL=lambda x: np.log(L(x)))


_BUILDERS = {
    "pure_exp": (_pure_exp, {}),
    "power_log": (_power_log, {"q": 1.0, "K": 0.0}),
    "log_power": (_log_power, {"q": 1.0, "K": 1.0}),
    "exp_shift": (_exp_shift, {"nu": 0.25, "sign": 1.0}),
    "oscillating_sin_log": (_oscillating_sin_log, {}),
    "oscillating_cos_power": (_oscillating_cos_power, {"nu": 0.2, "gamma": 0.2}),
    "amplitude_sin": (_amplitude_sin, {"nu": 0.45, "a": 0.5}),
}


def make_builtin(name: str, params: Mapping[str, float] | None = None) -> NonlinearityFamily:
    """Build a registered family; missing parameters take their defaults."""
    if name not in _BUILDERS:
        raise FamilyError(f"unknown family {name!r}; known: {', '.join(BUILTIN_NAMES)}")
    builder, defaults = _BUILDERS[name]
    params = dict(params or {})
    unknown = set(params) - set(defaults)
    if unknown:
        raise FamilyError(f"{name} takes no parameter(s) {sorted(unknown)}")
    if params.get("sign") in ("+", "-"):
        params["sign"] = 1.0 if params["sign"] == "+" else -1.0
    try:
        merged = {k: float(params.get(k, v)) for k, v in defaults.items()}
    except (TypeError, ValueError) as exc:
        raise FamilyError(f"{name}: non-numeric parameter ({exc})") from None
    parts = builder(merged)
    return NonlinearityFamily(
        name=name,
        params=merged,
        s_pos=parts["s_pos"],
        L_log=parts["L"],
        Lx_log=parts["Lx"],
        Lxx_log=parts["Lxx"],
        logL_log=parts.get("logL"),
        theta_log=parts.get("theta"),
        dtheta_log=parts.get("dtheta"),
    )


def admissible_alpha(fam: NonlinearityFamily) -> float:
    """An exponent alpha > 1/2 for which |theta| log^alpha X -> 0.

    theta decays like (log X)^{-1} for the logarithmic families, so 0.9 is
    safe there; for the power-type families theta ~ (log X)^{e-1} with
    e = nu (or nu + gamma), which needs alpha < 1 - e.  We take the midpoint
    of (1/2, 1 - e).  For sin log, |theta| log^alpha X ~ log log X / (log X)^{1-alpha}
    peaks at log X = e^{1/(1-alpha)}; 0.7 puts the peak below log X = 30.
    """
    p = fam.params
    if fam.name in ("exp_shift", "amplitude_sin"):
        return 0.5 * (0.5 + 1.0 - p["nu"])
    if fam.name == "oscillating_cos_power":
        return 0.5 * (0.5 + 1.0 - p["nu"] - p["gamma"])
    if fam.name == "oscillating_sin_log":
        return 0.7
    return 0.9


def default_families() -> list[NonlinearityFamily]:
    """One representative of every builtin, with default parameters."""
    return [make_builtin(name) for name in BUILTIN_NAMES]


# ---------------------------------------------------------------------------
# certification of the slow-variation hypotheses


@dataclass
class SlowVariationReport:
    alpha: float
    log_grid: np.ndarray
    ratio1: np.ndarray
    ratio2: np.ndarray
    block_edges: np.ndarray
    block_max1: np.ndarray
    block_max2: np.ndarray
    verdict: dict

    @property
    def grid(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_grid)

    @property
    def passed(self) -> bool:
        return all(self.verdict.values())

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "log_grid": self.log_grid.tolist(),
            "ratio1": self.ratio1.tolist(),
            "ratio2": self.ratio2.tolist(),
            "block_edges_log_X": self.block_edges.tolist(),
            "block_max1": self.block_max1.tolist(),
            "block_max2": self.block_max2.tolist(),
            "verdict": self.verdict,
            "passed": self.passed,
        }


def _blocks_decreasing(maxima: np.ndarray, tiny: float = 1e-300) -> bool:
    """Strictly decreasing block maxima; identically zero counts as decreasing."""
    if np.all(maxima <= tiny):
        return True
    return bool(np.all(np.diff(maxima) < 0))


def certify_slow_variation(fam: NonlinearityFamily, alpha: float, X_grid=None, *, log_grid=None,
                           n_blocks: int = 4, block_points: int = 4096) -> SlowVariationReport:
    """Check the two decay conditions on theta over a grid of X values.

    ``ratio1 = |theta(X)| log^alpha X`` and ``ratio2 = |theta'(X)| X log X``
    are reported on the grid.  The verdict splits the grid's range into
    ``n_blocks`` blocks of equal width in log log X and requires the maximum of
    each ratio over a block (sampled densely) to fall from block to block, so
    oscillating families are judged by their envelope.  Pass ``log_grid``
    instead of ``X_grid`` for arguments beyond float range.
    """
    if log_grid is None:
        if X_grid is None:
            raise ValueError("give X_grid or log_grid")
        X_grid = np.asarray(X_grid, dtype=float)
        log_grid = np.log(X_grid)
    log_grid = np.asarray(log_grid, dtype=float)
    if log_grid.size < 8:
        raise ValueError(f"grid too short: {log_grid.size} points, need at least 8")
    if np.any(np.diff(log_grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    if log_grid[0] < max(fam.x_floor, 1.0):
        raise ValueError(f"grid starts below max(s_pos, e)={max(fam.s_pos, math.e):.6g}")
    if log_grid[-1] - log_grid[0] < 6 * math.log(10):
        raise ValueError("grid must span at least 6 decades")

    def ratios(x):
        return np.abs(fam.theta_at_log(x)) * x**alpha, np.abs(fam.dtheta_at_log(x)) * x

    ratio1, ratio2 = ratios(log_grid)
    edges = np.geomspace(log_grid[0], log_grid[-1], n_blocks + 1)
    m1, m2 = np.empty(n_blocks), np.empty(n_blocks)
    for b in range(n_blocks):
        r1, r2 = ratios(np.geomspace(edges[b], edges[b + 1], block_points))
        m1[b], m2[b] = np.max(r1), np.max(r2)
    verdict = {
        "theta_log_alpha_decreasing": _blocks_decreasing(m1),
        "dtheta_XlogX_decreasing": _blocks_decreasing(m2),
    }
    return SlowVariationReport(alpha, log_grid, ratio1, ratio2, edges, m1, m2, verdict)


@dataclass
class UniformRatioReport:
    alpha: float
    log_s: np.ndarray
    ratios: np.ndarray
    threshold_log_s: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "log_s": self.log_s.tolist(),
            "ratios": self.ratios.tolist(),
            "threshold_log_s": self.threshold_log_s,
            "passed": self.passed,
        }


def certify_uniform_ratio(fam: NonlinearityFamily, alpha: float, log_s_grid, n_lambda: int = 201, slack: float = 0.05) -> UniformRatioReport:
    """Sweep |L(lambda s)/L(s) - 1| log^alpha s / (4 |log lambda|) over the window
    |log lambda| <= log^alpha(s) / 8 and report its max per s.

    Works on ``log s``; the pass threshold is the first grid point from which
    every later ratio stays below 1 + slack.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    xs = np.asarray(log_s_grid, dtype=float)
    if np.any(xs < fam.x_floor):
        raise ValueError("grid below s_pos")
    m = max(n_lambda // 2, 1)
    k = np.concatenate((np.arange(-m, 0), np.arange(1, m + 1)))
    ratios = np.empty_like(xs)
    for i, x in enumerate(xs):
        half_width = x**alpha / 8.0
        # mu = log lambda on nonzero multiples of half_width / m, so no mu sits at rounding level
        mu = half_width * k / m
        # keep lambda s above s_pos so that L stays on its certified domain
        mu = mu[x + mu >= fam.x_floor]
        rel = np.abs(np.expm1(fam.logL(x + mu) - fam.logL(x)))
        ratios[i] = np.max(rel * x**alpha / (4.0 * np.abs(mu)))
    ok = ratios <= 1.0 + slack
    threshold = math.inf
    if ok[-1]:
        bad = np.nonzero(~ok)[0]
        threshold = float(xs[bad[-1] + 1]) if bad.size else float(xs[0])
    return UniformRatioReport(alpha, xs, ratios, threshold, bool(np.all(ok)))
