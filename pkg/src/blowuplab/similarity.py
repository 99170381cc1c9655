"""Similarity variables y = r / sqrt(T - t), s = -log(T - t) and the
quantities measured on them: Gaussian-weighted norms, the energy, and the
nonautonomous defect term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import PchipInterpolator

from .nonlin import NonlinearityFamily
from .resolvent import OdeSolution

Y_TRUNC = 12.0


class FrameError(ValueError):
    pass


def surface_factor(n: int) -> float:
    """Area of the unit sphere in R^n (2 for n = 1: the two half-lines)."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


@dataclass(frozen=True)
class SimilarityFrame:
    s: float
    n: int
    y: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    w_y: np.ndarray = field(repr=False)
    y_max: float = Y_TRUNC
    psi1: float = 0.0

    @classmethod
    def from_function(cls, n, s, w_fn, dw_fn=None, y_max=Y_TRUNC, points=2401, psi1=0.0):
        y = np.linspace(0.0, min(y_max, Y_TRUNC), points)
        w = np.broadcast_to(np.asarray(w_fn(y), dtype=float), y.shape).copy()
        if dw_fn is None:
            dw = np.gradient(w, y, edge_order=2)
        else:
            dw = np.broadcast_to(np.asarray(dw_fn(y), dtype=float), y.shape).copy()
        return cls(s=float(s), n=n, y=y, w=w, w_y=dw, y_max=float(y_max), psi1=psi1)


def to_frame(snapshot, T_est: float, ode: OdeSolution, n: int, points: int = 2401) -> SimilarityFrame:
    """Rescale a snapshot (r, u at time t) to w(y, s) = u(y sqrt(T-t), t) - psi1(s)."""
    tau = T_est - snapshot.t
    if not tau > 0:
        raise FrameError("snapshot time is not before the blow-up time estimate")
    scale = math.sqrt(tau)
    r = np.asarray(snapshot.r, dtype=float)
    inside = int(np.count_nonzero(r <= scale))
    if inside < 8:
        # nodes near 0 scale like r ~ h_min k; ask for a finest spacing of scale/8
        raise FrameError(f"under-resolved frame: {inside} nodes in y <= 1, need 8 (finest spacing <= {scale / 8:.3g})")
    s = float(getattr(snapshot, "s", -math.log(tau)))
    psi1 = float(ode.psi1(s))
    y_max = min(r[-1] / scale, Y_TRUNC)
    y = np.linspace(0.0, y_max, points)
    interp = PchipInterpolator(r, snapshot.u)
    w = interp(y * scale) - psi1
    w_y = interp.derivative()(y * scale) * scale
    w_y[0] = 0.0
    return SimilarityFrame(s=s, n=n, y=y, w=w, w_y=w_y, y_max=float(r[-1] / scale), psi1=psi1)


def _radial_integral(frame: SimilarityFrame, integrand):
    y = frame.y
    rho = np.exp(-y * y / 4.0)
    weight = surface_factor(frame.n) * y ** (frame.n - 1) * rho
    return float(simpson(integrand * weight, x=y))


def tail_bound(frame: SimilarityFrame) -> float:
    """Crude bound for the weighted mass beyond the truncation radius."""
    yt = float(frame.y[-1])
    amp = 1.0 + float(np.max(np.abs(frame.w))) ** 2 + float(np.max(np.abs(frame.w_y))) ** 2
    return surface_factor(frame.n) * amp * (1.0 + yt) ** (frame.n + 1) * math.exp(-yt * yt / 8.0)


def weighted_norm(frame: SimilarityFrame, which: str = "L2rho") -> float:
    """Squared norm: int w^2 rho (L2rho) or int (w^2 + |w_y|^2) rho (H1rho)."""
    l2 = _radial_integral(frame, frame.w**2)
    if which == "L2rho":
        return l2
    if which == "H1rho":
        return l2 + _radial_integral(frame, frame.w_y**2)
    raise ValueError(f"unknown norm {which!r}")


def energy(frame: SimilarityFrame, C1: float = 1.0, gamma: float = 0.4):
    """(E, curlyE) with E = int (|w_y|^2 / 2 + w - e^w) rho, curlyE = E + C1 s^-gamma."""
    E = _radial_integral(frame, 0.5 * frame.w_y**2 + frame.w - np.exp(frame.w))
    return E, E + C1 * frame.s ** (-gamma)


@dataclass
class EnergyTrace:
    s_values: np.ndarray
    E_values: np.ndarray
    curlyE_values: np.ndarray
    gamma: float
    C1: float | None
    L2rho: np.ndarray
    H1rho: np.ndarray
    nonincreasing: bool
    bounded_below: bool
    tried: list

    def to_dict(self) -> dict:
        return {
            "s": self.s_values.tolist(),
            "E": self.E_values.tolist(),
            "curlyE": self.curlyE_values.tolist(),
            "gamma": self.gamma,
            "C1": self.C1,
            "nonincreasing": self.nonincreasing,
            "bounded_below": self.bounded_below,
            "C1_tried": self.tried,
        }


def _nonincreasing_within(v, rel):
    v = np.asarray(v, dtype=float)
    return bool(np.all(v[1:] <= v[:-1] + rel * np.abs(v[:-1])))


def energy_trace(frames, alpha: float, C1: float | None = None, rel_tol: float = 1e-3,
                 C1_ladder=(1.0, 10.0, 100.0, 1000.0)) -> EnergyTrace:
    """Energy along frames; without a fixed C1 the smallest passing rung is used."""
    gamma = alpha - 0.5
    s = np.array([f.s for f in frames])
    E = np.array([energy(f, 0.0, gamma)[0] for f in frames])
    ladder = [C1] if C1 is not None else list(C1_ladder)
    chosen, tried = None, []
    for c in ladder:
        curly = E + c * s ** (-gamma)
        ok = _nonincreasing_within(curly, rel_tol)
        tried.append({"C1": c, "passed": ok})
        if ok:
            chosen = c
            break
    c = chosen if chosen is not None else ladder[-1]
    curly = E + c * s ** (-gamma)
    # bounded below: finite, and the drop over the later half of the s range
    # is no larger than over the earlier half
    finite = bool(np.all(np.isfinite(curly)))
    mid = len(curly) // 2
    drop_early = curly[0] - curly[mid] if len(curly) > 2 else 0.0
    drop_late = curly[mid] - curly[-1] if len(curly) > 2 else 0.0
    bounded = finite and drop_late <= max(drop_early, 0.0) + rel_tol * abs(curly[mid])
    return EnergyTrace(
        s_values=s, E_values=E, curlyE_values=curly, gamma=gamma, C1=chosen,
        L2rho=np.array([weighted_norm(f, "L2rho") for f in frames]),
        H1rho=np.array([weighted_norm(f, "H1rho") for f in frames]),
        nonincreasing=chosen is not None, bounded_below=bool(bounded), tried=tried,
    )


def defect(frame: SimilarityFrame, fam: NonlinearityFamily, ode: OdeSolution, y_limit: float = 4.0):
    """H(s, y) = (h - 1)(e^w - 1) + h e^w (L(e^{psi1 + w}) / L(e^{psi1}) - 1) on y <= y_limit."""
    sel = frame.y <= y_limit
    w = frame.w[sel]
    h = float(ode.h(frame.s))
    p1 = frame.psi1
    # both logs on arrays so w = 0 gives an exact zero
    ratio_m1 = np.expm1(fam.logL(p1 + w) - fam.logL(np.full_like(w, p1)))
    return frame.y[sel], (h - 1.0) * np.expm1(w) + h * np.exp(w) * ratio_m1


def defect_decay(frames, fam: NonlinearityFamily, ode: OdeSolution, alpha: float, y_limit: float = 4.0) -> dict:
    if len(frames) < 4:
        raise ValueError("defect decay needs at least 4 frames")
    s = np.array([f.s for f in frames])
    maxH = np.array([float(np.max(np.abs(defect(f, fam, ode, y_limit)[1]))) for f in frames])
    scaled = maxH * s**alpha / np.log(s)
    non_growing = bool(np.all(maxH[1:] <= maxH[:-1] * (1 + 1e-9) + 1e-15))
    return {
        "s": s.tolist(),
        "max_abs_H": maxH.tolist(),
        "scaled": scaled.tolist(),
        "alpha": alpha,
        "non_growing": non_growing,
        "bounded": bool(np.all(np.isfinite(scaled))),
        "passed": non_growing and bool(np.all(np.isfinite(scaled))),
    }


def lower_decay(frames) -> dict:
    """s * ||w(s)||_{L2rho}: should stay bounded away from zero on blow-up runs."""
    s = np.array([f.s for f in frames])
    vals = s * np.sqrt([weighted_norm(f, "L2rho") for f in frames])
    return {
        "s": s.tolist(),
        "s_times_norm": vals.tolist(),
        "bounded_away": bool(vals[-1] >= 0.25 * np.max(vals)) if vals.size else False,
    }


def write_frame(frame: SimilarityFrame, path, chash: str = "none"):
    from .io import write_columns

    return write_columns(path, {"y": frame.y, "w": frame.w, "w_y": frame.w_y}, chash)


def write_energy(trace: EnergyTrace, path, chash: str = "none"):
    from .io import write_columns

    return write_columns(
        path,
        {"s": trace.s_values, "E": trace.E_values, "curlyE": trace.curlyE_values, "L2rho": trace.L2rho, "H1rho": trace.H1rho},
        chash,
    )
