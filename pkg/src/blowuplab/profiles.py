"""Closed-form blow-up profile predictions and their comparison with runs.

All four predictions are compositions of G^{-1} with elementary maps:

    global        G^{-1}(T - t + |x|^2 / (4 |log |x|^2|))
    final         G^{-1}(|x|^2 / (4 |log |x|^2|))
    refined       G^{-1}((T - t)(1 + |xi|^2 / 4)),  x = xi sqrt((T-t) |log(T-t)|)
    second order  psi(t) + (2n - |y|^2) / (4 |log(T - t)|),  x = y sqrt(T - t)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .resolvent import ResolventTable


class ProfileError(ValueError):
    pass


def _spatial_term(x_abs):
    """|x|^2 / (4 |log |x|^2|), zero at the origin."""
    x = np.asarray(x_abs, dtype=float)
    out = np.zeros_like(x)
    nz = x > 0
    out[nz] = x[nz] ** 2 / (4.0 * np.abs(2.0 * np.log(x[nz])))
    return out


@dataclass(frozen=True)
class ProfilePrediction:
    table: ResolventTable
    T: float
    n: int
    validity: float = 0.3
    K: float = 2.0

    def _check_x(self, x_abs):
        x = np.asarray(x_abs, dtype=float)
        if np.any(x < 0) or np.any(x >= 1):
            raise ProfileError("profile formulas need 0 <= |x| < 1")
        return x

    def _check_t(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(~(t < self.T)):
            raise ProfileError("profile formulas need t < T")
        return t

    def psi(self, t):
        return self.table.G_inv(self.T - self._check_t(t))

    def global_profile(self, x_abs, t):
        x = self._check_x(x_abs)
        t = np.asarray(t, dtype=float)
        if np.any(t > self.T):
            raise ProfileError("global profile needs t <= T")
        arg = self.T - t + _spatial_term(x)
        if np.any(arg <= 0):
            raise ProfileError("global profile at (0, T) is infinite")
        return self.table.G_inv(arg)

    def final_profile(self, x_abs):
        x = self._check_x(x_abs)
        if np.any(x == 0):
            raise ProfileError("final profile needs |x| > 0")
        return self.table.G_inv(_spatial_term(x))

    def refined_profile(self, xi_abs, t):
        xi = np.asarray(xi_abs, dtype=float)
        if np.any(xi < 0) or np.any(xi > self.K):
            raise ProfileError(f"refined profile validity is |xi| <= {self.K}")
        tau = self.T - self._check_t(t)
        return self.table.G_inv(tau * (1.0 + xi**2 / 4.0))

    def refined_sample_point(self, xi_abs, t):
        tau = self.T - np.asarray(t, dtype=float)
        return np.asarray(xi_abs, dtype=float) * np.sqrt(tau * np.abs(np.log(tau)))

    def second_order(self, y_abs, t):
        t = self._check_t(t)
        tau = self.T - t
        y = np.asarray(y_abs, dtype=float)
        return self.table.G_inv(tau) + (2 * self.n - y**2) / (4.0 * np.abs(np.log(tau)))


def _decreasing(v):
    v = np.asarray(v, dtype=float)
    return bool(v.size >= 2 and np.all(np.diff(v) < 0))


def _toward(v, target):
    d = np.abs(np.asarray(v, dtype=float) - target)
    return bool(d.size >= 2 and np.all(np.diff(d) < 0))


def compare(pred: ProfilePrediction, snapshots, T_est: float, s_values=None, rtol_T: float = 1e-12) -> dict:
    """Sup-norm gaps between snapshots (objects with s, t, r, u) and each prediction."""
    if abs(T_est - pred.T) > rtol_T * abs(T_est):
        raise ProfileError(f"prediction T={pred.T!r} does not match the run's T_est={T_est!r}")
    rows = []
    per_kind = {"global": [], "refined": [], "second_order": []}
    centre = []
    for snap in snapshots:
        if s_values is not None and not any(abs(snap.s - s) < 1e-9 for s in s_values):
            continue
        tau = pred.T - snap.t
        r, u = snap.r, snap.u
        interp = PchipInterpolator(r, u)
        # global: annulus 2 tau <= |x|^2 <= validity^2
        ring = (r**2 >= 2 * tau) & (r <= pred.validity)
        g_gap = float(np.max(np.abs(u[ring] - pred.global_profile(r[ring], snap.t)))) if np.any(ring) else math.nan
        # refined: |xi| <= K
        xi = np.linspace(0.0, pred.K, 201)
        x = pred.refined_sample_point(xi, snap.t)
        x_ok = x <= r[-1]
        r_gap = float(np.max(np.abs(interp(x[x_ok]) - pred.refined_profile(xi[x_ok], snap.t))))
        # second order: |y| <= 3, rescaled by 4 |log tau|
        y = np.linspace(0.0, 3.0, 151)
        y_ok = y * math.sqrt(tau) <= r[-1]
        psi = float(pred.table.G_inv(tau))
        scaled = (interp(y[y_ok] * math.sqrt(tau)) - psi) * 4.0 * abs(math.log(tau))
        so_gap = float(np.max(np.abs(scaled - (2 * pred.n - y[y_ok] ** 2))))
        c0 = float(scaled[0])
        rows.append((snap.s, "global", "annulus", g_gap, math.nan))
        rows.append((snap.s, "refined", f"|xi|<={pred.K:g}", r_gap, math.nan))
        rows.append((snap.s, "second_order", "|y|<=3", so_gap, c0))
        per_kind["global"].append(g_gap)
        per_kind["refined"].append(r_gap)
        per_kind["second_order"].append(so_gap)
        centre.append((snap.s, c0))
    s_list = [c[0] for c in centre]
    c_vals = [c[1] for c in centre]
    verdicts = {
        "global_decreasing": _decreasing(per_kind["global"]),
        "refined_decreasing": _decreasing(per_kind["refined"]),
        "second_order_centre_toward_2n": _toward(c_vals, 2 * pred.n),
        "second_order_centre_last": c_vals[-1] if c_vals else math.nan,
    }
    table_rows = []
    for s, kind, region, gap, resc in rows:
        key = {"global": "global_decreasing", "refined": "refined_decreasing", "second_order": "second_order_centre_toward_2n"}[kind]
        table_rows.append((s, kind, region, gap, resc, "pass" if verdicts[key] else "fail"))
    return {"s": s_list, "gaps": per_kind, "centre_rescaled": c_vals, "verdicts": verdicts, "rows": table_rows}


def smallest_resolved_radius(r, u_last, u_earlier, tol: float = 1e-2) -> float:
    """Innermost radius of the region where u has stopped moving.

    ``u_earlier`` is the solution one decade of T - t before ``u_last``; a node
    counts as settled when the two differ by at most ``tol``.  The returned
    radius is the smallest one beyond which every node is settled.
    """
    r = np.asarray(r, dtype=float)
    moving = np.abs(np.asarray(u_last) - np.asarray(u_earlier)) > tol
    moving[0] = True
    k = int(np.nonzero(moving)[0][-1]) + 1
    if k >= r.size:
        raise ProfileError("no settled region at the last time")
    return float(r[k])


def final_profile_gap(pred: ProfilePrediction, r, u_last, u_earlier, tol: float = 1e-2, points: int = 11) -> dict:
    """|u(x, t_last) / final_profile(x) - 1| over the decade ending at the smallest resolved radius."""
    r_min = smallest_resolved_radius(r, u_last, u_earlier, tol)
    if 10 * r_min >= min(pred.validity, r[-1]):
        raise ProfileError("no full decade of resolved radii inside the validity region")
    x = np.geomspace(10 * r_min, r_min, points)  # ordered toward the origin
    u = PchipInterpolator(r, u_last)(x)
    rel = np.abs(u / pred.final_profile(x) - 1.0)
    return {"x": x.tolist(), "rel_gap": rel.tolist(), "decreasing": _decreasing(rel), "r_min": r_min}


def write_comparison(report: dict, path, chash: str = "none"):
    from .io import write_csv

    return write_csv(path, ["s", "kind", "region", "sup_gap", "rescaled_gap", "verdict"], report["rows"], chash)
