"""Radial equilibria of the rescaled equation:

    z'' + ((n-1)/r - r/2) z' + e^z - 1 = 0,   z'(0) = 0,  z(0) = a.

Near infinity every solution is a combination of a slow branch
(z ~ -2 log r + C) and a fast branch growing like e^{r^2/4}.  Members of the
equilibrium set are the shots with no fast component.  A double-precision
shot cannot stay on the slow branch past r ~ 10 (the fast branch amplifies
rounding by e^{r^2/4}), so members are located by bisection on the sign of
the fast component and their tail is continued by a boundary value solve
with the slow-branch condition imposed at r_max.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_bvp, solve_ivp

EPS_START = 1e-6
RISE_TOL = 1e-8
SLOPE_CAP = 1e3

MEMBER = "member_of_S"
UNBOUNDED = "derivative_unbounded"
INCREASING = "increasing_somewhere"
ESCAPED = "escaped"


def _rhs(n):
    def f(r, v):
        z, p = v
        return [p, -((n - 1) / r - r / 2) * p - math.expm1(z)]

    return f


def series_start(n: int, a: float, eps: float = EPS_START):
    """z and z' at r = eps from z = a - (e^a - 1) r^2 / (2n) + O(r^4)."""
    c = math.expm1(a) / (2 * n)
    return a - c * eps**2, -2 * c * eps


@dataclass
class ProfileShot:
    n: int
    a: float
    r_max: float
    r: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)
    z_r: np.ndarray = field(repr=False)
    classification: str
    r_stop: float
    method: str = "shot"
    junction: float | None = None
    C_far: float | None = None
    _dense: object = field(default=None, repr=False)

    @property
    def g(self) -> np.ndarray:
        return 1.0 + 0.5 * self.r * self.z_r

    def evaluate(self, rho):
        """(z, z', z'') at radii rho (member shots only)."""
        if self._dense is None:
            raise ValueError("no dense representation for this shot")
        return self._dense(np.asarray(rho, dtype=float))


def _classify_arrays(r, z, z_r, a):
    if a < 0:
        return ESCAPED
    if np.any(z_r > RISE_TOL):
        return INCREASING
    if np.any(np.abs(z_r) > SLOPE_CAP) or not np.all(np.isfinite(z_r)):
        return UNBOUNDED
    return MEMBER


def shoot(n: int, a: float, r_max: float = 40.0, rtol: float = 1e-12, atol: float = 1e-14, dense: bool = False) -> ProfileShot:
    if a < 0:
        raise ValueError("initial value a must be >= 0")
    if r_max < 20:
        raise ValueError("r_max must be >= 20")
    if a == 0.0:
        r = np.linspace(0.0, r_max, 401)
        zeros = np.zeros_like(r)
        shot = ProfileShot(n, a, r_max, r, zeros, zeros.copy(), MEMBER, r_max, C_far=None)
        shot._dense = lambda rho: (np.zeros_like(rho), np.zeros_like(rho), np.zeros_like(rho))
        return shot

    def rising(r, v):
        return v[1] - RISE_TOL

    rising.terminal = True
    rising.direction = 1

    def steep(r, v):
        return abs(v[1]) - SLOPE_CAP

    steep.terminal = True
    steep.direction = 1

    z0, p0 = series_start(n, a)
    sol = solve_ivp(_rhs(n), (EPS_START, r_max), [z0, p0], method="DOP853", rtol=rtol, atol=atol,
                    events=(rising, steep), dense_output=dense)
    r = np.concatenate(([0.0], sol.t))
    z = np.concatenate(([a], sol.y[0]))
    zr = np.concatenate(([0.0], sol.y[1]))
    if sol.status == -1:
        cls = ESCAPED
    elif sol.t_events[0].size:
        cls = INCREASING
    elif sol.t_events[1].size:
        cls = UNBOUNDED
    else:
        cls = _classify_arrays(r, z, zr, a)
    shot = ProfileShot(n, a, r_max, r, z, zr, cls, float(sol.t[-1]))
    if dense:
        shot._dense = sol.sol
    return shot


def fast_sign(n: int, a: float, **kw) -> int:
    """+1 if the shot eventually rises, -1 if it dives, 0 if it stays bounded."""
    c = shoot(n, a, **kw).classification
    return {INCREASING: 1, UNBOUNDED: -1}.get(c, 0)


def scan(n: int, a_values=None, r_max: float = 40.0, rtol: float = 1e-12, jobs: int = 1) -> list:
    if a_values is None:
        a_values = np.linspace(0.05, 10.0, 200)
    a_values = [float(a) for a in a_values]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(jobs) as ex:
            return list(ex.map(_shoot_args, [(n, a, r_max, rtol) for a in a_values]))
    return [shoot(n, a, r_max, rtol) for a in a_values]


def _shoot_args(args):
    return shoot(*args)


def bisect_transition(n: int, a_lo: float, a_hi: float, rtol: float = 1e-12, max_iter: int = 200):
    """Shrink [a_lo, a_hi] around a sign change of the fast component."""
    s_lo = fast_sign(n, a_lo, rtol=rtol)
    s_hi = fast_sign(n, a_hi, rtol=rtol)
    if s_lo == s_hi or 0 in (s_lo, s_hi):
        raise ValueError("interval does not bracket a transition")
    for _ in range(max_iter):
        mid = 0.5 * (a_lo + a_hi)
        if mid in (a_lo, a_hi):
            break
        s_mid = fast_sign(n, mid, rtol=rtol)
        if s_mid == s_lo:
            a_lo = mid
        elif s_mid == s_hi:
            a_hi = mid
        else:
            break
    return a_lo, a_hi


def build_member(n: int, a_lo: float, a_hi: float, r_max: float = 40.0, rtol: float = 1e-12, sep_tol: float = 1e-7) -> ProfileShot:
    """Member profile from a tight bracket: trusted shot plus slow-branch tail."""
    lo = shoot(n, a_lo, r_max, rtol, dense=True)
    hi = shoot(n, a_hi, r_max, rtol, dense=True)
    r_end = min(lo.r_stop, hi.r_stop)
    grid = np.linspace(EPS_START, r_end, 4001)
    zl, pl = lo._dense(grid)
    zh, ph = hi._dense(grid)
    apart = np.nonzero((np.abs(zl - zh) > sep_tol) | (np.abs(pl - ph) > sep_tol))[0]
    r_c = grid[apart[0]] if apart.size else r_end
    r_c = 0.8 * r_c
    a_mid = 0.5 * (a_lo + a_hi)
    head = shoot(n, a_mid, r_max, rtol, dense=True)
    z_c, p_c = head._dense(np.array([r_c]))
    z_c, p_c = float(z_c[0]), float(p_c[0])

    def fun(r, v):
        z, p = v
        return np.vstack([p, -((n - 1) / r - r / 2) * p - np.expm1(z)])

    def bc(va, vb):
        return np.array([va[0] - z_c, vb[1] + 2.0 * (-np.expm1(vb[0])) / r_max])

    r_tail = np.linspace(r_c, r_max, 400)
    # initial guess: the slow branch matched to z(r_c)
    guess_z = z_c - 2.0 * np.log(r_tail / r_c)
    guess = np.vstack([guess_z, -2.0 / r_tail])
    bvp = solve_bvp(fun, bc, r_tail, guess, tol=1e-10, max_nodes=200000)
    if not bvp.success:
        raise RuntimeError(f"tail continuation failed: {bvp.message}")
    junction = abs(float(bvp.sol(r_c)[1]) - p_c)

    r_head = np.linspace(EPS_START, r_c, 800)
    zh_, ph_ = head._dense(r_head)
    r_t = np.linspace(r_c, r_max, 800)[1:]
    zt, pt = bvp.sol(r_t)
    r = np.concatenate(([0.0], r_head, r_t))
    z = np.concatenate(([a_mid], zh_, zt))
    zr = np.concatenate(([0.0], ph_, pt))
    cls = _classify_arrays(r, z, zr, a_mid)
    C_far = float(zt[-1] + 2.0 * math.log(r_max))

    def dense(rho):
        rho = np.asarray(rho, dtype=float)
        zz = np.empty_like(rho)
        pp = np.empty_like(rho)
        inner = rho <= r_c
        if np.any(inner):
            zz[inner], pp[inner] = head._dense(np.maximum(rho[inner], EPS_START))
        if np.any(~inner):
            zz[~inner], pp[~inner] = bvp.sol(rho[~inner])
        with np.errstate(divide="ignore", invalid="ignore"):
            drift = np.where(rho > 0, (n - 1) / np.where(rho > 0, rho, 1.0), 0.0)
        zpp = -(drift - rho / 2) * pp - np.expm1(zz)
        # at the origin the regular limit gives z'' = -(e^a - 1)/n
        zpp = np.where(rho < EPS_START, -np.expm1(a_mid) / n, zpp)
        return zz, pp, zpp

    shot = ProfileShot(n, a_mid, r_max, r, z, zr, cls, r_max, method="shot+tail", junction=junction, C_far=C_far)
    shot._dense = dense
    return shot


def find_members(n: int, a_values=None, r_max: float = 40.0, rtol: float = 1e-12, jobs: int = 1):
    """Coarse scan, bisection on every fast-sign change, member construction."""
    shots = scan(n, a_values, r_max, rtol, jobs)
    members = []
    for left, right in zip(shots[:-1], shots[1:]):
        sl = {INCREASING: 1, UNBOUNDED: -1}.get(left.classification, 0)
        sr = {INCREASING: 1, UNBOUNDED: -1}.get(right.classification, 0)
        if sl and sr and sl != sr:
            lo, hi = bisect_transition(n, left.a, right.a, rtol)
            members.append(build_member(n, lo, hi, r_max, rtol))
    return shots, members


def check_sign_constraint(shot: ProfileShot) -> dict:
    g = shot.g
    k = int(np.argmin(g))
    return {
        "a": shot.a,
        "g0": float(g[0]),
        "min_g": float(g[k]),
        "r_at_min": float(shot.r[k]),
        "changes_sign": bool(np.min(g) < 0),
        "nonnegative": bool(np.min(g) >= 0),
    }


def _require_member(shot: ProfileShot):
    if shot.classification != MEMBER or shot.a <= 0 or shot._dense is None:
        raise ValueError("counterexample needs a nontrivial member profile")
    if not 3 <= shot.n <= 9:
        raise ValueError("nontrivial members exist only for 3 <= n <= 9")


def counterexample_solution(shot: ProfileShot, T: float, x_abs, t):
    """u(x, t) = phi(|x| / sqrt(T - t)) - log(T - t)."""
    _require_member(shot)
    t = np.asarray(t, dtype=float)
    if np.any(~(t < T)):
        raise ValueError("counterexample solution needs t < T")
    tau = T - t
    rho = np.asarray(x_abs, dtype=float) / np.sqrt(tau)
    return shot.evaluate(rho)[0] - np.log(tau)


def pde_residual(shot: ProfileShot, T: float, x_abs: float, t: float, h: float | None = None, k: float | None = None) -> float:
    """Finite-difference residual of u_t - u_rr - (n-1)/r u_r - e^u at (|x|, t).

    Default steps scale with the point (h = 1e-3 |x|, k = 1e-4 (T - t)) so the
    second-order truncation error stays uniform across the profile.
    """
    n = shot.n
    h = 1e-3 * x_abs if h is None else h
    k = 1e-4 * (T - t) if k is None else k

    def u(x, tt):
        return float(counterexample_solution(shot, T, np.array([x]), tt)[0])

    ut = (u(x_abs, t + k) - u(x_abs, t - k)) / (2 * k)
    up, u0, um = u(x_abs + h, t), u(x_abs, t), u(x_abs - h, t)
    urr = (up - 2 * u0 + um) / h**2
    ur = (up - um) / (2 * h)
    return ut - urr - (n - 1) / x_abs * ur - math.exp(u0)


def final_profile_contrast(shot: ProfileShot, x_values) -> dict:
    """Counterexample final profile -2 log|x| + C against G^{-1}(|x|^2/(4|log|x|^2|)) for e^u."""
    _require_member(shot)
    x = np.asarray(x_values, dtype=float)
    ce = -2.0 * np.log(x) + shot.C_far
    ref = -np.log(x**2 / (4.0 * np.abs(2.0 * np.log(x))))
    diff = ce - ref
    return {
        "x": x.tolist(),
        "difference": diff.tolist(),
        "tends_to_zero": bool(np.abs(diff[-1]) < 0.05 and np.all(np.diff(np.abs(diff)) <= 0)),
    }


def write_shot(shot: ProfileShot, path, chash: str = "none"):
    from .io import write_columns

    return write_columns(path, {"r": shot.r, "z": shot.z, "z_r": shot.z_r, "g": shot.g}, chash)
