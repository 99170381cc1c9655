"""Radial solver for u_t = u_rr + (n-1)/r u_r + f(u) up to a cap near blow-up.

Space: finite volumes on a sinh-graded radial grid, r = R sinh(beta xi) /
sinh(beta), so spacing is finest at the origin where the singularity forms.
Time: Lie splitting.  The reaction substep is the exact flow of u' = f(u),
u -> G^{-1}(G(u) - dt), evaluated by the compiled kernel; the diffusion
substep is backward Euler.  Both substeps are order preserving, so radially
nonincreasing data stay nonincreasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .nonlin import NonlinearityFamily
from .resolvent import _GL_W, _GL_X, _LAG_W, _LAG_X, ResolventTable


class SolverError(RuntimeError):
    pass


class InstabilityError(SolverError):
    pass


class ResolutionExhausted(SolverError):
    """Time step fell below the representable scale before the cap was reached."""


MONOTONE_TOL = 1e-10


@dataclass(frozen=True)
class RadialGrid:
    n: int
    R: float
    nodes: np.ndarray = field(repr=False)
    bc: str = "dirichlet"
    beta: float = 0.0

    @classmethod
    def make(cls, n: int, R: float, J: int, bc: str = "dirichlet", beta: float = 12.0) -> "RadialGrid":
        if n < 1:
            raise ValueError("dimension n must be >= 1")
        if not R > 0:
            raise ValueError("radius R must be positive")
        if J < 8:
            raise ValueError("need at least 8 intervals")
        if bc not in ("dirichlet", "truncated_free"):
            raise ValueError(f"unknown boundary condition {bc!r}")
        xi = np.linspace(0.0, 1.0, J + 1)
        if beta > 0:
            nodes = R * np.sinh(beta * xi) / math.sinh(beta)
        else:
            nodes = R * xi
        nodes[0] = 0.0
        nodes[-1] = R
        grid = cls(n=n, R=float(R), nodes=nodes, bc=bc, beta=float(beta))
        ratio = grid.grading_ratio
        if ratio > 1.2:
            raise ValueError(f"adjacent spacing ratio {ratio:.3f} exceeds 1.2; raise J or lower beta")
        return grid

    @property
    def J(self) -> int:
        return self.nodes.size - 1

    @property
    def spacings(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def h_min(self) -> float:
        return float(self.spacings.min())

    @property
    def grading_ratio(self) -> float:
        h = self.spacings
        q = h[1:] / h[:-1]
        return float(np.max(np.maximum(q, 1.0 / q)))

    def refined(self) -> "RadialGrid":
        """Same mapping with every spacing halved."""
        return RadialGrid.make(self.n, self.R, 2 * self.J, self.bc, self.beta)

    def laplacian(self):
        """Finite-volume radial Laplacian as (lower, diag, upper) on all nodes.

        Row i approximates u_rr + (n-1)/r u_r; at the origin this reduces to
        2n (u_1 - u_0) / h_0^2.  The last row is the Neumann half cell.
        """
        r, n = self.nodes, self.n
        h = np.diff(r)
        mid = 0.5 * (r[1:] + r[:-1])
        face = mid ** (n - 1)  # flux area at r_{i+1/2}
        edges = np.concatenate(([0.0], mid, [r[-1]]))
        vol = (edges[1:] ** n - edges[:-1] ** n) / n
        cond = face / h  # conductance between i and i+1
        m = r.size
        lower = np.zeros(m)
        upper = np.zeros(m)
        lower[1:] = cond / vol[1:]
        upper[:-1] = cond / vol[:-1]
        diag = -(lower + upper)
        return lower, diag, upper

    def apply_laplacian(self, u):
        lower, diag, upper = self.laplacian()
        out = diag * u
        out[1:] += lower[1:] * u[:-1]
        out[:-1] += upper[:-1] * u[1:]
        return out

    def gradient(self, u):
        """u_r at the nodes (second-order nonuniform differences, 0 at the origin)."""
        return np.gradient(u, self.nodes, edge_order=2) * np.r_[0.0, np.ones(self.J)]


@dataclass(frozen=True)
class RadialState:
    grid: RadialGrid
    u: np.ndarray = field(repr=False)
    t: float = 0.0
    dt_last: float = 0.0
    steps: int = 0

    @property
    def u0(self) -> float:
        return float(self.u[0])


@dataclass
class InitialData:
    u: np.ndarray
    kind: str
    monotone_in_time: bool | None = None
    residual_min: float | None = None


def make_initial_data(grid: RadialGrid, kind: str, a: float, m: float = 1.0, r0: float = 0.0,
                      fam: NonlinearityFamily | None = None, check_monotone_in_time: bool = False) -> InitialData:
    """Radially nonincreasing data: bump a(1-(r/R)^2)_+^m, plateau, or constant a.

    The plateau equals a on r <= r0 and decreases linearly to 0 at R.  With
    ``check_monotone_in_time`` the sufficient condition Lap(u0) + f(u0) >= 0
    is evaluated at interior nodes and reported, never enforced.
    """
    if not a >= 0:
        raise ValueError("amplitude must be nonnegative")
    r, R = grid.nodes, grid.R
    if kind == "bump":
        u = a * np.clip(1.0 - (r / R) ** 2, 0.0, None) ** m
    elif kind == "plateau":
        if not 0 <= r0 < R:
            raise ValueError("plateau radius r0 must lie in [0, R)")
        u = a * np.clip((R - r) / (R - r0), 0.0, 1.0)
    elif kind == "constant":
        u = np.full(r.size, float(a))
    else:
        raise ValueError(f"unknown initial data kind {kind!r}")
    data = InitialData(u=u, kind=kind)
    if check_monotone_in_time:
        if fam is None:
            raise ValueError("monotone-in-time check needs the nonlinearity")
        res = grid.apply_laplacian(u) + fam.f(u)
        interior = res[:-1] if grid.bc == "dirichlet" else res
        data.residual_min = float(interior.min())
        data.monotone_in_time = bool(data.residual_min >= 0)
    return data


class RadialSolver:
    """Stepper for one grid and one nonlinearity."""

    def __init__(self, grid: RadialGrid, fam: NonlinearityFamily, table: ResolventTable | None = None,
                 safety: float = 0.05, dt_max: float = 1e-3, diffusion: bool = True, reaction: bool = True,
                 newton_tol: float = 1e-14, kernels=None):
        if not 0 < safety <= 1:
            raise ValueError("safety must lie in (0, 1]")
        self.grid = grid
        self.fam = fam
        self.table = table if table is not None else ResolventTable(fam)
        self.safety = safety
        self.dt_max = dt_max
        self.diffusion = diffusion
        self.reaction = reaction
        self.newton_tol = newton_tol
        self.kernels = kernels if kernels is not None else backend.get()
        self._lap = grid.laplacian()
        self._m = grid.J if grid.bc == "dirichlet" else grid.J + 1
        x_floor, step, vals = self.table.G_node_table()
        self._reaction_args = (
            fam.kind_code, np.ascontiguousarray(fam.param_vector()), x_floor, step,
            np.ascontiguousarray(vals), _LAG_X, _LAG_W, _GL_X, _GL_W, newton_tol,
        )

    def choose_dt(self, u0: float) -> float:
        if not self.reaction:
            return self.dt_max
        df = float(self.fam.df(u0))
        if df <= 0 or not math.isfinite(df):
            return self.dt_max if df <= 0 else 0.0
        return min(self.dt_max, self.safety / df)

    def react(self, u, dt):
        kind, p, x_floor, step, vals, lx, lw, gx, gw, tol = self._reaction_args
        return self.kernels.reaction_flow(np.ascontiguousarray(u), dt, kind, p, x_floor, step, vals, lx, lw, gx, gw, tol)

    def diffuse(self, u, dt):
        lower, diag, upper = self._lap
        m = self._m
        lo = -dt * lower[:m]
        di = 1.0 - dt * diag[:m]
        up = -dt * upper[:m]
        out = u.copy()
        out[:m] = self.kernels.solve_tridiag(
            np.ascontiguousarray(lo), np.ascontiguousarray(di), np.ascontiguousarray(up), np.ascontiguousarray(u[:m])
        )
        if m <= self.grid.J:
            out[m:] = 0.0
        return out

    def step(self, state: RadialState, dt: float | None = None) -> RadialState:
        if dt is None:
            dt = self.choose_dt(state.u0)
        while True:
            if dt < 1e-16:
                raise ResolutionExhausted(f"step {state.steps + 1}: dt={dt:.3g} below 1e-16 at u(0)={state.u0:.6g}")
            u = state.u
            if self.reaction:
                u = self.react(u, dt)
                if not np.all(np.isfinite(u)):
                    dt *= 0.5  # the flow left the representable range; retry shorter
                    continue
            if self.diffusion:
                u = self.diffuse(u, dt)
            break
        if not np.all(np.isfinite(u)):
            raise InstabilityError(f"step {state.steps + 1}: non-finite values after update")
        rise = float(np.max(np.diff(u))) if u.size > 1 else 0.0
        if rise > MONOTONE_TOL and np.all(np.diff(state.u) <= MONOTONE_TOL):
            raise InstabilityError(f"step {state.steps + 1}: radial monotonicity lost (rise {rise:.3g})")
        return RadialState(grid=state.grid, u=u, t=state.t + dt, dt_last=dt, steps=state.steps + 1)


def step(state: RadialState, fam: NonlinearityFamily, safety: float = 0.05, **kwargs) -> RadialState:
    """One step with a throwaway solver; use RadialSolver directly in loops."""
    return RadialSolver(state.grid, fam, safety=safety, **kwargs).step(state)


# ---------------------------------------------------------------------------
# runs to the cap


@dataclass
class BlowupEstimate:
    T_est: float
    ci: float
    samples: np.ndarray = field(repr=False)
    method: str = "affine_last_decade"
    slope: float = 0.0
    low_confidence: bool = False
    comparison_bound: float = 0.0

    @property
    def comparison_ok(self) -> bool:
        return self.T_est >= self.comparison_bound

    def to_dict(self) -> dict:
        return {
            "T_est": self.T_est,
            "ci": self.ci,
            "method": self.method,
            "slope": self.slope,
            "low_confidence": self.low_confidence,
            "comparison_bound": self.comparison_bound,
            "comparison_ok": self.comparison_ok,
            "n_samples": int(len(self.samples)),
        }


@dataclass
class Snapshot:
    s: float
    t: float
    r: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)


@dataclass
class RunResult:
    grid: RadialGrid
    fam_name: str
    t: np.ndarray = field(repr=False)
    u0: np.ndarray = field(repr=False)
    dt: np.ndarray = field(repr=False)
    T_running: np.ndarray = field(repr=False)
    estimate: BlowupEstimate
    final: RadialState = field(repr=False)
    history: list | None = field(default=None, repr=False)
    snapshots: list = field(default_factory=list, repr=False)
    t_start: float = 0.0


def estimate_blowup_time(t, u0, table: ResolventTable, t_start: float = 0.0, u_init_max: float | None = None) -> BlowupEstimate:
    """Fit t + G(u(0,t)) = T + slope * G(u(0,t)) over the last decade of G levels.

    For the flat ODE slope is 0; in the PDE the centre lags the ODE by a
    slowly varying shift which the slope absorbs.
    """
    t = np.asarray(t, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    g = table.G(u0)
    last = g[-1]
    sel = g <= 10.0 * last
    if np.count_nonzero(sel) < 3:
        sel = np.zeros_like(sel)
        sel[-3:] = True
    ts, gs = t[sel], g[sel]
    y = ts + gs
    A = np.column_stack([np.ones_like(gs), gs])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    T_est, slope = float(coef[0]), float(coef[1])
    ci = float(np.max(np.abs(A @ coef - y)))
    if not T_est > t[-1]:
        T_est = float(t[-1] + g[-1])
    bound = t_start + float(table.G(u_init_max if u_init_max is not None else u0[0]))
    return BlowupEstimate(
        T_est=T_est,
        ci=ci,
        samples=np.column_stack([ts, u0[sel]]),
        slope=slope,
        low_confidence=bool(ci > 1e-3 * (T_est - ts[0])),
        comparison_bound=bound,
    )


def run_to_cap(state: RadialState, solver: RadialSolver, u_cap: float, keep_history: bool = True,
               max_steps: int = 2_000_000, s_checkpoints=None) -> RunResult:
    """Advance until u(0,t) >= u_cap, estimate T, and cut similarity snapshots."""
    table = solver.table
    t0 = state.t
    u_init_max = float(np.max(state.u))
    ts, u0s, dts, Tr = [state.t], [state.u0], [0.0], [state.t + float(table.G(state.u0))]
    hist = [state.u] if keep_history else None
    while state.u0 < u_cap:
        if state.steps >= max_steps:
            raise ResolutionExhausted(f"step budget {max_steps} exhausted at u(0)={state.u0:.6g}")
        state = solver.step(state)
        ts.append(state.t)
        u0s.append(state.u0)
        dts.append(state.dt_last)
        Tr.append(state.t + float(table.G(state.u0)))
        if keep_history:
            hist.append(state.u)
    t = np.array(ts)
    u0 = np.array(u0s)
    est = estimate_blowup_time(t, u0, table, t_start=t0, u_init_max=u_init_max)
    result = RunResult(
        grid=state.grid, fam_name=solver.fam.name, t=t, u0=u0, dt=np.array(dts), T_running=np.array(Tr),
        estimate=est, final=state, history=hist, t_start=t0,
    )
    if keep_history:
        result.snapshots = cut_snapshots(result, table, s_checkpoints)
    return result


def cut_snapshots(run: RunResult, table: ResolventTable, s_checkpoints=None) -> list:
    """Solution at t_s = T_est - e^{-s}, interpolating u - psi linearly in t."""
    T = run.estimate.T_est
    t = run.t
    s_first = -math.log(T - t[0])
    s_last = -math.log(T - t[-1])
    if s_checkpoints is None:
        s_checkpoints = np.arange(4.0, math.floor(s_last) + 1.0)
    snaps = []
    for s in s_checkpoints:
        if not s_first < s <= s_last:
            continue
        ts = T - math.exp(-s)
        k = int(np.searchsorted(t, ts))
        k = min(max(k, 1), t.size - 1)
        ta, tb = t[k - 1], t[k]
        lam = (ts - ta) / (tb - ta)
        pa = float(table.G_inv(T - ta))
        pb = float(table.G_inv(T - tb))
        ps = float(table.G_inv_log(-s))
        w = (1 - lam) * (run.history[k - 1] - pa) + lam * (run.history[k] - pb)
        snaps.append(Snapshot(s=float(s), t=ts, r=run.grid.nodes.copy(), u=ps + w))
    return snaps


# ---------------------------------------------------------------------------
# diagnostics


def diagnostics(run: RunResult, table: ResolventTable, M2: float | None = None) -> dict:
    """Type-I residual, scaled gradient bound and gradient lower bound ratio."""
    T = run.estimate.T_est
    t, u0 = run.t, run.u0
    late = (T - t) <= math.exp(-4.0)
    if np.count_nonzero(late) < 2:
        late = np.zeros_like(late)
        late[-max(2, t.size // 4):] = True
    tau = T - t[late]
    a_vals = u0[late] - table.G_inv(tau)
    # growth check over the last two decades of T - t
    tau_last = tau[-1]
    dec1 = (tau <= 10 * tau_last)
    dec2 = (tau > 10 * tau_last) & (tau <= 100 * tau_last)
    a1 = float(np.max(np.abs(a_vals[dec1])))
    a2 = float(np.max(np.abs(a_vals[dec2]))) if np.any(dec2) else a1
    report = {
        "type_I": {
            "M_hat": float(np.max(np.abs(a_vals))),
            "max_last_decade": a1,
            "max_previous_decade": a2,
            "bounded": bool(np.all(np.isfinite(a_vals)) and a1 <= a2 + 1e-6),
        }
    }
    grid = run.grid
    r = grid.nodes
    b_rows, c_rows = [], []
    fam = table.fam
    if M2 is None:
        M2 = float(np.max(run.history[0])) + 1.0 if run.history else float(u0[0]) + 1.0
    for snap in run.snapshots:
        ur = grid.gradient(snap.u)
        b_rows.append((snap.s, float(np.max(np.abs(ur)) * math.exp(-snap.s / 2))))
        region = (snap.u >= M2) & (r > 0) & (r <= grid.R / 2)
        if np.count_nonzero(region) == 0:
            continue
        uu, rr, gg = snap.u[region], r[region], -ur[region]
        logf = fam.log_f(uu)
        # smallest A with -u_r >= r f / (2 (A + log f)) at each node
        safe = np.where(gg > 0, gg, 1.0)
        A_need = np.where(gg > 0, rr * np.exp(logf) / (2.0 * safe) - logf, np.inf)
        ratio_A0 = gg * 2.0 * (table.A0 + logf) / (rr * np.exp(logf))
        c_rows.append((snap.s, float(np.max(A_need)), float(np.min(ratio_A0))))
    b_vals = np.array([v for _, v in b_rows]) if b_rows else np.array([np.nan])
    report["gradient_scaled"] = {
        "s": [s for s, _ in b_rows],
        "values": b_vals.tolist(),
        "max": float(np.nanmax(b_vals)) if b_rows else None,
        "bounded": bool(b_rows) and bool(np.all(np.isfinite(b_vals))) and float(b_vals[-1]) <= 2.0 * float(np.max(b_vals[: max(1, len(b_vals) // 2)])),
    }
    A_hat = [row[1] for row in c_rows]
    report["gradient_lower"] = {
        "M2": M2,
        "s": [row[0] for row in c_rows],
        "A_hat": A_hat,
        "min_ratio_with_A0": [row[2] for row in c_rows],
        "A0": table.A0,
        "finite": bool(c_rows) and bool(np.all(np.isfinite(A_hat))),
    }
    return report


def write_trajectory(run: RunResult, path, chash: str = "none"):
    from .io import write_columns

    return write_columns(path, {"t": run.t, "u0": run.u0, "dt": run.dt, "Test_running": run.T_running}, chash)


def write_snapshots(run: RunResult, outdir, chash: str = "none"):
    from pathlib import Path

    from .io import write_columns

    paths = []
    for snap in run.snapshots:
        paths.append(write_columns(Path(outdir) / f"snapshot_s{snap.s:g}.csv", {"r": snap.r, "u": snap.u}, chash))
    return paths


__all__ = [
    "BlowupEstimate", "InitialData", "InstabilityError", "RadialGrid", "RadialSolver", "RadialState",
    "ResolutionExhausted", "RunResult", "Snapshot", "SolverError", "cut_snapshots", "diagnostics",
    "estimate_blowup_time", "make_initial_data", "run_to_cap", "step",
]
