"""The acceptance suite: twelve numbered checks with tolerances and time budgets.

Each check returns a CriterionResult; heavy runs (the pure exponential and
power-log blow-up runs) are computed once per Suite and shared.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .nonlin import admissible_alpha, default_families, make_builtin
from .pde import (RadialGrid, RadialSolver, RadialState, RunResult, diagnostics, make_initial_data, run_to_cap)
from .pipeline import closed_form_oracles, default_u_cap, solution_decade_before
from .profiles import ProfileError, ProfilePrediction, compare, final_profile_gap
from .resolvent import OdeSolution, ResolventTable, certify_asymptotic_lemmas
from .selfsim import check_sign_constraint, find_members, pde_residual
from .similarity import FrameError, defect, defect_decay, energy_trace, to_frame


@dataclass
class CriterionResult:
    id: int
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    runtime: float = 0.0
    budget: float = math.inf

    @property
    def within_budget(self) -> bool:
        return self.runtime <= self.budget

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"[{verdict}] {self.id:2d} {self.name} ({self.runtime:.2f}s / budget {self.budget:g}s)"

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "passed": self.passed,
            "runtime": self.runtime,
            "budget": self.budget,
            "within_budget": self.within_budget,
            "detail": self.detail,
        }


def _decreasing(v) -> bool:
    v = np.asarray(v, dtype=float)
    return bool(v.size >= 2 and np.all(np.diff(v) < 0))


def blowup_run(family: str, J: int = 800, keep_history: bool = True, params=None, kernels=None) -> tuple[RunResult, ResolventTable]:
    """n = 1, unit ball, Dirichlet, bump a = 4; runs to the default cap."""
    fam = make_builtin(family, params)
    table = ResolventTable(fam)
    grid = RadialGrid.make(1, 1.0, J)
    data = make_initial_data(grid, "bump", 4.0)
    solver = RadialSolver(grid, fam, table, kernels=kernels)
    cap = default_u_cap(table, float(np.max(data.u)))
    return run_to_cap(RadialState(grid, data.u), solver, cap, keep_history=keep_history), table


def centre_trend(run: RunResult, table: ResolventTable, s_values=(5, 6, 7, 8), n: int = 1) -> dict:
    """(u(0,t_s) - psi_hat(t_s)) 4 |log(T_hat - t_s)| at the requested checkpoints."""
    T = run.estimate.T_est
    by_s = {round(sn.s): sn for sn in run.snapshots}
    s_used = [s for s in s_values if s in by_s]
    vals = []
    for s in s_used:
        sn = by_s[s]
        tau = T - sn.t
        vals.append((float(sn.u[0]) - float(table.G_inv(tau))) * 4.0 * abs(math.log(tau)))
    target = 2 * n
    dist = np.abs(np.array(vals) - target)
    toward = bool(dist.size >= 2 and np.all(np.diff(dist) < 0))
    last = vals[-1] if vals else math.nan
    in_band = bool(0.5 * target <= last <= 2.0 * target)
    return {
        "s_requested": list(s_values),
        "s_available": s_used,
        "values": vals,
        "toward_2n": toward,
        "last": last,
        "band": [0.5 * target, 2.0 * target],
        "last_in_band": in_band,
        "passed": toward and in_band and s_used[-1:] == [s_values[-1]],
    }


class Suite:
    def __init__(self, jobs: int = 1):
        self.jobs = jobs
        self._runs = {}

    def run_for(self, family: str):
        if family not in self._runs:
            self._runs[family] = blowup_run(family)
        return self._runs[family]

    def frames_for(self, family: str):
        run, table = self.run_for(family)
        ode = OdeSolution(run.estimate.T_est, table)
        frames = []
        for sn in run.snapshots:
            try:
                frames.append(to_frame(sn, run.estimate.T_est, ode, 1))
            except FrameError:
                continue  # beyond the grid's resolution near the origin
        return frames, ode

    # -- 1 ------------------------------------------------------------------
    def c1_closed_form(self):
        rep = closed_form_oracles(ResolventTable(make_builtin("pure_exp")))
        return rep["passed"], rep

    # -- 2 ------------------------------------------------------------------
    def c2_round_trips(self):
        rng = np.random.default_rng(20240611)
        worst = {}
        for fam in default_families():
            table = ResolventTable(fam)
            X = table.x_floor + rng.uniform(0.0, 80.0, 32)
            errs = []
            for fwd, inv in ((table.logG, table.G_inv_log), (table.logH, table.H_inv_log)):
                back = inv(fwd(X))
                errs.append(float(np.max(np.abs(back - X) / np.maximum(1.0, np.abs(X)))))
            worst[fam.name] = max(errs)
        passed = all(v <= 1e-9 for v in worst.values())
        return passed, {"max_rel_error": worst, "threshold": 1e-9, "points": 32}

    # -- 3 ------------------------------------------------------------------
    def c3_G_times_f(self):
        from scipy.special import exp1

        rows, passed = [], True
        for q in (1.0, 2.0):
            fam = make_builtin("power_log", {"q": q, "K": 0.0})
            table = ResolventTable(fam)
            X = np.array([20.0, 40.0])
            dev = np.abs(table.G(X) * fam.f(X) - 1.0)
            # incomplete-gamma oracle: int_X^inf e^{-s} s^{-q} ds for q = 1, 2
            oracle = exp1(X) if q == 1.0 else np.exp(-X) / X - exp1(X)
            oracle_err = float(np.max(np.abs(table.G(X) / oracle - 1.0)))
            ok = bool(np.all(dev <= 2.0 * q / X) and _decreasing(dev) and oracle_err <= 1e-10)
            passed = passed and ok
            rows.append({"q": q, "X": X.tolist(), "deviation": dev.tolist(), "bound": (2.0 * q / X).tolist(),
                         "oracle_rel_error": oracle_err, "passed": ok})
        return passed, {"rows": rows}

    # -- 4 ------------------------------------------------------------------
    def c4_Q_product(self):
        fam = make_builtin("power_log", {"q": 1.0, "K": 0.0})
        table = ResolventTable(fam)
        x = np.array([10.0, 30.0, 100.0])  # log X
        # Q(X) (X L + X^2 L') = J_G(x) (L(x) + L_x(x)) with X = e^x
        prod = table.J_G(x) * (fam.L_log(x) + fam.Lx_log(x))
        scaled = np.abs(prod - 1.0) * x
        return _decreasing(scaled), {"log_X": x.tolist(), "product": prod.tolist(), "scaled_deviation": scaled.tolist()}

    # -- 5 ------------------------------------------------------------------
    def c5_inverse_gap(self):
        rows, passed = {}, True
        for name, params in (("pure_exp", None), ("power_log", {"q": 1.0, "K": 0.0})):
            rep = certify_asymptotic_lemmas(ResolventTable(make_builtin(name, params)))["H_inv_minus_G_inv_shifted"]
            rows[name] = rep
            passed = passed and rep["passed"]
        return passed, rows

    # -- 6 ------------------------------------------------------------------
    def c6_ode_mode(self):
        worst, passed = {}, True
        for fam in default_families():
            table = ResolventTable(fam)
            a = max(2.0, table.x_floor + 1.0)
            grid = RadialGrid.make(1, 1.0, 64, beta=2.0)
            data = make_initial_data(grid, "constant", a)
            solver = RadialSolver(grid, fam, table, diffusion=False)
            run = run_to_cap(RadialState(grid, data.u), solver, 20.0, keep_history=False)
            psi = table.G_inv(np.maximum(table.G(a) - run.t, 1e-300))
            err = float(np.max(np.abs(run.u0 / psi - 1.0)))
            worst[fam.name] = {"a": a, "steps": int(run.t.size - 1), "max_rel_error": err}
            passed = passed and err <= 1e-6
        return passed, {"families": worst, "threshold": 1e-6, "u_end": 20.0}

    # -- 7 ------------------------------------------------------------------
    def c7_blowup_run(self):
        run, table = self.run_for("pure_exp")
        T = run.estimate.T_est
        diag = diagnostics(run, table)
        Ts = [T]
        for J in (1600, 3200):
            Ts.append(blowup_run("pure_exp", J=J, keep_history=False)[0].estimate.T_est)
        d1, d2 = abs(Ts[1] - Ts[0]), abs(Ts[2] - Ts[1])
        ratio = d2 / d1 if d1 > 0 else (0.0 if d2 == 0 else math.inf)
        checks = {
            "T_est_at_least_e^-4": T >= math.exp(-4.0),
            "type_I_bounded": diag["type_I"]["bounded"],
            "grid_ratio_at_most_0.6": ratio <= 0.6,
        }
        return all(checks.values()), {"T_est": Ts, "J": [800, 1600, 3200], "ratio": ratio,
                                      "type_I": diag["type_I"], "checks": checks}

    # -- 8 ------------------------------------------------------------------
    def c8_centre_trend(self):
        out = {}
        for name in ("pure_exp", "power_log"):
            run, table = self.run_for(name)
            out[name] = centre_trend(run, table)
            out[name]["T_est"] = run.estimate.T_est
        return all(v["passed"] for v in out.values()), out

    # -- 9 ------------------------------------------------------------------
    def c9_profile_trends(self):
        run, table = self.run_for("pure_exp")
        pred = ProfilePrediction(table, run.estimate.T_est, 1)
        comp = compare(pred, run.snapshots, run.estimate.T_est, s_values=(5, 6, 7, 8))
        refined = comp["gaps"]["refined"]
        try:
            fp = final_profile_gap(pred, run.grid.nodes, run.final.u, solution_decade_before(run))
        except ProfileError as exc:
            fp = {"decreasing": False, "error": str(exc)}
        detail = {"s": comp["s"], "refined_sup_gap": refined, "refined_decreasing": _decreasing(refined),
                  "final_profile": fp, "u_cap": float(run.u0[-1])}
        return detail["refined_decreasing"] and fp["decreasing"], detail

    # -- 10 -----------------------------------------------------------------
    def c10_energy(self):
        frames, _ = self.frames_for("pure_exp")
        tr = energy_trace(frames, admissible_alpha(make_builtin("pure_exp")))
        return tr.nonincreasing and tr.bounded_below, tr.to_dict()

    # -- 11 -----------------------------------------------------------------
    def c11_selfsim(self):
        detail, passed = {}, True
        for n in (1, 2):
            shots, members = find_members(n, jobs=self.jobs)
            nontrivial = [m for m in members if m.a > 0]
            detail[f"n={n}"] = {"shots": len(shots), "members": len(nontrivial)}
            passed = passed and not nontrivial
        shots, members = find_members(3, jobs=self.jobs)
        rows = []
        for m in members:
            sign = check_sign_constraint(m)
            res = [abs(pde_residual(m, 1.0, x, 0.5)) for x in (0.05, 0.3, 1.0, 2.0, 4.0)]
            rows.append({"a": m.a, "C_far": m.C_far, "junction": m.junction, **sign, "max_residual": max(res)})
        good = [r for r in rows if r["changes_sign"] and r["max_residual"] <= 1e-4]
        detail["n=3"] = {"shots": len(shots), "members": rows}
        return passed and bool(good), detail

    # -- 12 -----------------------------------------------------------------
    def c12_defect(self):
        detail = {}
        frames, ode = self.frames_for("power_log")
        sel = [f for f in frames if 6 <= f.s <= 9]
        fam = make_builtin("power_log")
        dd = defect_decay(sel, fam, ode, admissible_alpha(fam))
        detail["power_log"] = dd
        frames_e, ode_e = self.frames_for("pure_exp")
        fam_e = make_builtin("pure_exp")
        max_e = max(float(np.max(np.abs(defect(f, fam_e, ode_e)[1]))) for f in frames_e)
        detail["pure_exp_max_abs_H"] = max_e
        return dd["non_growing"] and max_e == 0.0, detail


CRITERIA = (
    (1, "closed-form oracle (pure_exp)", "c1_closed_form", 1.0),
    (2, "resolvent round trips, all families", "c2_round_trips", 10.0),
    (3, "G f -> 1 for power_log q=1,2", "c3_G_times_f", 5.0),
    (4, "Q (X L + X^2 L') -> 1 for power_log", "c4_Q_product", 5.0),
    (5, "H^{-1}(Y) - G^{-1}(Y/|log Y|) -> 0", "c5_inverse_gap", 5.0),
    (6, "ODE mode reproduces psi", "c6_ode_mode", 10.0),
    (7, "blow-up run: T_est, type I, grid halving", "c7_blowup_run", 120.0),
    (8, "second-order centre trend toward 2n", "c8_centre_trend", 180.0),
    (9, "refined and final profile trends", "c9_profile_trends", 60.0),
    (10, "energy nonincreasing and bounded below", "c10_energy", 30.0),
    (11, "self-similar profiles and sign of g", "c11_selfsim", 60.0),
    (12, "defect decay", "c12_defect", 30.0),
)


def run_criterion(suite: Suite, cid: int) -> CriterionResult:
    _, name, method, budget = CRITERIA[cid - 1]
    t0 = time.perf_counter()
    try:
        passed, detail = getattr(suite, method)()
    except Exception as exc:  # a crash is a failed criterion, reported as such
        passed, detail = False, {"error": f"{type(exc).__name__}: {exc}"}
    return CriterionResult(cid, name, bool(passed), detail, time.perf_counter() - t0, budget)


def run_all(jobs: int = 1, ids=None) -> list[CriterionResult]:
    suite = Suite(jobs)
    return [run_criterion(suite, cid) for cid, *_ in CRITERIA if ids is None or cid in ids]
