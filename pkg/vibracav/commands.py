import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from rich.console import Console

from .bogoliubov import (CavityConfig, kappa_state, recurrence_residuals, rho_closed, rho_ode_oracle,
                         rho_table, unitarity_residuals)
from .config import SweepRequest
from .errors import AccuracyError, InputError, VibracavError
from .observables import (delta_product, invariant_variances_mode1, mean_photons_mode1, purity_mode1,
                          state_from_kappa, variances_closed_mode1, variances_closed_mode3,
                          variances_series)
from .photonstats import PhotonDistribution, moments_and_q, pdf_vacuum_seeded

logger = logging.getLogger(__name__)

AUDIT_UNITARITY_TOL = 1e-8
AUDIT_ORACLE_TOL = 1e-7
AUDIT_RECURRENCE_TOL = 1e-6     # fourth-order finite differences, step 1e-4 * max(1, tau)
ORACLE_START_MODES = 100
ORACLE_MAX_N = 9
FLATNESS_WINDOW = (20, 60)
SWEEP_DEFAULT = (1, 2, 3, 4, 5)

STATS_COLUMNS = ["mode", "source", "U", "V", "Y", "u", "v", "N", "purity", "Q"]


@dataclass
class CommandResult:
    command: str
    frame: pd.DataFrame
    diagnostics: dict = field(default_factory=dict)
    passed: bool = True


def _point_key(axis, value):
    return f"{axis}={float(value)!r}"


class CommandRunner:
    """Dispatches a SweepRequest to the command that computes its table."""

    def __init__(self, console=None):
        self.console = console or Console()
        self.handlers = {
            "coeffs": self.run_coeffs,
            "variances": self.run_variances,
            "pdf": self.run_pdf,
            "figure1": self.run_figure1,
            "figure2": self.run_figure2,
            "audit": self.run_audit,
            "sweep": self.run_sweep,
        }

    def run(self, request: SweepRequest) -> CommandResult:
        logger.info(f"Running {request.command} for p={request.p}, gamma={request.gamma}")
        self.console.rule(f"[bold blue]{request.command}[/bold blue]")
        result = self.handlers[request.command](request)
        logger.info(f"{request.command} produced {len(result.frame)} rows, passed={result.passed}")
        return result

    # ------------------------------------------------------------------
    # grid helpers
    # ------------------------------------------------------------------
    @staticmethod
    def _cavity(request):
        return CavityConfig(p=request.p, gamma=request.gamma)

    @staticmethod
    def _state(axis, value, config):
        if axis == "kappa":
            return state_from_kappa(float(value), config)
        return kappa_state(float(value), config)

    def _points(self, request):
        """(axis, value, state) for every grid point."""
        config = self._cavity(request)
        axis, values = request.grid()
        return config, [(axis, value, self._state(axis, value, config)) for value in values]

    # ------------------------------------------------------------------
    # commands
    # ------------------------------------------------------------------
    def run_coeffs(self, request):
        """Coefficient table (n, m, re, im) at every grid point."""
        config, points = self._points(request)
        frames, diagnostics = [], {}
        for axis, value, state in points:
            table = rho_table(config, state.tau, request.max_m, request.tol)
            frame = table.to_frame()
            if request.n_max is not None:
                frame = frame[frame["n"] <= request.n_max]
            frame.insert(0, "kappa", state.kappa)
            frame.insert(0, "tau", state.tau)
            frames.append(frame)
            diagnostics[_point_key(axis, value)] = {
                "cutoff": table.max_n, "tail_bound": table.tail_bound, "method": table.method}
        return CommandResult("coeffs", pd.concat(frames, ignore_index=True), diagnostics)

    def run_variances(self, request):
        """Variances of the requested modes from the table, plus the closed forms where they exist."""
        config, points = self._points(request)
        modes = request.selected_modes([1])
        width = max(request.max_m, max(modes))
        records, diagnostics = [], {}
        for axis, value, state in points:
            table = rho_table(config, state.tau, width, request.tol)
            base = {"tau": state.tau, "kappa": state.kappa}
            for m in modes:
                stats = variances_series(m, table)
                records.append({**base, **stats.as_dict(), "source": "series"})
            if config.has_principal_modes():
                first = config.p // 2
                if first in modes:
                    records.append({**base, **variances_closed_mode1(state).as_dict(), "source": "closed"})
                if 3 * first in modes and config.gamma == 0.0:
                    records.append({**base, **variances_closed_mode3(state).as_dict(), "source": "closed"})
            diagnostics[_point_key(axis, value)] = {"cutoff": table.max_n, "tail_bound": table.tail_bound}
        frame = pd.DataFrame.from_records(records, columns=["tau", "kappa"] + STATS_COLUMNS)
        return CommandResult("variances", frame, diagnostics)

    def _invariants(self, mode, state, config, request):
        if config.has_principal_modes() and mode == config.p // 2:
            return invariant_variances_mode1(state)
        table = rho_table(config, state.tau, max(request.max_m, mode), request.tol)
        stats = variances_series(mode, table)
        return stats.u, stats.v

    def run_pdf(self, request):
        """Photon distribution of the first requested mode next to Planck's at equal mean."""
        config, points = self._points(request)
        mode = request.selected_modes([1])[0]
        frames, diagnostics = [], {}
        for axis, value, state in points:
            u, v = self._invariants(mode, state, config, request)
            cavity = pdf_vacuum_seeded(u, v, request.n_max)
            planck = PhotonDistribution.planck(cavity.n_bar, cavity.n_max)
            frames.append(pd.DataFrame({
                "tau": state.tau, "kappa": state.kappa, "mode": mode,
                "n": np.arange(cavity.n_max + 1), "f": cavity.f, "f_planck": planck.f,
            }))
            diagnostics[_point_key(axis, value)] = {
                "u": u, "v": v, "n_bar": cavity.n_bar, "sigma_n": cavity.sigma_n,
                "Q": cavity.Q, "mass": cavity.mass}
        return CommandResult("pdf", pd.concat(frames, ignore_index=True), diagnostics)

    def run_figure1(self, request):
        """u1, v1, purity, N1 and Q1 of the first principal mode against kappa."""
        config, points = self._points(request)
        records = []
        for _, _, state in points:
            u, v = invariant_variances_mode1(state)
            records.append({
                "kappa": state.kappa, "u1": u, "v1": v, "chi1": purity_mode1(state),
                "N1": mean_photons_mode1(state), "Q1": moments_and_q(u, v, squeezed=True).Q,
            })
        frame = pd.DataFrame.from_records(records, columns=["kappa", "u1", "v1", "chi1", "N1", "Q1"])
        return CommandResult("figure1", frame, {"p": config.p, "gamma": config.gamma})

    def run_figure2(self, request):
        """Cavity photon distribution of the first principal mode against Planck's."""
        config, points = self._points(request)
        if len(points) != 1:
            raise InputError("figure2 takes a single slow time (--tau)")
        _, _, state = points[0]
        u, v = invariant_variances_mode1(state)
        cavity = pdf_vacuum_seeded(u, v, request.n_max)
        planck = PhotonDistribution.planck(cavity.n_bar, cavity.n_max)
        ratio = np.divide(cavity.f, planck.f, out=np.full_like(cavity.f, np.nan), where=planck.f > 0)
        frame = pd.DataFrame({"n": np.arange(cavity.n_max + 1), "f_cavity": cavity.f,
                              "f_planck": planck.f, "ratio": ratio})

        diagnostics = {
            "tau": state.tau, "kappa": state.kappa, "u1": u, "v1": v,
            "n_bar_cavity": cavity.moments_from_f()[0], "n_bar_planck": planck.moments_from_f()[0],
            "mass_cavity": cavity.mass,
        }
        f = cavity.f
        if len(f) > 3 and f[1] > 0 and f[3] > 0:
            # local bump at n = 2 against the geometric mean of its neighbours
            diagnostics["splash_n2"] = float(f[2] / math.sqrt(f[1] * f[3]) - 1.0)
        lo, hi = FLATNESS_WINDOW
        if cavity.n_max >= hi:
            diagnostics["ratio_increasing_20_60"] = bool(np.all(np.diff(ratio[lo:hi + 1]) > 0))
        return CommandResult("figure2", frame, diagnostics)

    def _audit_point(self, config, state, request):
        table = rho_table(config, state.tau, request.max_m, request.tol)
        unitarity = unitarity_residuals(table)
        recurrence = recurrence_residuals(config, state.tau, table)
        details = {"orthogonality": unitarity.orthogonality, "completeness": unitarity.completeness,
                   "symmetry": unitarity.symmetry, "budget": unitarity.budget, "cutoff": table.max_n,
                   "recurrence_upper": recurrence.upper, "recurrence_lower": recurrence.lower}

        try:
            oracle = rho_ode_oracle(config, state.tau, ORACLE_START_MODES, max_n=ORACLE_MAX_N)
        except AccuracyError as e:
            logger.warning(f"Oracle at tau={state.tau} not available: {e}")
            deviation = math.nan
            details.update(oracle_error=str(e), **{f"oracle_{key}": value for key, value in e.diagnostics.items()})
        else:
            deviation = 0.0
            for n in range(1, ORACLE_MAX_N + 1):
                for m in range(-ORACLE_MAX_N, ORACLE_MAX_N + 1):
                    if m == 0:
                        continue
                    integrated = oracle.columns[n - 1, m + ORACLE_MAX_N]
                    deviation = max(deviation, abs(integrated - rho_closed(n, m, state, config)))
            details.update(oracle_modes=oracle.width, oracle_tail=oracle.tail_bound)

        passed = (unitarity.passed(AUDIT_UNITARITY_TOL) and recurrence.worst < AUDIT_RECURRENCE_TOL
                  and deviation < AUDIT_ORACLE_TOL)
        row = {"unitarity": unitarity.worst, "recurrence": recurrence.worst, "oracle": deviation,
               "tail_bound": table.tail_bound, "passed": passed}
        return row, details

    def run_audit(self, request):
        """
        Identity audit: unitarity sums, upper-index recurrences and the
        closed form against direct integration. Failures are reported in
        the table rather than raised.
        """
        config = self._cavity(request)
        axis, values = request.grid()
        records, diagnostics = [], {}
        for value in values:
            key = _point_key(axis, value)
            try:
                state = self._state(axis, value, config)
                row, details = self._audit_point(config, state, request)
                row = {"tau": state.tau, "kappa": state.kappa, **row}
            except VibracavError as e:
                logger.warning(f"Audit at {key} failed: {e}")
                row = {"tau": float(value) if axis == "tau" else math.nan,
                       "kappa": float(value) if axis == "kappa" else math.nan,
                       "unitarity": math.nan, "recurrence": math.nan, "oracle": math.nan,
                       "tail_bound": float(e.diagnostics.get("tail_bound", math.nan)), "passed": False}
                details = {"error": str(e), **e.diagnostics}
            records.append(row)
            diagnostics[key] = details
        frame = pd.DataFrame.from_records(
            records, columns=["tau", "kappa", "unitarity", "recurrence", "oracle", "tail_bound", "passed"])
        passed = bool(frame["passed"].all())
        diagnostics["tolerances"] = {"unitarity": AUDIT_UNITARITY_TOL, "oracle": AUDIT_ORACLE_TOL,
                                     "recurrence": AUDIT_RECURRENCE_TOL}
        return CommandResult("audit", frame, diagnostics, passed=passed)

    def run_sweep(self, request):
        """(2m+1) * Delta_m at strict resonance for p = 2 (exploratory)."""
        indices = request.selected_modes(SWEEP_DEFAULT)
        records = []
        for m in indices:
            product = delta_product(m)
            logger.info(f"sweep m={m}: (2m+1) Delta_m = {product:.6f}")
            records.append({"m": m, "mode": 2 * m + 1, "product": product})
        frame = pd.DataFrame.from_records(records, columns=["m", "mode", "product"])
        return CommandResult("sweep", frame, {"reference": 2.0 / math.pi ** 2, "p": 2, "gamma": 0.0})
