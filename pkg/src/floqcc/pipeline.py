"""Experiment orchestration: single points, resonance-locked sweeps, phase
grids, laser-cooling curves and the secular benchmark.

Every point runs the bath -> model -> floquet -> generator -> thermo chain
with adaptive Fock truncation and ladder size; sweep points are independent
and can be dispatched to a process pool (worker count via the
FLOQCC_WORKERS environment variable; default serial).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .bath import MappingError, Ohmic, StructuredPeak, map_collective_coordinate
from .config import ConfigError, RunConfig
from .floquet import (
    DegeneracyError,
    FloquetConvergenceError,
    build_quasienergy_operator,
    decompose_operator,
    solve_floquet,
)
from .generator import (
    BathChannel,
    SteadyStateError,
    build_liouvillian,
    heat_current,
    periodic_average_rate,
    steady_state,
)
from .model import (
    SupersystemSpec,
    build_coupling_operators,
    build_supersystem_fourier,
    cc_hamiltonian,
    fock_truncation_check,
)
from .oracles import SidebandParams, bare_qubit_secular_steady, sideband_cooling_occupation
from .thermo import (
    ThermoReport,
    build_report,
    effective_cc_temperature,
    occupation_statistics,
)


class PointFailure(RuntimeError):
    """A pipeline stage failed; carries the stage tag."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class Diagnostics:
    n_fock: int
    k_ext: int
    k_rho: int
    method: str
    residual: float
    sigma_second: float | None
    trunc_top: float
    completeness: float
    cc_flow_avg: float
    min_eigenvalue: float
    gates: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class PointResult:
    config: RunConfig
    omega_cc: float
    report: ThermoReport | None
    diagnostics: Diagnostics | None
    converged: bool
    error: str | None = None
    extras: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.error is None


def _k_ext_auto(cfg: RunConfig, omega_cc: float, n_fock: int) -> int:
    """Ladder size hosting every in-zone representative away from the
    excluded edge blocks."""
    e_max = 0.5 * cfg.omega0 + (n_fock - 1) * omega_cc + 0.5 * cfg.omegaL
    max_shift = math.ceil(e_max / cfg.omegaL)
    need = max_shift + 2
    k = max(8, math.ceil(4.0 * need / 3.0) + 1)
    return k


def _n_fock_estimate(cfg: RunConfig, omega_cc: float) -> int:
    """Thermal estimate of the ladder size whose top levels stay below the
    truncation threshold; the adaptive loop still raises it if the drive
    heats the mode beyond this."""
    from .bath import bose_occupation

    beta = cfg.beta_h if cfg.mode == "lasercool" else cfg.beta_c
    x = beta * omega_cc
    nbar = bose_occupation(omega_cc, beta) if x < 600 else 0.0
    ratio = (nbar + 0.02) / (1.0 + nbar + 0.02)
    need = math.ceil(math.log(max(cfg.trunc_threshold, 1e-12) * 0.01) / math.log(ratio))
    return int(np.clip(need + 2, 2, cfg.n_fock_max))


def _resolve_mapping(cfg: RunConfig) -> tuple[float, float, Ohmic | None]:
    """(lambda0, omega_cc, residual bath) for the current mode."""
    if cfg.mode == "lasercool":
        return cfg.d_c, cfg.omega_res, None
    omega_res = cfg.omega_res
    if cfg.resonance_lock or omega_res <= 0:
        omega_res = cfg.omega0 - cfg.omegaL
    if omega_res <= 0:
        raise PointFailure(
            "bath", f"resonance lock gives omega_res = {omega_res:.6g} <= 0"
        )
    try:
        cc = map_collective_coordinate(
            StructuredPeak(d_c=cfg.d_c, gamma=cfg.gamma, omega_res=omega_res)
        )
    except (MappingError, ValueError) as exc:
        raise PointFailure("bath", str(exc)) from exc
    return cc.lambda0, cc.omega_cc, cc.residual


def _build_spec(cfg: RunConfig, lambda0: float, omega_cc: float, residual, n_fock: int):
    hot = Ohmic(d_h=cfg.d_h, omega_ref=cfg.hot_reference)
    try:
        return SupersystemSpec(
            omega0=cfg.omega0,
            g=cfg.g,
            omega_L=cfg.omegaL,
            omega_cc=omega_cc,
            n_fock=n_fock,
            lambda0=lambda0,
            beta_h=cfg.beta_h,
            beta_c=cfg.beta_c,
            hot_bath=hot,
            residual_bath=residual,
            coupling_form=cfg.coupling_form,
            require_thermal_bias=cfg.mode not in ("lasercool", "benchmark"),
        )
    except ValueError as exc:
        raise PointFailure("model", str(exc)) from exc


def _solve_floquet_converged(cfg: RunConfig, h, k_ext: int):
    """Floquet solution with the k_ext drift gate (quasienergies stable to
    1e-8 omega0 under k_ext + 2) when convergence checking is enabled."""
    try:
        fs = solve_floquet(build_quasienergy_operator(h, cfg.omegaL, k_ext))
    except (DegeneracyError, FloquetConvergenceError, ValueError) as exc:
        raise PointFailure("floquet", str(exc)) from exc
    if cfg.convergence == "off":
        return fs, k_ext
    for _ in range(6):
        try:
            fs2 = solve_floquet(build_quasienergy_operator(h, cfg.omegaL, k_ext + 2))
        except (DegeneracyError, FloquetConvergenceError, ValueError) as exc:
            raise PointFailure("floquet", str(exc)) from exc
        drift = float(
            np.max(np.abs(np.sort(fs.quasienergies) - np.sort(fs2.quasienergies)))
        )
        if drift < 1e-8 * cfg.omega0:
            return fs, k_ext
        fs, k_ext = fs2, k_ext + 2
    raise PointFailure("floquet", f"quasienergies not converged at k_ext={k_ext}")


def _steady_with_flows(cfg: RunConfig, spec: SupersystemSpec, n_fock: int, k_ext_hint: int):
    """One full solve at fixed n_fock; returns everything downstream needs."""
    h = build_supersystem_fourier(spec)
    k_ext = cfg.k_ext if cfg.k_ext > 0 else max(k_ext_hint, _k_ext_auto(cfg, spec.omega_cc, n_fock))
    fs, k_ext = _solve_floquet_converged(cfg, h, k_ext)
    completeness = fs.completeness_defect_t0()
    if completeness > 1e-6:
        raise PointFailure(
            "floquet", f"Floquet completeness defect {completeness:.2e} > 1e-6"
        )
    ops = build_coupling_operators(spec)
    n_window = cfg.n_window if cfg.n_window > 0 else None
    channels = [
        BathChannel("hot", ops.s_hot, spec.hot_bath, beta=spec.beta_h)
    ]
    jumps = [
        decompose_operator(
            ops.s_hot, fs, n_window=n_window, amplitude_floor=cfg.amplitude_floor
        )
    ]
    if spec.residual_bath is not None:
        channels.append(
            BathChannel("cold", ops.s_cold_residual, spec.residual_bath, beta=spec.beta_c)
        )
        jumps.append(
            decompose_operator(
                ops.s_cold_residual,
                fs,
                n_window=n_window,
                amplitude_floor=cfg.amplitude_floor,
            )
        )
    liouv = build_liouvillian(h, fs, channels, jumps)
    method = cfg.method
    if method == "auto" and spec.residual_bath is None:
        # single-reservoir generators have very slow modes that defeat the
        # gmres preconditioner; go direct
        size = (2 * liouv.suggested_k_rho() + 1) * spec.dim**2
        method = "svd" if size <= 1200 else "lu"
    try:
        rho, info = steady_state(
            liouv,
            k_rho=cfg.k_rho if cfg.k_rho > 0 else None,
            method=method,
            trace_tol=cfg.trace_tol,
            positivity_tol=cfg.positivity_tol,
        )
    except SteadyStateError as exc:
        raise PointFailure("generator", str(exc)) from exc
    qbar_h = heat_current(liouv, rho, "hot").average
    qbar_c = (
        heat_current(liouv, rho, "cold").average
        if spec.residual_bath is not None
        else math.nan
    )
    return {
        "h": h,
        "fs": fs,
        "k_ext": k_ext,
        "completeness": completeness,
        "liouv": liouv,
        "rho": rho,
        "info": info,
        "qbar_h": qbar_h,
        "qbar_c": qbar_c,
    }


def run_point(cfg: RunConfig) -> PointResult:
    """Execute the full pipeline at one parameter point.

    Fock truncation is raised (in steps of 4, up to solver.n_fock_max) until
    the top-level occupancy check passes; with solver.convergence = "full"
    the n_fock + 4, k_ext + 2 and k_rho + 2 refinements must each move the
    period-averaged flows by less than 0.1% relative.
    """
    cfg.validate()
    try:
        lambda0, omega_cc, residual = _resolve_mapping(cfg)
    except PointFailure as exc:
        return PointResult(cfg, math.nan, None, None, False, error=str(exc))

    n_fock = max(cfg.n_fock, _n_fock_estimate(cfg, omega_cc))
    sol = None
    trunc_top = math.nan
    try:
        while True:
            spec = _build_spec(cfg, lambda0, omega_cc, residual, n_fock)
            sol = _steady_with_flows(cfg, spec, n_fock, k_ext_hint=0)
            trunc = fock_truncation_check(
                sol["rho"].average.real, n_fock, cfg.trunc_threshold
            )
            trunc_top = trunc.top_population
            if trunc.passed:
                break
            if n_fock + 4 > cfg.n_fock_max:
                raise PointFailure(
                    "model",
                    f"top Fock occupancy {trunc.top_population:.2e} above "
                    f"{cfg.trunc_threshold:.1e} at n_fock={n_fock} (max reached)",
                )
            n_fock += 4
    except PointFailure as exc:
        return PointResult(cfg, omega_cc, None, None, False, error=str(exc))

    spec = _build_spec(cfg, lambda0, omega_cc, residual, n_fock)
    liouv, rho, info = sol["liouv"], sol["rho"], sol["info"]
    occ = occupation_statistics(rho, n_fock)
    cc_flow = periodic_average_rate(liouv, rho, cc_hamiltonian(spec))

    gates: dict[str, float] = {}
    converged = True
    if cfg.convergence == "full":
        base = np.array([sol["qbar_c"], sol["qbar_h"]])
        scale = max(np.max(np.abs(base[np.isfinite(base)])), 1e-300)
        refinements = {
            "n_fock+4": replace(cfg, n_fock=n_fock + 4, convergence="off"),
            "k_ext+2": replace(cfg, k_ext=sol["k_ext"] + 2, n_fock=n_fock, convergence="off"),
            "k_rho+2": replace(cfg, k_rho=info.k_rho + 2, n_fock=n_fock, convergence="off"),
        }
        for tag, rcfg in refinements.items():
            try:
                spec_r = _build_spec(
                    rcfg, lambda0, omega_cc, residual, rcfg.n_fock
                )
                sol_r = _steady_with_flows(rcfg, spec_r, rcfg.n_fock, k_ext_hint=sol["k_ext"])
            except PointFailure as exc:
                return PointResult(
                    cfg, omega_cc, None, None, False, error=f"gate {tag}: {exc}"
                )
            ref = np.array([sol_r["qbar_c"], sol_r["qbar_h"]])
            diff = np.nanmax(np.abs(ref - base)) / scale
            gates[tag] = float(diff)
            if diff > 1e-3:
                converged = False

    diag = Diagnostics(
        n_fock=n_fock,
        k_ext=sol["k_ext"],
        k_rho=info.k_rho,
        method=info.method,
        residual=info.residual,
        sigma_second=info.sigma_second,
        trunc_top=trunc_top,
        completeness=sol["completeness"],
        cc_flow_avg=cc_flow,
        min_eigenvalue=info.min_eigenvalue,
        gates=gates,
    )

    try:
        if cfg.mode == "lasercool" or residual is None:
            qbar_h = sol["qbar_h"]
            report = ThermoReport(
                qbar_c=math.nan,
                qbar_h=qbar_h,
                wbar=-qbar_h,
                sigma_bar=-cfg.beta_h * qbar_h,
                beta_cc=effective_cc_temperature(occ.n_mean, omega_cc),
                n_mean=occ.n_mean,
                n_var=occ.n_var,
                thermal_residual=occ.thermal_residual,
                regime=None,
                eta=None,
                kappa=None,
                eta_carnot=None,
                kappa_carnot=None,
            )
        else:
            report = build_report(
                sol["qbar_c"],
                sol["qbar_h"],
                omega_cc,
                cfg.beta_c,
                cfg.beta_h,
                occ,
                regime_tol=cfg.regime_tol,
                sigma_tol=cfg.sigma_tol,
            )
    except ValueError as exc:
        return PointResult(cfg, omega_cc, None, diag, False, error=f"[thermo] {exc}")

    extras = {}
    if cfg.mode == "lasercool":
        delta = cfg.omegaL - cfg.omega0
        extras["delta"] = delta
        try:
            extras["n_analytic"] = sideband_cooling_occupation(
                SidebandParams(delta=delta, gamma_decay=cfg.d_h, nu=omega_cc)
            )
        except ValueError:
            extras["n_analytic"] = math.nan
    if cfg.mode == "benchmark":
        qc_o, qh_o, w_o = bare_qubit_secular_steady(
            cfg.omega0,
            cfg.g,
            cfg.omegaL,
            StructuredPeak(d_c=cfg.d_c, gamma=cfg.gamma, omega_res=_bench_omega_res(cfg)),
            Ohmic(d_h=cfg.d_h, omega_ref=cfg.hot_reference),
            cfg.beta_c,
            cfg.beta_h,
        )
        extras["qbar_h_oracle"] = qh_o
        extras["qbar_c_oracle"] = qc_o
        extras["rel_dev_qh"] = abs(report.qbar_h - qh_o) / max(abs(qh_o), 1e-300)

    return PointResult(
        cfg,
        omega_cc,
        report,
        diag,
        converged and (cfg.convergence != "off"),
        extras=extras,
    )


def _bench_omega_res(cfg: RunConfig) -> float:
    if cfg.omega_res > 0 and not cfg.resonance_lock:
        return cfg.omega_res
    return cfg.omega0 - cfg.omegaL


def sweep_values(start: float, stop: float, steps: int) -> np.ndarray:
    if steps == 1:
        return np.array([start])
    return np.linspace(start, stop, steps)


def _point_config(cfg: RunConfig, variable: str, value: float) -> RunConfig:
    if variable == "omegaL":
        return replace(cfg, omegaL=float(value))
    if variable == "d_c":
        return replace(cfg, d_c=float(value))
    if variable == "gamma":
        return replace(cfg, gamma=float(value))
    if variable == "delta":
        return replace(cfg, omegaL=float(cfg.omega0 + value))
    raise ConfigError(f"unknown sweep variable {variable!r}")


@dataclass(frozen=True)
class SweepResult:
    config: RunConfig
    points: list[PointResult]

    @property
    def n_failed(self) -> int:
        return sum(1 for p in self.points if not p.ok)


def _run_point_worker(cfg: RunConfig) -> PointResult:
    return run_point(cfg)


def worker_count() -> int:
    raw = os.environ.get("FLOQCC_WORKERS", "")
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"FLOQCC_WORKERS must be an integer, got {raw!r}") from exc
    return max(1, n)


def _run_many(configs: list[RunConfig]) -> list[PointResult]:
    workers = min(worker_count(), len(configs))
    if workers <= 1:
        return [run_point(c) for c in configs]
    import concurrent.futures as cf
    import multiprocessing as mp

    # cap BLAS threads in the children (inherited at spawn)
    saved = {}
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        saved[var] = os.environ.get(var)
        os.environ[var] = "1"
    try:
        ctx = mp.get_context("spawn")
        with cf.ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            results = list(pool.map(_run_point_worker, configs, chunksize=1))
    finally:
        for var, val in saved.items():
            if val is None:
                os.environ.pop(var, None)
            else:
                os.environ[var] = val
    return results


def run_sweep(cfg: RunConfig) -> SweepResult:
    """One row per sweep point; points are independent, partial failures are
    flagged and the sweep continues.  Raises if every point failed."""
    cfg.validate()
    values = sweep_values(cfg.sweep_start, cfg.sweep_stop, cfg.sweep_steps)
    configs = [_point_config(cfg, cfg.sweep_variable, v) for v in values]
    points = _run_many(configs)
    result = SweepResult(config=cfg, points=points)
    if result.n_failed == len(points):
        raise SteadyStateError(
            f"all {len(points)} sweep points failed; first error: {points[0].error}"
        )
    return result


def run_phase(cfg: RunConfig) -> SweepResult:
    """2-D grid: sweep2 (outer) x sweep (inner), flattened row-major."""
    cfg.validate()
    outer = sweep_values(cfg.sweep2_start, cfg.sweep2_stop, cfg.sweep2_steps)
    inner = sweep_values(cfg.sweep_start, cfg.sweep_stop, cfg.sweep_steps)
    configs = []
    for vo in outer:
        base = _point_config(cfg, cfg.sweep2_variable, vo)
        configs.extend(_point_config(base, cfg.sweep_variable, vi) for vi in inner)
    points = _run_many(configs)
    result = SweepResult(config=cfg, points=points)
    if result.n_failed == len(points):
        raise SteadyStateError("all phase-grid points failed")
    return result
