"""The btc-lab workflows, one BaseCommand subclass per subcommand."""

import collections
import logging
from typing import Any, Dict, List, Optional, Type

import numpy as np  # type: ignore[import]
from btc import analysis, core, coupling, cumulant, exact, export, fixedpoints
from btc import meanfield
from btc.registry import Defaults, Landmarks
from harness import configs
from harness.base_command import BaseCommand

LOGGER = logging.getLogger()

# Jt horizons used when a simulate config leaves tmax unset
ENGINE_TMAX = {
    core.Engine.MEANFIELD: 100.0,
    core.Engine.GAUSSIAN: 20.0,
    core.Engine.EXACT: 30.0,
}
EXACT_SAMPLES = 301


########################################################################################
# SIMULATE #############################################################################
########################################################################################


class SimulateCommand(BaseCommand):
    """Trajectory from the mean-field, Gaussian or exact engine."""

    name = "simulate"
    config_cls = configs.SimulateConfig

    def execute(self) -> None:
        cfg: configs.SimulateConfig = self.config
        tmax = cfg.tmax if cfg.tmax is not None else ENGINE_TMAX[cfg.engine]
        init = cfg.initial_state()
        self.add_summary(engine=cfg.engine.value, tmax=tmax)

        if cfg.engine == core.Engine.MEANFIELD:
            traj = meanfield.integrate_mf(
                cfg.params(),
                init,
                tmax,
                cfg.tolerances(Defaults.TOL),
                cfg.samples,
                cfg.strategy or "auto",
            )
            self._emit_meanfield(traj)
        elif cfg.engine == core.Engine.GAUSSIAN:
            gauss = cumulant.integrate_gaussian(
                cfg.params(),
                init,
                tmax,
                cfg.tolerances(Defaults.TOL),
                cfg.samples,
                cfg.strategy or "bdf",
                raise_on_truncation=True,
            )
            self._emit_gaussian(gauss)
        else:
            assert cfg.n_sites is not None
            rho0 = None
            if init is not None:
                rho0 = exact.DensityMatrix.product([init] * cfg.n_sites)
            series = exact.integrate_exact(
                cfg.n_sites,
                cfg.eta,
                cfg.chi,
                rho0,
                tmax,
                cfg.tolerances(Defaults.EXACT_TOL),
                cfg.J,
                cfg.samples or EXACT_SAMPLES,
                cfg.strategy or "rk45",
                keep_states=cfg.dump_rho,
            )
            self._emit_exact(series)

    def salvage(self, partial: Any) -> None:
        if isinstance(partial, core.Trajectory):
            self._emit_meanfield(partial)
        elif isinstance(partial, core.GaussTrajectory):
            self._emit_gaussian(partial)
        elif isinstance(partial, core.ExactSeries):
            self._emit_exact(partial)

    def _emit_meanfield(self, traj: core.Trajectory) -> None:
        self.add_output(export.write_trajectory(self.path(), traj))
        self.add_output(export.write_trajectory_json(self.path(".json"), traj))
        self.add_summary(n_samples=len(traj.times), stats=traj.stats)
        if len(traj.times):
            n_drift, m_drift = traj.drift()
            self.add_summary(final=traj.states[-1], n_drift=n_drift, m_drift=m_drift)

    def _emit_gaussian(self, traj: core.GaussTrajectory) -> None:
        self.add_output(export.write_gaussian(self.path(), traj))
        if traj.params.n_sites is not None:
            path = self.path(".distances.csv")
            self.add_output(export.write_gaussian_distances(path, traj))
        finite = traj.delta_z[np.isfinite(traj.delta_z)]
        self.add_summary(
            n_samples=len(traj.times),
            max_delta_z=float(np.max(finite)) if finite.size else None,
            stats=traj.stats,
        )

    def _emit_exact(self, series: core.ExactSeries) -> None:
        self.add_output(export.write_exact(self.path(), series))
        if self.config.dump_rho and series.snapshots is not None:
            path = self.path(".rho.bin")
            self.add_output(export.write_rho_dump(path, series.snapshots))
        self.add_summary(
            n_samples=len(series.samples),
            max_trace_err=max((s.trace_err for s in series.samples), default=None),
            max_herm_err=max((s.herm_err for s in series.samples), default=None),
            stats=series.stats,
        )


########################################################################################
# FIXED POINTS #########################################################################
########################################################################################


def steepest_single_branch(rows: List[fixedpoints.BranchRow]) -> Optional[float]:
    """Midpoint chi of the steepest step in mz between neighbouring single-root rows."""
    best, where = -1.0, None
    for a, b in zip(rows[:-1], rows[1:]):
        if len(a.points) != 1 or len(b.points) != 1:
            continue
        slope = abs(b.points[0].m.mz - a.points[0].m.mz) / (b.chi - a.chi)
        if slope > best:
            best, where = slope, 0.5 * (a.chi + b.chi)
    return where


class FixedPointsCommand(BaseCommand):
    """Fixed-point branches mz(chi) with stability labels at one eta."""

    name = "fixed-points"
    config_cls = configs.FixedPointsConfig

    def execute(self) -> None:
        cfg: configs.FixedPointsConfig = self.config
        rows = fixedpoints.branch_curves(cfg.eta, cfg.chi_grid())
        self.add_output(export.write_branches(self.path(), rows))
        interval = fixedpoints.coexistence_interval(cfg.eta) if cfg.eta > 1 else None
        self.add_summary(
            eta=cfg.eta,
            coexistence=interval,
            n_multi_root=sum(len(r.points) == 3 for r in rows),
            steepest_chi=steepest_single_branch(rows),
        )


class PhaseDiagramCommand(BaseCommand):
    """Phase labels over a (chi, eta) grid."""

    name = "phase-diagram"
    config_cls = configs.PhaseDiagramConfig

    def execute(self) -> None:
        cfg: configs.PhaseDiagramConfig = self.config
        grid = fixedpoints.scan_phase_diagram(
            cfg.chi_grid(), cfg.eta_grid(), threads=self.threads
        )
        self.add_output(export.write_phase_diagram(self.path(), grid))
        self.add_output(export.write_phase_diagram_json(self.path(".json"), grid))
        counts = collections.Counter(lab.value for row in grid.labels for lab in row)
        self.add_summary(cells=dict(sorted(counts.items())))


class CuspCommand(BaseCommand):
    """Cusp ending the coexistence region, by bisection and in closed form."""

    name = "cusp"
    config_cls = configs.CuspConfig

    def execute(self) -> None:
        cfg: configs.CuspConfig = self.config
        found = fixedpoints.locate_cusp(cfg.eta_lo, cfg.eta_hi, cfg.tol)
        closed = fixedpoints.cusp_closed_form()
        self.add_output(export.write_cusp(self.path(), [found, closed]))
        self.add_summary(
            bisection=found,
            closed_form=closed,
            chi_offset=found.chi - closed.chi,
            eta_offset=found.eta - closed.eta,
            landmark=Landmarks.C,
        )


########################################################################################
# DYNAMICS STUDIES #####################################################################
########################################################################################


class FitDecayCommand(BaseCommand):
    """Decay rate of the damped oscillations against eta."""

    name = "fit-decay"
    config_cls = configs.FitDecayConfig

    def execute(self) -> None:
        cfg: configs.FitDecayConfig = self.config
        scan = analysis.scan_decay_rate(
            cfg.etas,
            cfg.chi,
            cfg.tmax,
            kick=cfg.kick,
            n_samples=cfg.samples,
            threads=self.threads,
        )
        if scan.beta is None:
            raise core.FitError("fewer than two eta samples could be fitted", scan)
        self._emit(scan)

    def salvage(self, partial: Any) -> None:
        if isinstance(partial, core.DecayScan):
            self._emit(partial)

    def _emit(self, scan: core.DecayScan) -> None:
        self.add_output(export.write_decay(self.path(), scan))
        self.add_summary(
            chi=scan.chi,
            beta=scan.beta,
            beta_stderr=scan.beta_stderr,
            intercept=scan.intercept,
            linear_rates={str(r.eta): r.B_linear for r in scan.rows},
            failed={str(r.eta): r.error for r in scan.rows if r.error is not None},
        )


class BasinCommand(BaseCommand):
    """Which attractor each initial state on the mx = 0 plane reaches."""

    name = "basin"
    config_cls = configs.BasinConfig

    def execute(self) -> None:
        cfg: configs.BasinConfig = self.config
        params = core.ModelParams(chi=cfg.chi, eta=cfg.eta)
        inits = analysis.basin_grid(cfg.grid, cfg.radius)
        traces = analysis.trace_basin(
            params, inits, cfg.tmax, n_samples=cfg.samples, threads=self.threads
        )
        self.add_output(export.write_basin(self.path(), traces))
        attractors = [fp for fp in fixedpoints.fixed_points(params) if fp.attractive]
        counts: Dict[str, int] = collections.Counter(
            "unresolved" if p.attractor is None else str(p.attractor) for p in traces
        )
        self.add_summary(
            attractors=[{"m": fp.m, "branch": fp.branch} for fp in attractors],
            outcomes=dict(sorted(counts.items())),
            spiraled=sum(p.spiraled for p in traces),
        )


class CoeffCommand(BaseCommand):
    """The dissipation weight F against eta for several sizes."""

    name = "coeff"
    config_cls = configs.CoeffConfig

    def execute(self) -> None:
        cfg: configs.CoeffConfig = self.config
        etas = cfg.eta_grid()
        values = coupling.coefficient_curves(cfg.sizes, etas)
        self.add_output(export.write_coeff(self.path(), cfg.sizes, etas, values))
        # Where the N -> infinity curve vanishes
        zero = [eta for eta in etas if coupling.f_coeff_limit(eta) == 0]
        self.add_summary(
            sizes=cfg.sizes,
            long_range_window=[min(zero), max(zero)] if zero else None,
        )


COMMANDS: Dict[str, Type[BaseCommand]] = {
    cls.name: cls
    for cls in (
        SimulateCommand,
        FixedPointsCommand,
        PhaseDiagramCommand,
        FitDecayCommand,
        CoeffCommand,
        BasinCommand,
        CuspCommand,
    )
}
