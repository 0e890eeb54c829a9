"""Run a MILP solver as a subprocess through MPS / MIP-start / solution files.

The solver is treated as untrusted: its schedule is decoded from the raw
variable values, checked against the difference constraints and re-scored
locally. Any objective the solver prints is ignored.
"""

from __future__ import annotations

import logging
import os
import shlex
import shutil
import subprocess
import sys
import tempfile
import time
from pathlib import Path

from ..errors import ExternalSolverError, ModelError, VerificationError
from ..formulation import build_sdc, emit_mip_start, emit_mps, evaluate_objective, feasible, parse_solution
from ..warmstart import consistency_filter
from .bnb import as_partial, root_bound
from .report import ExternalBackend, SolveReport, relative_gap

logger = logging.getLogger(__name__)

#: Environment variable holding the default command template.
COMMAND_ENV = "HYBRIDSCHED_SOLVER_CMD"


def bundled_command():
    """Command template for the bundled scipy/HiGHS backend."""
    return f"{shlex.quote(sys.executable)} -m hybridsched.solvers.milp_cli {{model}} {{start}} {{timelimit}} {{solution}}"


def default_backend(keep_artifacts=None):
    """External backend from ``$HYBRIDSCHED_SOLVER_CMD``."""
    cmd = os.environ.get(COMMAND_ENV)
    if not cmd:
        raise ExternalSolverError(f"no external solver configured; set {COMMAND_ENV}")
    return ExternalBackend(cmd, keep_artifacts=keep_artifacts)


def _workspace(backend, label):
    if backend.keep_artifacts:
        root = Path(backend.keep_artifacts)
        root.mkdir(parents=True, exist_ok=True)
        return Path(tempfile.mkdtemp(prefix=f"{label or 'lane'}-", dir=root)), False
    return Path(tempfile.mkdtemp(prefix="hybridsched-")), True


def solve_external(request):
    """Solve ``request.model`` with the command template of ``request.backend``."""
    backend = request.backend
    if isinstance(backend, str) and backend != "internal":
        backend = ExternalBackend(backend)
    if not isinstance(backend, ExternalBackend):
        backend = default_backend()
    t0 = time.perf_counter()
    model = request.model
    pb = model._require_problem()
    base = dict(label=request.label, seed=request.seed, hinted=request.warm_start is not None)
    ws, cleanup = _workspace(backend, request.label)
    try:
        model_path = ws / "model.mps"
        start_path = ws / "start.mst"
        sol_path = ws / "solution.sol"
        model_path.write_text(emit_mps(model))
        partial = as_partial(request.warm_start, pb.dag.node_count)
        if partial is not None and pb.feasible:
            partial = consistency_filter(partial, build_sdc(pb.dag, pb.latency))
            start_path.write_text(emit_mip_start(partial, model))
        else:
            start_path.write_text("")
        try:
            cmd = backend.command.format(
                model=shlex.quote(str(model_path)),
                start=shlex.quote(str(start_path)),
                timelimit=f"{request.time_budget:g}",
                solution=shlex.quote(str(sol_path)),
            )
        except (KeyError, IndexError) as exc:
            raise ExternalSolverError(f"bad command template placeholder {exc}") from None
        logger.debug("running external solver: %s", cmd)
        try:
            proc = subprocess.run(
                shlex.split(cmd),
                capture_output=True,
                text=True,
                cwd=ws,
                timeout=request.time_budget + backend.grace,
            )
        except subprocess.TimeoutExpired:
            raise ExternalSolverError(
                f"external solver exceeded {request.time_budget:g} s budget plus {backend.grace:g} s grace"
            ) from None
        except OSError as exc:
            raise ExternalSolverError(f"cannot start external solver: {exc}") from None
        (ws / "solver.log").write_text(proc.stdout + proc.stderr)
        if proc.returncode != 0:
            tail = (proc.stderr or proc.stdout).strip().splitlines()[-5:]
            raise ExternalSolverError(
                f"external solver exited with status {proc.returncode}: " + " | ".join(tail)
            )
        if not sol_path.exists():
            raise ExternalSolverError(f"external solver wrote no solution file {sol_path}")
        try:
            values, status = parse_solution(sol_path.read_text(), model)
        except ModelError as exc:
            raise ExternalSolverError(f"unparseable solution file: {exc}") from None
        runtime = time.perf_counter() - t0
        if not values:
            if status == "infeasible" or not pb.feasible:
                return SolveReport(status="infeasible", runtime=runtime, message="solver reported infeasible", **base)
            return SolveReport(
                status="timeout_no_incumbent", runtime=runtime, best_bound=root_bound(pb),
                message="solver returned no solution", **base,
            )
        try:
            schedule = model.decode(values)
        except ModelError as exc:
            raise ExternalSolverError(f"unparseable solution file: {exc}") from None
        sdc = build_sdc(pb.dag, pb.latency)
        if not feasible(schedule, sdc):
            bad = sdc.violations(schedule)
            raise VerificationError(
                f"external solution failed verification: {len(bad)} violated difference constraints"
            )
        ev = evaluate_objective(schedule, pb.dag, pb.latency, pb.alpha, baseline=request.baseline)
        optimal = status == "optimal"
        bnd = ev.combined if optimal else min(ev.combined, root_bound(pb))
        return SolveReport(
            status="optimal" if optimal else "feasible",
            objective=ev.combined,
            normalized_pct=ev.normalized_pct,
            best_bound=bnd,
            gap=relative_gap(ev.combined, bnd),
            schedule=schedule,
            incumbent_trace=[(runtime, ev.combined)],
            runtime=runtime,
            message=str(ws) if not cleanup else "",
            **base,
        )
    finally:
        if cleanup:
            shutil.rmtree(ws, ignore_errors=True)
