import numpy as np
from invoke import task
from invoke.exceptions import Exit

from pointformer.cmd.common import parse_float
from pointformer.harness.gradsuite import NETWORK_TOL, run_grad_suite
from pointformer.nn.gradcheck import DEFAULT_TOL, GradCheckReport
from pointformer.util.context import EXIT_FAILURE, RunContext, parse_seed


def _sci(value: float) -> str:
    return np.format_float_scientific(value, trim="-", exp_digits=1)


@task(
    help={
        "out": "Output directory for gradcheck.csv",
        "seed": "Seed for inputs, weights and probe directions",
        "tol": f"Relative error tolerance for layers and attention (default {_sci(DEFAULT_TOL)})",
        "network_tol": f"Tolerance for the end-to-end networks (default {_sci(NETWORK_TOL)})",
    }
)
@RunContext.wrap_context
def cmd_gradcheck(
    c: RunContext,
    out: str = "runs/gradcheck",
    seed: str = "0",
    tol: str = _sci(DEFAULT_TOL),
    network_tol: str = _sci(NETWORK_TOL),
) -> None:
    """Finite-difference check of every layer type, attention variant and network head."""
    c.use_out_dir(out)
    c.section("gradient check (float64, central differences)")

    def show(report: GradCheckReport) -> None:
        if c.verbose or not report.passed:
            name, error = report.worst()
            c.note(f"{report.component:<24} {report.variant:<34} {error:.3g} ({name})")

    reports = run_grad_suite(
        seed=parse_seed(seed) or 0,
        tol=parse_float("tol", tol),
        network_tol=parse_float("network_tol", network_tol),
        on_report=show,
    )
    rows = [
        (r.component, r.variant, f"{r.max_error:.3e}", _sci(r.tol), _status(r)) for r in reports
    ]
    c.table(["component", "variant", "max_rel_error", "tol", "status"], rows)
    c.write_csv("gradcheck.csv", ["component", "variant", "max_rel_error", "tol", "status"], rows)

    failed = [r for r in reports if not r.passed]
    c.status(not failed, f"{len(reports) - len(failed)}/{len(reports)} checks passed")
    if failed:
        raise Exit(code=EXIT_FAILURE)


def _status(report: GradCheckReport) -> str:
    return "pass" if report.passed else "FAIL"
