"""Helpers shared by the command modules: config loading and run artifacts."""

from typing import List, Optional, Tuple

from pointformer.harness.metrics import MetricsReport
from pointformer.harness.runconfig import RunConfig
from pointformer.harness.trainer import TrainResult
from pointformer.util.conf import PointformerConfig
from pointformer.util.context import RunContext, parse_seed
from pointformer.util.errors import ConfigError


def load_run(
    c: RunContext,
    config: str = "",
    out: str = "",
    seed: str = "",
    override: Optional[List[str]] = None,
) -> Tuple[PointformerConfig, RunConfig]:
    """
    Load the layered configuration, validate it into a RunConfig, prepare the output
    directory and record the resolved configuration there as config.cfg.
    """
    conf = PointformerConfig(config or None, overrides=override or [])
    run_seed = parse_seed(seed)
    if run_seed is not None:
        conf.set_variable("run", "seed", str(run_seed))
    if out:
        conf.set_variable("run", "out_dir", out)
    run = RunConfig.from_config(conf)
    c.use_out_dir(run.out_dir)
    c.write_text("config.cfg", conf.dump())
    return conf, run


def parse_ints(name: str, value: str) -> List[int]:
    try:
        items = [int(v) for v in value.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(name, f"expected comma-separated integers, got: {value}") from exc
    if not items or any(v < 1 for v in items):
        raise ConfigError(name, f"expected positive integers, got: {value}")
    return items


def parse_float(name: str, value: str) -> float:
    try:
        return float(value)
    except ValueError as exc:
        raise ConfigError(name, f"expected a number, got: {value}") from exc


def write_loss_curve(c: RunContext, result: TrainResult) -> str:
    return c.write_csv(
        "loss.csv",
        ["iteration", "lr", "loss"],
        ((r.iteration, f"{r.lr:.8g}", f"{r.loss:.8f}") for r in result.losses),
    )


def write_metrics(c: RunContext, report: MetricsReport) -> None:
    c.write_json("metrics.json", report.to_dict())
    c.write_csv("metrics.csv", ["class", "iou", "acc", "support"], report.class_rows())
    rows = [("oa", report.oa), ("macc", report.macc), ("miou", report.miou)]
    if report.ins_miou is not None:
        rows += [("ins_miou", report.ins_miou), ("cat_miou", report.cat_miou)]
    c.table(["metric", "value"], rows)
