import logging
import os
from typing import List, Optional

from invoke import task

from pointformer.cmd.common import load_run, write_metrics
from pointformer.harness.trainer import build_model, evaluate, make_scenes
from pointformer.nn.checkpoint import read_checkpoint, restore_checkpoint
from pointformer.util.context import RunContext

logger = logging.getLogger(__name__)


@task(
    help={
        "checkpoint": "Checkpoint file (default: <out>/checkpoint.npz)",
        "config": "Config file(s); defaults to the config.cfg next to the checkpoint",
        "out": "Output directory (default: run.out_dir)",
        "seed": "Run seed (default: run.seed)",
        "override": "section.key=value, repeatable",
    },
    iterable=["override"],
)
@RunContext.wrap_context
def cmd_eval(
    c: RunContext,
    checkpoint: str = "",
    config: str = "",
    out: str = "",
    seed: str = "",
    override: Optional[List[str]] = None,
) -> None:
    """Evaluate a checkpoint on the configured scenes; writes metrics.json and metrics.csv."""
    if checkpoint and not config:
        saved = os.path.join(os.path.dirname(os.path.abspath(checkpoint)), "config.cfg")
        if os.path.exists(saved):
            config = saved
    _, run = load_run(c, config, out, seed, override)
    checkpoint = checkpoint or c.artifact("checkpoint.npz")
    c.section(f"eval {checkpoint}")

    stored = read_checkpoint(checkpoint)
    logger.debug(f"checkpoint header: {stored['header']}")
    model = build_model(run)
    restore_checkpoint(model, stored, run.backbone.to_dict())
    report = evaluate(model, make_scenes(run), run.fps_start)
    write_metrics(c, report)
    c.status(True, f"OA {report.oa:.4f}  mAcc {report.macc:.4f}  mIoU {report.miou:.4f}")
