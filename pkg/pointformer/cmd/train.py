import logging
from typing import List, Optional

from invoke import task

from pointformer.cmd.common import load_run, write_loss_curve
from pointformer.harness.trainer import make_scenes, train
from pointformer.nn.checkpoint import save_checkpoint
from pointformer.util.context import RunContext

logger = logging.getLogger(__name__)


@task(
    help={
        "config": "Config file(s), comma-separated; later files win",
        "out": "Output directory (default: run.out_dir)",
        "seed": "Run seed (default: run.seed)",
        "override": "section.key=value, repeatable",
    },
    iterable=["override"],
)
@RunContext.wrap_context
def cmd_train(
    c: RunContext,
    config: str = "",
    out: str = "",
    seed: str = "",
    override: Optional[List[str]] = None,
) -> None:
    """Train a network on synthetic scenes; writes loss.csv and checkpoint.npz."""
    _, run = load_run(c, config, out, seed, override)
    c.section(
        f"train {run.backbone.head} [{run.backbone.attention.label()}] "
        f"seed {run.seed}, {run.iterations} iterations"
    )
    scenes = make_scenes(run)
    logger.debug(f"{len(scenes)} scene(s), {sum(len(s.cloud) for s in scenes)} points in total")
    result = train(run, scenes)
    write_loss_curve(c, result)
    path = save_checkpoint(
        c.artifact("checkpoint.npz"),
        result.model,
        run.backbone.to_dict(),
        extra={"seed": run.seed, "iterations": run.iterations},
    )
    c.note(f"checkpoint: {path}")
    c.status(True, f"final loss {result.final_loss:.6f}")
