"""
Controlled attention experiments: each variant of one design decision is trained from the
same seeds on the same synthetic task and evaluated on a held-out scene.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from invoke import task

from pointformer.cmd.common import load_run
from pointformer.harness.runconfig import RunConfig
from pointformer.harness.trainer import evaluate, make_scenes, train
from pointformer.util.context import RunContext
from pointformer.util.errors import TrainingDiverged

logger = logging.getLogger(__name__)

METRICS = ("oa", "macc", "miou", "final_loss")


@dataclass
class AblationRow:
    experiment: str
    variant: str
    scores: Dict[str, float]

    @property
    def diverged(self) -> bool:
        return any(np.isnan(v) for v in self.scores.values())

    def cells(self) -> Tuple[object, ...]:
        return (self.experiment, self.variant) + tuple(
            f"{self.scores[m]:.6f}" for m in METRICS
        )


def variants(run: RunConfig, experiment: str) -> List[Tuple[str, RunConfig]]:
    """(label, run) pairs for one experiment; the other settings keep their configured values."""
    spec = run.ablate
    if experiment == "operator":
        return [(op, run.with_attention(operator=op)) for op in spec.operators]
    if experiment == "pos_mode":
        return [(mode, run.with_attention(pos_mode=mode)) for mode in spec.pos_modes]
    if experiment == "normalize":
        return [(norm, run.with_attention(normalize=norm)) for norm in spec.normalizers]
    return [(f"k={k}", run.with_attention(k=k)) for k in spec.ks]


def score_variant(run: RunConfig, seeds: Sequence[int]) -> Dict[str, float]:
    """Metrics averaged over seeds; every value is NaN when any seed diverges."""
    totals = dict.fromkeys(METRICS, 0.0)
    for seed in seeds:
        seeded = run.with_seed(seed)
        try:
            result = train(seeded, make_scenes(seeded))
        except TrainingDiverged as e:
            logger.warning(f"seed {seed} diverged: {e}")
            return dict.fromkeys(METRICS, float("nan"))
        held_out = make_scenes(seeded, seed=seeded.data.scene.seed + 1)
        report = evaluate(result.model, held_out, seeded.fps_start)
        totals["oa"] += report.oa
        totals["macc"] += report.macc
        totals["miou"] += report.miou
        totals["final_loss"] += result.final_loss
    return {m: v / len(seeds) for m, v in totals.items()}


@task(
    help={
        "config": "Config file(s); the ablate preset is a good start",
        "out": "Output directory for ablation.csv",
        "seed": "Run seed (default: run.seed); ablate.seeds lists the averaged seeds",
        "override": "section.key=value, repeatable",
    },
    iterable=["override"],
)
@RunContext.wrap_context
def cmd_ablate(
    c: RunContext,
    config: str = "",
    out: str = "",
    seed: str = "",
    override: Optional[List[str]] = None,
) -> None:
    """Train and compare attention variants side by side; writes ablation.csv."""
    _, run = load_run(c, config, out, seed, override)
    seeds = run.ablate.seeds
    rows: List[AblationRow] = []
    for experiment in run.ablate.experiments:
        c.section(f"ablation: {experiment} ({len(seeds)} seed(s))")
        for label, variant_run in variants(run, experiment):
            row = AblationRow(experiment, label, score_variant(variant_run, seeds))
            rows.append(row)
            if row.diverged:
                c.warn(f"{experiment}={label} diverged; recorded as NaN")
            else:
                c.note(f"{label:<20} OA {row.scores['oa']:.4f}  mIoU {row.scores['miou']:.4f}")

    header = ["experiment", "variant"] + list(METRICS)
    c.table(header, [r.cells() for r in rows])
    c.write_csv("ablation.csv", header, (r.cells() for r in rows))
    _check_direction(c, rows)
    c.status(True, f"{len(rows)} variant(s)")


def _check_direction(c: RunContext, rows: Sequence[AblationRow]) -> None:
    oa = {r.variant: r.scores["oa"] for r in rows if r.experiment == "operator"}
    if "vector" in oa and "mlp" in oa and oa["vector"] < oa["mlp"]:
        c.warn(f"vector attention OA {oa['vector']:.4f} trails the MLP baseline {oa['mlp']:.4f}")
