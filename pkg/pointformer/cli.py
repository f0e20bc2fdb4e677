import logging

from invoke import Argument, Collection, Program, task

from pointformer import __version__
from pointformer.cmd import ablate, bench, evaluate, gradcheck, train

logging.getLogger("pointformer").setLevel(logging.INFO)


@task
def help(c):
    """📖 Pointformer - point transformer networks on plain numpy

    🏋️ TRAINING & EVALUATION
    ├── train                 - Train on synthetic scenes (loss.csv, checkpoint.npz)
    └── eval                  - Score a checkpoint (metrics.json, metrics.csv)

    🔬 VERIFICATION
    ├── gradcheck             - Finite differences over every layer and attention variant
    └── ablate                - Attention variants side by side (ablation.csv)

    ⏱️  TIMING
    ├── bench-knn             - kNN grid: point counts x k, median ms (bench_knn.csv)
    └── bench-net             - Network forward passes per point count (bench_net.csv)

    🎛️  SHARED OPTIONS
    ├── --config=a.cfg,b.cfg  - Config files layered over the packaged defaults
    ├── --override=sec.key=v  - Single value override, repeatable
    ├── --out=DIR             - Output directory (config.cfg is written there)
    ├── --seed=N              - Run seed
    └── --verbose             - Debug-level library logging (or POINTFORMER_VERBOSE=1)

    📦 PRESETS (pointformer/cfg/presets)
    └── desk, overfit, cls, parts, ablate

    📋 EXAMPLES:

    pointformer train --config=pointformer/cfg/presets/overfit.cfg --out=runs/overfit
    pointformer eval --checkpoint=runs/overfit/checkpoint.npz
    pointformer gradcheck
    pointformer bench-knn --sizes=10000,20000 --ks=8,16,32 --repeats=5
    pointformer ablate --config=pointformer/cfg/presets/ablate.cfg --override=ablate.seeds=0,1

    Use 'pointformer --list' to see all commands, 'pointformer --help <command>' for options.
    """
    print(help.__doc__)


ns = Collection()
ns.add_task(help)
ns.add_task(train.cmd_train, name="train")
ns.add_task(evaluate.cmd_eval, name="eval")
ns.add_task(gradcheck.cmd_gradcheck, name="gradcheck")
ns.add_task(bench.cmd_bench_knn, name="bench-knn")
ns.add_task(bench.cmd_bench_net, name="bench-net")
ns.add_task(ablate.cmd_ablate, name="ablate")


class PointformerProgram(Program):
    """invoke Program with a global --verbose flag."""

    def core_args(self):
        return super().core_args() + [
            Argument(names=("verbose",), kind=bool, default=False, help="Debug-level logging.")
        ]

    def update_config(self, merge: bool = True) -> None:
        super().update_config(merge=False)
        if self.args["verbose"].value:
            self.config.load_overrides({"pointformer_verbose": True}, merge=False)
        if merge:
            self.config.merge()


program = PointformerProgram(
    namespace=ns, version=__version__, name="pointformer", binary="pointformer"
)


def main() -> None:
    program.run()
