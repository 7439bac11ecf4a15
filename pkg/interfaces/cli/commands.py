"""
Command-line interface layer.
Parses commands and flags, wires the file-backed repositories and delegates
to the application use cases.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from pydantic import ValidationError

from application.use_cases.evaluate_scene import EvaluateSceneUseCase
from application.use_cases.generate_root_dataset import GenerateRootDatasetUseCase
from application.use_cases.generate_scene import GenerateSceneUseCase
from application.use_cases.plot_report import PlotReportUseCase
from application.use_cases.run_ablation import DEFAULT_GRIDS, RunAblationUseCase
from application.use_cases.run_property_checks import RunPropertyChecksUseCase, Suite
from application.use_cases.run_stage import ALL_STAGES, RunStageUseCase
from config import TrainConfig, parse_value, settings
from domain.errors import SelfPoseError
from domain.models.camera import Workspace
from domain.models.poses import SkeletonSpec
from domain.models.scene import NoisePreset
from domain.models.training import StageName
from infrastructure.networks.bundle import MAX_PARAMETERS, build_model_bundle
from infrastructure.persistence.checkpoint_store import FileCheckpointRepository
from infrastructure.persistence.file_root_dataset_repository import FileRootDatasetRepository
from infrastructure.persistence.file_scene_repository import FileSceneRepository, read_cameras
from infrastructure.persistence.report_store import LOSS_LOG_FILE, JsonLinesLossLog, JsonReportRepository
from infrastructure.plotting.matplotlib_plotter import MatplotlibReportPlotter

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
ALL_SUITES = "all"


def positive_int(raw: str) -> int:
    value = int(raw)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {raw}")
    return value


def key_value(raw: str) -> tuple:
    if "=" not in raw:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {raw}")
    key, value = raw.split("=", 1)
    return key.strip(), parse_value(value.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="selfpose3d", description="Desk-scale self-supervised multi-view multi-person 3D pose estimation"
    )
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--quiet", action="store_true", help="Disable progress bars")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="Generate a synthetic multi-view scene")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--frames", type=positive_int, required=True)
    p.add_argument("--persons", type=positive_int, required=True)
    p.add_argument("--views", type=positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-preset", choices=[n.value for n in NoisePreset], default=NoisePreset.DEFAULT.value)

    p = sub.add_parser("gen-roots", help="Generate the synthetic root dataset for a calibrated rig")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--samples", type=positive_int, required=True)
    p.add_argument("--max-roots", type=positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--calib", type=Path, required=True, help="calibration.json or a scene directory")
    p.add_argument("--config", type=Path, help="TrainConfig file for the grid and root settings")

    p = sub.add_parser("train", help="Run one training stage or all of them")
    p.add_argument("--config", type=Path)
    p.add_argument("--scene", type=Path, required=True)
    p.add_argument("--stage", choices=[s.value for s in StageName] + [ALL_STAGES], required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--roots", type=Path, help="Synthetic root dataset directory; generated in memory when omitted")
    p.add_argument("--set", dest="overrides", type=key_value, action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--stop-after", type=positive_int, help="Interrupt each stage after this many steps")

    p = sub.add_parser("eval", help="Evaluate a checkpoint or the oracle pipeline")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--checkpoint", type=Path)
    source.add_argument("--oracle", action="store_true", help="Exact heatmaps through bypassed 3D networks")
    p.add_argument("--scene", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--views", type=positive_int, help="Use only the first N cameras")

    p = sub.add_parser("plot", help="Render a report into image files")
    p.add_argument("--report", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--loss-log", type=Path)
    p.add_argument("--scene", type=Path, help="Scene of the report, for skeleton overlays")
    p.add_argument("--max-overlays", type=int, default=2)

    p = sub.add_parser("check", help="Run the property suites")
    p.add_argument("--suite", choices=[s.value for s in Suite] + [ALL_SUITES], required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, help="Also write the results as JSON")

    p = sub.add_parser("ablate", help="Sweep one config key over the pose stages")
    p.add_argument("--config", type=Path)
    p.add_argument("--scene", type=Path, required=True)
    p.add_argument("--eval-scene", type=Path, required=True)
    p.add_argument("--param", required=True, help="Dotted TrainConfig key, e.g. hyper.lambda")
    p.add_argument("--values", nargs="+", help="Values to sweep; hyper.lambda and hyper.sigma_attn have default grids")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--init", type=Path, help="Completed root-stage checkpoint to start every run from")
    p.add_argument("--set", dest="overrides", type=key_value, action="append", default=[], metavar="KEY=VALUE")

    p = sub.add_parser("params", help="Print the parameter count of every network")
    p.add_argument("--config", type=Path)
    p.add_argument("--set", dest="overrides", type=key_value, action="append", default=[], metavar="KEY=VALUE")
    return parser


def seed_overrides(overrides: Sequence[tuple]) -> Dict[str, Any]:
    """CLI overrides with the SELFPOSE3D_SEED environment override on top"""
    out = dict(overrides)
    if settings.SEED is not None:
        out["seed"] = settings.SEED
    return out


def effective_seed(seed: int) -> int:
    return settings.SEED if settings.SEED is not None else seed


class CliController:
    """Maps parsed commands to use cases"""

    def __init__(self, show_progress: bool = True):
        self.show_progress = show_progress
        self.report_repo = JsonReportRepository()

    def synth(self, args: argparse.Namespace) -> int:
        GenerateSceneUseCase(FileSceneRepository(args.out)).execute(
            args.frames,
            args.persons,
            args.views,
            seed=effective_seed(args.seed),
            noise_preset=NoisePreset(args.noise_preset),
            show_progress=self.show_progress,
        )
        return 0

    def gen_roots(self, args: argparse.Namespace) -> int:
        config = TrainConfig.from_file(args.config) if args.config else TrainConfig()
        GenerateRootDatasetUseCase(FileRootDatasetRepository(args.out)).execute(
            read_cameras(args.calib),
            args.samples,
            args.max_roots,
            seed=effective_seed(args.seed),
            grid_config=config.grid,
            root_config=config.root,
        )
        return 0

    def train(self, args: argparse.Namespace) -> int:
        config = TrainConfig.from_file(args.config, seed_overrides(args.overrides))
        scene = FileSceneRepository(args.scene).load_scene()
        samples = FileRootDatasetRepository(args.roots).load_samples() if args.roots else None
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "config.resolved").write_text(config.to_key_values())
        use_case = RunStageUseCase(
            FileCheckpointRepository(args.out), JsonLinesLossLog(args.out / LOSS_LOG_FILE), self.show_progress
        )
        outcome = use_case.execute(args.stage, scene, config, root_samples=samples, stop_after=args.stop_after)
        for result in outcome.results:
            logger.info(
                f"{result.stage.value}: {result.steps} steps, {'completed' if result.completed else 'interrupted'}"
            )
        return 0

    def eval(self, args: argparse.Namespace) -> int:
        scene = FileSceneRepository(args.scene).load_scene()
        checkpoint_repo = FileCheckpointRepository(args.checkpoint.parent if args.checkpoint else args.out.parent)
        EvaluateSceneUseCase(checkpoint_repo, self.report_repo, self.show_progress).execute(
            scene, args.out, checkpoint=args.checkpoint, oracle=args.oracle, num_views=args.views
        )
        return 0

    def plot(self, args: argparse.Namespace) -> int:
        loss_log = JsonLinesLossLog(args.loss_log) if args.loss_log else None
        scene = FileSceneRepository(args.scene).load_scene() if args.scene else None
        written = PlotReportUseCase(self.report_repo, MatplotlibReportPlotter()).execute(
            args.report, args.out, loss_log=loss_log, scene=scene, max_overlays=args.max_overlays
        )
        for path in written:
            print(path)
        return 0

    def check(self, args: argparse.Namespace) -> int:
        suites = list(Suite) if args.suite == ALL_SUITES else [Suite(args.suite)]
        report = RunPropertyChecksUseCase().execute(suites, seed=effective_seed(args.seed))
        for r in report.results:
            print(f"{'PASS' if r.passed else 'FAIL'}  {r.suite.value}/{r.name}  {r.detail}  ({r.seconds:.1f} s)")
        if args.out:
            args.out.parent.mkdir(parents=True, exist_ok=True)
            args.out.write_text(report.model_dump_json(indent=2))
        return 0 if report.passed else 1

    def ablate(self, args: argparse.Namespace) -> int:
        values: List[Any] = [parse_value(v) for v in args.values] if args.values else list(DEFAULT_GRIDS[args.param])
        scenes = FileSceneRepository(args.scene).load_scene(), FileSceneRepository(args.eval_scene).load_scene()
        use_case = RunAblationUseCase(
            self.report_repo,
            FileCheckpointRepository,
            lambda run_dir: JsonLinesLossLog(Path(run_dir) / LOSS_LOG_FILE),
            self.show_progress,
        )
        overrides = seed_overrides(args.overrides)
        use_case.execute(args.config, *scenes, args.param, values, args.out, init=args.init, overrides=overrides)
        return 0

    def params(self, args: argparse.Namespace) -> int:
        config = TrainConfig.from_file(args.config, seed_overrides(args.overrides))
        bundle = build_model_bundle(
            SkeletonSpec(), Workspace(), config.model, config.grid, config.hyper, seed=config.seed
        )
        report = bundle.parameter_report()
        for name, count in report.items():
            print(f"{name:<16}{count:>10}")
        print(f"{'limit':<16}{MAX_PARAMETERS:>10}")
        return 0 if report["total"] < MAX_PARAMETERS else 1

    def dispatch(self, args: argparse.Namespace) -> int:
        handlers = {
            "synth": self.synth,
            "gen-roots": self.gen_roots,
            "train": self.train,
            "eval": self.eval,
            "plot": self.plot,
            "check": self.check,
            "ablate": self.ablate,
            "params": self.params,
        }
        return handlers[args.command](args)


def error_line(e: Exception) -> str:
    return json.dumps({"error": type(e).__name__, "message": str(e)})


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Process entry point; argparse usage errors exit with status 2"""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "ablate" and not args.values and args.param not in DEFAULT_GRIDS:
        parser.error(f"--values is required for {args.param}; default grids exist for {', '.join(DEFAULT_GRIDS)}")
    logging.basicConfig(format=LOG_FORMAT, level=getattr(logging, args.log_level))
    show_progress = not args.quiet and sys.stderr.isatty()
    try:
        return CliController(show_progress=show_progress).dispatch(args)
    except (SelfPoseError, ValidationError) as e:
        logger.error(f"{args.command} failed: {e}", exc_info=args.log_level == "DEBUG")
        print(error_line(e), file=sys.stderr)
        return 1
