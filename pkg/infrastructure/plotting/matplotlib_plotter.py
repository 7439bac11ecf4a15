"""
Figure files for evaluation reports and training logs, drawn with matplotlib's
non-interactive Agg backend.
"""

import logging
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import torch  # noqa: E402

from application.interfaces.plotter import AbstractReportPlotter  # noqa: E402
from application.interfaces.report_repository import LossRecord  # noqa: E402
from domain.models.report import EvalReport  # noqa: E402
from domain.models.scene import SyntheticScene  # noqa: E402
from domain.services.geometry import MIN_DEPTH_MM, project_points  # noqa: E402
from infrastructure.synthesis.image_renderer import person_color  # noqa: E402

logger = logging.getLogger(__name__)

DPI = 100


def _save(fig: plt.Figure, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=DPI, bbox_inches="tight")
    plt.close(fig)
    logger.debug(f"Wrote {path}")
    return path


class MatplotlibReportPlotter(AbstractReportPlotter):
    def plot_pr_curves(self, report: EvalReport, out_dir: Path) -> Path:
        fig, ax = plt.subplots(figsize=(5, 4))
        for key in sorted(report.pr_curves, key=float):
            curve = report.pr_curves[key]
            ap = report.ap.get(key, 0.0)
            ax.step(curve.recall, curve.precision, where="post", label=f"{key} mm (AP {ap:.3f})")
        ax.set_xlim(0.0, 1.0)
        ax.set_ylim(0.0, 1.05)
        ax.set_xlabel("recall")
        ax.set_ylabel("precision")
        ax.set_title("Precision-recall per MPJPE threshold")
        if report.pr_curves:
            ax.legend(loc="lower left")
        return _save(fig, Path(out_dir) / "pr_curves.png")

    def plot_ap_bars(self, report: EvalReport, out_dir: Path) -> Path:
        keys = sorted(report.ap, key=float)
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.bar([f"AP{k}" for k in keys], [report.ap[k] for k in keys], color="tab:blue")
        ax.bar(["Recall500"], [report.recall_500], color="tab:orange")
        ax.set_ylim(0.0, 1.0)
        ax.set_title(f"MPJPE {report.mpjpe_mm:.1f} mm, PCP {report.pcp.average:.3f}")
        return _save(fig, Path(out_dir) / "ap_bars.png")

    def plot_mpjpe_histogram(self, report: EvalReport, out_dir: Path) -> Optional[Path]:
        fig, ax = plt.subplots(figsize=(5, 4))
        if report.pair_errors_mm:
            ax.hist(report.pair_errors_mm, bins=min(30, max(5, len(report.pair_errors_mm) // 3)), color="tab:green")
        else:
            ax.text(0.5, 0.5, "no matched persons", ha="center", va="center", transform=ax.transAxes)
        ax.set_xlabel("MPJPE per matched person (mm)")
        ax.set_ylabel("count")
        return _save(fig, Path(out_dir) / "mpjpe_hist.png")

    def plot_loss_curves(self, records: Sequence[LossRecord], out_dir: Path) -> Optional[Path]:
        if not records:
            logger.warning("Loss log is empty; no loss curves drawn")
            return None
        by_stage: Dict[str, List[LossRecord]] = defaultdict(list)
        for r in records:
            by_stage[r.stage].append(r)
        fig, axes = plt.subplots(1, len(by_stage), figsize=(4.5 * len(by_stage), 3.5), squeeze=False)
        for ax, (stage, rows) in zip(axes[0], by_stage.items()):
            steps = [r.step for r in rows]
            ax.plot(steps, [r.loss_total for r in rows], label="total")
            for name in ("loss_H", "loss_J", "loss_attn"):
                values = [getattr(r, name) for r in rows]
                if any(v != 0.0 for v in values):
                    ax.plot(steps, values, label=name, alpha=0.7)
            if all(r.loss_total > 0 for r in rows):
                ax.set_yscale("log")
            ax.set_title(stage)
            ax.set_xlabel("step")
            ax.legend()
        return _save(fig, Path(out_dir) / "loss_curves.png")

    def plot_overlays(
        self, report: EvalReport, scene: SyntheticScene, out_dir: Path, max_frames: int = 2
    ) -> List[Path]:
        frames = {f.id: f for f in scene.frames}
        paths = []
        for prediction in report.frames[:max_frames]:
            frame = frames.get(prediction.id)
            if frame is None:
                logger.warning(f"Frame {prediction.id} of the report is not in the scene")
                continue
            poses = torch.tensor(prediction.poses, dtype=torch.float64).reshape(-1, scene.skeleton.num_joints, 3)
            C = len(scene.cams)
            fig, axes = plt.subplots(1, C, figsize=(3.2 * C, 3.4), squeeze=False)
            for c, (ax, cam) in enumerate(zip(axes[0], scene.cams)):
                ax.imshow(np.clip(frame.images[c], 0.0, 1.0))
                uv, depth = project_points(cam, poses)
                for p in range(poses.shape[0]):
                    color = person_color(p)
                    for child, parent in enumerate(scene.skeleton.parent):
                        if parent < 0 or depth[p, child] <= MIN_DEPTH_MM or depth[p, parent] <= MIN_DEPTH_MM:
                            continue
                        xs = [float(uv[p, child, 0]), float(uv[p, parent, 0])]
                        ys = [float(uv[p, child, 1]), float(uv[p, parent, 1])]
                        ax.plot(xs, ys, color=color, linewidth=1.5)
                ax.set_xlim(0, cam.width)
                ax.set_ylim(cam.height, 0)
                ax.set_title(f"view {cam.id}")
                ax.axis("off")
            paths.append(_save(fig, Path(out_dir) / f"overlay_frame{prediction.id:05d}.png"))
        return paths
