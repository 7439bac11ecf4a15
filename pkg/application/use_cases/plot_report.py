"""
Use Case: Render an evaluation report (and optionally a loss log and a scene)
into image files.
"""

import logging
from pathlib import Path
from typing import List, Optional

from application.interfaces.plotter import AbstractReportPlotter
from application.interfaces.report_repository import AbstractLossLog, AbstractReportRepository
from domain.models.scene import SyntheticScene

logger = logging.getLogger(__name__)


class PlotReportUseCase:
    def __init__(self, report_repo: AbstractReportRepository, plotter: AbstractReportPlotter):
        self.report_repo = report_repo
        self.plotter = plotter

    def execute(
        self,
        report_path: Path,
        out_dir: Path,
        loss_log: Optional[AbstractLossLog] = None,
        scene: Optional[SyntheticScene] = None,
        max_overlays: int = 2,
    ) -> List[Path]:
        """Writes the figures and returns their paths.

        PR curves, AP bars and the MPJPE histogram are always written. Loss curves
        need a non-empty loss log, overlays need the scene the report was made on.
        """
        logger.info(f"Executing PlotReportUseCase for {report_path}")
        report = self.report_repo.load_report(report_path)
        out_dir = Path(out_dir)
        written = [
            self.plotter.plot_pr_curves(report, out_dir),
            self.plotter.plot_ap_bars(report, out_dir),
        ]
        histogram = self.plotter.plot_mpjpe_histogram(report, out_dir)
        if histogram is not None:
            written.append(histogram)
        if loss_log is not None:
            curves = self.plotter.plot_loss_curves(loss_log.read(), out_dir)
            if curves is not None:
                written.append(curves)
        if scene is not None:
            written.extend(self.plotter.plot_overlays(report, scene, out_dir, max_frames=max_overlays))
        logger.info(f"Wrote {len(written)} figures to {out_dir}")
        return written
