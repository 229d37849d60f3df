"""
Suite Manager for coordinating the verification suites of the ProjectCarleson system.
"""
import logging
from typing import Callable, Dict, Iterable, List, Optional

from models.dyadic import AdjacentFamily
from models.experiment import ExperimentConfig, SuiteReport, SuiteStatus
from .dyadic_suite import build_grid
from .geometry_suite import verify_geometry
from .measure_suite import verify_measure_and_boxes
from .operators_suite import verify_operators
from .run_monitor import RunMonitor
from .sharpness_suite import run_sharpness
from .weights_suite import verify_weights
from .workbench import Workbench

# Initialize logging
logger = logging.getLogger(__name__)

SuiteRunner = Callable[[ExperimentConfig, Workbench], SuiteReport]

# run order; later suites reuse the family and pools built by earlier ones
SUITES: Dict[str, SuiteRunner] = {
    "geometry": verify_geometry,
    "grid": build_grid,
    "measure": verify_measure_and_boxes,
    "weights": verify_weights,
    "operators": verify_operators,
    "sharpness": run_sharpness,
}

VERIFY_SUITES = ("geometry", "grid", "measure", "weights", "operators")


class SuiteManager:
    """
    Runs verification suites against one shared Workbench.
    Acts as the central controller of a run: every suite outcome and error goes
    through the RunMonitor, and a failing suite never stops the ones after it.
    """

    def __init__(self, config: ExperimentConfig, threads: int = 1, family: Optional[AdjacentFamily] = None):
        """Initialize the suite manager with a workbench for the config."""
        logger.info("Initializing Suite Manager")
        self.config = config
        self.bench = Workbench(config, threads=threads, family=family)
        self.monitor = RunMonitor()
        self.reports: Dict[str, SuiteReport] = {}

    def run_suite(self, name: str) -> SuiteReport:
        """
        Run one suite by name.

        Args:
            name: a key of SUITES

        Returns:
            The suite report; an exception inside the suite becomes an ERROR report
        """
        if name not in SUITES:
            raise KeyError(f"unknown suite {name!r}; expected one of {sorted(SUITES)}")
        self.monitor.log_activity("suite_started", {"suite": name})
        try:
            report = SUITES[name](self.config, self.bench)
        except Exception as e:
            logger.error(f"Error running suite {name}: {str(e)}")
            self.monitor.log_error("suite_execution", str(e), {"suite": name, "exception": type(e).__name__})
            report = SuiteReport(suite=name, claim="", status=SuiteStatus.ERROR, error=str(e)).finish()
        self.reports[name] = report
        self.monitor.record_suite(report)
        failed = [c.name for c in report.checks if not c.passed]
        if failed:
            logger.warning(f"Suite {name}: {len(failed)} failed checks, first: {failed[0]}")
        logger.info(f"Suite {name} finished with status {report.status.value}")
        return report

    def run(self, names: Iterable[str]) -> List[SuiteReport]:
        """Run suites in registry order, whatever the order of names."""
        wanted = set(names)
        return [self.run_suite(name) for name in SUITES if name in wanted]

    @property
    def passed(self) -> bool:
        return all(report.passed for report in self.reports.values())

    def claim_map(self) -> Dict[str, str]:
        """Suite name to the inequality it verifies, for the manifest."""
        return {name: report.claim for name, report in self.reports.items()}

    def get_run_metrics(self) -> Dict:
        return self.monitor.get_current_metrics()
