"""
Run Monitor for tracking suite activity and errors in the ProjectCarleson system.
"""
import logging
from datetime import datetime
from typing import Any, Dict, List, Optional

from models.experiment import SuiteReport, SuiteStatus

# Initialize logging
logger = logging.getLogger(__name__)

MAX_ACTIVITY_ENTRIES = 1000


class RunMonitor:
    """
    Records activity, errors and suite outcomes for one verification run.
    Both logs end up in the run manifest.
    """

    def __init__(self):
        """Initialize the Run Monitor."""
        logger.info("Initializing Run Monitor")
        self.reset_metrics()
        self.error_log: List[Dict[str, Any]] = []
        self.activity_log: List[Dict[str, Any]] = []

    def reset_metrics(self):
        """Reset all counters to initial values."""
        self.run_metrics = {
            "start_time": datetime.now(),
            "suites_run": 0,
            "suites_by_status": {status.value: 0 for status in SuiteStatus},
            "checks_run": 0,
            "checks_failed": 0,
            "checks_flagged": 0,
            "error_count": 0,
        }

    def record_suite(self, report: SuiteReport):
        """
        Update counters from a finished suite.

        Args:
            report: The finished suite report
        """
        self.run_metrics["suites_run"] += 1
        self.run_metrics["suites_by_status"][report.status.value] += 1
        self.run_metrics["checks_run"] += len(report.checks)
        self.run_metrics["checks_failed"] += sum(1 for c in report.checks if not c.passed)
        self.run_metrics["checks_flagged"] += sum(1 for c in report.checks if c.flagged)
        duration = (report.finished_at - report.started_at).total_seconds() if report.finished_at else None
        self.log_activity("suite_finished", {
            "suite": report.suite,
            "status": report.status.value,
            "checks": len(report.checks),
            "duration_seconds": duration,
        })

    def log_error(self, error_type: str, error_message: str, context: Optional[Dict[str, Any]] = None):
        """
        Log an error raised while running a suite.

        Args:
            error_type: Type of error
            error_message: Error message
            context: Additional context for the error
        """
        self.error_log.append({
            "timestamp": datetime.now().isoformat(),
            "error_type": error_type,
            "error_message": error_message,
            "context": context or {},
        })
        self.run_metrics["error_count"] += 1
        logger.error(f"{error_type}: {error_message}")

    def log_activity(self, activity_type: str, details: Optional[Dict[str, Any]] = None):
        """
        Log a run activity.

        Args:
            activity_type: Type of activity
            details: Activity details
        """
        self.activity_log.append({
            "timestamp": datetime.now().isoformat(),
            "activity_type": activity_type,
            "details": details or {},
        })
        if len(self.activity_log) > MAX_ACTIVITY_ENTRIES:
            self.activity_log = self.activity_log[-MAX_ACTIVITY_ENTRIES:]

    def get_current_metrics(self) -> Dict[str, Any]:
        """Get current run metrics."""
        metrics = dict(self.run_metrics)
        metrics["start_time"] = self.run_metrics["start_time"].isoformat()
        return {
            "time": datetime.now().isoformat(),
            "uptime_seconds": (datetime.now() - self.run_metrics["start_time"]).total_seconds(),
            "run": metrics,
            "recent_errors": self.error_log[-5:],
        }

    def get_error_log(self, limit: int = 100) -> List[Dict[str, Any]]:
        return self.error_log[-limit:]

    def get_activity_log(self, limit: int = 100, activity_type: Optional[str] = None) -> List[Dict[str, Any]]:
        """Get recent activity log entries, optionally filtered by type."""
        entries = self.activity_log
        if activity_type:
            entries = [entry for entry in entries if entry["activity_type"] == activity_type]
        return entries[-limit:]
