"""
ProjectCarleson - weighted Bergman projection toolkit on the unit ball
Main task definitions for Robocorp automation
"""
import logging
from typing import Dict, List

from robocorp.tasks import task

from cli import EXIT_OK, cli_main
from config import LOG_FORMAT

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format=LOG_FORMAT
)
logger = logging.getLogger(__name__)


def _payload_arguments(payload: Dict) -> List[str]:
    """Turn a work-item payload such as {"n": 3, "deltas": [0.4, 0.2]} into CLI flags."""
    argv = []
    for key, value in payload.items():
        if isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        argv.extend([f"--{key}", str(value)])
    return argv


def _run(command: List[str]) -> None:
    """Run a CLI command once per input work item, or once with defaults when there are none."""
    try:
        from robocorp import workitems
        items = list(workitems.inputs)
    except (ImportError, RuntimeError):
        logger.info("No workitems available, running with the default configuration")
        items = []

    if not items:
        code = cli_main(command)
        if code != EXIT_OK:
            raise RuntimeError(f"{' '.join(command)} exited with code {code}")
        return

    for item in items:
        try:
            code = cli_main(command + _payload_arguments(item.payload or {}))
            if code == EXIT_OK:
                item.done()
            else:
                item.fail(exception_type="BUSINESS", code="CHECK_FAILURE" if code == 1 else "USAGE",
                          message=f"exit code {code}")
        except Exception as e:
            logger.error(f"Error running {command[0]}: {str(e)}")
            item.fail(exception_type="APPLICATION", code=type(e).__name__, message=str(e))


@task
def verify_all():
    """Run every verification suite and write the artifacts and manifest."""
    logger.info("Starting verification task")
    _run(["verify", "--all"])


@task
def sharpness():
    """Run the sharpness experiment over the example weight family."""
    logger.info("Starting sharpness task")
    _run(["sharpness"])
