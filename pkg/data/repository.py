"""
Artifact Repository for the ProjectCarleson system.
Handles CSV tables, the JSON run manifest, dyadic family files and the gnuplot stub.
"""
import hashlib
import json
import logging
import platform
import sys
from datetime import datetime
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

import numpy as np
import pandas as pd
from jinja2 import Template

from models.dyadic import AdjacentFamily
from models.experiment import ExperimentConfig, SuiteReport

# Initialize logging
logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"
MANIFEST_NAME = "manifest.json"
FAMILY_NAME = "family.json"
TRACKED_PACKAGES = ("numpy", "scipy", "pandas", "scikit-learn", "pydantic", "jinja2", "python-dotenv")

SUBSTITUTIONS = [
    "Sharpness is measured on the positive dyadic operator, the computable surrogate of the Bergman projection; "
    "the true projection kernel is not evaluated.",
    "Global maximal functions and weight constants over balls are maxima over finite cap grids, i.e. lower bounds.",
]

GNUPLOT_TEMPLATE = Template("""\
# {{ title }}
set datafile separator ","
set key autotitle columnhead
{%- if logscale %}
set logscale xy
{%- endif %}
set xlabel "{{ x }}"
set ylabel "{{ ys | join(', ') }}"
plot {% for y in ys %}"{{ csv }}" using "{{ x }}":"{{ y }}" with linespoints{{ ", " if not loop.last }}{% endfor %}
""")


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def package_versions() -> Dict[str, str]:
    versions = {"python": sys.version.split()[0], "platform": platform.platform()}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "not installed"
    return versions


def _prepare_for_json(obj):
    """Prepare an object for JSON serialization: datetimes to ISO strings, numpy to builtins."""
    if isinstance(obj, dict):
        return {str(k): _prepare_for_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_prepare_for_json(v) for v in obj]
    if isinstance(obj, datetime):
        return obj.isoformat()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


class ArtifactRepository:
    """
    Writes the artifacts of a run into one output directory.
    CSVs are byte-stable for a fixed config and seed; timestamps live only in the manifest.
    """

    def __init__(self, out_dir: str = "output"):
        """
        Initialize the repository.

        Args:
            out_dir: Directory for every artifact of the run (created if missing)
        """
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.artifacts: List[Path] = []
        logger.info(f"Repository initialized in {self.out_dir.resolve()}")

    def _track(self, path: Path) -> Path:
        if path not in self.artifacts:
            self.artifacts.append(path)
        return path

    def write_table(self, name: str, rows: List[Dict[str, Any]]) -> Path:
        """
        Write rows as <name>.csv: UTF-8, LF line endings, RFC-4180 quoting, fixed float format.
        """
        path = self.out_dir / f"{name}.csv"
        frame = pd.DataFrame([_prepare_for_json(row) for row in rows])
        frame.to_csv(path, index=False, encoding="utf-8", lineterminator="\n", float_format=FLOAT_FORMAT)
        logger.debug(f"Wrote {len(frame)} rows to {path}")
        return self._track(path)

    def write_report(self, report: SuiteReport) -> List[Path]:
        """Write the checks and every table of a suite report as CSVs."""
        paths = [self.write_table(f"{report.suite}_checks", [
            {"name": c.name, "passed": c.passed, "value": c.value, "bound": c.bound, "flagged": c.flagged,
             "detail": json.dumps(_prepare_for_json(c.detail), sort_keys=True)}
            for c in report.checks
        ])]
        for table, rows in sorted(report.tables.items()):
            paths.append(self.write_table(f"{report.suite}_{table}", rows))
        return paths

    def write_gnuplot_stub(self, name: str, x: str, ys: Iterable[str], logscale: bool = True,
                           title: Optional[str] = None) -> Path:
        """Companion gnuplot script for <name>.csv; nothing is plotted in-process."""
        path = self.out_dir / f"{name}.gp"
        path.write_text(GNUPLOT_TEMPLATE.render(title=title or name, csv=f"{name}.csv", x=x, ys=list(ys),
                                                logscale=logscale), encoding="utf-8")
        return self._track(path)

    def save_family(self, family: AdjacentFamily, name: str = FAMILY_NAME) -> Path:
        """Versioned family file; loading it reproduces the systems bit-exactly."""
        path = self.out_dir / name
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(_prepare_for_json(family.to_dict()), f, sort_keys=True)
        logger.info(f"Saved {family.N} dyadic systems to {path}")
        return self._track(path)

    def load_family(self, path: Optional[str] = None) -> AdjacentFamily:
        source = Path(path) if path else self.out_dir / FAMILY_NAME
        with open(source, "r", encoding="utf-8") as f:
            family = AdjacentFamily.from_dict(json.load(f))
        logger.info(f"Loaded {family.N} dyadic systems from {source}")
        return family

    def write_manifest(self, config: ExperimentConfig, reports: List[SuiteReport],
                       claim_map: Dict[str, str], metrics: Optional[Dict[str, Any]] = None,
                       errors: Optional[List[Dict[str, Any]]] = None,
                       activity: Optional[List[Dict[str, Any]]] = None) -> Path:
        """
        Write manifest.json: config, seed, versions, suite outcomes, the suite-to-claim
        mapping, monitor logs and the sha256 of every artifact written so far.
        """
        path = self.out_dir / MANIFEST_NAME
        manifest = {
            "created_at": datetime.now(),
            "config": config.to_dict(),
            "seed": config.seed,
            "versions": package_versions(),
            "suites": [report.to_dict() for report in reports],
            "claims": claim_map,
            "substitutions": SUBSTITUTIONS,
            "passed": all(report.passed for report in reports),
            "metrics": metrics or {},
            "errors": errors or [],
            "activity": activity or [],
            "artifacts": {p.name: sha256_file(p) for p in self.artifacts if p.exists()},
        }
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(_prepare_for_json(manifest), f, indent=2, sort_keys=True)
        logger.info(f"Wrote manifest with {len(manifest['artifacts'])} artifacts to {path}")
        return path


def write_artifacts(repository: ArtifactRepository, reports: List[SuiteReport]) -> List[Path]:
    """Write every report's CSVs plus the gnuplot stubs of the tables that have one."""
    paths: List[Path] = []
    for report in reports:
        paths.extend(repository.write_report(report))
        if "sharpness" in report.tables:
            paths.append(repository.write_gnuplot_stub(f"{report.suite}_sharpness", "bb_constant",
                                                       ["T_norm", "T_norm_lb"], title="operator norm against [omega]_2"))
        if "doubling_profile" in report.tables:
            paths.append(repository.write_gnuplot_stub(f"{report.suite}_doubling_profile", "r", ["g"],
                                                       logscale=False, title="doubling profile g(r)"))
    return paths


# Singleton repository instance
_repository: Optional[ArtifactRepository] = None


def get_repository(out_dir: Optional[str] = None) -> ArtifactRepository:
    """Get the singleton repository instance, re-rooted when a different out_dir is requested."""
    global _repository
    if _repository is None or (out_dir is not None and Path(out_dir) != _repository.out_dir):
        _repository = ArtifactRepository(out_dir or "output")
    return _repository
