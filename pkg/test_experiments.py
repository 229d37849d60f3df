"""
Tests for the sharpness experiment, the suite manager, the CLI, configuration and the artifact repository.
"""
import json
import logging

import pytest

import config as carleson_config
from cli import EXIT_OK, EXIT_USAGE, cli_main
from data.repository import MANIFEST_NAME, ArtifactRepository, get_repository, write_artifacts
from models.experiment import SuiteReport, SuiteStatus
from services.weight_service import make_example_weight
from verification import suite_manager
from verification.sharpness_suite import f_norm_squared, run_sharpness
from verification.suite_manager import SuiteManager
from tasks import _payload_arguments

logger = logging.getLogger(__name__)

GEOMETRY_ONLY = {"metric_samples": 500, "metric_dimensions": [3], "band_samples": 50}


def test_f_norm_closed_form_matches_quadrature(bench):
    scaled = []
    for delta in (0.4, 0.2, 0.1, 0.05):
        exact, quadrature = f_norm_squared(bench, make_example_weight(delta, bench.ctx), 1.0)
        assert exact == pytest.approx(quadrature, rel=1e-9)
        scaled.append(delta * exact)
    assert max(scaled) / min(scaled) <= 2.0


def test_sharpness_suite(tiny_config, bench):
    report = run_sharpness(tiny_config, bench)
    assert report.status != SuiteStatus.ERROR
    rows = report.tables["sharpness"]
    assert [r["delta"] for r in rows] == tiny_config.deltas
    for row in rows:
        assert row["T_norm_lb"] <= row["T_norm"] * (1.0 + 1e-6)
        assert row["ratio"] == pytest.approx(row["T_norm"] / row["bb_constant"])
    by_name = {c.name: c for c in report.checks}
    assert by_name["[omega_delta]_2 increases as delta decreases"].passed
    for delta in tiny_config.deltas:
        assert by_name[f"||f||^2 closed form against quadrature, delta={delta:g}"].passed
    assert {r["quantity"] for r in report.tables["slopes"]} == {"T_norm", "witness_ratio_sq"}
    logger.info(f"Sharpness slopes: {report.tables['slopes']}")


def test_suite_errors_become_reports(tiny_config, family, monkeypatch):
    def broken(config, bench):
        raise RuntimeError("boom")

    monkeypatch.setitem(suite_manager.SUITES, "geometry", broken)
    manager = SuiteManager(tiny_config, family=family)
    report = manager.run_suite("geometry")
    assert report.status == SuiteStatus.ERROR
    assert report.error == "boom"
    assert not manager.passed
    assert manager.monitor.get_error_log()[-1]["context"]["suite"] == "geometry"
    with pytest.raises(KeyError):
        manager.run_suite("nonexistent")


def test_suites_run_in_registry_order(tiny_config, family, monkeypatch):
    calls = []

    def recorder(name):
        def run(config, bench):
            calls.append(name)
            return SuiteReport(suite=name, claim=f"{name} claim").finish()
        return run

    for name in ("geometry", "grid"):
        monkeypatch.setitem(suite_manager.SUITES, name, recorder(name))
    manager = SuiteManager(tiny_config, family=family)
    manager.run(["grid", "geometry"])
    assert calls == ["geometry", "grid"]
    assert manager.passed
    assert set(manager.claim_map()) == {"geometry", "grid"}


def test_cli_usage_errors(tmp_path):
    assert cli_main(["verify", "--bogus"]) == EXIT_USAGE
    assert cli_main([]) == EXIT_USAGE
    assert cli_main(["grid", "--eta", "0.9", "--out", str(tmp_path)]) == EXIT_USAGE
    assert cli_main(["grid", "--deltas", "0.1,x"]) == EXIT_USAGE
    assert cli_main(["--help"]) == EXIT_OK


def test_cli_missing_config_file(tmp_path):
    assert cli_main(["grid", "--config", str(tmp_path / "missing.json")]) == EXIT_USAGE


def test_cli_geometry_run_writes_manifest(tmp_path):
    config_file = tmp_path / "config.json"
    config_file.write_text(json.dumps(GEOMETRY_ONLY), encoding="utf-8")
    out = tmp_path / "out"
    code = cli_main(["verify", "--geometry", "--config", str(config_file), "--out", str(out), "--seed", "3"])
    assert code == EXIT_OK
    manifest = json.loads((out / MANIFEST_NAME).read_text(encoding="utf-8"))
    assert manifest["seed"] == 3
    assert manifest["passed"] is True
    assert [s["suite"] for s in manifest["suites"]] == ["geometry"]
    assert "geometry_checks.csv" in manifest["artifacts"]
    assert manifest["substitutions"]
    assert "numpy" in manifest["versions"]
    assert b"\r\n" not in (out / "geometry_checks.csv").read_bytes()


def test_tables_are_byte_stable(tmp_path):
    rows = [{"r": 0.1, "g": 1.0 / 3.0}, {"r": 0.2, "g": float("nan")}]
    first = ArtifactRepository(str(tmp_path / "a")).write_table("doubling", rows)
    second = ArtifactRepository(str(tmp_path / "b")).write_table("doubling", rows)
    assert first.read_bytes() == second.read_bytes()
    assert first.read_text(encoding="utf-8").splitlines()[0] == "r,g"


def test_report_artifacts_and_stubs(tmp_path):
    report = SuiteReport(suite="measure", claim="")
    report.check("example", True, value=1.0)
    report.tables["doubling_profile"] = [{"r": 0.5, "g": 0.6}]
    paths = write_artifacts(ArtifactRepository(str(tmp_path)), [report.finish()])
    names = sorted(p.name for p in paths)
    assert names == ["measure_checks.csv", "measure_doubling_profile.csv", "measure_doubling_profile.gp"]
    assert 'using "r":"g"' in (tmp_path / "measure_doubling_profile.gp").read_text(encoding="utf-8")


def test_family_file_round_trip(tmp_path, family):
    repository = ArtifactRepository(str(tmp_path))
    path = repository.save_family(family)
    loaded = repository.load_family(str(path))
    assert loaded.N == family.N
    assert loaded.cover_constant == pytest.approx(family.cover_constant)


def test_repository_singleton(tmp_path):
    first = get_repository(str(tmp_path / "x"))
    assert get_repository(str(tmp_path / "x")) is first
    assert get_repository(str(tmp_path / "y")) is not first


def test_load_config_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("CARLESON_OUTPUT_DIR", str(tmp_path / "env-out"))
    config = carleson_config.load_config(None, depth=4, seed=None)
    assert config.depth == 4
    assert config.seed == 7
    assert config.out == str(tmp_path / "env-out")

    path = tmp_path / "config.json"
    path.write_text(json.dumps({"n": 4, "alpha": 0.5}), encoding="utf-8")
    from_file = carleson_config.load_config(str(path), alpha=1.0)
    assert (from_file.n, from_file.alpha) == (4, 1.0)


def test_thread_count(monkeypatch):
    monkeypatch.setenv("CARLESON_THREADS", "four")
    assert carleson_config.thread_count() == 1
    monkeypatch.setenv("CARLESON_THREADS", "3")
    assert carleson_config.thread_count() == 3


def test_payload_arguments():
    assert _payload_arguments({"n": 4, "deltas": [0.4, 0.2]}) == ["--n", "4", "--deltas", "0.4,0.2"]
