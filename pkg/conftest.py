"""
Shared pytest fixtures for the ProjectCarleson tests.

Everything here is small and seeded: a depth-3 family with eta = 1/2 on S^2,
a pool of a few ten thousand points and tiny suite budgets.
"""
import logging
import math

import numpy as np
import pytest

from models.experiment import ExperimentConfig
from services.dyadic_service import DyadicService
from services.measure_service import make_alpha_context
from services.operator_service import OperatorService, build_cap_grid, build_pool
from services.weight_service import WeightService
from verification.workbench import Workbench

logging.basicConfig(level=logging.INFO)

SEED = 7
DEPTH = 3
ETA = 0.5
POOL = 30_000
MIN_OCCUPANCY = 5


@pytest.fixture(scope="session")
def tiny_config() -> ExperimentConfig:
    return ExperimentConfig(
        n=3, alpha=0.0, p=2.0, eta=ETA, depth=DEPTH, systems=2, pool=POOL, seed=SEED,
        deltas=[0.4, 0.2, 0.1], weight_deltas=[0.4, 0.2, 0.1],
        metric_samples=2_000, metric_dimensions=[3, 4], band_samples=100, doubling_grid=50,
        probe_points=20_000, cover_caps=100, radii_count=16, oracle_radii=200, min_occupancy=MIN_OCCUPANCY,
        domination_pairs=500, maximal_trials=3, rdf_trials=3, rdf_depth=6, rdf_pool=3_000,
        power_tol=1e-8, power_max_iter=2_000, dense_limit=2_000, operator_depth=2, shards=2,
    )


@pytest.fixture(scope="session")
def ctx():
    return make_alpha_context(3, 0.0)


@pytest.fixture(scope="session")
def dyadic_service() -> DyadicService:
    return DyadicService(probe_points=20_000, cover_caps=100, max_systems=8)


@pytest.fixture(scope="session")
def family(dyadic_service):
    return dyadic_service.build_family(3, ETA, DEPTH, 2, SEED)


@pytest.fixture(scope="session")
def pool(ctx, family):
    return build_pool(POOL, ctx, family, SEED, shards=2)


@pytest.fixture(scope="session")
def operators(ctx, family, pool) -> OperatorService:
    return OperatorService(ctx, family, pool, min_occupancy=MIN_OCCUPANCY)


@pytest.fixture(scope="session")
def weight_service(ctx) -> WeightService:
    radii = np.logspace(math.log10(ETA ** DEPTH), 0.0, 16, endpoint=False)
    return WeightService(ctx, radii=radii, min_occupancy=MIN_OCCUPANCY)


@pytest.fixture(scope="session")
def cap_grid():
    return build_cap_grid(3, centers=16, seed=SEED)


@pytest.fixture(scope="session")
def bench(tiny_config, family) -> Workbench:
    return Workbench(tiny_config, family=family)


@pytest.fixture
def e1() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0])
