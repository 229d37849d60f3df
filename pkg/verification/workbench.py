"""
Workbench for the ProjectCarleson system.
Builds the shared artifacts of a run (alpha context, adjacent family, sample
pools, cap grid) once and hands the services built on them to every suite.
"""
import logging
import math
from typing import Optional

import numpy as np

from models.dyadic import AdjacentFamily
from models.experiment import ExperimentConfig
from models.measure import AlphaContext
from models.operators import CapGrid, SamplePool
from services.dyadic_service import DyadicService
from services.extrapolation_service import ExtrapolationService
from services.measure_service import make_alpha_context
from services.operator_service import OperatorService, build_cap_grid, build_pool
from services.weight_service import WeightService

# Initialize logging
logger = logging.getLogger(__name__)


class Workbench:
    """
    Lazily built, cached artifacts for one ExperimentConfig.
    Nothing is built until a suite asks for it.
    """

    def __init__(self, config: ExperimentConfig, threads: int = 1, family: Optional[AdjacentFamily] = None):
        """Initialize the Workbench."""
        logger.info("Initializing Workbench")
        self.config = config
        self.threads = threads
        self.dyadic_service = DyadicService(
            probe_points=config.probe_points,
            cover_caps=config.cover_caps,
            max_systems=config.max_systems,
        )
        self._ctx: Optional[AlphaContext] = None
        self._family = family
        self._pool: Optional[SamplePool] = None
        self._operators: Optional[OperatorService] = None
        self._weights: Optional[WeightService] = None
        self._grid: Optional[CapGrid] = None
        self._extrapolation: Optional[ExtrapolationService] = None

    @property
    def ctx(self) -> AlphaContext:
        if self._ctx is None:
            self._ctx = make_alpha_context(self.config.n, self.config.alpha)
        return self._ctx

    @property
    def family(self) -> AdjacentFamily:
        if self._family is None:
            c = self.config
            self._family = self.dyadic_service.build_family(c.n, c.eta, c.depth, c.systems, c.seed)
        return self._family

    @property
    def pool(self) -> SamplePool:
        if self._pool is None:
            c = self.config
            self._pool = build_pool(c.pool, self.ctx, self.family, c.seed, shards=c.shards, threads=self.threads)
        return self._pool

    @property
    def operators(self) -> OperatorService:
        if self._operators is None:
            self._operators = OperatorService(self.ctx, self.family, self.pool, self.config.min_occupancy)
        return self._operators

    @property
    def weights(self) -> WeightService:
        if self._weights is None:
            c = self.config
            radii = np.logspace(math.log10(c.eta ** c.depth), 0.0, c.radii_count, endpoint=False)
            self._weights = WeightService(self.ctx, radii=radii, min_occupancy=c.min_occupancy)
        return self._weights

    @property
    def cap_grid(self) -> CapGrid:
        if self._grid is None:
            self._grid = build_cap_grid(self.config.n, seed=self.config.seed)
        return self._grid

    @property
    def extrapolation(self) -> ExtrapolationService:
        if self._extrapolation is None:
            c = self.config
            pool = build_pool(c.rdf_pool, self.ctx, None, c.seed, shards=c.shards, threads=self.threads, stream="rdf-pool")
            self._extrapolation = ExtrapolationService(self.ctx, pool, self.cap_grid)
        return self._extrapolation

    def has_family(self) -> bool:
        return self._family is not None
