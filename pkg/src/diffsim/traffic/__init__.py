from .idm import IdmParams, idm_acceleration
from .single_road import (SingleRoadScenario, initial_single_road_state,
                          run_single_road_diff, run_single_road_reference)
from .grid import (GridScenario, RoadNetwork, initial_grid_vehicles,
                   run_grid_diff, run_grid_reference)

__all__ = [
    "IdmParams", "idm_acceleration",
    "SingleRoadScenario", "initial_single_road_state",
    "run_single_road_diff", "run_single_road_reference",
    "GridScenario", "RoadNetwork", "initial_grid_vehicles",
    "run_grid_diff", "run_grid_reference",
]
