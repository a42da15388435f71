"""Blackwell approachability on controlled Markov chains via two-time-scale switching."""

from .adversary import (
    AdversaryPolicy,
    Antagonist,
    BestResponse,
    Fixed,
    PeriodicSwitching,
    UniformRandom,
    adversary_action,
    adversary_from_dict,
)
from .controller import (
    AnchorEntry,
    ControllerParams,
    Cover,
    ReturnTimeController,
    TwoTimeScaleController,
    compute_hold_time,
    compute_rho,
    make_controller,
    next_switch_step,
)
from .errors import AssumptionViolated, GeometryError, ModelError, SolverError
from .game_model import (
    GameModel,
    InducedChain,
    StationaryStrategy,
    average_reward,
    check_ergodicity,
    induce_chain,
    stationary_distribution,
)
from .geometry import Ball, Box, ConvexTarget, Halfspaces, RewardGeometry, compute_vmax, distance, project
from .harness import (
    ExperimentSpec,
    RunConfig,
    RunTrace,
    experiment,
    interpolate,
    make_rng,
    run,
    step_average,
    window_block_average,
)
from .solver import (
    MatrixGame,
    adversary_best_response,
    check_assumption,
    scalarize,
    separating_strategy,
    solve_average_game,
    solve_matrix_game,
)

__version__ = "0.1.0"
