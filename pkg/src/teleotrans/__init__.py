"""Exact-arithmetic stochastic transducers and goal-tagged environments.

The package is organized as a small stack: `prob` (rational probabilities,
finite distributions, trajectories), `transducer` (lazy coinductive behavior
objects and their combinators), `machines` (finite-state generators),
`teleo` (environments, coupling, success probabilities), `planner`
(optimality, filtering, and specifiability analysis), and `cli`/`demos`
(batch front end). Everything numeric is a `fractions.Fraction`.
"""

from .prob import (
    FiniteDist,
    Trajectory,
    dist_mix,
    dist_point,
    dist_uniform,
    format_rational,
    parse_rational,
)
from .transducer import (
    FAILED,
    Transducer,
    UnrolledTable,
    behaviorally_equal,
    constant,
    evolve,
    iid,
    mix,
    reroll,
    splice,
    unroll,
    unrolled_step,
)
from .machines import (
    MooreMachine,
    UnifilarMachine,
    deterministic_policy,
    moore_to_transducer,
    moore_to_unifilar,
    unifilar_to_transducer,
)
from .teleo import (
    NOTHING,
    SUCCESS,
    SuccessInterval,
    TeleoEnvironment,
    Telos,
    ambivalent_evolve,
    couple,
    doomify,
    machine_env,
    success_exact,
    success_interval,
    success_prefix,
    truncate_single_success,
)
from .planner import (
    ALL,
    PolicyTree,
    bellman_check,
    check_optimal,
    check_specifiable,
    det_ufs_class,
    deterministify,
    extract_optimal_policy,
    iid_class,
    iid_sweep,
    optimal_value,
    optimistic_value,
    pointwise_decompose,
    sensorimotor_bellman_check,
    specifiability_preconditions,
)

__version__ = "0.1.0"
