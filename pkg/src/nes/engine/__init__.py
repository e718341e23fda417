from .config import (
    HILL_CLIMBERS,
    AlgorithmConfig,
    default_eta_sbar,
    default_eta_sigma,
    default_population_size,
)
from .loop import (
    ALGORITHMS,
    GaussianFactor,
    GenerationRecord,
    NonFiniteFitnessError,
    RunResult,
    make_strategy,
    run,
)
from .steps import (
    SingularCovarianceError,
    canonical_nes_step,
    cauchy_hillclimber_step,
    plain_gradient_step,
    plain_log_derivs,
    radial_hillclimber_step,
    snes_hillclimber_step,
    snes_step,
    xnes_gradients,
    xnes_hillclimber_step,
    xnes_step,
)
