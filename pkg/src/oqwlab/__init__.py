"""Open quantum walks derived from a microscopic system-bath model."""

__version__ = "0.1.0"

from .derivation import (  # noqa: E402
    ModelSpec,
    TransitionOperatorSet,
    bath_rate,
    bohr_frequencies,
    build_transition_operators,
    eigenoperator,
    jumps,
    normalization_residual,
    two_level_paper_spec,
)
from .lindblad import GeneratorSpec, OdeConfig, compare_discrete_continuous, generator_apply, rk4_integrate, steady_state  # noqa: E402
from .linalg import frobenius_norm, hermitian_eig, psd_sqrt  # noqa: E402
from .states import BlockState, FullState, block_extract, node_probabilities, validate_density  # noqa: E402
from .walk import OQWMap, Trajectory, mixing_time, oqw_step, run_walk  # noqa: E402
