"""Mirror-mediated dipole-dipole interactions between two two-level atoms."""

from .rates import (
    AsymmetricMirror,
    DipoleOrientation,
    GeometryConfig,
    SymmetricMirror,
    collective_rates,
    coupling_prefactor,
    gamma_ab,
    gamma_ab_angular,
    gamma_ab_closed,
    gamma_ab_quadrature,
    gamma_ab_series,
    level_shift,
)
from .dynamics import (
    InitialState,
    LindbladGenerator,
    TimeSeries,
    build_generator,
    emission_rate,
    evolve_conditional,
    evolve_master,
    first_emission_density,
    mc_trajectories,
    survival_probability,
)

__version__ = "0.1.0"
