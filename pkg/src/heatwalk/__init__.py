"""Monte Carlo solver for the heat equation on bounded domains by random walks on heat balls."""

from .geometry import Ball, Domain, HalfBall, Hypercube, parse_domain
from .rng import RngStream
from .sampling import expected_radius, psi, radius_pdf, sample_radius, sample_unit_vector
from .walker import (
    StopKind,
    WalkOutcome,
    WalkState,
    alpha,
    run_classical_wos,
    run_walk,
    run_walks,
    step,
)

__version__ = "0.1.0"
