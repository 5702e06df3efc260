"""Simulation of pre- and post-selected quantum systems.

Weak values and ABL probabilities for the three-boxes family of
experiments, shutter/probe protocols, CHSH tests and a Monte Carlo oracle.
"""

from .hilbert import (
    Operator,
    StateVector,
    basis_state,
    evolve,
    identity,
    inner_product,
    projector,
    state,
    tensor,
    unitary_of,
)
from .tsvf import (
    TwoStateVector,
    abl_probabilities,
    backward_state,
    forward_state,
    pointer_shift,
    postselection_probability,
    strong_weak_correspondence,
    weak_value,
)

__version__ = "0.1.0"
