"""Simulation toolkit for bias-preserving gates on dissipative cat qubits.

Subpackages and modules:

* :mod:`catsim.fock` truncated Fock-space operators, cat states and Wigner grids
* :mod:`catsim.lindblad` master-equation integration of gate schedules
* :mod:`catsim.gates` dissipator/Hamiltonian schedules of the cat-qubit gates
* :mod:`catsim.tomography` process tomography on the cat code space
* :mod:`catsim.error_models` closed-form phase-error budgets and Kraus sets
* :mod:`catsim.qec` repetition-code fault circuits, simulation and decoding
* :mod:`catsim.nogo` checks of the two-qubit bias-preservation no-go result
"""

__version__ = "0.1.0"

from .fock import CatQubitParams, ModeSpace, TruncationError  # noqa: E402
from .lindblad import GateSchedule, IntegrationError, evolve  # noqa: E402

__all__ = ["CatQubitParams", "ModeSpace", "TruncationError", "GateSchedule",
           "IntegrationError", "evolve", "__version__"]
