"""Two-atom Rydberg CZ gates: adiabatic sweeps, eCD driving, pulse optimization."""

__version__ = "0.1.0"

from .hilbert import AtomLevel, TwoAtomState, basis_index, projector, tensor  # noqa: F401
from .pulses import (  # noqa: F401
    ECDParams,
    ErrorModel,
    PiecewiseControl,
    SweepParams,
)
from .dynamics import (  # noqa: F401
    GateResult,
    PropagationConfig,
    infidelity,
    infidelity_phase_optimized,
    simulate_adiabatic,
    simulate_ecd,
)
from .optimizer import OptimizedPulse, OptimizerConfig, optimize  # noqa: F401
from .experiments import ScanTable, SweepGrid, run_fig1, run_fig2  # noqa: F401
