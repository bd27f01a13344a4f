"""Single-qubit piston engines on a planar quantum rotor.

Three views of the same machine: a clocked qubit whose coupling
windows are driven externally (driven), the full composite qubit-rotor
Lindblad dynamics where the rotor is clock, flywheel and battery at
once (autonomous), and two classical stochastic counterparts used to
separate genuinely quantum features from jump noise (classical).
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("rotorengine")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .autonomous import (
    AutonomousParams,
    Liouvillian,
    ObservableTimeline,
    PowerReport,
    backaction_heating,
    build_generator,
    entropy_rates,
    ergotropy,
    evolve,
    initial_state,
    intrinsic_power,
    kinetic_power,
    load_power,
    net_power,
    power_report,
    steady_state,
    steady_state_sweep,
    thermal_excitation,
)
from .classical import (
    ClassicalInit,
    ClassicalParams,
    CoinState,
    EnsembleStats,
    MagnetState,
    coin_occupation_run,
    magnet_mz_run,
    run_ensemble,
    sample_initial,
    step_coin,
    step_magnet,
    thermal_spin_means,
)
from .driven import (
    CycleReport,
    DrivenParams,
    QubitState,
    efficiency_sweep,
    heat_per_cycle_qst,
    integrate_driven_me,
    limit_cycle,
    pe_quasistatic,
    phase_diagram,
    work_per_cycle_qst,
)
from .operators import (
    RotorBasis,
    RotorOperators,
    TruncationError,
    rotor_operators,
    von_mises_state,
)

__all__ = [
    "__version__",
    "AutonomousParams",
    "Liouvillian",
    "ObservableTimeline",
    "PowerReport",
    "backaction_heating",
    "build_generator",
    "entropy_rates",
    "ergotropy",
    "evolve",
    "initial_state",
    "intrinsic_power",
    "kinetic_power",
    "load_power",
    "net_power",
    "power_report",
    "steady_state",
    "steady_state_sweep",
    "thermal_excitation",
    "ClassicalInit",
    "ClassicalParams",
    "CoinState",
    "EnsembleStats",
    "MagnetState",
    "coin_occupation_run",
    "magnet_mz_run",
    "run_ensemble",
    "sample_initial",
    "step_coin",
    "step_magnet",
    "thermal_spin_means",
    "CycleReport",
    "DrivenParams",
    "QubitState",
    "efficiency_sweep",
    "heat_per_cycle_qst",
    "integrate_driven_me",
    "limit_cycle",
    "pe_quasistatic",
    "phase_diagram",
    "work_per_cycle_qst",
    "RotorBasis",
    "RotorOperators",
    "TruncationError",
    "rotor_operators",
    "von_mises_state",
]
