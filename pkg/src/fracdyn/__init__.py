"""Fractional-order discrete maps: simulation, impulsive control and chaos diagnostics."""

from .analysis import (
    NspoResult,
    SweepRow,
    SweepSpec,
    Window,
    analyze,
    classify_window,
    detect_nspo,
    run_sweep,
)
from .kernel import KernelTable, build_kernel, kernel_partial_sum
from .lyapunov import TangentState, finite_time_exponent, lyapunov_exponent
from .maps import Family, MapSpec, map_derivative, map_eval
from .simulator import ControlMode, ControlSchedule, SimConfig, Status, Trajectory, simulate
from .zero_one import (
    Estimator,
    Test01Config,
    Test01Result,
    growth_rate,
    mean_square_displacement,
    run_test01,
    translation_variables,
)

__version__ = "0.1.0"
