"""Simulator for analogue in-memory neural-network inference on memristive
crossbar arrays: weight-to-conductance mapping, a physical readout model with
configurable nonidealities, and the algorithmic countermeasures."""

__version__ = "0.1.0"

from ._accel import BACKEND as kernel_backend
from .core import RandomStream, finite_diff_grad, matvec_ref, seeded_stream
from .crossbar import (
    Crossbar,
    CrossbarConfig,
    ReadConfig,
    program,
    read_conductances,
    vmm,
    vmm_batch,
)
from .devices import DeviceModel, drift, preset, preset_table, program_pulses, quantize
from .interconnect import (
    CrossbarSystem,
    LineResistanceParams,
    SolveResult,
    TileSpec,
    solve_crossbar,
    tile_and_solve,
)
from .mapping import (
    ConductanceWindow,
    LinearScaling,
    MappingScheme,
    decode_outputs,
    encode_inputs,
    weights_to_diff_pair,
    weights_to_naive,
)
from .nonidealities import (
    D2DSpec,
    IVNonlinearityParam,
    NonidealityStack,
    PulseProgramming,
    RTNParams,
    StuckMask,
    StuckSpec,
    apply_d2d,
    apply_stuck,
    iv_current,
    rtn_multipliers,
)

__all__ = [name for name in dir() if not name.startswith("_")]
