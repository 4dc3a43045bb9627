"""Frequency-resolved photon and phonon correlations of driven optomechanical systems."""
__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .fock import HilbertSpace, OperatorMatrix, embed, identity, mode_operator  # noqa: F401
from .models import ModelSpec, ModelVariant, SystemParams, Variant, make_model  # noqa: F401
from .liouvillian import Superoperator, build_liouvillian, shifted_solve, steady_state  # noqa: F401
from .correlators import g2_blind, g2_blind_zero, spectrum_resolvent  # noqa: F401
from .sensors import (FilterSpec, SensorConfig, SensorEngine, spectrum_sensor, tps_conditional,  # noqa: F401
                      tps_explicit, tps_map, tps_tau)
from .csi import csi_map, csi_value  # noqa: F401
from .config import load_config, parse_config  # noqa: F401
