"""Momentum methods as discretized four-parameter flows: objectives, iterations,
flows, Lyapunov certificates, spectral analysis and an experiment harness."""
from .errors import Gm2Error
from .gm2 import Gm2Params, Gm2State, Method, gm2_step, ee_step, preset
from .objectives import Quadratic, Logistic1D, RegularizedLogistic

__all__ = ["Gm2Error", "Gm2Params", "Gm2State", "Method", "gm2_step", "ee_step", "preset",
           "Quadratic", "Logistic1D", "RegularizedLogistic"]
__version__ = "0.1.0"
