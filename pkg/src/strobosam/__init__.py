"""Stroboscopic averaging for oscillators forced at a slowly swept frequency."""
from ._jit import BACKEND
from .duffing import OscillatorParams, PhysState, RotatingState
from .odecore import MacroConfig, Trajectory

__version__ = "0.1.0"
