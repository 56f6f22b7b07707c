"""GP engine - layered-primitive genetic programming with steady-state, cellular and island dynamics"""

__version__ = "1.0.0"
