"""Physical constants, CODATA 2018 exact values."""

import math

PLANCK_H = 6.62607015e-34  # J s
HBAR = PLANCK_H / (2.0 * math.pi)  # J s
BOLTZMANN_K = 1.380649e-23  # J / K
FLUX_QUANTUM = 2.067833848e-15  # Wb
