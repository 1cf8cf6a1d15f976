"""besovflow: spectral Littlewood-Paley / Besov-splitting toolkit.

Submodules
----------
spectral_core     periodic grids, fields, multipliers, dealiased products
littlewood_paley  dyadic partition, blocks, homogeneous Besov norms
fourier_calculus  heat semigroup, Leray projection, Riesz pressure
besov_split       exponent ledger and the two-stage threshold splitting
mild_solver       Picard iteration for mild solutions in the weighted class
energy_solver     IMEX perturbed solver, energy traces, composed solutions
cli               command-line experiment harness
"""

__version__ = "0.1.0"

from . import _kernels  # noqa: F401  (selects compiled vs fallback kernels)
