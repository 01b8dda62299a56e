"""Green's functions of time-fractional evolution equations.

Library layout:

* :mod:`fracgreen.specfun` - stable densities, subordinator kernels,
  Mittag-Leffler functions.
* :mod:`fracgreen.kernels` - base spatial Green's functions (constant
  diffusion, isotropic/anisotropic stable, 1-D variable-coefficient
  diffusion).
* :mod:`fracgreen.subordination` - the time-fractional Green's function as a
  subordination integral of a base kernel against the stable weight.
* :mod:`fracgreen.envelopes` - closed-form two-sided estimate shapes with
  regime classification and the local-to-global exponential correction.
* :mod:`fracgreen.asymptotics` - Laplace-method asymptotics with quadrature
  oracles.
* :mod:`fracgreen.mc` - Monte Carlo sampling of subordinators, inverse
  subordinators and subordinated processes; comparison-principle checks.
* :mod:`fracgreen.harness` - sweep grids, ratio fields, constant fitting and
  envelope certification reports.
* :mod:`fracgreen.cli` - command-line front end.
"""

__version__ = "0.1.0"
