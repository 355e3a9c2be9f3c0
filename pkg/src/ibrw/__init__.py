"""Time-inhomogeneous branching random walks with piecewise constant variance.

Library layout:

- ``profile``     variance profiles, cumulative-variance integrals, concave
                  hull reduction to effective parameters
- ``prediction``  optimal path, logarithmic barrier, first/second order
                  predictions for the maximum
- ``simulate``    exact level-by-level simulation with a counter-based
                  generator, maxima, lineages, barrier-confined counting
- ``bridge``      discrete Brownian bridges and Monte Carlo verification of
                  barrier / ruin / first-passage estimates
- ``experiments`` lower-bound counting construction and tightness studies
- ``cli``         command-line front end
"""

__version__ = "0.1.0"
