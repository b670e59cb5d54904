"""Mean value formulas for the variational p-Laplacian.

Subpackages and modules
-----------------------
core        exponents, J_p and closed-form Delta_p
quadrature  sphere and ball averages, Monte Carlo oracle
constants   normalisation constants C_{d,p}, D_{d,p}
mvf         sphere/ball mean value operators and consistency sweeps
dpp         fixed-radius dynamic programming principle solver
plane       planar exponents, threshold p0 and the hodograph identity
appendix    empirical checks of the auxiliary inequalities
"""

__version__ = "0.1.0"
