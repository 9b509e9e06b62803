"""Numerical toolkit for 2D conformal-metric constructions.

Builds and checks the ingredients of a family of conformal metrics on the
unit disc: a harmonic field on the slit plane with extreme dynamic range,
integrals over 120-degree minimal trees, a mixed Dirichlet problem on a
long pentagon, mollified gluings and their subharmonicity, Gaussian
curvature signs and curve lengths of conformal factors, composite bump
metrics, and flat (developable) graph extensions with projection-length
comparisons.
"""

from nonembed.logscale import LogScaledReal

__all__ = ["LogScaledReal"]
__version__ = "0.1.0"
