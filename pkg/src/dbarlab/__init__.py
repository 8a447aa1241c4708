"""Numerical laboratory for the dbar-Neumann Laplacian on domains in C^2.

Penalty-Galerkin discretisation on polynomial trial spaces, min-max
variational eigenvalues, and domain-perturbation experiments.
"""

__version__ = "0.1.0"

from .poly import Poly, parse_poly
from .forms import PolyForm, dbar, theta
from .geometry import (
    Domain,
    ball,
    complex_ellipsoid,
    make_domain,
    offset_domain,
    dilate,
    interior_quadrature,
    boundary_quadrature,
)
from .discretize import BasisDescriptor, GalerkinSystem, build_basis, assemble, build_system, load_vector
from .eigen import Spectrum, hermitian_gen_eig, variational_eigenvalues, apply_inverse

__all__ = [
    "Poly",
    "parse_poly",
    "PolyForm",
    "dbar",
    "theta",
    "Domain",
    "ball",
    "complex_ellipsoid",
    "make_domain",
    "offset_domain",
    "dilate",
    "interior_quadrature",
    "boundary_quadrature",
    "BasisDescriptor",
    "GalerkinSystem",
    "build_basis",
    "assemble",
    "build_system",
    "load_vector",
    "Spectrum",
    "hermitian_gen_eig",
    "variational_eigenvalues",
    "apply_inverse",
]
