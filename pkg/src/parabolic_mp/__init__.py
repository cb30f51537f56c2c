"""Numerical companion for maximum-principle estimates of parabolic operators.

The package discretizes ``L u = sigma D_t u - a_ij D_i D_j u + b.Du + c u`` on
a ball-in-box cylinder and measures ``sup u`` against weighted mixed
``L_{p,q}`` norms of ``(Lu)^+``.  Modules:

``grid``
    Cylinders, grid functions, parabolic boundary and positivity sets.
``operator``
    Coefficient containers, stencils, weights and degeneracy conditions.
``mixed_norm``
    Iterated trapezoid-rule norms with a nested-loop oracle.
``solver``
    Implicit time stepping for ``Lu = f`` and barrier problems.
``estimates``
    Bound verification, ratio scans, the Bony check and the singular-drift
    counterexample.
``barrier``
    Radial Monge-Ampere barriers and composite barriers.
``scenario`` and ``cli``
    INI-driven runs and the ``parabolic-mp`` command.
"""

__version__ = "0.1.0"
