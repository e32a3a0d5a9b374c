"""Boundary feedback steering of a traffic shock in the Aw-Rascle-Zhang model.

Modules: ``model`` (pressure, speeds, steady shocks, eigenstructure),
``transform`` (fixed-domain state and interface relations), ``gains``
(feedback design and certificates), ``solver`` (time integration),
``lyapunov`` (norms and decay diagnostics), ``cli`` (command line).
"""

__version__ = "0.1.0"
