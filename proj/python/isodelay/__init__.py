"""Isoperimetric variational problems with one constant time delay.

Reports come back as plain dicts; problems and trajectories are the
compiled ``Problem`` and ``Trajectory`` types.
"""

import json as _json

from . import _core
from ._core import (
    DomainError,
    Error,
    ParseError,
    Problem,
    Trajectory,
    ValidationError,
    builtin_extremal,
    builtin_names,
    canonical,
    evaluate,
    functional_value,
    invariance_residual,
    linear_initial_guess,
    partial,
    reduction_costate,
)

__version__ = _core.__version__


def solve(problem, intervals=60, **settings):
    """Returns (result dict, trajectory)."""
    text, traj = _core.solve(problem, intervals, **settings)
    return _json.loads(text), traj


def _report(fn):
    def wrapped(*args, **kwargs):
        return _json.loads(fn(*args, **kwargs))

    wrapped.__name__ = fn.__name__
    wrapped.__doc__ = fn.__doc__
    return wrapped


el_residual = _report(_core.el_residual)
cdur_residual = _report(_core.cdur_residual)
dbr_residual = _report(_core.dbr_residual)
noether_constant = _report(_core.noether_constant)
abnormality_check = _report(_core.abnormality_check)
pontryagin_residuals = _report(_core.pontryagin_residuals)
hamiltonian_dbr_residual = _report(_core.hamiltonian_dbr_residual)
