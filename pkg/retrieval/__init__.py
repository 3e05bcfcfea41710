from .metrics import align_global_phase, relative_error
from .solvers import (
    Solution,
    SolverConfig,
    gs_solve,
    gs_update,
    relative_residual,
    solve,
    wf_gradient,
    wf_solve,
    wf_spectral_init,
)
