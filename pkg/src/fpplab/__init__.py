"""fpplab: lattice max-flow and min-cut experiments with random capacities.

A simulation laboratory for first passage percolation on the rescaled grid:
discretize a polyhedral domain, draw i.i.d. edge capacities, compute maximal
flows and canonical maximal streams, extract minimal cutsets and their
fattened regions, estimate the directional flow constant from cylinder flows,
and compare everything against continuum capacity functionals.
"""

from .capacity import CapacityField, LawSpec, check_hypotheses, sample
from .continuum import (
    CandidateSet,
    ConvergenceReport,
    capa_polyhedral,
    cut_convergence,
    lln_experiment,
)
from .cutset import (
    CutRegion,
    Cutset,
    cut_region,
    min_card_min_cutset,
    min_cutset,
    plaquettes,
    verify_cutset,
)
from .cylinders import (
    CylinderSpec,
    NuEstimate,
    NuTable,
    build_cylinder,
    estimate_nu,
    nu_table,
    tau,
)
from .geometry import (
    Box,
    DomainSpec,
    Halfspace,
    Polytope,
    RegionUnion,
    boundary_neighborhood_volume,
    contains,
    dist_inf,
    frac,
    sym_diff_volume,
)
from .lattice import (
    Discretization,
    EmptyTerminalError,
    LatticeNetwork,
    VoxelSet,
    discretize,
    fatten,
)
from .maxflow import (
    FlowResult,
    StreamFunction,
    canonicalize_stream,
    max_flow,
    solve_network_flow,
    verify_stream,
)
from .streams import (
    CoarseField,
    StreamMeasure,
    boundary_flux,
    coarse_grain,
    cubic_bump,
    cylinder_crossing_flow,
    divergence_residual,
    flow_value,
    integrate,
    plane_crossing_flow,
)

__version__ = "0.1.0"
