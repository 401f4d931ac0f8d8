from ._cgl import (
    DisconnectedGraphError as DisconnectedGraphError,
    DisconnectedGraphWarning as DisconnectedGraphWarning,
    ShiftedState as ShiftedState,
    cgl_projection as cgl_projection,
    estimate_cgl as estimate_cgl,
    pseudo_objective as pseudo_objective,
)
from ._cli import RunConfig as RunConfig, load_config as load_config, main as main
from ._core import (
    ClassVerdict as ClassVerdict,
    ConnectivityMask as ConnectivityMask,
    LaplacianClass as LaplacianClass,
    LaplacianMatrix as LaplacianMatrix,
    PositiveDefinitenessError as PositiveDefinitenessError,
    RegularizationMatrix as RegularizationMatrix,
    StatisticMatrix as StatisticMatrix,
    StructureError as StructureError,
    build_k as build_k,
    build_statistic as build_statistic,
    regularization as regularization,
    validate_class as validate_class,
)
from ._descent import (
    EstimateState as EstimateState,
    EstimationResult as EstimationResult,
    EstimatorConfig as EstimatorConfig,
    NonConvergenceWarning as NonConvergenceWarning,
    criterion as criterion,
    objective as objective,
)
from ._evaluation import (
    CellSummary as CellSummary,
    ExperimentReport as ExperimentReport,
    Method as Method,
    TrialRecord as TrialRecord,
    alpha_grid as alpha_grid,
    alpha_sweep as alpha_sweep,
    estimate as estimate,
    f_score as f_score,
    relative_error as relative_error,
    run_benchmark as run_benchmark,
)
from ._ggl import ddgl_projection as ddgl_projection, estimate_ggl as estimate_ggl
from ._io import (
    edge_list as edge_list,
    read_edge_list as read_edge_list,
    read_mask as read_mask,
    read_matrix as read_matrix,
    write_edge_list as write_edge_list,
    write_matrix as write_matrix,
)
from ._kkt import KktReport as KktReport, kkt_report as kkt_report
from ._nnqp import NnqpProblem as NnqpProblem, PivotingError as PivotingError, solve_nnqp as solve_nnqp
from ._oracle import OracleResult as OracleResult, oracle_solve as oracle_solve
from ._partition import (
    RowPartition as RowPartition,
    assign as assign,
    block_inverse as block_inverse,
    diagonal_rank_one_update as diagonal_rank_one_update,
    extract_theta_u_inverse as extract_theta_u_inverse,
    low_rank_update as low_rank_update,
    partition as partition,
    reassemble as reassemble,
    rank_one_update as rank_one_update,
)
from ._synthetic import (
    GraphSpec as GraphSpec,
    edge_quadratic_form as edge_quadratic_form,
    generate_graph as generate_graph,
    laplacian_quadratic_form as laplacian_quadratic_form,
    mismatched_precision as mismatched_precision,
    perturb_connectivity as perturb_connectivity,
    sample_gmrf as sample_gmrf,
    substream as substream,
)
from ._utils import connected_components as connected_components
