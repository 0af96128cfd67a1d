"""Matrix functions of symmetric HSS matrices via telescopic decompositions
and small-matrix rational Krylov subspaces."""

from .cluster_tree import ClusterTree, build_balanced_tree, build_tree, nodes_at_depth
from .dense_core import (ScalarFunction, matfun_dense, orthonormalize,
                         read_matrix_csv, rel_fro_error, scalar_function,
                         write_matrix_csv)
from .errors import (ConsistencyError, ContractError, FunctionDomainError,
                     HssFunError, PoleCollisionError)
from .hss import HssMatrix, compress, compress_dense, hss_matvec, hss_rank, hss_to_dense
from .matfun import (MatFunDiagnostics, MatFunRequest, error_bound_estimate,
                     estimate_spectrum_bounds, low_rank_update_matfun,
                     matfun_hss, matfun_telescopic)
from .poles import (RationalApproximant, aaa, pole_count_exp, pole_count_markov,
                    poles_exp, poles_markov, poles_sign)
from .rational_krylov import (INF, KrylovBasis, PoleList, check_blockdiag_property,
                              make_conjugation_closed, rational_arnoldi)
from .telescopic import (TelescopicDecomposition, from_hss, matvec,
                         principal_submatrices, telescopic_rank, to_dense,
                         to_hss, to_standard)

__version__ = "0.1.0"

__all__ = [
    "ClusterTree", "build_tree", "build_balanced_tree", "nodes_at_depth",
    "ScalarFunction", "scalar_function", "matfun_dense", "orthonormalize",
    "rel_fro_error", "read_matrix_csv", "write_matrix_csv",
    "HssFunError", "ContractError", "FunctionDomainError", "PoleCollisionError",
    "ConsistencyError",
    "HssMatrix", "compress", "compress_dense", "hss_to_dense", "hss_matvec",
    "hss_rank",
    "TelescopicDecomposition", "from_hss", "to_dense", "matvec",
    "principal_submatrices", "to_standard", "to_hss", "telescopic_rank",
    "PoleList", "INF", "KrylovBasis", "rational_arnoldi",
    "check_blockdiag_property", "make_conjugation_closed",
    "MatFunRequest", "MatFunDiagnostics", "low_rank_update_matfun",
    "matfun_telescopic", "matfun_hss", "error_bound_estimate",
    "estimate_spectrum_bounds",
    "RationalApproximant", "aaa", "poles_exp", "poles_markov", "poles_sign",
    "pole_count_exp", "pole_count_markov",
]
