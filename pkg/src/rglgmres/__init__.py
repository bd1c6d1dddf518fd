"""Global GMRES and randomized global GMRES for ``A X = B`` with many right-hand sides."""

from . import kernels
from .arnoldi import ArnoldiResult, GlobalArnoldi, HessenbergFactor, gl_arnoldi, rgl_arnoldi
from .blockla import (
    BasisSequence,
    as_block,
    as_csr,
    diamond_combine,
    diamond_gram,
    frob_inner,
    frob_norm,
    spmm_block,
)
from .errors import (
    ConditioningError,
    DegenerateInputError,
    KrylovError,
    MatrixMarketError,
    NumericalFailure,
    ParameterError,
    RankError,
    ResourceError,
    SemiNormDegeneracyError,
    ShapeError,
)
from .problems import (
    ProblemSpec,
    build_problem,
    gen_convdiff2d,
    gen_rhs,
    mm_read,
    mm_read_block,
    mm_write,
    mm_write_block,
)
from .sketch import (
    EmbeddingReport,
    SketchOperator,
    apply_sketch,
    estimate_epsilon,
    make_sketch,
    sketched_inner,
)
from .solver import (
    EigenData,
    GivensLeastSquares,
    QuasiOptimality,
    SketchParams,
    SolveReport,
    SolverConfig,
    gl_gmres,
    hessenberg_lstsq,
    quasi_optimality_ratio,
    rgl_gmres,
    theorem21_bound,
)

__version__ = "0.1.0"
