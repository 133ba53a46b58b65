"""Quaternion matrix algebra and quasi non-negative factorization.

Color images live in the three imaginary planes of a pure quaternion
matrix; the factorization ``X ~= W @ H`` keeps those planes entrywise
non-negative while leaving the real planes free.  Two solvers (projected
gradient with backtracking, and a multiplier splitting method), real
per-channel baselines, image quality metrics, and a face recognition
pipeline are built on top.
"""

from .quaternion import Quaternion, qinv, qmul
from .qmatrix import (
    DomainError,
    HermitianSolver,
    QMatrix,
    ShapeError,
    SingularMatrixError,
    conj_transpose,
    fro_norm,
    hpd_solve,
    is_quasi_nonneg,
    max_abs_diff,
    project_quasi_nonneg,
    qmat_mul,
    re_inner,
    real_rep,
)
from .solvers import (
    AdmmState,
    FactorPair,
    PGConfig,
    SolveResult,
    SolverError,
    TraceRecord,
    armijo_search,
    grad_h,
    grad_w,
    kkt_residual,
    objective,
    qadmm_run,
    qadmm_step,
    qipg_run,
    write_trace_csv,
)
from .baselines import (
    ChannelTriple,
    RealAdmmState,
    RealFactorPair,
    channel_factorize,
    nmf_admm,
    nmf_pg,
)
from .imaging import (
    ColorImage,
    PpmParseError,
    QualityReport,
    from_quaternion,
    load_image,
    load_ppm,
    psnr,
    save_image,
    save_ppm,
    synthetic_color_image,
    to_quaternion,
)
from .initializers import InitBundle
from .facerec import (
    FaceDataset,
    ManifestError,
    RecognitionModel,
    accuracy,
    classify,
    encode_probe,
    generate_corpus,
    load_corpus,
    load_model,
    save_model,
    similarity,
    train,
    vectorize_image,
)

__version__ = "0.1.0"
