"""Signatures, Marcus transforms and functional Ito calculus for piecewise
log-linear cadlag rough paths."""

from .tensor_algebra import (
    TruncatedTensor,
    exp_trunc,
    inverse,
    is_group_like,
    log_trunc,
    shift,
    shuffle,
    shuffle_product,
    tensor_mul,
)
from .paths import (
    GroupPath,
    PartitionSpec,
    PiecewiseLinearMap,
    concat,
    p_variation,
    time_extend,
    time_stretch,
    tracking_jumps_extend,
)
from .marcus import MarcusPair, MarcusTransform, default_pair, marcus_transform
from .signature import SignaturePath, signature
from .functionals import (
    Compose,
    LevyArea,
    LinearSig,
    PathFunctional,
    PerturbationPlan,
    SinTime,
    SupNorm,
    builtin,
    invariance_probe,
    marcus_extend,
    vertical_derivative,
)
from .integration import (
    ControlledPath,
    IntegralResult,
    MeshSchedule,
    jump_compensator,
    remainder,
    rough_integral,
    young_integral,
)
from .verify import (
    AsymmetricHessianError,
    check_foellmer_ito,
    check_ito_rough,
    check_ito_young,
    check_rie,
    foellmer_qv,
    taylor_at,
    taylor_expand,
    uat_fit,
)
from .estimators import LinearSignatureRegressor, SignatureTransformer

__version__ = "0.1.0"
