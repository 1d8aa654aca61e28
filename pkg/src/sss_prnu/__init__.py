"""Privacy-preserving camera attribution over secret-shared fingerprints."""

from .field import DEFAULT_PRIME, FieldError, NotPrime, PrimeField, ZeroInverse, is_prime
from .fixedpoint import (
    CapacityExceeded,
    CapacityReport,
    Centering,
    OutOfRange,
    Scaling,
    capacity_check,
    decode,
    encode,
    round_half_away,
)
from .sharing import (
    DegreeMismatch,
    DegreeOverflow,
    DuplicatePoint,
    InsufficientShares,
    LengthMismatch,
    PointMismatch,
    Share,
    ShareScheme,
    ShareVector,
    SharingError,
    add_shares,
    deserialize_share_vector,
    interpolate_at,
    interpolate_at_zero,
    lagrange_weights,
    mul_shares,
    reconstruct,
    reconstruct_vector,
    scalar_mul,
    serialize_share_vector,
    share,
    share_vector,
)
from .prnu import (
    DegenerateInput,
    DimensionMismatch,
    EmptySet,
    GaussianDenoiser,
    SyntheticCamera,
    denoise,
    estimate_fingerprint,
    extract_residual,
    match_decision,
    pearson,
    read_nmat,
    read_pgm,
    write_nmat,
    write_pgm,
)
from .wire import (
    ConnectionClosed,
    ERR_INTERNAL,
    ERR_MALFORMED,
    ERR_UNKNOWN_ID,
    FrameError,
    MSG_ENROLL,
    MSG_ENROLL_ACK,
    MSG_ERROR,
    MSG_FETCH,
    MSG_PARTIAL,
    MSG_QUERY,
    MSG_SHARE,
    encode_frame,
    pack_error,
    pack_identified,
    read_frame,
    unpack_error,
    unpack_identified,
    write_frame,
)
from .correlation import (
    EncryptedVector,
    MatchResult,
    NegativeSquareSum,
    PartialCorrelation,
    center_shares,
    compute_partials,
    deserialize_partial,
    finalize,
    prepare_vector,
    reconstruct_partials,
    reconstruct_sum_ints,
    serialize_partial,
)
from .protocol import (
    CloudServer,
    ConsistencyReport,
    EnrollTimeout,
    FaultPlan,
    LocalCluster,
    LocalLink,
    NotApplicable,
    ProtocolConfig,
    ProtocolError,
    QuorumNotReached,
    ServerStore,
    TcpCloudServer,
    TcpLink,
    TransportError,
    UnknownFingerprint,
    enroll,
    fetch_share,
    flip_one_element,
    query,
    query_residual,
    run_server,
    verify_consistency,
    verify_residual,
)

__version__ = "0.1.0"
