"""mvrefine: extract, refine, and evaluate motion-vector fields from
compressed-video dumps, approximating dense optical flow."""

from .codecsim import decode_gop, encode_gop, inject_mv_noise, motion_compensate
from .confidence import (
    GradientField,
    edge_strength,
    gradients,
    normalize,
    scharr_gradients,
    structure_tensor_confidence,
)
from .dumpio import (
    DumpError,
    DumpFormatError,
    DumpTruncationError,
    DumpValidationError,
    merge_gops,
    read_dump,
    split_gops,
    write_dump,
)
from .evalviz import FlowStats, benchmark_refine, endpoint_error, render_confidence, render_flow
from .model import (
    ConfidenceMap,
    DumpHeader,
    FlowField,
    FrameRecord,
    FrameType,
    GopStream,
    MotionVectorField,
    TraceField,
)
from .oforacle import LkConfig, lk_flow
from .refine import (
    RefineConfig,
    accumulate_trace,
    block_pool,
    median3,
    median_filter,
    propagate_confidence,
    refine_gop,
    threshold_flow,
    upsample_mv,
)

__version__ = "0.1.0"

__all__ = [
    "ConfidenceMap",
    "DumpError",
    "DumpFormatError",
    "DumpHeader",
    "DumpTruncationError",
    "DumpValidationError",
    "FlowField",
    "FlowStats",
    "FrameRecord",
    "FrameType",
    "GopStream",
    "GradientField",
    "LkConfig",
    "MotionVectorField",
    "RefineConfig",
    "TraceField",
    "accumulate_trace",
    "benchmark_refine",
    "block_pool",
    "decode_gop",
    "edge_strength",
    "encode_gop",
    "endpoint_error",
    "gradients",
    "inject_mv_noise",
    "lk_flow",
    "median3",
    "median_filter",
    "merge_gops",
    "motion_compensate",
    "normalize",
    "propagate_confidence",
    "read_dump",
    "refine_gop",
    "render_confidence",
    "render_flow",
    "scharr_gradients",
    "split_gops",
    "structure_tensor_confidence",
    "threshold_flow",
    "upsample_mv",
    "write_dump",
]
