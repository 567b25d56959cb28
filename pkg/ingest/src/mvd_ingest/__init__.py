"""mvd-ingest: adapter from real compressed video to MVD1 motion-vector dumps."""

from .adapter import IngestReport, ingest, motion_compensate, resample_mvs
from .toolchain import (
    MV_EXPORT_CODECS,
    IngestCapabilityError,
    IngestError,
    build_exporter,
    run_exporter,
)

__all__ = [
    "IngestCapabilityError",
    "IngestError",
    "IngestReport",
    "MV_EXPORT_CODECS",
    "build_exporter",
    "ingest",
    "motion_compensate",
    "resample_mvs",
    "run_exporter",
]
