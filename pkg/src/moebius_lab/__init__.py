"""Moebius geometry of submanifolds: extraction, GCR residuals, reconstruction."""

import os as _os

# MOEBIUS_LAB_THREADS caps BLAS/OpenMP threads; it only takes effect if numpy
# has not been imported yet.
_threads = _os.environ.get("MOEBIUS_LAB_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .chart import Chart, GridField, convergence_order  # noqa: E402
from .minkowski import MinkowskiSpace, MobiusTransform  # noqa: E402
from .immersion import LightConeLift, lift_from_values  # noqa: E402
from .gcr import GCRData, assemble_connection, gcr_data_from_lift, gcr_residuals  # noqa: E402
from .bonnet import align_mobius, extract_immersion, integrate_frame  # noqa: E402

__all__ = [
    "Chart", "GridField", "convergence_order", "MinkowskiSpace", "MobiusTransform", "LightConeLift",
    "lift_from_values", "GCRData", "assemble_connection", "gcr_data_from_lift", "gcr_residuals",
    "align_mobius", "extract_immersion", "integrate_frame",
]
__version__ = "0.1.0"
