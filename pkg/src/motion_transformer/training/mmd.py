import logging
import warnings

import numpy as np
from scipy.spatial.distance import cdist, pdist

from motion_transformer.types import UsageError

logger = logging.getLogger(__name__)


def median_bandwidth(x: np.ndarray, y: np.ndarray) -> float:
    """Median of the non-zero pairwise distances of the pooled sample, 1.0 when all coincide."""
    pooled = np.vstack([x, y])
    distances = pdist(pooled, "euclidean")
    distances = distances[distances > 0]
    if distances.size == 0:
        warnings.warn("All pooled codes coincide, falling back to MMD bandwidth 1.0")
        return 1.0
    return float(np.median(distances))


def gaussian_kernel(x: np.ndarray, y: np.ndarray, bandwidth: float) -> np.ndarray:
    return np.exp(-0.5 * cdist(x, y, "sqeuclidean") / bandwidth**2)


def mmd2(x: np.ndarray, y: np.ndarray, bandwidth: float | None = None) -> float:
    """Biased (V-statistic) squared maximum mean discrepancy with a Gaussian kernel."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if len(x) == 0 or len(y) == 0:
        raise UsageError("mmd2 needs two non-empty samples")
    if x.shape[1] != y.shape[1]:
        raise UsageError(f"mmd2: sample dimensions differ, {x.shape} vs {y.shape}")
    bw = median_bandwidth(x, y) if bandwidth is None else bandwidth
    kxx = gaussian_kernel(x, x, bw).mean()
    kyy = gaussian_kernel(y, y, bw).mean()
    kxy = gaussian_kernel(x, y, bw).mean()
    return max(float(kxx + kyy - 2.0 * kxy), 0.0)
