"""Counter-based splittable random streams.

Every path gets its own Philox stream keyed by (master seed, path index), so
the j-th variate of a path is a pure function of (master seed, path index, j)
and results never depend on the order in which paths are generated.
"""

from __future__ import annotations

import numpy as np

_U64 = np.uint64


def path_stream(master_seed: int, path_index: int = 0) -> np.random.Generator:
    """Independent generator for one path, keyed by (master seed, path index)."""
    if master_seed < 0 or path_index < 0:
        raise ValueError("seed and path index must be non-negative")
    key = np.array([master_seed, path_index], dtype=_U64)
    return np.random.Generator(np.random.Philox(key=key))


def path_seed_labels(master_seed: int, n_paths: int) -> list[str]:
    """Stable per-path stream identities, echoed into reports and CSVs."""
    return [f"{master_seed}:{i}" for i in range(n_paths)]
