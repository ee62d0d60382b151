import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ssc import DataMatrix, SubspaceArrangement
from ssc.synth import SynthSpec, generate_arrangement, sample_points


def chain_instance(
    theta_deg, ng, d=4, D=50, n=3, seed=0, antipodal=False
) -> tuple[DataMatrix, SubspaceArrangement]:
    """Rotated-frame arrangement with unit-norm samples, the benchmark's
    standard construction."""
    spec = SynthSpec(
        theta_deg=theta_deg, ng=ng, ambient_dim=D, subspace_dim=d,
        n_subspaces=n, seed=seed,
    )
    arr = generate_arrangement(spec)
    if not antipodal:
        return sample_points(arr, ng, seed)
    data, arr = sample_points(arr, ng // 2, seed)
    values = np.hstack([data.values, -data.values])
    labels = np.concatenate([arr.labels, arr.labels])
    order = np.argsort(labels, kind="stable")
    return DataMatrix(values[:, order]), SubspaceArrangement(
        arr.bases, labels=labels[order]
    )


def independent_instance(d, n_points_per, n=3, seed=0):
    """Independent arrangement: orthogonal frame split into n bases,
    ambient dimension n*d."""
    rng = np.random.default_rng(seed)
    D = n * d
    frame = np.linalg.qr(rng.standard_normal((D, D)))[0]
    bases = tuple(frame[:, k * d : (k + 1) * d] for k in range(n))
    cols, labels = [], []
    for k, U in enumerate(bases):
        X = U @ rng.standard_normal((d, n_points_per))
        X /= np.linalg.norm(X, axis=0)
        cols.append(X)
        labels.extend([k] * n_points_per)
    return DataMatrix(np.hstack(cols)), SubspaceArrangement(
        bases, labels=np.asarray(labels)
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
