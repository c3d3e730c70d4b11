import numpy as np
from hypothesis import settings

settings.register_profile("research", deadline=None, max_examples=50)
settings.load_profile("research")


def rng_for(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_spd(rng: np.random.Generator, n: int) -> np.ndarray:
    """Well-conditioned SPD matrix: B @ B.T + n * I."""
    b = rng.standard_normal((n, n))
    return b @ b.T + n * np.eye(n)


def rel_err(got: np.ndarray, want: np.ndarray) -> float:
    want = np.asarray(want, dtype=float)
    scale = np.linalg.norm(want)
    return np.linalg.norm(np.asarray(got, dtype=float) - want) / (scale if scale else 1.0)
