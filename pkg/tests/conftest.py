import hypothesis
import numpy as np
import pytest

np.seterr(all="warn", under="ignore")

hypothesis.settings.register_profile("default", max_examples=40, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.load_profile("default")


def random_spd(rng, d, eps=0.1):
    a = rng.standard_normal((d, d))
    return a @ a.T + eps * np.eye(d)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def blobs(rng, centers, n_per, scale=1.0):
    centers = np.asarray(centers, dtype=float)
    pts = [c + scale * rng.standard_normal((n_per, centers.shape[1])) for c in centers]
    return np.vstack(pts)
