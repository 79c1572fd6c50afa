import numpy as np
import pytest

from mrisynth.volume import GridMeta, IntensityVolume, LabelVolume


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_intensity(data, spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)):
    data = np.asarray(data, dtype=np.float32)
    meta = GridMeta.axis_aligned(data.shape, spacing, origin)
    return IntensityVolume(meta, data)


def make_labels(data, spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)):
    data = np.asarray(data)
    meta = GridMeta.axis_aligned(data.shape, spacing, origin)
    return LabelVolume(meta, data)


def two_region_labels(dims=(20, 20, 20), spacing=(1.0, 1.0, 1.0)):
    """Half label 1, half label 2; no background."""
    data = np.ones(dims, dtype=np.int64)
    data[dims[0] // 2:] = 2
    return make_labels(data, spacing)
