import gzip
import struct

import numpy as np
import pytest

from agetrain.data import (
    TrainingSample,
    edge_map,
    load_samples,
    read_ages,
    split_train_val,
)
from agetrain.errors import DataError, FormatError, UsageError
from agetrain.nifti import read_volume


def pack_nifti(data, datatype=16, slope=1.0, inter=0.0):
    """Assemble NIfTI-1 bytes by hand, independent of any writer."""
    dims = data.shape
    hdr = bytearray(348)
    struct.pack_into("<i", hdr, 0, 348)
    struct.pack_into("<8h", hdr, 40, 3, dims[0], dims[1], dims[2], 1, 1, 1, 1)
    struct.pack_into("<h", hdr, 70, datatype)
    struct.pack_into("<h", hdr, 72, data.dtype.itemsize * 8)
    struct.pack_into("<f", hdr, 108, 352.0)
    struct.pack_into("<2f", hdr, 112, slope, inter)
    hdr[344:348] = b"n+1\x00"
    return bytes(hdr) + b"\x00" * 4 + data.tobytes(order="F")


def test_reads_float32_voxels_exactly(tmp_path):
    data = np.arange(12, dtype=np.float32).reshape(3, 2, 2)
    path = tmp_path / "v.nii"
    path.write_bytes(pack_nifti(data))
    np.testing.assert_array_equal(read_volume(path), data)


def test_reads_gzipped_files(tmp_path):
    data = np.arange(8, dtype=np.float32).reshape(2, 2, 2)
    path = tmp_path / "v.nii.gz"
    path.write_bytes(gzip.compress(pack_nifti(data)))
    np.testing.assert_array_equal(read_volume(path), data)


def test_applies_slope_and_inter(tmp_path):
    data = np.arange(8, dtype=np.uint16).reshape(2, 2, 2)
    path = tmp_path / "v.nii"
    path.write_bytes(pack_nifti(data, datatype=512, slope=0.5, inter=1.0))
    np.testing.assert_allclose(read_volume(path),
                               data.astype(np.float32) * 0.5 + 1.0)


@pytest.mark.parametrize("mangle, message", [
    (lambda b: b[:100], "truncated"),
    (lambda b: b[:344] + b"xxxx" + b[348:], "magic"),
    (lambda b: b[:40] + struct.pack("<h", 4) + b[42:], "3-D"),
    (lambda b: b[:70] + struct.pack("<h", 999) + b[72:], "datatype"),
    (lambda b: b[:-8], "truncated"),
])
def test_rejects_malformed_files(tmp_path, mangle, message):
    data = np.zeros((2, 2, 2), dtype=np.float32)
    path = tmp_path / "v.nii"
    path.write_bytes(mangle(pack_nifti(data)))
    with pytest.raises(FormatError, match=message):
        read_volume(path)


def test_read_ages(tmp_path):
    path = tmp_path / "ages.csv"
    path.write_text("subject_id,age\na,40.5\nb,61\n")
    assert read_ages(path) == {"a": 40.5, "b": 61.0}


def test_read_ages_rejects_bad_rows(tmp_path):
    path = tmp_path / "ages.csv"
    path.write_text("subject_id,age\na,young\n")
    with pytest.raises(FormatError, match="2"):
        read_ages(path)
    path.write_text("name,years\na,40\n")
    with pytest.raises(FormatError, match="subject_id"):
        read_ages(path)


def _vol(fill=0.5, dims=(8, 8, 8)):
    return np.full(dims, fill, dtype=np.float32)


def test_training_sample_validation():
    TrainingSample("s", "s", _vol(), 40.0)
    with pytest.raises(DataError, match="outside"):
        TrainingSample("s", "s", _vol(1.5), 40.0)
    with pytest.raises(DataError, match="age"):
        TrainingSample("s", "s", _vol(), 4.0)
    with pytest.raises(UsageError):
        TrainingSample("s", "s", _vol().astype(np.float64), 40.0)


def _write_sample(tmp_path, name, fill=0.5):
    data = _vol(fill)
    (tmp_path / f"{name}.nii").write_bytes(pack_nifti(data))


def test_load_samples_matches_indexed_renders(tmp_path):
    _write_sample(tmp_path, "sub-a_0")
    _write_sample(tmp_path, "sub-a_1")
    _write_sample(tmp_path, "sub-b")
    samples = load_samples(tmp_path, {"sub-a": 30.0, "sub-b": 70.0})
    assert [(s.name, s.subject_id, s.y_c) for s in samples] == [
        ("sub-a_0", "sub-a", 30.0),
        ("sub-a_1", "sub-a", 30.0),
        ("sub-b", "sub-b", 70.0),
    ]


def test_load_samples_unknown_subject_fails(tmp_path):
    _write_sample(tmp_path, "mystery")
    with pytest.raises(DataError, match="mystery"):
        load_samples(tmp_path, {"sub-a": 30.0})


def test_split_zero_fraction_reuses_train_set():
    samples = [TrainingSample(f"s{i}", f"s{i}", _vol(), 20.0 + i)
               for i in range(4)]
    train, val = split_train_val(samples, 0.0, seed=1)
    assert train == samples and val == samples


def test_split_is_by_subject_and_deterministic():
    samples = [TrainingSample(f"s{i}_{j}", f"s{i}", _vol(), 20.0 + i)
               for i in range(10) for j in range(2)]
    train, val = split_train_val(samples, 0.3, seed=5)
    train_subjects = {s.subject_id for s in train}
    val_subjects = {s.subject_id for s in val}
    assert not train_subjects & val_subjects
    assert len(val_subjects) == 3
    again = split_train_val(samples, 0.3, seed=5)
    assert again == (train, val)


def test_edge_map_ignores_polarity_level_and_scale():
    rng = np.random.default_rng(3)
    x = rng.random((12, 12, 12))
    base = edge_map(x)
    np.testing.assert_allclose(edge_map(1.0 - x), base, atol=1e-6)
    np.testing.assert_allclose(edge_map(0.2 + 0.5 * x), base, atol=1e-6)


def test_edge_map_peaks_at_a_boundary():
    x = np.zeros((10, 10, 10))
    x[5:] = 1.0
    g = edge_map(x)
    assert g.max() == 1.0
    assert set(np.unique(np.nonzero(g)[0])) == {4, 5}  # only the step faces


def test_edge_map_of_constant_volume_is_zero():
    g = edge_map(np.full((6, 6, 6), 0.7))
    assert g.dtype == np.float32
    assert not g.any()


def test_loads_generator_output(tiny_renders):
    ages = read_ages(tiny_renders / "ages.csv")
    samples = load_samples(tiny_renders, ages)
    assert len(samples) == 12  # 6 phantoms, 2 renderings each
    for s in samples:
        assert s.volume.shape == (24, 24, 24)
        assert 0.0 <= float(s.volume.min()) and float(s.volume.max()) <= 1.0
