import struct

import numpy as np
import pytest

from ubssd import serialize
from ubssd.arfit import ArModel
from ubssd.core import LinearMap, Partition, TimeSeries
from ubssd.isa import IsaResult


@pytest.fixture
def series():
    rng = np.random.default_rng(0)
    vals = rng.standard_normal((3, 17)) * 10.0 ** rng.integers(-300, 300, (3, 17))
    vals[0, 0] = np.nextafter(1.0, 2.0)
    return TimeSeries(vals)


def test_binary_header_layout(series):
    data = serialize.series_to_bytes(series)
    assert data[:4] == b"BSSD"
    version, D, T = struct.unpack("<HII", data[4:14])
    assert (version, D, T) == (1, 3, 17)
    assert len(data) == 14 + 8 * 3 * 17
    # column-major: the second stored value is channel 1 at t=0
    assert struct.unpack("<d", data[22:30])[0] == series.values[1, 0]


def test_binary_roundtrip_bit_exact(series, tmp_path):
    serialize.save_series(tmp_path / "s.bssd", series)
    back = serialize.load_series(tmp_path / "s.bssd")
    assert back.values.tobytes() == series.values.tobytes()


def test_csv_roundtrip_bit_exact(series, tmp_path):
    serialize.save_series_csv(tmp_path / "s.csv", series)
    back = serialize.load_series_csv(tmp_path / "s.csv")
    assert back.values.tobytes() == series.values.tobytes()
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 3


def test_bad_magic(series):
    data = bytearray(serialize.series_to_bytes(series))
    data[:4] = b"XXXX"
    with pytest.raises(serialize.FormatError):
        serialize.series_from_bytes(bytes(data))


def test_truncated(series):
    with pytest.raises(serialize.FormatError):
        serialize.series_from_bytes(serialize.series_to_bytes(series)[:-3])


def test_armodel_roundtrip():
    rng = np.random.default_rng(1)
    model = ArModel(tuple(rng.standard_normal((4, 4)) for _ in range(3)), np.eye(4) * 2,
                    sbc_curve=((0, 1.5), (1, -2.0), (2, -2.5), (3, -2.4)), regularized=True)
    data = serialize.armodel_to_bytes(model)
    assert data[:4] == b"ARMD"
    back = serialize.armodel_from_bytes(data)
    assert back.order == 3 and back.regularized
    for a, b in zip(model.coeffs, back.coeffs):
        np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(back.noise_cov, model.noise_cov)
    assert back.sbc_curve == model.sbc_curve


def test_isaresult_roundtrip():
    rng = np.random.default_rng(2)
    res = IsaResult(LinearMap(rng.standard_normal((4, 8))), LinearMap(rng.standard_normal((4, 4))),
                    Partition.contiguous(2, 2), TimeSeries(rng.standard_normal((4, 50))),
                    {"ica_iterations": 7, "grouping_objective": 0.25})
    data = serialize.isaresult_to_bytes(res)
    assert data[:4] == b"ISAR"
    back = serialize.isaresult_from_bytes(data)
    np.testing.assert_array_equal(back.w_pca.matrix, res.w_pca.matrix)
    np.testing.assert_array_equal(back.w_isa.matrix, res.w_isa.matrix)
    assert back.partition == res.partition
    assert back.components == res.components
    assert back.diagnostics == res.diagnostics
