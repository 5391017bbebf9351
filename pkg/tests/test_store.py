import json
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amiwav import store
from amiwav.classification import build_classified_model, extract_features, kmeans
from amiwav.errors import CorruptFileError, InvalidArgumentError, StructureError, UnsupportedVersionError
from amiwav.ingest import SyntheticFleetSpec, generate_synthetic
from amiwav.load_model import build_model

from conftest import MONDAY, profile


@pytest.fixture(scope="module")
def fleet():
    return generate_synthetic(SyntheticFleetSpec(customers=12, weeks=8), seed=1)


@pytest.fixture(scope="module")
def wavelet(fleet):
    return store.WaveletFleetModel.from_models([build_model(p, 3) for p in fleet])


@pytest.fixture(scope="module")
def classified(fleet):
    return build_classified_model(fleet, kmeans(extract_features(fleet, 3), k=5, seed=0))


def same_wavelet(a, b):
    assert (a.level, a.original_length, a.start_time, a.interval_hours) == (b.level, b.original_length, b.start_time, b.interval_hours)
    assert len(a.models) == len(b.models)
    for x, y in zip(a.models, b.models):
        assert x.customer_id == y.customer_id and x.padding == y.padding
        assert x.approximation.tobytes() == y.approximation.tobytes()


def same_classified(a, b):
    assert a.customer_ids == b.customer_ids
    assert (a.start_time, a.interval_hours) == (b.start_time, b.interval_hours)
    for name in ("tlps", "labels", "peaks", "scales"):
        x, y = getattr(a, name), getattr(b, name)
        assert x.shape == y.shape and x.tobytes() == y.astype(x.dtype).tobytes()


@pytest.mark.parametrize("fmt", ["binary", "json"])
def test_wavelet_round_trip_bit_exact(tmp_path, wavelet, fmt):
    path = tmp_path / "w.amiw"
    store.save_model(wavelet, path, fmt)
    same_wavelet(wavelet, store.load_model(path))


@pytest.mark.parametrize("fmt", ["binary", "json"])
def test_classified_round_trip_bit_exact(tmp_path, classified, fmt):
    path = tmp_path / "c.amiw"
    store.save_model(classified, path, fmt)
    same_classified(classified, store.load_model(path))


def test_binary_encoding_is_stable(wavelet, classified):
    assert store.encode(store.decode(store.encode(wavelet))) == store.encode(wavelet)
    assert store.encode(store.decode(store.encode(classified))) == store.encode(classified)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(min_value=0, max_value=1e12), min_size=8, max_size=80), st.text(min_size=1, max_size=8))
def test_arbitrary_values_and_ids(values, cid):
    m = build_model(profile(values, cid=cid), 3)
    fleet = store.WaveletFleetModel.from_models([m])
    back = store.decode(store.encode(fleet))
    same_wavelet(fleet, back)
    same_wavelet(fleet, store.from_json_dict(json.loads(json.dumps(store.to_json_dict(fleet)))))


def test_empty_fleet(tmp_path):
    empty = store.WaveletFleetModel(3, 0, None, 1, ())
    store.save_model(empty, tmp_path / "e.amiw")
    back = store.load_model(tmp_path / "e.amiw")
    assert back.models == () and back.start_time is None and back.stored_values == 0


def test_header_layout(wavelet):
    data = store.encode(wavelet)
    magic, version, mtype, level, count, length, interval = struct.unpack_from("<4sHBHIII", data)
    assert (magic, version, mtype, level, count, length, interval) == (b"AMIW", 1, 1, 3, 12, 1344, 1)
    (n,) = struct.unpack_from("<H", data, 21)
    assert data[23 : 23 + n].decode() == MONDAY.isoformat()


def test_corruption_detected(wavelet):
    data = bytearray(store.encode(wavelet))
    flipped = bytes([data[0] ^ 0x01]) + bytes(data[1:])
    with pytest.raises(CorruptFileError, match="magic"):
        store.decode(flipped)
    bad_version = bytes(data[:4]) + struct.pack("<H", 99) + bytes(data[6:])
    with pytest.raises(UnsupportedVersionError):
        store.decode(bad_version)
    with pytest.raises(CorruptFileError, match="truncated"):
        store.decode(bytes(data[:-3]))
    with pytest.raises(CorruptFileError, match="trailing"):
        store.decode(bytes(data) + b"\0")
    with pytest.raises(CorruptFileError):
        store.decode(b"AMI")
    bad_type = bytes(data[:6]) + b"\x07" + bytes(data[7:])
    with pytest.raises(CorruptFileError, match="model type"):
        store.decode(bad_type)


def test_corrupt_json(tmp_path, classified):
    d = store.to_json_dict(classified)
    d["magic"] = "NOPE"
    (tmp_path / "a.json").write_text(json.dumps(d))
    with pytest.raises(CorruptFileError):
        store.load_model(tmp_path / "a.json")
    (tmp_path / "b.json").write_text("{not json")
    with pytest.raises(CorruptFileError):
        store.load_model(tmp_path / "b.json")


def test_atomic_write_leaves_no_temp_files(tmp_path, wavelet):
    store.save_model(wavelet, tmp_path / "m.amiw")
    store.save_model(wavelet, tmp_path / "m.amiw")
    assert [p.name for p in tmp_path.iterdir()] == ["m.amiw"]
    with pytest.raises(InvalidArgumentError):
        store.save_model(wavelet, tmp_path / "x", fmt="xml")


def test_fleet_must_share_timeline(fleet):
    a = build_model(fleet[0], 3)
    b = build_model(fleet[1], 2)
    with pytest.raises(StructureError):
        store.WaveletFleetModel.from_models([a, b])


def test_model_info(tmp_path, wavelet, classified):
    store.save_model(wavelet, tmp_path / "w.amiw")
    store.save_model(classified, tmp_path / "c.json", "json")
    w = store.model_info(tmp_path / "w.amiw")
    c = store.model_info(tmp_path / "c.json")
    assert w["model_type"] == "wavelet" and w["level"] == 3 and w["stored_values"] == 12 * 168
    assert c["model_type"] == "classified" and c["k"] == 5 and c["stored_values"] == 5 * 1344 + 24
    assert c["encoding"] == "json" and w["encoding"] == "binary"


def test_full_scale_compression_percentages():
    original = 323 * 5208
    assert original == 1_682_184
    assert store.compression_stats(210_273, original).formatted() == "-87.50%"
    assert store.compression_stats(5 * 5208 + 2 * 323, original).formatted() == "-98.41%"
    assert store.compression_stats(original, original).percent_compression == 0.0
    with pytest.raises(InvalidArgumentError):
        store.compression_stats(5, 0)
