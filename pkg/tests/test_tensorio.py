import numpy as np
import pytest

from gnnflow.params import (MODELS, gen_params, params_from_tensors,
                            params_to_tensors)
from gnnflow.tensorio import (MAGIC, TensorFormatError, load_manifest,
                              load_tensor, save_manifest, save_tensor)

from conftest import small_dims


def test_tensor_roundtrip(tmp_path, rng):
    arr = rng.normal(size=(5, 7)).astype(np.float32)
    path = tmp_path / "t.gnnh"
    save_tensor(arr, path)
    back = load_tensor(path)
    assert back.dtype == np.float32
    np.testing.assert_array_equal(back, arr)


def test_vector_roundtrip_as_row(tmp_path):
    vec = np.arange(4, dtype=np.float32)
    path = tmp_path / "v.gnnh"
    save_tensor(vec, path)
    assert load_tensor(path).shape == (1, 4)


def test_header_layout(tmp_path):
    path = tmp_path / "t.gnnh"
    save_tensor(np.zeros((2, 3), dtype=np.float32), path)
    raw = path.read_bytes()
    assert raw[:4] == MAGIC
    assert raw[4] == 1
    assert int.from_bytes(raw[5:9], "little") == 2
    assert int.from_bytes(raw[9:13], "little") == 3
    assert len(raw) == 13 + 2 * 3 * 4


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.gnnh"
    path.write_bytes(b"NOPE" + bytes(20))
    with pytest.raises(TensorFormatError):
        load_tensor(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "t.gnnh"
    save_tensor(np.zeros((2, 3), dtype=np.float32), path)
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(TensorFormatError):
        load_tensor(path)


@pytest.mark.parametrize("model", MODELS)
def test_manifest_roundtrip_all_models(tmp_path, model):
    dims = small_dims(model)
    p = gen_params(model, dims, 5)
    save_manifest(model, params_to_tensors(model, p), tmp_path / model)
    name, tensors = load_manifest(tmp_path / model / "manifest.json")
    assert name == model
    q = params_from_tensors(model, tensors)
    for field in type(p).__dataclass_fields__:
        a, b = getattr(p, field), getattr(q, field)
        if isinstance(a, np.ndarray):
            np.testing.assert_array_equal(np.asarray(a, dtype=np.float32), b)
        else:
            assert a == pytest.approx(b)
