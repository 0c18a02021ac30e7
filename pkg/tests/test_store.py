"""Binary store and CSV interchange: byte-exact round trips and rejection."""

import os
import struct

import numpy as np
import pytest

from reidkit import (
    CorruptFileError,
    CsvShapeError,
    DataValidationError,
    DuplicateRecordError,
    EmbeddingSet,
    FormatError,
    export_csv,
    format_float32,
    import_csv,
    read_store,
    store_bytes,
    write_store,
)


def _sample_set(n=6, dim=3, seed=0):
    rng = np.random.default_rng(seed)
    subjects = [f"s{i % 3:02d}" for i in range(n)]
    images = [f"img{i:03d}" for i in range(n)]
    return EmbeddingSet.from_arrays(
        dim, subjects, images, rng.normal(size=(n, dim)).astype(np.float32)
    )


def _fuzz_set(rng, n, dim):
    # raw bit patterns exercise subnormals, -0.0, and extreme exponents
    bits = rng.integers(0, 2**32, size=(n, dim), dtype=np.uint32)
    vectors = bits.view(np.float32).copy()
    vectors[~np.isfinite(vectors)] = 0.125
    subjects = [f"s{rng.integers(0, max(2, n // 3)):03d}" for _ in range(n)]
    images = [f"img{i:05d}" for i in range(n)]
    return EmbeddingSet.from_arrays(dim, subjects, images, vectors)


def test_store_round_trip_small(tmp_path):
    data = _sample_set()
    path = tmp_path / "emb.f2fe"
    write_store(data, path)
    loaded = read_store(path)
    assert loaded == data
    assert store_bytes(loaded) == path.read_bytes()


def test_store_round_trip_empty(tmp_path):
    data = _sample_set().subset([])
    path = tmp_path / "empty.f2fe"
    write_store(data, path)
    loaded = read_store(path)
    assert len(loaded) == 0
    assert loaded.dim == data.dim
    assert store_bytes(loaded) == path.read_bytes()


def test_store_round_trip_unicode_ids(tmp_path):
    data = EmbeddingSet.from_arrays(
        2,
        ["sujet-é", "被試者", "sujet-é"],
        ["imágen", "img2", "img3"],
        np.ones((3, 2), dtype=np.float32),
    )
    path = tmp_path / "uni.f2fe"
    write_store(data, path)
    loaded = read_store(path)
    assert loaded == data


def test_store_fuzz_round_trip(tmp_path):
    for seed in range(20):
        rng = np.random.default_rng(seed)
        data = _fuzz_set(rng, 50, int(rng.integers(1, 9)))
        path = tmp_path / f"fuzz{seed}.f2fe"
        write_store(data, path)
        loaded = read_store(path)
        assert loaded == data
        # writing what was read reproduces the file byte for byte
        assert store_bytes(loaded) == path.read_bytes()
        assert loaded.vectors.tobytes() == data.vectors.tobytes()


def test_store_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.f2fe"
    blob = bytearray(store_bytes(_sample_set()))
    blob[:4] = b"NOPE"
    path.write_bytes(blob)
    with pytest.raises(FormatError, match="magic"):
        read_store(path)


def test_store_rejects_bad_version(tmp_path):
    path = tmp_path / "bad.f2fe"
    blob = bytearray(store_bytes(_sample_set()))
    struct.pack_into("<H", blob, 4, 99)
    path.write_bytes(blob)
    with pytest.raises(FormatError, match="version"):
        read_store(path)


def test_store_rejects_zero_dim(tmp_path):
    path = tmp_path / "bad.f2fe"
    blob = bytearray(store_bytes(_sample_set()))
    struct.pack_into("<I", blob, 6, 0)
    path.write_bytes(blob)
    with pytest.raises(CorruptFileError, match="dim"):
        read_store(path)


def test_store_rejects_every_truncation(tmp_path):
    blob = store_bytes(_sample_set(n=4, dim=2))
    path = tmp_path / "cut.f2fe"
    for cut in range(0, len(blob), 3):
        path.write_bytes(blob[:cut])
        with pytest.raises((CorruptFileError, FormatError)):
            read_store(path)


def test_store_rejects_trailing_bytes(tmp_path):
    path = tmp_path / "extra.f2fe"
    path.write_bytes(store_bytes(_sample_set()) + b"\x00")
    with pytest.raises(CorruptFileError, match="trailing"):
        read_store(path)


def _table_bytes_len(tokens):
    return 4 + sum(4 + len(t.encode("utf-8")) for t in tokens)


def _body_offset(data):
    uniq_subjects = list(dict.fromkeys(data.subjects))
    uniq_images = list(dict.fromkeys(data.images))
    return 18 + _table_bytes_len(uniq_subjects) + _table_bytes_len(uniq_images)


def test_store_rejects_out_of_range_subject_index(tmp_path):
    data = _sample_set()
    blob = bytearray(store_bytes(data))
    struct.pack_into("<I", blob, _body_offset(data), 999)
    path = tmp_path / "badidx.f2fe"
    path.write_bytes(blob)
    with pytest.raises(CorruptFileError, match="subject index"):
        read_store(path)


def test_store_rejects_non_finite_vector(tmp_path):
    data = _sample_set()
    blob = bytearray(store_bytes(data))
    off = _body_offset(data) + 8  # past the first record's two u32 indices
    blob[off : off + 4] = np.float32(np.nan).tobytes()
    path = tmp_path / "nan.f2fe"
    path.write_bytes(blob)
    with pytest.raises(DataValidationError, match="NaN/Inf"):
        read_store(path)


def test_store_rejects_invalid_utf8_in_table(tmp_path):
    data = EmbeddingSet.from_arrays(2, ["ab"], ["im"], np.ones((1, 2), dtype=np.float32))
    blob = bytearray(store_bytes(data))
    blob[18 + 8 : 18 + 10] = b"\xff\xfe"  # first subject token bytes
    path = tmp_path / "badutf8.f2fe"
    path.write_bytes(blob)
    with pytest.raises(CorruptFileError, match="UTF-8"):
        read_store(path)


def test_atomic_write_replaces_and_leaves_no_temp(tmp_path):
    data = _sample_set(seed=1)
    other = _sample_set(seed=2)
    path = tmp_path / "emb.f2fe"
    write_store(data, path)
    write_store(other, path)
    assert read_store(path) == other
    leftovers = [p for p in os.listdir(tmp_path) if p != "emb.f2fe"]
    assert leftovers == []


def test_atomic_write_mode_not_restricted(tmp_path):
    path = tmp_path / "emb.f2fe"
    write_store(_sample_set(), path)
    mode = os.stat(path).st_mode & 0o777
    umask = os.umask(0)
    os.umask(umask)
    assert mode == 0o666 & ~umask


def test_format_float32_specials():
    assert format_float32(0.0) == "0.0"
    assert format_float32(-0.0) == "-0.0"
    assert np.signbit(np.float32(float(format_float32(-0.0))))
    assert format_float32(1.0) == "1.0"
    assert format_float32(0.5) == "0.5"
    assert float(format_float32(np.float32(1e-45))) != 0.0  # smallest subnormal


def test_format_float32_round_trips_random_bits():
    rng = np.random.default_rng(77)
    bits = rng.integers(0, 2**32, size=4000, dtype=np.uint32)
    values = bits.view(np.float32)
    checked = 0
    for v in values:
        if not np.isfinite(v):
            continue
        text = format_float32(v)
        back = np.float32(float(text))
        assert back.tobytes() == v.tobytes(), f"{text} reparsed differently"
        checked += 1
    assert checked > 3000
    # include the subnormal range explicitly
    for v in np.array([1e-45, -1e-45, 1e-40, 3e38, -3e38], dtype=np.float32):
        back = np.float32(float(format_float32(v)))
        assert back.tobytes() == v.tobytes()


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    data = _fuzz_set(rng, 40, 4)
    path = tmp_path / "emb.csv"
    export_csv(data, path)
    loaded = import_csv(path, dim=4)
    assert loaded == data
    raw = path.read_bytes()
    assert raw.count(b"\r\n") == 41  # header plus one line per record
    first = raw.split(b"\r\n", 1)[0].decode("ascii")
    assert first == "subject_id,image_id,v0,v1,v2,v3"


def test_csv_accepts_bare_newlines_and_blank_lines(tmp_path):
    path = tmp_path / "emb.csv"
    path.write_text(
        "subject_id,image_id,v0,v1\n" "a,i0,1.5,2.5\n" "\n" "b,i0,-3.0,0.25\n",
        encoding="utf-8",
    )
    loaded = import_csv(path, dim=2)
    assert len(loaded) == 2
    assert loaded.subjects == ("a", "b")
    np.testing.assert_array_equal(loaded.vectors, [[1.5, 2.5], [-3.0, 0.25]])


def test_csv_empty_file(tmp_path):
    path = tmp_path / "emb.csv"
    path.write_text("", encoding="utf-8")
    with pytest.raises(CsvShapeError, match="empty file"):
        import_csv(path, dim=2)


def test_csv_bad_header(tmp_path):
    path = tmp_path / "emb.csv"
    path.write_text("subject,image,v0,v1\na,i0,1,2\n", encoding="utf-8")
    with pytest.raises(CsvShapeError, match="line 1"):
        import_csv(path, dim=2)


def test_csv_header_dim_mismatch(tmp_path):
    path = tmp_path / "emb.csv"
    export_csv(_sample_set(dim=3), path)
    with pytest.raises(CsvShapeError, match="line 1"):
        import_csv(path, dim=4)


def test_csv_ragged_row_reports_line(tmp_path):
    path = tmp_path / "emb.csv"
    path.write_text(
        "subject_id,image_id,v0,v1\na,i0,1.0,2.0\nb,i0,3.0\n", encoding="utf-8"
    )
    with pytest.raises(CsvShapeError, match="line 3"):
        import_csv(path, dim=2)


def test_csv_unparsable_value_reports_line(tmp_path):
    path = tmp_path / "emb.csv"
    path.write_text(
        "subject_id,image_id,v0,v1\na,i0,1.0,2.0\nb,i0,1.0,oops\n", encoding="utf-8"
    )
    with pytest.raises(CsvShapeError, match="line 3"):
        import_csv(path, dim=2)


def test_csv_non_finite_value_rejected(tmp_path):
    path = tmp_path / "emb.csv"
    path.write_text(
        "subject_id,image_id,v0,v1\na,i0,inf,2.0\n", encoding="utf-8"
    )
    with pytest.raises(DataValidationError, match="line 2"):
        import_csv(path, dim=2)


def test_csv_duplicate_record_rejected(tmp_path):
    path = tmp_path / "emb.csv"
    path.write_text(
        "subject_id,image_id,v0,v1\na,i0,1.0,2.0\na,i0,3.0,4.0\n", encoding="utf-8"
    )
    with pytest.raises(DuplicateRecordError):
        import_csv(path, dim=2)
