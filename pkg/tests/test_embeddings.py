import numpy as np
import pytest

from emoforensics.embeddings import (
    EmbeddingFormatError,
    EmbeddingSequence,
    Modality,
    downsample_to_length,
    read_embedding_file,
    write_embedding_file,
)


def make_seq(num_frames=16, dim=512, modality=Modality.VIDEO, seed=0):
    rng = np.random.default_rng(seed)
    return EmbeddingSequence(modality, rng.standard_normal((num_frames, dim)).astype(np.float32), "s0")


def test_round_trip_identity(tmp_path):
    seq = make_seq(16, 512)
    path = tmp_path / "a.emb"
    write_embedding_file(seq, path)
    back = read_embedding_file(path, sample_id="s0")
    assert back.modality is Modality.VIDEO
    assert back.data.dtype == np.float32
    assert np.array_equal(back.data, seq.data)


def test_minimal_file_layout(tmp_path):
    seq = EmbeddingSequence(Modality.AUDIO, np.zeros((1, 1), dtype=np.float32))
    path = tmp_path / "one.emb"
    write_embedding_file(seq, path)
    raw = path.read_bytes()
    assert len(raw) == 20 + 4  # header + single float payload
    assert raw[:4] == b"EMOS"
    assert raw[8] == 1  # audio modality code
    assert raw[9:12] == b"\x00\x00\x00"


def test_nonfinite_rejected_on_write(tmp_path):
    seq = make_seq(2, 3)
    seq.data[1, 2] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        write_embedding_file(seq, tmp_path / "bad.emb")


def test_nonfinite_rejected_on_construction():
    with pytest.raises(ValueError, match="non-finite"):
        EmbeddingSequence(Modality.VIDEO, np.array([[np.inf]], dtype=np.float32))


def test_truncated_file_rejected(tmp_path):
    path = tmp_path / "t.emb"
    write_embedding_file(make_seq(4, 8), path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-1])
    with pytest.raises(EmbeddingFormatError, match="size mismatch"):
        read_embedding_file(path)


def test_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "t.emb"
    write_embedding_file(make_seq(4, 8), path)
    path.write_bytes(path.read_bytes() + b"x")
    with pytest.raises(EmbeddingFormatError, match="size mismatch"):
        read_embedding_file(path)


def test_bad_magic_and_version(tmp_path):
    path = tmp_path / "t.emb"
    write_embedding_file(make_seq(2, 2), path)
    raw = bytearray(path.read_bytes())
    other = tmp_path / "magic.emb"
    other.write_bytes(b"NOPE" + bytes(raw[4:]))
    with pytest.raises(EmbeddingFormatError, match="magic"):
        read_embedding_file(other)
    raw[4] = 9
    other.write_bytes(bytes(raw))
    with pytest.raises(EmbeddingFormatError, match="version"):
        read_embedding_file(other)


def test_zero_frames_header_rejected(tmp_path):
    import struct

    header = struct.pack("<4sIB3sII", b"EMOS", 1, 0, b"\x00\x00\x00", 0, 4)
    path = tmp_path / "zero.emb"
    path.write_bytes(header)
    with pytest.raises(EmbeddingFormatError, match="invalid shape"):
        read_embedding_file(path)


def test_nonfinite_payload_rejected(tmp_path):
    path = tmp_path / "nan.emb"
    write_embedding_file(make_seq(2, 2), path)
    raw = bytearray(path.read_bytes())
    raw[20:24] = np.array([np.nan], dtype="<f4").tobytes()
    path.write_bytes(bytes(raw))
    with pytest.raises(EmbeddingFormatError, match="non-finite"):
        read_embedding_file(path)


def test_downsample_identity():
    seq = make_seq(8, 4)
    out = downsample_to_length(seq, 8)
    assert np.array_equal(out.data, seq.data)


def test_downsample_constant_sequence():
    data = np.full((12, 3), 2.5, dtype=np.float32)
    out = downsample_to_length(EmbeddingSequence(Modality.VIDEO, data), 5)
    assert out.num_frames == 5
    assert np.array_equal(out.data, np.full((5, 3), 2.5, dtype=np.float32))


def test_downsample_ramp_segment_means():
    ramp = np.arange(32, dtype=np.float32).reshape(32, 1)
    out = downsample_to_length(EmbeddingSequence(Modality.AUDIO, ramp), 16)
    expected = np.array([0.5 + 2 * i for i in range(16)], dtype=np.float32).reshape(16, 1)
    assert np.array_equal(out.data, expected)


def test_downsample_matches_segment_oracle():
    rng = np.random.default_rng(3)
    data = rng.standard_normal((13, 5)).astype(np.float32)
    seq = EmbeddingSequence(Modality.VIDEO, data)
    for target in (1, 2, 3, 5, 7, 13):
        out = downsample_to_length(seq, target)
        for i in range(target):
            lo = i * 13 // target
            hi = (i + 1) * 13 // target
            expected = data[lo:hi].astype(np.float64).mean(axis=0)
            np.testing.assert_allclose(out.data[i], expected, rtol=1e-6)


def test_downsample_preserves_global_mean_when_divisible():
    rng = np.random.default_rng(11)
    data = rng.standard_normal((24, 6)).astype(np.float32)
    seq = EmbeddingSequence(Modality.VIDEO, data)
    for target in (2, 3, 4, 6, 8, 12):
        out = downsample_to_length(seq, target)
        np.testing.assert_allclose(
            out.data.astype(np.float64).mean(axis=0),
            data.astype(np.float64).mean(axis=0),
            atol=1e-6,
        )


def test_downsample_errors():
    seq = make_seq(4, 2)
    with pytest.raises(ValueError):
        downsample_to_length(seq, 5)
    with pytest.raises(ValueError):
        downsample_to_length(seq, 0)
