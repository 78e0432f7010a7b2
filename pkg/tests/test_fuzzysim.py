import numpy as np
import pytest
import tlsh
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from binoracle.fuzzysim import (DegenerateInput, DegenerateVariance, EmptySet, FuzzyDigest, InputTooSmall,
                                VersionMismatch, cohens_d, corpus_from_manifest, digest, distance, distance_matrix,
                                file_digest, package_mean_matrix, read_manifest, synthetic_corpus, threshold_fraction,
                                write_manifest)

from conftest import FIXTURE_NAMES, fixture_path


def _random_inputs(n, seed):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        size = int(rng.choice([50, 51, 100, 500, 656, 657, 1024, 3199, 3200, 5000]))
        if i % 3 == 0:
            data = rng.integers(0, 256, size, dtype=np.uint8)
        else:
            # skewed alphabets reach very different quartile layouts
            k = int(rng.integers(8, 256))
            p = rng.dirichlet(np.full(k, 0.3))
            data = rng.choice(k, size, p=p).astype(np.uint8)
        out.append(data.tobytes())
    return out


def _oracle(data):
    h = tlsh.hash(data)
    return None if h in ("", "TNULL") else h


def test_digests_match_reference():
    inputs = _random_inputs(1000, 0)
    valid = 0
    for data in inputs:
        ref = _oracle(data)
        if ref is None:
            with pytest.raises(DegenerateInput):
                digest(data)
        else:
            assert digest(data).hex() == ref
            valid += 1
    assert valid > 900


def test_distances_match_reference():
    inputs = [d for d in _random_inputs(1100, 1) if _oracle(d)]
    rng = np.random.default_rng(2)
    for _ in range(1000):
        i, j = rng.integers(len(inputs), size=2)
        a, b = inputs[i], inputs[j]
        ha, hb = tlsh.hash(a), tlsh.hash(b)
        assert distance(digest(a), digest(b)) == tlsh.diff(ha, hb)
        assert distance(digest(a), digest(b), length=False) == tlsh.diffxlen(ha, hb)


def test_fixture_file_digests_match_reference():
    for name in FIXTURE_NAMES:
        raw = open(fixture_path(name), "rb").read()
        ref = _oracle(raw)
        if ref:
            assert file_digest(fixture_path(name)).hex() == ref


def test_matrix_equals_pairwise():
    ds = [digest(d) for d in _random_inputs(40, 3) if _oracle(d)]
    m = distance_matrix(ds)
    assert m.shape == (len(ds), len(ds))
    for i in range(len(ds)):
        for j in range(len(ds)):
            assert m[i, j] == distance(ds[i], ds[j])


def test_too_small_and_degenerate():
    with pytest.raises(InputTooSmall):
        digest(bytes(range(40)))
    with pytest.raises(DegenerateInput):
        digest(b"\x00" * 4096)


def test_hex_roundtrip_and_version():
    d = digest(bytes(np.random.default_rng(5).integers(0, 256, 2048, dtype=np.uint8)))
    text = d.hex()
    assert len(text) == 72 and text.startswith("T1")
    assert FuzzyDigest.from_hex(text) == d
    with pytest.raises(VersionMismatch):
        FuzzyDigest.from_hex("T2" + text[2:])
    with pytest.raises(VersionMismatch):
        distance(d, FuzzyDigest(**{**d.__dict__, "version": "T2"}))


_blobs = st.binary(min_size=50, max_size=2048)


def _valid(b):
    try:
        return digest(b)
    except DegenerateInput:
        return None


@settings(max_examples=10_000, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(_blobs, _blobs)
def test_identity_and_symmetry(a, b):
    da, db = _valid(a), _valid(b)
    if da is not None:
        assert distance(da, da) == 0
        assert digest(a) == da
    if da is not None and db is not None:
        assert distance(da, db) == distance(db, da)


def test_locality_median_nondecreasing():
    rng = np.random.default_rng(7)
    base = rng.integers(0, 256, 4096, dtype=np.uint8)
    d0 = digest(base.tobytes())
    medians = []
    for k in (1, 16, 256):
        ds = []
        for _ in range(100):
            v = base.copy()
            idx = rng.choice(4096, k, replace=False)
            v[idx] ^= rng.integers(1, 256, k, dtype=np.uint8)
            ds.append(distance(d0, digest(v.tobytes())))
        medians.append(np.median(ds))
    assert medians == sorted(medians)


# ---------------------------------------------------------------- statistics
def test_threshold_fraction_examples():
    assert threshold_fraction([0, 0, 0]) == 1.0
    assert threshold_fraction([50, 150], t=100) == 0.5
    assert threshold_fraction([100]) == 1.0
    with pytest.raises(EmptySet):
        threshold_fraction([])


def test_cohens_d_examples():
    assert cohens_d([1, 2, 3, 4], [1, 2, 3, 4]) == pytest.approx(0.0)
    with pytest.raises(DegenerateVariance):
        cohens_d([1, 1], [0, 0])
    rng = np.random.default_rng(11)
    d = cohens_d(rng.normal(1, 1, 10_000), rng.normal(0, 1, 10_000))
    assert abs(d - 1.0) < 0.05


def test_cohens_d_hand_value():
    # means 2 and 5, sample variances 1 and 1 -> pooled sd 1
    assert cohens_d([5, 4, 6], [1, 2, 3]) == pytest.approx(3.0)


@given(st.lists(st.floats(0, 1), min_size=2, max_size=30), st.lists(st.floats(0, 1), min_size=2, max_size=30))
def test_sign_law(a, b):
    try:
        d = cohens_d(a, b)
    except DegenerateVariance:
        return
    if np.mean(a) > np.mean(b) + 1e-12:
        assert d > 0


def _digests(corpus):
    return {k: [digest(b) for b in v] for k, v in corpus.items()}


def test_disjoint_random_packages():
    rng = np.random.default_rng(13)
    corpus = {p: [digest(rng.integers(0, 256, 2048, dtype=np.uint8).tobytes()) for _ in range(4)] for p in "AB"}
    ps = package_mean_matrix(corpus)
    assert ps.matrix[("A", "B")] == pytest.approx(0.0, abs=0.1)


def test_duplicated_package_cell_is_one():
    c = _digests(synthetic_corpus(2, 4, seed=3))
    c["copy"] = list(c["pkg00"])
    ps = package_mean_matrix(c)
    assert ps.matrix[("copy", "pkg00")] == 1.0 == ps.matrix[("pkg00", "copy")]


def test_matrix_symmetric_and_absent_cells():
    c = _digests(synthetic_corpus(3, 4, seed=4))
    c["lonely"] = c["pkg00"][:1]
    ps = package_mean_matrix(c)
    for (a, b), v in ps.matrix.items():
        assert ps.matrix[(b, a)] == v
    assert ps.matrix[("lonely", "lonely")] is None


def test_perturbation_corpus_positive_d():
    ps = package_mean_matrix(_digests(synthetic_corpus(seed=0)))
    assert ps.intra_mean > ps.inter_mean and ps.cohens_d > 0
    assert len(ps.intra_scores) == 5 * 15 and len(ps.inter_scores) == 10 * 36


def test_manifest_roundtrip(tmp_path):
    rows = [{"package": "a", "version": "1", "build_id": "x", "path": "single_ret_elf", "digest": ""},
            {"package": "a", "version": "2", "build_id": "y", "path": "arith_elf", "digest": None},
            {"package": "b", "version": "1", "build_id": "z", "path": "tiny_pe_x64",
             "digest": file_digest(fixture_path("tiny_pe_x64")).hex()}]
    p = tmp_path / "m.tsv"
    write_manifest(p, rows)
    back = read_manifest(p)
    assert [r["path"] for r in back] == [r["path"] for r in rows]
    corpus = corpus_from_manifest(back, base_dir=fixture_path(""))
    assert corpus["b"] == [rows[2]["digest"]]
    assert corpus["a"][1] == file_digest(fixture_path("arith_elf")).hex()


def test_sections_mode_differs_from_whole_file():
    whole = file_digest(fixture_path("dyn_imports_elf"))
    try:
        code = file_digest(fixture_path("dyn_imports_elf"), sections=True)
    except (InputTooSmall, DegenerateInput):
        return
    assert code != whole
