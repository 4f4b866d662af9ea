import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stoquastic import rng as crng
from stoquastic.counting import (
    PROVERS, BinaryEnsemble, CountingInstance, DenseMatrixSource, HashEnsemble, acceptance_threshold,
    binary_decompose, count_omega_bruteforce, count_omega_trace, enumerate_omega, eval_F, eval_F_batch,
    hash_length, make_prover, replay_transcript, run_gs_protocol,
)
from stoquastic.errors import CapacityError, InputError


def source(seed, n=2):
    rng = np.random.default_rng(seed)
    a = rng.uniform(size=(2**n, 2**n))
    return DenseMatrixSource((a + a.T) / 2)


def test_truncation_toward_zero_and_cap():
    e = binary_decompose(DenseMatrixSource([[5 / 8 + 1e-3, 0.0], [0.0, 1.0]]), 3)
    assert e.numerators[0, 0] == 5
    assert e.numerators[1, 1] == 7


def test_members_count_digits():
    e = binary_decompose(DenseMatrixSource([[5 / 8, 0.0], [0.0, 0.0]]), 3)
    ts = np.arange(8)
    assert e.member(ts, 0, 0).sum() == 5
    assert e.member(0, 0, 0) == 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 4))
def test_ensemble_average_reconstructs_truncation(seed, m):
    e = binary_decompose(source(seed), m)
    ts = np.arange(2**m)
    avg = np.array([[e.member(ts, x, y).sum() for y in range(4)] for x in range(4)]) / 2**m
    assert np.array_equal(avg, e.truncated())


def test_pack_unpack_roundtrip():
    inst = CountingInstance(binary_decompose(source(0), 2), 4, 0.5, 0.25)
    t, x = [1, 2, 3, 0], [3, 0, 2, 1]
    s = inst.pack(t, x)
    tt, xx = inst.unpack(s)
    assert list(tt) == t and list(xx) == x


@pytest.mark.parametrize("m,L", [(1, 2), (2, 2), (2, 4), (3, 4)])
def test_omega_counts_agree(m, L):
    inst = CountingInstance(binary_decompose(source(m * 10 + L), 2), L, 0.5, 0.25)
    tr = count_omega_trace(inst)
    assert count_omega_bruteforce(inst) == tr
    omega = enumerate_omega(inst)
    assert len(omega) == tr
    assert np.all(eval_F_batch(inst, omega) == 1)
    if tr:
        assert eval_F(inst, int(omega[0])) == 1


def test_instance_validation():
    e = binary_decompose(source(0), 2)
    with pytest.raises(InputError):
        CountingInstance(e, 3, 0.5, 0.25)
    with pytest.raises(InputError):
        CountingInstance(e, 2, 0.25, 0.5)
    with pytest.raises(InputError):
        BinaryEnsemble(source(0), 0)


def test_separation_relation():
    e = binary_decompose(source(1), 2)
    inst = CountingInstance.with_separation(e, 3, 0.5)
    assert inst.L == 12
    assert np.isclose(inst.log2_large - inst.log2_small, inst.n)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**40), st.integers(4, 20), st.integers(1, 12))
def test_hash_preimages(key, kbits, b):
    h = HashEnsemble.draw(kbits, b, 2, key)
    for y in (0, 1, (1 << b) - 1):
        s = h.preimage(1, y, free_bits=5)
        if s is not None:
            assert int(h.apply(1, np.array([s]))[0]) == y
    assert h.nullity(0) >= kbits - b
    s = np.arange(16)
    assert np.array_equal(h.apply_many(np.zeros(16, dtype=int), s), h.apply(0, s))


def test_hash_linearity():
    h = HashEnsemble.draw(16, 8, 1, 42)
    a, b = 0x1234, 0x0F0F
    assert h.apply(0, a ^ b) == h.apply(0, a) ^ h.apply(0, b)


def test_unknown_prover():
    inst = CountingInstance(binary_decompose(source(0), 1), 2, 0.5, 0.25)
    with pytest.raises(InputError):
        make_prover("oracle", inst)


def test_threshold_and_hash_length():
    inst = CountingInstance(binary_decompose(DenseMatrixSource(0.5 * np.ones((2, 2))), 1), 8, 1.0, 0.5)
    assert hash_length(inst) == 11
    assert acceptance_threshold(inst) == 2 ** -3


def test_protocol_transcripts_replay_and_determinism():
    inst = CountingInstance(binary_decompose(DenseMatrixSource(0.5 * np.ones((2, 2))), 1), 8, 1.0, 0.5)
    for prover in PROVERS:
        r = run_gs_protocol(inst, prover, trials=3, seed=9, samples=40)
        again = run_gs_protocol(inst, prover, trials=3, seed=9, samples=40)
        assert r.to_dict() == again.to_dict()
        for entry in r.transcripts:
            assert replay_transcript(inst, entry, r.b, r.threshold) == entry["accept"]


def test_tampered_transcript_rejected():
    inst = CountingInstance(binary_decompose(DenseMatrixSource(0.5 * np.ones((2, 2))), 1), 8, 1.0, 0.5)
    entry = run_gs_protocol(inst, "honest", trials=1, seed=2, samples=20).transcripts[0]
    entry["verdicts"] = [not v for v in entry["verdicts"]]
    with pytest.raises(InputError):
        replay_transcript(inst, entry, hash_length(inst), acceptance_threshold(inst))


def test_direct_mode_when_hash_longer_than_strings():
    # LARGE close to 2^k forces b > k
    inst = CountingInstance(binary_decompose(DenseMatrixSource(0.9 * np.ones((2, 2))), 1), 2, 0.99, 0.3)
    r = run_gs_protocol(inst, "honest", trials=5, seed=0, samples=50)
    assert r.mode == "direct"


def test_capacity():
    inst = CountingInstance(binary_decompose(source(0, n=3), 3), 6, 0.5, 0.25)
    with pytest.raises(CapacityError):
        run_gs_protocol(inst, "honest", trials=1)


def test_rng_streams_are_labelled():
    assert crng.derive_key(1, "a") != crng.derive_key(1, "b")
    assert crng.derive_key(1, "a") == crng.derive_key(1, "a")
    u = crng.uniforms(crng.derive_key(3, "u"), np.arange(10000))
    assert 0 <= u.min() and u.max() < 1 and abs(u.mean() - 0.5) < 0.02
