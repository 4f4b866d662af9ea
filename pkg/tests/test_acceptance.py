"""Acceptance criteria 1-9.  Each test prints one PASS/FAIL line in the
terminal summary; run ``pytest tests/test_acceptance.py -v`` or this file directly."""
import json
import math
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from stoquastic import gadgets as gd
from stoquastic.clock import (
    acceptance_operator, build_clock_hamiltonian, build_history_state, expectation, random_circuit,
)
from stoquastic.counting import (
    CountingInstance, DenseMatrixSource, binary_decompose, count_omega_bruteforce, count_omega_trace,
    run_gs_protocol,
)
from stoquastic.gmatrix import NORM_SHIFT, WALK_SHIFT, to_g_matrix
from stoquastic.hamiltonian import SIGMA_PLUS, X, kron_local, single
from stoquastic.io import save_hamiltonian
from stoquastic.models import checkerboard, ferro_xy, heisenberg_afm, random_stoquastic, transverse_ising
from stoquastic.spectral import (
    dense_mu, diagonalize_dense, final_distribution, gap_r, ground_energy, sign_fix, walk_ratio,
)
from stoquastic.stoquastic import bipartite_basis_change, check_stoquastic
from stoquastic.walk import WalkParams, run_postselected

# verified errors from the first green run, |lambda(compiled) - shift - lambda(target)|
TRIPLE_X_PINS = {0.3: 0.2746252152110271, 0.2: 0.0700522575734146, 0.1: 0.021127579071106517}
KKR_PINS = {0.3: 2.7860579154443528, 0.2: 1.2178038130519546, 0.1: 0.1101056459322578}
PIN_RTOL = 1e-8
# min over the circuit family of lambda * T^3 / (1 - p_max); measured 0.8153
CLOCK_C = 0.8


def detail(record_property, **kw):
    record_property("detail", ", ".join(f"{k}={v}" for k, v in kw.items()))


def sigma_triple():
    m = kron_local(SIGMA_PLUS, SIGMA_PLUS, SIGMA_PLUS)
    return single(3, (0, 1, 2), -3.0 * (m + m.T))


# ---------------------------------------------------------------- 1


def test_criterion_1_stoquasticity_suite(record_property):
    t0 = time.perf_counter()
    passing = [transverse_ising(5, 0.8, 1.1), transverse_ising(4, -0.5, 0.3, periodic=True)]
    passing += [ferro_xy(4, p, q) for p, q in ((1.0, 1.0), (1.0, 0.5), (1.0, 0.0), (2.0, 0.3))]
    chain = [(0, 1), (1, 2), (2, 3), (3, 4)]
    square = [(0, 1), (1, 3), (3, 2), (2, 0)]
    for n, edges in ((5, chain), (4, square)):
        afm = heisenberg_afm(n, edges=edges)
        passing.append(bipartite_basis_change(afm, checkerboard(n, edges)))
    for h in passing:
        r = check_stoquastic(h)
        assert r.is_stoquastic and r.is_termwise_stoquastic, r.to_dict()

    r = check_stoquastic(heisenberg_afm(2, J=1.0))
    assert not r.is_stoquastic
    # basis index 1 is |10> (qubit 0 set), index 2 is |01>
    found = {(row, col): complex(*v) for row, col, v in r.to_dict()["violations"]}
    assert found == {(1, 2): 2.0, (2, 1): 2.0}
    elapsed = time.perf_counter() - t0
    detail(record_property, instances=len(passing), violation="(01,10)", seconds=round(elapsed, 3))
    assert elapsed < 1.0


# ---------------------------------------------------------------- 2


def test_criterion_2_perron_frobenius(record_property):
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(100):
        n = 2 + i % 7
        s = diagonalize_dense(random_stoquastic(n, 2, seed=1000 + i))
        v = sign_fix(s.ground_vector)
        assert np.isrealobj(v) or np.abs(v.imag).max() < 1e-12
        worst = min(worst, float(np.real(v).min()))
    elapsed = time.perf_counter() - t0
    detail(record_property, min_entry=f"{worst:.2e}", seconds=round(elapsed, 2))
    assert worst >= -1e-10
    assert elapsed < 30


# ---------------------------------------------------------------- 3


WALK_INSTANCES = [(2, 0.5), (4, 0.3), (6, 0.1)]


def test_criterion_3_walk_vs_oracle(record_property):
    t0 = time.perf_counter()
    summary = []
    for n, J in WALK_INSTANCES:
        h = transverse_ising(n, J, 1.0)
        g = to_g_matrix(h, WALK_SHIFT, q=h.row_abs_bound)
        mu = dense_mu(g)
        L = WalkParams.auto(n, gap_r(g)).L
        target = final_distribution(g, L)
        good, tv_good = 0, 0
        pooled = np.zeros(2**n)
        for seed in range(30):
            out = run_postselected(g, WalkParams(L, 10_000, seed=seed))
            good += abs(out.mu_est - mu) <= 0.02
            freq = np.bincount(np.asarray(out.samples), minlength=2**n) / 10_000
            pooled += freq / 30
            tv_good += 0.5 * np.abs(freq - target).sum() <= 0.02
        summary.append(f"n{n}:{good}/30")
        assert good >= 20, (n, good)
        if n == 4:
            tv_pooled = 0.5 * np.abs(pooled - target).sum()
            summary.append(f"tv_pooled={tv_pooled:.4f},tv_runs={tv_good}/30")
            assert tv_pooled <= 0.02
            assert tv_good >= 20
    elapsed = time.perf_counter() - t0
    detail(record_property, runs=" ".join(summary), seconds=round(elapsed, 1))
    assert elapsed < 300


# ---------------------------------------------------------------- 4


def test_criterion_4_gap_ratio_convergence(record_property):
    t0 = time.perf_counter()
    worst = []
    for n in (4, 6, 8):
        h = transverse_ising(n, 0.3, 1.0)
        g = to_g_matrix(h, WALK_SHIFT, q=h.row_abs_bound)
        L = math.ceil(5 * n * gap_r(g) / 2)
        err = abs(walk_ratio(g, L) - dense_mu(g))
        worst.append(err / (4 * 2.0**-n))
        assert err <= 4 * 2.0**-n, (n, err)
    elapsed = time.perf_counter() - t0
    detail(record_property, max_err_over_bound=f"{max(worst):.1e}", seconds=round(elapsed, 2))
    assert elapsed < 60


# ---------------------------------------------------------------- 5


def test_criterion_5_gadget_chain(record_property):
    t0 = time.perf_counter()
    deltas = (0.3, 0.2, 0.1)
    x3 = single(3, (0, 1, 2), -6.0 * kron_local(X, X, X))
    tgt = sigma_triple()

    # both targets are already in normal form; the normalisation stage is the identity
    for h in (x3, tgt):
        norm = gd.normalize_3local(h)
        assert gd.is_normalized_3local(norm.compiled) and norm.verified_error < 1e-12

    tx_err, kkr_err, ratios = [], [], []
    for d in deltas:
        r = gd.triple_x_reduce(tgt, d)
        assert check_stoquastic(r.compiled, termwise=True).is_termwise_stoquastic
        assert gd.is_triple_x(r.compiled) and r.compiled.locality == 3
        tx_err.append(r.verified_error)
        se = gd.self_energy(r)
        assert np.abs(se.sigma_orders[2] - r.omega_shift * np.eye(se.low_dim)).max() <= 10 * d**4
        ratio = np.linalg.norm(se.sigma_orders[3], 2) / se.sigma_orders[4]
        ratios.append(round(float(ratio), 2))
        assert ratio >= 0.5 / d

        # the -6 XXX target needs four mediator triples; structure only (15 qubits)
        big = gd.triple_x_reduce(x3, d, verify=False)
        assert check_stoquastic(big.compiled, termwise=True).is_termwise_stoquastic
        assert gd.is_triple_x(big.compiled)

        k = gd.kkr_3to2_reduce(x3, d)
        assert check_stoquastic(k.compiled, termwise=True).is_termwise_stoquastic
        assert k.compiled.locality == 2
        kkr_err.append(k.verified_error)

    assert tx_err[0] > tx_err[1] > tx_err[2]
    assert kkr_err[0] > kkr_err[1] > kkr_err[2]
    for d, e in zip(deltas, tx_err):
        assert e == pytest.approx(TRIPLE_X_PINS[d], rel=PIN_RTOL)
    for d, e in zip(deltas, kkr_err):
        assert e == pytest.approx(KKR_PINS[d], rel=PIN_RTOL)
    elapsed = time.perf_counter() - t0
    detail(
        record_property,
        triple_x=[f"{e:.4g}" for e in tx_err],
        kkr=[f"{e:.4g}" for e in kkr_err],
        sigma3_over_sigma4=ratios,
        seconds=round(elapsed, 2),
    )
    assert elapsed < 120


# ---------------------------------------------------------------- 6


def test_criterion_6_clock(record_property):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    c_min = math.inf
    acc_lams, rej_lams = [], []
    for i in range(20):
        T = int(rng.integers(2, 6))
        circ = random_circuit(2, 1, 2, T, seed=i)
        inst = build_clock_hamiltonian(circ)
        h = inst.hamiltonian
        assert check_stoquastic(h, termwise=True).is_termwise_stoquastic
        assert h.locality <= 6
        m = acceptance_operator(circ)
        z = int(np.argmax(m))
        p_max = float(m[z])
        psi = build_history_state(circ, z)
        assert abs(expectation(inst.parts["prop"], psi)) <= 1e-10
        assert abs(expectation(inst.parts["clock"], psi)) <= 1e-10
        lam = ground_energy(h)
        eps = 1.0 - p_max
        assert lam <= eps + 1e-12
        if p_max >= 0.9:
            acc_lams.append(lam)
        if p_max < 1.0:
            c = lam * T**3 / (1.0 - p_max)
            c_min = min(c_min, c)
            if p_max <= 0.1:
                rej_lams.append(lam)
    assert acc_lams and rej_lams
    assert c_min >= CLOCK_C
    assert min(rej_lams) >= 5 * max(max(acc_lams), 0.0)
    elapsed = time.perf_counter() - t0
    detail(record_property, c_min=round(c_min, 4), accepting=len(acc_lams), seconds=round(elapsed, 2))
    assert elapsed < 120


# ---------------------------------------------------------------- 7


def _exact_scaled_trace(ens, L):
    g = [[Fraction(int(v), 2**ens.m) for v in row] for row in ens.numerators]
    dim = len(g)
    power = [[Fraction(int(i == j)) for j in range(dim)] for i in range(dim)]
    for _ in range(L):
        power = [[sum(power[i][k] * g[k][j] for k in range(dim)) for j in range(dim)] for i in range(dim)]
    tr = sum(power[i][i] for i in range(dim))
    return tr * 2 ** (ens.m * L)


def counting_sources():
    out = [
        ("tfim_norm", to_g_matrix(transverse_ising(2, 0.5, 1.0), NORM_SHIFT)),
        ("tfim_walk", to_g_matrix(transverse_ising(2, 0.5, 1.0), WALK_SHIFT, q=2.5)),
        ("rand2", to_g_matrix(random_stoquastic(2, 2, seed=5), NORM_SHIFT)),
        ("field1", to_g_matrix(single(1, (0,), -X), NORM_SHIFT)),
    ]
    rng = np.random.default_rng(3)
    a = rng.uniform(size=(4, 4))
    out.append(("dense2", DenseMatrixSource((a + a.T) / 2)))
    return out


def test_criterion_7_counting_identities(record_property):
    t0 = time.perf_counter()
    checked = 0
    for _name, src in counting_sources():
        for m in (1, 2, 3):
            ens = binary_decompose(src, m)
            ts = np.arange(2**m)
            dim = 2**ens.n
            avg = np.array([[ens.member(ts, x, y).sum() for y in range(dim)] for x in range(dim)])
            assert np.array_equal(avg, ens.numerators)
            assert np.array_equal(avg / 2**m, ens.truncated())
            for L in (2, 4, 6):
                inst = CountingInstance(ens, L, 0.5, 0.25)
                if inst.kbits > 20:
                    continue
                brute = count_omega_bruteforce(inst)
                exact = _exact_scaled_trace(ens, L)
                assert exact.denominator == 1
                assert brute == int(exact) == count_omega_trace(inst)
                checked += 1
        for p1 in (1, 2, 3):
            inst = CountingInstance.with_separation(binary_decompose(src, 2), p1, 0.5)
            assert inst.L == 2 * inst.n * p1
            assert inst.log2_large - inst.log2_small == pytest.approx(inst.n, abs=1e-12)
            assert inst.LARGE == pytest.approx(2**inst.n * inst.SMALL, rel=1e-12)
    elapsed = time.perf_counter() - t0
    detail(record_property, instances=checked, seconds=round(elapsed, 2))
    assert elapsed < 60


# ---------------------------------------------------------------- 8


def protocol_instances():
    dense = [
        CountingInstance(binary_decompose(DenseMatrixSource(0.5 * np.ones((2, 2))), 1), 8, 1.0, 0.5),
        CountingInstance(binary_decompose(DenseMatrixSource(0.5 * np.ones((4, 4))), 1), 4, 1.0, 0.5),
    ]
    sparse = [
        CountingInstance(binary_decompose(DenseMatrixSource(0.25 * np.eye(2)), 2), 8, 1.0, 0.5),
        CountingInstance(binary_decompose(DenseMatrixSource(0.25 * np.eye(4)), 2), 4, 1.0, 0.5),
    ]
    return dense, sparse


def test_criterion_8_protocol(record_property):
    t0 = time.perf_counter()
    dense, sparse = protocol_instances()
    rates = []
    for inst in dense:
        assert count_omega_trace(inst) >= inst.LARGE
        r = run_gs_protocol(inst, "honest", trials=50, seed=0, record=False)
        rates.append(("honest", r.accept_rate))
        assert r.accept_rate >= 2 / 3
    for inst in sparse:
        assert count_omega_trace(inst) <= inst.SMALL
        for prover in ("always_claim", "random_preimage"):
            r = run_gs_protocol(inst, prover, trials=50, seed=0, record=False)
            rates.append((prover, r.accept_rate))
            assert r.accept_rate <= 1 / 3
    elapsed = time.perf_counter() - t0
    detail(record_property, rates=" ".join(f"{p}:{a:.2f}" for p, a in rates), seconds=round(elapsed, 1))
    assert elapsed < 120


# ---------------------------------------------------------------- 9


def _stoq(args, out):
    cmd = [sys.executable, "-m", "stoquastic.cli", *args, "--seed", "17", "--output", str(out)]
    return subprocess.run(cmd, capture_output=True, text=True).returncode


def test_criterion_9_determinism(tmp_path, record_property):
    h = tmp_path / "h.json"
    save_hamiltonian(transverse_ising(2, 0.5, 1.0), h)
    x3 = tmp_path / "x3.json"
    save_hamiltonian(single(3, (0, 1, 2), -6.0 * kron_local(X, X, X)), x3)
    circ = tmp_path / "circ.json"
    circ.write_text(json.dumps(random_circuit(1, 1, 2, 3, seed=2).to_dict()))
    cfg = tmp_path / "walk.json"
    cfg.write_text(json.dumps({"input": str(h), "w": 2000}))
    runs = {
        "models": ["models", "--model", "ising_3d_classical", "--params", '{"lattice": [2, 2, 1], "seed": 4}'],
        "check": ["check", "--input", str(h)],
        "exact": ["exact", "--input", str(h), "--vector"],
        "walk": ["walk", "--config", str(cfg), "--samples"],
        "compare": ["compare", "--input", str(h), "--w", "2000"],
        "gadget": ["gadget", "--input", str(x3), "--stage", "kkr", "--delta", "0.2"],
        "clock": ["clock", "--circuit", str(circ), "--spectrum"],
        "amproto": ["amproto", "--input", str(h), "--mu-minus", "0.2", "--trials", "5", "--transcript"],
    }
    for name, args in runs.items():
        a, b = tmp_path / f"{name}.a.json", tmp_path / f"{name}.b.json"
        assert _stoq(args, a) == 0, name
        assert _stoq(args, b) == 0, name
        assert a.read_bytes() == b.read_bytes(), name
    detail(record_property, subcommands=len(runs))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
