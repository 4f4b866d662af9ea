import numpy as np
import pytest

from stoquastic.clock import (
    ReversibleCircuit, acceptance_operator, acceptance_probability, build_clock_hamiltonian,
    build_history_state, circuit_unitary, expectation, random_circuit,
)
from stoquastic.errors import InputError
from stoquastic.spectral import ground_energy
from stoquastic.stoquastic import check_stoquastic


def copy_circuit():
    # r=1 coin, 1 ancilla, 1 witness; wire 0 coin, 1 ancilla, 2 witness.
    # Toggle the ancilla twice: identity, output on the witness wire.
    return ReversibleCircuit(1, 1, 1, ((0, 2, 1), (0, 2, 1)), q_out=2)


def test_layout_and_run():
    c = copy_circuit()
    assert (list(c.coins), list(c.ancillas), list(c.witness_wires)) == ([0], [1], [2])
    x = c.input_state(np.array([0, 1]), "1")
    assert list(c.run(x, upto=1)) == [0b100, 0b111]
    assert list(c.run(x)) == list(x)


def test_validation():
    with pytest.raises(InputError):
        ReversibleCircuit(1, 1, 1, ((0, 0, 1),), 0)
    with pytest.raises(InputError):
        ReversibleCircuit(1, 1, 1, ((0, 1, 7),), 0)
    with pytest.raises(InputError):
        ReversibleCircuit.from_dict({"r": 1, "k_anc": 1, "s": 1, "gates": [[0, 1, 2]], "q_out": 0, "x": 1})
    with pytest.raises(InputError):
        build_clock_hamiltonian(ReversibleCircuit(1, 1, 1, ((0, 1, 2),), 0))


def test_acceptance_probability_and_operator():
    c = copy_circuit()
    assert acceptance_probability(c, "1") == 1.0
    assert acceptance_probability(c, 0) == 0.0
    assert list(acceptance_operator(c)) == [0.0, 1.0]


def test_circuit_unitary_is_permutation():
    c = random_circuit(2, 1, 2, 4, seed=5)
    u = circuit_unitary(c)
    assert np.allclose(u @ u.T, np.eye(u.shape[0]))
    x = 13
    assert np.argmax(u[:, x]) == c.run(x)


def test_json_roundtrip():
    c = random_circuit(2, 1, 2, 4, seed=1)
    assert ReversibleCircuit.from_json(__import__("json").dumps(c.to_dict())) == c


@pytest.mark.parametrize("seed", range(4))
def test_hamiltonian_properties(seed):
    c = random_circuit(1, 1, 2, 3, seed=seed)
    inst = build_clock_hamiltonian(c)
    h = inst.hamiltonian
    assert h.n == c.n + c.T and h.locality <= 6
    assert check_stoquastic(h, termwise=True).is_termwise_stoquastic
    assert inst.labels["clock"] == list(range(c.n, c.n + c.T))
    for z in range(2**c.s):
        psi = build_history_state(c, z)
        assert np.isclose(np.linalg.norm(psi), 1.0)
        assert abs(expectation(inst.parts["prop"], psi)) < 1e-10
        assert abs(expectation(inst.parts["clock"], psi)) < 1e-10
        assert abs(expectation(inst.parts["in"], psi)) < 1e-10
        # H_out weight is the rejection probability over T+1 time steps
        eps = 1 - acceptance_probability(c, z)
        assert np.isclose(expectation(inst.parts["out"], psi), eps / (c.T + 1))


def test_perfect_acceptance_has_zero_ground_energy():
    inst = build_clock_hamiltonian(copy_circuit())
    assert abs(ground_energy(inst.hamiltonian)) < 1e-10
