"""JSON encoding of Hamiltonians and results.

Floats are written with Python's shortest round-trip representation, so
``loads(dumps(h))`` reproduces every matrix entry bit for bit.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import InputError
from .hamiltonian import LocalHamiltonian, LocalTerm


def hamiltonian_to_dict(h: LocalHamiltonian) -> dict:
    terms = []
    for t in h.terms:
        entry = {"support": list(t.support), "matrix_re": t.matrix.real.tolist()}
        if np.any(t.matrix.imag != 0):
            entry["matrix_im"] = t.matrix.imag.tolist()
        terms.append(entry)
    return {"n": h.n, "k": h.k, "terms": terms}


def hamiltonian_from_dict(d: dict) -> LocalHamiltonian:
    if not isinstance(d, dict):
        raise InputError("Hamiltonian JSON must be an object")
    extra = set(d) - {"n", "k", "terms"}
    if extra:
        raise InputError(f"unknown Hamiltonian keys {sorted(extra)}")
    if "n" not in d or "terms" not in d:
        raise InputError("Hamiltonian JSON needs 'n' and 'terms'")
    terms = []
    for i, t in enumerate(d["terms"]):
        extra = set(t) - {"support", "matrix_re", "matrix_im"}
        if extra:
            raise InputError(f"term {i}: unknown keys {sorted(extra)}")
        try:
            re = np.array(t["matrix_re"], dtype=float)
        except KeyError:
            raise InputError(f"term {i} lacks matrix_re") from None
        im = np.array(t.get("matrix_im", np.zeros_like(re)), dtype=float)
        if im.shape != re.shape:
            raise InputError(f"term {i}: matrix_re and matrix_im shapes differ")
        terms.append(LocalTerm(tuple(t.get("support", ())), re + 1j * im))
    return LocalHamiltonian(int(d["n"]), tuple(terms), d.get("k"))


def _clean(obj):
    """Make ``obj`` JSON-safe: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def load_json(path: str | Path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON ({e})") from None
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from None


def load_hamiltonian(path: str | Path) -> LocalHamiltonian:
    d = load_json(path)
    # accept either a bare Hamiltonian or a CLI result that embeds one
    if isinstance(d, dict) and "result" in d and isinstance(d["result"], dict):
        for key in ("hamiltonian", "compiled"):
            if key in d["result"]:
                return hamiltonian_from_dict(d["result"][key])
    return hamiltonian_from_dict(d)


def save_hamiltonian(h: LocalHamiltonian, path: str | Path):
    Path(path).write_text(dumps(hamiltonian_to_dict(h)))
