"""Command-line entry point: ``stoq <subcommand> [--config FILE] [flags]``.

Every run writes one JSON document holding the resolved configuration and the
result.  Exit status is 0 on success, 2 for invalid input, precondition or
promise failures (with an ``error`` object), and 1 for anything unexpected.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import platform
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from . import io as sio
from .errors import ConvergenceError, PostSelectionError, StoquasticError
from .gmatrix import MODES, NORM_SHIFT, WALK_SHIFT, to_g_matrix
from .hamiltonian import LocalHamiltonian
from .models import MODELS, model_builder
from .spectral import PROMISE_VIOLATED, decide_lhmin, diagonalize_dense, gap_r, walk_ratio
from .stoquastic import check_stoquastic

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USER = 2


def _json_arg(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise argparse.ArgumentTypeError(f"not JSON: {e}") from None


# name -> (type, default, help, choices); None default means "not set"
COMMON = {
    "config": (str, None, "JSON file with parameters for this subcommand", None),
    "output": (str, None, "write the result JSON here instead of stdout", None),
    "metadata": (str, None, "write run metadata (timestamps, versions) to this file", None),
    "seed": (int, 0, "root seed for every random stream", None),
}

PARAMS = {
    "models": {
        "model": (str, "transverse_ising", "model name", sorted(MODELS)),
        "params": (_json_arg, {}, "model parameters as a JSON object", None),
    },
    "check": {
        "input": (str, None, "Hamiltonian JSON file", None),
        "termwise": (bool, False, "only scan local terms", None),
    },
    "exact": {
        "input": (str, None, "Hamiltonian JSON file", None),
        "mode": (str, NORM_SHIFT, "G scaling for the reported mu(G)", list(MODES)),
        "q": (float, None, "explicit G scale (overrides mode)", None),
        "delta": (float, None, "decide lambda <= 0 versus lambda >= delta", None),
        "shift": (float, 0.0, "subtract shift*I before solving (gadget outputs)", None),
        "vector": (bool, False, "include the ground vector", None),
    },
    "walk": {
        "input": (str, None, "Hamiltonian JSON file", None),
        "L": (int, None, "walk length (default: from r_gap)", None),
        "w": (int, None, "number of surviving walks (default: from c)", None),
        "c": (float, 1.0, "walk-count exponent for the automatic w", None),
        "r_gap": (float, None, "1/log2(mu0/mu1); computed densely when omitted", None),
        "q": (float, None, "walk scale q (default: row bound of H)", None),
        "max_restarts": (int, 1_000_000, "restart budget per walk slot", None),
        "engine": (str, "compiled", "walk engine", ["compiled", "numpy"]),
        "samples": (bool, False, "include final states", None),
    },
    "compare": {
        "input": (str, None, "Hamiltonian JSON file", None),
        "L": (int, None, "walk length", None),
        "w": (int, None, "number of surviving walks", None),
        "c": (float, 1.0, "walk-count exponent", None),
        "r_gap": (float, None, "gap ratio", None),
        "q": (float, None, "walk scale q", None),
        "max_restarts": (int, 1_000_000, "restart budget per walk slot", None),
        "tolerance": (float, 0.02, "allowed |mu_est - mu(G)|", None),
    },
    "gadget": {
        "input": (str, None, "target Hamiltonian JSON file", None),
        "stage": (str, "full", "reduction to apply", ["subdivide", "normalize", "triplex", "kkr", "full"]),
        "delta": (float, 0.15, "triple-X / KKR precision parameter", None),
        "kkr_delta": (float, None, "KKR delta in the full chain (default: delta)", None),
        "Delta": (float, None, "subdivision gap (default: ratio x interaction scale)", None),
        "ratio": (float, 1e3, "gap-to-interaction ratio for automatic subdivision gaps", None),
        "verify": (bool, True, "dense check of the ground energy when small enough", None),
    },
    "clock": {
        "circuit": (str, None, "circuit JSON file {r, k_anc, s, q_out, gates}", None),
        "spectrum": (bool, False, "also report lambda(H) (dense, small instances)", None),
    },
    "amproto": {
        "input": (str, None, "Hamiltonian JSON file", None),
        "mode": (str, NORM_SHIFT, "G scaling", list(MODES)),
        "q": (float, None, "explicit G scale", None),
        "L": (int, None, "even trace power (default: smallest L separating LARGE from SMALL by 2^n)", None),
        "p1": (int, None, "use L = 2 n p1 and mu_minus = mu_plus 2^(-1/p1)", None),
        "m": (int, 2, "binary digits per element", None),
        "mu_plus": (float, 0.5, "upper threshold", None),
        "mu_minus": (float, None, "lower threshold (default from p2)", None),
        "p2": (float, None, "promise gap polynomial value for the default mu_minus", None),
        "prover": (str, "honest", "prover strategy", ["honest", "always_claim", "random_preimage"]),
        "trials": (int, 50, "independent protocol runs", None),
        "samples": (int, 200, "challenges per run", None),
        "transcript": (bool, False, "include the replayable transcript", None),
    },
}

REQUIRED = {
    "check": ["input"],
    "exact": ["input"],
    "walk": ["input"],
    "compare": ["input"],
    "gadget": ["input"],
    "clock": ["circuit"],
    "amproto": ["input"],
}


def _add_flag(p, name, spec):
    typ, _default, help_, choices = spec
    flag = "--" + name.replace("_", "-")
    if typ is bool:
        p.add_argument(flag, dest=name, action=argparse.BooleanOptionalAction, default=argparse.SUPPRESS, help=help_)
    else:
        p.add_argument(flag, dest=name, type=typ, choices=choices, default=argparse.SUPPRESS, help=help_)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stoq", description="Stoquastic Hamiltonian toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, params in PARAMS.items():
        p = sub.add_parser(cmd)
        for name, spec in {**COMMON, **params}.items():
            _add_flag(p, name, spec)
    return parser


def resolve_config(command: str, flags: dict) -> dict:
    """Defaults, then the config file, then explicit flags."""
    params = PARAMS[command]
    allowed = set(params) | {"seed", "output"}
    cfg = {name: spec[1] for name, spec in params.items()}
    cfg["seed"] = COMMON["seed"][1]
    path = flags.get("config")
    if path:
        data = sio.load_json(path)
        if not isinstance(data, dict):
            raise _UserError("InputError", "config file must hold a JSON object")
        unknown = sorted(set(data) - allowed - {"command"})
        if unknown:
            raise _UserError("InputError", f"unknown config keys for {command!r}: {unknown}")
        if data.get("command", command) != command:
            raise _UserError("InputError", f"config is for {data['command']!r}, not {command!r}")
        for k, v in data.items():
            if k in params:
                choices = params[k][3]
                if choices is not None and v not in choices:
                    raise _UserError("InputError", f"{k}={v!r} not in {choices}")
            cfg[k] = v
    for k, v in flags.items():
        if k in ("config", "metadata"):
            continue
        cfg[k] = v
    for k in REQUIRED.get(command, []):
        if cfg.get(k) is None:
            raise _UserError("InputError", f"{command} needs --{k.replace('_', '-')}")
    cfg.pop("output", None)
    return cfg


class _UserError(Exception):
    def __init__(self, kind, message, details=None):
        super().__init__(message)
        self.kind = kind
        self.details = details


# ---------------------------------------------------------------- subcommands


def _ham(cfg) -> LocalHamiltonian:
    return sio.load_hamiltonian(cfg["input"])


def cmd_models(cfg):
    params = cfg["params"]
    if not isinstance(params, dict):
        raise _UserError("InputError", "params must be a JSON object")
    h = model_builder(cfg["model"], **params)
    return {"hamiltonian": sio.hamiltonian_to_dict(h), "n": h.n, "n_terms": len(h.terms)}


def cmd_check(cfg):
    h = _ham(cfg)
    return check_stoquastic(h, termwise=cfg["termwise"]).to_dict()


def _g_for(h, cfg):
    if cfg.get("q") is not None:
        return to_g_matrix(h, cfg.get("mode", WALK_SHIFT), q=cfg["q"], check=False)
    return to_g_matrix(h, cfg.get("mode", NORM_SHIFT), check=False)


def cmd_exact(cfg):
    h = _ham(cfg)
    if cfg["shift"]:
        h = h.with_constant(-cfg["shift"])
    summary = diagonalize_dense(h)
    out = summary.to_dict()
    if not cfg["vector"]:
        for k in ("ground_vector", "ground_vector_re", "ground_vector_im"):
            out.pop(k, None)
    report = check_stoquastic(h, termwise=True)
    if report.is_stoquastic:
        g = _g_for(h, cfg)
        out["g_scale"] = g.scale
        out["mu"] = 0.5 * (1.0 - summary.lambda0 / g.scale)
    if cfg["delta"] is not None:
        decision = decide_lhmin(h, cfg["delta"])
        out["decision"] = decision
        if decision == PROMISE_VIOLATED:
            raise _UserError("PromiseViolation", "ground energy lies inside the promise gap", out)
    return out


def _walk_setup(h, cfg):
    from .walk import WalkParams

    q = cfg["q"] if cfg["q"] is not None else h.row_abs_bound
    g = to_g_matrix(h, WALK_SHIFT, q=q)
    r_gap = cfg["r_gap"]
    if r_gap is None and (cfg["L"] is None):
        r_gap = gap_r(g)
    auto = WalkParams.auto(h.n, r_gap if r_gap is not None else 1.0, cfg["c"], cfg["seed"], cfg["max_restarts"])
    L = cfg["L"] if cfg["L"] is not None else auto.L
    w = cfg["w"] if cfg["w"] is not None else auto.w
    return g, WalkParams(L, w, cfg["seed"], cfg["max_restarts"], r_gap)


def cmd_walk(cfg):
    from .walk import run_postselected

    h = _ham(cfg)
    g, params = _walk_setup(h, cfg)
    out = run_postselected(g, params, engine=cfg["engine"]).to_dict()
    if not cfg["samples"]:
        out.pop("samples")
    out["q"] = g.scale
    return out


def cmd_compare(cfg):
    from .spectral import dense_mu, survival_probability
    from .walk import run_postselected

    h = _ham(cfg)
    g, params = _walk_setup(h, cfg)
    outcome = run_postselected(g, params)
    mu = dense_mu(g)
    diff = abs(outcome.mu_est - mu)
    return {
        "walk": {k: v for k, v in outcome.to_dict().items() if k != "samples"},
        "exact": {"mu": mu, "walk_ratio": walk_ratio(g, params.L), "survival": survival_probability(g, params.L)},
        "q": g.scale,
        "abs_difference": diff,
        "tolerance": cfg["tolerance"],
        "within_tolerance": bool(diff <= cfg["tolerance"]),
    }


def cmd_gadget(cfg):
    from . import gadgets as gd
    from .spectral import ground_energy

    h = _ham(cfg)
    stage = cfg["stage"]
    verify = cfg["verify"]
    if stage == "subdivide":
        Delta = cfg["Delta"]
        if Delta is None:
            dec = gd.decompose_target(h, split_diagonal=True, min_size=3)
            Delta = cfg["ratio"] * gd._perturbation_scale(dec)
        res = gd.subdivision_reduce(h, Delta, verify=verify)
    elif stage == "normalize":
        res = gd.normalize_3local(h, cfg["ratio"], verify=verify)
    elif stage == "triplex":
        res = gd.triple_x_reduce(h, cfg["delta"], verify=verify)
    elif stage == "kkr":
        res = gd.kkr_3to2_reduce(h, cfg["delta"], verify=verify)
    else:
        res = gd.compile_chain(
            h, cfg["delta"], kkr_delta=cfg["kkr_delta"], Delta=cfg["Delta"], ratio=cfg["ratio"], verify=verify
        )
    out = res.to_dict()
    out["compiled"] = sio.hamiltonian_to_dict(res.compiled)
    out["termwise_stoquastic"] = check_stoquastic(res.compiled, termwise=True).is_termwise_stoquastic
    if verify and res.verified_error is not None:
        out["lambda_target"] = ground_energy(res.target)
        out["lambda_compiled"] = ground_energy(res.compiled)
        out["lambda_compiled_shifted"] = out["lambda_compiled"] - res.omega_shift
    return out


def cmd_clock(cfg):
    from .clock import ReversibleCircuit, acceptance_operator, build_clock_hamiltonian
    from .spectral import ground_energy

    circuit = ReversibleCircuit.from_dict(sio.load_json(cfg["circuit"]))
    inst = build_clock_hamiltonian(circuit)
    out = inst.to_dict()
    out["hamiltonian"] = sio.hamiltonian_to_dict(inst.hamiltonian)
    out["stoquastic"] = check_stoquastic(inst.hamiltonian, termwise=True).is_termwise_stoquastic
    out["locality"] = inst.hamiltonian.locality
    if circuit.s <= 12 and circuit.r <= 20:
        m = acceptance_operator(circuit)
        out["acceptance_operator"] = m.tolist()
        out["max_acceptance"] = float(m.max())
    if cfg["spectrum"]:
        out["lambda0"] = ground_energy(inst.hamiltonian)
    return out


def cmd_amproto(cfg):
    from .counting import CountingInstance, binary_decompose, count_omega_trace, run_gs_protocol

    h = _ham(cfg)
    g = _g_for(h, cfg)
    ens = binary_decompose(g, cfg["m"])
    if cfg["p1"] is not None:
        inst = CountingInstance.with_separation(ens, cfg["p1"], cfg["mu_plus"])
    else:
        mu_minus = cfg["mu_minus"]
        if mu_minus is None:
            if cfg["p2"] is None:
                raise _UserError("InputError", "amproto needs --mu-minus, --p2 or --p1")
            mu_minus = 0.5 * (1.0 - 1.0 / (g.scale * cfg["p2"]))
        L = cfg["L"]
        if L is None:
            if not 0 < mu_minus < cfg["mu_plus"]:
                raise _UserError("InputError", "thresholds must satisfy 0 < mu_minus < mu_plus")
            L = 2 * math.ceil(h.n / math.log2(cfg["mu_plus"] / mu_minus))
        inst = CountingInstance(ens, L, cfg["mu_plus"], mu_minus)
    res = run_gs_protocol(inst, cfg["prover"], cfg["trials"], cfg["seed"], cfg["samples"], record=cfg["transcript"])
    out = res.to_dict(with_transcripts=cfg["transcript"])
    out["instance"] = inst.to_dict()
    out["omega_size"] = count_omega_trace(inst)
    out["g_scale"] = g.scale
    return out


COMMANDS = {
    "models": cmd_models,
    "check": cmd_check,
    "exact": cmd_exact,
    "walk": cmd_walk,
    "compare": cmd_compare,
    "gadget": cmd_gadget,
    "clock": cmd_clock,
    "amproto": cmd_amproto,
}


def dispatch(command: str, cfg: dict) -> tuple[int, dict]:
    """Run one subcommand on a resolved config; returns ``(exit status, document)``."""
    doc = {"command": command, "config": cfg}
    try:
        doc["result"] = COMMANDS[command](cfg)
        return EXIT_OK, doc
    except _UserError as e:
        doc["error"] = {"type": e.kind, "message": str(e), "details": e.details}
        return EXIT_USER, doc
    except (StoquasticError, ValueError) as e:
        # ConvergenceError and PostSelectionError are numerical outcomes, not bad input
        if isinstance(e, ConvergenceError):
            doc["error"] = {"type": type(e).__name__, "message": str(e)}
            return EXIT_INTERNAL, doc
        details = None
        if isinstance(e, PostSelectionError):
            details = {"success_rate": e.success_rate}
        report = getattr(e, "report", None)
        if report is not None:
            details = report.to_dict()
        doc["error"] = {"type": type(e).__name__, "message": str(e), "details": details}
        return EXIT_USER, doc


def _metadata(argv) -> dict:
    return {
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "argv": list(argv),
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k != "command"}
    command = args.command
    output = flags.get("output")
    try:
        try:
            cfg = resolve_config(command, flags)
        except (_UserError, StoquasticError) as e:
            kind = getattr(e, "kind", type(e).__name__)
            status, doc = EXIT_USER, {"command": command, "config": flags, "error": {"type": kind, "message": str(e)}}
        else:
            status, doc = dispatch(command, cfg)
    except Exception as e:  # noqa: BLE001 - last-resort reporting
        status = EXIT_INTERNAL
        doc = {"command": command, "error": {"type": type(e).__name__, "message": str(e), "traceback": traceback.format_exc()}}
    text = sio.dumps(doc)
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)
    if flags.get("metadata"):
        Path(flags["metadata"]).write_text(sio.dumps({**_metadata(argv), "exit_status": status}))
    return status


if __name__ == "__main__":
    sys.exit(main())
