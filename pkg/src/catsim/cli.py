"""Command-line driver: ``catsim <verb> --config cfg.json [--seed N] [--out DIR] [--threads K]``.

Verbs: simulate-gate, sweep, wigner, analytic, qec, nogo.  Every run is a pure
function of the resolved config (file fields overridden by flags), and every
emitted CSV starts with ``#`` header lines carrying the config hash and seed.
Exit codes: 0 success, 2 invalid config, 3 numerical failure or invariant
violation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, error_models, fock, gates, lindblad, nogo, tomography
from .qec import GADGETS, RepCodeParams, logical_error_rate, rates_to_csv

VERBS = ("simulate-gate", "sweep", "wigner", "analytic", "qec", "nogo")
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class InvariantViolation(RuntimeError):
    """A physical or numerical invariant failed during a run."""


# ----------------------------------------------------------------- config


def config_hash(cfg: dict) -> str:
    text = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def header(cfg: dict) -> dict:
    return {"catsim": __version__, "verb": cfg["verb"], "config_sha256": config_hash(cfg),
            "seed": cfg.get("seed")}


def load_config(path: str | None, overrides: dict) -> dict:
    cfg = {}
    if path:
        try:
            cfg = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    if cfg.get("verb") not in VERBS:
        raise ConfigError(f"verb must be one of {VERBS}")
    return cfg


def _params(d: dict | None) -> fock.CatQubitParams:
    d = dict(d or {"nbar": 4.0, "kappa1": 1e-3})
    try:
        return fock.CatQubitParams.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad cat-qubit parameters: {exc}") from exc


def _number(cfg, key, default=None, positive=True):
    v = cfg.get(key, default)
    if v is None:
        return None
    if not isinstance(v, (int, float)) or (positive and not v > 0):
        raise ConfigError(f"{key} must be a positive number")
    return float(v)


def build_schedule(cfg: dict, params: fock.CatQubitParams, T: float | None = None):
    gate = cfg.get("gate", "cnot").lower()
    T = T if T is not None else _number(cfg, "T", 1.0)
    dim = cfg.get("dim")
    kw = {"dim": dim}
    if gate == "idle":
        return gates.idle_schedule(params, T, **kw)
    if gate == "x":
        return gates.x_gate_schedule(params, T, feedforward=cfg.get("feedforward", True), **kw)
    if gate == "z":
        return gates.z_rotation_schedule(params, cfg.get("theta", math.pi),
                                         _number(cfg, "epsilon", 0.05), **kw)
    if gate == "cnot":
        return gates.cnot_schedule(params, params, T, feedforward=cfg.get("feedforward", True),
                                   phase_compensation=cfg.get("phase_compensation", "frame"), **kw)
    if gate == "toffoli":
        return gates.toffoli_schedule(params, params, params, T,
                                      feedforward=cfg.get("feedforward", True),
                                      phase_compensation=cfg.get("phase_compensation", "frame"),
                                      **kw)
    if gate == "cz":
        return gates.cz_theta_schedule(params, params, cfg.get("theta", math.pi / 2),
                                       _number(cfg, "epsilon", 0.05), **kw)
    raise ConfigError(f"unknown gate {gate!r}")


# ---------------------------------------------------------------- writing


def write_csv(path: Path, hdr: dict, columns: list, rows: list) -> None:
    lines = [f"# {k}: {v}" for k, v in hdr.items()]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_json(path: Path, hdr: dict, payload: dict) -> None:
    doc = {"header": hdr, **payload}
    path.write_text(json.dumps(doc, sort_keys=True, indent=1, default=_json_default) + "\n",
                    encoding="utf-8")


def _json_default(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj)}")


# ------------------------------------------------------------------ verbs


def _tomography_row(report, T, params, gate):
    row = {"T": T, "nbar": params.nbar, "fidelity": report.gate_fidelity,
           "max_leakage": max(report.leakage.values()), "flagged": report.flagged}
    row.update({k: float(v) for k, v in sorted(report.probabilities.items())})
    if report.m == 2:
        coh = report.coherence("IZ", "ZZ")
        row["coh_Z2_Z1Z2_re"] = coh.real
        row["coh_Z2_Z1Z2_im"] = coh.imag
        if gate == "cnot" and params.kappa1 > 0:
            b = error_models.cnot_error_budget(params, T)
            row.update({"model_p_Z1": b.p_Z1, "model_p_Z2": b.p_Z2, "model_p_Z1Z2": b.p_Z1Z2,
                        "model_coh_im": b.coherences["Z2,Z1Z2"].imag})
    return row


def run_simulate_gate(cfg, out: Path) -> int:
    params = _params(cfg.get("params"))
    sched = build_schedule(cfg, params)
    report = tomography.process_tomography(sched, dt=cfg.get("dt"))
    hdr = header(cfg)
    report.chi_err.to_csv(out / "chi_err.csv", hdr)
    report.chi.to_csv(out / "chi.csv", hdr)
    write_json(out / "report.json", hdr, {"report": report.to_dict()})
    print(json.dumps({"fidelity": report.gate_fidelity, "probabilities": report.probabilities,
                      "flagged": report.flagged}, sort_keys=True))
    if report.flagged:
        raise InvariantViolation("leakage or fidelity check flagged the report")
    return 0


def run_sweep(cfg, out: Path, threads: int = 1) -> int:
    sweep = cfg.get("sweep") or {}
    axis = sweep.get("axis", "T")
    values = sweep.get("values", [])
    if axis not in ("T", "nbar"):
        raise ConfigError("sweep axis must be 'T' or 'nbar'")
    if not values:
        raise ConfigError("sweep grid is empty")
    if any(not isinstance(v, (int, float)) or v <= 0 for v in values):
        raise ConfigError("sweep values must be positive numbers")
    base = dict(cfg.get("params") or {"nbar": 4.0, "kappa1": 1e-3})
    gate = cfg.get("gate", "cnot").lower()

    def point(v):
        p = dict(base)
        T = None
        if axis == "T":
            T = float(v)
        else:
            p.pop("alpha", None)
            p["nbar"] = float(v)
        params = _params(p)
        T = T if T is not None else _number(cfg, "T", 1.0)
        sched = build_schedule(cfg, params, T)
        report = tomography.process_tomography(sched, dt=cfg.get("dt"))
        row = _tomography_row(report, T, params, gate)
        row[axis] = float(v)  # report the requested grid value, not the round-tripped one
        return row

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(point, values))
    else:
        rows = [point(v) for v in values]
    columns = list(rows[0])
    hdr = header(cfg)
    write_csv(out / "sweep.csv", hdr, columns, rows)
    if cfg.get("plot"):
        _plot_sweep(out / "sweep.svg", rows, axis)
    return 0


def run_wigner(cfg, out: Path) -> int:
    w = cfg.get("wigner") or {}
    params = _params(cfg.get("params"))
    frames = int(w.get("frames", 4))
    if frames < 1:
        raise ConfigError("frames must be >= 1")
    lo, hi = w.get("range", [-4.0, 4.0])
    step = float(w.get("step", 0.1))
    if not step > 0 or not hi > lo:
        raise ConfigError("invalid Wigner grid")
    sched = build_schedule(cfg, params)
    space = sched.dims[0]
    initial = w.get("initial", "0")
    plus, minus = fock.cat_state(params.alpha, "even", space), fock.cat_state(params.alpha, "odd", space)
    states = {"0": (plus + minus) / math.sqrt(2), "1": (plus - minus) / math.sqrt(2), "+": plus,
              "-": minus, "vacuum": fock.basis(space, 0)}
    if initial not in states:
        raise ConfigError(f"initial state must be one of {sorted(states)}")
    if len(sched.dims) != 1:
        raise ConfigError("wigner frames need a single-mode gate")
    res = lindblad.evolve(states[initial], sched, dt=cfg.get("dt"), snapshots=frames)
    hdr = header(cfg)
    xs = fock.grid_axis(lo, hi, step)
    for k, (t, rho) in enumerate(res.trajectory):
        W = fock.wigner(rho, xs, xs)
        fock.write_grid_csv(out / f"wigner_{k:03d}.csv", W, xs, xs, {**hdr, "t": repr(t)})
        if cfg.get("plot"):
            _plot_wigner(out / f"wigner_{k:03d}.svg", W, xs, t)
    return 0


def analytic_rows(params: fock.CatQubitParams) -> list:
    rows = []
    T_star = error_models.optimal_gate_time(params)
    for gate in ("cnot", "toffoli"):
        F = error_models.predicted_fidelity(gate, params)
        budget = (error_models.cnot_error_budget if gate == "cnot"
                  else error_models.toffoli_error_budget)(params, T_star)
        row = {"gate": gate, "nbar": params.nbar, "kappa1_over_kappa2": params.kappa1 / params.kappa2,
               "T_star": T_star, "fidelity": F, "fidelity_percent": f"{100 * F:.1f}",
               "total_phase_error": budget.total}
        row.update({k: v for k, v in budget.probabilities().items()})
        rows.append(row)
    return rows


def run_analytic(cfg, out: Path) -> int:
    params = _params(cfg.get("params") or {"nbar": 7.0, "kappa1": 1e-3})
    if params.kappa1 <= 0:
        raise ConfigError("analytic tables need kappa1 > 0")
    rows = analytic_rows(params)
    write_csv(out / "analytic.csv", header(cfg), list(rows[0]), rows)
    for r in rows:
        print(f"{r['gate']}: T*={r['T_star']:.4f} F={r['fidelity_percent']}%")
    return 0


def _rep_params(cfg) -> RepCodeParams:
    q = dict(cfg.get("qec") or {})
    q.pop("gadgets", None)
    q.pop("gadget", None)
    q.pop("shots", None)
    q.pop("decoder", None)
    source = q.pop("from_cat_params", None)
    try:
        if source:
            params = _params(source)
            return RepCodeParams.from_cat_params(q.pop("n", 3), q.pop("r", 1), params,
                                                 T=q.pop("T", None), **q)
        return RepCodeParams(**q)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad repetition-code parameters: {exc}") from exc


def run_qec(cfg, out: Path, threads: int = 1) -> int:
    if "seed" not in cfg or cfg["seed"] is None:
        raise ConfigError("qec runs need a master seed")
    q = cfg.get("qec") or {}
    gadgets = q.get("gadgets") or [q.get("gadget", "memory")]
    unknown = [g for g in gadgets if g not in GADGETS]
    if unknown:
        raise ConfigError(f"unknown gadgets {unknown}")
    shots = q.get("shots", 10000)
    if not isinstance(shots, int) or shots < 1:
        raise ConfigError("shots must be a positive integer")
    rp = _rep_params(cfg)
    rates = [logical_error_rate(g, rp, shots, int(cfg["seed"]), decoder=q.get("decoder", "mwpm"),
                                threads=threads) for g in gadgets]
    hdr = header(cfg)
    text = rates_to_csv(rates)
    (out / "qec.csv").write_text("".join(f"# {k}: {v}\n" for k, v in hdr.items()) + text,
                                 encoding="utf-8")
    write_json(out / "qec.json", hdr, {"params": rp.to_dict(), "rates": [r.to_dict() for r in rates]})
    return 0


def run_nogo(cfg, out: Path) -> int:
    rep = nogo.verification_report(cfg.get("samples", 100), int(cfg.get("seed") or 0))
    write_json(out / "nogo.json", header(cfg), {"report": rep})
    print(json.dumps(rep, sort_keys=True, default=_json_default))
    if rep["commutant_dimension"] != 4 or rep["cnot_in_identity_component"]:
        raise InvariantViolation("no-go verification failed")
    return 0


# ------------------------------------------------------------------ plots


def _plot_sweep(path, rows, axis):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.5))
    xs = [r["T" if axis == "T" else "nbar"] for r in rows]
    for key in ("p_Z1", "p_Z2", "p_Z1Z2", "p_X_type"):
        if key in rows[0]:
            ax.semilogy(xs, [max(r[key], 1e-16) for r in rows], "o-", label=key)
    ax.set_xlabel(axis)
    ax.legend()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _plot_wigner(path, W, xs, t):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(4, 4))
    lim = np.abs(W).max()
    ax.imshow(W, origin="lower", extent=(xs[0], xs[-1], xs[0], xs[-1]), cmap="RdBu_r",
              vmin=-lim, vmax=lim)
    ax.set_title(f"t = {t:.3g}")
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# ------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="catsim", description="Cat-qubit gate and QEC experiments")
    p.add_argument("verb", choices=VERBS)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--plot", action="store_true", help="also write SVG figures")
    return p


def run(cfg: dict, out: Path, threads: int = 1) -> int:
    out.mkdir(parents=True, exist_ok=True)
    verb = cfg["verb"]
    if verb == "simulate-gate":
        return run_simulate_gate(cfg, out)
    if verb == "sweep":
        return run_sweep(cfg, out, threads)
    if verb == "wigner":
        return run_wigner(cfg, out)
    if verb == "analytic":
        return run_analytic(cfg, out)
    if verb == "qec":
        return run_qec(cfg, out, threads)
    return run_nogo(cfg, out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, {"verb": args.verb, "seed": args.seed,
                                        "plot": True if args.plot else None})
        return run(cfg, Path(args.out), args.threads)
    except (ConfigError, fock.TruncationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (lindblad.IntegrationError, tomography.TomographyError,
            error_models.ModelValidityError, InvariantViolation, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
