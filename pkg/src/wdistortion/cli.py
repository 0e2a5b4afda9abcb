"""Command-line front end.

Exit codes: 0 success, 1 invalid input or usage, 2 a checked property or
region assertion failed. Every text output starts with a ``# config:`` line
holding the fully resolved configuration and a ``# generated:`` timestamp
line; feeding the output file back through ``--config`` reproduces it.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .coding import (
    EncodedMessage,
    MalformedMessageError,
    PermutationSchemeConfig,
    SourceSpec,
    independent_realization,
    permutation_decode,
    permutation_encode,
    permutation_rate,
    sample_source,
)
from .distortion import SymbolSequence, distortion_profile
from .experiments import (
    NPolicy,
    RegionAssertionError,
    RegionPoint,
    Scheme,
    SweepResult,
    SweepRow,
    fidelity_limit_experiment,
    fit_exponent,
    realism_limit_experiment,
    region_report,
    run_sweep,
    scheme_point,
)
from .pooling import DEFAULT_TOL, PoolingPmf, check_axioms, check_family_limits, load_table_json, truncation_radius
from .transport import CostMatrix, sandwich_bounds, w2sq_exact

CONFIG_PREFIX = "# config: "
STAMP_PREFIX = "# generated: "


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# ----------------------------------------------------------------- config io


def load_config(path: str | Path | None) -> dict:
    """Read a JSON or TOML config, or the ``# config:`` header of a previous output."""
    if path is None:
        return {}
    p = Path(path)
    text = p.read_text()
    for line in text.splitlines():
        if line.startswith(CONFIG_PREFIX):
            return json.loads(line[len(CONFIG_PREFIX):])
    if p.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        return tomllib.loads(text)
    data = json.loads(text)
    # JSON outputs of this tool carry their config under a key
    if isinstance(data, dict) and isinstance(data.get("config"), dict) and "generated" in data:
        return data["config"]
    return data


def _cost(cfg: dict, A: int) -> CostMatrix:
    c = cfg.get("cost", 1.0)
    if isinstance(c, (int, float)):
        return CostMatrix.uniform(A, float(c))
    return CostMatrix(c)


def _stamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _header(config: dict) -> str:
    return f"{CONFIG_PREFIX}{json.dumps(config, sort_keys=True)}\n{STAMP_PREFIX}{_stamp()}\n"


def _emit(args, text: str):
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_json(args, config: dict, payload: dict):
    doc = {"config": config, "generated": _stamp(), **payload}
    _emit(args, json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _read_symbols(path) -> np.ndarray:
    text = Path(path).read_text()
    try:
        return np.array([int(t) for t in text.split()], dtype=np.int64)
    except ValueError as exc:
        raise ValueError(f"{path}: symbols must be whitespace-separated integers") from exc


def _pick(args, cfg: dict, name: str, default=None):
    v = getattr(args, name, None)
    return v if v is not None else cfg.get(name, default)


# -------------------------------------------------------------- subcommands


def cmd_transport(args) -> int:
    inst = load_config(args.instance)
    A = int(inst["A"])
    d = _cost(inst, A)
    lower, value, upper = sandwich_bounds(inst["mu"], inst["nu"], d)
    _, plan = w2sq_exact(inst["mu"], inst["nu"], d)
    out = {"value": value, "plan": plan.mass.tolist(), "lower": lower, "upper": upper}
    _emit(args, json.dumps(out, indent=2) + "\n")
    return 0


def cmd_distortion(args) -> int:
    cfg = load_config(args.config)
    sigma = float(_pick(args, cfg, "sigma"))
    A = int(_pick(args, cfg, "A"))
    tol = float(_pick(args, cfg, "tol", DEFAULT_TOL))
    q = PoolingPmf.geometric(sigma)
    guard = int(_pick(args, cfg, "guard", truncation_radius(q, tol)))
    x, xh = _read_symbols(args.x), _read_symbols(args.xhat)
    if x.size != xh.size:
        raise ValueError(f"sequence lengths differ: {x.size} vs {xh.size}")
    d = _cost(cfg, A)
    X, Xh = SymbolSequence.from_array(x, guard, A), SymbolSequence.from_array(xh, guard, A)
    prof = distortion_profile(X, Xh, q, d, tol)
    config = {"sigma": sigma, "A": A, "cost": d.entries.tolist(), "tol": tol, "guard": guard}
    block = math.fsum(prof) / prof.size
    if args.format == "json":
        _emit_json(args, config, {"D": prof.tolist(), "block_average": block})
        return 0
    lines = [_header(config), "n,D_n\n"]
    lines += [f"{n},{v!r}\n" for n, v in zip(range(-X.N, X.N + 1), prof.tolist())]
    lines.append(f"# block_average: {block!r}\n")
    _emit(args, "".join(lines))
    return 0


def cmd_encode(args) -> int:
    x = _read_symbols(args.input)
    if x.size and (x.min() < 1 or x.max() > args.A):
        raise ValueError(f"symbols must lie in 1..{args.A}")
    cfg = PermutationSchemeConfig(args.k, args.C)
    data = permutation_encode(x, cfg, args.A).to_bytes()
    if args.output:
        Path(args.output).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
    return 0


def cmd_decode(args) -> int:
    raw = Path(args.message).read_bytes()
    msg = EncodedMessage.from_bytes(raw, args.block_length, args.C)
    cfg = PermutationSchemeConfig(msg.k, args.C)
    xh = permutation_decode(msg, cfg, args.seed)
    _emit(args, " ".join(map(str, xh.tolist())) + "\n")
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    pmf = _pick(args, cfg, "pmf")
    if pmf is None:
        raise ValueError("simulate needs a pmf (--pmf or config)")
    spec = SourceSpec(pmf)
    scheme = Scheme(_pick(args, cfg, "scheme", "permutation"))
    length = int(_pick(args, cfg, "length", 1001))
    seed = int(_pick(args, cfg, "seed", 0))
    k = int(_pick(args, cfg, "k", 1))
    C = int(_pick(args, cfg, "C", 0))
    config = {"scheme": scheme.value, "pmf": spec.pmf.tolist(), "length": length, "seed": seed}
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    x = sample_source(spec, length, rng)
    if scheme is Scheme.PERMUTATION:
        pcfg = PermutationSchemeConfig(k, C)
        msg = permutation_encode(x, pcfg, spec.A)
        xh = permutation_decode(msg, pcfg, rng)
        config.update(k=k, C=C)
        bits, rate = msg.bit_length, permutation_rate(spec.A, k, length, C)
    else:
        xh = independent_realization(spec, x, rng)
        bits, rate = 0, 0.0
    payload = {"bits": bits, "rate": rate, "x": x.tolist(), "xhat": xh.tolist()}
    _emit_json(args, config, payload)
    return 0


def _sweep_config(args, cfg: dict) -> dict:
    scheme = _pick(args, cfg, "scheme")
    if scheme is None:
        raise ValueError("sweep needs a scheme (--scheme or config)")
    pmf = cfg.get("pmf")
    if args.pmf is not None:
        pmf = args.pmf
    if pmf is None:
        raise ValueError("sweep needs a pmf")
    A = int(cfg.get("A", len(pmf)))
    if A != len(pmf):
        raise ValueError(f"A={A} does not match pmf of length {len(pmf)}")
    grid = args.sigma_grid if args.sigma_grid is not None else cfg.get("sigma_grid", [2.0**e for e in range(4, 13)])
    pol = cfg.get("N_policy") or {}
    return {
        "scheme": Scheme(scheme).value,
        "A": A,
        "pmf": [float(v) for v in pmf],
        "cost": _cost(cfg, A).entries.tolist(),
        "sigma_grid": [float(s) for s in grid],
        "gamma": float(_pick(args, cfg, "gamma", 0.5)),
        "trials": int(_pick(args, cfg, "trials", 200)),
        "seed": int(_pick(args, cfg, "seed", 0)),
        "N": _pick(args, cfg, "N"),
        "N_policy": {"min_windows": int(pol.get("min_windows", 64)),
                     "sigma_multiple": float(pol.get("sigma_multiple", 16.0))},
        "tol": float(_pick(args, cfg, "tol", DEFAULT_TOL)),
        "C": int(_pick(args, cfg, "C", 0)),
        "k": _pick(args, cfg, "k"),
    }


def _run_config(config: dict, workers: int) -> SweepResult:
    return run_sweep(
        config["scheme"],
        SourceSpec(config["pmf"]),
        CostMatrix(config["cost"]),
        config["sigma_grid"],
        gamma=config["gamma"],
        trials=config["trials"],
        master_seed=config["seed"],
        N=config["N"],
        n_policy=NPolicy(**config["N_policy"]),
        tol=config["tol"],
        workers=workers,
        C=config["C"],
        k=config["k"],
    )


def _fits(result: SweepResult) -> dict:
    out = {}
    for col in ("distortion", "rate"):
        if col == "rate" and result.scheme is Scheme.INDEPENDENT:
            continue
        try:
            f = fit_exponent(result, col)
            out[col] = {"slope": f.slope, "intercept": f.intercept, "r_squared": f.r_squared}
        except ValueError as exc:
            out[col] = {"error": str(exc)}
    return out


def cmd_sweep(args) -> int:
    config = _sweep_config(args, load_config(args.config))
    result = _run_config(config, args.workers)
    if args.format == "csv":
        _emit(args, _header(config) + result.to_csv())
        return 0
    payload = {"rows": [asdict(r) for r in result.rows], "fits": _fits(result)}
    status = 0
    try:
        pt = scheme_point(result)
        rep = region_report([pt])
        payload["region"] = rep.to_dict()
    except RegionAssertionError as exc:
        payload["region"] = {"failures": [str(exc)]}
        status = 2
    except ValueError as exc:
        payload["region"] = {"error": str(exc)}
    _emit_json(args, config, payload)
    return status


def read_sweep_csv(path) -> SweepResult:
    """Rows and embedded config of a ``sweep`` CSV output."""
    config, rows = {}, []
    header = None
    for line in Path(path).read_text().splitlines():
        if line.startswith(CONFIG_PREFIX):
            config = json.loads(line[len(CONFIG_PREFIX):])
        elif line.startswith("#") or not line.strip():
            continue
        elif header is None:
            header = line.split(",")
        else:
            vals = dict(zip(header, line.split(",")))
            rows.append(SweepRow(
                float(vals["sigma"]), int(vals["k"]), float(vals["rate"]), float(vals["mean_distortion"]),
                float(vals["std_error"]), float(vals["bound"]), int(vals["trials"]), int(vals["N"]),
                int(vals["seed"]),
            ))
    if header is None:
        raise ValueError(f"{path}: no CSV rows")
    scheme = Scheme(config.get("scheme", "permutation" if any(r.rate > 0 for r in rows) else "independent"))
    return SweepResult(scheme, rows, config)


def _parse_point(text: str) -> RegionPoint:
    parts = text.split(",")
    if len(parts) == 2:
        parts = ["synthetic", *parts]
    if len(parts) != 3:
        raise ValueError(f"point must be [name,]alpha,beta: {text!r}")
    return RegionPoint(parts[0], float(parts[1]), float(parts[2]))


def cmd_region(args) -> int:
    measured = [scheme_point(read_sweep_csv(p), Path(p).stem) for p in args.sweeps]
    measured += [_parse_point(t) for t in args.measured or []]
    synthetic = [_parse_point(t) for t in args.synthetic or []]
    config = {"sweeps": [str(p) for p in args.sweeps], "measured": args.measured or [],
              "synthetic": args.synthetic or [], "fit_tol": args.fit_tol}
    rep = region_report(measured, synthetic, tol=args.fit_tol, strict=False)
    if args.format == "json":
        _emit_json(args, config, rep.to_dict())
    else:
        lines = [_header(config), "name,kind,alpha,beta,classification\n"]
        lines += [f"{r['name']},{r['kind']},{r['alpha']!r},{r['beta']!r},{r['classification']}\n" for r in rep.rows]
        _emit(args, "".join(lines))
    for f in rep.failures:
        print(f"region assertion failed: {f}", file=sys.stderr)
    return 2 if rep.failures else 0


def _limits_config(args, cfg: dict) -> dict:
    kind = _pick(args, cfg, "experiment")
    if kind not in ("fidelity", "realism"):
        raise ValueError("limits needs experiment 'fidelity' or 'realism'")
    seed = int(_pick(args, cfg, "seed", 0))
    tol = float(_pick(args, cfg, "tol", DEFAULT_TOL))
    if kind == "fidelity":
        grid = args.sigma_grid or cfg.get("sigma_grid", [1.0, 0.5, 0.1, 0.01, 0.0])
        p = float(_pick(args, cfg, "p", 2.0))
        length = int(cfg.get("length", 2 * truncation_radius(PoolingPmf.geometric(max(grid)), tol) + 1))
        return {"experiment": kind, "sigma_grid": [float(s) for s in grid], "p": p, "seed": seed,
                "tol": tol, "length": length, "z": cfg.get("z"), "zhat": cfg.get("zhat")}
    grid = args.sigma_grid or cfg.get("sigma_grid", [1.0, 10.0, 100.0, 1e4])
    pmf = args.pmf or cfg.get("pmf", [0.5, 0.5])
    pmf_hat = cfg.get("pmf_hat", [0.8, 0.2])
    return {"experiment": kind, "sigma_grid": [float(s) for s in grid], "pmf": [float(v) for v in pmf],
            "pmf_hat": [float(v) for v in pmf_hat], "cost": _cost(cfg, len(pmf)).entries.tolist(),
            "seed": seed, "seed_hat": cfg.get("seed_hat"), "tol": tol,
            "replications": int(cfg.get("replications", 1))}


def cmd_limits(args) -> int:
    config = _limits_config(args, load_config(args.config))
    rows = []
    if config["experiment"] == "fidelity":
        if config["z"] is None:
            rng = np.random.default_rng(config["seed"])
            z, zh = rng.uniform(0, 1, config["length"]), rng.uniform(0, 1, config["length"])
        else:
            z, zh = config["z"], config["zhat"]
        t = fidelity_limit_experiment(z, zh, config["sigma_grid"], config["p"], config["tol"])
        rows = [(0, s, v, e, t.target) for s, v, e in zip(t.sigmas, t.values, t.errors)]
    else:
        spec, spec_hat = SourceSpec(config["pmf"]), SourceSpec(config["pmf_hat"])
        d = CostMatrix(config["cost"])
        for r in range(config["replications"]):
            seed_hat = None if config["seed_hat"] is None else config["seed_hat"] + r
            t = realism_limit_experiment(spec, spec_hat, config["sigma_grid"], d, config["seed"] + r,
                                         seed_hat, config["tol"])
            rows += [(r, s, v, e, t.target) for s, v, e in zip(t.sigmas, t.values, t.errors)]
    if args.format == "json":
        keys = ("sigma", "value", "error", "target")
        _emit_json(args, config, {"rows": [{"replication": r[0], **dict(zip(keys, map(float, r[1:])))}
                                           for r in rows]})
        return 0
    lines = [_header(config), "replication,sigma,value,error,target\n"]
    lines += [f"{r},{float(s)!r},{float(v)!r},{float(e)!r},{float(tg)!r}\n" for r, s, v, e, tg in rows]
    _emit(args, "".join(lines))
    return 0


def cmd_verify_pmf(args) -> int:
    if args.table:
        q = load_table_json(args.table)
        config = {"table": list(q.table)}
    else:
        q = PoolingPmf.geometric(args.sigma)
        config = {"sigma": args.sigma}
    report = check_axioms(q, args.k_max)
    if args.family:
        report.update(check_family_limits())
    config["k_max"] = args.k_max
    config["family"] = args.family
    if args.format == "json":
        _emit_json(args, config, {"checks": report})
    else:
        lines = [_header(config), "check,passed\n"] + [f"{k},{str(v).lower()}\n" for k, v in report.items()]
        _emit(args, "".join(lines))
    return 0 if all(report.values()) else 2


# ------------------------------------------------------------------ parser


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed; the only source of randomness")
    common.add_argument("--tol", type=float, default=None, help="pooling truncation tolerance (default 1e-10)")
    common.add_argument("-o", "--output", default=None, help="write output to this file instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="output format")

    parser = _Parser(prog="wdistortion", description="Wasserstein distortion toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("transport", parents=[common], help="solve a small transport instance")
    p.add_argument("instance", help="JSON/TOML file with A, mu, nu and cost (number or matrix)")
    p.set_defaults(func=cmd_transport)

    p = sub.add_parser("distortion", parents=[common], help="per-index distortion between two symbol files")
    p.add_argument("x", help="source symbols, whitespace separated, guards included")
    p.add_argument("xhat", help="reconstruction symbols, same layout")
    p.add_argument("--config", help="JSON/TOML with sigma, A, cost, tol and optional guard")
    p.add_argument("--sigma", type=float, help="pooling width")
    p.add_argument("--A", type=int, help="alphabet size")
    p.add_argument("--guard", type=int, help="guard width on each side (default: truncation radius)")
    p.set_defaults(func=cmd_distortion)

    p = sub.add_parser("encode", parents=[common], help="permutation-scheme encoder (binary output)")
    p.add_argument("input", help="block of symbols in 1..A")
    p.add_argument("--A", type=int, required=True, help="alphabet size")
    p.add_argument("--k", type=int, required=True, help="window size")
    p.add_argument("--C", type=int, default=0, help="offset of the first window")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", parents=[common], help="permutation-scheme decoder")
    p.add_argument("message", help="binary message written by encode")
    p.add_argument("--block-length", type=int, default=None, help="block length (default: C + windows * k)")
    p.add_argument("--C", type=int, default=0, help="offset of the first window")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("simulate", parents=[common], help="sample, encode and decode one block (JSON)")
    p.add_argument("--config", help="JSON/TOML with scheme, pmf, length, k, C, seed")
    p.add_argument("--scheme", choices=[s.value for s in Scheme], help="coding scheme")
    p.add_argument("--pmf", type=_floats, help="source pmf, comma separated")
    p.add_argument("--length", type=int, help="block length")
    p.add_argument("--k", type=int, help="window size")
    p.add_argument("--C", type=int, help="offset of the first window")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", parents=[common], help="Monte Carlo sweep over sigma")
    p.add_argument("--config", help="JSON/TOML experiment config or a previous sweep output")
    p.add_argument("--scheme", choices=[s.value for s in Scheme], help="coding scheme")
    p.add_argument("--pmf", type=_floats, help="source pmf, comma separated")
    p.add_argument("--sigma-grid", type=_floats, help="comma separated pooling widths")
    p.add_argument("--gamma", type=float, help="window exponent, k = round(sigma^gamma)")
    p.add_argument("--k", type=int, help="fixed window size overriding gamma")
    p.add_argument("--N", type=int, help="fixed half block length overriding the N policy")
    p.add_argument("--C", type=int, help="offset of the first window")
    p.add_argument("--trials", type=int, help="trials per sigma")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes; output does not depend on it")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("limits", parents=[common], help="small- and large-sigma limit experiments")
    p.add_argument("experiment", nargs="?", choices=("fidelity", "realism"), help="which limit to run")
    p.add_argument("--config", help="JSON/TOML config or a previous limits output")
    p.add_argument("--sigma-grid", type=_floats, help="comma separated pooling widths")
    p.add_argument("--pmf", type=_floats, help="realism: source pmf")
    p.add_argument("--p", type=float, help="fidelity: transport exponent")
    p.set_defaults(func=cmd_limits)

    p = sub.add_parser("verify-pmf", parents=[common], help="check pooling PMF axioms")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--sigma", type=float, help="geometric pooling width")
    g.add_argument("--table", help="JSON file (or literal) of [k, weight] pairs")
    p.add_argument("--k-max", type=int, default=10_000, help="largest offset sampled")
    p.add_argument("--family", action="store_true", help="also run the family limit checks")
    p.set_defaults(func=cmd_verify_pmf)

    p = sub.add_parser("region", parents=[common], help="classify convergence-rate exponents")
    p.add_argument("sweeps", nargs="*", help="sweep CSV outputs to fit")
    p.add_argument("--measured", action="append", help="extra measured point [name,]alpha,beta")
    p.add_argument("--synthetic", action="append", help="synthetic point [name,]alpha,beta")
    p.add_argument("--fit-tol", type=float, default=0.1, help="slack for fitted exponents")
    p.set_defaults(func=cmd_region)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (ValueError, KeyError, TypeError, OSError, MalformedMessageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except AssertionError as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 2
