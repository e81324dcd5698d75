"""Command-line interface: ``hamperturb {sample,construct,verify,experiment,scan}``.

Exit codes: 0 success, 1 negative result (construction failed, certificate
rejected), 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import secrets
import sys
from collections import deque
from pathlib import Path

import numpy as np

from . import __version__
from .constructive import (
    ConstructionFailed,
    Params,
    concatenate_cycle_factor,
    construct_hamilton_min_degree,
    construct_hamilton_regular,
    sample_cycle_factor,
)
from .experiments import ConfigError, ExperimentConfig, Summary, default_workers, run_experiment
from .graph import Graph, GraphError
from .io import FormatError, dumps, parse_certificate, read_edge_list, read_factor, read_json
from .oracle import bipartite_witness, certificate_problem
from .permutation import MODELS, cycle_structure, sample_factor, sample_uniform

TOOL = f"hamperturb-{__version__}"
OK, NEGATIVE, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _hash(doc) -> str:
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def _seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbits(32)
        print(f"seed={args.seed}", file=sys.stderr)
    return args.seed


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# -- sample --------------------------------------------------------------------


def cmd_sample(args) -> int:
    seed = _seed(args)
    if args.n < 1 or (args.model == "g_n_2" and args.n < 3):
        raise UsageError(f"n={args.n} is too small for model {args.model}")
    rng = np.random.default_rng(seed)
    config = {"cmd": "sample", "n": args.n, "model": args.model}
    doc = {"tool": TOOL, "config_hash": _hash(config), "seed": seed, "model": args.model}
    if args.model == "s_n":
        p = sample_uniform(args.n, rng)
        doc.update(cycle_structure(p).to_json(), images=p.tolist())
    else:
        doc.update(sample_factor(args.n, args.model, rng).to_json())
    _emit(args, dumps(doc))
    return OK


# -- construct -------------------------------------------------------------------


def bipartition(g: Graph) -> np.ndarray | None:
    """Side labels (0/1) of a proper 2-colouring, or None if G is not bipartite."""
    side = np.full(g.n, -1, dtype=np.int8)
    for root in range(g.n):
        if side[root] >= 0:
            continue
        side[root] = 0
        queue = deque([root])
        while queue:
            v = queue.popleft()
            for w in g.neighbors(v).tolist():
                if side[w] < 0:
                    side[w] = 1 - side[v]
                    queue.append(w)
                elif side[w] == side[v]:
                    return None
    return side


def _witness(g: Graph, factor) -> bool | None:
    """Component witness for bipartite G, taking A as the smaller side."""
    side = bipartition(g)
    if side is None or factor is None or g.num_edges == 0:
        return None
    ones = int(side.sum())
    a = np.flatnonzero(side == (1 if ones <= g.n - ones else 0))
    return bool(bipartite_witness(factor, a))


def _load_params(text: str | None) -> Params:
    if not text:
        return Params()
    doc = read_json(text) if Path(text).is_file() else json.loads(text)
    try:
        return Params.from_json(doc)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad params: {exc}") from None


def cmd_construct(args) -> int:
    seed = _seed(args)
    g = read_edge_list(args.graph)
    factor = read_factor(args.factor) if args.factor else None
    if factor is not None and factor.n != g.n:
        raise UsageError(f"factor has {factor.n} vertices, graph has {g.n}")
    try:
        params = _load_params(args.params)
    except json.JSONDecodeError as exc:
        raise UsageError(f"params are not valid JSON: {exc}") from None
    rng = np.random.default_rng(seed)
    config = {"cmd": "construct", "pipeline": args.pipeline, "graph": _file_hash(args.graph),
              "factor": _file_hash(args.factor) if args.factor else None,
              "model": args.model, "params": params.__dict__}
    doc = {"tool": TOOL, "config_hash": _hash(config), "seed": seed, "pipeline": args.pipeline}
    try:
        if args.pipeline == "mindeg":
            cert = construct_hamilton_min_degree(g, rng, params, factor=factor, model=args.model)
        elif args.pipeline == "regular":
            cert = construct_hamilton_regular(g, factor, rng, params, model=args.model)
        else:
            if factor is None:
                if params.ell is None:
                    raise UsageError("clfactor without --factor needs params.ell")
                factor = sample_cycle_factor(g.n, params.ell, rng)
            cert = concatenate_cycle_factor(g, factor, rng, params)
    except ConstructionFailed as exc:
        used = exc.factor if exc.factor is not None else factor
        doc.update(status="FAILED", **exc.to_json(), witness=_witness(g, used),
                   stats=_jsonable(exc.stats))
        if used is not None:
            doc["factor"] = used.to_json()
        print(f"FAILED stage={exc.stage}")
        if args.out:
            Path(args.out).write_text(dumps(doc))
        else:
            sys.stdout.write(dumps(doc))
        return NEGATIVE
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    doc.update(status="HAMILTONIAN", certificate=cert.order, factor=cert.factor.to_json(),
               stats=_jsonable(cert.stats))
    print("HAMILTONIAN")
    if args.out:
        Path(args.out).write_text(dumps(doc))
    else:
        sys.stdout.write(dumps(doc))
    return OK


# -- verify ---------------------------------------------------------------------------


def cmd_verify(args) -> int:
    g = read_edge_list(args.graph)
    h = g
    if args.factor:
        factor = read_factor(args.factor)
        if factor.n != g.n:
            raise UsageError(f"factor has {factor.n} vertices, graph has {g.n}")
        h = g.union(factor.to_graph())
    try:
        order = parse_certificate(read_json(args.certificate))
    except FormatError as exc:
        print(f"INVALID: {exc}")
        return NEGATIVE
    problem = certificate_problem(h, order)
    if problem is None:
        print("VALID")
        return OK
    print(f"INVALID: {problem}")
    return NEGATIVE


# -- experiments ------------------------------------------------------------------------


def format_csv(summary: Summary) -> str:
    buf = io.StringIO()
    cfg = summary.config
    buf.write(f"# schema=1 tool={TOOL} config={cfg.digest()} seed={cfg.seed}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(summary.columns))
    writer.writerows(summary.rows())
    return buf.getvalue()


def _run_and_write(args, cfg: ExperimentConfig) -> int:
    workers = args.workers or default_workers()
    summary = run_experiment(cfg, workers)
    text = dumps(_jsonable(summary.to_json())) if args.format == "json" else format_csv(summary)
    _emit(args, text)
    digest = hashlib.sha256(text.encode()).hexdigest()[:16]
    line = f"{cfg.experiment} trials={cfg.trials} seed={cfg.seed} config={cfg.digest()} " \
           f"output={digest}"
    print(line, file=sys.stdout if args.out else sys.stderr)
    if args.summary:
        Path(args.summary).write_text(dumps(_jsonable(summary.to_json())))
    return OK


def cmd_experiment(args) -> int:
    doc = read_json(args.config)
    if not isinstance(doc, dict):
        raise UsageError("config must be a JSON object")
    if args.seed is not None:
        doc["seed"] = args.seed
    elif "seed" not in doc:
        args.seed = None
        doc["seed"] = _seed(args)
    return _run_and_write(args, ExperimentConfig.from_json(doc))


def cmd_scan(args) -> int:
    seed = _seed(args)
    try:
        grid = [float(x) for x in args.grid.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad grid {args.grid!r}") from None
    params = {"family": args.family, "grid": grid}
    if args.pipeline_params:
        params["pipeline"] = json.loads(args.pipeline_params)
    cfg = ExperimentConfig(experiment="threshold_scan", n=args.n, trials=args.trials, seed=seed,
                           model=args.model, params=params, block_size=args.block_size)
    return _run_and_write(args, cfg)


# -- entry point ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output path (default stdout)")
    common.add_argument("--workers", type=int, default=argparse.SUPPRESS,
                        help="worker processes (default $HAMPERTURB_WORKERS or 1)")
    common.add_argument("--format", choices=("json", "csv"), default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="hamperturb", description=__doc__.splitlines()[0],
                                     parents=[common])
    parser.add_argument("--version", action="version", version=TOOL)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", parents=[common], help="sample a permutation or 2-factor")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--model", choices=MODELS, default="g_n_2")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("construct", parents=[common], help="build a Hamilton cycle of G ∪ F")
    p.add_argument("--graph", required=True, help="edge-list file")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--lazy", action="store_true", help="sample F online")
    src.add_argument("--factor", help="factor JSON file")
    p.add_argument("--pipeline", choices=("mindeg", "regular", "clfactor"), default="mindeg")
    p.add_argument("--model", choices=MODELS, default="g_n_2")
    p.add_argument("--params", help="JSON object or path to a JSON file")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("verify", parents=[common], help="check a certificate")
    p.add_argument("--graph", required=True)
    p.add_argument("--factor")
    p.add_argument("--certificate", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("experiment", parents=[common], help="run a Monte Carlo experiment")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--summary", help="also write the JSON summary here")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("scan", parents=[common], help="success rates along a degree grid")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--family", default="near_regular",
                   choices=("near_regular", "clique_blowup", "complete", "lower_bound"))
    p.add_argument("--grid", required=True, help="comma-separated multipliers (eps for lower_bound)")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--model", choices=MODELS, default="g_n_2")
    p.add_argument("--block-size", type=int, default=25)
    p.add_argument("--pipeline-params", help="JSON object passed to the pipeline")
    p.add_argument("--summary", help="also write the JSON summary here")
    p.set_defaults(func=cmd_scan)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name, default in (("seed", None), ("out", None), ("workers", None), ("format", None)):
        if not hasattr(args, name):
            setattr(args, name, default)
    if args.format is None:
        args.format = "csv" if args.command in ("experiment", "scan") else "json"
    try:
        return args.func(args)
    except (UsageError, ConfigError, FormatError, GraphError, OSError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
