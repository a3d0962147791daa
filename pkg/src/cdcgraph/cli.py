"""``cdc`` command line.

Every command prints one JSON envelope (``--output text`` for a flat
rendering). Exit codes: 0 success, 1 validation failure, 2 parse failure,
3 missing authorization, 4 divergence or other runtime error.

Config keys can also come from the environment; a flag wins over its
variable, which wins over the default::

    CDC_H_MAX, CDC_DELTA_THRESHOLD_MULTIPLIER, CDC_THETA, CDC_EPSILON,
    CDC_MAX_ITER, CDC_SEED, CDC_DIM, CDC_STRICT_CYCLES, CDC_OUTPUT
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from . import __version__
from .bridges import compose, discover_bridges, spr
from .domains import DEFAULT_H_MAX, DomainPath
from .errors import (
    CDCError, CyclicOrder, CyclicRequires, DeltaInconsistent, DomainGrowthExceeded,
    HeightBoundReached, InvalidFusion, NonFiniteValue, TierViolation, Unauthorized,
)
from .experiments import experiment1, experiment2, experiment3, experiment3_graph, pruning_experiment
from .kbformat import Diagnostic, Document, parse_file
from .knowledge import KBParseError, KnowledgeBase, fixture_path, load_kb
from .neural import (
    DEFAULT_DIM, DEFAULT_EPSILON, DEFAULT_MAX_ITER, init_embeddings, random_dense_operators,
    run_guarded, spectral_normalize,
)
from .phq9 import alert_propagation_check, record_actions, score_assessment
from .reindex import inherited_query
from .traversal import transitive_closure, traverse_path
from .validation import validate_kb

EXIT_OK, EXIT_INVALID, EXIT_PARSE, EXIT_AUTH, EXIT_RUNTIME = 0, 1, 2, 3, 4

_VALIDATION_ERRORS = (CyclicRequires, CyclicOrder, DeltaInconsistent, TierViolation,
                      HeightBoundReached, DomainGrowthExceeded, InvalidFusion)


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    kb_paths: list[str] = field(default_factory=list)
    h_max: int = DEFAULT_H_MAX
    delta_threshold_multiplier: float = 4.0
    theta: float = 0.8
    epsilon: float = DEFAULT_EPSILON
    max_iter: int = DEFAULT_MAX_ITER
    seed: int = 0
    dim: int = DEFAULT_DIM
    strict_cycles: bool = True
    output: str = "json"

    KEYS = {
        "h_max": int, "delta_threshold_multiplier": float, "theta": float, "epsilon": float,
        "max_iter": int, "seed": int, "dim": int, "strict_cycles": _bool, "output": str,
    }

    @staticmethod
    def env_var(key: str) -> str:
        return "CDC_" + key.upper()

    @classmethod
    def resolve(cls, args: argparse.Namespace, env: dict | None = None) -> "RunConfig":
        env = os.environ if env is None else env
        cfg = cls(kb_paths=list(getattr(args, "kb", None) or []))
        for key, conv in cls.KEYS.items():
            value = getattr(args, key, None)
            if value is None and cls.env_var(key) in env:
                try:
                    value = conv(env[cls.env_var(key)])
                except ValueError as exc:
                    raise ValueError(f"{cls.env_var(key)}: {exc}") from None
            if value is not None:
                setattr(cfg, key, value)
        cfg.check()
        return cfg

    def check(self) -> None:
        problems = []
        if self.h_max < 1:
            problems.append("h_max must be >= 1")
        if self.delta_threshold_multiplier < 1:
            problems.append("delta_threshold_multiplier must be >= 1")
        if not -1.0 <= self.theta <= 1.0:
            problems.append("theta must lie in [-1, 1]")
        if self.epsilon <= 0:
            problems.append("epsilon must be positive")
        if self.max_iter < 1:
            problems.append("max_iter must be >= 1")
        if self.dim < 2:
            problems.append("dim must be >= 2")
        if self.output not in ("json", "text"):
            problems.append("output must be json or text")
        if problems:
            raise ValueError("; ".join(problems))

    def to_dict(self) -> dict:
        return asdict(self)


class CommandFailed(Exception):
    """A command ran but its result is a failure with a specific exit code."""

    def __init__(self, code: int, result: dict):
        self.code = code
        self.result = result


# -- helpers ---------------------------------------------------------------------


def _kb_file(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    bundled = fixture_path(name if name.endswith(".kb") else name + ".kb")
    if bundled.exists():
        return bundled
    raise FileNotFoundError(f"no such KB file: {name}")


def _load(cfg: RunConfig, *, strict_cycles: bool | None = None) -> KnowledgeBase:
    if not cfg.kb_paths:
        raise KBParseError([Diagnostic(0, "error", "no knowledge base given (use --kb)")])
    statements, diags = [], []
    for name in cfg.kb_paths:
        path = _kb_file(name)
        doc = parse_file(path)
        statements += doc.statements
        diags += [Diagnostic(d.line, d.severity, f"{path}: {d.message}") for d in doc.diagnostics]
    doc = Document(statements, diags)
    return load_kb(doc, h_max=cfg.h_max,
                   strict_cycles=cfg.strict_cycles if strict_cycles is None else strict_cycles)


def _d(kb: KnowledgeBase, text: str) -> DomainPath:
    d = kb.resolve(text)
    kb.universe._check(d)
    return d


def _emit_trace(steps) -> None:
    for s in steps:
        print(s.to_json())


# -- commands --------------------------------------------------------------------


def cmd_validate(cfg: RunConfig, args) -> dict:
    kb = _load(cfg, strict_cycles=False)
    report = validate_kb(kb, seed=cfg.seed)
    out = report.to_dict()
    if not report.ok:
        raise CommandFailed(EXIT_INVALID, out)
    return out


def cmd_experiment(cfg: RunConfig, args) -> dict:
    which = args.which
    if which == "1":
        rep = experiment1(_load(cfg) if cfg.kb_paths else None)
    elif which == "2":
        rep = experiment2(_load(cfg) if cfg.kb_paths else None)
    elif which == "3":
        rep = experiment3(args.seeds, dim=cfg.dim, epsilon=cfg.epsilon, max_iter=cfg.max_iter,
                          seed=cfg.seed)
    else:
        rep = pruning_experiment(args.n, args.k, cfg.seed)
    out = rep.to_dict()
    if not rep.passed:
        raise CommandFailed(EXIT_INVALID, out)
    return out


def cmd_query(cfg: RunConfig, args) -> dict:
    kb = _load(cfg)
    d = _d(kb, args.domain)
    if args.inherited:
        ans = inherited_query(kb.store, args.concept, args.relation, d, include_descendants=True)
        return {
            "concept": args.concept, "relation": args.relation, "domain": str(d),
            "targets": ans.targets,
            "matches": [{"target": h.target, "domain": str(h.origin),
                         "confidence": h.confidence, "provenance": str(h.provenance)}
                        for h in ans.hits],
            "stats": {"ancestor_levels": ans.steps, "blocked": [str(t) for t in ans.blocked]},
        }
    ans = kb.store.query(args.concept, args.relation, d)
    return {
        "concept": args.concept, "relation": args.relation, "domain": str(d),
        "targets": ans.targets,
        "matches": [{"target": t, "domain": str(dm), "confidence": c} for t, dm, c in ans.rows()],
        "stats": ans.stats.to_dict(),
    }


def cmd_closure(cfg: RunConfig, args) -> dict:
    kb = _load(cfg)
    res = transitive_closure(kb.store, args.concept, args.relation, _d(kb, args.domain),
                             None if args.no_bridges else kb.bridges)
    if args.trace:
        _emit_trace(res.trace)
    return res.to_dict()


def _parse_step(kb: KnowledgeBase, text: str) -> tuple[str, DomainPath | None]:
    rel, _, dom = text.partition("@")
    return rel, (_d(kb, dom) if dom else None)


def cmd_traverse(cfg: RunConfig, args) -> dict:
    kb = _load(cfg)
    steps = [_parse_step(kb, s) for s in args.step]
    start = _d(kb, args.start) if args.start else None
    res = traverse_path(kb.store, args.concept, steps, start)
    if args.trace:
        _emit_trace(res.trace)
    return res.to_dict()


def cmd_bridge(cfg: RunConfig, args) -> dict:
    kb = _load(cfg)
    doms = [_d(kb, x) for x in args.domains]
    if args.action == "list":
        return {"bridges": [kb.bridges.morphism(a, b).to_dict() for a, b in kb.bridges.pairs()]}
    if args.action == "spr":
        if len(doms) != 2:
            raise ValueError("spr needs two domains")
        phi = kb.bridges.morphism(*doms)
        return {"morphism": phi.to_dict(), "spr": spr(phi, kb.store)}
    if args.action == "compose":
        if len(doms) != 3:
            raise ValueError("compose needs three domains")
        p12, p23 = kb.bridges.morphism(doms[0], doms[1]), kb.bridges.morphism(doms[1], doms[2])
        rep = compose(p12, p23, kb.store)
        return {**rep.to_dict(), "spr": {"phi12": spr(p12, kb.store), "phi23": spr(p23, kb.store),
                                         "composed": spr(rep.morphism, kb.store)}}
    if len(doms) != 2:
        raise ValueError("discover needs two domains")
    emb = init_embeddings(kb.store, cfg.dim, cfg.seed)
    props = discover_bridges(kb.store, emb, doms[0], doms[1], cfg.theta)
    return {"theta": cfg.theta, "proposals": [p.to_dict() for p in props]}


def cmd_fuse(cfg: RunConfig, args) -> dict:
    kb = _load(cfg)
    rep = kb.apply_fusion(args.d1, args.d2, authorized=args.authorize, name=args.name,
                          growth_multiplier=cfg.delta_threshold_multiplier)
    return rep.to_dict()


def cmd_neural(cfg: RunConfig, args) -> dict:
    graph = _load(cfg).store if cfg.kb_paths else experiment3_graph(cfg.seed)
    pairs = sorted({(t.relation, t.domain) for t in graph})
    runs, deltas = [], {}
    for s in range(cfg.seed, cfg.seed + args.seeds):
        emb = init_embeddings(graph, cfg.dim, s)
        if args.condition == "A":
            _, rep = run_guarded(graph, emb, cfg.epsilon, cfg.max_iter,
                                 dense_operators=random_dense_operators(pairs, cfg.dim, s,
                                                                        args.dense_radius))
        elif args.condition == "B":
            _, rep = run_guarded(graph, emb, cfg.epsilon, cfg.max_iter, normalize=False)
        else:
            _, rep = run_guarded(graph, spectral_normalize(emb, pairs=pairs), cfg.epsilon,
                                 cfg.max_iter)
        runs.append({"seed": s, **rep.to_dict()})
        deltas[s] = rep.deltas
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["seed", "iteration", "delta"])
            for s, ds in deltas.items():
                w.writerows((s, i, repr(x)) for i, x in enumerate(ds, start=1))
    out = {"condition": args.condition, "runs": runs,
           "converged": sum(r["converged"] for r in runs), "seeds": args.seeds}
    if out["converged"] < args.seeds:
        raise CommandFailed(EXIT_RUNTIME, out)
    return out


def cmd_phq9(cfg: RunConfig, args) -> dict:
    kb = _load(cfg)
    d = _d(kb, args.domain)
    a = score_assessment(args.subject, kb.store, d)
    record_actions(kb.store, a)
    check = alert_propagation_check(kb.store, args.subject, d)
    out = {"assessment": a.to_dict(), "alert_check": check.to_dict()}
    if not check.passed:
        raise CommandFailed(EXIT_INVALID, out)
    return out


COMMANDS: dict[str, Callable[[RunConfig, argparse.Namespace], dict]] = {
    "validate": cmd_validate, "experiment": cmd_experiment, "query": cmd_query,
    "closure": cmd_closure, "traverse": cmd_traverse, "bridge": cmd_bridge, "fuse": cmd_fuse,
    "neural": cmd_neural, "phq9": cmd_phq9,
}


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("configuration (flags override CDC_* environment variables)")
    g.add_argument("--kb", action="append", metavar="PATH",
                   help="knowledge-base file (repeatable); bundled fixture names also work")
    g.add_argument("--h-max", dest="h_max", type=int)
    g.add_argument("--delta-threshold-multiplier", dest="delta_threshold_multiplier", type=float)
    g.add_argument("--theta", type=float)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--max-iter", dest="max_iter", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--dim", type=int)
    g.add_argument("--strict-cycles", dest="strict_cycles", action="store_true", default=None)
    g.add_argument("--no-strict-cycles", dest="strict_cycles", action="store_false")
    g.add_argument("--output", choices=["json", "text"])
    g.add_argument("--trace", action="store_true", help="stream trace steps as JSON lines")

    p = argparse.ArgumentParser(prog="cdc", description="Domain-scoped knowledge graph reasoning")
    p.add_argument("--version", action="version", version=f"cdc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common], help="check C1-C4 and the domain axioms")

    s = sub.add_parser("experiment", parents=[common], help="run an experiment")
    s.add_argument("which", choices=["1", "2", "3", "pruning"])
    s.add_argument("--seeds", type=int, default=100)
    s.add_argument("--n", type=int, default=100_000)
    s.add_argument("--k", type=int, default=50)

    for name, helptext in (("query", "prefix query"), ("closure", "transitive closure")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("concept")
        s.add_argument("relation")
        s.add_argument("domain")
        if name == "query":
            s.add_argument("--inherited", action="store_true",
                           help="add monotone facts inherited from ancestor domains")
        else:
            s.add_argument("--no-bridges", action="store_true")

    s = sub.add_parser("traverse", parents=[common], help="Kleisli path traversal")
    s.add_argument("concept")
    s.add_argument("--step", action="append", default=[], metavar="REL[@DOMAIN]",
                   help="one hop; without a domain the hop runs where the previous one landed")
    s.add_argument("--start", metavar="DOMAIN")

    s = sub.add_parser("bridge", parents=[common], help="bridge SPR, composition, discovery")
    s.add_argument("action", choices=["list", "spr", "compose", "discover"])
    s.add_argument("domains", nargs="*")

    s = sub.add_parser("fuse", parents=[common], help="create a domain above two others")
    s.add_argument("d1")
    s.add_argument("d2")
    s.add_argument("--name")
    s.add_argument("--authorize", action="store_true")

    s = sub.add_parser("neural", parents=[common], help="fixed-point iteration")
    s.add_argument("--condition", choices=["A", "B", "C"], default="C")
    s.add_argument("--seeds", type=int, default=1)
    s.add_argument("--dense-radius", type=float, default=1.5,
                   help="spectral radius of the dense operators under condition A")
    s.add_argument("--csv", metavar="PATH", help="write per-iteration deltas")

    s = sub.add_parser("phq9", parents=[common], help="score a PHQ-9 subject")
    s.add_argument("subject")
    s.add_argument("--domain", default="Psychology@PHQ9")
    return p


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, Unauthorized):
        return EXIT_AUTH
    if isinstance(exc, (KBParseError, FileNotFoundError, IsADirectoryError)):
        return EXIT_PARSE
    if isinstance(exc, NonFiniteValue):
        return EXIT_RUNTIME
    if isinstance(exc, _VALIDATION_ERRORS):
        return EXIT_INVALID
    return EXIT_RUNTIME


def _error(exc: BaseException) -> dict:
    err = {"type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, CyclicRequires):
        err["witness"] = {"relation": exc.relation, "domain": str(exc.domain), "cycle": exc.cycle}
    if isinstance(exc, KBParseError):
        err["diagnostics"] = [str(d) for d in exc.diagnostics]
    return err


def _text(obj, prefix: str = "") -> list[str]:
    if isinstance(obj, dict):
        lines = []
        for k, v in obj.items():
            lines += _text(v, f"{prefix}{k}.")
        return lines
    if isinstance(obj, list) and obj and any(isinstance(x, (dict, list)) for x in obj):
        lines = []
        for i, v in enumerate(obj):
            lines += _text(v, f"{prefix}{i}.")
        return lines
    return [f"{prefix[:-1]}: {json.dumps(obj, ensure_ascii=False)}"]


def render(envelope: dict, output: str, compact: bool = False) -> str:
    if output == "text":
        return "\n".join(_text(envelope))
    return json.dumps(envelope, sort_keys=True, ensure_ascii=False,
                      indent=None if compact else 2)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.resolve(args)
    except ValueError as exc:
        print(json.dumps({"command": args.command, "ok": False, "exit_code": EXIT_PARSE,
                          "error": {"type": "ConfigError", "message": str(exc)}}))
        return EXIT_PARSE
    envelope = {"command": args.command, "config": cfg.to_dict()}
    try:
        result = COMMANDS[args.command](cfg, args)
        envelope.update(ok=True, exit_code=EXIT_OK, result=result)
    except CommandFailed as exc:
        envelope.update(ok=False, exit_code=exc.code, result=exc.result)
    except (CDCError, OSError, ValueError, KeyError) as exc:
        envelope.update(ok=False, exit_code=_exit_code(exc), error=_error(exc))
    print(render(envelope, cfg.output, compact=getattr(args, "trace", False)))
    return envelope["exit_code"]


if __name__ == "__main__":
    sys.exit(main())
