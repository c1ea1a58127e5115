"""Command-line interface.

Exit codes: 0 pass, 1 verification failure, 2 configuration or input error.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from dataclasses import asdict, dataclass, field

from . import __version__
from .dyadic import DyadicPoint, Topology, canonicalize
from .folding import cascade_eval, limit_eval, real_coordinate
from .lemmas import run_suite
from .metric import MetricIndex, MetricKind
from .reports import dumps, lemma_document, lemma_table, targets_csv, verification_document, write_text
from .rules import DiameterRule, RuleError, generate, max_depth, seeded_corpus
from .verifier import DepthError, check_mstar_range, verify_rules

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    """Bad flags, unreadable or malformed inputs."""


@dataclass
class RunConfig:
    rule_files: list[str] = field(default_factory=list)
    corpus: int = 0
    corpus_depth: int = 10
    topology: str = "circle"
    seed: int = 0
    keep_probability: float = 0.5
    cap: int = 3
    depth: int = 12
    mstar: tuple[int, int] = (3, 8)
    deltas: tuple[str, ...] = ("low", "high")
    composite: bool = True
    jobs: int = 1
    out: str | None = None

    def rules(self) -> list[DiameterRule]:
        rules = [_load_rule(p) for p in self.rule_files]
        if self.corpus:
            rules += seeded_corpus(self.corpus, self.corpus_depth, self.topology, self.seed,
                                   self.keep_probability, self.cap)
        if not rules:
            raise ConfigError("no rules: pass --rule FILE or --corpus COUNT")
        return rules

    def validate(self) -> None:
        if self.depth > max_depth():
            raise ConfigError(f"depth {self.depth} exceeds SNOWCIRCLE_MAX_DEPTH={max_depth()}")
        try:
            check_mstar_range(self.depth, self.mstar)
        except DepthError as exc:
            raise ConfigError(str(exc)) from None


def _load_rule(path: str) -> DiameterRule:
    try:
        return DiameterRule.load(path)
    except OSError as exc:
        raise ConfigError(f"cannot read rule file {path}: {exc.strerror}") from None
    except RuleError as exc:
        raise ConfigError(f"invalid rule file {path}: {exc}") from None


def _parse_range(text: str) -> tuple[int, int]:
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            return int(a), int(b)
        return int(text), int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}") from None


def _parse_metric(text: str) -> MetricKind:
    try:
        return MetricKind.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _parse_point(text: str, topology: Topology) -> DyadicPoint:
    try:
        return canonicalize(DyadicPoint.parse(text), topology)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _emit(text: str, out: str | None) -> None:
    if out:
        write_text(out, text)
    else:
        sys.stdout.write(text)


# subcommands

def cmd_generate(args) -> int:
    params = {}
    if args.kind == "periodic-keep":
        params["period"] = args.period
    if args.kind == "seeded-random":
        params.update(p=args.p, seed=args.seed, cap=args.cap)
    try:
        rule = generate(args.kind, args.depth, args.topology, **params)
    except RuleError as exc:
        raise ConfigError(str(exc)) from None
    try:
        _emit(rule.to_json(), args.out)
    except OSError as exc:
        raise ConfigError(f"cannot write {args.out}: {exc.strerror}") from None
    return EXIT_PASS


def cmd_dist(args) -> int:
    rule = _load_rule(args.rule)
    kind = args.metric
    if args.all is not None:
        depth = args.all
    else:
        if not args.pairs:
            raise ConfigError("give point pairs x,y or --all DEPTH")
        pairs = []
        for item in args.pairs:
            if "," not in item:
                raise ConfigError(f"pair must be x,y: {item!r}")
            x, y = (_parse_point(t, rule.topology) for t in item.split(",", 1))
            pairs.append((x, y))
        depth = args.depth or max(1, max(max(x.level, y.level) for x, y in pairs))
    if depth > max_depth():
        raise ConfigError(f"depth {depth} exceeds SNOWCIRCLE_MAX_DEPTH={max_depth()}")
    try:
        idx = MetricIndex(rule, depth, kind)
    except RuleError as exc:
        raise ConfigError(str(exc)) from None
    stream = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        if args.all is not None:
            idx.to_csv(stream, decimal=args.decimal)
        else:
            w = csv.writer(stream, lineterminator="\n")
            w.writerow(["x", "y", "dist"] + (["dist_decimal_lossy"] if args.decimal else []))
            for x, y in pairs:
                d = idx.dist(x, y)
                w.writerow([str(x), str(y), str(d)] + ([f"{float(d):.12g}"] if args.decimal else []))
    finally:
        if args.out:
            stream.close()
    return EXIT_PASS


def cmd_fold(args) -> int:
    rule = _load_rule(args.rule)
    if args.m > args.n:
        raise ConfigError("fold needs m <= n")
    pts = [_parse_point(t, rule.topology) for t in args.points]
    stream = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["x", f"F_{args.m},{args.n}(x)", f"F_{args.m}(x)", "g(F_0(x))"])
        for x in pts:
            w.writerow([str(x), str(cascade_eval(rule, args.m, args.n, x)), str(limit_eval(rule, args.m, x)),
                        str(real_coordinate(limit_eval(rule, 0, x), rule.topology))])
    finally:
        if args.out:
            stream.close()
    return EXIT_PASS


def _config_from(args) -> RunConfig:
    cfg = RunConfig(rule_files=args.rule or [], corpus=args.corpus, corpus_depth=args.corpus_depth,
                    topology=args.topology, seed=args.seed, keep_probability=args.p, cap=args.cap,
                    depth=args.depth, mstar=args.mstar, composite=not args.no_composite,
                    jobs=args.jobs or os.cpu_count() or 1, out=args.out)
    cfg.validate()
    return cfg


def cmd_verify(args) -> int:
    cfg = _config_from(args)
    rules = cfg.rules()
    reports = verify_rules(rules, cfg.depth, cfg.mstar, cfg.deltas, cfg.composite, jobs=cfg.jobs)
    config = asdict(cfg)
    config["mstar"] = f"{cfg.mstar[0]}..{cfg.mstar[1]}"
    config.pop("jobs")  # results do not depend on the degree of parallelism
    doc = verification_document(reports, config, args.detail)
    text = dumps(doc)
    try:
        if cfg.out:
            write_text(cfg.out, text)
            if args.csv:
                write_text(args.csv, "".join(targets_csv(r) for r in reports))
    except OSError as exc:
        print(f"error: cannot write report: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    for r in reports:
        status = "pass" if r.passed else "FAIL"
        print(f"{r.rule.hash[:12]} {status} components={r.trace_count} "
              f"max_ratio={doc_ratio(r.global_max_ratio)} max_delta_ratio={doc_ratio(r.global_max_delta_ratio)} "
              f"F0_lipschitz={doc_ratio(r.lipschitz.value)}")
    print(f"global_max_ratio={doc['global_max_ratio']} global_max_delta_ratio={doc['global_max_delta_ratio']} "
          f"bound={doc['bound']} pass={doc['pass']}")
    if not cfg.out:
        sys.stdout.write(text)
    return EXIT_PASS if doc["pass"] else EXIT_FAIL


def doc_ratio(q) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def cmd_lemmas(args) -> int:
    rule = _load_rule(args.rule)
    if args.depth > max_depth():
        raise ConfigError(f"depth {args.depth} exceeds SNOWCIRCLE_MAX_DEPTH={max_depth()}")
    if args.depth < 2:
        raise ConfigError("lemma suite needs depth >= 2")
    mstar = args.mstar
    if mstar is not None and args.depth >= 7:
        try:
            check_mstar_range(args.depth, mstar)
        except DepthError as exc:
            raise ConfigError(str(exc)) from None
    rows = run_suite(rule, args.depth, mstar=mstar)
    sys.stdout.write(lemma_table(rows))
    doc = lemma_document(rule, args.depth, rows)
    if args.out:
        try:
            write_text(args.out, dumps(doc))
        except OSError as exc:
            raise ConfigError(f"cannot write {args.out}: {exc.strerror}") from None
    return EXIT_PASS if doc["pass"] else EXIT_FAIL


def cmd_bench(args) -> int:
    rule = _load_rule(args.rule) if args.rule else seeded_corpus(1, 10, args.topology, args.seed)[0]
    if args.depth > max_depth():
        raise ConfigError(f"depth {args.depth} exceeds SNOWCIRCLE_MAX_DEPTH={max_depth()}")
    timings = {}
    t = time.perf_counter()
    MetricIndex(rule, args.depth, args.metric).matrix()
    timings["all_pairs"] = time.perf_counter() - t
    if args.depth >= 7:
        hi = min(args.depth - 4, args.mstar[1]) if args.mstar else args.depth - 4
        lo = args.mstar[0] if args.mstar else 3
        t = time.perf_counter()
        rep = verify_rules([rule], args.depth, (lo, hi), composite=False, jobs=1)[0]
        timings["verify"] = time.perf_counter() - t
        timings["components"] = rep.trace_count
    for k, v in timings.items():
        print(f"{k}: {v:.3f}" if isinstance(v, float) else f"{k}: {v}")
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="snowcircle", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"snowcircle {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a diameter rule file")
    g.add_argument("kind", choices=["uniform-halve", "periodic-keep", "keep-at-root", "seeded-random"])
    g.add_argument("--depth", type=int, required=True)
    g.add_argument("--topology", choices=["circle", "arc"], default="circle")
    g.add_argument("--period", type=int, default=2)
    g.add_argument("--p", type=float, default=0.5, help="keep probability")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--cap", type=int, default=3, help="max consecutive keeps")
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)

    d = sub.add_parser("dist", help="exact distances as CSV")
    d.add_argument("--rule", required=True)
    d.add_argument("--metric", type=_parse_metric, default=MetricKind.full())
    d.add_argument("--depth", type=int)
    d.add_argument("--all", type=int, metavar="DEPTH", help="all pairs of D_DEPTH")
    d.add_argument("--decimal", action="store_true", help="add lossy decimal values")
    d.add_argument("--out")
    d.add_argument("pairs", nargs="*", help="point pairs x,y such as 1/8,1/2")
    d.set_defaults(func=cmd_dist)

    f = sub.add_parser("fold", help="evaluate the folding cascade")
    f.add_argument("--rule", required=True)
    f.add_argument("--m", type=int, default=0)
    f.add_argument("--n", type=int, required=True)
    f.add_argument("--out")
    f.add_argument("points", nargs="+")
    f.set_defaults(func=cmd_fold)

    v = sub.add_parser("verify", help="Lipschitz-light sweep")
    v.add_argument("--rule", action="append")
    v.add_argument("--corpus", type=int, default=0, help="add COUNT seeded random rules")
    v.add_argument("--corpus-depth", type=int, default=10)
    v.add_argument("--topology", choices=["circle", "arc"], default="circle")
    v.add_argument("--seed", type=int, default=0, help="first corpus seed")
    v.add_argument("--p", type=float, default=0.5)
    v.add_argument("--cap", type=int, default=3)
    v.add_argument("--depth", type=int, default=12)
    v.add_argument("--mstar", type=_parse_range, default=(3, 8))
    v.add_argument("--no-composite", action="store_true")
    v.add_argument("--detail", choices=["worst", "all", "none"], default="worst",
                   help="which components carry a trace summary")
    v.add_argument("--jobs", type=int)
    v.add_argument("--out")
    v.add_argument("--csv", help="also write per-target CSV")
    v.set_defaults(func=cmd_verify)

    lm = sub.add_parser("lemmas", help="run the lemma suite")
    lm.add_argument("--rule", required=True)
    lm.add_argument("--depth", type=int, default=10)
    lm.add_argument("--mstar", type=_parse_range)
    lm.add_argument("--out")
    lm.set_defaults(func=cmd_lemmas)

    b = sub.add_parser("bench", help="time the engine")
    b.add_argument("--rule")
    b.add_argument("--depth", type=int, default=10)
    b.add_argument("--metric", type=_parse_metric, default=MetricKind.full())
    b.add_argument("--mstar", type=_parse_range)
    b.add_argument("--topology", choices=["circle", "arc"], default="circle")
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_PASS
    try:
        return args.func(args)
    except (ConfigError, RuleError, DepthError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
