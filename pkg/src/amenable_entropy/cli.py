"""``amenable-entropy`` command-line front end.

Subcommands ``folner``, ``entropy`` and ``examples`` each print a summary
table and can write a JSON report (``--out``) and a CSV trace (``--csv``).

Exit codes: 0 success, 1 check failure, 2 usage error, 3 resource limit.
"""
from __future__ import annotations

import argparse
import dataclasses
import datetime as _dt
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .errors import DomainError, InvariantViolation, ResourceError

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3

CSV_HELP = """CSV columns:
  folner   (growth)      n,size,size_over_log_n
  entropy                n,count,rate            (capacity trace log(count)/|F_n|)
  examples --suite tt    trial,R_over_L          (one row per random walk)
  examples --suite xab   n,density               (|H cap F_n| / |F_n|)
"""


@dataclass
class RunConfig:
    """Everything a run depends on; embedded verbatim in every report."""

    group: str = "z"
    family: str = "box"
    alphabet: int = 2
    subset: str = "full"            # full | xab | random | tree | sample
    alpha: float = 0.25
    beta: float = 0.75
    tree_file: Optional[str] = None
    sample_file: Optional[str] = None
    keep: float = 0.7
    depth: int = 8
    N_schedule: Optional[list] = None
    inflation: int = 0
    tail_fraction: float = 1.0 / 3.0
    tol: float = 1e-6
    seed: int = 0
    node_budget: int = 2 ** 24
    nmax: int = 100
    mmax: int = 8
    check: str = "all"
    suite: str = "all"
    trials: int = 200
    length: int = 10_000
    out: Optional[str] = None
    csv: Optional[str] = None

    def validate(self) -> None:
        if self.alphabet < 2 or self.alphabet > 36:
            raise DomainError("alphabet size must lie in 2..36")
        if self.depth < 0:
            raise DomainError("depth must be non-negative")
        if not 0 < self.tail_fraction <= 1:
            raise DomainError("tail fraction must lie in (0, 1]")
        if not 0 <= self.alpha <= self.beta <= 1:
            raise DomainError("need 0 <= alpha <= beta <= 1")
        for name in ("tree_file", "sample_file"):
            path = getattr(self, name)
            if path is not None and not os.path.exists(path):
                raise DomainError(f"{name} {path!r} does not exist")
        if self.subset == "tree" and self.tree_file is None:
            raise DomainError("subset 'tree' needs --tree-file")
        if self.subset == "sample" and self.sample_file is None:
            raise DomainError("subset 'sample' needs --sample-file")

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


# -- helpers ----------------------------------------------------------------------


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (tuple, set, frozenset)):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _clean(o):
    """Replace non-finite floats so the JSON stays standard."""
    if isinstance(o, float) and not math.isfinite(o):
        return None if math.isnan(o) else ("inf" if o > 0 else "-inf")
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_report(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, sort_keys=True, default=_json_default) + "\n"


def _report(command: str, cfg: RunConfig, results: dict, checks: list) -> dict:
    return {
        "schema": 1,
        "command": command,
        "version": __version__,
        "config": cfg.to_json(),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "results": results,
        "checks": [{"name": n, "passed": bool(p)} for n, p in checks],
        "passed": all(p for _, p in checks),
    }


def _table(checks: list, out=sys.stdout) -> None:
    width = max((len(n) for n, _ in checks), default=10)
    for name, ok in checks:
        print(f"  {name:<{width}}  {'PASS' if ok else 'FAIL'}", file=out)


def _sequence(cfg: RunConfig):
    from .group import folner_family
    return folner_family(f"{cfg.group}:{cfg.family}")


def _subset_tree(cfg: RunConfig, seq):
    from .shift import (CylinderTree, DensitySet, PatternConfiguration, PointSample, build_tree,
                        full_shift, random_tree, xab_predicate)
    if cfg.subset == "full":
        return build_tree(full_shift(cfg.alphabet), cfg.depth, seq, cfg.node_budget), None
    if cfg.subset == "xab":
        H = DensitySet.geometric_blocks(seq, cfg.alpha, cfg.beta)
        return build_tree(xab_predicate(H), cfg.depth, seq, cfg.node_budget), H
    if cfg.subset == "random":
        rng = np.random.Generator(np.random.Philox(cfg.seed))
        return random_tree(seq, cfg.alphabet, cfg.depth, cfg.keep, rng, cfg.node_budget), None
    if cfg.subset == "tree":
        with open(cfg.tree_file) as fh:
            tree = CylinderTree.from_json(fh.read(), seq)
        if tree.depth < cfg.depth:
            raise DomainError(f"tree file has depth {tree.depth} < requested {cfg.depth}")
        return tree.truncate(cfg.depth), None
    if cfg.subset == "sample":
        with open(cfg.sample_file) as fh:
            data = json.load(fh)
        W = seq[cfg.depth]
        pts = [PatternConfiguration.from_pattern(W, p, cfg.alphabet) for p in data["points"]]
        return build_tree(PointSample(pts), cfg.depth, seq), None
    raise DomainError(f"unknown subset {cfg.subset!r}")


def _params(cfg: RunConfig, depth: int):
    from .estimators import EstimatorParams
    if cfg.N_schedule is None:
        return EstimatorParams.default(depth, inflation=cfg.inflation,
                                       tail_fraction=cfg.tail_fraction, tol=cfg.tol)
    return EstimatorParams(depth, tuple(cfg.N_schedule), cfg.inflation, cfg.tail_fraction, cfg.tol)


# -- commands ---------------------------------------------------------------------


def cmd_folner(cfg: RunConfig):
    from .group import (growth_diagnostic, invariance_defect, k_boundary, regular_system_check,
                        tempered_prefix_constant)
    seq = _sequence(cfg)
    wanted = {"all", "growth", "tempered", "boundary", "regular"}
    if cfg.check not in wanted:
        raise DomainError(f"unknown check {cfg.check!r}")
    res, checks, csv = {"family": seq.identifier}, [], None
    run = (lambda c: cfg.check in ("all", c))
    if run("growth"):
        g = growth_diagnostic(seq, cfg.nmax)
        res["growth"] = {"n": g.n, "ratios": g.ratios, "monotone_tail": g.monotone_tail}
        rows = ["n,size,size_over_log_n"]
        rows += [f"{n},{seq.size(int(n))},{r!r}" for n, r in zip(g.n.tolist(), g.ratios.tolist())]
        csv = "\n".join(rows) + "\n"
    if run("tempered"):
        res["tempered_constant"] = tempered_prefix_constant(seq, min(cfg.mmax, cfg.nmax))
    if run("boundary"):
        m = min(cfg.mmax, cfg.nmax)
        K = seq[1]
        res["invariance_defect"] = [invariance_defect(seq[n], K) for n in range(1, m + 1)]
        res["boundary_sizes"] = [len(k_boundary(seq[n], K)) for n in range(1, m + 1)]
    if run("regular"):
        r = regular_system_check(seq, cfg.mmax)
        res["regular"] = {"passed": r.passed, "witness": r.witness, "ratio_tail": r.ratio_tail,
                          "ratio_condition": r.ratio_condition}
        checks.append(("F_m F_n inside F_{m+n}", r.passed))
    return res, checks, csv


def cmd_entropy(cfg: RunConfig):
    from .estimators import entropy_chain_check
    seq = _sequence(cfg)
    tree, _ = _subset_tree(cfg, seq)
    params = _params(cfg, tree.depth)
    chain = entropy_chain_check(tree, seq, params, strict=False)
    res = {"tree": {"levels": tree.level_sizes, "alphabet_size": tree.alphabet_size},
           "params": params.to_json(), "bowen": chain.bowen, "packing": chain.packing,
           "capacity": chain.capacity, "chain": chain.to_json()}
    checks = [("bowen <= packing", chain.bowen <= chain.packing + chain.tol),
              ("packing <= capacity", chain.passed)]
    return res, checks, chain.capacity_trace.to_csv()


def _suite_tt(cfg: RunConfig):
    from .worked_examples import (block_walk_limits, geometric_block_walk, srw_range_statistics,
                                  tt_fiber_entropies)
    L = max(cfg.length, 100)
    ones = tt_fiber_entropies(np.ones(L, dtype=np.int64), L)
    alt = tt_fiber_entropies(np.tile([-1, 1], 50), 100)
    Lb = 4 ** 7 - 1
    blk = tt_fiber_entropies(geometric_block_walk(Lb), Lb, tail_fraction=0.75)
    up, low = block_walk_limits()
    expected_gap = (up - low) * math.log(2)
    st = srw_range_statistics(cfg.trials, cfg.length, cfg.seed)
    res = {"all_ones": ones.to_json(), "alternating": alt.to_json(), "block": blk.to_json(),
           "block_expected_gap": expected_gap, "random_walk": st.to_json()}
    checks = [("all-ones fiber regular at log 2", ones.regular and ones.packing == math.log(2)),
              ("alternating fiber <= log 2 / 50", alt.packing <= math.log(2) / 50),
              ("block fiber non-regular", (not blk.regular) and abs(blk.gap - expected_gap) < 0.05),
              ("random-walk mean R/L < 0.05", st.mean < 0.05)]
    return res, checks, st.to_csv()


def _suite_xab(cfg: RunConfig):
    from .estimators import EstimatorParams
    from .group import centered_boxes
    from .shift import DensitySet, density_counts
    from .worked_examples import xab_oracle
    seq = centered_boxes(1)
    H = DensitySet.geometric_blocks(seq, cfg.alpha, cfg.beta)
    params = (EstimatorParams(cfg.depth, tuple(cfg.N_schedule)) if cfg.N_schedule else None)
    rep = xab_oracle(H, cfg.depth, params, seq)
    counts, sizes = density_counts(H, seq, cfg.depth)
    csv = "n,density\n" + "".join(f"{n},{(c / s)!r}\n" for n, (c, s) in
                                  enumerate(zip(counts.tolist(), sizes.tolist())))
    checks = [("count_n = 2^|H cap F_n|", rep.counts_exact), ("bowen = inf density * log 2", rep.bowen_ok),
              ("packing = sup density * log 2", rep.packing_ok)]
    return rep.to_json(), checks, csv


def _suite_variational(cfg: RunConfig):
    from .group import centered_boxes
    from .measures import Bernoulli, XabMeasure, variational_gap
    from .shift import DensitySet, build_tree, full_shift, xab_predicate
    from .estimators import EstimatorParams
    seq = centered_boxes(1)
    full = build_tree(full_shift(2), 8, seq)
    r1 = variational_gap(full, [Bernoulli([0.5, 0.5])], seed=cfg.seed, strict=False)
    H = DensitySet.geometric_blocks(seq, cfg.alpha, cfg.beta)
    xt = build_tree(xab_predicate(H), 12, seq)
    r2 = variational_gap(xt, [XabMeasure(H)], params=EstimatorParams(12, (1, 2, 3)),
                         seed=cfg.seed, strict=False)
    res = {"full_shift": r1.to_json(), "xab": r2.to_json()}
    checks = [("full shift |gap| < 0.05", abs(r1.gap) < 0.05), ("xab |gap| < 0.05", abs(r2.gap) < 0.05),
              ("local <= packing (full)", r1.lower_bound_holds),
              ("local <= packing (xab)", r2.lower_bound_holds)]
    return res, checks, None


def _suite_factor(cfg: RunConfig):
    from .group import centered_boxes
    from .shift import build_tree, full_shift
    from .worked_examples import BlockCode, factor_inequality_check
    seq = centered_boxes(1)
    T = build_tree(full_shift(4), 4, seq)
    rep = factor_inequality_check(BlockCode.symbol_map([0, 1, 0, 1]), T, seed=cfg.seed, strict=False)
    checks = [("image <= source", rep.left_ok), ("source <= image + fiber", rep.right_ok)]
    return {"mod2": rep.to_json()}, checks, None


SUITES = {"tt": _suite_tt, "xab": _suite_xab, "variational": _suite_variational,
          "factor": _suite_factor}


def cmd_examples(cfg: RunConfig):
    names = list(SUITES) if cfg.suite == "all" else [cfg.suite]
    if any(n not in SUITES for n in names):
        raise DomainError(f"unknown suite {cfg.suite!r}; choose from {sorted(SUITES)} or 'all'")
    res, checks, csv = {}, [], None
    for n in names:
        r, c, t = SUITES[n](cfg)
        res[n] = r
        checks += [(f"{n}: {name}", ok) for name, ok in c]
        csv = csv if csv is not None else t
    return res, checks, csv


COMMANDS = {"folner": cmd_folner, "entropy": cmd_entropy, "examples": cmd_examples}


# -- argument parsing -------------------------------------------------------------------


def _schedule_arg(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad schedule {text!r}; use e.g. 1,2,3") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="amenable-entropy", description=__doc__.splitlines()[0],
                                epilog=CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS  # unset flags leave the config file / defaults alone
    common.add_argument("--config", help="JSON file with RunConfig fields", default=S)
    common.add_argument("--out", help="write the JSON report here", default=S)
    common.add_argument("--csv", help="write the CSV trace here", default=S)
    common.add_argument("--seed", type=int, default=S)
    common.add_argument("--quiet", action="store_true", default=S)
    common.add_argument("--group", default=S, help="z, z2, ... or dihedral")
    common.add_argument("--family", default=S, help="box, interval or ball")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("folner", parents=[common], help="Følner sequence diagnostics",
                       epilog=CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    f.add_argument("--nmax", type=int, default=S)
    f.add_argument("--mmax", type=int, default=S)
    f.add_argument("--check", default=S, help="all, growth, tempered, boundary or regular")

    est = argparse.ArgumentParser(add_help=False)
    est.add_argument("--depth", type=int, default=S)
    est.add_argument("--N", dest="N_schedule", type=_schedule_arg, default=S,
                     help="comma-separated start levels")
    est.add_argument("--alpha", type=float, default=S)
    est.add_argument("--beta", type=float, default=S)

    e = sub.add_parser("entropy", parents=[common, est], help="Bowen / packing / capacity estimates",
                       epilog=CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    e.add_argument("--alphabet", type=int, default=S)
    e.add_argument("--subset", default=S, help="full, xab, random, tree or sample")
    e.add_argument("--tree-file", dest="tree_file", default=S)
    e.add_argument("--sample-file", dest="sample_file", default=S,
                   help='JSON {"points": [[symbols on F_depth], ...]}')
    e.add_argument("--keep", type=float, default=S)
    e.add_argument("--inflation", type=int, default=S)
    e.add_argument("--tail", dest="tail_fraction", type=float, default=S)
    e.add_argument("--tol", type=float, default=S)
    e.add_argument("--budget", dest="node_budget", type=int, default=S)

    x = sub.add_parser("examples", parents=[common, est], help="oracle suites",
                       epilog=CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    x.add_argument("--suite", default=S, help="tt, xab, variational, factor or all")
    x.add_argument("--trials", type=int, default=S)
    x.add_argument("--len", dest="length", type=int, default=S)
    return p


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if getattr(ns, "config", None):
        try:
            with open(ns.config) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise DomainError(f"cannot read config {ns.config!r}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise DomainError(f"config {ns.config!r} is not valid JSON: {exc}") from None
    overrides = {k: v for k, v in vars(ns).items() if k not in ("command", "config", "quiet")}
    data.update(overrides)
    if ns.command == "examples" and "depth" not in data:
        data["depth"] = 12
    cfg = RunConfig.from_json(data)
    cfg.validate()
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    quiet = getattr(ns, "quiet", False)
    try:
        cfg = resolve_config(ns)
        results, checks, csv = COMMANDS[ns.command](cfg)
    except ResourceError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except InvariantViolation as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (DomainError, TypeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = _report(ns.command, cfg, results, checks)
    if cfg.out:
        write_atomic(cfg.out, dump_report(report))
    if cfg.csv and csv is not None:
        write_atomic(cfg.csv, csv)
    if not quiet:
        print(f"{ns.command}: {'PASS' if report['passed'] else 'FAIL'}")
        _table(checks)
        if not cfg.out:
            print(dump_report({k: report[k] for k in ("results",)}), end="")
    return EXIT_OK if report["passed"] else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
