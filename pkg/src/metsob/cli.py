"""Command line interface: ``metsob <command> ...``.

Commands
  gen       generate a domain point cloud (and optionally a field corpus)
  whitney   build a Whitney cover, optionally verify it
  trace     dyadic trace report of an interior field
  extend    extend a boundary field (linear Besov or layered L^p)
  run       run experiments E1..E6, write report.json and tables.csv
  freeze    measure and write the frozen constants
  check     compare fresh measurements with the frozen constants
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

from . import experiments as ex
from .corpus import random_corpus, save_corpus
from .domains import DomainKind, DomainSpec, generate
from .extension import besov_extension_report, extend_lp
from .functionals import set_threads
from .space import Region, load_field, load_space, save_field, save_space
from .trace import trace_field
from .whitney import build_cover, check_cover, load_cover, save_cover


def _dump(obj, path=None) -> None:
    text = json.dumps(obj, indent=1, sort_keys=True, default=ex._jsonable) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def cmd_gen(a) -> int:
    spec = DomainSpec(DomainKind(a.domain), a.res, a.bres, a.eps, a.n)
    sp = generate(spec)
    save_space(sp, a.out)
    if a.fields:
        region = Region.parse(a.region)
        where = a.corpus_dir or str(Path(a.out).with_suffix("")) + "_corpus"
        save_corpus(sp, random_corpus(sp, region, a.fields, a.seed), where, a.seed)
    _dump(dict(points=int(sp.n), interior=int((~sp.is_boundary).sum()),
               boundary=int(sp.is_boundary.sum()), spacing=sp.spacing))
    return 0


def cmd_whitney(a) -> int:
    sp = load_space(a.space)
    cover = build_cover(sp)
    save_cover(cover, a.out)
    out = dict(balls=len(cover), j0=cover.j0, overlap_bound=cover.overlap_bound)
    status = 0
    if a.check:
        out["check"] = check_cover(sp, cover)
        status = 0 if out["check"]["passed"] else 1
    _dump(out)
    return status


def cmd_trace(a) -> int:
    sp = load_space(a.space)
    u = load_field(sp, a.field)
    rep = trace_field(sp, u, a.p, a.k_max, alphas=a.alpha or ())
    _dump(dict(schema=1, **rep.to_dict()), a.out)
    if a.trace_out:
        save_field(sp, rep.trace, a.trace_out)
    return 0


def cmd_extend(a) -> int:
    sp = load_space(a.space)
    cover = load_cover(a.cover) if a.cover else build_cover(sp)
    f = load_field(sp, a.bfield)
    if a.mode == "besov":
        rep = besov_extension_report(sp, cover, f, a.p, a.vartheta)
    else:
        rep = extend_lp(sp, cover, f, a.p, a.k_max, a.theta)
    _dump(dict(schema=1, mode=a.mode, **rep.to_dict()), a.out)
    if a.field_out:
        save_field(sp, rep.F, a.field_out)
    return 0


def cmd_run(a) -> int:
    names = list(ex.EXPERIMENTS) if a.experiment in (None, "all") else a.experiment.split(",")
    results = []
    for name in names:
        kw = dict(seed=a.seed)
        if a.res:
            if name.startswith("E6"):
                kw["resolution"] = a.res[0]
            else:
                kw["resolutions"] = a.res
        for key in ("p", "eps", "n"):
            v = getattr(a, key)
            if v is not None:
                kw[key] = v
        results.append(ex.run_experiment(name, **kw))
    ex.write_outputs(results, a.out)
    _dump({r.experiment: r.passed for r in results})
    return 0 if all(r.passed for r in results) else 1


def cmd_freeze(a) -> int:
    vals = ex.freeze(a.out, a.seed, a.only)
    _dump(dict(path=str(a.out or ex.constants_path()), constants=vals))
    return 0


def cmd_check(a) -> int:
    rep = ex.check_constants(a.constants, a.seed, a.only)
    _dump(rep)
    return 0 if rep["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="metsob", description=__doc__.splitlines()[0])
    ap.add_argument("--threads", type=int, default=1, help="worker threads for pair sweeps")
    ap.add_argument("--seed", type=int, default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a domain point cloud")
    g.add_argument("--domain", required=True, choices=[k.value for k in DomainKind])
    g.add_argument("--res", type=int, required=True)
    g.add_argument("--bres", type=int, default=None)
    g.add_argument("--eps", type=float, default=0.25)
    g.add_argument("--n", type=int, default=2)
    g.add_argument("--out", required=True)
    g.add_argument("--fields", type=int, default=0, help="also write a random corpus of this size")
    g.add_argument("--region", default="bd")
    g.add_argument("--corpus-dir", default=None)
    g.set_defaults(func=cmd_gen)

    w = sub.add_parser("whitney", help="build a Whitney cover")
    w.add_argument("--space", required=True)
    w.add_argument("--out", required=True)
    w.add_argument("--check", action="store_true")
    w.set_defaults(func=cmd_whitney)

    t = sub.add_parser("trace", help="dyadic trace report")
    t.add_argument("--space", required=True)
    t.add_argument("--field", required=True)
    t.add_argument("--p", type=float, default=2.0)
    t.add_argument("--k-max", type=int, default=12)
    t.add_argument("--alpha", type=float, action="append")
    t.add_argument("--out", default=None)
    t.add_argument("--trace-out", default=None)
    t.set_defaults(func=cmd_trace)

    e = sub.add_parser("extend", help="extend a boundary field")
    e.add_argument("--mode", choices=["besov", "lp"], default="besov")
    e.add_argument("--space", required=True)
    e.add_argument("--cover", default=None)
    e.add_argument("--bfield", required=True)
    e.add_argument("--p", type=float, default=2.0)
    e.add_argument("--k-max", type=int, default=12)
    e.add_argument("--vartheta", type=float, default=None)
    e.add_argument("--theta", type=float, default=None)
    e.add_argument("--out", default=None)
    e.add_argument("--field-out", default=None)
    e.set_defaults(func=cmd_extend)

    r = sub.add_parser("run", help="run experiments")
    r.add_argument("--experiment", default="all", help="E1..E6, comma separated, or all")
    r.add_argument("--res", type=int, nargs="+", default=None)
    r.add_argument("--p", type=float, default=None)
    r.add_argument("--eps", type=float, default=None)
    r.add_argument("--n", type=int, default=None)
    r.add_argument("--out", default="results")
    r.set_defaults(func=cmd_run)

    f = sub.add_parser("freeze", help="measure and write frozen constants")
    f.add_argument("--out", default=None, help="defaults to $METSOB_CONSTANTS or the packaged file")
    f.add_argument("--only", nargs="+", default=None)
    f.set_defaults(func=cmd_freeze)

    c = sub.add_parser("check", help="compare measurements with frozen constants")
    c.add_argument("--constants", default=None)
    c.add_argument("--only", nargs="+", default=None)
    c.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    set_threads(args.threads)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return args.func(args)
    except (ValueError, OSError, KeyError, IndexError, AssertionError) as exc:
        sys.stderr.write(json.dumps(dict(error=type(exc).__name__, message=str(exc))) + "\n")
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
