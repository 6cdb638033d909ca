"""Command-line driver.

Subcommands: gen, invariant, product, scaling, box, selftest.  All output is
deterministic for a fixed configuration; randomness flows from ``--seed``.
Exit codes: 0 success, 1 failed self-test, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import boxdist, invariants, mmspace, products, suites
from .errors import BadParam, InsufficientSweep, KappaOutOfRange, MMError, Unsupported

SCHEMA = 1
SCALING_COLUMNS = [
    "n", "p", "kappa", "witness_lower", "mc_lower", "upper_thm11", "asymptotic_coeff", "elapsed_ms",
]


@dataclass
class RunConfig:
    command: str
    space: str | None = None
    gen: str | None = None
    space2: str | None = None
    gen2: str | None = None
    scale: float | None = None
    scale2: float | None = None
    kappas: list = field(default_factory=list)
    ps: list = field(default_factory=list)
    ns: list = field(default_factory=list)
    radii: list = field(default_factory=list)
    sep_kappas: list = field(default_factory=list)
    mode: str = "exact"
    grid_step: float = 0.02
    samples: int = 10_000
    seed: int = 0
    confidence: float = 0.99
    scale_exponent: float | None = None
    explicit: bool = False
    timing: bool = False
    tolerance: float | None = None
    dump_dir: str = "selftest-failures"
    out: str | None = None
    format: str = "json"
    workers: int = 1

    def provenance(self) -> dict:
        """Everything that determines the output (so not workers or the output path)."""
        d = asdict(self)
        for key in ("workers", "out", "dump_dir", "timing"):
            d.pop(key)
        return d

    def validate(self) -> None:
        for k in self.kappas:
            if not 0 < k < 1:
                raise KappaOutOfRange(f"kappa must lie in (0, 1), got {k!r}")
        for p in self.ps:
            if not p >= 1:
                raise BadParam(f"p must be >= 1, got {p!r}")
        for n in self.ns:
            if n < 1:
                raise BadParam(f"n must be >= 1, got {n!r}")
        for r in self.radii:
            if not r > 0:
                raise BadParam(f"radius must be positive, got {r!r}")
        if not self.grid_step > 0:
            raise BadParam("grid step must be positive")
        if self.samples < 0:
            raise BadParam("samples must be nonnegative")
        if not 0.5 <= self.confidence < 1:
            raise BadParam("confidence must lie in [0.5, 1)")
        if self.workers < 1:
            raise BadParam("workers must be >= 1")
        if self.mode not in ("exact", "heuristic", "upper", "auto"):
            raise BadParam(f"unknown mode {self.mode!r}")


# -- argument parsing ---------------------------------------------------------------------


def parse_floats(text: str) -> list[float]:
    out = []
    for tok in filter(None, (t.strip() for t in text.split(","))):
        out.append(math.inf if tok in ("inf", "infinity") else float(tok))
    return out


def parse_ns(text: str) -> list[int]:
    """``16,64,256`` or ``a..b`` or ``a..b:geometric[:ratio]``."""
    if ".." not in text:
        return [int(t) for t in text.split(",") if t.strip()]
    rng, _, kind = text.partition(":")
    lo_s, _, hi_s = rng.partition("..")
    lo, hi = int(lo_s), int(hi_s)
    if lo < 1 or hi < lo:
        raise argparse.ArgumentTypeError(f"bad range {text!r}")
    if not kind:
        return list(range(lo, hi + 1))
    name, _, ratio_s = kind.partition(":")
    if name != "geometric":
        raise argparse.ArgumentTypeError(f"unknown progression {name!r}")
    ratio = float(ratio_s) if ratio_s else 2.0
    if ratio <= 1:
        raise argparse.ArgumentTypeError("geometric ratio must exceed 1")
    out, v = [], float(lo)
    while round(v) <= hi:
        if not out or round(v) != out[-1]:
            out.append(int(round(v)))
        v *= ratio
    return out


def _arg_list(conv):
    def f(text):
        try:
            return conv(text)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    return f


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--space", help="space file (JSON)")
    common.add_argument("--gen", help="generator spec kind:params, e.g. k_regular:2, random:5")
    common.add_argument("--kappa", type=_arg_list(parse_floats), default=None)
    common.add_argument("--p", type=_arg_list(parse_floats), default=None)
    common.add_argument("--n", type=_arg_list(parse_ns), default=None)
    common.add_argument("--grid-step", type=float, default=0.02)
    common.add_argument("--samples", type=int, default=10_000)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--confidence", type=float, default=0.99)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--scale", type=float, default=None, help="multiply the distances of the space by t")
    common.add_argument("--out")
    common.add_argument("--format", choices=("csv", "json"), default=None)

    parser = argparse.ArgumentParser(prog="obsdiam", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen", parents=[common], help="generate a space file")
    inv = sub.add_parser("invariant", parents=[common], help="ObsDiam brackets, Sep, concentration")
    inv.add_argument("--r", type=_arg_list(parse_floats), default=None, help="radii for the concentration function")
    inv.add_argument("--sep-kappas", type=_arg_list(parse_floats), default=None)
    inv.add_argument("--mode", choices=("exact", "heuristic"), default="exact")
    prod = sub.add_parser("product", parents=[common], help="witness and closed-form bounds for X_p^n")
    prod.add_argument("--explicit", action="store_true", help="write the explicit product space instead")
    sc = sub.add_parser("scaling", parents=[common], help="bound sweep over n with log-log slopes")
    sc.add_argument("--scale-exponent", type=float, default=None, help="add columns scaled by n^-s")
    sc.add_argument("--timing", action="store_true", help="fill elapsed_ms (makes output nondeterministic)")
    box = sub.add_parser("box", parents=[common], help="box distance between two spaces")
    box.add_argument("--space2")
    box.add_argument("--gen2")
    box.add_argument("--scale2", type=float, default=None)
    box.add_argument("--mode", choices=("auto", "exact", "upper"), default="auto")
    st = sub.add_parser("selftest", parents=[common], help="run the verification suites")
    st.add_argument("--tolerance", type=float, default=None, help="override comparison tolerance")
    st.add_argument("--dump-dir", default="selftest-failures")
    st.add_argument("--timing", action="store_true", help="print per-suite run time")
    return parser


def config_from_args(args) -> RunConfig:
    defaults = {
        "invariant": dict(kappas=[0.1, 0.2, 0.4], fmt="json"),
        "product": dict(kappas=[0.2], ps=[1.0, 2.0], ns=[1, 4, 16], fmt="json"),
        "scaling": dict(kappas=[0.2], ps=[1.0, 2.0], ns=parse_ns("16..4096:geometric"), fmt="csv"),
        "box": dict(fmt="json"),
        "gen": dict(fmt="json"),
        "selftest": dict(fmt="json"),
    }[args.command]
    return RunConfig(
        command=args.command,
        space=args.space,
        gen=args.gen,
        space2=getattr(args, "space2", None),
        gen2=getattr(args, "gen2", None),
        scale=args.scale,
        scale2=getattr(args, "scale2", None),
        kappas=args.kappa if args.kappa is not None else defaults.get("kappas", []),
        ps=args.p if args.p is not None else defaults.get("ps", []),
        ns=args.n if args.n is not None else defaults.get("ns", []),
        radii=getattr(args, "r", None) or [],
        sep_kappas=getattr(args, "sep_kappas", None) or [],
        mode=getattr(args, "mode", "exact"),
        grid_step=args.grid_step,
        samples=args.samples,
        seed=args.seed,
        confidence=args.confidence,
        scale_exponent=getattr(args, "scale_exponent", None),
        explicit=getattr(args, "explicit", False),
        timing=getattr(args, "timing", False),
        tolerance=getattr(args, "tolerance", None),
        dump_dir=getattr(args, "dump_dir", "selftest-failures"),
        out=args.out,
        format=args.format or defaults["fmt"],
        workers=args.workers,
    )


# -- output helpers -----------------------------------------------------------------------


def _clean(obj):
    if isinstance(obj, float):
        return None if math.isnan(obj) else ("inf" if math.isinf(obj) else obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def to_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return repr(v)
    return str(v)


def to_csv(header: list[str], rows: list[list], summary: list[list] | None = None,
           summary_header: list[str] | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"schema={SCHEMA}"])
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    if summary is not None:
        w.writerow(["# summary"])
        w.writerow(summary_header)
        for row in summary:
            w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def emit(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        Path(cfg.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def load_space(path: str | None, gen: str | None, seed: int, factor: float | None = None,
               which: str = "--space/--gen"):
    if path and gen:
        raise BadParam(f"give only one of {which}")
    if path:
        space = mmspace.load(path)
    elif gen:
        space = mmspace.parse_generator(gen, seed=seed)
    else:
        raise BadParam(f"a space is required ({which})")
    return space if factor is None else mmspace.scale(space, factor)


# -- commands -----------------------------------------------------------------------------


def cmd_gen(cfg: RunConfig) -> int:
    emit(cfg, mmspace.dumps(load_space(cfg.space, cfg.gen, cfg.seed, cfg.scale)))
    return 0


def cmd_invariant(cfg: RunConfig) -> int:
    space = load_space(cfg.space, cfg.gen, cfg.seed, cfg.scale)
    st = mmspace.stats(space)
    report: dict = {
        "config": cfg.provenance(),
        "space": {"labels": list(space.labels), "diameter": st.diameter,
                  "min_positive_distance": st.min_positive_distance, "point_count": st.point_count},
        "obs_diam": [],
        "sep": [],
        "concentration": [],
    }
    for kappa in cfg.kappas:
        b = invariants.obs_diam_bracket(space, kappa, cfg.grid_step, seed=cfg.seed)
        fam, wit = invariants.obs_diam_lower_family(space, kappa, seed=cfg.seed)
        report["obs_diam"].append({
            "kappa": kappa, "lower": b.lower, "upper": b.upper, "method": b.method,
            "witness": {"values": [float(v) for v in wit.values], "lipschitz_constant": wit.lipschitz_constant,
                        "partial_diameter": fam},
        })
    sep_lists = [cfg.sep_kappas] if cfg.sep_kappas else [[k, k] for k in cfg.kappas]
    for ks in sep_lists:
        value, feasible = invariants.sep_report(space, ks, cfg.mode)
        entry = {"kappas": ks, "value": value, "mode": cfg.mode}
        if feasible is False:
            entry["note"] = "infeasible: no disjoint sets carry the required masses"
        report["sep"].append(entry)
    radii = cfg.radii or sorted(set(float(v) for v in space.dist.ravel() if v > 0))
    for r in radii:
        report["concentration"].append({"r": r, "value": invariants.concentration(space, r, cfg.mode), "mode": cfg.mode})
    emit(cfg, to_json(report))
    return 0


def _product_row(base, n, p, kappa):
    rep = products.witness_bound(base, n, p, kappa)
    return {
        "n": n, "p": p, "kappa": kappa, "witness_lower": rep.certified_lower, "alpha_n": rep.alpha_n,
        "beta_n": rep.beta_n, "c_n": rep.c_n, "basepoint": rep.basepoint, "certifies": rep.certifies,
        "upper_thm11": products.upper_bound(base, n, p, kappa),
        "asymptotic_coeff": products.asymptotic_lower(base, p, kappa),
    }


def cmd_product(cfg: RunConfig) -> int:
    base = load_space(cfg.space, cfg.gen, cfg.seed, cfg.scale)
    if cfg.explicit:
        if len(cfg.ns) != 1 or len(cfg.ps) != 1:
            raise BadParam("--explicit needs exactly one n and one p")
        emit(cfg, mmspace.dumps(products.product_explicit(base, cfg.ns[0], cfg.ps[0])))
        return 0
    rows = [_product_row(base, n, p, k) for p in cfg.ps for k in cfg.kappas for n in cfg.ns]
    if cfg.format == "csv":
        header = list(rows[0].keys()) if rows else []
        emit(cfg, to_csv(header, [[r[h] for h in header] for r in rows]))
    else:
        emit(cfg, to_json({"config": cfg.provenance(), "rows": rows}))
    return 0


def cmd_scaling(cfg: RunConfig) -> int:
    ns = sorted(set(cfg.ns))
    if len(ns) < 3 or ns[-1] < 10 * ns[0]:
        raise InsufficientSweep("need at least 3 distinct n values spanning a factor of 10")
    for k in cfg.kappas:
        if not 0 < k < 0.5:
            raise KappaOutOfRange(f"scaling needs kappa in (0, 1/2), got {k!r}")
    base = load_space(cfg.space, cfg.gen, cfg.seed, cfg.scale)
    header = list(SCALING_COLUMNS)
    if cfg.scale_exponent is not None:
        header += ["scaled_witness", "scaled_upper"]
    rows, summary = [], []
    for p in cfg.ps:
        for kappa in cfg.kappas:
            ws, ups = [], []
            for n in ns:
                start = time.perf_counter()
                w = products.witness_bound(base, n, p, kappa).certified_lower
                mc = None
                if cfg.samples > 0:
                    mc = products.mc_obs_lower(products.ProductHandle(base, n, p), kappa, samples=cfg.samples,
                                               seed=cfg.seed, confidence=cfg.confidence, workers=cfg.workers)
                up = products.upper_bound(base, n, p, kappa)
                coeff = products.asymptotic_lower(base, p, kappa)
                elapsed = round((time.perf_counter() - start) * 1000, 3) if cfg.timing else None
                row = [n, p, kappa, w, mc, up, coeff, elapsed]
                if cfg.scale_exponent is not None:
                    t_n = n ** (-cfg.scale_exponent)
                    row += [t_n * w, t_n * up]
                rows.append(row)
                ws.append(w)
                ups.append(up)
            dropped = sum(1 for v in ws if v <= 0)
            if dropped:
                print(f"warning: {dropped} zero witness values excluded from the fit (p={p}, kappa={kappa})",
                      file=sys.stderr)
            summary.append([p, kappa, "witness_lower", suites.loglog_slope(ns, ws), len(ns) - dropped])
            summary.append([p, kappa, "upper_thm11", suites.loglog_slope(ns, ups), len(ns)])
    sheader = ["p", "kappa", "fit", "slope", "points"]
    if cfg.format == "csv":
        emit(cfg, to_csv(header, rows, summary, sheader))
    else:
        emit(cfg, to_json({
            "config": cfg.provenance(), "schema": SCHEMA,
            "rows": [dict(zip(header, r)) for r in rows],
            "summary": [dict(zip(sheader, r)) for r in summary],
        }))
    return 0


def _box(mode: str, x, y):
    if mode == "exact":
        return boxdist.box_distance_exact(x, y), "exact"
    if mode == "upper":
        return boxdist.box_distance_upper(x, y), "upper"
    try:
        return boxdist.box_distance_exact(x, y), "exact"
    except Unsupported:
        return boxdist.box_distance_upper(x, y), "upper"


def cmd_box(cfg: RunConfig) -> int:
    x = load_space(cfg.space, cfg.gen, cfg.seed, cfg.scale)
    y = load_space(cfg.space2, cfg.gen2, cfg.seed, cfg.scale2, which="--space2/--gen2")
    res, how = _box(cfg.mode, x, y)
    report = {"config": cfg.provenance(),
              "box": {"value": res.value, "discarded_mass": res.discarded_mass, "alignment": res.alignment,
                      "method": how},
              "products": []}
    for n in cfg.ns:
        for p in cfg.ps or [1.0]:
            pres, phow = _box(cfg.mode, products.product_explicit(x, n, p), products.product_explicit(y, n, p))
            report["products"].append({
                "n": n, "p": p, "direct": pres.value, "method": phow,
                "lemma_bound": n * math.factorial(n) * res.value,
            })
    emit(cfg, to_json(report))
    return 0


def cmd_selftest(cfg: RunConfig) -> int:
    tol = suites.DEFAULT_TOL if cfg.tolerance is None else cfg.tolerance
    results = []
    for name, run in suites.SELFTEST.items():
        res = run(tol, cfg.seed)
        results.append(res)
        print(res.line(timing=cfg.timing))
    failed = [r for r in results if not r.ok]
    if failed:
        dump = Path(cfg.dump_dir)
        dump.mkdir(parents=True, exist_ok=True)
        for r in failed:
            for i, case in enumerate(r.failures):
                case = dict(case)
                space_text = case.pop("space", None)
                stem = f"{r.name}-{i:03d}"
                if space_text is not None:
                    (dump / f"{stem}.space.json").write_text(space_text, encoding="utf-8")
                    case["space_file"] = f"{stem}.space.json"
                (dump / f"{stem}.case.json").write_text(to_json(case), encoding="utf-8")
        print(f"{len(failed)} suite(s) failed; counterexamples written to {dump}/")
        return 1
    print(f"all {len(results)} suites passed")
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "invariant": cmd_invariant,
    "product": cmd_product,
    "scaling": cmd_scaling,
    "box": cmd_box,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        cfg.validate()
        return COMMANDS[cfg.command](cfg)
    except MMError as exc:
        sys.stderr.write(to_json({"error": exc.code, "message": str(exc)}))
        return 2
    except OSError as exc:
        sys.stderr.write(to_json({"error": "IOError", "message": str(exc)}))
        return 2


if __name__ == "__main__":
    sys.exit(main())
