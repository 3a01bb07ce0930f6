"""Command-line front end: verification suites, scans and the self-test.

Exit codes: 0 all pass, 1 a residual or oracle failure, 2 a configuration
or precondition error.
"""
import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

from . import identities as ids
from . import oracles, report
from .engine import Profile, gen_balanced_params
from .errors import ArtifactError, CalibrationError, PreconditionError
from .qkernel import QContext
from .weights import Convention, MultiSpin, Spin

IDENTITIES = ("sum-integral", "star-triangle", "I-transform", "v-consistency",
              "star-star", "irf-ybe", "classical-limit")
DEFAULT_Q = {"irf-ybe": 0.3}
OVERRIDE_KEYS = ("rel_tol", "quad_points", "sum_m_max", "tail_tol", "product_truncation")


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    identity: str = "sum-integral"
    seeds: list = field(default_factory=lambda: [1])
    q_values: list = field(default_factory=list)
    overrides: dict = field(default_factory=dict)
    output_path: str | None = None
    format: str = "json"
    n: int = 2
    workers: int | None = None
    figures: bool = True
    doubling: bool = False
    grid: str = ""
    scan_kind: str = "positivity"
    tail_tol: float | None = None

    def validate(self):
        if self.command not in ("verify", "scan", "selftest"):
            raise ConfigError(f"unknown command {self.command!r}")
        if self.command == "verify" and self.identity not in IDENTITIES:
            raise ConfigError(f"unknown identity {self.identity!r}; "
                              f"choose from {', '.join(IDENTITIES)}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        for q in self.q_values:
            if not (isinstance(q, (int, float)) and math.isfinite(q) and 0 < q < 1):
                raise ConfigError(f"q values must lie in (0, 1), got {q!r}")
        if self.format not in ("json", "csv"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        bad = set(self.overrides) - set(OVERRIDE_KEYS)
        if bad:
            raise ConfigError(f"unknown settings override(s): {sorted(bad)}")
        return self


def parse_seeds(text):
    """'3' -> [3], '1..10' -> [1..10], '1,4,7' -> [1, 4, 7]."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ConfigError(f"empty seed range {part!r}")
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(part))
    return out


def parse_floats(text):
    return [float(x) for x in str(text).split(",") if x.strip()]


# ------------------------------------------------------------------ instances


def _context(identity, q, overrides):
    if identity == "classical-limit":
        return None
    key = "v-consistency" if identity == "v-consistency" else identity
    return ids.default_context(key, q, **overrides)


def _error_record(identity, seed, q, ctx, exc):
    return {
        "identity": identity, "seed": seed, "q": q, "params": {},
        "lhs_re": None, "lhs_im": None, "rhs_re": None, "rhs_im": None,
        "abs_residual": None, "rel_residual": None,
        "convention_flags": [f"error={type(exc).__name__}: {exc}"],
        "settings": ctx.as_dict() if ctx is not None else {},
        "runtime_ms": 0, "pass": False,
    }


def _evaluate(identity, seed, q, ctx, n, calib):
    if identity == "sum-integral":
        ps = gen_balanced_params(seed, "six-flavor", q=q)
        return ids.check_sum_integral(ps, ctx)
    if identity == "star-triangle":
        conv = Convention(*calib)
        ps = gen_balanced_params(seed, "star-triangle", q=q)
        a, b, g, spins = ids.star_triangle_instance(ps, conv)
        return ids.check_star_triangle(a, b, g, spins, ctx, conv, seed=seed)
    if identity == "I-transform":
        ps = gen_balanced_params(seed, "I-transform", n=n, q=q, profile=Profile(divisible=True))
        return ids.check_we7_transformation(ps, ctx)
    if identity == "v-consistency":
        ps = gen_balanced_params(seed, "I-transform", n=2, q=q, profile=Profile(divisible=True))
        return ids.check_v_consistency(ps, ctx, normalization=calib)
    if identity == "star-star":
        ps = gen_balanced_params(seed, "star-star", q=q)
        corners = [MultiSpin((Spin(f.phase, f.charge),)) for f in ps.flavors]
        return ids.check_star_star(1, ps.spectral, corners, ctx, seed=seed)
    if identity == "irf-ybe":
        inst = ids.YBEInstance.from_params(gen_balanced_params(seed, "ybe", q=q))
        return ids.check_irf_ybe(inst.pairs, inst.corners, ctx, seed=seed)
    raise ConfigError(f"no runner for {identity!r}")


def run_instance(task):
    """Evaluate one (identity, seed, q) instance and return its report record."""
    identity, seed, q, overrides, n, calib, doubling = task
    if identity == "classical-limit":
        res = ids.check_classical_limit(*ids.classical_limit_instance(seed), seed=seed)
        rec = res.report.as_record()
        rec["convention_flags"] = rec["convention_flags"] + [
            "deviations=" + ",".join(f"{d:.3e}" for d in res.deviations)]
        return rec
    ctx = _context(identity, q, overrides)
    try:
        rep = _evaluate(identity, seed, q, ctx, n, calib)
        rec = rep.as_record()
        if doubling:
            fine = _evaluate(identity, seed, q, ctx.doubled(), n, calib)
            change = max(abs(fine.lhs - rep.lhs) / abs(fine.lhs),
                         abs(fine.rhs - rep.rhs) / abs(fine.rhs))
            rec["convention_flags"] = rec["convention_flags"] + [f"doubling-change={change:.3e}"]
            if not change < 1e-10:
                rec["pass"] = False
        return rec
    except PreconditionError:
        raise
    except ArtifactError as exc:
        return _error_record(identity, seed, q, ctx, exc)


def calibrate(identity, seeds, q_values, overrides):
    """One-time calibration shared by every instance of a suite."""
    q = q_values[0]
    if identity == "star-triangle":
        ctx = _context(identity, q, overrides)
        sets = [gen_balanced_params(seeds[0], "star-triangle", q=q)]
        conv, trials = ids.calibrate_star_triangle(sets, ctx)
        return (conv.sign, conv.eta, conv.normalization), trials
    if identity == "v-consistency":
        ctx = _context(identity, q, overrides)
        ps = gen_balanced_params(seeds[0], "I-transform", n=2, q=q, profile=Profile(divisible=True))
        choice, trials = ids.calibrate_i_normalization(ps, ctx)
        return choice, trials
    return None, []


def _map(tasks, workers):
    if workers == 1 or len(tasks) == 1:
        return [run_instance(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map keeps submission order, so output order is deterministic
        return list(pool.map(run_instance, tasks))


def _write(text, path):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _figure_path(path, suffix):
    if path is None or path == "-":
        return None
    root, _ = os.path.splitext(path)
    return f"{root}{suffix}.png"


def run_verify(cfg):
    q_values = cfg.q_values or [DEFAULT_Q.get(cfg.identity, 0.5)]
    calib, trials = calibrate(cfg.identity, cfg.seeds, q_values, cfg.overrides)
    if trials:
        print(f"calibration: {json.dumps(trials, default=str)}", file=sys.stderr)
    tasks = [(cfg.identity, s, q, dict(cfg.overrides), cfg.n, calib, cfg.doubling)
             for s in cfg.seeds for q in q_values]
    records = _map(tasks, cfg.workers or os.cpu_count() or 1)
    _write(report.render(records, cfg.format), cfg.output_path)
    fig = _figure_path(cfg.output_path, "_residuals")
    if cfg.figures and fig:
        report.residual_figure(records, fig)
    passed = sum(bool(r["pass"]) for r in records)
    print(f"{cfg.identity}: {passed}/{len(records)} passed", file=sys.stderr)
    return 0 if passed == len(records) else 1


def parse_grid(text):
    """'alphas=-0.1,0,0.1;angles=10;charges=0;eta=-0.5' -> PositivityGrid kwargs."""
    kwargs = {}
    for part in (text or "").split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"grid entry {part!r} is not key=value")
        key, val = (s.strip() for s in part.split("=", 1))
        if key == "alphas":
            kwargs["alphas"] = tuple(parse_floats(val))
        elif key == "angles":
            count = int(val)
            if count < 1:
                raise ConfigError("angles needs a positive count")
            kwargs["angles"] = tuple(2 * math.pi * (k + 0.5) / count for k in range(count))
        elif key == "charges":
            kwargs["charges"] = tuple(int(x) for x in val.split(","))
        elif key == "eta":
            kwargs["eta"] = float(val)
        else:
            raise ConfigError(f"unknown grid key {key!r}")
    try:
        return ids.PositivityGrid(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def run_scan(cfg):
    q_values = cfg.q_values or [0.5]
    if cfg.scan_kind == "limit":
        rows = []
        ok = True
        for seed in cfg.seeds:
            res = ids.check_classical_limit(*ids.classical_limit_instance(seed), seed=seed)
            ok &= res.report.passed
            for k, dev in zip(res.ks, res.deviations):
                rows.append({"block": 0, "seed": seed, "k": k, "q": 1 - 2.0 ** -k,
                             "deviation": dev, "flags": ""})
        _write(report.render(rows, cfg.format, report.LIMIT_FIELDS), cfg.output_path)
        fig = _figure_path(cfg.output_path, "_limit")
        if cfg.figures and fig:
            report.limit_figure(rows, fig)
        return 0 if ok else 1
    grid = parse_grid(cfg.grid)
    rows = []
    ok = True
    for block, q in enumerate(q_values):
        ctx = QContext(q, **cfg.overrides)
        res = ids.positivity_scan(grid, ctx)
        ok &= res.zero_charge_positive
        for r in res.rows:
            rows.append({"block": block, **r, "flags": "positive" if r["positive"] else ""})
        for e in res.errors:
            rows.append({"block": block, **e, "value_re": None, "value_im": None,
                         "phase": None, "positive": False, "flags": e["error"]})
    _write(report.render(rows, cfg.format, report.SCAN_FIELDS), cfg.output_path)
    fig = _figure_path(cfg.output_path, "_phase")
    if cfg.figures and fig:
        report.scan_figure(rows, fig)
    return 0 if ok else 1


def run_selftest(tail_tol=None):
    started = time.perf_counter()
    results = oracles.run(1e-15 if tail_tol is None else tail_tol)
    for r in results:
        status = "ok  " if r["ok"] else "FAIL"
        extra = f"  {r['message']}" if r["message"] else ""
        print(f"{status} {r['name']}: error {r['error']:.2e} (tol {r['tol']:.0e}){extra}")
    failed = [r["name"] for r in results if not r["ok"]]
    print(f"selftest: {len(results) - len(failed)}/{len(results)} passed "
          f"in {time.perf_counter() - started:.2f} s")
    if failed:
        print("failed: " + ", ".join(failed))
        return 1
    return 0


# ---------------------------------------------------------------------- parser


def build_parser():
    p = argparse.ArgumentParser(prog="artifact", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
        sp.add_argument("--seeds", help="seed, list or range such as 1..10")
        sp.add_argument("--q", help="comma-separated nome values")
        sp.add_argument("--out", help="report file (default stdout)")
        sp.add_argument("--format", choices=("json", "csv"))
        sp.add_argument("--no-figures", action="store_true", help="skip the PNG figures")

    v = sub.add_parser("verify", help="run an identity checker over seeds and q values")
    common(v)
    v.add_argument("--identity", help="|".join(IDENTITIES))
    v.add_argument("--n", type=int, help="rank for I-transform (1 or 2)")
    v.add_argument("--tol", type=float, help="relative tolerance")
    v.add_argument("--nodes", type=int, help="quadrature nodes")
    v.add_argument("--mmax", type=int, help="charge cutoff")
    v.add_argument("--workers", type=int, help="worker processes (default: CPU count)")
    v.add_argument("--doubling", action="store_true",
                   help="also evaluate at doubled settings and require < 1e-10 change")

    s = sub.add_parser("scan", help="positivity or classical-limit scan tables")
    common(s)
    s.add_argument("--grid", default="", help="e.g. 'alphas=-0.1,0,0.1;angles=10;charges=0'")
    s.add_argument("--kind", choices=("positivity", "limit"), default=None)

    t = sub.add_parser("selftest", help="kernel and engine oracle suite")
    t.add_argument("--tail-tol", type=float, help="override the Pochhammer tail tolerance")
    return p


def config_from_args(args):
    base = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                base = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(base, dict):
            raise ConfigError("config file must hold a JSON object")
        known = {f.name for f in fields(RunConfig)}
        unknown = set(base) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    base["command"] = args.command
    if isinstance(base.get("seeds"), str):
        base["seeds"] = parse_seeds(base["seeds"])
    overrides = dict(base.get("overrides", {}))
    if args.command == "selftest":
        base["tail_tol"] = args.tail_tol
        return RunConfig(**base).validate()
    if args.seeds is not None:
        base["seeds"] = parse_seeds(args.seeds)
    if args.q is not None:
        base["q_values"] = parse_floats(args.q)
    if args.out is not None:
        base["output_path"] = args.out
    if args.format is not None:
        base["format"] = args.format
    if args.no_figures:
        base["figures"] = False
    if args.command == "verify":
        for flag, key in (("tol", "rel_tol"), ("nodes", "quad_points"), ("mmax", "sum_m_max")):
            val = getattr(args, flag)
            if val is not None:
                overrides[key] = val
        for key in ("identity", "n", "workers"):
            if getattr(args, key) is not None:
                base[key] = getattr(args, key)
        if args.doubling:
            base["doubling"] = True
    else:
        if args.grid:
            base["grid"] = args.grid
        if args.kind is not None:
            base["scan_kind"] = args.kind
    base["overrides"] = overrides
    try:
        return RunConfig(**base).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = config_from_args(args)
        if cfg.command == "selftest":
            return run_selftest(cfg.tail_tol)
        if cfg.command == "verify":
            return run_verify(cfg)
        return run_scan(cfg)
    except (ConfigError, PreconditionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CalibrationError as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
