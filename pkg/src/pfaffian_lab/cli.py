"""Command-line entry point.

Exit status: 0 when every check passes, 1 when a statistical or deterministic
check fails, 2 on usage or configuration errors.
"""
from __future__ import annotations

import argparse
import math
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from . import __version__, config, formulas, ginibre, report, verify
from . import rng as rngmod
from . import simulate as sim
from .errors import ConfigError, PfaffianLabError
from .estimators import Accumulator
from .formulas import Model, Pattern, PatternSpec, TestFunction
from .pfaffian import pf_enumerate, pf_expand, pf_stable, read_matrix_file

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return config.parse_floats(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _fmt_scalar(v) -> str:
    if isinstance(v, Fraction):
        return str(v)
    return report.fmt(float(v))


def parse_test_function(text: str) -> TestFunction:
    """``zero``, ``one``, ``gaussian[:width[:center]]``, ``indicator:a:b`` or ``parity:a,b,...``."""
    name, _, rest = text.partition(":")
    args = [a for a in rest.split(":") if a] if rest else []
    try:
        if name in ("zero", "one"):
            return getattr(TestFunction, name)()
        if name == "gaussian":
            return TestFunction.gaussian(*(float(a) for a in args))
        if name == "indicator" and len(args) == 2:
            return TestFunction.indicator(float(args[0]), float(args[1]))
        if name == "parity" and len(args) == 1:
            return TestFunction.parity(config.parse_floats(args[0]))
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad test function {text!r}: {exc}") from None
    raise UsageError(f"unknown test function {text!r}")


# --- pf -----------------------------------------------------------------------

def cmd_pf(args) -> int:
    a = read_matrix_file(args.matrixfile)
    algo = {"enumerate": pf_enumerate, "expand": pf_expand, "stable": pf_stable}[args.algo]
    print(_fmt_scalar(algo(a)))
    return EXIT_OK


# --- predict --------------------------------------------------------------------

def cmd_predict(args) -> int:
    f = args.formula
    if f == "rho":
        print(report.fmt(formulas.rho(args.points, args.t, args.model)))
    elif f == "pattern":
        spec = PatternSpec(tuple(args.endpoints), Pattern(args.pattern), args.t, args.model)
        print(report.fmt(formulas.pattern_probability(spec)))
    elif f == "moment":
        print(report.fmt(formulas.product_moment(args.points, args.t, parse_test_function(args.g))))
    elif f == "asymptotic":
        print(report.fmt(formulas.asymptotic_density(args.points, args.t, args.model)))
    elif f == "jmatrix":
        j = formulas.j_matrix(args.n)
        for row in j.matrix.to_list():
            print(" ".join(str(v) for v in row))
        print(f"Pf = {j.pfaffian}")
    elif f == "lemma":
        chk = formulas.small_separation_check(args.points, args.eps)
        print(f"ratio = {report.fmt(chk.ratio)}")
        print(f"limit = {report.fmt(chk.limit)}")
        print(f"gap = {report.fmt(chk.gap)}")
    return EXIT_OK


# --- simulate -------------------------------------------------------------------

EVENT_KINDS = ("extinct_by", "count", "empty_intervals", "parity", "product_g", "misses_span",
               "span_parity", "pattern", "density")


class SimulationPlan:
    """A simulation described by a config mapping.

    Keys: ``simulate.{model,dt,t_end,replicates,master_seed,observation_window,buffer,threads}``,
    ``init.{kind,points,intensity,window,spacing,thin}`` and one ``event.<name> = <kind> <args>``
    per estimated functional, optionally with ``predict.<name> = <value>``.
    """

    def __init__(self, cfg: dict[str, str]):
        self.cfg = cfg
        s = config.Section(cfg, "simulate")
        i = config.Section(cfg, "init")
        try:
            self.model = formulas.as_model(s.get_str("model", "coalescing"))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        self.run_cfg = sim.RunConfig(
            dt=s.get_float("dt", 1e-3), t_end=s.get_float("t_end", 1.0),
            replicates=s.get_int("replicates", 1000), master_seed=s.get_int("master_seed", 0),
            observation_window=tuple(s.get_floats("observation_window", [-20.0, 20.0])),
            buffer=s.get_float("buffer", 6.0), threads=s.get_int("threads", 0))
        self.kind = i.get_str("kind", "explicit")
        self.points: Optional[tuple] = None
        self.intensity = i.get_float("intensity", 10.0)
        if self.kind == "explicit":
            self.points = tuple(i.get_floats("points", []))
            self.ic = sim.ExplicitList(self.points)
        elif self.kind == "poisson":
            self.ic = sim.Poisson(self.intensity, tuple(i.get_floats("window", [-26.0, 26.0])))
        elif self.kind == "lattice":
            self.ic = sim.Lattice(i.get_float("spacing", 1.0), tuple(i.get_floats("window", [-26.0, 26.0])))
        elif self.kind == "entrance":
            self.ic = sim.entrance_initial_condition(self.run_cfg, self.model, self.intensity,
                                                     self.run_cfg.t_end)
        else:
            raise ConfigError(f"init.kind must be explicit, poisson, lattice or entrance, not {self.kind!r}")
        thin_p = i.get_float("thin")
        if thin_p is not None:
            self.ic = sim.Thinned(self.ic, thin_p)
        used = s.used | i.used
        self.events: dict = {}
        self.predicted: dict = {}
        for key, value in cfg.items():
            if key.startswith("event."):
                name = key[len("event."):]
                self.events[name] = self._event(name, value)
                used.add(key)
        for key, value in cfg.items():
            if key.startswith("predict."):
                name = key[len("predict."):]
                if name not in self.events:
                    raise ConfigError(f"{key} has no matching event.{name}")
                try:
                    self.predicted[name] = float(value)
                except ValueError:
                    raise ConfigError(f"{key}: not a number: {value!r}") from None
                used.add(key)
        config.reject_unknown(cfg, used)
        if not self.events:
            raise ConfigError("no event.<name> entries: nothing to estimate")
        for name, (_, pred) in list(self.events.items()):
            if name not in self.predicted and pred is not None:
                self.predicted[name] = pred

    def _event(self, name: str, spec: str):
        """Return ``(functional, automatic prediction or None)``."""
        kind, _, rest = spec.strip().partition(" ")
        rest = rest.strip()
        t = self.run_cfg.t_end
        ann = self.model is Model.ANNIHILATING
        entrance = self.kind == "entrance"
        explicit = self.kind == "explicit"
        try:
            if kind == "extinct_by":
                s = float(rest) if rest else t
                pred = (formulas.product_moment(self.points, s, TestFunction.zero())
                        if explicit and ann and self.points else None)
                return sim.ExtinctBy(s), pred
            if kind == "product_g":
                g = parse_test_function(rest or "gaussian")
                pred = formulas.product_moment(self.points, t, g) if explicit and ann and self.points else None
                return sim.ProductG(g), pred
            if kind == "count":
                a, b = config.parse_floats(rest)
                pred = self._density() * (b - a) if entrance else None
                return sim.Count(a, b), pred
            if kind == "density":
                lo, hi = self.run_cfg.observation_window
                width = hi - lo
                return (lambda s_, lo=lo, hi=hi, w=width: s_.count_in(lo, hi) / w), (
                    self._density() if entrance else None)
            if kind in ("empty_intervals", "parity"):
                ends = tuple(config.parse_floats(rest))
                pred = None
                # empty_intervals under coalescing and parity under annihilating
                # share the alternate-empty Pfaffian
                if entrance and (kind == "parity") == ann:
                    pred = formulas.pattern_probability(
                        PatternSpec(ends, Pattern.ALTERNATE_EMPTY, t, self.model))
                ev = sim.EmptyIntervals(ends) if kind == "empty_intervals" else sim.Parity(ends)
                return ev, pred
            if kind == "pattern":
                pat, _, ends_text = rest.partition(" ")
                ends = tuple(config.parse_floats(ends_text))
                pred = None
                if entrance and not (ann and Pattern(pat) is Pattern.ALTERNATE_EMPTY):
                    pred = formulas.pattern_probability(PatternSpec(ends, Pattern(pat), t, self.model))
                return sim.IntervalPattern(ends, Pattern(pat).value), pred
            if kind == "misses_span":
                return sim.MissesSpan(tuple(config.parse_floats(rest))), None
            if kind == "span_parity":
                return sim.SpanParity(tuple(config.parse_floats(rest))), None
        except (ValueError, UsageError) as exc:
            raise ConfigError(f"event.{name}: {exc}") from None
        raise ConfigError(f"event.{name}: unknown kind {kind!r} (expected one of {', '.join(EVENT_KINDS)})")

    def _density(self) -> float:
        d = 1.0 / math.sqrt(math.pi * self.run_cfg.t_end)
        return 0.5 * d if self.model is Model.ANNIHILATING else d

    def execute(self):
        funcs = {k: v[0] for k, v in self.events.items()}
        runs = sim.run(self.ic, self.model, self.run_cfg)
        return list(sim.estimate_many(funcs, runs, self.predicted).values())


def cmd_simulate(args) -> int:
    cfg = config.load(args.config)
    if args.seed is not None:
        cfg["simulate.master_seed"] = str(args.seed)
    if args.threads is not None:
        cfg["simulate.threads"] = str(args.threads)
    plan = SimulationPlan(cfg)
    manifest = report.RunManifest(__version__, plan.run_cfg.master_seed, config.echo(cfg))
    start = time.perf_counter()
    try:
        results = plan.execute()
    except Exception as exc:
        manifest.error = f"{type(exc).__name__}: {exc}"
        manifest.wall_time_s = time.perf_counter() - start
        if args.manifest:
            manifest.write(args.manifest)
        raise
    manifest.wall_time_s = time.perf_counter() - start
    manifest.add_results(results)
    bad = [r for r in results if not r.within(3.0)]
    manifest.passed = not bad
    text = report.results_csv(results)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.manifest:
        manifest.write(args.manifest)
    for r in bad:
        print(f"FAIL simulate: {r.name} z = {r.z_score:+.2f}", file=sys.stderr)
    return EXIT_FAIL if bad else EXIT_OK


# --- ginibre -------------------------------------------------------------------

def cmd_ginibre(args) -> int:
    if args.trajectory:
        times = args.times
        accs = [Accumulator() for _ in times]
        for r in range(args.reps):
            traj = ginibre.matrix_bm_trajectory(args.n, times, rngmod.stream(args.seed, r, rngmod.EXTRA))
            for acc, smp in zip(accs, traj):
                acc.push(smp.count)
        rows = [(t, a.mean, a.stderr, a.count) for t, a in zip(times, accs)]
        text = report.write_rows(("time", "mean_real_count", "stderr", "n_reps"), rows)
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    res = ginibre.rr_density(args.n, args.reps, args.bins, args.seed)
    hist = report.histogram_csv(res.histogram)
    if args.out:
        Path(args.out).write_text(hist)
    else:
        sys.stdout.write(hist)
    summary = report.results_csv([res.bulk_density, res.real_count])
    sys.stderr.write(summary)
    return EXIT_OK


# --- verify -------------------------------------------------------------------

def cmd_verify(args) -> int:
    def log(msg: str) -> None:
        print(msg, file=sys.stderr)

    outcomes, manifest = verify.run_suite(args.suite, args.seed, args.out, args.only, log, args.threads)
    return EXIT_OK if manifest.passed else EXIT_FAIL


# --- argument parsing -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pfaffian-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("pf", help="Pfaffian of a matrix file")
    q.add_argument("matrixfile")
    q.add_argument("--algo", choices=("enumerate", "expand", "stable"), default="expand")
    q.set_defaults(func=cmd_pf)

    q = sub.add_parser("predict", help="evaluate a closed-form prediction")
    fs = q.add_subparsers(dest="formula", required=True)
    model_kw = dict(choices=[m.value for m in Model], default="coalescing")
    r = fs.add_parser("rho", help="n-point density")
    r.add_argument("--points", type=_floats, required=True)
    r.add_argument("--t", type=float, required=True)
    r.add_argument("--model", **model_kw)
    r = fs.add_parser("pattern", help="interval pattern probability")
    r.add_argument("--pattern", choices=[x.value for x in Pattern], required=True)
    r.add_argument("--endpoints", type=_floats, required=True)
    r.add_argument("--t", type=float, required=True)
    r.add_argument("--model", **model_kw)
    r = fs.add_parser("moment", help="product moment of annihilating particles")
    r.add_argument("--points", type=_floats, required=True)
    r.add_argument("--t", type=float, required=True)
    r.add_argument("--g", default="gaussian",
                   help="zero, one, gaussian[:width[:center]], indicator:a:b or parity:a,b,...")
    r = fs.add_parser("asymptotic", help="large-time leading density")
    r.add_argument("--points", type=_floats, required=True)
    r.add_argument("--t", type=float, required=True)
    r.add_argument("--model", **model_kw)
    r = fs.add_parser("jmatrix", help="the exact constant matrix J and its Pfaffian")
    r.add_argument("--n", type=int, required=True, help="half the dimension")
    r = fs.add_parser("lemma", help="small-separation ratio against Pf(J)")
    r.add_argument("--points", type=_floats, required=True)
    r.add_argument("--eps", type=float, required=True)
    q.set_defaults(func=cmd_predict)

    q = sub.add_parser("simulate", help="Monte Carlo run from a config file")
    q.add_argument("--config", required=True)
    q.add_argument("--seed", type=int)
    q.add_argument("--threads", type=int)
    q.add_argument("--out", help="CSV output path (default stdout)")
    q.add_argument("--manifest", help="write a JSON run manifest here")
    q.set_defaults(func=cmd_simulate)

    q = sub.add_parser("ginibre", help="real eigenvalues of real Ginibre matrices")
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--reps", type=int, required=True)
    q.add_argument("--bins", type=int, default=40)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--trajectory", action="store_true", help="matrix Brownian motion instead")
    q.add_argument("--times", type=_floats, default=[0.25, 0.5, 1.0, 2.0])
    q.add_argument("--out", help="CSV output path (default stdout)")
    q.set_defaults(func=cmd_ginibre)

    q = sub.add_parser("verify", help="run the acceptance battery")
    q.add_argument("--suite", choices=("fast", "full"), default="fast")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--threads", type=int, default=0)
    q.add_argument("--out", default="verify-out", help="directory for CSV files and manifest.json")
    q.add_argument("--only", action="append", choices=list(verify.CRITERIA), help="run only this experiment (repeatable)")
    q.set_defaults(func=cmd_verify)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PfaffianLabError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
