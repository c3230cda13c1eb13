"""Command-line harness: ``hormander <command> --seed S [--config file] [key=value ...]``.

Every run writes into ``<out>/<command>-<seed>/``: CSV tables, JSON
summaries and a ``manifest.json`` with checksums.  Tables depend only on the
configuration, never on wall time or thread count.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import io as IO
from ._accel import set_threads
from .grammar import ParseError

EXIT_OK, EXIT_INVARIANT, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3, 4


class InputError(ValueError):
    pass


DEFAULTS: dict[str, dict] = {
    "bracket": {
        "scenario": "langevin",
        "params": {},
        "fields": None,  # {"drift": "...", "diffusions": [...], "names": [...], "points": [[...]]}
        "K": 4,
    },
    "simulate": {
        "scenario": "brownian",
        "params": {},
        "x0": None,
        "T": 1.0,
        "N": 256,
        "paths": 10000,
        "scheme": "stratonovich-heun",
        "explosion_abort": 0.001,
        "kde": {"enabled": False, "bandwidth": 0.05, "points": 401, "lo": -4.0, "hi": 4.0, "component": 1},
        "convergence": {"enabled": False, "exponents": [6, 7, 8, 9, 10], "paths": 1000},
    },
    "malliavin": {
        "scenario": "langevin",
        "params": {},
        "x0": None,
        "N": 256,
        "paths": 10000,
        "eps_exponents": [4, 14],
        "fit_exponents": [6, 14],
        "K": 16,
        "fixed_eta": [],
        "p": 1.0,
        "p_min": None,  # from the calibration file when null
        "floor_level": 0.05,
        "covariance_rows": 10,
        "ibp": {"enabled": False, "G": "x1^2", "j": 1, "N": 64, "paths": 10000, "bump": 1e-4},
    },
    "discrete": {
        "corpus": None,  # path to a corpus file; the built-in corpus when null
        "max_degree": 4,
        "points": 100,
        "refinement": True,
    },
    "norris": {
        "scenario": "langevin",
        "params": {},
        "x0": None,
        "N": 256,
        "paths": 10000,
        "eta": None,  # random unit vector from the seed when null
        "eps_exponents": [0, 14],
        "r_grid": [0.0125, 0.05, 0.125, 0.2],
        "cascade": {"enabled": True, "K": 1, "eps": 0.25, "eta": "weakest", "paths": 2000},
        "dtf": {"enabled": True, "N": 2048, "alpha": 1.0 / 3.0},
        "fixture": {"eps0": 1.5, "eps": [4.0, 2.0, 1.0, 0.5, 0.25, 0.125]},
    },
    "control-demo": {
        "U": "1 ; 0",
        "V": "0 ; x1",
        "x0": None,
        "ns": [4, 8, 16, 32],
        "T": 1.0,
        "drift": True,
    },
}


# ------------------------------------------------------------------ config


def _merge(base: dict, over: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        key = f"{where}{k}"
        if k not in base:
            raise InputError(f"unknown configuration key {key!r}")
        if isinstance(base[k], dict) and k != "params" and isinstance(v, dict):
            out[k] = _merge(base[k], v, key + ".")
        else:
            out[k] = v
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _override(cfg: dict, item: str) -> None:
    key, eq, val = item.partition("=")
    if not eq or not key:
        raise InputError(f"override {item!r} is not key=value")
    parts = key.split(".")
    node = cfg
    for i, p in enumerate(parts[:-1]):
        if p not in node or not isinstance(node[p], dict):
            raise InputError(f"unknown configuration key {'.'.join(parts[: i + 1])!r}")
        node = node[p]
    last = parts[-1]
    # scenario parameters are free-form; everything else must already exist
    if last not in node and parts[-2:-1] != ["params"]:
        raise InputError(f"unknown configuration key {key!r}")
    node[last] = _parse_value(val)


def build_config(command: str, config_path: str | None, overrides: list[str]) -> dict:
    cfg = copy.deepcopy(DEFAULTS[command])
    if config_path:
        try:
            data = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise InputError(f"cannot read config {config_path}: {e}") from None
        if not isinstance(data, dict):
            raise InputError("config file must hold a JSON object")
        data.pop("seed", None)
        cfg = _merge(cfg, data)
    for item in overrides:
        _override(cfg, item)
    for key in ("N", "paths"):
        if key in cfg and (not isinstance(cfg[key], int) or cfg[key] < 1):
            raise InputError(f"{key} must be a positive integer")
    return cfg


def _seed_from(args, config_path) -> int:
    seed = args.seed
    if seed is None and config_path:
        try:
            seed = json.loads(Path(config_path).read_text()).get("seed")
        except (OSError, json.JSONDecodeError, AttributeError):
            seed = None
    if seed is None:
        raise InputError("a seed is required (--seed or \"seed\" in the config)")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise InputError("seed must be an unsigned 64-bit integer")
    return seed


# ------------------------------------------------------------------ run context


class Run:
    def __init__(self, command: str, seed: int, cfg: dict, out: Path):
        self.command, self.seed, self.cfg = command, seed, cfg
        self.dir = out / f"{command}-{seed}"
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []
        self.counters: dict = {}
        self.timings: dict = {}
        self.failures: list[str] = []
        self._t0 = time.perf_counter()

    def csv(self, name: str, header, rows) -> None:
        self.files.append(IO.write_csv(self.dir / name, header, rows))

    def json(self, name: str, obj) -> None:
        self.files.append(IO.write_json(self.dir / name, obj))

    def fail(self, message: str) -> None:
        self.failures.append(message)

    def lap(self, key: str, t: float) -> None:
        self.timings[key] = round(time.perf_counter() - t, 3)

    def manifest(self, status: str, error: str | None = None) -> Path:
        self.timings["total"] = round(time.perf_counter() - self._t0, 3)
        return IO.write_json(self.dir / "manifest.json", {
            "command": self.command,
            "seed": self.seed,
            "config": self.cfg,
            "version": __version__,
            "status": status,
            "error": error,
            "failures": self.failures,
            "counters": self.counters,
            "timings": self.timings,
            "files": {p.name: IO.sha256(p) for p in sorted(self.files)},
        })


def _scenario(cfg: dict):
    from . import scenarios

    try:
        sc = scenarios.get(cfg["scenario"], **(cfg.get("params") or {}))
    except KeyError as e:
        raise InputError(str(e.args[0])) from None
    except TypeError as e:
        raise InputError(f"bad scenario parameters: {e}") from None
    x0 = sc.x0 if cfg.get("x0") is None else np.asarray(cfg["x0"], float)
    if x0.shape != (sc.system.n,):
        raise InputError(f"x0 must have {sc.system.n} entries")
    return sc, x0


def _say(msg: str) -> None:
    print(msg, flush=True)


# ------------------------------------------------------------------ commands


def cmd_bracket(run: Run) -> None:
    from . import expr as E
    from .sde import SdeSystem
    from .vfield import check_hormander_points

    cfg = run.cfg
    if cfg["fields"]:
        f = cfg["fields"]
        try:
            sys_ = SdeSystem.parse(f["drift"], f["diffusions"], f.get("names"))
            points = [tuple(map(float, p)) for p in f.get("points") or [[0.0] * sys_.n]]
        except KeyError as e:
            raise InputError(f"fields needs {e.args[0]!r}") from None
        name = "inline"
    else:
        sc, _ = _scenario(cfg)
        sys_, points, name = sc.system, sc.test_points, sc.name
    rep = check_hormander_points(sys_.fields, points, cfg["K"])
    fam = max((r.family for r in rep.results), key=lambda f: f.depth)
    rows = []
    for k in range(fam.depth + 1):
        for V in fam.new_at(k):
            rows.append((k, V.label, V.is_zero, " ; ".join(E.to_string(c) for c in V.components)))
    run.csv("brackets.csv", ("level", "bracket", "identically_zero", "components"), rows)
    run.csv("points.csv", ("point", "k_star", "dimensions"),
            [(" ".join(IO.fmt(float(v)) for v in r.x), "undetermined" if r.level is None else r.level,
              " ".join(map(str, r.dimensions))) for r in rep.results])
    k = rep.level
    summary = {"scenario": name, "k_star": "undetermined" if k is None else k,
               "zero_brackets": sorted(set(fam.zero_brackets)), "K": cfg["K"]}
    run.json("summary.json", summary)
    for lvl in range(fam.depth + 1):
        _say(f"level {lvl}: " + ", ".join(V.label for V in fam.new_at(lvl)))
    for r in rep.results:
        _say(f"x = {r.x}: dims {r.dimensions}, {r.describe()}")
    _say(f"k* = {summary['k_star']}")
    if fam.zero_brackets:
        _say("identically zero: " + ", ".join(sorted(set(fam.zero_brackets))))


def cmd_simulate(run: Run) -> None:
    from .mmatrix import kde_density
    from .oracles import convergence_table
    from .sde import GridSpec, simulate_ensemble

    cfg = run.cfg
    sc, x0 = _scenario(cfg)
    t = time.perf_counter()
    ens = simulate_ensemble(sc.system, x0, GridSpec(float(cfg["T"]), cfg["N"]), cfg["paths"], run.seed,
                            cfg["scheme"])
    run.lap("simulate", t)
    run.counters["exploded"] = ens.exploded
    n = sc.system.n
    header = ("path", "status") + tuple(f"x{i + 1}" for i in range(n)) + ("sup_abs_x", "max_inverse_drift")
    run.csv("ensemble.csv", header, [(int(p), int(s), *map(float, x), float(u), float(d))
                                     for p, s, x, u, d in zip(ens.paths, ens.status, ens.xT, ens.xsup, ens.drift)])
    ok = ens.ok
    stats = {"paths": int(ens.paths.size), "exploded": ens.exploded,
             "sup_abs_x": float(np.max(ens.xsup[ok])) if ok.any() else math.nan,
             "max_inverse_drift": float(np.max(ens.drift[ok])) if ok.any() else math.nan,
             "mean": ens.xT[ok].mean(axis=0), "h": float(cfg["T"]) / cfg["N"]}
    run.json("summary.json", stats)
    _say(f"{stats['paths']} paths, {ens.exploded} exploded, sup|x| = {stats['sup_abs_x']:.6g}, "
         f"max |J J^-1 - I| = {stats['max_inverse_drift']:.3g}")
    if ens.exploded > cfg["explosion_abort"] * ens.paths.size:
        raise NumericAbort(f"{ens.exploded} of {ens.paths.size} paths exploded")
    kde = cfg["kde"]
    if kde["enabled"]:
        c = int(kde["component"]) - 1
        if not 0 <= c < n:
            raise InputError("kde.component out of range")
        grid = np.linspace(kde["lo"], kde["hi"], int(kde["points"]))
        dens = kde_density(ens.xT[ok, c], float(kde["bandwidth"]), grid)
        run.csv("kde.csv", ("x", "density"), zip(grid.tolist(), dens.tolist()))
    conv = cfg["convergence"]
    if conv["enabled"]:
        tab = convergence_table(conv["exponents"], conv["paths"], run.seed)
        ratios = [a[1] / b[1] for a, b in zip(tab, tab[1:])] + [math.nan]
        run.csv("convergence.csv", ("h", "strong_error", "ratio_to_next"), [(h, e, r) for (h, e), r in zip(tab, ratios)])
        for (h, e), r in zip(tab, ratios):
            _say(f"h = {h:.6g}: strong error {e:.4g}  ratio {r:.3f}")


def cmd_malliavin(run: Run) -> None:
    from . import mmatrix as MM
    from .norris import calibration
    from .sde import GridSpec, simulate_ensemble

    cfg = run.cfg
    sc, x0 = _scenario(cfg)
    a, b = cfg["eps_exponents"]
    eps = MM.geometric_eps(a, b)
    fa, fb = cfg["fit_exponents"]
    t = time.perf_counter()
    rep = MM.tail_scaling(sc.system, x0, eps, cfg["paths"], run.seed, cfg["N"], cfg["fixed_eta"], cfg["K"],
                          (2.0**-fb, 2.0**-fa), min_paths=1)
    run.lap("tail_scaling", t)
    run.counters["exploded"] = rep.extra["excluded"]
    p_min = cfg["p_min"] if cfg["p_min"] is not None else calibration()["tail_scaling"]["p_min"]
    floor = rep.floor(cfg["floor_level"])
    summ = rep.summary() | {"p_min": p_min, "decays": rep.decays(p_min), "floor": floor}
    run.csv("tail.csv", MM.ScalingReport.HEADER, rep.rows())
    run.json("tail.json", summ)
    _say(f"tail slope {rep.slope} ({rep.fit.reason or 'fitted'}), floor={floor}")
    if floor:
        _say("non-decaying tail: probability floor at the smallest eps")
    ens = simulate_ensemble(sc.system, x0, GridSpec(1.0, cfg["N"]), cfg["covariance_rows"], run.seed)
    rows = []
    for s in MM.covariance_samples(ens):
        rows.append((s.path_index, s.lambda_C, s.lambda_M, *s.C.ravel().tolist()))
    n = sc.system.n
    run.csv("covariance.csv", ("path", "lambda_min_C", "lambda_min_M") +
            tuple(f"C{i + 1}{j + 1}" for i in range(n) for j in range(n)), rows)
    inv = MM.inverse_moment_estimate(rep.lambda_min, cfg["p"])
    run.json("inverse_moment.json", {"p": cfg["p"], "estimate": inv.estimate, "stderr": inv.stderr,
                                     "used": inv.used, "excluded": inv.excluded, "decades": inv.decades})
    _say(f"E lambda_min^-{cfg['p']} = {inv.estimate:.6g} +- {inv.stderr:.2g} ({inv.excluded} singular)")
    ib = cfg["ibp"]
    if ib["enabled"]:
        t = time.perf_counter()
        pr = MM.ibp_density_probe(sc.system, x0, ib["G"], int(ib["j"]), GridSpec(1.0, ib["N"]), ib["paths"],
                                  run.seed, ib["bump"])
        run.lap("ibp", t)
        run.counters["ibp_excluded"] = pr.excluded
        run.json("ibp.json", pr.__dict__)
        _say(f"IBP probe: lhs {pr.lhs:.6g} rhs {pr.rhs:.6g} z {pr.z:.3f}")
        if abs(pr.z) >= 4:
            run.fail(f"IBP probe |z| = {abs(pr.z):.3f} >= 4")


def cmd_discrete(run: Run) -> None:
    from . import dmall as D
    from . import suites

    cfg = run.cfg
    t = time.perf_counter()
    if cfg["corpus"]:
        try:
            entries = D.parse_corpus(Path(cfg["corpus"]).read_text())
        except OSError as e:
            raise InputError(str(e)) from None
        results = suites.file_corpus(entries, cfg["points"], run.seed)
    else:
        grids = D.DEFAULT_GRIDS
        results = suites.exact_corpus(grids, cfg["max_degree"], cfg["points"], run.seed, cfg["refinement"])
    run.lap("corpus", t)
    rows = []
    for key, r in results.items():
        rows.append((key, r.name, r.cases, r.nonexact, r.worst, r.worst_case))
        ok = r.worst <= D.EXACT_TOL
        _say(f"{r.name}: {r.cases} cases, worst residual {r.worst:.3g} ({'pass' if ok else 'FAIL'})")
        if not ok:
            run.fail(f"{r.name}: residual {r.worst:.3g} > {D.EXACT_TOL}")
        if "min_slack" in r.extra:
            _say(f"  isometry inequality slack min {r.extra['min_slack']:.3g}")
            if r.extra["min_slack"] < -D.EXACT_TOL:
                run.fail("isometry inequality violated")
    run.csv("residuals.csv", ("suite", "identity", "cases", "nonexact", "worst", "worst_case"), rows)
    # the one-increment isometry case, printed for reference
    g = D.Grid((0.5,), 1)
    c = D.check_isometry([g.symbol(1)])
    _say(f"isometry on F = dw, dt = 0.5: lhs {c.lhs} rhs {c.rhs} (2 dt^2 = {2 * 0.25})")


def cmd_norris(run: Run) -> None:
    from . import norris as NR

    cfg = run.cfg
    cal = NR.calibration()
    d = cfg["dtf"]
    if d["enabled"]:
        t = time.perf_counter()
        corpus = NR.dtf_corpus(d["N"], run.seed)
        res = [(name, NR.check_dtf(f, fp, d["alpha"])) for name, f, fp in corpus]
        run.lap("dtf", t)
        run.csv("dtf.csv", ("function", "lhs", "rhs", "slack", "sup", "holder"),
                [(nm, r.lhs, r.rhs, r.slack, r.sup, r.holder) for nm, r in res])
        worst = min(r.slack for _, r in res)
        _say(f"dtf corpus: {len(res)} functions, min slack {worst:.6g}")
        if worst < 0:
            run.fail(f"dtf slack {worst} < 0")
    fx = cfg["fixture"]
    rows, exact = [], True
    for st in NR.deterministic_fixture(fx["eps0"], fx["eps"]):
        ea, eb, ev = NR.fixture_expected(fx["eps0"], fx["eps"], st.r)
        exact &= bool(np.array_equal(st.count_a, ea) and np.array_equal(st.count_b, eb)
                      and np.array_equal(st.count_violation, ev))
        rows += st.rows()
    run.csv("fixture.csv", NR.AlmostImplicationStats.HEADER, rows)
    _say(f"deterministic fixture: {'exact' if exact else 'MISMATCH'}")
    if not exact:
        run.fail("deterministic fixture table differs from the closed form")
    sc, x0 = _scenario(cfg)
    n = sc.system.n
    if cfg["eta"] is None:
        g = np.random.default_rng(np.random.SeedSequence([run.seed, 0x657461])).standard_normal(n)
        eta = g / np.linalg.norm(g)
    else:
        eta = np.asarray(cfg["eta"], float)
        eta = eta / np.linalg.norm(eta)
    a, b = cfg["eps_exponents"]
    eps = 2.0 ** -np.arange(a, b + 1, dtype=float)
    t = time.perf_counter()
    stats = NR.norris_scaling(sc.system, x0, sc.system.diffusions[0], eta, eps, cfg["paths"], run.seed,
                              cfg["r_grid"], cfg["N"])
    run.lap("norris_scaling", t)
    p = cal["norris"]["violation_exponent"]
    rows = []
    for st in stats:
        rows += st.rows()
        _say(f"r = {st.r:.4g}: resolvable bins {int(st.resolvable.sum())}, violations "
             f"{int(st.count_violation.sum())}, meets eps^{p:g}: {st.meets(p)}")
    run.csv("norris.csv", NR.AlmostImplicationStats.HEADER, rows)
    run.json("norris.json", {"eta": eta, "exponent": p,
                             "meets": {IO.fmt(st.r): st.meets(p) for st in stats},
                             "vacuous": {IO.fmt(st.r): st.vacuous for st in stats}})
    cc = cfg["cascade"]
    if cc["enabled"]:
        if cc["eta"] == "weakest":
            ceta = NR.weakest_direction(sc.system, x0, cfg["N"], seed=run.seed)
        elif cc["eta"] is None:
            ceta = eta
        else:
            ceta = np.asarray(cc["eta"], float) / np.linalg.norm(cc["eta"])
        t = time.perf_counter()
        rows = NR.hormander_cascade(sc.system, x0, ceta, cc["K"], cc["eps"], cc["paths"], run.seed, cfg["N"])
        run.lap("cascade", t)
        run.csv("cascade.csv", NR.CascadeRow.HEADER, [r.row() for r in rows])
        for r in rows:
            _say(f"level {r.level} {r.label}: conditioned {r.conditioned}/{r.paths}, median sup|Z| {r.q50:.4g}")


def cmd_control_demo(run: Run) -> None:
    from .control import area_sweep, constant_fields_endpoint, drift_sweep, oscillatory_control
    from .vfield import VectorField

    cfg = run.cfg
    U, V = VectorField.parse(cfg["U"], label="U"), VectorField.parse(cfg["V"], label="V")
    x0 = None if cfg["x0"] is None else np.asarray(cfg["x0"], float)
    ns, T = [int(n) for n in cfg["ns"]], float(cfg["T"])
    t = time.perf_counter()
    area = area_sweep(U, V, ns, T, x0)
    run.lap("area", t)
    header = ("n", "error", "sup_deviation", "rms_deviation")
    run.csv("area.csv", header, [(r.n, r.error, r.sup_deviation, r.rms_deviation) for r in area])
    errs = [r.error for r in area]
    for r in area:
        _say(f"n = {r.n}: endpoint error {r.error:.4g}")
    if any(b >= a for a, b in zip(errs, errs[1:])):
        run.fail("endpoint error is not monotone in n")
    if cfg["drift"]:
        rows = drift_sweep(U, V, ns, T, x0)
        ratios = [a.rms_deviation / b.rms_deviation for a, b in zip(rows, rows[1:])] + [math.nan]
        run.csv("drift.csv", header + ("rms_ratio_to_next",),
                [(r.n, r.error, r.sup_deviation, r.rms_deviation, q) for r, q in zip(rows, ratios)])
        for r, q in zip(rows, ratios):
            _say(f"n = {r.n}: rms deviation {r.rms_deviation:.4g}  ratio {q:.3f}")
        bad = [q for q in ratios[:-1] if abs(q - 2.0) > 0.3]
        if bad:
            run.fail(f"drift deviation ratios {bad} outside 2 +- 0.3")
    const = all(c.is_const for c in U.components + V.components)
    if const:
        rows = []
        for n in ns:
            x = oscillatory_control(U, V, n, T, x0=x0)
            ref = constant_fields_endpoint(U, V, n, T, x0)
            rows.append((n, float(np.abs(x - ref).max())))
        run.csv("constant.csv", ("n", "error_vs_closed_form"), rows)
        if max(e for _, e in rows) > 1e-9:
            run.fail("constant-field control differs from its closed form")


class NumericAbort(ArithmeticError):
    pass


COMMANDS = {
    "bracket": cmd_bracket,
    "simulate": cmd_simulate,
    "malliavin": cmd_malliavin,
    "discrete": cmd_discrete,
    "norris": cmd_norris,
    "control-demo": cmd_control_demo,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors are input errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hormander", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("overrides", nargs="*", metavar="key=value", help="dotted configuration overrides")
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--seed", type=int, help="unsigned 64-bit seed (required unless in the config)")
    p.add_argument("--out", default="runs", help="output root (default: runs)")
    p.add_argument("--threads", type=int, default=None, help="worker threads for the parallel kernels")
    return p


def main(argv: list[str] | None = None) -> int:
    from .dmall import DegreeBudgetError, NonfiniteSamplesError, NonPolynomialError
    from .mmatrix import ExclusionError, HorizonError
    from .sde import SimulationError
    from .vfield import BracketExplosionError, DimensionError

    args = _parser().parse_intermixed_args(argv)
    try:
        seed = _seed_from(args, args.config)
        cfg = build_config(args.command, args.config, args.overrides)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_INPUT
    set_threads(args.threads)
    run = Run(args.command, seed, cfg, Path(args.out))
    code, status, err = EXIT_OK, "ok", None
    try:
        COMMANDS[args.command](run)
        if run.failures:
            code, status = EXIT_INVARIANT, "invariant failure"
    except (InputError, ParseError, DimensionError, NonPolynomialError, DegreeBudgetError, HorizonError,
            ValueError) as e:
        code, status, err = EXIT_INPUT, "input error", str(e)
    except BracketExplosionError as e:
        code, status, err = EXIT_INPUT, "input error", str(e)
    except (SimulationError, ExclusionError, NonfiniteSamplesError, NumericAbort) as e:
        code, status, err = EXIT_NUMERIC, "numerical abort", str(e)
    if err:
        print(f"error: {err}", file=sys.stderr)
    for f in run.failures:
        print(f"invariant failure: {f}", file=sys.stderr)
    path = run.manifest(status, err)
    _say(f"outputs in {path.parent}")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
