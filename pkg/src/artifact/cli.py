"""Command line runner: TOML config in, report.json, CSV traces and optional SVG plots out.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 acceptance failure.
"""

import argparse
import csv
import hashlib
import json
import logging
import re
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__, _kernels
from .checks import (classification_checks, evolution_checks, feshbach_checks, kernel_checks,
                     laurent_checks, resonance_checks)
from .errors import ArtifactError, ConfigError, NumericalError
from .evolution import decay_experiment, gaussian_data
from .norms import NormKind
from .potential import PotentialSpec, decay_weight_report, factorize, sample
from .resolvent import RadialGrid
from .suites import bundled_suites, suite_config
from .threshold import ThresholdReport, analyze, laurent_extract, tune_coupling, tune_shape

log = logging.getLogger("artifact")

ACTIONS = ("classify", "tune", "laurent", "evolve", "verify-kernels", "full")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_ACCEPTANCE = 0, 2, 3, 4
_KINDS = ("generic", "kind1", "kind2", "kind3")


# config ------------------------------------------------------------------------

def _locate(text, table, key):
    """1-based line of ``key`` inside ``[table]`` (or the root table), if present."""
    if not text:
        return None
    current = ""
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"^\[\s*([^\]]+?)\s*\]$", s)
        if m:
            current = m.group(1)
            if key is None and current == table:
                return no
            continue
        if current == table and key is not None and re.match(rf"^{re.escape(key)}\s*=", s):
            return no
    return None


@dataclass
class ExperimentConfig:
    action: str
    potential: PotentialSpec
    grid: RadialGrid
    ell_max: int
    tune: dict = field(default_factory=dict)
    expect: str = None
    suite: str = None
    laurent_ells: list = None
    evolve: dict = field(default_factory=dict)
    from_report: str = None
    out_dir: str = "out"
    formats: tuple = ("json", "csv")
    raw: dict = field(default_factory=dict)


class _Validator:
    def __init__(self, text):
        self.text = text

    def fail(self, msg, table="", key=None):
        line = _locate(self.text, table, key)
        where = f"line {line}: " if line else ""
        loc = f"[{table}] {key}" if table else (key or "")
        raise ConfigError(f"{where}{loc}: {msg}" if loc else f"{where}{msg}")

    def table(self, cfg, name, required=False):
        t = cfg.get(name, {} if not required else None)
        if t is None:
            self.fail("missing required table", name)
        if not isinstance(t, dict):
            self.fail("must be a table", "", name)
        return t

    def positive(self, tab, name, key, kind=float, default=None):
        v = tab.get(key, default)
        if v is None:
            self.fail("required", name, key)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail("must be a number", name, key)
        if kind is int and int(v) != v:
            self.fail("must be an integer", name, key)
        if not v > 0:
            self.fail("must be positive", name, key)
        return kind(v)


def parse_config(cfg, text=None, action_override=None):
    val = _Validator(text)
    action = action_override or cfg.get("action", "full")
    if action not in ACTIONS:
        val.fail(f"unknown action {action!r}; expected one of {', '.join(ACTIONS)}", "", "action")
    g = val.table(cfg, "grid")
    grid = RadialGrid(val.positive(g, "grid", "N", int, 800), val.positive(g, "grid", "R_max", float, 40.0))
    needs_potential = action != "verify-kernels"
    pt = val.table(cfg, "potential", required=needs_potential)
    spec = None
    if pt:
        if not isinstance(pt.get("params", []), list):
            val.fail("must be an array", "potential", "params")
        try:
            spec = PotentialSpec.from_dict(pt)
        except ConfigError as exc:
            key = "family" if "family" in str(exc) else "params"
            val.fail(str(exc), "potential", key)
    w = val.table(cfg, "waves")
    ell_max = w.get("ell_max", 2)
    if isinstance(ell_max, bool) or not isinstance(ell_max, int) or ell_max < 0:
        val.fail("must be a nonnegative integer", "waves", "ell_max")
    tune = val.table(cfg, "tune")
    if tune:
        if "waves" in tune:
            for key in ("indices", "shape_param", "shape_bracket"):
                if key not in tune:
                    val.fail("joint tuning needs waves, indices, shape_param and shape_bracket", "tune", key)
        elif "wave" not in tune:
            val.fail("needs 'wave' (single) or 'waves' (joint)", "tune", None)
    expect = cfg.get("expect")
    if expect is not None and expect not in _KINDS:
        val.fail(f"must be one of {', '.join(_KINDS)}", "", "expect")
    lt = val.table(cfg, "laurent")
    ells = lt.get("ells")
    ev = dict(val.table(cfg, "evolve"))
    norms = ev.get("norms", ["sup_interior", "lorentz_3_inf", "l2"])
    for n in norms:
        try:
            NormKind(n)
        except ValueError:
            val.fail(f"unknown norm kind {n!r}", "evolve", "norms")
    times = ev.get("times", {"count": 12})
    if isinstance(times, dict):
        val.positive(times, "evolve.times", "count", int, 12)
    elif isinstance(times, list):
        if len(times) < 6 or any(not isinstance(t, (int, float)) or t <= 0 for t in times):
            val.fail("needs at least 6 positive times", "evolve", "times")
    else:
        val.fail("must be a table {count = n} or an array of times", "evolve", "times")
    data = ev.get("data", {})
    width = val.positive(data, "evolve.data", "width", float, 0.15)
    waves = data.get("waves", {"0": 1.0})
    try:
        data_waves = {int(k): float(v) for k, v in waves.items()}
    except (ValueError, AttributeError, TypeError):
        val.fail("must map wave numbers to amplitudes", "evolve.data", "waves")
    if max(data_waves, default=0) > ell_max:
        val.fail("data carries a wave above ell_max", "evolve.data", "waves")
    sub = ev.get("subtract")
    if sub is not None and (not isinstance(sub, list) or any(s not in ("R", "S") for s in sub)):
        val.fail("must be a subset of ['R', 'S']", "evolve", "subtract")
    ev.update(norms=norms, times=times, width=width, data_waves=data_waves,
              subtract=sub, e1_shortcut=bool(ev.get("e1_shortcut", False)))
    th = val.table(cfg, "threshold")
    out = val.table(cfg, "output")
    formats = tuple(out.get("formats", ["json", "csv"]))
    return ExperimentConfig(action, spec, grid, ell_max, tune, expect, cfg.get("suite"), ells, ev,
                            th.get("from_report"), out.get("directory", "out"), formats, cfg)


def load_config(path, action_override=None):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        cfg = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML: {exc}") from None
    if "suite" in cfg:
        try:
            base = suite_config(cfg["suite"], cfg.get("action", "full"))
        except KeyError as exc:
            raise ConfigError(f"line {_locate(text, '', 'suite')}: {exc.args[0]}") from None
        base.update({k: v for k, v in cfg.items() if k != "suite"})
        cfg = base
    return parse_config(cfg, text, action_override)


def config_hash(raw):
    """Git blob hash of the canonical JSON form of the config."""
    body = json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()


# pipeline ----------------------------------------------------------------------

def _resolve_potential(cfg):
    t = cfg.tune
    if not t:
        return cfg.potential, None
    if "waves" in t:
        spec = tune_shape(cfg.potential, cfg.grid, list(t["waves"]), list(t["indices"]),
                          int(t["shape_param"]), tuple(t["shape_bracket"]))
    else:
        g = tune_coupling(cfg.potential, int(t["wave"]), cfg.grid, int(t.get("index", 0)),
                          t.get("bracket"))
        spec = cfg.potential.with_coupling(g)
    return spec, {"coupling": spec.coupling, "params": list(spec.params)}


def _times(cfg):
    t = cfg.evolve["times"]
    return None if isinstance(t, dict) else np.asarray(t, dtype=float)


@contextmanager
def _timed(timings, stage):
    t0 = time.perf_counter()
    yield
    timings[stage] = timings.get(stage, 0.0) + time.perf_counter() - t0


def run_pipeline(cfg, out_dir=None, plots=False, seed=0):
    """Run the configured stages; returns (report dict, list of Check, written paths).

    Wall-clock seconds per stage land in ``report["timings"]``.
    """
    stages = {"verify-kernels": ["kernels"], "tune": ["tune"], "classify": ["tune", "classify"],
              "laurent": ["tune", "classify", "laurent"], "evolve": ["tune", "classify", "evolve"],
              "full": ["kernels", "tune", "classify", "laurent", "evolve"]}[cfg.action]
    report = {"action": cfg.action, "config": cfg.raw, "config_hash": config_hash(cfg.raw),
              "suite": cfg.suite}
    checks, files, arrays = [], [], {}
    timings = report["timings"] = {}
    if "kernels" in stages:
        with _timed(timings, "kernels"):
            kc = kernel_checks()
        report["kernels"] = {c.name.split()[-1]: c.value for c in kc}
        checks += kc
        if cfg.action == "full":
            with _timed(timings, "feshbach"):
                checks += feshbach_checks(seed)
    spec, rep, fact = cfg.potential, None, None
    if cfg.from_report:
        prior = json.loads(Path(cfg.from_report).read_text(encoding="utf-8"))
        spec = PotentialSpec.from_dict(prior["resolved_potential"])
        rep = ThresholdReport.from_dict(prior["threshold"])
        fact = factorize(sample(spec, cfg.grid))
        report["reused_report"] = str(cfg.from_report)
    elif "tune" in stages and spec is not None:
        with _timed(timings, "tune"):
            spec, tuned = _resolve_potential(cfg)
        if tuned is not None:
            report["tuning"] = tuned
    if spec is not None:
        report["resolved_potential"] = spec.to_dict()
        report["decay_weights"] = decay_weight_report(spec, cfg.grid).to_dict()
    if "classify" in stages and rep is None:
        with _timed(timings, "classify"):
            rep, fact = analyze(spec, cfg.grid, cfg.ell_max)
    if rep is not None:
        report["threshold"] = rep.to_dict()
        checks += classification_checks(rep, cfg.expect) + resonance_checks(rep, cfg.grid, fact, spec)
    if "laurent" in stages:
        ells = cfg.laurent_ells if cfg.laurent_ells is not None else list(range(cfg.ell_max + 1))
        with _timed(timings, "laurent"):
            lc = laurent_extract(cfg.grid, fact, ells)
        report["laurent"] = lc.summary()
        checks += laurent_checks(rep, lc, cfg.grid, fact)
    if "evolve" in stages:
        ev = cfg.evolve
        data = gaussian_data(cfg.grid, ev["data_waves"], ev["width"])
        with _timed(timings, "evolve"):
            tr = decay_experiment(cfg.grid, fact.values, rep, data, times=_times(cfg),
                                  norm_kinds=ev["norms"], subtract=ev["subtract"],
                                  n_times=ev["times"].get("count", 12) if isinstance(ev["times"], dict) else 12)
        report["evolution"] = tr.summary()
        checks += evolution_checks(rep, tr, ev["e1_shortcut"])
        arrays["trace"] = tr
    report["checks"] = [c.to_dict() for c in checks]
    report["passed"] = all(c.passed for c in checks)
    if out_dir is not None:
        files = write_outputs(report, arrays, Path(out_dir), cfg, plots)
        report["files"] = [str(p) for p in files]
    return report, checks, files


def write_outputs(report, arrays, out, cfg, plots):
    out.mkdir(parents=True, exist_ok=True)
    files = []
    name = cfg.suite or "run"
    tr = arrays.get("trace")
    if tr is not None and "csv" in cfg.formats:
        (out / "traces").mkdir(exist_ok=True)
        path = out / "traces" / f"{name}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
            wr.writerow(["time", "norm_kind", "value", "residual_value", "wave_breakdown"])
            wr.writerows(tr.csv_rows())
        files.append(path)
        report.setdefault("evolution", {})["trace_paths"] = [str(path)]
    if tr is not None and plots:
        path = write_plot(tr, out / "plots" / f"{name}.svg", name)
        if path is not None:
            files.append(path)
            report["evolution"]["plot_paths"] = [str(path)]
    path = out / "report.json"
    report = dict(report)
    report["metadata"] = {"created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
                          "version": __version__, "kernel_backend": _kernels.BACKEND}
    report["files"] = [str(p) for p in files + [path]]
    path.write_text(json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return files + [path]


def write_plot(trace, path, title):
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.warning("matplotlib not installed; skipping plots")
        return None
    matplotlib.rcParams["svg.hashsalt"] = "artifact"
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    for kind in trace.norms:
        ax.loglog(trace.times, trace.norms[kind], "o-", label=f"{kind} full")
        if trace.subtracted:
            ax.loglog(trace.times, trace.residual_norms[kind], "s--", label=f"{kind} residual")
    ax.set_xlabel("t")
    ax.set_ylabel("norm on r <= R_obs")
    ax.set_title(title)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


# entry point ---------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="artifact", description=__doc__.splitlines()[0])
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", metavar="PATH", help="TOML experiment config")
    src.add_argument("--suite", choices=bundled_suites(), help="run a bundled reference config")
    src.add_argument("--list-suites", action="store_true", help="print bundled suite names and exit")
    p.add_argument("--action", choices=ACTIONS, help="override the config action")
    p.add_argument("--out", metavar="DIR", help="output directory (overrides [output] directory)")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized property suites")
    p.add_argument("--threads", type=int, default=1, help="BLAS threads")
    p.add_argument("--plots", action="store_true", help="write SVG log-log decay plots")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.list_suites:
        print("\n".join(bundled_suites()))
        return EXIT_OK
    try:
        if args.suite:
            cfg = parse_config(suite_config(args.suite, args.action or "full"))
        elif args.config:
            cfg = load_config(args.config, args.action)
        else:
            raise ConfigError("give --config PATH or --suite NAME")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or cfg.out_dir
    np.random.seed(args.seed)
    try:
        with threadpool_limits(limits=args.threads):
            report, checks, _ = run_pipeline(cfg, out, args.plots, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ArtifactError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for c in checks:
        print(c.line())
    if "threshold" in report:
        print(f"classification: {report['threshold']['classification']}")
    return EXIT_OK if report["passed"] else EXIT_ACCEPTANCE


if __name__ == "__main__":
    sys.exit(main())
