"""Batch experiment runner.

Config files are INI style with one section per experiment::

    [DEFAULT]
    seed = 1

    [mean-count]
    R = 5
    samples = 5000

Keys take the type of the experiment default they override; list values are
comma separated. A section may set ``enabled = false`` to skip it.
"""

import argparse
import configparser
import csv
import json
import math
import os
import re
import sys
from pathlib import Path

from . import experiments
from .errors import ConfigError, PreconditionError

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


def _key_line(text, section, key):
    current = None
    for lineno, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
        elif current == section and re.match(rf"\s*{re.escape(key)}\s*[=:]", line, re.IGNORECASE):
            return lineno
    return None


def _coerce(raw, default, where):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
                raise ValueError(raw)
            return low in ("true", "yes", "1", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, (list, tuple)):
            items = [x.strip() for x in raw.split(",") if x.strip()]
            proto = default[0] if default else 0.0
            if isinstance(proto, str):
                return items
            return [type(proto)(x) for x in items]
        return raw
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {type(default).__name__}") from None


def load_config(path, seed=None, samples=None):
    """Parse and validate a config file into [(experiment name, params)].

    Every section is checked against its experiment's preconditions before
    anything runs. Command-line ``seed`` and ``samples`` override file values.
    """
    text = Path(path).read_text(encoding="utf-8")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    plan = []
    for section in parser.sections():
        where = f"{path}: [{section}]"
        try:
            exp = experiments.get(section)
        except KeyError:
            line = next((i for i, s in enumerate(text.splitlines(), 1) if s.strip() == f"[{section}]"), None)
            raise ConfigError(f"{path}:{line}: unknown experiment {section!r}") from None
        params = {}
        enabled = True
        for key, raw in parser.items(section):
            line = _key_line(text, section, key) or _key_line(text, "DEFAULT", key)
            loc = f"{path}:{line}: [{section}] {key}"
            if key == "enabled":
                enabled = _coerce(raw, True, loc)
                continue
            lookup = {k.lower(): k for k in exp.defaults}
            name = key if key in exp.defaults else lookup.get(key.lower())
            if name is None:
                if key in parser.defaults():
                    continue
                raise ConfigError(f"{loc}: unknown parameter for {section}; expected one of {sorted(exp.defaults)}")
            params[name] = _coerce(raw, exp.defaults[name], loc)
        if not enabled:
            continue
        if seed is not None and "seed" in exp.defaults:
            params["seed"] = seed
        if samples is not None and "samples" in exp.defaults:
            params["samples"] = samples
        try:
            exp.resolve(**params)
        except PreconditionError as exc:
            # messages lead with the offending parameter; point at its line when it came from the file
            key = str(exc).split(" ", 1)[0]
            line = _key_line(text, section, key) or _key_line(text, "DEFAULT", key)
            if line:
                where = f"{path}:{line}: [{section}] {key}"
            raise ConfigError(f"{where}: {exc}") from None
        plan.append((section, params))
    if not plan:
        raise ConfigError(f"{path}: no enabled experiments")
    return plan


def _json_default(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    raise TypeError(type(v).__name__)


def _clean_float(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, dict):
        return {k: _clean_float(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_clean_float(x) for x in v]
    return v


def write_reports(reports, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "results.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for rep in reports:
            for rec in rep.records:
                fh.write(json.dumps(_clean_float(rec), sort_keys=True, default=_json_default) + "\n")
    for rep in reports:
        for stem, (header, rows) in rep.tables.items():
            with open(out / f"{rep.name}-{stem}.csv", "w", encoding="utf-8", newline="") as fh:
                w = csv.writer(fh, lineterminator="\r\n")
                w.writerow(header)
                for row in rows:
                    w.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])
    return out


def cmd_run(args):
    try:
        plan = load_config(args.config, args.seed, args.samples)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    reports = []
    for name, params in plan:
        exp = experiments.get(name)
        print(f"running {name} ...", file=sys.stderr, flush=True)
        reports.append(exp.run(**params))
    out = write_reports(reports, args.out)
    failed = [r for rep in reports for r in rep.records if r["pass"] is False]
    for rep in reports:
        for rec in rep.records:
            flag = {True: "PASS", False: "FAIL", None: "info"}[rec["pass"]]
            crit = f"criterion {rec['criterion']}" if rec.get("criterion") else "extra"
            print(f"{flag}  {rec['name']}  ({crit})")
    print(f"wrote {out / 'results.jsonl'}")
    if failed:
        crits = sorted({r["criterion"] for r in failed if r.get("criterion")})
        print(f"{len(failed)} check(s) failed; criteria: {', '.join(map(str, crits)) or 'none'}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def cmd_list(args):
    rows = [(e.name, str(e.criterion or "-"), e.anchor) for e in experiments.EXPERIMENTS.values()]
    width = max(len(r[0]) for r in rows)
    print(f"{'experiment':<{width}}  crit  verifies")
    for name, crit, anchor in rows:
        print(f"{name:<{width}}  {crit:>4}  {anchor}")
    return EXIT_OK


def cmd_describe(args):
    try:
        exp = experiments.get(args.experiment)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{exp.name}: {exp.summary}")
    print(f"verifies: {exp.anchor}")
    if exp.criterion:
        print(f"acceptance criterion: {exp.criterion}")
    print("parameters (defaults):")
    for key, val in exp.defaults.items():
        shown = ", ".join(map(str, val)) if isinstance(val, (list, tuple)) else val
        print(f"  {key} = {shown}")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="gefsplit", description="Run split-field and GEF zero experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the experiments named in a config file")
    run.add_argument("config")
    run.add_argument("--seed", type=int, help="master seed, overrides the file")
    run.add_argument("--samples", type=int, help="sample count, overrides the file")
    run.add_argument("--out", default="results", help="output directory (default: results)")
    run.set_defaults(func=cmd_run)
    sub.add_parser("list", help="list experiments").set_defaults(func=cmd_list)
    desc = sub.add_parser("describe", help="show an experiment's parameters")
    desc.add_argument("experiment")
    desc.set_defaults(func=cmd_describe)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if os.environ.get("GEFSPLIT_WORKERS"):
        print(f"workers: {os.environ['GEFSPLIT_WORKERS']}", file=sys.stderr)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
