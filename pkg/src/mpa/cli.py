"""Command-line experiment runner.

Each experiment writes ``<out>/<experiment>.csv`` and a sidecar
``<experiment>.meta.json`` with the config hash, seed and library version.
Settings are resolved as: flags, then the ``[<experiment>]`` section of the
config file, then its ``[defaults]`` section, then built-in defaults.

Exit codes: 0 success, 1 config error, 2 numerical failure, 3 acceptance failure.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import sys
import warnings
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, acceptance, channel, harq_power, integrals, rate_adapt
from .errors import AccuracyError, DomainError, RegimeWarning
from .marcum_approx import Variant, approx_cdf, build_params
from .special_fn import marcum_q1

EXPERIMENTS = ("approx-curves", "integral-check", "rate-sweep", "speed-sweep",
               "delay-sweep", "kappa-sweep", "harq-sweep", "acceptance")
MONTE_CARLO = {"rate-sweep", "speed-sweep", "delay-sweep", "kappa-sweep", "harq-sweep", "acceptance"}

DEFAULTS = {
    "f_c": "2.68e9",
    "d_a_lambdas": "1.5",
    "samples": "100000",
    "snr_db": "0:30:3",
    "v_kmh": "114",
    "delta_ms": "5",
    "kappa": "1",
    "variant": "lemma1",
    "protocol": "rtd,inr",
    "epsilon": "0.1,0.01",
    "rate_npcu": "0.5,1,2",
    "sigma": "0.3,0.6",
    "alpha": "0.1,0.5,1",
    "tolerance_scale": "1",
    "out": "results",
}

# per-experiment defaults that differ from the global ones
EXPERIMENT_DEFAULTS = {
    "speed-sweep": {"v_kmh": "60:180:4", "snr_db": "20", "kappa": "1,0.9,0.66"},
    "delay-sweep": {"v_kmh": "120", "delta_ms": "2:8:0.25", "snr_db": "20", "kappa": "1,0.9,0.66"},
    "kappa-sweep": {"kappa": "1,0.9,0.8,0.66,0.5", "snr_db": "20"},
}

FLAG_KEYS = ("seed", "samples", "out", "snr_db", "v_kmh", "delta_ms", "kappa",
             "variant", "protocol", "epsilon", "tolerance_scale", "criteria")


class ConfigError(Exception):
    pass


def _schema_text() -> str:
    return resources.files("mpa").joinpath("csv_schema.json").read_text()


def _columns_help() -> str:
    tables = json.loads(_schema_text())["tables"]
    lines = ["CSV columns (comma-separated, '.' decimal, LF line endings, header row):"]
    for name, cols in tables.items():
        if isinstance(cols, str):
            lines.append(f"  {name}: {cols}")
        else:
            lines.append(f"  {name}: " + ", ".join(cols))
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mpa",
        description="Marcum-Q approximations and predictor-antenna link experiments.",
        epilog=_columns_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--experiment", required=True,
                   help="comma list of: " + ", ".join(EXPERIMENTS))
    p.add_argument("--config", type=Path, help="INI file with [defaults] and per-experiment sections")
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--snr-db", dest="snr_db", help="A:B:STEP or comma list")
    p.add_argument("--v-kmh", dest="v_kmh", help="A:B:STEP or comma list")
    p.add_argument("--delta-ms", dest="delta_ms", help="A:B:STEP or comma list")
    p.add_argument("--kappa", help="comma list")
    p.add_argument("--variant", choices=[v.value for v in Variant])
    p.add_argument("--protocol", choices=("rtd", "inr"))
    p.add_argument("--epsilon", help="comma list")
    p.add_argument("--criteria", help="acceptance only: comma list of criterion numbers (default all)")
    p.add_argument("--tolerance-scale", dest="tolerance_scale", type=float,
                   help="multiply acceptance thresholds (values < 1 tighten them)")
    return p


# --------------------------------------------------------------------------
# config resolution
# --------------------------------------------------------------------------

def parse_grid(text: str) -> list[float]:
    """``A:B:STEP`` (inclusive) or a comma list."""
    text = str(text).strip()
    try:
        if ":" in text:
            a, b, step = (float(x) for x in text.split(":"))
            if step <= 0 or b < a:
                raise ConfigError(f"bad range {text!r}")
            n = int(np.floor((b - a) / step + 1e-9))
            return [round(a + i * step, 10) for i in range(n + 1)]
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse {text!r} as numbers") from None
    if not values:
        raise ConfigError("empty list")
    return values


def parse_experiments(text: str) -> list[str]:
    names = [x.strip() for x in str(text).split(",") if x.strip()]
    if not names:
        raise ConfigError("empty experiment list")
    unknown = [n for n in names if n not in EXPERIMENTS]
    if unknown:
        raise ConfigError(f"unknown experiment(s): {', '.join(unknown)}")
    return names


def read_config(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    if path is None:
        return cp
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return cp


def resolve(experiment: str, args: argparse.Namespace, cp: configparser.ConfigParser) -> dict:
    cfg = dict(DEFAULTS)
    cfg.update(EXPERIMENT_DEFAULTS.get(experiment, {}))
    for section in ("defaults", experiment):
        if cp.has_section(section):
            cfg.update({k.replace("-", "_"): v for k, v in cp.items(section)})
    for key in FLAG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = str(val)
    cfg["experiment"] = experiment
    if "criteria" in cfg:
        try:
            cfg["criteria"] = sorted({int(x) for x in str(cfg["criteria"]).split(",") if x.strip()})
        except ValueError:
            raise ConfigError(f"bad criteria list {cfg['criteria']!r}") from None
        if not cfg["criteria"] or any(not 1 <= c <= 10 for c in cfg["criteria"]):
            raise ConfigError("criteria must be numbers between 1 and 10")
    if experiment in MONTE_CARLO and "seed" not in cfg:
        raise ConfigError(f"{experiment} needs a seed (--seed or config)")
    try:
        if "seed" in cfg:
            cfg["seed"] = int(cfg["seed"])
        cfg["samples"] = int(cfg["samples"])
        cfg["tolerance_scale"] = float(cfg["tolerance_scale"])
        cfg["f_c"] = float(cfg["f_c"])
        cfg["d_a_lambdas"] = float(cfg["d_a_lambdas"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg["samples"] < 1:
        raise ConfigError("samples must be >= 1")
    for key in ("snr_db", "v_kmh", "delta_ms", "kappa", "epsilon", "rate_npcu", "sigma", "alpha"):
        cfg[key] = parse_grid(cfg[key])
    if any(not 0 <= k <= 1 for k in cfg["kappa"]):
        raise ConfigError("kappa values must lie in [0, 1]")
    try:
        cfg["variant"] = Variant.parse(cfg["variant"]).value
        cfg["protocol"] = [harq_power.Protocol.parse(p).value for p in str(cfg["protocol"]).split(",")]
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def config_hash(cfg: dict) -> str:
    canon = json.dumps({k: v for k, v in cfg.items() if k != "out"}, sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------

def _models(cfg):
    for kappa in cfg["kappa"]:
        for v in cfg["v_kmh"]:
            for d in cfg["delta_ms"]:
                m = channel.MismatchModel.from_wavelengths(cfg["d_a_lambdas"], v / 3.6, d * 1e-3,
                                                           f_c=cfg["f_c"], kappa=kappa)
                yield v, d, m


def run_approx_curves(cfg) -> str:
    rows = []
    for a in cfg["alpha"]:
        for variant in Variant:
            try:
                p = build_params(a, variant)
            except DomainError:
                continue
            beta = np.round(np.linspace(0.0, max(p.c2, a) + 3.0, 201), 12)
            exact = 1.0 - np.asarray(marcum_q1(a, beta))
            approx = np.asarray(approx_cdf(p, beta))
            rows += [(a, variant.value, b, e, s) for b, e, s in zip(beta, exact, approx)]
    return acceptance._table(("alpha", "variant", "beta", "exact_cdf", "approx_cdf"), rows)


def run_integral_check(cfg) -> str:
    specs = integrals.g_reference_grid() + integrals.t_reference_grid()
    return integrals.table_to_csv(integrals.comparison_table(specs))


def run_rate(cfg, kinds) -> str:
    rows = rate_adapt.sweep(_models(cfg), cfg["snr_db"], kinds, cfg["samples"], cfg["seed"], cfg["variant"])
    return rate_adapt.rows_to_csv(rows)


def run_harq(cfg) -> str:
    rows = harq_power.harq_sweep(cfg["protocol"], cfg["rate_npcu"], cfg["epsilon"], cfg["sigma"],
                                 cfg["samples"], cfg["seed"])
    return harq_power.rows_to_csv(rows)


def run_experiment(cfg) -> str:
    name = cfg["experiment"]
    if name == "approx-curves":
        return run_approx_curves(cfg)
    if name == "integral-check":
        return run_integral_check(cfg)
    if name == "rate-sweep":
        return run_rate(cfg, ("Adaptive", "Genie", "NoCSIT"))
    if name in ("speed-sweep", "delay-sweep", "kappa-sweep"):
        return run_rate(cfg, ("Adaptive",))
    if name == "harq-sweep":
        return run_harq(cfg)
    raise ConfigError(f"no runner for {name}")


def write_outputs(out: Path, name: str, text: str, cfg: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{name}.csv").write_text(text, newline="")
    meta = {"experiment": name, "config_hash": config_hash(cfg), "seed": cfg.get("seed"),
            "version": __version__}
    (out / f"{name}.meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")


def run_acceptance(cfg) -> int:
    out = Path(cfg["out"]) / "acceptance"
    results = acceptance.run_all(cfg["seed"], cfg["tolerance_scale"], out_dir=out,
                                 only=cfg.get("criteria"))
    for r in results:
        print(r.line())
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    write_outputs(Path(cfg["out"]), "acceptance",
                  acceptance._table(("criterion", "name", "passed", "detail"),
                                    [(r.number, r.name, r.passed, r.detail) for r in results]), cfg)
    return 3 if failed else 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        names = parse_experiments(args.experiment)
        cp = read_config(args.config)
        configs = [resolve(n, args, cp) for n in names]
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    status = 0
    try:
        for cfg in configs:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RegimeWarning)
                if cfg["experiment"] == "acceptance":
                    status = max(status, run_acceptance(cfg))
                    continue
                text = run_experiment(cfg)
            write_outputs(Path(cfg["out"]), cfg["experiment"], text, cfg)
            print(f"wrote {Path(cfg['out']) / (cfg['experiment'] + '.csv')}")
    except (AccuracyError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (DomainError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    return status


if __name__ == "__main__":
    sys.exit(main())
