"""Command-line front end.

    mvtest simulate --preset ates-categorical --seed 42 --reps 10000 --out t1.csv
    mvtest simulate --config scenarios.json --format text
    mvtest analyze --input data.csv --group-col group --treatment continuous
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, replace

from .errors import MvTestError
from .manova import CONVENTIONS, TREATMENTS, analyze
from .sampler import CovarianceSpec
from .simlab import DEFAULT_ALPHA, PRESETS, ScenarioConfig, preset_tables, run_suite
from .tables import FORMATS, read_grouped_csv, write_table

SEED_ENV = "MVTEST_SEED"

CONTINUOUS_NOTICE = (
    "notice: treating the group column as continuous fits a multivariate regression on "
    "the group codes and tests that all slopes are zero; this is not MANOVA. "
    "Use --treatment categorical to test equality of group mean vectors."
)


class UsageError(MvTestError):
    pass


@dataclass(frozen=True)
class RunConfig:
    mode: str
    preset: str | None = None
    config_path: str | None = None
    input_path: str | None = None
    group_col: str = "group"
    seed: int = 0
    reps: int | None = None
    alpha: float = DEFAULT_ALPHA
    convention: str = "software"
    treatment: str | None = None
    workers: int = 1
    out: str | None = None
    fmt: str = "csv"
    verbose: bool = False


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _seed(text):
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 bits, got {value}")
    return value


def _alpha(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid alpha {text!r}") from None
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 1), got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mvtest", description="MANOVA group tests and type I error simulations.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="mode", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--convention", choices=CONVENTIONS, default="software",
                        help="F approximation convention (default: software)")
    common.add_argument("--alpha", type=_alpha, default=DEFAULT_ALPHA)
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", dest="fmt", choices=FORMATS, default="csv")

    sim = sub.add_parser("simulate", parents=[common], help="run Monte Carlo scenarios")
    src = sim.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=list(PRESETS))
    src.add_argument("--config", dest="config_path", help="JSON file describing scenarios")
    sim.add_argument("--seed", type=_seed, help=f"master seed (fallback: ${SEED_ENV}, then 0)")
    sim.add_argument("--reps", type=_positive_int, help="replicates per scenario (default 10000)")
    sim.add_argument("--treatment", choices=TREATMENTS, help="override the scenarios' treatment")
    sim.add_argument("--workers", type=_positive_int, default=1)

    ana = sub.add_parser("analyze", parents=[common], help="analyze a grouped CSV file")
    ana.add_argument("--input", dest="input_path", required=True)
    ana.add_argument("--group-col", default="group")
    ana.add_argument("--treatment", choices=TREATMENTS, default="categorical")
    return parser


def parse_args(argv=None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    if ns.mode == "simulate":
        seed = ns.seed
        if seed is None:
            env = os.environ.get(SEED_ENV)
            try:
                seed = _seed(env) if env else 0
            except argparse.ArgumentTypeError as exc:
                raise UsageError(f"mvtest: error: ${SEED_ENV}: {exc}") from None
        return RunConfig(
            mode="simulate", preset=ns.preset, config_path=ns.config_path, seed=seed,
            reps=ns.reps, alpha=ns.alpha, convention=ns.convention, treatment=ns.treatment,
            workers=ns.workers, out=ns.out, fmt=ns.fmt, verbose=ns.verbose,
        )
    return RunConfig(
        mode="analyze", input_path=ns.input_path, group_col=ns.group_col, alpha=ns.alpha,
        convention=ns.convention, treatment=ns.treatment, out=ns.out, fmt=ns.fmt,
        verbose=ns.verbose,
    )


def _cov_from_json(obj, r, g) -> CovarianceSpec:
    kind = obj.get("kind", "identity")
    if kind == "identity":
        return CovarianceSpec.identity(r, g)
    if kind == "shared-diagonal":
        return CovarianceSpec.shared_diagonal(obj["values"], g)
    if kind == "scaled-identity":
        return CovarianceSpec.scaled_identity(r, obj["values"])
    if kind == "toeplitz":
        return CovarianceSpec.toeplitz(r, obj["values"], obj.get("sigma2", 1.0))
    if kind == "explicit":
        return CovarianceSpec.explicit(obj["matrices"])
    raise UsageError(f"unknown covariance kind {kind!r}")


def load_scenarios(path, cfg: RunConfig) -> list[ScenarioConfig]:
    """Scenarios from a JSON file of the form ``{"scenarios": [...]}``.

    Each entry has ``scenario_id``, ``sizes``, ``r`` (default 3), ``cov``
    (``{"kind": ..., "values": ...}``) and optionally ``treatment``,
    ``reps`` and ``means``.
    """
    with open(path) as fh:
        doc = json.load(fh)
    if isinstance(doc, list):
        doc = {"scenarios": doc}
    entries = doc["scenarios"]
    default_reps = int(doc.get("reps", 10_000))
    out = []
    for k, e in enumerate(entries):
        sizes = tuple(e["sizes"])
        r = int(e.get("r", 3))
        out.append(ScenarioConfig(
            scenario_id=int(e.get("scenario_id", k + 1)),
            sizes=sizes,
            cov=_cov_from_json(e.get("cov", {}), r, len(sizes)),
            treatment=cfg.treatment or e.get("treatment", "categorical"),
            convention=cfg.convention,
            reps=cfg.reps or int(e.get("reps", default_reps)),
            alpha=cfg.alpha,
            master_seed=cfg.seed,
            means=e.get("means"),
        ))
    return out


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)


def run(cfg: RunConfig) -> int:
    if cfg.mode == "simulate":
        if cfg.preset:
            scenarios = preset_tables(cfg.preset, cfg.seed, cfg.reps or 10_000, cfg.convention, cfg.alpha)
            if cfg.treatment:
                scenarios = [replace(s, treatment=cfg.treatment) for s in scenarios]
        else:
            scenarios = load_scenarios(cfg.config_path, cfg)
        if any(s.treatment == "continuous" for s in scenarios):
            print(CONTINUOUS_NOTICE, file=sys.stderr)
        table = run_suite(scenarios, workers=cfg.workers)
        _emit(write_table(table, cfg.fmt, cfg.out), cfg.out)
        return 0

    data = read_grouped_csv(cfg.input_path, cfg.group_col)
    if cfg.treatment == "continuous":
        print(CONTINUOUS_NOTICE, file=sys.stderr)
        codes = ", ".join(f"{label}->{int(c)}" for label, c in zip(data.labels, data.codes))
        print(f"notice: group codes {codes}", file=sys.stderr)
    result = analyze(data, cfg.treatment, cfg.convention)
    _emit(write_table(result, cfg.fmt, cfg.out), cfg.out)
    return 0


def main(argv=None) -> int:
    try:
        cfg = parse_args(argv)
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if cfg.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return run(cfg)
    except (MvTestError, OSError, ValueError, KeyError) as exc:
        print(f"mvtest: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
