"""Command-line experiment runner.

Usage::

    acbo run CONFIG --out DIR [--seed N]
    acbo report RUN_CSV
    acbo train-classifier --out PATH

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import configparser
import dataclasses
import io
import logging
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .engine import (
    ObjectiveError,
    RunConfig,
    read_run_csv,
    run_continuous,
    run_discrete,
    write_best_design_csv,
    write_distribution_csv,
    write_run_csv,
)
from .objectives import (
    AttackObjective,
    AttackSpec,
    CartPoleObjective,
    GmmObjective,
    GmmParams,
    discretize,
    load_bundled,
)
from .objectives import digits
from .objectives.classifier import load_weights, save_weights, train_classifier

log = logging.getLogger("acbo")

EXPERIMENTS = ("toy-continuous", "toy-discrete", "attack-free", "attack-perturb", "cartpole")
_SECTION = "experiment"
_RUN_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_GMM_FIELDS = tuple(f.name for f in dataclasses.fields(GmmParams))


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    run: RunConfig = RunConfig()
    n_designs: int = 21
    target_class: Optional[int] = None
    base_class: int = 6
    delta: float = 0.2
    episodes_per_query: int = 5
    classifier: Optional[str] = None
    gmm: GmmParams = GmmParams()

    @property
    def target(self) -> int:
        if self.target_class is not None:
            return self.target_class
        return 8 if self.experiment == "attack-perturb" else 1


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def config_to_text(cfg: ExperimentConfig) -> str:
    """Flat ``key = value`` serialization; ``parse_config`` inverts it."""
    lines = [f"experiment = {cfg.experiment}"]
    for name in _RUN_FIELDS:
        value = getattr(cfg.run, name)
        if value is not None:
            lines.append(f"{name} = {_fmt(value)}")
    for name in ("n_designs", "target_class", "base_class", "delta", "episodes_per_query", "classifier"):
        value = getattr(cfg, name)
        if value is not None:
            lines.append(f"{name} = {_fmt(value)}")
    for name in _GMM_FIELDS:
        lines.append(f"gmm_{name} = {_fmt(getattr(cfg.gmm, name))}")
    return "\n".join(lines) + "\n"


def _convert(key: str, raw: str, kind):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind == "widths":
            widths = tuple(int(w) for w in raw.split(",") if w.strip())
            if not widths or min(widths) < 1:
                raise ValueError("widths must be positive integers")
            return widths
        return raw
    except ValueError as exc:
        raise ConfigError(key, f"cannot parse {raw!r} ({exc})") from None


_RUN_KINDS = {
    "episodes": int, "rounds": int, "critic_batch": int, "actor_batch": int,
    "alpha_initial": float, "alpha_final": float, "lr_actor": float, "lr_critic": float,
    "seed": int, "actor_hidden": "widths", "critic_hidden": "widths",
    "buffer_capacity": int, "warmup": int, "noise_input": str, "noise_dim": int,
}
_EXTRA_KINDS = {
    "n_designs": int, "target_class": int, "base_class": int, "delta": float,
    "episodes_per_query": int, "classifier": str,
}


def parse_config(text: str, seed: Optional[int] = None, base_dir=None) -> ExperimentConfig:
    """Parse a flat key-value config; raises ``ConfigError`` naming the bad key.

    A relative ``classifier`` path is resolved against ``base_dir`` when given.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(f"[{_SECTION}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError("syntax", str(exc).splitlines()[0]) from None
    items = dict(parser.items(_SECTION))

    experiment = items.pop("experiment", None)
    if experiment is None:
        raise ConfigError("experiment", "missing")
    if experiment not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {', '.join(EXPERIMENTS)}")

    run_kw, extra_kw, gmm_kw = {}, {}, {}
    for key, raw in items.items():
        if key in _RUN_KINDS:
            run_kw[key] = _convert(key, raw, _RUN_KINDS[key])
        elif key in _EXTRA_KINDS:
            extra_kw[key] = _convert(key, raw, _EXTRA_KINDS[key])
        elif key.startswith("gmm_") and key[4:] in _GMM_FIELDS:
            gmm_kw[key[4:]] = _convert(key, raw, float)
        else:
            raise ConfigError(key, "unknown key")
    if seed is not None:
        run_kw["seed"] = seed

    try:
        run = RunConfig(**run_kw)
    except ValueError as exc:
        named = [k for k in _RUN_FIELDS if k in str(exc)]
        # prefer a key the config actually set
        name = next((k for k in named if k in run_kw), named[0] if named else "run")
        raise ConfigError(name, str(exc)) from None
    try:
        gmm = GmmParams(**gmm_kw)
    except ValueError as exc:
        bad = [k for k in _GMM_FIELDS if gmm_kw.get(k, 1.0) <= 0]
        raise ConfigError("gmm_" + (bad[0] if bad else "params"), str(exc)) from None

    if base_dir is not None and "classifier" in extra_kw and not Path(extra_kw["classifier"]).is_absolute():
        extra_kw["classifier"] = str(Path(base_dir) / extra_kw["classifier"])
    cfg = ExperimentConfig(experiment, run, gmm=gmm, **extra_kw)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.n_designs < 2:
        raise ConfigError("n_designs", "must be >= 2")
    if cfg.episodes_per_query < 1:
        raise ConfigError("episodes_per_query", "must be >= 1")
    if not 0 < cfg.delta <= 1:
        raise ConfigError("delta", "must lie in (0, 1]")
    if cfg.target_class is not None and not 0 <= cfg.target_class <= 9:
        raise ConfigError("target_class", "must be in 0..9")
    if not 0 <= cfg.base_class <= 9:
        raise ConfigError("base_class", "must be in 0..9")
    if cfg.experiment == "attack-perturb" and cfg.base_class == cfg.target:
        raise ConfigError("base_class", "must differ from target_class")
    if cfg.classifier is not None and not Path(cfg.classifier).is_file():
        raise ConfigError("classifier", f"file not found: {cfg.classifier}")


def load_config(path, seed: Optional[int] = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, seed, base_dir=Path(path).parent)


def _classifier(cfg: ExperimentConfig):
    return load_weights(cfg.classifier) if cfg.classifier else load_bundled()


def build_objective(cfg: ExperimentConfig):
    """The black-box scorer for ``cfg``; discrete experiments expose ``n_designs``."""
    if cfg.experiment == "toy-continuous":
        return GmmObjective(cfg.gmm)
    if cfg.experiment == "toy-discrete":
        return discretize(GmmObjective(cfg.gmm), cfg.n_designs)
    if cfg.experiment == "attack-free":
        return AttackObjective(_classifier(cfg), AttackSpec(target_class=cfg.target, delta=cfg.delta))
    if cfg.experiment == "attack-perturb":
        spec = AttackSpec(target_class=cfg.target, base_image=digits.prototype(cfg.base_class),
                          base_class=cfg.base_class, delta=cfg.delta)
        return AttackObjective(_classifier(cfg), spec, perturb=True)
    return CartPoleObjective(seed=cfg.run.seed, episodes_per_query=cfg.episodes_per_query)


def execute(cfg: ExperimentConfig):
    """Run the experiment and return ``(report, objective)``."""
    objective = build_objective(cfg)
    if cfg.experiment == "toy-discrete":
        return run_discrete(cfg.run, objective), objective
    return run_continuous(cfg.run, objective), objective


def pgm_text(image: np.ndarray, comment: str = "") -> str:
    """Plain (P2) graymap with 8-bit levels."""
    img = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    levels = np.rint(img * 255).astype(int)
    h, w = levels.shape
    out = ["P2"]
    if comment:
        out.append(f"# {comment}")
    out.append(f"{w} {h}")
    out.append("255")
    out.extend(" ".join(str(v) for v in row) for row in levels)
    return "\n".join(out) + "\n"


def _write_atomic(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _render(writer, *args) -> str:
    buf = io.StringIO()
    writer(*args, buf)
    return buf.getvalue()


def write_outputs(cfg: ExperimentConfig, report, objective, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prov = f"experiment={cfg.experiment} version={__version__}"
    files = {
        "run.csv": _render(lambda r, fh: write_run_csv(r, fh, prov), report),
        "best_design.csv": _render(write_best_design_csv, report),
    }
    if cfg.experiment == "toy-discrete":
        files["distribution.csv"] = _render(write_distribution_csv, report)
    if cfg.experiment.startswith("attack"):
        image = objective.image(report.final_best.design)
        files["best_design.pgm"] = pgm_text(
            image, f"seed={report.seed} target={cfg.target} score={report.final_best.score!r}")
    written = []
    for name, text in files.items():
        _write_atomic(out / name, text)
        written.append(out / name)
    return written


def summarize(rows: list[dict]) -> dict:
    """Best score, first episode within 1% of it, and mean of the last 100 scores."""
    if not rows:
        raise ValueError("run CSV has no rows")
    scores = np.array([r["score"] for r in rows])
    best = float(scores.max())
    threshold = best - 0.01 * abs(best)
    first = next(r["episode"] for r, s in zip(rows, scores) if s >= threshold)
    return {"best_score": best, "first_episode_99pct": int(first),
            "mean_last_100": float(scores[-100:].mean())}


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    log.info("running %s for %d episodes (seed %d)", cfg.experiment, cfg.run.episodes, cfg.run.seed)
    try:
        report, objective = execute(cfg)
        written = write_outputs(cfg, report, objective, args.out)
    except ObjectiveError as exc:
        print(f"runtime error at episode {exc.episode}: {exc.cause!r}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    print(f"best score {report.final_best.score!r} after {report.episodes_run} episodes")
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_report(args) -> int:
    try:
        with open(args.csv, newline="") as fh:
            summary = summarize(read_run_csv(fh))
    except (OSError, ValueError, KeyError) as exc:
        print(f"cannot read run CSV: {exc}", file=sys.stderr)
        return 1
    print(f"best_score {summary['best_score']!r}")
    print(f"first_episode_99pct {summary['first_episode_99pct']}")
    print(f"mean_last_100 {summary['mean_last_100']!r}")
    return 0


def cmd_train_classifier(args) -> int:
    clf = train_classifier(seed=args.seed, log=log.info)
    save_weights(clf, args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="acbo", description="Actor-critic black-box design optimization")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a config file")
    run.add_argument("config")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="summarize a run CSV")
    rep.add_argument("csv")
    rep.set_defaults(func=cmd_report)

    tr = sub.add_parser("train-classifier", help="regenerate the bundled classifier weights")
    tr.add_argument("--out", required=True)
    tr.add_argument("--seed", type=int, default=1234)
    tr.set_defaults(func=cmd_train_classifier)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
