"""
Командний рядок fcdkit: метрики, розклади ваг, аналіз застою, оптимізація, пакетна оцінка
"""
import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from pydantic import ValidationError

from fcdkit import __version__
from fcdkit.core import counters
from fcdkit.core.config import Settings, apply_settings, load_settings, settings
from fcdkit.core.exceptions import DataFileException, FcdKitException, ValidationException
from fcdkit.core.logging import setup_logging
from fcdkit.models import PointCloud
from fcdkit.schemas.descent import ObjectiveKind, ObjectiveSpec, OptimizerConfig, TRACE_COLUMNS, UpdateRule
from fcdkit.schemas.manifest import RunManifest
from fcdkit.schemas.metrics import METRIC_COLUMNS, DistanceOrder
from fcdkit.schemas.objective import FcdWeights, ScheduleKind, ScheduleSpec
from fcdkit.schemas.stalemate import SWEEP_COLUMNS, SweepConfig
from fcdkit.services.benchmark import (
    BENCHMARK_ARMS,
    BENCHMARK_ORDER,
    BENCHMARK_STEP_SIZE,
    BENCHMARK_STEPS,
    SUMMARY_COLUMNS,
    aggregate_columns,
    aggregate_results,
    benchmark_config,
    clustered_grid,
)
from fcdkit.services.descent import optimize
from fcdkit.services.metrics import evaluate
from fcdkit.services.objective import schedule_table
from fcdkit.services.stalemate import build_ambiguity_pair, sweep, sweep_comment
from fcdkit.tasks.batch import discover_pairs, run_arms, run_batch
from fcdkit.utils.csv_io import csv_text
from fcdkit.utils.digest import file_sha256
from fcdkit.utils.point_io import load_cloud, load_mesh, write_xyz

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
# Прапорці, що не впливають на артефакти і не зберігаються в маніфесті
UNRECORDED_FLAGS = ("--out", "--metrics-textfile")
CANONICAL_BENCHMARK = "clustered-grid"


class RunContext:
    """Стан одного запуску команди: прапорці, seed, вхідні файли та директорія виводу"""

    def __init__(self, args: argparse.Namespace, argv: Sequence[str]):
        self.args = args
        self.argv = list(argv)
        self.seed: int = args.seed if args.seed is not None else settings.DEFAULT_SEED
        self.out: Optional[Path] = getattr(args, "out", None)
        self.inputs: Dict[str, str] = {}
        if args.config is not None:
            self.track(args.config)

    def track(self, path: Optional[Path]) -> Optional[Path]:
        """Запам'ятати вхідний файл для маніфесту"""
        if path is not None:
            path = Path(path)
            self.inputs[path.as_posix()] = file_sha256(path)
        return path

    def emit(self, name: str, text: str) -> None:
        """Артефакт у директорію виводу або в stdout"""
        if self.out is None:
            sys.stdout.write(text)
            return
        self.out.mkdir(parents=True, exist_ok=True)
        with open(self.out / name, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        logger.info(f"Written {self.out / name}")

    def write_cloud(self, name: str, cloud: PointCloud) -> None:
        if self.out is None:
            return
        self.out.mkdir(parents=True, exist_ok=True)
        write_xyz(self.out / name, cloud)
        logger.info(f"Written {self.out / name}")

    def write_manifest(self) -> None:
        if self.out is None:
            return
        manifest = RunManifest(
            command=self.args.command,
            argv=strip_flags(self.argv, UNRECORDED_FLAGS),
            flags=recorded_flags(self.args),
            seed=self.seed,
            inputs=dict(sorted(self.inputs.items())),
            config_file=Path(self.args.config).as_posix() if self.args.config else None,
        )
        self.emit(MANIFEST_NAME, manifest.to_json())


def strip_flags(argv: Sequence[str], names: Sequence[str]) -> List[str]:
    result: List[str] = []
    skip = False
    for token in argv:
        if skip:
            skip = False
            continue
        if token in names:
            skip = True
            continue
        if any(token.startswith(f"{name}=") for name in names):
            continue
        result.append(token)
    return result


def recorded_flags(args: argparse.Namespace) -> Dict[str, Any]:
    flags = {}
    for key, value in sorted(vars(args).items()):
        if key in ("func", "out", "metrics_textfile"):
            continue
        if isinstance(value, Path):
            value = value.as_posix()
        elif isinstance(value, list):
            value = [v.as_posix() if isinstance(v, Path) else v for v in value]
        flags[key] = value
    return flags


# ========== Спільні прапорці ==========

def add_schedule_flags(parser: argparse.ArgumentParser, kind_flag: str) -> None:
    parser.add_argument(
        kind_flag, dest="kind", choices=[k.value for k in ScheduleKind], default=None,
        help="Тип розкладу ваг",
    )
    parser.add_argument("--theta", type=float, default=None, help="Верхня межа ваги beta")
    parser.add_argument("--tau", type=float, default=None, help="Нижня межа (alpha)")
    parser.add_argument("--transition-epoch", type=int, default=None, help="Епоха переходу t")
    parser.add_argument("--total-epochs", type=int, default=None, help="Кількість епох T")
    parser.add_argument("--sigma", type=float, default=None, help="Швидкість згасання")
    parser.add_argument("--schedule-file", type=Path, default=None, help="key=value або JSON файл розкладу")


def schedule_from_args(ctx: RunContext, default_kind: Optional[str]) -> Optional[ScheduleSpec]:
    args = ctx.args
    values: Dict[str, Any] = {}
    if args.schedule_file is not None:
        path = ctx.track(args.schedule_file)
        try:
            text = path.read_text(encoding="utf-8")
        except UnicodeDecodeError as e:
            raise DataFileException(f"Schedule file {path} is not UTF-8 text: {e}")
        values.update(ScheduleSpec.from_key_values(text).model_dump(by_alias=True))

    overrides = {
        "kind": args.kind,
        "theta": args.theta,
        "tau": args.tau,
        "t": args.transition_epoch,
        "T": args.total_epochs,
        "sigma": args.sigma,
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "kind" not in values:
        if default_kind is None:
            return None
        values["kind"] = default_kind
    return ScheduleSpec.model_validate(values)


def load_input(ctx: RunContext, path: Path) -> PointCloud:
    return load_cloud(ctx.track(path))


# ========== Команди ==========

def cmd_metrics(ctx: RunContext) -> int:
    """Метрики для однієї пари хмар: JSON у stdout (або CSV з --csv)"""
    args = ctx.args
    P = load_input(ctx, args.pred)
    G = load_input(ctx, args.gt)
    mesh = load_mesh(ctx.track(args.mesh)) if args.mesh else None
    partial_input = load_input(ctx, args.partial) if args.partial else None

    report = evaluate(
        P,
        G,
        mesh=mesh,
        partial=partial_input,
        metrics=[name.strip() for name in args.metrics.split(",")] if args.metrics else None,
        temperature=args.temperature,
        threshold=args.threshold,
        emd_approx_allowed=args.emd_approx,
        scale=args.scale,
    )

    if ctx.out is not None:
        ctx.emit("report.json", report.to_json() + "\n")
        ctx.emit("report.csv", csv_text(report.csv_header(), [report.csv_row()]))
    elif args.csv:
        ctx.emit("report.csv", csv_text(report.csv_header(), [report.csv_row()]))
    else:
        ctx.emit("report.json", report.to_json() + "\n")
    ctx.write_manifest()
    return 0


def cmd_schedule(ctx: RunContext) -> int:
    """Таблиця (epoch, alpha, beta) для всіх епох розкладу"""
    spec = schedule_from_args(ctx, default_kind=ScheduleKind.STATIC.value)
    ctx.emit("schedule.csv", csv_text(["epoch", "alpha", "beta"], schedule_table(spec)))
    ctx.write_manifest()
    return 0


def sweep_xs(args: argparse.Namespace, g1, g2) -> Optional[List[float]]:
    if args.x_start is None and args.x_stop is None and args.x_step is None:
        return None
    start = 0.6 if args.x_start is None else args.x_start
    stop = 3.4 if args.x_stop is None else args.x_stop
    step = 0.1 if args.x_step is None else args.x_step
    if not (step > 0 and stop >= start and math.isfinite(stop) and math.isfinite(start)):
        raise ValidationException(f"Invalid sweep range: start={start}, stop={stop}, step={step}")
    count = int(round((stop - start) / step))
    if count > 100_000:
        raise ValidationException(f"Sweep range has too many points ({count + 1})")

    xs = [round(start + i * step, 12) for i in range(count + 1)]
    # Точка, рівновіддалена від g1 та g2 на осі x, виключається
    if g1[0] != g2[0]:
        x_mid = (g2[0] ** 2 + g2[1] ** 2 - g1[0] ** 2 - g1[1] ** 2) / (2 * (g2[0] - g1[0]))
        xs = [x for x in xs if abs(x - x_mid) > 1e-9]
    return xs


def cmd_sweep(ctx: RunContext) -> int:
    """Дані для відтворення кривих значень та градієнтів CD/FCD"""
    args = ctx.args
    values: Dict[str, Any] = {}
    for name in ("g1", "g2", "p1"):
        if getattr(args, name) is not None:
            values[name] = tuple(getattr(args, name))
    if args.alpha is not None or args.beta is not None:
        values["weights"] = FcdWeights(
            alpha=1.0 if args.alpha is None else args.alpha,
            beta=2.0 if args.beta is None else args.beta,
        )
    defaults = SweepConfig()
    xs = sweep_xs(args, values.get("g1", defaults.g1), values.get("g2", defaults.g2))
    if xs is not None:
        values["xs"] = xs
    config = SweepConfig(**values)

    rows = sweep(config)
    ctx.emit("sweep.csv", csv_text(SWEEP_COLUMNS, [row.csv_row() for row in rows], comment=sweep_comment(config)))
    ctx.write_manifest()
    return 0


def objective_from_args(args: argparse.Namespace, benchmark: bool) -> ObjectiveSpec:
    kind = ObjectiveKind(args.objective)
    r = DistanceOrder(args.r) if args.r is not None else None
    if kind == ObjectiveKind.FCD:
        weights = None
        if args.alpha is not None or args.beta is not None:
            if args.alpha is None or args.beta is None:
                raise ValidationException("--alpha and --beta must be given together")
            weights = FcdWeights(alpha=args.alpha, beta=args.beta)
        if r is None and benchmark:
            r = BENCHMARK_ORDER
        return ObjectiveSpec(kind=kind, weights=weights, r=r)
    if kind == ObjectiveKind.DCD_LOSS:
        return ObjectiveSpec(kind=kind, r=r, temperature=args.temperature)
    return ObjectiveSpec(kind=kind, r=r)


def cmd_optimize(ctx: RunContext) -> int:
    """Прямий спуск: фінальна хмара, trace та маніфест"""
    args = ctx.args
    benchmark = args.benchmark is not None
    if benchmark:
        if args.init is not None or args.target is not None:
            raise ValidationException("--benchmark replaces --init and --target")
        init, target = clustered_grid(ctx.seed)
    else:
        if args.init is None or args.target is None:
            raise ValidationException("optimize needs --init and --target (or --benchmark)")
        init, target = load_input(ctx, args.init), load_input(ctx, args.target)

    objective = objective_from_args(args, benchmark)
    schedule = None
    if objective.kind == ObjectiveKind.FCD and objective.weights is None:
        schedule = schedule_from_args(ctx, default_kind=None)
        if schedule is None:
            raise ValidationException("Objective 'fcd' needs --alpha/--beta or --schedule")

    steps = args.steps if args.steps is not None else (BENCHMARK_STEPS if benchmark else 1000)
    step_size = args.step_size if args.step_size is not None else (
        BENCHMARK_STEP_SIZE if benchmark else 1e-3
    )
    base = benchmark_config(ctx.seed, steps, step_size, args.record_every, schedule if benchmark else None)
    config = OptimizerConfig(
        steps=steps,
        step_size=step_size,
        update_rule=UpdateRule(args.update_rule),
        momentum_coeff=args.momentum,
        seed=ctx.seed,
        record_every=args.record_every,
        steps_per_epoch=args.steps_per_epoch or base.steps_per_epoch,
    )

    final, trace = optimize(init, target, objective, schedule=schedule, config=config, pinned=args.pin)
    ctx.write_cloud("final.xyz", final)
    ctx.emit("trace.csv", csv_text(TRACE_COLUMNS, trace.csv_rows()))
    ctx.write_manifest()
    return 0


def cmd_batch(ctx: RunContext) -> int:
    """Таблиця метрик для всіх пар DIR/pred - DIR/gt"""
    args = ctx.args
    jobs = discover_pairs(
        args.directory,
        args.glob,
        temperature=args.temperature,
        threshold=args.threshold,
        emd_approx=args.emd_approx,
        scale=args.scale,
    )
    for job in jobs:
        for path in job.input_paths():
            ctx.track(path)

    parallelism = args.parallelism if args.parallelism is not None else settings.BATCH_PARALLELISM
    results = run_batch(jobs, parallelism)
    rows = [[name] + report.csv_row() for name, report in results]
    ctx.emit("batch.csv", csv_text(["name"] + METRIC_COLUMNS, rows))
    ctx.write_manifest()
    return 0


def cmd_ambiguity(ctx: RunContext) -> int:
    """Пара хмар з однаковим CD-l1 та різним DCD"""
    args = ctx.args
    clustered, uniform, grid, report = build_ambiguity_pair(args.n, ctx.seed, args.temperature)
    ctx.write_cloud("clustered.xyz", clustered)
    ctx.write_cloud("uniform.xyz", uniform)
    ctx.write_cloud("grid.xyz", grid)
    data = report.model_dump()
    data["relative_cd_gap"] = report.relative_cd_gap
    ctx.emit("report.json", json.dumps(data) + "\n")
    ctx.write_manifest()
    return 0


def parse_seeds(text: str) -> List[int]:
    try:
        seeds = [int(chunk) for chunk in text.split(",") if chunk.strip()]
    except ValueError:
        raise ValidationException(f"--seeds expects comma-separated integers, got '{text}'")
    if not seeds or len(set(seeds)) != len(seeds):
        raise ValidationException(f"--seeds needs distinct integers, got '{text}'")
    return seeds


def cmd_ablation(ctx: RunContext) -> int:
    """Всі рукави бенчмарку: підсумкова таблиця та trace кожного запуску

    З --seeds підсумок містить середнє та std по seeds, окремі запуски йдуть у runs.csv.
    """
    args = ctx.args
    arms = args.arms.split(",") if args.arms else list(BENCHMARK_ARMS)
    unknown = [arm for arm in arms if arm not in BENCHMARK_ARMS]
    if unknown:
        raise ValidationException(f"Unknown benchmark arms: {', '.join(unknown)}")
    seeds = parse_seeds(args.seeds) if args.seeds is not None else [ctx.seed]

    parallelism = args.parallelism if args.parallelism is not None else settings.BATCH_PARALLELISM
    results = run_arms(arms, parallelism, seeds, args.steps)
    if args.seeds is None:
        ctx.emit("summary.csv", csv_text(SUMMARY_COLUMNS, [result.summary_row() for result in results]))
    else:
        ctx.emit("summary.csv", csv_text(aggregate_columns(), aggregate_results(results)))

    if ctx.out is not None:
        if args.seeds is not None:
            ctx.emit("runs.csv", csv_text(
                ["seed", *SUMMARY_COLUMNS], [[result.seed, *result.summary_row()] for result in results],
            ))
        for result in results:
            name = f"trace_{result.arm}.csv" if args.seeds is None else f"trace_{result.arm}_seed{result.seed}.csv"
            ctx.emit(name, csv_text(TRACE_COLUMNS, result.trace.csv_rows()))
    ctx.write_manifest()
    return 0


def cmd_replay(ctx: RunContext) -> int:
    """Повтор запуску з маніфесту після перевірки вхідних файлів"""
    args = ctx.args
    path = Path(args.manifest)
    try:
        manifest = RunManifest.model_validate_json(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise DataFileException(f"Cannot read manifest {path}: {e}")

    for input_path, digest in manifest.inputs.items():
        if file_sha256(Path(input_path)) != digest:
            raise DataFileException(f"Input {input_path} changed since the manifest was written")
    if manifest.version != __version__:
        logger.warning(f"Manifest written by fcdkit {manifest.version}, replaying with {__version__}")

    logger.info(f"Replaying '{manifest.command}' into {args.out}")
    return run([*manifest.argv, "--out", str(args.out)])


# ========== Парсер ==========

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fcdkit",
        description="Flexible-weighted Chamfer Distance toolkit",
        allow_abbrev=False,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", type=Path, default=None, help="JSON файл налаштувань")
    parser.add_argument("--seed", type=int, default=None, help="Єдине джерело випадковості")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ERROR")
    parser.add_argument("--metrics-textfile", type=Path, default=None,
                        help="Записати лічильники процесу у форматі textfile collector")

    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, func: Callable[[RunContext], int], help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text, allow_abbrev=False)
        p.set_defaults(func=func)
        p.add_argument("--out", type=Path, default=None, help="Директорія для артефактів та маніфесту")
        return p

    p = command("metrics", cmd_metrics, "Метрики для пари хмар")
    p.add_argument("pred", type=Path)
    p.add_argument("gt", type=Path)
    p.add_argument("--mesh", type=Path, default=None, help="Сітка для P2F (.ply/.obj)")
    p.add_argument("--partial", type=Path, default=None, help="Частковий вхід для fidelity")
    p.add_argument("--metrics", default=None, help="Список метрик через кому")
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--emd-approx", action="store_true")
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--csv", action="store_true")

    p = command("schedule", cmd_schedule, "Таблиця ваг розкладу")
    add_schedule_flags(p, "--kind")

    p = command("sweep", cmd_sweep, "Значення та градієнти CD/FCD вздовж g1-g2")
    p.add_argument("--g1", type=float, nargs=2, default=None)
    p.add_argument("--g2", type=float, nargs=2, default=None)
    p.add_argument("--p1", type=float, nargs=2, default=None)
    p.add_argument("--x-start", type=float, default=None)
    p.add_argument("--x-stop", type=float, default=None)
    p.add_argument("--x-step", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)

    p = command("optimize", cmd_optimize, "Прямий спуск по координатах")
    p.add_argument("--init", type=Path, default=None)
    p.add_argument("--target", type=Path, default=None)
    p.add_argument("--benchmark", choices=[CANONICAL_BENCHMARK], default=None)
    p.add_argument("--objective", choices=[k.value for k in ObjectiveKind], default=ObjectiveKind.FCD.value)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--r", choices=[o.value for o in DistanceOrder], default=None)
    p.add_argument("--temperature", type=float, default=None)
    add_schedule_flags(p, "--schedule")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--step-size", type=float, default=None)
    p.add_argument("--update-rule", choices=[u.value for u in UpdateRule], default=UpdateRule.PLAIN.value)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--record-every", type=int, default=100)
    p.add_argument("--steps-per-epoch", type=int, default=None)
    p.add_argument("--pin", type=int, nargs="*", default=[])

    p = command("batch", cmd_batch, "Пакетна оцінка DIR/pred проти DIR/gt")
    p.add_argument("directory", type=Path)
    p.add_argument("--glob", default="*.xyz")
    p.add_argument("--parallelism", type=int, default=None)
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--emd-approx", action="store_true")
    p.add_argument("--scale", type=float, default=1.0)

    p = command("ambiguity", cmd_ambiguity, "Кластеризована та рівномірна хмари з однаковим CD")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--temperature", type=float, default=None)

    p = command("ablation", cmd_ablation, "Всі рукави канонічного бенчмарку")
    p.add_argument("--arms", default=None, help="Список рукавів через кому")
    p.add_argument("--seeds", default=None, help="Seeds через кому: середнє та std по запусках")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--parallelism", type=int, default=None)

    p = command("replay", cmd_replay, "Повтор запуску з маніфесту")
    p.add_argument("manifest", type=Path)

    return parser


def run(argv: Sequence[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "replay" and args.out is None:
        raise ValidationException("replay needs --out")

    apply_settings(load_settings(args.config, DEFAULT_SEED=args.seed, LOG_LEVEL=args.log_level))
    setup_logging(settings.LOG_LEVEL, settings.LOG_DIR)
    ctx = RunContext(args, argv)
    logger.debug(f"Command '{args.command}' with seed {ctx.seed}")
    return args.func(ctx)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    defaults = Settings.model_validate(settings.model_dump())
    textfile: Optional[Path] = None
    try:
        textfile = _textfile_flag(argv)
        return run(argv)
    except FcdKitException as e:
        logger.error(e.detail)
        return e.exit_code
    except ValidationError as e:
        logger.error(f"Invalid input: {e}")
        return ValidationException.exit_code
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return DataFileException.exit_code
    finally:
        if textfile is not None:
            try:
                counters.export_textfile(textfile)
            except OSError as e:
                logger.error(f"Cannot write metrics textfile {textfile}: {e}")
        apply_settings(defaults)


def _textfile_flag(argv: Sequence[str]) -> Optional[Path]:
    for i, token in enumerate(argv):
        if token == "--metrics-textfile" and i + 1 < len(argv):
            return Path(argv[i + 1])
        if token.startswith("--metrics-textfile="):
            return Path(token.split("=", 1)[1])
    return None


if __name__ == "__main__":
    sys.exit(main())
