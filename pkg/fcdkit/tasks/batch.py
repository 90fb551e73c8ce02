"""Пул процесів для пакетної оцінки метрик та рукавів бенчмарку"""
import logging
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

from fcdkit.core.config import apply_settings, settings
from fcdkit.core.exceptions import DataFileException
from fcdkit.schemas.metrics import MetricReport
from fcdkit.services.benchmark import ArmResult, run_benchmark_arm
from fcdkit.services.metrics import evaluate
from fcdkit.utils.point_io import MESH_SUFFIXES, load_cloud, load_mesh

logger = logging.getLogger(__name__)

Job = TypeVar("Job")
Result = TypeVar("Result")


@dataclass(frozen=True)
class PairJob:
    """Пара файлів (передбачення, ціль) з необов'язковими сіткою та частковим входом"""
    name: str
    pred_path: Path
    gt_path: Path
    mesh_path: Optional[Path] = None
    partial_path: Optional[Path] = None
    temperature: Optional[float] = None
    threshold: Optional[float] = None
    emd_approx: bool = False
    scale: float = 1.0

    def input_paths(self) -> List[Path]:
        return [p for p in (self.pred_path, self.gt_path, self.mesh_path, self.partial_path) if p is not None]


def discover_pairs(root: Path, pattern: str = "*.xyz", **options) -> List[PairJob]:
    """Пари з root/pred та root/gt з однаковим відносним шляхом, відсортовані"""
    root = Path(root)
    if not root.is_dir():
        raise DataFileException(f"Batch directory not found: {root}")
    pred_dir = root / "pred"
    if not pred_dir.is_dir():
        logger.warning(f"No 'pred' directory under {root}; the batch is empty")
        return []

    jobs = []
    for pred in sorted(p for p in pred_dir.glob(pattern) if p.is_file()):
        rel = pred.relative_to(pred_dir)
        gt = root / "gt" / rel
        if not gt.is_file():
            raise DataFileException(f"Ground truth missing for {rel.as_posix()}: expected {gt}")

        mesh = next(
            (candidate for candidate in (root / "mesh" / rel.parent / (rel.stem + s) for s in MESH_SUFFIXES)
             if candidate.is_file()),
            None,
        )
        partial_input = root / "partial" / rel
        jobs.append(PairJob(
            name=rel.as_posix(),
            pred_path=pred,
            gt_path=gt,
            mesh_path=mesh,
            partial_path=partial_input if partial_input.is_file() else None,
            **options,
        ))
    return jobs


def evaluate_pair(job: PairJob) -> Tuple[str, MetricReport]:
    P = load_cloud(job.pred_path)
    G = load_cloud(job.gt_path)
    report = evaluate(
        P,
        G,
        mesh=load_mesh(job.mesh_path) if job.mesh_path else None,
        partial=load_cloud(job.partial_path) if job.partial_path else None,
        temperature=job.temperature,
        threshold=job.threshold,
        emd_approx_allowed=job.emd_approx,
        scale=job.scale,
    )
    return job.name, report


def run_pool(
    func: Callable[[Job], Result],
    jobs: Sequence[Job],
    parallelism: int = 1,
    start_method: Optional[str] = None,
) -> List[Result]:
    """Результати в порядку вхідних завдань незалежно від порядку завершення

    Кожен процес стартує з копією поточних налаштувань (spawn та forkserver
    не успадковують змін, внесених через --config).
    """
    if parallelism <= 1 or len(jobs) <= 1:
        return [func(job) for job in jobs]
    workers = min(parallelism, len(jobs))
    logger.info(f"Running {len(jobs)} jobs on {workers} worker processes")
    context = multiprocessing.get_context(start_method) if start_method else None
    with ProcessPoolExecutor(
        max_workers=workers,
        mp_context=context,
        initializer=apply_settings,
        initargs=(settings.model_copy(),),
    ) as pool:
        return list(pool.map(func, jobs))


def run_batch(
    jobs: Sequence[PairJob], parallelism: int = 1, start_method: Optional[str] = None,
) -> List[Tuple[str, MetricReport]]:
    logger.info(f"Batch evaluation: {len(jobs)} pairs, parallelism={parallelism}")
    return run_pool(evaluate_pair, jobs, parallelism, start_method)


def run_arms(
    arms: Sequence[str],
    parallelism: int = 1,
    seeds: Sequence[int] = (42,),
    steps: Optional[int] = None,
) -> List[ArmResult]:
    """Всі пари (рукав, seed); порядок: рукави, всередині - seeds"""
    options = {}
    if steps is not None:
        options["steps"] = steps
    jobs = [(arm, seed) for arm in arms for seed in seeds]
    return run_pool(partial(_run_arm_job, **options), jobs, parallelism)


def _run_arm_job(job: Tuple[str, int], **options) -> ArmResult:
    arm, seed = job
    return run_benchmark_arm(arm, seed=seed, **options)
