"""Прямий градієнтний спуск по координатах точок"""
import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Tuple

import numpy as np

from fcdkit.core import counters
from fcdkit.core.config import settings
from fcdkit.core.exceptions import DivergenceException, NumericalException, ValidationException
from fcdkit.models import PointCloud, StageLossSpec, require_non_empty, require_same_dim
from fcdkit.schemas.descent import (
    HierarchySpec,
    ObjectiveKind,
    ObjectiveSpec,
    OptimizationTrace,
    OptimizerConfig,
    TraceRow,
    UpdateRule,
)
from fcdkit.schemas.metrics import DistanceOrder
from fcdkit.schemas.objective import FcdWeights, ScheduleKind, ScheduleSpec, UncertaintyState
from fcdkit.services.emd import emd_exact
from fcdkit.services.metrics import chamfer_l1, dcd, nearest_pairs
from fcdkit.services.objective import (
    dcd_gradient_with_assignment,
    fcd,
    fcd_gradient_with_assignment,
    fcd_terms,
    multi_stage_gradient,
    multi_stage_loss,
    schedule_weights,
    uncertainty_loss,
)
from fcdkit.services.sampling import SamplingMethod, subsample

logger = logging.getLogger(__name__)

# Ваги, що записуються в trace для цілей без (alpha, beta)
HALF_WEIGHTS = FcdWeights(alpha=0.5, beta=0.5)


@dataclass
class _StepResult:
    value: float
    gradient: np.ndarray
    weights: FcdWeights
    fine: PointCloud
    assignment: np.ndarray
    state_gradient: Optional[Tuple[float, float]] = None


Evaluator = Callable[[np.ndarray, int, Optional[UncertaintyState]], _StepResult]


def support_pinning(cloud: PointCloud, pinned: Iterable[int]) -> np.ndarray:
    """Маска закріплених точок (True - точка не оновлюється)"""
    mask = np.zeros(len(cloud), dtype=bool)
    for index in pinned:
        if isinstance(index, bool) or int(index) != index:
            raise ValidationException(f"Pinned index must be an integer, got {index!r}")
        if not 0 <= int(index) < len(cloud):
            raise ValidationException(
                f"Pinned index {index} out of range for {len(cloud)} points"
            )
        mask[int(index)] = True
    mask.setflags(write=False)
    return mask


class _Snapshot:
    """Метрики знімка; EMD рахується на зменшених FPS хмарах"""

    def __init__(self, target: PointCloud, fine_size: int, limit: int):
        self.target = target
        self.size = min(fine_size, len(target), limit)
        self.reduced_target = self._reduce(target)

    def _reduce(self, cloud: PointCloud) -> PointCloud:
        if len(cloud) == self.size:
            return cloud
        return subsample(cloud, self.size, SamplingMethod.FARTHEST_POINT)

    def __call__(self, fine: PointCloud) -> Tuple[float, float, float]:
        return (
            chamfer_l1(fine, self.target),
            dcd(fine, self.target),
            emd_exact(self._reduce(fine), self.reduced_target),
        )


def _descend(
    variables: np.ndarray,
    free_mask: np.ndarray,
    evaluate: Evaluator,
    snapshot: _Snapshot,
    config: OptimizerConfig,
    label: str,
    dim: int,
    state: Optional[UncertaintyState] = None,
) -> Tuple[np.ndarray, OptimizationTrace]:
    factor = config.divergence_factor or settings.DIVERGENCE_FACTOR
    x = np.array(variables, dtype=np.float64, copy=True)
    velocity = np.zeros_like(x)
    rows = []
    previous: Optional[np.ndarray] = None
    initial_value: Optional[float] = None
    total_switches = 0

    for step in range(config.steps + 1):
        epoch = step // config.steps_per_epoch
        if not np.all(np.isfinite(x)):
            raise DivergenceException(f"Non-finite coordinates at step {step}")
        try:
            result = evaluate(x, epoch, state)
        except DivergenceException:
            raise
        except NumericalException as e:
            raise DivergenceException(f"Step {step}: {e.detail}")

        if not np.isfinite(result.value):
            raise DivergenceException(f"Objective became non-finite at step {step}")
        if initial_value is None:
            initial_value = result.value
        elif initial_value > 0 and result.value > factor * initial_value:
            raise DivergenceException(
                f"Objective {result.value:.6g} exceeded {factor:g} x initial value {initial_value:.6g} at step {step}"
            )

        switches = 0
        if previous is not None:
            switches = int(np.count_nonzero(result.assignment != previous))
            if switches:
                logger.debug(f"Step {step}: {switches} nearest-target switches")
                counters.assignment_switches_total.inc(switches)
        total_switches += switches
        previous = result.assignment

        gradient = result.gradient * free_mask
        if step % config.record_every == 0 or step == config.steps:
            cd_value, dcd_value, emd_value = snapshot(result.fine)
            point_norms = np.sqrt(np.sum(gradient.reshape(-1, dim) ** 2, axis=1))
            rows.append(TraceRow(
                epoch=step,
                objective=result.value,
                alpha=result.weights.alpha,
                beta=result.weights.beta,
                cd_l1=cd_value,
                dcd=dcd_value,
                emd=emd_value,
                grad_max=float(point_norms.max()),
                switches=switches,
            ))

        if step == config.steps:
            break

        counters.optimizer_steps_total.labels(objective=label).inc()
        if config.update_rule == UpdateRule.MOMENTUM:
            velocity = config.momentum_coeff * velocity + gradient
            x = x - config.step_size * velocity
        else:
            x = x - config.step_size * gradient

        if state is not None and result.state_gradient is not None:
            state = state.stepped(result.state_gradient, config.state_step_size)

    return x, OptimizationTrace(rows=rows, final_state=state, total_switches=total_switches)


def _resolve_schedule(
    objective: ObjectiveSpec, schedule: Optional[ScheduleSpec],
) -> Optional[ScheduleSpec]:
    if objective.kind != ObjectiveKind.FCD:
        if schedule is not None:
            raise ValidationException(f"Objective '{objective.kind.value}' does not use a schedule")
        return None
    if objective.weights is not None:
        if schedule is not None:
            raise ValidationException("Objective has fixed weights; a schedule cannot be applied")
        return None
    resolved = objective.schedule or schedule
    if resolved is None:
        raise ValidationException("Objective 'fcd' needs fixed weights or a schedule")
    return resolved


def _fcd_evaluator(
    target: PointCloud,
    r: DistanceOrder,
    fixed: Optional[FcdWeights],
    schedule: Optional[ScheduleSpec],
) -> Evaluator:
    def evaluate(x: np.ndarray, epoch: int, state: Optional[UncertaintyState]) -> _StepResult:
        cloud = PointCloud(x)
        if fixed is not None:
            weights = fixed
        else:
            weights = schedule_weights(schedule, min(epoch, schedule.total_epochs), state)
        gradient, assignment = fcd_gradient_with_assignment(cloud, target, weights, r)

        if schedule is not None and schedule.kind == ScheduleKind.UNCERTAINTY:
            local, global_ = fcd_terms(cloud, target, r)
            value, state_gradient = uncertainty_loss(local, global_, state)
        else:
            value, state_gradient = fcd(cloud, target, weights, r), None
        return _StepResult(value, gradient.vectors, weights, cloud, assignment, state_gradient)

    return evaluate


def _dcd_evaluator(target: PointCloud, temperature: Optional[float]) -> Evaluator:
    def evaluate(x: np.ndarray, epoch: int, state: Optional[UncertaintyState]) -> _StepResult:
        cloud = PointCloud(x)
        gradient, assignment = dcd_gradient_with_assignment(cloud, target, temperature)
        return _StepResult(dcd(cloud, target, temperature), gradient.vectors, HALF_WEIGHTS, cloud, assignment)

    return evaluate


def optimize(
    init: PointCloud,
    target: PointCloud,
    objective: ObjectiveSpec,
    schedule: Optional[ScheduleSpec] = None,
    config: Optional[OptimizerConfig] = None,
    pinned: Optional[Iterable[int]] = None,
    state: Optional[UncertaintyState] = None,
) -> Tuple[PointCloud, OptimizationTrace]:
    """Оптимізація координат init відносно target

    Призначення найближчих сусідів перераховуються на кожному кроці,
    ваги беруться з розкладу для поточної епохи.
    """
    config = config or OptimizerConfig()
    require_non_empty(init, target)
    require_same_dim(init, target)
    pinned_mask = support_pinning(init, pinned or ())
    resolved = _resolve_schedule(objective, schedule)

    if objective.kind == ObjectiveKind.CD_L1:
        evaluate = _fcd_evaluator(target, DistanceOrder.FIRST, HALF_WEIGHTS, None)
    elif objective.kind == ObjectiveKind.CD_L2:
        evaluate = _fcd_evaluator(target, DistanceOrder.SECOND, FcdWeights(alpha=1.0, beta=1.0), None)
    elif objective.kind == ObjectiveKind.FCD:
        evaluate = _fcd_evaluator(target, objective.order, objective.weights, resolved)
    else:
        evaluate = _dcd_evaluator(target, objective.temperature)

    if resolved is not None and resolved.kind == ScheduleKind.UNCERTAINTY and state is None:
        state = UncertaintyState.from_bounds(resolved.theta, resolved.tau)
    elif resolved is None or resolved.kind != ScheduleKind.UNCERTAINTY:
        state = None

    snapshot = _Snapshot(target, len(init), config.snapshot_points or settings.SNAPSHOT_POINTS)
    label = objective.kind.value
    logger.info(
        f"Optimization started: objective={label}, points={len(init)}, target={len(target)}, "
        f"steps={config.steps}, step_size={config.step_size}, pinned={int(pinned_mask.sum())}"
    )
    with counters.optimization_seconds.time():
        final, trace = _descend(
            init.points, (~pinned_mask)[:, None], evaluate, snapshot, config, label, init.dim, state,
        )
    logger.info(
        f"Optimization finished: objective={trace.last.objective:.6g}, switches={trace.total_switches}"
    )
    return PointCloud(final), trace


def expand_hierarchy(coarse: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Фінальна хмара: кожна груба точка плюс її дочірні зміщення"""
    return (coarse[:, None, :] + offsets).reshape(-1, coarse.shape[1])


def initial_offsets(hierarchy: HierarchySpec, dim: int, seed: int) -> np.ndarray:
    shape = (hierarchy.coarse_count, hierarchy.children_per_coarse, dim)
    if hierarchy.offset_init_scale == 0:
        return np.zeros(shape)
    rng = np.random.default_rng(seed)
    return hierarchy.offset_init_scale * rng.standard_normal(shape)


def optimize_hierarchical(
    init_coarse: PointCloud,
    hierarchy: HierarchySpec,
    target: PointCloud,
    schedule: ScheduleSpec,
    config: Optional[OptimizerConfig] = None,
    r: DistanceOrder = DistanceOrder.SECOND,
    state: Optional[UncertaintyState] = None,
) -> Tuple[PointCloud, PointCloud, OptimizationTrace]:
    """Спуск від грубої хмари до фінальної

    Груба хмара порівнюється з FPS-підвибіркою цілі зі статичними вагами,
    фінальна - з повною ціллю з вагами розкладу.
    """
    config = config or OptimizerConfig()
    require_non_empty(init_coarse, target)
    require_same_dim(init_coarse, target)
    if len(init_coarse) != hierarchy.coarse_count:
        raise ValidationException(
            f"Coarse init has {len(init_coarse)} points, hierarchy expects {hierarchy.coarse_count}"
        )
    if hierarchy.coarse_count > len(target):
        raise ValidationException(
            f"Coarse count {hierarchy.coarse_count} exceeds target size {len(target)}"
        )

    dim = init_coarse.dim
    n_c, m = hierarchy.coarse_count, hierarchy.children_per_coarse
    coarse_target = subsample(target, n_c, SamplingMethod.FARTHEST_POINT, seed=config.seed)
    offsets = initial_offsets(hierarchy, dim, config.seed)
    split = n_c * dim

    if schedule.kind == ScheduleKind.UNCERTAINTY:
        state = state or UncertaintyState.from_bounds(schedule.theta, schedule.tau)
    else:
        state = None

    def evaluate(x: np.ndarray, epoch: int, state: Optional[UncertaintyState]) -> _StepResult:
        coarse = x[:split].reshape(n_c, dim)
        fine_points = expand_hierarchy(coarse, x[split:].reshape(n_c, m, dim))
        coarse_cloud, fine_cloud = PointCloud(coarse), PointCloud(fine_points)
        spec = StageLossSpec(
            fine_pair=(fine_cloud, target),
            coarse_pairs=[(coarse_cloud, coarse_target)],
            epoch=min(epoch, schedule.total_epochs),
        )
        value = multi_stage_loss(spec, schedule, r, state)
        coarse_grads, fine_grad = multi_stage_gradient(spec, schedule, r, state)
        per_child = fine_grad.vectors.reshape(n_c, m, dim)
        gradient = np.concatenate([
            (coarse_grads[0].vectors + per_child.sum(axis=1)).ravel(),
            per_child.ravel(),
        ])

        state_gradient = None
        if state is not None:
            local, global_ = fcd_terms(fine_cloud, target, r)
            _, state_gradient = uncertainty_loss(local, global_, state)
            value += state.s_local + state.s_global

        assignment, _ = nearest_pairs(fine_cloud, target)
        weights = schedule_weights(schedule, spec.epoch, state)
        return _StepResult(value, gradient, weights, fine_cloud, assignment, state_gradient)

    free_mask = np.ones(split + n_c * m * dim)
    if hierarchy.freeze_offsets:
        free_mask[split:] = 0.0

    variables = np.concatenate([init_coarse.points.ravel(), offsets.ravel()])
    snapshot = _Snapshot(target, n_c * m, config.snapshot_points or settings.SNAPSHOT_POINTS)
    label = f"hierarchical-{schedule.kind.value}"
    logger.info(
        f"Hierarchical optimization started: coarse={n_c}, children={m}, target={len(target)}, "
        f"schedule={schedule.kind.value}, steps={config.steps}"
    )
    with counters.optimization_seconds.time():
        final, trace = _descend(variables, free_mask, evaluate, snapshot, config, label, dim, state)

    coarse_final = final[:split].reshape(n_c, dim)
    fine_final = expand_hierarchy(coarse_final, final[split:].reshape(n_c, m, dim))
    logger.info(f"Hierarchical optimization finished: objective={trace.last.objective:.6g}")
    return PointCloud(fine_final), PointCloud(coarse_final), trace
