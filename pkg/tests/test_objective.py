"""Тести для FCD, аналітичних градієнтів, розкладів ваг та багатостадійних втрат"""
import math
import statistics
import time

import numpy as np
import pytest
from pydantic import ValidationError

from fcdkit.core import counters
from fcdkit.core.exceptions import ValidationException
from fcdkit.models import PointCloud, StageLossSpec
from fcdkit.schemas.metrics import DistanceOrder
from fcdkit.schemas.objective import FcdWeights, ScheduleKind, ScheduleSpec, UncertaintyState
from fcdkit.services.metrics import chamfer_l1, chamfer_l2, dcd
from fcdkit.services.objective import (
    dcd_gradient,
    distance_gradient,
    fcd,
    fcd_gradient,
    fcd_terms,
    multi_stage_gradient,
    multi_stage_loss,
    schedule_table,
    schedule_weights,
    uncertainty_loss,
)
from tests.utils.helpers import central_difference, well_separated_cloud


def separated_pair(n_pred: int, n_target: int, dim: int, seed: int):
    """P та G з попарно розділеними точками (включно між хмарами)"""
    both = well_separated_cloud(n_pred + n_target, dim, seed)
    return both.subset(range(n_pred)), both.subset(range(n_pred, n_pred + n_target))


# ========== Тести значень FCD ==========

@pytest.mark.unit
@pytest.mark.objective
def test_fcd_identical_clouds(random_cloud):
    """Тест P = G для будь-яких ваг"""
    P = random_cloud(30)
    assert fcd(P, P, FcdWeights(alpha=0.3, beta=7.0)) == 0.0


@pytest.mark.unit
@pytest.mark.objective
def test_fcd_stalemate_setup(stalemate_pred, stalemate_target):
    """Тест 1 * 0.75 + 2 * 1.75 = 4.25"""
    assert fcd(stalemate_pred, stalemate_target, FcdWeights(alpha=1, beta=2)) == 4.25
    assert fcd_terms(stalemate_pred, stalemate_target) == (0.75, 1.75)


@pytest.mark.unit
@pytest.mark.objective
def test_fcd_unit_weights_equals_chamfer(random_cloud):
    """Тест fcd((1,1), r=2) = chamfer_l2 та fcd((1,1), r=1) = 2 * chamfer_l1"""
    unit = FcdWeights(alpha=1, beta=1)
    for seed in range(10):
        P, G = random_cloud(25, seed=seed), random_cloud(31, seed=seed + 1)
        assert fcd(P, G, unit, DistanceOrder.SECOND) - chamfer_l2(P, G) == 0.0
        assert fcd(P, G, unit, DistanceOrder.FIRST) == pytest.approx(2 * chamfer_l1(P, G), rel=1e-15)


@pytest.mark.unit
@pytest.mark.objective
def test_fcd_weights_validation():
    """Тест невірних ваг"""
    with pytest.raises(ValidationError):
        FcdWeights(alpha=0, beta=1)
    with pytest.raises(ValidationError):
        FcdWeights(alpha=1, beta=math.inf)


@pytest.mark.unit
@pytest.mark.objective
def test_distance_order_accepts_numeric_names():
    """Тест r=1 / r=2"""
    assert DistanceOrder("1") is DistanceOrder.FIRST
    assert DistanceOrder("2") is DistanceOrder.SECOND
    assert DistanceOrder.SECOND.power == 2


# ========== Тести градієнтів відстані ==========

@pytest.mark.unit
@pytest.mark.objective
def test_distance_gradient_matches_finite_differences():
    """Тест градієнтів d та d^2 на 1000 випадкових парах"""
    rng = np.random.default_rng(0)
    p = rng.uniform(-1.0, 1.0, size=(1000, 3))
    g = rng.uniform(-1.0, 1.0, size=(1000, 3))

    grad_1 = distance_gradient(p, g, DistanceOrder.FIRST)
    grad_2 = distance_gradient(p, g, DistanceOrder.SECOND)
    assert np.all(np.abs(np.linalg.norm(grad_1, axis=1) - 1.0) <= 1e-12)

    step = 1e-6
    fd_1 = np.zeros_like(p)
    fd_2 = np.zeros_like(p)
    for axis in range(3):
        shift = np.zeros(3)
        shift[axis] = step
        d_plus = np.linalg.norm(p + shift - g, axis=1)
        d_minus = np.linalg.norm(p - shift - g, axis=1)
        fd_1[:, axis] = (d_plus - d_minus) / (2 * step)
        fd_2[:, axis] = (d_plus ** 2 - d_minus ** 2) / (2 * step)

    np.testing.assert_allclose(grad_1, fd_1, rtol=1e-5, atol=1e-8)
    np.testing.assert_allclose(grad_2, fd_2, rtol=1e-5, atol=1e-8)


@pytest.mark.unit
@pytest.mark.objective
def test_distance_gradient_coincident_points_is_zero():
    """Тест нульового вектора для збіжних точок при r=1"""
    p = np.array([[1.0, 2.0]])
    assert np.array_equal(distance_gradient(p, p, DistanceOrder.FIRST), [[0.0, 0.0]])


# ========== Тести градієнтів FCD ==========

@pytest.mark.unit
@pytest.mark.objective
@pytest.mark.parametrize("weights, r, expected", [
    ((1, 1), DistanceOrder.FIRST, (0.0, 0.0)),
    ((1, 2), DistanceOrder.FIRST, (-0.5, 0.0)),
    ((1, 1), DistanceOrder.SECOND, (-2.0, 0.0)),
    ((1, 2), DistanceOrder.SECOND, (-5.0, 0.0)),
])
def test_fcd_gradient_stalemate_point(stalemate_pred, stalemate_target, weights, r, expected):
    """Тест градієнта в p2=(1, 0) для CD та FCD"""
    alpha, beta = weights
    gradient = fcd_gradient(stalemate_pred, stalemate_target, FcdWeights(alpha=alpha, beta=beta), r)
    assert np.all(np.abs(gradient.vectors[1] - np.array(expected)) <= 1e-12)


@pytest.mark.unit
@pytest.mark.objective
def test_cd_l1_gradient_vanishes_exactly(stalemate_pred, stalemate_target):
    """Тест точного нуля градієнта CD-l1 у p2"""
    gradient = fcd_gradient(stalemate_pred, stalemate_target, FcdWeights(alpha=1, beta=1))
    assert gradient.vectors[1].tolist() == [0.0, 0.0]


@pytest.mark.unit
@pytest.mark.objective
@pytest.mark.parametrize("r", [DistanceOrder.FIRST, DistanceOrder.SECOND])
def test_fcd_gradient_matches_finite_differences(r):
    """Тест градієнта FCD проти центральних різниць на розділених хмарах"""
    rng = np.random.default_rng(int(r.power))
    for seed in range(50):
        P, G = separated_pair(7, 9, 3, seed)
        weights = FcdWeights(alpha=float(rng.uniform(0.2, 3.0)), beta=float(rng.uniform(0.2, 3.0)))
        analytic = fcd_gradient(P, G, weights, r).vectors

        numeric = central_difference(lambda x: fcd(PointCloud(x), G, weights, r), P.points, step=1e-6)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-8)


@pytest.mark.unit
@pytest.mark.objective
def test_fcd_gradient_scale_equivariance():
    """Тест множення ваг на c: значення та градієнт множаться на c"""
    P, G = separated_pair(10, 12, 2, seed=3)
    weights = FcdWeights(alpha=0.7, beta=1.3)
    for c in (0.5, 4.0):
        scaled = weights.scaled(c)
        for r in DistanceOrder:
            assert fcd(P, G, scaled, r) == c * fcd(P, G, weights, r)
            base = fcd_gradient(P, G, weights, r).vectors
            assert np.array_equal(fcd_gradient(P, G, scaled, r).vectors, c * base)


@pytest.mark.unit
@pytest.mark.objective
def test_dcd_gradient_matches_finite_differences():
    """Тест градієнта DCD з зафіксованими лічильниками"""
    for seed in range(10):
        P, G = separated_pair(6, 8, 2, seed)
        analytic = dcd_gradient(P, G, temperature=2.0).vectors
        numeric = central_difference(lambda x: dcd(PointCloud(x), G, 2.0), P.points, step=1e-6)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-8)


# ========== Тести розкладів ваг ==========

@pytest.mark.unit
@pytest.mark.objective
def test_static_schedule_table():
    """Тест статичного розкладу: 401 рядок (1, 2)"""
    rows = list(schedule_table(ScheduleSpec(kind=ScheduleKind.STATIC)))
    assert len(rows) == 401
    assert all((alpha, beta) == (1.0, 2.0) for _, alpha, beta in rows)


@pytest.mark.unit
@pytest.mark.objective
def test_stair_boundary():
    """Тест сходинки: beta=theta до t, tau з t"""
    spec = ScheduleSpec(kind=ScheduleKind.STAIR)
    assert schedule_weights(spec, 199).beta == 2.0
    assert schedule_weights(spec, 200).beta == 1.0
    betas = [beta for _, _, beta in schedule_table(spec)]
    jumps = [e for e in range(1, len(betas)) if betas[e] != betas[e - 1]]
    assert jumps == [200]


@pytest.mark.unit
@pytest.mark.objective
@pytest.mark.parametrize("kind, epoch, expected", [
    (ScheduleKind.LINEAR, 0, 2.0),
    (ScheduleKind.LINEAR, 200, 1.5),
    (ScheduleKind.LINEAR, 400, 1.0),
    (ScheduleKind.ABRIDGED_LINEAR, 200, 2.0),
    (ScheduleKind.ABRIDGED_LINEAR, 300, 1.5),
    (ScheduleKind.ABRIDGED_LINEAR, 400, 1.0),
    (ScheduleKind.EXPONENTIAL, 0, 2.0),
    (ScheduleKind.EXPONENTIAL, 200, math.exp(-1) + 1),
])
def test_schedule_values(kind, epoch, expected):
    """Тест граничних та середніх значень розкладів"""
    weights = schedule_weights(ScheduleSpec(kind=kind), epoch)
    assert weights.alpha == 1.0
    assert weights.beta == expected


@pytest.mark.unit
@pytest.mark.objective
def test_exponential_midpoint_rounded():
    """Тест beta(200) приблизно 1.36788"""
    beta = schedule_weights(ScheduleSpec(kind=ScheduleKind.EXPONENTIAL), 200).beta
    assert round(beta, 5) == 1.36788


@pytest.mark.unit
@pytest.mark.objective
@pytest.mark.parametrize("kind", [ScheduleKind.LINEAR, ScheduleKind.ABRIDGED_LINEAR, ScheduleKind.EXPONENTIAL])
def test_continuous_schedules_bounded_and_monotone(kind):
    """Тест неперервності, beta >= tau та незростання"""
    betas = [beta for _, _, beta in schedule_table(ScheduleSpec(kind=kind))]
    assert all(beta >= 1.0 for beta in betas)
    steps = np.diff(betas)
    assert np.all(steps <= 1e-15)
    assert np.all(np.abs(steps) <= 1.0 / 200 + 1e-12)


@pytest.mark.unit
@pytest.mark.objective
def test_schedule_epoch_out_of_range():
    """Тест епохи поза [0, T]"""
    spec = ScheduleSpec(kind=ScheduleKind.LINEAR)
    with pytest.raises(ValidationException):
        schedule_weights(spec, 401)
    with pytest.raises(ValidationException):
        schedule_weights(spec, -1)


@pytest.mark.unit
@pytest.mark.objective
def test_schedule_spec_validation():
    """Тест обмежень theta > tau > 0 та 0 < t < T"""
    with pytest.raises(ValidationError):
        ScheduleSpec(theta=1.0, tau=1.0)
    with pytest.raises(ValidationError):
        ScheduleSpec(t=400, T=400)
    with pytest.raises(ValidationError):
        ScheduleSpec(sigma=0)


@pytest.mark.unit
@pytest.mark.objective
def test_schedule_spec_key_values_and_json():
    """Тест формату key=value та JSON"""
    spec = ScheduleSpec.from_key_values("kind=stair\ntheta=3, tau=0.5\nt=10\nT=20\nsigma=5\n")
    assert spec.kind == ScheduleKind.STAIR
    assert (spec.theta, spec.tau, spec.transition_epoch, spec.total_epochs) == (3.0, 0.5, 10, 20)
    assert ScheduleSpec.from_key_values(spec.to_key_values()) == spec

    from_json = ScheduleSpec.from_key_values('{"kind": "linear", "t": 50, "T": 100}')
    assert from_json.total_epochs == 100
    assert ScheduleSpec.model_validate_json(from_json.model_dump_json(by_alias=True)) == from_json

    with pytest.raises(ValueError):
        ScheduleSpec.from_key_values("omega=1")


@pytest.mark.unit
@pytest.mark.objective
def test_uncertainty_schedule_needs_state():
    """Тест розкладу невизначеності без стану та без таблиці"""
    spec = ScheduleSpec(kind=ScheduleKind.UNCERTAINTY)
    with pytest.raises(ValidationException):
        schedule_weights(spec, 0)
    with pytest.raises(ValidationException):
        list(schedule_table(spec))
    state = UncertaintyState.from_bounds(spec.theta, spec.tau)
    assert schedule_weights(spec, 0, state).as_tuple() == pytest.approx((1.0, 2.0))


# ========== Тести зважування невизначеністю ==========

@pytest.mark.unit
@pytest.mark.objective
def test_uncertainty_loss_examples():
    """Тест значень у замкненій формі"""
    total, _ = uncertainty_loss(1.0, 1.0, UncertaintyState())
    assert total == 2.0

    state = UncertaintyState(s_local=0.0, s_global=-math.log(2))
    total, _ = uncertainty_loss(0.3, 0.7, state)
    assert total == pytest.approx(0.3 + 2 * 0.7 - math.log(2), rel=1e-14)


@pytest.mark.unit
@pytest.mark.objective
def test_uncertainty_gradients_match_finite_differences():
    """Тест похідних по s_local та s_global"""
    state = UncertaintyState(s_local=0.4, s_global=-0.9)
    losses = (0.8, 1.7)
    _, (g_local, g_global) = uncertainty_loss(*losses, state)

    def total(s: np.ndarray) -> float:
        return uncertainty_loss(*losses, UncertaintyState(s_local=s[0], s_global=s[1]))[0]

    numeric = central_difference(total, np.array([state.s_local, state.s_global]), step=1e-6)
    assert abs(numeric[0] - g_local) <= 1e-6
    assert abs(numeric[1] - g_global) <= 1e-6


@pytest.mark.unit
@pytest.mark.objective
def test_uncertainty_state_step():
    """Тест кроку спуску по стану"""
    state = UncertaintyState().stepped((2.0, -1.0), 0.1)
    assert state.s_local == pytest.approx(-0.2)
    assert state.s_global == pytest.approx(0.1)
    with pytest.raises(ValidationError):
        UncertaintyState(s_local=math.nan)


# ========== Тести багатостадійних втрат ==========

@pytest.mark.unit
@pytest.mark.objective
def test_multi_stage_identical_stages_is_zero(random_cloud):
    """Тест K=1 з coarse = fine = target"""
    G = random_cloud(16, dim=2)
    spec = StageLossSpec(fine_pair=(G, G), coarse_pairs=[(G, G)])
    assert multi_stage_loss(spec, ScheduleSpec()) == 0.0


@pytest.mark.unit
@pytest.mark.objective
def test_multi_stage_without_coarse_is_fine_fcd(random_cloud):
    """Тест K=0: лише фінальна стадія з вагами розкладу"""
    P, G = random_cloud(12, seed=1), random_cloud(15, seed=2)
    schedule = ScheduleSpec(kind=ScheduleKind.LINEAR)
    spec = StageLossSpec(fine_pair=(P, G), epoch=200)
    expected = fcd(P, G, FcdWeights(alpha=1.0, beta=1.5), DistanceOrder.FIRST)
    assert multi_stage_loss(spec, schedule) == expected


@pytest.mark.unit
@pytest.mark.objective
def test_multi_stage_sum_of_stages(random_cloud):
    """Тест K=2: сума окремих викликів fcd"""
    G = random_cloud(40, seed=0)
    C1, T1 = random_cloud(8, seed=1), random_cloud(8, seed=2)
    C2, T2 = random_cloud(16, seed=3), random_cloud(16, seed=4)
    P = random_cloud(40, seed=5)
    schedule = ScheduleSpec(kind=ScheduleKind.STAIR)
    spec = StageLossSpec(fine_pair=(P, G), coarse_pairs=[(C1, T1), (C2, T2)], epoch=250)

    static = FcdWeights(alpha=1.0, beta=2.0)
    expected = math.fsum([fcd(C1, T1, static), fcd(C2, T2, static)]) + fcd(P, G, FcdWeights(alpha=1.0, beta=1.0))
    assert multi_stage_loss(spec, schedule) == pytest.approx(expected, rel=1e-15)

    coarse, fine = multi_stage_gradient(spec, schedule)
    assert len(coarse) == spec.stage_count == 2
    assert np.array_equal(coarse[1].vectors, fcd_gradient(C2, T2, static).vectors)
    assert np.array_equal(fine.vectors, fcd_gradient(P, G, FcdWeights(alpha=1.0, beta=1.0)).vectors)


@pytest.mark.unit
@pytest.mark.objective
def test_stage_spec_validation(random_cloud):
    """Тест невідповідних розмірностей стадій"""
    with pytest.raises(ValidationException):
        StageLossSpec(fine_pair=(random_cloud(4, dim=2), random_cloud(4, dim=3)))
    with pytest.raises(ValidationException):
        StageLossSpec(fine_pair=(random_cloud(4), random_cloud(4)), epoch=-1)


# ========== Тести вартості обчислення ==========

def nn_queries() -> float:
    return counters.registry.get_sample_value("fcdkit_nn_queries_total")


@pytest.mark.unit
@pytest.mark.objective
def test_fcd_issues_same_queries_as_chamfer(random_cloud):
    """Тест що FCD робить ті самі запити до індексу, що й CD"""
    P, G = random_cloud(300, seed=1), random_cloud(200, seed=2)
    before = nn_queries()
    chamfer_l1(P, G)
    chamfer_queries = nn_queries() - before

    before = nn_queries()
    fcd(P, G, FcdWeights(alpha=1.0, beta=2.0))
    assert nn_queries() - before == chamfer_queries == 500


@pytest.mark.integration
@pytest.mark.objective
@pytest.mark.slow
def test_fcd_wall_clock_close_to_chamfer(random_cloud):
    """Тест часу FCD проти CD на хмарах з 8192 точок (медіана з кількох повторів)"""
    P, G = random_cloud(8192, seed=1), random_cloud(8192, seed=2)
    weights = FcdWeights(alpha=1.0, beta=2.0)

    def median_time(func) -> float:
        times = []
        for _ in range(7):
            start = time.perf_counter()
            func()
            times.append(time.perf_counter() - start)
        return statistics.median(times)

    chamfer_time = median_time(lambda: chamfer_l1(P, G))
    fcd_time = median_time(lambda: fcd(P, G, weights))
    # Запас на шум таймера поверх паритету
    assert fcd_time <= 1.05 * chamfer_time + 0.05
