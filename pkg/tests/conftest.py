"""Pytest configuration and shared fixtures"""
from typing import Callable, Generator

import numpy as np
import pytest

from fcdkit.core.config import Settings, apply_settings, settings
from fcdkit.models import PointCloud
from fcdkit.services.sampling import planar_grid


@pytest.fixture(autouse=True)
def restore_settings() -> Generator[None, None, None]:
    """Повертає спільні налаштування до стану перед тестом"""
    snapshot = Settings.model_validate(settings.model_dump())
    yield
    apply_settings(snapshot)


@pytest.fixture
def stalemate_pred() -> PointCloud:
    """P = {p1, p2}: p1=(0.5, 0), p2=(1, 0)"""
    return PointCloud(np.array([[0.5, 0.0], [1.0, 0.0]]))


@pytest.fixture
def stalemate_target() -> PointCloud:
    """G = {g1, g2}: g1=(0, 0), g2=(4, 0)"""
    return PointCloud(np.array([[0.0, 0.0], [4.0, 0.0]]))


@pytest.fixture
def random_cloud() -> Callable[..., PointCloud]:
    """Фабрика випадкових хмар з фіксованим seed"""
    def factory(n: int, dim: int = 3, seed: int = 0, scale: float = 1.0) -> PointCloud:
        rng = np.random.default_rng(seed)
        return PointCloud(scale * rng.uniform(-1.0, 1.0, size=(n, dim)))

    return factory


@pytest.fixture
def unit_grid() -> PointCloud:
    """Сітка 8x8 на одиничному квадраті"""
    return planar_grid(8, 8, 1.0 / 7)
