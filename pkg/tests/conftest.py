"""
Shared fixtures and environment setup for all tests.

Environment variables must be set at module level so they are present
before src.cli.main or src.cli.db is imported (both read them at import time).
"""

import os

import numpy as np
import pytest

# Keep the CLI away from ./runs and ./levystep.db during collection
os.environ.setdefault("LEVYSTEP_OUT_DIR", "/tmp/levystep_pytest_runs")
os.environ.setdefault("LEVYSTEP_DB_PATH", "/tmp/levystep_pytest_init.db")
os.environ.setdefault("LEVYSTEP_WORKERS", "1")
os.environ.setdefault("LEVYSTEP_LOG_LEVEL", "WARNING")

from src.model.constants import AssumptionConstants  # noqa: E402
from src.model.grammar import PolynomialField, Term  # noqa: E402
from src.model.problem import SdeProblem  # noqa: E402
from src.noise.seeds import SeedPolicy  # noqa: E402
from src.noise.spec import JumpLaw, LevyKind, NoiseSpec  # noqa: E402


@pytest.fixture()
def registry_db(tmp_path, monkeypatch):
    """Isolated run registry; patches src.cli.db.DB_PATH."""
    db_file = str(tmp_path / "registry.db")
    import src.cli.db as registry

    monkeypatch.setattr(registry, "DB_PATH", db_file)
    registry.init_runs_table()
    return db_file


@pytest.fixture()
def out_dir(tmp_path, monkeypatch):
    """Isolated output root; patches the CLI default as well."""
    root = tmp_path / "runs"
    import src.cli.main as cli

    monkeypatch.setattr(cli, "OUT_DIR", str(root))
    monkeypatch.setattr(cli, "WORKERS", 1)
    return root


@pytest.fixture()
def seed() -> SeedPolicy:
    return SeedPolicy(12345)


def ou_problem(
    theta: float = 2.0,
    x0: float = 1.0,
    horizon: float = 1.0,
    noise: NoiseSpec | None = None,
    constants: AssumptionConstants | None = None,
) -> SdeProblem:
    """dx = -theta x dt + noise, declared through the grammar."""
    drift = PolynomialField((Term(-theta, 1),))
    return SdeProblem(
        name="ou-test",
        dim=1,
        drift=drift,
        noise=noise or NoiseSpec(),
        x0=[x0],
        horizon=horizon,
        drift_jacobian=drift.derivative,
        constants=constants or AssumptionConstants(K3=-theta),
        autonomous=True,
    )


def cubic_problem(horizon: float = 1.0, x0: float = 1.0, noise: NoiseSpec | None = None) -> SdeProblem:
    """dx = (-x^3 - 5x + 5) dt + (-x + 3) dB + dL with the given Levy part."""
    drift = PolynomialField((Term(-1.0, 3), Term(-5.0, 1), Term(5.0, 0)))
    diffusion = PolynomialField((Term(-1.0, 1), Term(3.0, 0)))
    spec = noise or NoiseSpec(brownian_dim=1)
    return SdeProblem(
        name="cubic-test",
        dim=1,
        drift=drift,
        noise=spec,
        x0=[x0],
        horizon=horizon,
        diffusion=diffusion.matrix,
        drift_jacobian=drift.derivative,
        constants=AssumptionConstants(K3=-5.0, K4=1.0),
        autonomous=True,
    )


def poisson_noise(rate: float = 3.0, value: float = 0.5, **kwargs) -> NoiseSpec:
    return NoiseSpec(
        levy_kind=LevyKind.COMPOUND_POISSON, jump_rate=rate, jump_law=JumpLaw.point_mass(value), **kwargs
    )


def zeros(*shape: int) -> np.ndarray:
    return np.zeros(shape)
