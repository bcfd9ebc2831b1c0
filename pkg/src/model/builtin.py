"""
Built-in problems and inline problem definitions.

Every built-in is declared through the coefficient grammar, so its analytic
Jacobian and time knots come for free.
"""

from collections.abc import Callable
from dataclasses import replace
from typing import Any

from src.errors import ConfigurationError
from src.model.constants import AssumptionConstants
from src.model.grammar import PolynomialField, Term, TimeFactor
from src.model.problem import SdeProblem
from src.noise.spec import LevyKind, NoiseSpec

PROBE_NAMES = (
    "polynomial_lipschitz",
    "khasminskii",
    "time_holder",
    "one_sided_lipschitz",
    "diffusion_lipschitz",
)


def _u(p: float) -> TimeFactor:
    return TimeFactor(1.0, 2.0, p)


def declare(
    name: str,
    drift: PolynomialField,
    noise: NoiseSpec,
    x0: float,
    horizon: float,
    constants: AssumptionConstants,
    probes: tuple[str, ...],
    diffusion: PolynomialField | None = None,
    description: str = "",
) -> SdeProblem:
    """Build a 1-d problem from grammar fields; m1 and m2 are filled in when K3/K4 are declared."""
    unknown = set(probes) - set(PROBE_NAMES)
    if unknown:
        raise ConfigurationError(f"{name}: unknown probes {', '.join(sorted(unknown))}")
    knots = drift.knots + (diffusion.knots if diffusion is not None else ())
    problem = SdeProblem(
        name=name,
        dim=1,
        drift=drift,
        noise=noise,
        x0=[x0],
        horizon=horizon,
        diffusion=diffusion.matrix if diffusion is not None else None,
        drift_jacobian=drift.derivative,
        constants=constants,
        probes=probes,
        time_knots=tuple(sorted(set(knots))),
        autonomous=drift.autonomous and (diffusion is None or diffusion.autonomous),
        description=description,
    )
    if constants.K3 is not None or constants.K4 is not None:
        problem = replace(problem, constants=constants.with_origin_bounds(problem))
    return problem


def _superlinear(name: str, drift_exp: float, diff_exp: float | None, alpha: float, **consts: float) -> SdeProblem:
    drift = PolynomialField((Term(1.0, 2, _u(drift_exp)), Term(-2.0, 5)))
    diffusion = PolynomialField((Term(2.0, 1, _u(diff_exp)),)) if diff_exp is not None else None
    noise = NoiseSpec(
        levy_kind=LevyKind.TEMPERED_STABLE,
        alpha=alpha,
        lam=1.0,
        scale=1.0,
        brownian_dim=1 if diffusion is not None else 0,
        gamma0=alpha,
        gamma_inf=4.0,
    )
    constants = AssumptionConstants(H=120.0, sigma=8.0, q=18.0, M=80.0, **consts)
    return declare(
        name,
        drift,
        noise,
        x0=1.0,
        horizon=1.0,
        constants=constants,
        probes=("polynomial_lipschitz", "time_holder", "khasminskii"),
        diffusion=diffusion,
        description=f"superlinear drift u^{drift_exp:g} x^2 - 2x^5, u=(t-1)(2-t), tempered alpha={alpha}",
    )


def paper_51a() -> SdeProblem:
    return _superlinear("paper-5.1a", 0.2, 0.4, 1.3, K1=2.5, K2=3.5, gamma1=0.2, gamma2=0.4)


def paper_51b() -> SdeProblem:
    return _superlinear("paper-5.1b", 0.2, 0.4, 1.5, K1=2.5, K2=3.5, gamma1=0.2, gamma2=0.4)


def paper_51c() -> SdeProblem:
    return _superlinear("paper-5.1c", 0.8, 0.6, 1.3, K1=3.0, K2=3.5, gamma1=0.8, gamma2=0.6)


def paper_52() -> SdeProblem:
    return _superlinear("paper-5.2", 0.9, None, 1.3, K1=3.0, gamma1=0.9)


def paper_53() -> SdeProblem:
    noise = NoiseSpec(
        levy_kind=LevyKind.ALPHA_STABLE,
        alpha=1.5,
        scale=2.0,
        gamma0=2.0,
        gamma_inf=2.0,
    )
    return declare(
        "paper-5.3",
        PolynomialField((Term(-2.0, 1),)),
        noise,
        x0=10.0,
        horizon=5.0,
        constants=AssumptionConstants(H=4.0, sigma=1.0, q=4.0, M=1.0, K3=-2.0, K4=0.5),
        probes=("polynomial_lipschitz", "khasminskii", "one_sided_lipschitz", "diffusion_lipschitz"),
        description="Ornstein-Uhlenbeck dx = -2x dt + 2 dL, alpha-stable alpha=1.5",
    )


def paper_54() -> SdeProblem:
    noise = NoiseSpec(
        levy_kind=LevyKind.TEMPERED_STABLE,
        alpha=1.5,
        lam=1.0,
        scale=2.0,
        brownian_dim=1,
        gamma0=1.5,
        gamma_inf=4.0,
    )
    return declare(
        "paper-5.4",
        PolynomialField((Term(-1.0, 3), Term(-5.0, 1), Term(5.0, 0))),
        noise,
        x0=10.0,
        horizon=10.0,
        constants=AssumptionConstants(H=50.0, sigma=4.0, q=10.0, M=60.0, K3=-5.0, K4=1.0),
        probes=("polynomial_lipschitz", "khasminskii", "one_sided_lipschitz", "diffusion_lipschitz"),
        diffusion=PolynomialField((Term(-1.0, 1), Term(3.0, 0))),
        description="dx = (-x^3 - 5x + 5) dt + (-x + 3) dB + 2 dL, tempered alpha=1.5",
    )


_BUILTINS: dict[str, Callable[[], SdeProblem]] = {
    "paper-5.1a": paper_51a,
    "paper-5.1b": paper_51b,
    "paper-5.1c": paper_51c,
    "paper-5.2": paper_52,
    "paper-5.3": paper_53,
    "paper-5.4": paper_54,
}


def builtin_names() -> list[str]:
    return list(_BUILTINS)


def builtin_problem(name: str) -> SdeProblem:
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise ConfigurationError(f"unknown built-in problem {name!r}; known: {', '.join(_BUILTINS)}") from None
    return factory()


def problem_from_config(data: Any) -> SdeProblem:
    """Inline 1-d problem: drift/diffusion as term lists, noise and constants as mappings."""
    if not isinstance(data, dict):
        raise ConfigurationError(f"a problem definition must be a mapping, got {type(data).__name__}")
    for key in ("noise", "constants"):
        if not isinstance(data.get(key, {}), dict):
            raise ConfigurationError(f"problem {key} must be a mapping, got {type(data[key]).__name__}")
    probes = data.get("probes", ())
    if not isinstance(probes, (list, tuple)) or not all(isinstance(p, str) for p in probes):
        raise ConfigurationError(f"problem probes must be a list of names, got {probes!r}")
    try:
        name = str(data.get("name", "inline"))
        drift = PolynomialField.from_config(data["drift"])
        raw_diffusion = data.get("diffusion")
        diffusion = PolynomialField.from_config(raw_diffusion) if raw_diffusion else None
        noise = NoiseSpec.from_mapping(data.get("noise", {}))
        constants = AssumptionConstants.from_mapping(data.get("constants", {}))
        return declare(
            name,
            drift,
            noise,
            x0=_number(data.get("x0", 0.0), "x0"),
            horizon=_number(data["horizon"], "horizon"),
            constants=constants,
            probes=tuple(probes),
            diffusion=diffusion,
            description=str(data.get("description", "")),
        )
    except KeyError as exc:
        raise ConfigurationError(f"problem definition is missing {exc.args[0]!r}") from exc


def _number(raw: Any, name: str) -> float:
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigurationError(f"problem {name} must be a number, got {raw!r}")
    return float(raw)
