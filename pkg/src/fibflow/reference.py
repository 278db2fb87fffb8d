"""Fixed reference tasks and the five-method comparison grid.

These anchor the acceptance checks: a 1-d sinusoid (n = 300, noise 0.1)
and a 5-d friedman-style surface (n = 500, noise 1.0).  The method grid
compares static Fibonacci weighting, first-order boosting, the Fibonacci
recursion with golden-ratio steps, its orthogonalized variant, and the
Rao-Blackwellized flow with random Fourier features.
"""

from __future__ import annotations

from .algorithms import TrainConfig, fibonacci_weights
from .core import KernelSpec
from .harness import DataSpec, ExperimentConfig
from .learners import BaseLearnerConfig, LossSpec
from .recursion import RecursionSchedule
from .spectral import StepSchedule


def sinusoid_data(seed: int = 7) -> DataSpec:
    return DataSpec(target="sinusoid", n=300, d=1, noise=0.1, seed=seed)


def friedman_data(seed: int = 11) -> DataSpec:
    return DataSpec(target="friedman-like", n=500, d=5, noise=1.0, seed=seed)


def kernel_base(bandwidth: float = 0.2, ridge: float = 1e-3, norm_cap: float = 10.0) -> BaseLearnerConfig:
    return BaseLearnerConfig(
        family="kernel-ridge",
        ridge=ridge,
        norm_cap=norm_cap,
        kernel=KernelSpec("gaussian", bandwidth=bandwidth),
    )


def rff_base(
    bandwidth: float = 0.2,
    ridge: float = 1e-3,
    dimension: int = 100,
    norm_cap: float = 10.0,
    seed: int = 0,
) -> BaseLearnerConfig:
    return BaseLearnerConfig(
        family="rff-ridge",
        ridge=ridge,
        norm_cap=norm_cap,
        dimension=dimension,
        bandwidth=bandwidth,
        seed=seed,
    )


def five_method_grid(
    T: int = 40,
    eta0: float = 0.8,
    bandwidth: float = 0.2,
    ridge: float = 1e-3,
    rb_draws: int = 16,
    seed: int = 0,
) -> tuple[TrainConfig, ...]:
    base = kernel_base(bandwidth=bandwidth, ridge=ridge)
    golden = StepSchedule(kind="golden", eta0=eta0, length=T)
    constant = StepSchedule(kind="constant", eta0=eta0, length=T)
    loss = LossSpec(kind="squared")
    return (
        TrainConfig(
            name="static-fibonacci",
            variant="static-weights",
            loss=loss,
            base=base,
            iterations=T,
            static_weights=fibonacci_weights(T),
            seed=seed,
        ),
        TrainConfig(
            name="first-order",
            variant="first-order",
            loss=loss,
            base=base,
            iterations=T,
            schedule=RecursionSchedule.first_order(constant),
            seed=seed,
        ),
        TrainConfig(
            name="fibonacci-golden",
            variant="fibonacci",
            loss=loss,
            base=base,
            iterations=T,
            schedule=RecursionSchedule.fibonacci(golden),
            seed=seed,
        ),
        TrainConfig(
            name="orthogonalized",
            variant="orthogonalized",
            loss=loss,
            base=base,
            iterations=T,
            schedule=RecursionSchedule.fibonacci(golden),
            seed=seed,
        ),
        TrainConfig(
            name="rao-blackwell",
            variant="rao-blackwell",
            loss=loss,
            base=rff_base(bandwidth=bandwidth, ridge=ridge),
            iterations=T,
            schedule=RecursionSchedule.fibonacci(golden),
            rb_draws=rb_draws,
            seed=seed,
        ),
    )


def sinusoid_experiment(replications: int = 1, T: int = 40, seed: int = 7) -> ExperimentConfig:
    return ExperimentConfig(
        data=sinusoid_data(seed=seed),
        methods=five_method_grid(T=T),
        replications=replications,
    )


def friedman_experiment(replications: int = 1, T: int = 40, seed: int = 11) -> ExperimentConfig:
    return ExperimentConfig(
        data=friedman_data(seed=seed),
        methods=five_method_grid(T=T, bandwidth=1.0),
        replications=replications,
    )


def stable_reference_config(
    T: int = 200,
    beta: float = 0.5,
    gamma: float = 0.3,
    eta0: float = 0.5,
    ratio: float = 0.9,
    seed: int = 0,
) -> TrainConfig:
    """The contractive-regime run used by the convergence checks."""
    return TrainConfig(
        name="stable-geometric",
        variant="fibonacci",
        loss=LossSpec(kind="squared"),
        base=kernel_base(),
        iterations=T,
        schedule=RecursionSchedule(
            order=2,
            coefficients=(beta, gamma),
            steps=StepSchedule(kind="geometric", eta0=eta0, ratio=ratio, length=T),
        ),
        seed=seed,
    )
