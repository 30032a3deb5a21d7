"""Numerical step sizes shared by every operator in the package."""

from __future__ import annotations

from dataclasses import dataclass

FD_STEP = 1e-4
ODE_STEP = 1e-3
METRIC_FD_STEP = 1e-5


@dataclass(frozen=True)
class StepSizes:
    """Step sizes for nested finite differences and geodesic integration.

    ``fd_step`` is the outer differencing step. ``inner_step`` is used for the
    first derivative level inside a second derivative; ``None`` means "same as
    ``fd_step``" so that a convergence sweep over ``fd_step`` refines both
    levels together.
    """

    fd_step: float = FD_STEP
    inner_step: float | None = None
    ode_step: float = ODE_STEP

    @property
    def inner(self) -> float:
        return self.fd_step if self.inner_step is None else self.inner_step

    def with_fd_step(self, h: float) -> "StepSizes":
        return StepSizes(fd_step=h, inner_step=self.inner_step, ode_step=self.ode_step)
