from __future__ import annotations

import logging
import time
from typing import Any, Callable, List, Optional

from src.algorithms.steppers import cfl_limit, make_stepper
from src.core import Flow, FlowState, TerminationReason, Trajectory
from src.domain.lattice import LatticeField, grid_mean, highest_frequency_fraction
from src.errors import ConditioningError, ConvergenceError, NonFiniteError, PositivityError

logger = logging.getLogger(__name__)

Observer = Callable[[FlowState], Any]
StepHook = Callable[[FlowState], None]

INSTABILITY_THRESHOLD = 0.5
CFL_COLLAPSE_RATIO = 1e-6


def centered_high_frequency_fraction(field: LatticeField) -> float:
    """High-frequency energy share of the field with its grid mean removed."""
    return highest_frequency_fraction(LatticeField(field.grid, field.degree, field.values - grid_mean(field)))


class FlowIntegrator:
    """
    Explicit time integration of one flow, with positivity and CFL checks.
    Coflow runs also carry an instability monitor: the run stops as diverged
    once the high-frequency share of the perturbation exceeds both the
    threshold and its value when the run started.
    """

    def __init__(self, flow: Flow, instability_threshold: float = INSTABILITY_THRESHOLD) -> None:
        self.flow = flow
        self.spec = flow.spec
        self.instability_threshold = instability_threshold
        self._advance = make_stepper(self.spec.stepper)
        self._warned_cfl = False

    def time_step(self, state: FlowState) -> float:
        spec = self.spec
        limit = cfl_limit(
            state.grid,
            spec.stepper,
            self.flow.stiffness(state),
            safety=spec.adaptive if spec.adaptive is not None else 1.0,
        )
        if spec.adaptive is None:
            if spec.dt > limit and not self._warned_cfl:
                logger.warning("dt=%.3e exceeds the CFL bound %.3e", spec.dt, limit)
                self._warned_cfl = True
            return spec.dt
        return min(spec.dt, limit)

    def step(self, state: FlowState, dt: Optional[float] = None) -> FlowState:
        flow = self.flow
        dt = dt if dt is not None else self.time_step(state)
        current = flow.variable(state)

        def rate(variable: LatticeField, t: float) -> LatticeField:
            stage = state if variable is current else flow.rebuild(variable, t, state)
            return flow.rate(stage)

        advanced = self._advance(current, state.t, dt, rate)
        new_state = flow.rebuild(advanced, state.t + dt, state)
        new_state.step = state.step + 1
        return new_state

    def run(
        self,
        initial: FlowState,
        T: float,
        sample_every: int = 1,
        observer: Optional[Observer] = None,
        on_step: Optional[StepHook] = None,
        record_initial: bool = True,
    ) -> Trajectory:
        """
        Integrate until t = T. States whose step count is a multiple of
        sample_every are sampled, and so is the last state reached.
        """
        if sample_every < 1:
            raise ValueError("sample_every must be at least 1")
        start_time = time.perf_counter()
        samples: List[FlowState] = []
        records: List[Any] = []

        def sample(s: FlowState) -> None:
            samples.append(s)
            if observer is not None:
                record = observer(s)
                records.append(record)
                s.diagnostics.append(record)

        state = initial
        if record_initial:
            sample(state)
        monitor = self.spec.is_coflow
        ceiling = self.instability_threshold
        if monitor:
            ceiling = max(ceiling, centered_high_frequency_fraction(self.flow.variable(state)))

        reason = TerminationReason.REACHED_T
        message: Optional[str] = None
        steps = 0
        horizon = 1e-12 * max(1.0, abs(T))
        while T - state.t > horizon:
            dt = self.time_step(state)
            if dt < CFL_COLLAPSE_RATIO * self.spec.dt:
                reason = TerminationReason.CFL_COLLAPSE
                message = f"time step {dt:.3e} collapsed at t={state.t:.6g}"
                break
            try:
                new_state = self.step(state, min(dt, T - state.t))
            except (PositivityError, ConditioningError, ConvergenceError) as exc:
                reason, message = TerminationReason.POSITIVITY_LOST, str(exc)
                break
            except NonFiniteError as exc:
                reason, message = TerminationReason.DIVERGED, str(exc)
                break

            if monitor:
                fraction = centered_high_frequency_fraction(self.flow.variable(new_state))
                if fraction > ceiling:
                    reason = TerminationReason.DIVERGED
                    message = f"high-frequency energy fraction {fraction:.3f} at t={new_state.t:.6g}"
                    break

            state = new_state
            steps += 1
            if state.step % sample_every == 0:
                sample(state)
            if on_step is not None:
                on_step(state)

        if steps > 0 and state.step % sample_every != 0:
            sample(state)
        if message:
            logger.warning("%s run stopped (%s): %s", self.flow.kind, reason.value, message)
        else:
            logger.info("%s run reached t=%.6g after %d step(s)", self.flow.kind, state.t, steps)

        return Trajectory(
            samples=samples,
            sample_every=sample_every,
            reason=reason,
            final_state=state,
            records=records,
            runtime=time.perf_counter() - start_time,
            steps=steps,
            message=message,
        )


def step(state: FlowState, flow: Flow, dt: Optional[float] = None) -> FlowState:
    return FlowIntegrator(flow).step(state, dt)


def run(
    initial: FlowState,
    flow: Flow,
    T: float,
    sample_every: int = 1,
    observer: Optional[Observer] = None,
) -> Trajectory:
    return FlowIntegrator(flow).run(initial, T, sample_every, observer)
