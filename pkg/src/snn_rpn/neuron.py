"""Leaky integrate-and-fire primitives with exact event-driven updates.

The membrane potential relaxes toward its rest value with time constant
``tau_m`` and receives instantaneous voltage kicks from input spikes.
Synaptic conductance decays with time constant ``tau_g`` and jumps on each
presynaptic spike. Both decays are linear first-order processes, so between
events they are applied in closed form; results do not depend on any
integration step size.

All synapses with equal ``tau_g`` that feed one neuron are pooled into a
single :class:`ConductanceAccumulator`: equal decay rates commute with
summation, so the pooled value equals the sum of individually simulated
synapses at every query time.

Timestamps are unsigned integer microseconds. Decay arithmetic is done in
double precision. Updates to one neuron must be applied in timestamp order;
a backward step raises :class:`~snn_rpn.errors.TimeRegressionError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import TimeRegressionError


@dataclass(slots=True, frozen=True)
class NeuronParams:
    """Constants shared by one population of LIF neurons.

    ``tau_m`` and ``t_refractory`` are in microseconds. ``r_mem`` is a
    dimensionless scale folded into the drive units; it is kept for
    bookkeeping and never enters the update arithmetic directly.
    """

    tau_m: float
    v_rest: float
    v_th: float
    v_reset: float
    t_refractory: int = 0
    r_mem: float = 1.0

    def __post_init__(self):
        if not self.tau_m > 0:
            raise ValueError(f"tau_m must be positive, got {self.tau_m}")
        if self.t_refractory < 0:
            raise ValueError(f"t_refractory must be >= 0, got {self.t_refractory}")
        if not (self.v_reset <= self.v_rest < self.v_th):
            raise ValueError(
                "potentials must satisfy v_reset <= v_rest < v_th, got "
                f"v_reset={self.v_reset}, v_rest={self.v_rest}, v_th={self.v_th}"
            )


@dataclass(slots=True)
class NeuronState:
    """Membrane potential of one neuron plus its clocks.

    ``t_last_spike`` is ``None`` until the first spike.
    """

    v: float
    t_last_update: int = 0
    t_last_spike: int | None = None

    @classmethod
    def rested(cls, params: NeuronParams, t: int = 0) -> "NeuronState":
        return cls(params.v_rest, t, None)


@dataclass(slots=True)
class ConductanceAccumulator:
    """Summed conductance of all same-``tau_g`` synapses feeding one neuron."""

    tau_g: float
    g_sum: float = 0.0
    t_last_update: int = 0

    def __post_init__(self):
        if not self.tau_g > 0:
            raise ValueError(f"tau_g must be positive, got {self.tau_g}")
        if self.g_sum < 0:
            raise ValueError(f"g_sum must be >= 0, got {self.g_sum}")


def advance_membrane(state: NeuronState, params: NeuronParams, t_now: int) -> NeuronState:
    """Decay the membrane toward rest over the interval since its last update.

    Returns a new state clocked at ``t_now``; never produces a spike.
    """
    dt = t_now - state.t_last_update
    if dt < 0:
        raise TimeRegressionError(
            f"membrane update at t={t_now} before state clock t={state.t_last_update}"
        )
    if dt == 0:
        return NeuronState(state.v, t_now, state.t_last_spike)
    v = params.v_rest + (state.v - params.v_rest) * math.exp(-dt / params.tau_m)
    return NeuronState(v, t_now, state.t_last_spike)


def apply_drive(
    state: NeuronState, params: NeuronParams, delta_v: float, t_now: int
) -> tuple[NeuronState, bool]:
    """Advance to ``t_now``, add an instantaneous voltage kick, test threshold.

    Inside the refractory window the kick is discarded (the leak still
    applies). On reaching ``v_th`` the neuron fires and resets. Returns the
    new state and whether it fired.
    """
    if delta_v < 0:
        raise ValueError(f"drive must be non-negative (excitatory only), got {delta_v}")
    state = advance_membrane(state, params, t_now)
    last = state.t_last_spike
    if last is not None and t_now < last + params.t_refractory:
        return state, False
    v = state.v + delta_v
    if v >= params.v_th:
        return NeuronState(params.v_reset, t_now, t_now), True
    state.v = v  # fresh instance from advance_membrane, safe to fill in
    return state, False


def advance_conductance(acc: ConductanceAccumulator, t_now: int) -> ConductanceAccumulator:
    """Decay the pooled conductance over the interval since its last update."""
    dt = t_now - acc.t_last_update
    if dt < 0:
        raise TimeRegressionError(
            f"conductance update at t={t_now} before state clock t={acc.t_last_update}"
        )
    if dt == 0 or acc.g_sum == 0.0:
        return ConductanceAccumulator(acc.tau_g, acc.g_sum, t_now)
    return ConductanceAccumulator(acc.tau_g, acc.g_sum * math.exp(-dt / acc.tau_g), t_now)


def add_conductance(
    acc: ConductanceAccumulator, weight: float, t_now: int
) -> ConductanceAccumulator:
    """Advance to ``t_now`` and raise the pooled conductance by ``weight``."""
    if weight < 0:
        raise ValueError(f"synaptic weight must be >= 0, got {weight}")
    acc = advance_conductance(acc, t_now)
    acc.g_sum += weight
    return acc
