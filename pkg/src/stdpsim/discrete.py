"""Integer-quanta model: exact CTMC simulation plus analytic oracles.

Every coordinate of the continuous process has a queueing counterpart
here: the membrane holds ``x`` quanta that leak one at a time (per-quantum
rate 1), pre spikes arrive at rate ``lam`` adding ``w`` membrane quanta
and ``c1`` calcium quanta, post spikes fire at rate ``beta * x`` removing
one membrane quantum and adding ``c2`` calcium quanta, and each calcium
quantum dies at rate ``gamma``.  The fast calcium process ``(x, c)`` is a
two-queue network with batch arrivals whose stationary calcium count has
an explicit generating function and closed-form mean; both are
implemented as analytic oracles so the stochastic engine can be validated
quantitatively.

The full model adds an integer weight that gains ``a_p`` quanta at the
potentiation channel rate, loses ``a_d`` quanta at the depression channel
rate (gated by ``w >= a_d``, so the weight never goes negative), and
loses single quanta at the homeostatic rate ``mu * w``.  The channels
stay continuous: they decay at the filter rate and gain the threshold
densities of a calcium rule, so the weight-jump rates are inhomogeneous
and are sampled by thinning against per-interval envelopes.

Ergodic averages always use exact holding times, never discretized
sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import comb

from stdpsim.kernels import CalciumSpec
from stdpsim.spike_core import FLOAT_FMT, RngStream

__all__ = [
    "DiscreteParams",
    "DiscreteState",
    "ctmc_step",
    "FastTrace",
    "simulate_fast_calcium",
    "time_average",
    "batch_averages",
    "occupation_pgf",
    "stationary_means",
    "analytic_pgf",
    "PgfReport",
    "pgf_report",
    "FullTrace",
    "run_discrete_full",
    "write_discrete_trace",
    "read_discrete_trace",
]

_BLOCK = 1 << 16
_SINGULAR_TOL = 1e-9


@dataclass(frozen=True)
class DiscreteParams:
    """Rates and jump sizes of the integer model (calcium case).

    ``gamma`` accepts a scalar or a vector of per-coordinate decay rates;
    the calcium operations require a single coordinate.  ``k0`` quanta are
    added to the traces by a rate-1 clock when nonzero (the discrete
    counterpart of constant trace drift).
    """

    lam: float
    beta: float
    gamma: tuple[float, ...]
    c1: int = 0
    c2: int = 0
    w: int = 1
    a_p: int = 0
    a_d: int = 0
    mu: float = 0.0
    k0: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        gamma = self.gamma
        if np.isscalar(gamma):
            gamma = (float(gamma),)
        else:
            gamma = tuple(float(g) for g in gamma)
        if self.lam < 0.0 or not self.beta > 0.0 or self.mu < 0.0:
            raise ValueError("rates must be non-negative and beta positive")
        if any(g <= 0.0 for g in gamma):
            raise ValueError("decay rates must be positive")
        for name in ("c1", "c2", "w", "a_p", "a_d"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 0:
                raise ValueError(f"{name} must be a non-negative integer")
        k0 = self.k0
        if k0 is None:
            k0 = (0,) * len(gamma)
        else:
            k0 = tuple(int(v) for v in k0)
            if len(k0) != len(gamma) or any(v < 0 for v in k0):
                raise ValueError("k0 must match gamma in length, entries >= 0")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "k0", k0)

    @property
    def dim(self) -> int:
        return len(self.gamma)


@dataclass(frozen=True)
class DiscreteState:
    """Integer coordinates plus the continuous channel pair."""

    x: int
    z: tuple[int, ...]
    omega_p: float = 0.0
    omega_d: float = 0.0
    w: int = 0

    def __post_init__(self) -> None:
        if self.x < 0 or self.w < 0 or any(v < 0 for v in self.z):
            raise ValueError("integer coordinates must be non-negative")


def ctmc_step(
    state: DiscreteState,
    params: DiscreteParams,
    rng: RngStream,
    full: bool = False,
) -> tuple[float, DiscreteState, str]:
    """One Gillespie step of the constant-rate transitions.

    Rates: membrane leak ``x``, trace decays ``gamma_j z_j``, the ``k0``
    clock (rate 1 when ``k0`` is nonzero), pre ``lam``, post ``beta x``,
    and with ``full`` the homeostatic death ``mu w``.  The channel-driven
    weight jumps are inhomogeneous and live in :func:`run_discrete_full`.
    Returns ``(holding time, next state, tag)``; an absorbing state
    returns ``(inf, state, "absorbed")``.
    """
    if len(state.z) != params.dim:
        raise ValueError("state and params dimensions differ")
    clock = 1.0 if any(params.k0) else 0.0
    decays = [g * v for g, v in zip(params.gamma, state.z)]
    rates = [float(state.x), *decays, clock, params.lam, params.beta * state.x]
    if full:
        rates.append(params.mu * state.w)
    total = sum(rates)
    if total == 0.0:
        return math.inf, state, "absorbed"
    hold = rng.exponential(1.0 / total)
    pick = rng.random() * total
    acc = rates[0]
    if pick < acc:
        return hold, _replace_state(state, x=state.x - 1), "leak"
    for j, r in enumerate(decays):
        acc += r
        if pick < acc:
            z = list(state.z)
            z[j] -= 1
            return hold, _replace_state(state, z=tuple(z)), "decay"
    acc += clock
    if pick < acc:
        z = tuple(v + k for v, k in zip(state.z, params.k0))
        return hold, _replace_state(state, z=z), "clock"
    acc += params.lam
    if pick < acc:
        z = list(state.z)
        z[0] += params.c1
        add = state.w if full else params.w
        return hold, _replace_state(state, x=state.x + add, z=tuple(z)), "pre"
    acc += params.beta * state.x
    if pick < acc:
        z = list(state.z)
        z[0] += params.c2
        return hold, _replace_state(state, x=state.x - 1, z=tuple(z)), "post"
    return hold, _replace_state(state, w=state.w - 1), "death"


def _replace_state(state: DiscreteState, **kw) -> DiscreteState:
    fields = dict(
        x=state.x, z=state.z, omega_p=state.omega_p,
        omega_d=state.omega_d, w=state.w,
    )
    fields.update(kw)
    return DiscreteState(**fields)


# ---------------------------------------------------------------------------
# Fast calcium process
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FastTrace:
    """Right-continuous path of the fast calcium queue.

    ``x[i]`` and ``c[i]`` hold from ``times[i]`` until the next event (or
    the horizon); ``times[0]`` is 0 with the initial state.
    """

    times: np.ndarray
    x: np.ndarray
    c: np.ndarray
    horizon: float

    def durations(self) -> np.ndarray:
        return np.diff(self.times, append=self.horizon)


def simulate_fast_calcium(
    params: DiscreteParams,
    horizon: float,
    rng: RngStream,
    x0: int = 0,
    c0: int = 0,
) -> FastTrace:
    """Exact trajectory of the two-queue fast process up to ``horizon``.

    Pre arrivals (rate ``lam``) add ``w`` membrane and ``c1`` calcium
    quanta; post firings (rate ``beta x``) move one membrane quantum out
    and ``c2`` calcium quanta in; single quanta leak at rates ``x`` and
    ``gamma c``.  Randomness is consumed in blocks for speed; the trace
    stores every jump so occupation averages are exact.
    """
    if params.dim != 1:
        raise ValueError("the fast calcium process has a single trace coordinate")
    gamma = params.gamma[0]
    lam, beta, w, c1, c2 = params.lam, params.beta, params.w, params.c1, params.c2
    gen = rng.generator
    eblk = gen.exponential(size=_BLOCK)
    ublk = gen.random(size=_BLOCK)
    ei = ui = 0
    t = 0.0
    x, c = int(x0), int(c0)
    times, xs, cs = [0.0], [x], [c]
    while True:
        total = x + gamma * c + lam + beta * x
        if total == 0.0:
            break
        if ei == _BLOCK:
            eblk = gen.exponential(size=_BLOCK)
            ei = 0
        t += eblk[ei] / total
        ei += 1
        if t >= horizon:
            break
        if ui == _BLOCK:
            ublk = gen.random(size=_BLOCK)
            ui = 0
        pick = ublk[ui] * total
        ui += 1
        if pick < x:
            x -= 1
        elif pick < x + gamma * c:
            c -= 1
        elif pick < x + gamma * c + lam:
            x += w
            c += c1
        else:
            x -= 1
            c += c2
        times.append(t)
        xs.append(x)
        cs.append(c)
    return FastTrace(
        np.asarray(times), np.asarray(xs, dtype=np.int64),
        np.asarray(cs, dtype=np.int64), float(horizon),
    )


def time_average(trace: FastTrace, values: np.ndarray) -> float:
    """Occupation average of per-state values, exact in the holding times."""
    values = np.asarray(values, dtype=float)
    return float(values @ trace.durations()) / trace.horizon


def batch_averages(trace: FastTrace, values: np.ndarray, n_batches: int) -> np.ndarray:
    """Occupation averages over equal time windows, split exactly.

    Intervals crossing a window edge contribute their exact overlap to
    each side, so the batch means sum back to the global average.
    """
    values = np.asarray(values, dtype=float)
    cum = np.concatenate(([0.0], np.cumsum(values * trace.durations())))
    edges = np.linspace(0.0, trace.horizon, n_batches + 1)
    idx = np.searchsorted(trace.times, edges, side="right") - 1
    integral = cum[idx] + values[idx] * (edges - trace.times[idx])
    return np.diff(integral) / (trace.horizon / n_batches)


def occupation_pgf(trace: FastTrace, u: float) -> float:
    """Empirical generating-function value from the occupation measure."""
    return time_average(trace, np.power(float(u), trace.c))


def stationary_means(params: DiscreteParams) -> tuple[float, float]:
    """Closed-form stationary means of the fast calcium queue.

    The membrane count has mean ``lam w / (beta + 1)`` (each quantum lives
    an exponential(beta + 1) time); the calcium count has mean
    ``(lam / gamma)(c1 + c2 beta w / (beta + 1))`` (direct quanta plus one
    conversion per membrane quantum with probability ``beta/(beta+1)``).
    """
    if params.dim != 1:
        raise ValueError("the fast calcium process has a single trace coordinate")
    gamma = params.gamma[0]
    mean_x = params.lam * params.w / (params.beta + 1.0)
    mean_c = (params.lam / gamma) * (
        params.c1 + params.c2 * params.beta * params.w / (params.beta + 1.0)
    )
    return mean_x, mean_c


# ---------------------------------------------------------------------------
# Analytic generating function
# ---------------------------------------------------------------------------


def _p2_terms(params: DiscreteParams) -> list[tuple[int, float, bool]]:
    """Per-k expansion constants: (binomial, singular flag) for k = 1..c2."""
    gamma = params.gamma[0]
    beta = params.beta
    out = []
    for k in range(1, params.c2 + 1):
        binom = float(comb(params.c2, k, exact=True))
        singular = abs(beta + 1.0 - gamma * k) < _SINGULAR_TOL
        out.append((k, binom, singular))
    return out


def _delta(params: DiscreteParams, u: float, s: float) -> float:
    """Conditional pgf contribution of one pre spike of age ``s``."""
    gamma = params.gamma[0]
    beta = params.beta
    direct = (1.0 + (u - 1.0) * math.exp(-gamma * s)) ** params.c1
    inner = 1.0
    for k, binom, singular in _p2_terms(params):
        if singular:
            # removable singularity beta + 1 = gamma k: the difference
            # quotient collapses to s e^{-(beta+1)s}
            p2 = beta * binom * s * math.exp(-(beta + 1.0) * s)
        else:
            p2 = (
                beta / (beta + 1.0 - gamma * k) * binom
                * (math.exp(-gamma * k * s) - math.exp(-(beta + 1.0) * s))
            )
        inner += (u - 1.0) ** k * p2
    return direct * inner ** params.w


def analytic_pgf(params: DiscreteParams, u: float) -> float:
    """Stationary generating function ``E[u^C]`` of the calcium count.

    Pre spikes form a Poisson process and contribute independent clusters,
    so ``E[u^C] = exp(-lam Int_0^inf (1 - Delta(u, s)) ds)`` where
    ``Delta`` is the cluster pgf at age ``s``: each of the ``c1`` direct
    quanta survives with probability ``e^{-gamma s}``, and each of the
    ``w`` membrane quanta converts before dying with the two-exponential
    law whose binomial expansion gives the ``p2`` coefficients.  The
    integrand decays exponentially, so the integral is truncated where the
    tail is below 1e-12 and evaluated by adaptive quadrature.
    """
    value, _ = _pgf_quadrature(params, u)
    return value


def _pgf_quadrature(params: DiscreteParams, u: float) -> tuple[float, float]:
    if params.dim != 1:
        raise ValueError("the fast calcium process has a single trace coordinate")
    if not 0.0 <= u <= 1.0:
        raise ValueError("u must lie in [0, 1]")
    gamma = params.gamma[0]
    cutoff = max(50.0 / gamma, 50.0 / (params.beta + 1.0))
    integral, err = quad(
        lambda s: 1.0 - _delta(params, u, s), 0.0, cutoff,
        epsabs=1e-10, limit=200,
    )
    return math.exp(-params.lam * integral), err


@dataclass(frozen=True)
class PgfReport:
    """Analytic oracle results on a grid, with quadrature error estimates."""

    params: DiscreteParams
    u_grid: tuple[float, ...]
    values: tuple[float, ...]
    quad_errors: tuple[float, ...]

    def as_dict(self) -> dict:
        return {
            "params": {
                "lam": self.params.lam,
                "beta": self.params.beta,
                "gamma": list(self.params.gamma),
                "c1": self.params.c1,
                "c2": self.params.c2,
                "w": self.params.w,
            },
            "u": list(self.u_grid),
            "pgf": list(self.values),
            "quad_error": list(self.quad_errors),
        }


def pgf_report(params: DiscreteParams, u_grid: Sequence[float]) -> PgfReport:
    values, errors = [], []
    for u in u_grid:
        v, e = _pgf_quadrature(params, u)
        values.append(v)
        errors.append(e)
    return PgfReport(params, tuple(float(u) for u in u_grid), tuple(values), tuple(errors))


# ---------------------------------------------------------------------------
# Full discrete model with channel-driven weight jumps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FullTrace:
    """Right-continuous path of the full integer model."""

    times: np.ndarray
    x: np.ndarray
    c: np.ndarray
    w: np.ndarray
    omega_p: np.ndarray
    omega_d: np.ndarray
    tags: tuple[str, ...]
    horizon: float

    def durations(self) -> np.ndarray:
        return np.diff(self.times, append=self.horizon)


def run_discrete_full(
    params: DiscreteParams,
    channel: CalciumSpec,
    alpha: float,
    horizon: float,
    rng: RngStream,
    x0: int = 0,
    c0: int = 0,
    w0: int = 0,
) -> FullTrace:
    """Full coupled run: integer quanta plus continuous channel filters.

    Only the threshold structure of ``channel`` is read (``theta_p``,
    ``theta_d``, ``rate_p``, ``rate_d``); the integer dynamics, including
    the calcium jump sizes, come from ``params``.  Between CTMC events the
    calcium count is frozen, so each channel decays toward its constant
    density target in closed form; weight jumps at the inhomogeneous
    channel rates are sampled by thinning against the per-interval
    envelope ``max(current value, density / alpha)`` (the flow is monotone
    toward the target, so the envelope bounds the whole interval).
    Depression jumps require ``w >= a_d``, so the weight stays
    non-negative; the homeostatic death removes single quanta at rate
    ``mu w``.
    """
    if params.dim != 1:
        raise ValueError("the full discrete model tracks a single calcium trace")
    if not alpha > 0.0:
        raise ValueError("alpha must be positive")
    gamma = params.gamma[0]
    gen = rng.generator
    t = 0.0
    x, c, w = int(x0), int(c0), int(w0)
    op = od = 0.0
    clock = 1.0 if any(params.k0) else 0.0
    times, xs, cs, ws = [0.0], [x], [c], [w]
    ops, ods, tags = [0.0], [0.0], ["start"]
    while True:
        n_p = channel.rate_p if c >= channel.theta_p else 0.0
        n_d = channel.rate_d if c >= channel.theta_d else 0.0
        env_p = max(op, n_p / alpha)
        env_d = max(od, n_d / alpha)
        base = x + gamma * c + clock + params.lam + params.beta * x + params.mu * w
        total = base + env_p + env_d
        if total == 0.0:
            t = horizon
            break
        dt = gen.exponential(1.0 / total)
        if t + dt >= horizon:
            dt = horizon - t
            t = horizon
            fade = math.exp(-alpha * dt)
            op = op * fade + n_p * (1.0 - fade) / alpha
            od = od * fade + n_d * (1.0 - fade) / alpha
            break
        t += dt
        fade = math.exp(-alpha * dt)
        op = op * fade + n_p * (1.0 - fade) / alpha
        od = od * fade + n_d * (1.0 - fade) / alpha
        pick = gen.random() * total
        tag = None
        if pick < x:
            x -= 1
            tag = "leak"
        elif pick < x + gamma * c:
            c -= 1
            tag = "decay"
        elif pick < x + gamma * c + clock:
            c += params.k0[0]
            tag = "clock"
        elif pick < x + gamma * c + clock + params.lam:
            x += w
            c += params.c1
            tag = "pre"
        elif pick < x + gamma * c + clock + params.lam + params.beta * x:
            x -= 1
            c += params.c2
            tag = "post"
        elif pick < base:
            w -= 1
            tag = "death"
        elif pick < base + env_p:
            if gen.random() * env_p <= op:
                w += params.a_p
                tag = "pot"
        else:
            # the gate is part of the rate: below a_d the jump cannot fire
            if w >= params.a_d and gen.random() * env_d <= od:
                w -= params.a_d
                tag = "dep"
        if tag is not None:
            times.append(t)
            xs.append(x)
            cs.append(c)
            ws.append(w)
            ops.append(op)
            ods.append(od)
            tags.append(tag)
    return FullTrace(
        np.asarray(times), np.asarray(xs, dtype=np.int64),
        np.asarray(cs, dtype=np.int64), np.asarray(ws, dtype=np.int64),
        np.asarray(ops), np.asarray(ods), tuple(tags), float(horizon),
    )


# ---------------------------------------------------------------------------
# Trace serialization (same shape as the continuous traces, integer columns)
# ---------------------------------------------------------------------------


def write_discrete_trace(path, trace: FastTrace | FullTrace) -> None:
    full = isinstance(trace, FullTrace)
    header = ["time", "x", "c"] + (["w", "omega_p", "omega_d", "event"] if full else [])
    with open(path, "w") as fh:
        fh.write("\t".join(header) + "\n")
        for i in range(trace.times.size):
            cols = [FLOAT_FMT % trace.times[i], str(int(trace.x[i])), str(int(trace.c[i]))]
            if full:
                cols += [
                    str(int(trace.w[i])),
                    FLOAT_FMT % trace.omega_p[i],
                    FLOAT_FMT % trace.omega_d[i],
                    trace.tags[i],
                ]
            fh.write("\t".join(cols) + "\n")


def read_discrete_trace(path, horizon: float) -> FastTrace | FullTrace:
    with open(path) as fh:
        header = fh.readline().split()
        rows = [line.rstrip("\n").split("\t") for line in fh]
    times = np.array([float(r[0]) for r in rows])
    x = np.array([int(r[1]) for r in rows], dtype=np.int64)
    c = np.array([int(r[2]) for r in rows], dtype=np.int64)
    if "w" not in header:
        return FastTrace(times, x, c, horizon)
    w = np.array([int(r[3]) for r in rows], dtype=np.int64)
    op = np.array([float(r[4]) for r in rows])
    od = np.array([float(r[5]) for r in rows])
    tags = tuple(r[6] for r in rows)
    return FullTrace(times, x, c, w, op, od, tags, horizon)
