"""Lyapunov exponents, limit directions, and contraction diagnostics.

Two independent estimators for the top exponent: norm growth of long
products and the integral of one-step increments against tracked limit
directions.  Their agreement is the headline cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import EstimateFailure, InputError, LowConfidenceDirection
from .matrices import GeneratorSystem
from .shift import WordStream, mix64, uniforms_at
from .torus import EmpiricalMeasure, fourier_grid

__all__ = [
    "LyapunovEstimate",
    "LimitDirection",
    "lyapunov_norm_growth",
    "limit_direction",
    "furstenberg_increment",
    "lyapunov_furstenberg",
    "ContractionReport",
    "contraction_fraction",
    "limit_measure_pushforward",
    "pushforward_convergence",
]

_STREAM_NORM = 0x4C59
_STREAM_FURST = 0x4655
_STREAM_CONTRACT = 0xC047
_AGREE_TOL = 1e-6


@dataclass(frozen=True)
class LyapunovEstimate:
    """Top-exponent estimate in nats per step."""

    value: float
    stderr: float
    steps: int
    replicates: int
    method: str
    refusals: int = 0
    replicate_values: tuple[float, ...] = ()

    def ci(self, z: float = 2.576) -> tuple[float, float]:
        """Normal confidence interval; default z is the 99% quantile."""
        return self.value - z * self.stderr, self.value + z * self.stderr


@dataclass(frozen=True)
class LimitDirection:
    """Dominant subspace estimate and its complement.

    v_b spans the attracting d0-subspace of forward products, v_prime_b
    the complementary kernel-direction estimate from reversed products.
    residual is the principal angle between the estimates at the full and
    half step counts.
    """

    v_b: np.ndarray
    v_prime_b: np.ndarray
    residual: float
    gap: float
    d0: int = 1

    def __post_init__(self) -> None:
        for frame in (self.v_b, self.v_prime_b):
            if frame.size:
                g = frame.T @ frame
                if not np.allclose(g, np.eye(frame.shape[1]), atol=1e-9):
                    raise InputError("direction frames must be orthonormal")

    @property
    def low_confidence(self) -> bool:
        return self.gap < 1.0 + 1e-6

    @property
    def confident(self) -> bool:
        return not self.low_confidence and self.residual < 1e-3


def _replicate_stats(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    if len(arr) < 2:
        return mean, 0.0
    return mean, float(arr.std(ddof=1) / math.sqrt(len(arr)))


def lyapunov_norm_growth(
    system: GeneratorSystem, steps: int, replicates: int, entropy: int
) -> LyapunovEstimate:
    """(1/n) log of the operator norm of sampled length-n products."""
    if steps < 100:
        raise InputError("steps must be >= 100")
    if replicates < 2:
        raise InputError("replicates must be >= 2")
    gens = system.float_generators()
    values = []
    for r in range(replicates):
        stream = WordStream.for_system(system, mix64(entropy, _STREAM_NORM, r))
        letters = stream.letters(steps)
        body, logscale = kernels.chain_logscale(gens, letters)
        sv = np.linalg.svd(np.asarray(body), compute_uv=False)
        values.append((logscale + math.log(float(sv[0]))) / steps)
    mean, stderr = _replicate_stats(values)
    return LyapunovEstimate(
        value=mean,
        stderr=stderr,
        steps=steps,
        replicates=replicates,
        method="NormGrowth",
        replicate_values=tuple(values),
    )


def _principal_sine(f1: np.ndarray, f2: np.ndarray) -> float:
    s = np.linalg.svd(f1.T @ f2, compute_uv=False)
    c = min(1.0, float(s.min()) if s.size else 1.0)
    return math.sqrt(max(0.0, 1.0 - c * c))


def limit_direction(
    system: GeneratorSystem, stream, steps: int, d0: int = 1
) -> LimitDirection:
    """Attracting subspace of forward products along the stream's letters.

    v_b: top d0 left-singular vectors of b_0...b_{n-1}; v_prime_b: bottom
    right-singular vectors of the reversed product; residual compares v_b
    at n steps against n//2 steps.  A singular-value gap below 1 + 1e-6
    marks the result low-confidence (flag, not an error).
    """
    if steps < 10:
        raise InputError("steps must be >= 10")
    d = system.dim
    if not (1 <= d0 < d):
        raise InputError("d0 must lie in [1, dim)")
    gens = system.float_generators()
    letters = stream.letters(steps)

    def forward_frame(n: int) -> tuple[np.ndarray, float]:
        body, _ = kernels.chain_logscale(gens, letters[:n])
        u, s, _ = np.linalg.svd(np.asarray(body))
        gap = float(s[d0 - 1] / s[d0]) if s[d0] > 0.0 else float("inf")
        return u[:, :d0], gap

    frame_full, gap = forward_frame(steps)
    frame_half, _ = forward_frame(max(1, steps // 2))
    body_rev, _ = kernels.chain_logscale(gens, letters[::-1].copy())
    _, _, vt = np.linalg.svd(np.asarray(body_rev))
    v_prime = vt[d0:, :].T
    residual = _principal_sine(frame_full, frame_half)
    return LimitDirection(
        v_b=frame_full, v_prime_b=v_prime, residual=residual, gap=gap, d0=d0
    )


def furstenberg_increment(
    system: GeneratorSystem, letter: int, direction: LimitDirection
) -> float:
    """log of the stretch of the shifted-word direction under one generator.

    `direction` must be the limit direction of the shifted word; refuses
    when its confidence gate (singular gap and residual) is not met.
    """
    if not (0 <= letter < system.n_letters):
        raise InputError(f"letter {letter} out of range")
    if not direction.confident:
        raise LowConfidenceDirection(
            f"direction gap {direction.gap:.3g}, residual {direction.residual:.3g} "
            "fails the confidence gate"
        )
    g = system.float_generators()[letter]
    w = direction.v_b[:, 0]
    return float(math.log(np.linalg.norm(g @ w)))


def _orthonormal_pair(seed: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    u = uniforms_at(seed, 0, 2 * d)
    v0 = u[:d] - 0.5
    v1 = u[d:] - 0.5
    v0 /= np.linalg.norm(v0)
    v1 -= v0 * (v0 @ v1)
    n1 = np.linalg.norm(v1)
    if n1 < 1e-9:
        v1 = np.roll(v0, 1) * np.array([1.0] + [-1.0] * (d - 1))
        v1 -= v0 * (v0 @ v1)
        n1 = np.linalg.norm(v1)
    return v0, v1 / n1


def lyapunov_furstenberg(
    system: GeneratorSystem,
    burn_in: int,
    samples: int,
    entropy: int,
    replicates: int = 8,
) -> LyapunovEstimate:
    """Integral-of-increments estimator for the top exponent.

    Tracks the shifted-word direction backward along sampled words with
    two independent starts; an increment is accepted only where the
    trackers agree to 1e-6 (each such position has at least `burn_in`
    contraction steps behind it).  Fails if more than 1% of increments
    are refused.
    """
    if burn_in < 50:
        raise InputError("burn_in must be >= 50")
    if samples < 1:
        raise InputError("samples must be >= 1")
    if replicates < 2:
        raise InputError("replicates must be >= 2")
    gens = system.float_generators()
    d = system.dim
    per = (samples + replicates - 1) // replicates
    means = []
    refusals = 0
    total = 0
    for r in range(replicates):
        stream = WordStream.for_system(system, mix64(entropy, _STREAM_FURST, r))
        letters = stream.letters(per + burn_in)
        v0, v1 = _orthonormal_pair(mix64(entropy, _STREAM_FURST, r, 0xF), d)
        incr, agree = kernels.backward_increments(gens, letters, v0, v1)
        incr = np.asarray(incr)[:per]
        agree = np.asarray(agree)[:per]
        ok = agree <= _AGREE_TOL
        refusals += int((~ok).sum())
        total += per
        if ok.any():
            means.append(float(incr[ok].mean()))
    if total == 0 or refusals > 0.01 * total:
        raise EstimateFailure(
            f"{refusals}/{total} increments refused by the direction "
            "confidence gate; the system may lack a dominant direction"
        )
    mean, stderr = _replicate_stats(means)
    return LyapunovEstimate(
        value=mean,
        stderr=stderr,
        steps=total,
        replicates=len(means),
        method="FurstenbergIntegral",
        refusals=refusals,
        replicate_values=tuple(means),
    )


@dataclass(frozen=True)
class ContractionReport:
    frac_a: float
    frac_b: float
    trials: int
    q: int
    r0: float
    eta: float


def contraction_fraction(
    system: GeneratorSystem,
    v: Sequence[float],
    q: int,
    trials: int,
    r0: float,
    eta: float,
    entropy: int,
) -> ContractionReport:
    """Fractions of sampled words contracting a fixed direction.

    frac_a: fraction of length-(q+1) products P with ||P v|| >= ||P||/r0.
    frac_b: fraction with the direction of P v within sine-distance eta of
    P applied to the tracked dominant subspace estimate.
    """
    if q < 1:
        raise InputError("q must be >= 1")
    if trials < 100:
        raise InputError("trials must be >= 100")
    if r0 <= 0 or eta <= 0:
        raise InputError("r0 and eta must be positive")
    vec = np.asarray(v, dtype=np.float64)
    nv = np.linalg.norm(vec)
    if nv == 0.0:
        raise InputError("v must be nonzero")
    vec = vec / nv
    gens = system.float_generators()
    aux = WordStream.for_system(system, mix64(entropy, _STREAM_CONTRACT, 0xA))
    w_frame = limit_direction(system, aux, max(4 * q, 200)).v_b
    count_a = 0
    count_b = 0
    slack = 1.0 - 1e-12
    for t in range(trials):
        stream = WordStream.for_system(system, mix64(entropy, _STREAM_CONTRACT, t + 1))
        letters = stream.letters(q + 1)
        # product a_q ... a_0 applied to v: first-drawn letter acts first
        body, _ = kernels.chain_logscale(gens, letters[::-1].copy())
        body = np.asarray(body)
        sv = np.linalg.svd(body, compute_uv=False)
        pv = body @ vec
        npv = np.linalg.norm(pv)
        if npv >= (float(sv[0]) / r0) * slack:
            count_a += 1
        pw = body @ w_frame[:, 0]
        npw = np.linalg.norm(pw)
        if npv > 0.0 and npw > 0.0:
            cosang = abs(float(pv @ pw)) / (npv * npw)
            sine = math.sqrt(max(0.0, 1.0 - min(1.0, cosang) ** 2))
            if sine <= eta:
                count_b += 1
    return ContractionReport(
        frac_a=count_a / trials,
        frac_b=count_b / trials,
        trials=trials,
        q=q,
        r0=r0,
        eta=eta,
    )


def limit_measure_pushforward(
    system: GeneratorSystem, base: EmpiricalMeasure, stream, p: int
) -> EmpiricalMeasure:
    """Pushforward of `base` by the exact product of the first p letters.

    p = 0 returns the base measure; atoms stay exact rationals.
    """
    if p < 0:
        raise InputError("p must be nonnegative")
    if p == 0:
        return base
    from .matrices import exact_word_product

    word = exact_word_product(system, stream.letters(p))
    return base.pushforward(word)


def pushforward_convergence(
    system: GeneratorSystem,
    base: EmpiricalMeasure,
    stream,
    p: int,
    k_max: int,
) -> dict:
    """Sup-Fourier distance between the depth-p and depth-2p pushforwards."""
    if p < 1:
        raise InputError("p must be >= 1")
    mu_p = limit_measure_pushforward(system, base, stream, p)
    mu_2p = limit_measure_pushforward(system, base, stream, 2 * p)
    sup = 0.0
    arg = ()
    for k in fourier_grid(base.dim, k_max):
        dist = abs(mu_p.fourier(k) - mu_2p.fourier(k))
        if dist > sup:
            sup = dist
            arg = tuple(int(c) for c in k)
    return {"p": p, "sup_distance": sup, "arg_k": arg, "k_max": k_max}
