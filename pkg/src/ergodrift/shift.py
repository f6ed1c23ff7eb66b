"""One-sided Bernoulli shift machinery.

Seeded letter streams (counter-based, so letter n is addressable without
replay), finite-window cocycles, the positive-roof coboundary
construction, the suspension semiflow over the shift, and the last-jump
preimage sampler with its statistical law test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .errors import InputError, PreconditionError, UnsupportedConfiguration

__all__ = [
    "mix64",
    "uniforms_at",
    "WordStream",
    "PrefixedStream",
    "CocycleSpec",
    "parse_cocycle",
    "CoboundarySolution",
    "SuspensionState",
    "birkhoff_sum",
    "solve_coboundary",
    "suspension_advance",
    "suspension_rate_check",
    "last_jump_sample",
    "LastJumpSample",
    "last_jump_law_test",
    "LastJumpLawReport",
]

_MASK64 = (1 << 64) - 1
_PHILOX_KEY2 = 0x9E3779B97F4A7C15


def mix64(*values: int) -> int:
    """Deterministic splitmix-style fold of integers into a 64-bit seed.

    Used as the stream-splitting rule: child = mix64(seed, experiment_id,
    replica_id, ...).
    """
    acc = 0x243F6A8885A308D3
    for v in values:
        x = (int(v) + 0x9E3779B97F4A7C15 + acc) & _MASK64
        x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
        acc = x ^ (x >> 31)
    return acc


def uniforms_at(seed: int, start: int, count: int) -> np.ndarray:
    """count uniform doubles at absolute positions [start, start+count).

    Counter-based: uniforms_at(s, a, n) equals the corresponding slice of
    uniforms_at(s, 0, a+n), so any position is reachable in O(1).
    """
    bg = np.random.Philox(key=np.array([seed & _MASK64, _PHILOX_KEY2], dtype=np.uint64))
    block, rem = divmod(start, 4)
    if block:
        bg.advance(block)
    if rem:
        bg.random_raw(rem)
    return np.random.Generator(bg).random(count)


@lru_cache(maxsize=256)
def _cum_thresholds(weights: tuple[Fraction, ...]) -> np.ndarray:
    c = np.cumsum(np.array([float(w) for w in weights]))
    c[-1] = 1.0
    return c


@dataclass(frozen=True)
class WordStream:
    """Immutable descriptor of a seeded letter sequence at a cursor."""

    seed: int
    weights: tuple[Fraction, ...]
    cursor: int = 0

    def __post_init__(self) -> None:
        if self.cursor < 0:
            raise InputError("cursor must be nonnegative")
        if not self.weights or any(w <= 0 for w in self.weights):
            raise InputError("weights must be positive")
        if sum(self.weights, Fraction(0)) != 1:
            raise InputError("weights must sum to exactly 1")

    @classmethod
    def for_system(cls, system, seed: int, cursor: int = 0) -> "WordStream":
        return cls(seed=seed, weights=tuple(system.weights), cursor=cursor)

    @property
    def n_letters(self) -> int:
        return len(self.weights)

    def letters(self, count: int) -> np.ndarray:
        """The letters at positions [cursor, cursor+count)."""
        if count < 0:
            raise InputError("count must be nonnegative")
        u = uniforms_at(self.seed, self.cursor, count)
        return np.searchsorted(_cum_thresholds(self.weights), u, side="right").astype(
            np.int64
        )

    def letter(self, i: int) -> int:
        if i < 0:
            raise InputError("letter index must be nonnegative")
        u = uniforms_at(self.seed, self.cursor + i, 1)
        return int(np.searchsorted(_cum_thresholds(self.weights), u[0], side="right"))

    def window(self, i: int, width: int) -> tuple[int, ...]:
        u = uniforms_at(self.seed, self.cursor + i, width)
        return tuple(
            int(x)
            for x in np.searchsorted(_cum_thresholds(self.weights), u, side="right")
        )

    def advance(self, p: int):
        if p < 0:
            raise InputError("cannot advance backwards")
        return WordStream(self.seed, self.weights, self.cursor + p) if p else self


@dataclass(frozen=True)
class PrefixedStream:
    """Finitely many explicit letters prepended to a base stream.

    Holds the concatenations a[q]b: prefix stores (a_{q-1}, ..., a_0) in
    word order, so the base stream follows after the prefix.
    """

    prefix: tuple[int, ...]
    base: WordStream

    @property
    def weights(self) -> tuple[Fraction, ...]:
        return self.base.weights

    @property
    def n_letters(self) -> int:
        return self.base.n_letters

    def letters(self, count: int) -> np.ndarray:
        if count < 0:
            raise InputError("count must be nonnegative")
        head = np.array(self.prefix[:count], dtype=np.int64)
        if count <= len(self.prefix):
            return head
        return np.concatenate([head, self.base.letters(count - len(self.prefix))])

    def letter(self, i: int) -> int:
        if i < 0:
            raise InputError("letter index must be nonnegative")
        if i < len(self.prefix):
            return self.prefix[i]
        return self.base.letter(i - len(self.prefix))

    def window(self, i: int, width: int) -> tuple[int, ...]:
        return tuple(self.letter(i + j) for j in range(width))

    def advance(self, p: int):
        if p < 0:
            raise InputError("cannot advance backwards")
        if p < len(self.prefix):
            return PrefixedStream(self.prefix[p:], self.base) if p else self
        return self.base.advance(p - len(self.prefix))


def prefixed(prefix: Sequence[int], base) -> "PrefixedStream | WordStream":
    pref = tuple(int(a) for a in prefix)
    if not pref:
        return base
    if isinstance(base, PrefixedStream):
        return PrefixedStream(pref + base.prefix, base.base)
    return PrefixedStream(pref, base)


@dataclass(frozen=True, eq=False)
class CocycleSpec:
    """Real-valued function of the first `depth` letters of a sequence."""

    depth: int
    evaluator: Callable[[tuple[int, ...]], float]
    letter_table: np.ndarray | None = None
    window_table: dict | None = None
    constant_value: float | None = None

    def __post_init__(self) -> None:
        if self.depth < 1:
            raise InputError("depth must be a positive integer")

    @classmethod
    def constant(cls, value: float) -> "CocycleSpec":
        v = float(value)
        return cls(1, lambda w: v, constant_value=v)

    @classmethod
    def from_letter_values(cls, values: Sequence[float]) -> "CocycleSpec":
        table = np.asarray([float(v) for v in values], dtype=np.float64)
        if table.ndim != 1 or table.size == 0:
            raise InputError("letter table must be a nonempty vector")
        return cls(1, lambda w: float(table[w[0]]), letter_table=table)

    @classmethod
    def from_window_table(cls, depth: int, table: dict) -> "CocycleSpec":
        tbl = {tuple(int(a) for a in k): float(v) for k, v in table.items()}
        if not tbl:
            raise InputError("window table must be nonempty")
        if any(len(k) != depth for k in tbl):
            raise InputError("window table keys must have length `depth`")

        def ev(w: tuple[int, ...]) -> float:
            try:
                return tbl[w]
            except KeyError:
                raise InputError(f"window {w} missing from cocycle table") from None

        return cls(depth, ev, window_table=tbl)

    @property
    def is_constant(self) -> bool:
        return self.constant_value is not None

    def value(self, stream, i: int = 0) -> float:
        return float(self.evaluator(stream.window(i, self.depth)))

    def values_from_letters(self, letters: np.ndarray, count: int) -> np.ndarray:
        """Values at shifts 0..count-1; letters must cover count+depth-1 positions."""
        if len(letters) < count + self.depth - 1:
            raise InputError("letter window too short for requested values")
        if self.depth == 1 and self.letter_table is not None:
            return self.letter_table[letters[:count]]
        if self.is_constant:
            return np.full(count, self.constant_value, dtype=np.float64)
        out = np.empty(count, dtype=np.float64)
        for i in range(count):
            out[i] = self.evaluator(tuple(int(x) for x in letters[i : i + self.depth]))
        return out

    def bounds(self) -> tuple[float, float]:
        """Exact (min, max) over the table; tables only."""
        if self.is_constant:
            return self.constant_value, self.constant_value
        if self.letter_table is not None:
            return float(self.letter_table.min()), float(self.letter_table.max())
        if self.window_table is not None:
            vals = list(self.window_table.values())
            return min(vals), max(vals)
        raise UnsupportedConfiguration("bounds need a table-based cocycle")

    def exact_mean(self, weights: tuple[Fraction, ...]) -> float:
        """Mean against the product law of `weights`; tables only."""
        if self.is_constant:
            return self.constant_value
        if self.letter_table is not None:
            if len(weights) != len(self.letter_table):
                raise InputError("weights and letter table mismatch")
            return float(sum(float(w) * v for w, v in zip(weights, self.letter_table)))
        if self.window_table is not None:
            total = 0.0
            for window, v in self.window_table.items():
                prob = 1.0
                for a in window:
                    prob *= float(weights[a])
                total += prob * v
            return total
        raise UnsupportedConfiguration("exact mean needs a table-based cocycle")


def parse_cocycle(text: str, n_letters: int, table_loader=None) -> CocycleSpec:
    """Parse 'constant:<v>', 'letter:<v0>,<v1>,...' or 'window:<w>:<file>'.

    table_loader maps a file name to its text content (the CLI passes a
    path-resolving loader).
    """
    kind, _, rest = text.partition(":")
    if kind == "constant":
        try:
            return CocycleSpec.constant(float(rest))
        except ValueError as exc:
            raise InputError(f"bad constant cocycle {text!r}") from exc
    if kind == "letter":
        try:
            values = [float(tok) for tok in rest.split(",")]
        except ValueError as exc:
            raise InputError(f"bad letter cocycle {text!r}") from exc
        if len(values) != n_letters:
            raise InputError(
                f"letter cocycle needs {n_letters} values, got {len(values)}"
            )
        return CocycleSpec.from_letter_values(values)
    if kind == "window":
        w_str, _, fname = rest.partition(":")
        try:
            depth = int(w_str)
        except ValueError as exc:
            raise InputError(f"bad window depth in {text!r}") from exc
        if table_loader is None:
            raise InputError("window cocycle needs a table file loader")
        table = {}
        for ln in table_loader(fname).splitlines():
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            toks = ln.split()
            if len(toks) != depth + 1:
                raise InputError(f"window table line {ln!r} needs {depth} letters + value")
            key = tuple(int(t) for t in toks[:depth])
            if any(a < 0 or a >= n_letters for a in key):
                raise InputError(f"window table letter out of range in {ln!r}")
            table[key] = float(toks[depth])
        return CocycleSpec.from_window_table(depth, table)
    raise InputError(f"unknown cocycle kind {kind!r}")


def birkhoff_sum(theta: CocycleSpec, stream, p: int) -> float:
    """Sum of theta over the first p shifts of the stream."""
    if p < 0:
        raise InputError("p must be nonnegative")
    if p == 0:
        return 0.0
    letters = stream.letters(p + theta.depth - 1)
    return float(np.add.reduce(theta.values_from_letters(letters, p)))


@dataclass(frozen=True, eq=False)
class CoboundarySolution:
    """Truncated positive-roof decomposition theta = tau + phi o T - phi.

    The construction applies the running-minimum decomposition to
    theta - epsilon0 and adds epsilon0 back to the roof, so tau >=
    epsilon0 wherever evaluated.  Each evaluation reports whether the
    truncated infimum stabilized (running minimum unchanged over the
    last ceil(p_max/2) candidate depths).
    """

    theta: CocycleSpec
    epsilon0: float
    p_max: int
    mean_theta: float
    mean_source: str

    def _psi_batch(self, stream, count: int) -> tuple[np.ndarray, np.ndarray]:
        need = count + self.p_max + self.theta.depth - 1
        letters = stream.letters(need)
        vals = self.theta.values_from_letters(letters, count + self.p_max) - self.epsilon0
        prefix = np.concatenate([[0.0], np.cumsum(vals)])
        win = np.lib.stride_tricks.sliding_window_view(prefix, self.p_max + 1)[:count]
        sums = win[:, 1:] - win[:, :1]
        cut = self.p_max - math.ceil(self.p_max / 2)
        psi = sums.min(axis=1)
        if cut >= 1:
            stabilized = sums[:, :cut].min(axis=1) == psi
        else:
            stabilized = np.zeros(count, dtype=bool)
        return psi, stabilized

    def psi_values(self, stream, count: int = 1) -> tuple[np.ndarray, np.ndarray]:
        if count < 1:
            raise InputError("count must be positive")
        return self._psi_batch(stream, count)

    def tau_value(self, stream) -> tuple[float, bool]:
        psi, stab = self._psi_batch(stream, 1)
        return max(float(psi[0]), 0.0) + self.epsilon0, bool(stab[0])

    def phi_value(self, stream) -> tuple[float, bool]:
        psi, stab = self._psi_batch(stream, 1)
        return max(-float(psi[0]), 0.0), bool(stab[0])

    def tau_values(self, stream, count: int) -> tuple[np.ndarray, np.ndarray]:
        psi, stab = self._psi_batch(stream, count)
        return np.maximum(psi, 0.0) + self.epsilon0, stab

    def phi_values(self, stream, count: int) -> tuple[np.ndarray, np.ndarray]:
        psi, stab = self._psi_batch(stream, count)
        return np.maximum(-psi, 0.0), stab

    def tau_roof(self) -> CocycleSpec:
        """The roof as a finite-window cocycle (depth p_max + theta depth - 1)."""
        depth = self.p_max + self.theta.depth - 1
        theta = self.theta
        eps = self.epsilon0
        p_max = self.p_max

        def ev(window: tuple[int, ...]) -> float:
            letters = np.asarray(window, dtype=np.int64)
            vals = theta.values_from_letters(letters, p_max) - eps
            sums = np.cumsum(vals)
            return max(float(sums.min()), 0.0) + eps

        return CocycleSpec(depth, ev)


def _cocycle_mean(theta: CocycleSpec, stream, mc_points: int = 4096) -> tuple[float, str]:
    try:
        return theta.exact_mean(stream.weights), "exact"
    except UnsupportedConfiguration:
        letters = stream.letters(mc_points + theta.depth - 1)
        vals = theta.values_from_letters(letters, mc_points)
        return float(vals.mean()), f"monte-carlo:{mc_points}"


def solve_coboundary(
    theta: CocycleSpec, epsilon0: float, p_max: int, stream
) -> CoboundarySolution:
    """Decompose theta into a roof bounded below by epsilon0 plus a coboundary.

    Requires the mean of theta (exact for table cocycles, Monte Carlo on
    the given stream otherwise) to exceed epsilon0.
    """
    if p_max < 1:
        raise InputError("p_max must be >= 1")
    if epsilon0 < 0:
        raise InputError("epsilon0 must be nonnegative")
    mean, source = _cocycle_mean(theta, stream)
    if not mean > epsilon0:
        raise PreconditionError(
            f"mean of theta ({mean:.6g}, {source}) must exceed epsilon0 ({epsilon0:.6g})"
        )
    return CoboundarySolution(theta, float(epsilon0), int(p_max), mean, source)


@dataclass(frozen=True)
class SuspensionState:
    """Point of the suspension: stream position plus fiber coordinate k."""

    stream: object
    k: float


def _validate_roof(roof: CocycleSpec, stream, sample_windows: int = 256) -> None:
    try:
        lo, _ = roof.bounds()
        if lo <= 0.0:
            raise InputError("roof must be strictly positive")
        return
    except UnsupportedConfiguration:
        pass
    letters = stream.letters(sample_windows + roof.depth - 1)
    vals = roof.values_from_letters(letters, sample_windows)
    if vals.size and float(vals.min()) <= 0.0:
        raise InputError("roof must be strictly positive (nonpositive sample found)")


def suspension_advance(
    c: SuspensionState, ell: float, roof: CocycleSpec
) -> tuple[SuspensionState, int]:
    """Flow the suspension point forward by time ell.

    Returns the advanced state (stream shifted by the jump count p, new
    fiber coordinate in [0, roof)) and p.
    """
    if ell < 0:
        raise InputError("ell must be nonnegative")
    _validate_roof(roof, c.stream)
    r0 = roof.value(c.stream, 0)
    if not (0.0 <= c.k < r0):
        raise InputError(f"fiber {c.k} outside [0, {r0})")
    budget = c.k + ell
    p = 0
    acc = 0.0
    have = 64
    letters = c.stream.letters(have + roof.depth - 1)
    vals = roof.values_from_letters(letters, have)
    while True:
        if p >= len(vals):
            have *= 2
            letters = c.stream.letters(have + roof.depth - 1)
            vals = roof.values_from_letters(letters, have)
        r = float(vals[p])
        if budget - (acc + r) >= 0.0:
            acc += r
            p += 1
        else:
            break
    k2 = budget - acc
    return SuspensionState(c.stream.advance(p), k2), p


def suspension_rate_check(
    roof: CocycleSpec, stream, ell: float
) -> dict:
    """Empirical long-run roof statistics along one trajectory.

    Reports the Birkhoff average (1/p) tau_{R,p}, the jump rate p/ell,
    and the mean roof value (exact for table cocycles) they both target.
    """
    state = SuspensionState(stream, 0.0)
    advanced, p = suspension_advance(state, ell, roof)
    mean, source = _cocycle_mean(roof, stream)
    sum_roof = birkhoff_sum(roof, stream, p)
    return {
        "jumps": p,
        "birkhoff_average": sum_roof / p if p else float("nan"),
        "jump_rate": p / ell if ell > 0 else float("nan"),
        "mean_roof": mean,
        "mean_source": source,
        "final_fiber": advanced.k,
    }


@dataclass(frozen=True)
class LastJumpSample:
    """Result of the last-jump preimage draw.

    prefix_letters holds (a_{q-1}, ..., a_0) in word order, so the last
    jump letter a_0 is prefix_letters[-1] and the preimage stream reads
    the prefix before the target's stream.
    """

    prefix_letters: tuple[int, ...]
    q: int
    preimage: SuspensionState


def last_jump_sample(
    target: SuspensionState, ell: float, roof: CocycleSpec, entropy: int
) -> LastJumpSample:
    """Draw the time-ell preimage of `target` along the fiber completion.

    Letters a_0, a_1, ... are drawn i.i.d. with the stream's weights,
    stopping at the first q with k - ell + (roof(a_0)+...+roof(a_{q-1}))
    >= 0; the returned preimage advances back onto `target` under
    suspension_advance(.., ell, roof).
    """
    if ell < 0:
        raise InputError("ell must be nonnegative")
    if roof.depth != 1:
        raise UnsupportedConfiguration("last-jump sampling requires a depth-1 roof")
    if roof.letter_table is None and not roof.is_constant:
        raise UnsupportedConfiguration("last-jump sampling requires a table roof")
    stream = target.stream
    n = stream.n_letters
    if roof.is_constant:
        table = np.full(n, roof.constant_value, dtype=np.float64)
    else:
        table = roof.letter_table
        if len(table) != n:
            raise InputError("roof table size does not match the alphabet")
    if float(table.min()) <= 0.0:
        raise InputError("roof must be strictly positive")
    r0 = float(table[stream.letter(0)])
    if not (0.0 <= target.k < r0):
        raise InputError(f"fiber {target.k} outside [0, {r0})")

    deficit = target.k - ell
    draws: list[int] = []
    acc = 0.0
    cum = _cum_thresholds(stream.weights)
    pos = 0
    while deficit + acc < 0.0:
        u = uniforms_at(entropy, pos, 16)
        letters = np.searchsorted(cum, u, side="right")
        for a in letters:
            a = int(a)
            draws.append(a)
            acc += float(table[a])
            if deficit + acc >= 0.0:
                break
        pos += 16
    q = len(draws)
    pre_stream = prefixed(tuple(reversed(draws)), stream)
    return LastJumpSample(tuple(reversed(draws)), q, SuspensionState(pre_stream, deficit + acc))


@dataclass(frozen=True)
class LastJumpLawReport:
    samples: int
    ell: float
    sup_roof: float
    single_hypothesis_met: bool
    pair_hypothesis_met: bool
    counts_single: np.ndarray
    counts_pair: np.ndarray
    pair_samples: int
    pvalue_single: float
    pvalue_pair: float
    mean_q: float

    def frequencies_single(self) -> np.ndarray:
        return self.counts_single / self.samples

    def frequencies_pair(self) -> np.ndarray:
        if self.pair_samples == 0:
            return np.zeros_like(self.counts_pair, dtype=np.float64)
        return self.counts_pair / self.pair_samples


def last_jump_law_test(
    system, roof: CocycleSpec, ell: float, samples: int, entropy: int
) -> LastJumpLawReport:
    """Histogram the last one and two jump letters against the letter law.

    Targets are drawn from the suspension's stationary law (stream from a
    derived seed, fiber by rejection under the roof), one preimage draw
    per target.  Chi-square p-values compare a_0 to the weights and
    (a_1, a_0) to the product law.
    """
    if samples < 1:
        raise InputError("samples must be positive")
    weights = tuple(system.weights)
    n = len(weights)
    if roof.depth != 1:
        raise UnsupportedConfiguration("law test requires a depth-1 roof")
    lo, sup_roof = roof.bounds()
    if lo <= 0:
        raise InputError("roof must be strictly positive")
    single_ok = ell >= sup_roof
    pair_ok = ell >= 2.0 * sup_roof

    counts_single = np.zeros(n, dtype=np.int64)
    counts_pair = np.zeros((n, n), dtype=np.int64)
    pair_samples = 0
    total_q = 0
    if roof.is_constant:
        table = np.full(n, roof.constant_value, dtype=np.float64)
    else:
        table = roof.letter_table
    for i in range(samples):
        stream = WordStream(seed=mix64(entropy, 0xBA5E, i), weights=weights)
        fiber_seed = mix64(entropy, 0xF1BE, i)
        r_b = float(table[stream.letter(0)])
        k = None
        pos = 0
        while k is None:
            for u in uniforms_at(fiber_seed, pos, 8):
                cand = float(u) * sup_roof
                if cand < r_b:
                    k = cand
                    break
            pos += 8
        sample = last_jump_sample(
            SuspensionState(stream, k), ell, roof, mix64(entropy, 0xD4A7, i)
        )
        total_q += sample.q
        if sample.q >= 1:
            counts_single[sample.prefix_letters[-1]] += 1
        if sample.q >= 2:
            counts_pair[sample.prefix_letters[-2], sample.prefix_letters[-1]] += 1
            pair_samples += 1

    w = np.array([float(x) for x in weights])
    n_single = int(counts_single.sum())
    if n_single > 0:
        pvalue_single = float(
            stats.chisquare(counts_single, f_exp=w * n_single).pvalue
        )
    else:
        pvalue_single = float("nan")
    if pair_samples > 0:
        expected_pair = np.outer(w, w).ravel() * pair_samples
        pvalue_pair = float(
            stats.chisquare(counts_pair.ravel(), f_exp=expected_pair).pvalue
        )
    else:
        pvalue_pair = float("nan")
    return LastJumpLawReport(
        samples=samples,
        ell=float(ell),
        sup_roof=float(sup_roof),
        single_hypothesis_met=bool(single_ok),
        pair_hypothesis_met=bool(pair_ok),
        counts_single=counts_single,
        counts_pair=counts_pair,
        pair_samples=pair_samples,
        pvalue_single=pvalue_single,
        pvalue_pair=pvalue_pair,
        mean_q=total_q / samples,
    )
