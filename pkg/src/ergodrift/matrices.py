"""Exact and log-scaled linear algebra for finitely generated matrix systems.

Generators are held in arbitrary-precision rational arithmetic with the
determinant pinned to 1 (IntMatrix is the integral case); long products
are tracked as a unit-Frobenius body plus an accumulated log scale so
that norms of 10^6-step products never overflow.  Certificates
(irreducibility, proximality) work on exact data only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import InputError, UnsupportedConfiguration

__all__ = [
    "ExactMatrix",
    "IntMatrix",
    "LogScaledMatrix",
    "GeneratorSystem",
    "word_product",
    "exact_word_product",
    "singular_values",
    "irreducibility_certificate",
    "proximality_certificate",
    "parse_system",
    "format_system",
]


def _canon_entry(x):
    if isinstance(x, bool):
        raise InputError("matrix entries must be numbers")
    if isinstance(x, int):
        return x
    if isinstance(x, Fraction):
        return int(x) if x.denominator == 1 else x
    if isinstance(x, str):
        return _canon_entry(Fraction(x))
    raise InputError(f"entry {x!r} is not an exact integer or rational")


def _exact_det(rows: Sequence[Sequence]) -> Fraction:
    # Fraction Gaussian elimination; exact and fast at these dimensions
    d = len(rows)
    a = [[Fraction(x) for x in row] for row in rows]
    det = Fraction(1)
    for c in range(d):
        pivot = next((r for r in range(c, d) if a[r][c] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != c:
            a[c], a[pivot] = a[pivot], a[c]
            det = -det
        det *= a[c][c]
        inv = 1 / a[c][c]
        for r in range(c + 1, d):
            factor = a[r][c] * inv
            if factor:
                for k in range(c, d):
                    a[r][k] -= factor * a[c][k]
    return det


@dataclass(frozen=True)
class ExactMatrix:
    """Square matrix with exact rational entries and determinant exactly 1."""

    entries: tuple[tuple, ...]

    def __post_init__(self) -> None:
        d = len(self.entries)
        if d == 0 or any(len(row) != d for row in self.entries):
            raise InputError("entries must form a square matrix")
        canon = tuple(tuple(_canon_entry(x) for x in row) for row in self.entries)
        object.__setattr__(self, "entries", canon)
        if _exact_det(canon) != 1:
            raise InputError("determinant must be exactly 1")

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable]) -> "ExactMatrix":
        return cls(tuple(tuple(row) for row in rows))

    @property
    def dim(self) -> int:
        return len(self.entries)

    @property
    def is_integral(self) -> bool:
        return all(isinstance(x, int) for row in self.entries for x in row)

    def require_integral(self, context: str) -> "ExactMatrix":
        if not self.is_integral:
            raise InputError(f"{context} requires an integer matrix")
        return self

    def __matmul__(self, other: "ExactMatrix") -> "ExactMatrix":
        if self.dim != other.dim:
            raise InputError("dimension mismatch")
        d = self.dim
        a, b = self.entries, other.entries
        rows = tuple(
            tuple(sum(a[i][j] * b[j][k] for j in range(d)) for k in range(d))
            for i in range(d)
        )
        return _wrap_exact(rows)

    def apply(self, vec: Sequence) -> tuple:
        """Exact matrix-vector product; preserves int/Fraction entries."""
        if len(vec) != self.dim:
            raise InputError("dimension mismatch")
        return tuple(sum(row[j] * vec[j] for j in range(self.dim)) for row in self.entries)

    def inverse(self) -> "ExactMatrix":
        d = self.dim
        a = [
            [Fraction(x) for x in row] + [Fraction(int(i == r)) for i in range(d)]
            for r, row in enumerate(self.entries)
        ]
        for c in range(d):
            pivot = next(r for r in range(c, d) if a[r][c] != 0)
            a[c], a[pivot] = a[pivot], a[c]
            inv = 1 / a[c][c]
            a[c] = [x * inv for x in a[c]]
            for r in range(d):
                if r != c and a[r][c]:
                    factor = a[r][c]
                    a[r] = [x - factor * y for x, y in zip(a[r], a[c])]
        return _wrap_exact(tuple(tuple(row[d:]) for row in a))

    def transpose(self) -> "ExactMatrix":
        d = self.dim
        return _wrap_exact(
            tuple(tuple(self.entries[j][i] for j in range(d)) for i in range(d))
        )

    def to_array(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.entries], dtype=np.float64)

    def trace(self):
        return sum(self.entries[i][i] for i in range(self.dim))


class IntMatrix(ExactMatrix):
    """ExactMatrix restricted to integer entries (an SL_d(Z) element)."""

    def __post_init__(self) -> None:
        super().__post_init__()
        if not self.is_integral:
            raise InputError("IntMatrix entries must be integers")


def _wrap_exact(rows: tuple[tuple, ...]) -> ExactMatrix:
    # promote to IntMatrix when the exact result happens to be integral
    canon = tuple(tuple(_canon_entry(x) for x in row) for row in rows)
    if all(isinstance(x, int) for row in canon for x in row):
        return IntMatrix(canon)
    return ExactMatrix(canon)


@dataclass(frozen=True, eq=False)
class LogScaledMatrix:
    """Matrix stored as exp(logscale) * body with body at unit Frobenius norm.

    The body's operator norm then sits in [1/sqrt(d), 1], inside the
    [1/2, 2] window for d <= 4, and logscale + log(sigma_1(body)) equals
    the log of the represented matrix's operator norm.
    """

    body: np.ndarray
    logscale: float

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.body)) or not math.isfinite(self.logscale):
            raise InputError("log-scaled matrix entries must be finite")

    @classmethod
    def identity(cls, d: int) -> "LogScaledMatrix":
        return cls(np.eye(d), 0.0)

    @classmethod
    def from_array(cls, m: np.ndarray) -> "LogScaledMatrix":
        m = np.asarray(m, dtype=np.float64)
        f = math.sqrt(float(np.sum(m * m)))
        if not math.isfinite(f) or f == 0.0:
            raise InputError("matrix must be finite and nonzero")
        return cls(m / f, math.log(f))

    @property
    def dim(self) -> int:
        return self.body.shape[0]

    def matmul(self, other: "LogScaledMatrix") -> "LogScaledMatrix":
        prod = self.body @ other.body
        f = math.sqrt(float(np.sum(prod * prod)))
        if f == 0.0:
            raise InputError("product collapsed to zero")
        return LogScaledMatrix(prod / f, self.logscale + other.logscale + math.log(f))

    def apply(self, vec: np.ndarray) -> tuple[np.ndarray, float]:
        """Returns (unit direction of body @ vec, log norm of full matrix @ vec)."""
        out = self.body @ np.asarray(vec, dtype=np.float64)
        norm = float(np.linalg.norm(out))
        if norm == 0.0:
            raise InputError("vector is annihilated")
        return out / norm, self.logscale + math.log(norm)

    def log_op_norm(self) -> float:
        return self.logscale + math.log(float(singular_values(self.body)[0]))

    def to_array(self) -> np.ndarray:
        return self.body * math.exp(self.logscale)


def _as_fraction(w) -> Fraction:
    if isinstance(w, Fraction):
        return w
    if isinstance(w, int) or isinstance(w, str):
        return Fraction(w)
    raise InputError(f"weight {w!r} is not an exact rational")


@dataclass(frozen=True, eq=False)
class GeneratorSystem:
    """Finite set of determinant-1 exact generators with rational weights."""

    generators: tuple[ExactMatrix, ...]
    weights: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        if not self.generators:
            raise InputError("need at least one generator")
        d = self.generators[0].dim
        if any(g.dim != d for g in self.generators):
            raise InputError("generators must share one dimension")
        if len(self.weights) != len(self.generators):
            raise InputError("one weight per generator required")
        if any(w <= 0 for w in self.weights):
            raise InputError("weights must be positive")
        if sum(self.weights, Fraction(0)) != 1:
            raise InputError("weights must sum to exactly 1")

    @classmethod
    def from_matrices(cls, mats: Iterable, weights=None) -> "GeneratorSystem":
        gens = tuple(
            m if isinstance(m, ExactMatrix) else ExactMatrix.from_rows(m) for m in mats
        )
        if weights is None:
            n = len(gens)
            ws = tuple(Fraction(1, n) for _ in gens)
        else:
            ws = tuple(_as_fraction(w) for w in weights)
        return cls(gens, ws)

    @property
    def dim(self) -> int:
        return self.generators[0].dim

    @property
    def n_letters(self) -> int:
        return len(self.generators)

    @property
    def is_integral(self) -> bool:
        return all(g.is_integral for g in self.generators)

    def float_generators(self) -> np.ndarray:
        return np.stack([g.to_array() for g in self.generators])

    def float_inverses(self) -> np.ndarray:
        return np.stack([g.inverse().to_array() for g in self.generators])

    def weight_floats(self) -> np.ndarray:
        return np.array([float(w) for w in self.weights])

    def cumulative_weights(self) -> np.ndarray:
        c = np.cumsum(self.weight_floats())
        c[-1] = 1.0
        return c

    def norm_bound(self) -> float:
        """R_0: max over generators of max(op norm, op norm of inverse)."""
        vals = []
        for g in self.generators:
            vals.append(float(singular_values(g.to_array())[0]))
            vals.append(float(singular_values(g.inverse().to_array())[0]))
        return max(vals)

    def require_integral(self, context: str) -> None:
        if not self.is_integral:
            raise InputError(f"{context} requires integer generators")

    def validate_letters(self, letters) -> np.ndarray:
        arr = np.asarray(letters, dtype=np.int64)
        if arr.ndim != 1:
            arr = arr.reshape(-1)
        if arr.size and (arr.min() < 0 or arr.max() >= self.n_letters):
            raise InputError("letter index out of range")
        return arr


def word_product(system: GeneratorSystem, letters) -> LogScaledMatrix:
    """Log-scaled product gens[letters[0]] @ gens[letters[1]] @ ...

    The empty word gives the identity with logscale 0.
    """
    arr = system.validate_letters(letters)
    body, logscale = kernels.chain_logscale(system.float_generators(), arr)
    return LogScaledMatrix(body, logscale)


def exact_word_product(system: GeneratorSystem, letters) -> ExactMatrix:
    """Exact product over the same letter order as word_product."""
    arr = system.validate_letters(letters)
    out = _wrap_exact(
        tuple(tuple(int(i == j) for j in range(system.dim)) for i in range(system.dim))
    )
    for a in arr:
        out = out @ system.generators[int(a)]
    return out


def singular_values(m: np.ndarray) -> np.ndarray:
    """Singular values in descending order."""
    m = np.asarray(m, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise InputError("matrix entries must be finite")
    return np.linalg.svd(m, compute_uv=False)


def _words_up_to(n_letters: int, max_len: int):
    frontier = [()]
    yield ()
    for _ in range(max_len):
        nxt = []
        for w in frontier:
            for a in range(n_letters):
                word = w + (a,)
                nxt.append(word)
                yield word
        frontier = nxt


def irreducibility_certificate(system: GeneratorSystem, max_word_len: int) -> str:
    """'Irreducible' when word products span the full d^2 matrix space over Q.

    A full matrix-algebra span certifies that no proper subspace is
    invariant; 'Inconclusive' otherwise.  Never a false positive.
    """
    if max_word_len < 0:
        raise InputError("max_word_len must be nonnegative")
    d = system.dim
    target = d * d
    basis: list[list[Fraction]] = []
    pivots: list[int] = []

    def add_vector(vec: list[Fraction]) -> None:
        v = vec[:]
        for row, p in zip(basis, pivots):
            if v[p]:
                factor = v[p] / row[p]
                v = [x - factor * y for x, y in zip(v, row)]
        pivot = next((i for i, x in enumerate(v) if x), None)
        if pivot is not None:
            basis.append(v)
            pivots.append(pivot)

    for word in _words_up_to(system.n_letters, max_word_len):
        m = exact_word_product(system, list(word))
        add_vector([Fraction(x) for row in m.entries for x in row])
        if len(basis) == target:
            return "Irreducible"
    return "Inconclusive"


def _char_poly(m: ExactMatrix) -> list[Fraction]:
    """Coefficients of det(xI - m), highest degree first, exact."""
    d = m.dim
    e = m.entries
    if d == 2:
        return [Fraction(1), Fraction(-m.trace()), Fraction(1)]
    if d == 3:
        tr = m.trace()
        c2 = (
            e[0][0] * e[1][1] - e[0][1] * e[1][0]
            + e[0][0] * e[2][2] - e[0][2] * e[2][0]
            + e[1][1] * e[2][2] - e[1][2] * e[2][1]
        )
        return [Fraction(1), Fraction(-tr), Fraction(c2), Fraction(-1)]
    raise UnsupportedConfiguration("characteristic roots supported for d <= 3 only")


def _poly_eval(coeffs: Sequence[Fraction], x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in coeffs:
        acc = acc * x + c
    return acc


def _poly_rem(num: list[Fraction], den: list[Fraction]) -> list[Fraction]:
    out = num[:]
    dn = len(den)
    while len(out) >= dn:
        if out[0] == 0:
            out.pop(0)
            continue
        factor = out[0] / den[0]
        for i in range(dn):
            out[i] -= factor * den[i]
        out.pop(0)
    while out and out[0] == 0:
        out.pop(0)
    return out


def _sturm_chain(coeffs: list[Fraction]) -> list[list[Fraction]]:
    p0 = coeffs[:]
    deg = len(p0) - 1
    p1 = [c * (deg - i) for i, c in enumerate(p0[:-1])]
    chain = [p0, p1]
    while len(chain[-1]) > 1:
        rem = _poly_rem(chain[-2], chain[-1])
        if not rem:
            break
        chain.append([-c for c in rem])
    return chain


def _sign_changes(chain: list[list[Fraction]], x: Fraction) -> int:
    signs = []
    for p in chain:
        v = _poly_eval(p, x)
        if v != 0:
            signs.append(1 if v > 0 else -1)
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def _isolate_real_roots(
    coeffs: list[Fraction], width: Fraction
) -> list[tuple[Fraction, Fraction]]:
    """Disjoint rational intervals of length <= width, one per distinct real root."""
    poly = coeffs[:]
    chain = _sturm_chain(poly)
    bound = Fraction(1) + max(abs(c) for c in poly[1:]) / abs(poly[0])
    intervals = []
    work = [(-bound, bound)]
    while work:
        lo, hi = work.pop()
        n = _sign_changes(chain, lo) - _sign_changes(chain, hi)
        if n == 0:
            continue
        if n == 1 and hi - lo <= width:
            intervals.append((lo, hi))
            continue
        mid = (lo + hi) / 2
        while _poly_eval(poly, mid) == 0:
            mid += (hi - lo) / 1024
        work.append((lo, mid))
        work.append((mid, hi))
    intervals.sort()
    return intervals


def _distinct_roots_in(chain, lo: Fraction, hi: Fraction) -> int:
    return _sign_changes(chain, lo) - _sign_changes(chain, hi)


def _is_proximal(m: ExactMatrix, gap: Fraction) -> bool:
    """True when m has a unique real eigenvalue of strictly maximal modulus,
    beating every other eigenvalue modulus by at least gap (exact decision)."""
    coeffs = _char_poly(m)
    d = m.dim
    width = Fraction(1, 10**12)
    roots = _isolate_real_roots(coeffs, width)
    if not roots:
        return False
    mods = [
        (min(abs(lo), abs(hi)) if lo * hi > 0 else Fraction(0), max(abs(lo), abs(hi)))
        for lo, hi in roots
    ]
    order = sorted(range(len(mods)), key=lambda i: mods[i][1], reverse=True)
    top = order[0]
    top_lo = mods[top][0]
    if top_lo == 0:
        return False
    chain = _sturm_chain(coeffs)
    n_real = sum(_distinct_roots_in(chain, lo, hi) for lo, hi in roots)
    if n_real < d:
        # remaining eigenvalues form a complex pair (d = 3, det = 1):
        # |pair|^2 = 1/|lambda_1|; repeated-root cases are declined
        if d != 3 or n_real != 1:
            return False
        pair_hi_sq = Fraction(1) / top_lo
        if top_lo <= gap:
            return False
        return (top_lo - gap) * (top_lo - gap) >= pair_hi_sq
    others_hi = [mods[i][1] for i in order[1:]]
    if not others_hi:
        return d == 1
    return top_lo >= max(others_hi) + gap


def proximality_certificate(system: GeneratorSystem, max_word_len: int):
    """Search words up to max_word_len for a proximal element.

    Returns the witness letters (shortest, lexicographically first) or
    None when no word certifies within the budget.  The modulus gap
    threshold is 1e-6, decided in exact rational arithmetic.
    """
    if system.dim > 3:
        raise UnsupportedConfiguration("proximality certificate supports d <= 3")
    if max_word_len < 1:
        raise InputError("max_word_len must be positive")
    gap = Fraction(1, 10**6)
    for word in _words_up_to(system.n_letters, max_word_len):
        if not word:
            continue
        m = exact_word_product(system, list(word))
        if _is_proximal(m, gap):
            return tuple(word)
    return None


def parse_system(text: str) -> GeneratorSystem:
    """Parse the plain-text system format.

    First line 'd=<dim>'; then one matrix per line as d^2 rational
    entries row-major ('num/den' or plain integers); optionally a final
    line 'w=<p1> <p2> ...' with rational weights; weights default to
    uniform.
    """
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("d="):
        raise InputError("system text must start with 'd=<dim>'")
    try:
        d = int(lines[0][2:])
    except ValueError as exc:
        raise InputError("bad dimension line") from exc
    mats = []
    weights = None
    for ln in lines[1:]:
        if ln.startswith("w="):
            weights = [Fraction(tok) for tok in ln[2:].split()]
            continue
        try:
            nums = [Fraction(tok) for tok in ln.split()]
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"bad matrix line {ln!r}") from exc
        if len(nums) != d * d:
            raise InputError(f"expected {d * d} entries per matrix line")
        mats.append([nums[i * d : (i + 1) * d] for i in range(d)])
    if not mats:
        raise InputError("no generator lines found")
    return GeneratorSystem.from_matrices(mats, weights)


def format_system(system: GeneratorSystem) -> str:
    lines = [f"d={system.dim}"]
    for g in system.generators:
        lines.append(" ".join(str(x) for row in g.entries for x in row))
    lines.append("w=" + " ".join(str(w) for w in system.weights))
    return "\n".join(lines) + "\n"
