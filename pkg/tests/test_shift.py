import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergodrift.errors import InputError, PreconditionError, UnsupportedConfiguration
from ergodrift.matrices import GeneratorSystem
from ergodrift.shift import (
    CocycleSpec,
    SuspensionState,
    WordStream,
    birkhoff_sum,
    last_jump_law_test,
    last_jump_sample,
    mix64,
    parse_cocycle,
    prefixed,
    solve_coboundary,
    suspension_advance,
    suspension_rate_check,
    uniforms_at,
)

HALF = (Fraction(1, 2), Fraction(1, 2))
SKEW = (Fraction(1, 4), Fraction(3, 4))
PAIR = GeneratorSystem.from_matrices([[[2, 1], [1, 1]], [[1, 1], [0, 1]]])


def test_mix64_deterministic_and_spread():
    assert mix64(7, 3) == mix64(7, 3)
    assert mix64(7, 3) != mix64(3, 7)
    assert mix64(0) != mix64(1)
    assert 0 <= mix64(2**80, -5) < 2**64


@given(st.integers(0, 2**63), st.integers(0, 200), st.integers(1, 50))
@settings(max_examples=40, deadline=None)
def test_uniforms_counter_addressing(seed, start, count):
    tail = uniforms_at(seed, start, count)
    full = uniforms_at(seed, 0, start + count)
    assert np.array_equal(tail, full[start:])


def test_wordstream_letter_consistency():
    s = WordStream(seed=12345, weights=HALF)
    block = s.letters(64)
    assert all(s.letter(i) == block[i] for i in range(64))
    assert s.window(5, 7) == tuple(int(x) for x in block[5:12])


def test_wordstream_advance_law():
    s = WordStream(seed=99, weights=SKEW)
    assert np.array_equal(s.advance(13).letters(20), s.letters(33)[13:])
    assert s.advance(0) is s


def test_wordstream_letter_law():
    s = WordStream(seed=2024, weights=SKEW)
    block = s.letters(100_000)
    freq = np.bincount(block, minlength=2) / block.size
    assert abs(freq[0] - 0.25) < 0.01
    assert abs(freq[1] - 0.75) < 0.01


def test_wordstream_rejects_bad_weights():
    with pytest.raises(InputError):
        WordStream(seed=1, weights=(Fraction(1, 2), Fraction(1, 3)))
    with pytest.raises(InputError):
        WordStream(seed=1, weights=HALF, cursor=-1)


def test_prefixed_stream_reads_prefix_then_base():
    base = WordStream(seed=5, weights=HALF)
    s = prefixed((1, 0, 1), base)
    assert s.letter(0) == 1 and s.letter(1) == 0 and s.letter(2) == 1
    assert s.letter(3) == base.letter(0)
    assert np.array_equal(s.letters(7)[3:], base.letters(4))
    assert s.advance(3) == base
    assert s.advance(5) == base.advance(2)


def test_cocycle_tables_and_means():
    const = CocycleSpec.constant(1.5)
    assert const.bounds() == (1.5, 1.5)
    assert const.exact_mean(HALF) == 1.5

    letter = CocycleSpec.from_letter_values([0.7, 1.3])
    assert letter.bounds() == (0.7, 1.3)
    assert letter.exact_mean(HALF) == pytest.approx(1.0, abs=1e-15)
    assert letter.exact_mean(SKEW) == pytest.approx(0.25 * 0.7 + 0.75 * 1.3, abs=1e-15)

    window = CocycleSpec.from_window_table(
        2, {(0, 0): 1.0, (0, 1): 2.0, (1, 0): 3.0, (1, 1): 4.0}
    )
    assert window.exact_mean(HALF) == pytest.approx(2.5, abs=1e-15)
    s = WordStream(seed=8, weights=HALF)
    w = s.window(0, 2)
    assert window.value(s, 0) == 1.0 + w[0] * 2 + w[1]


def test_window_cocycle_missing_key_errors():
    window = CocycleSpec.from_window_table(2, {(0, 0): 1.0})
    with pytest.raises(InputError):
        window.evaluator((1, 1))


def test_parse_cocycle_forms():
    assert parse_cocycle("constant:2.5", 2).constant_value == 2.5
    spec = parse_cocycle("letter:0.7,1.3", 2)
    assert spec.letter_table is not None and list(spec.letter_table) == [0.7, 1.3]
    loader = lambda name: "# comment\n0 0 1.0\n0 1 2.0\n1 0 3.0\n1 1 4.0\n"
    spec = parse_cocycle("window:2:table.txt", 2, table_loader=loader)
    assert spec.depth == 2 and spec.window_table[(1, 0)] == 3.0
    with pytest.raises(InputError):
        parse_cocycle("letter:0.7", 2)
    with pytest.raises(InputError):
        parse_cocycle("mystery:1", 2)


def test_birkhoff_sum_matches_replay():
    theta = CocycleSpec.from_window_table(
        2, {(0, 0): 0.3, (0, 1): -1.0, (1, 0): 2.0, (1, 1): 0.5}
    )
    s = WordStream(seed=314, weights=HALF)
    for p in (0, 1, 7, 40):
        brute = sum(theta.value(s, i) for i in range(p))
        assert birkhoff_sum(theta, s, p) == pytest.approx(brute, abs=1e-12)


def test_coboundary_psi_matches_brute_force():
    theta = CocycleSpec.from_letter_values([-1.0, 3.0])
    s = WordStream(seed=777, weights=HALF)
    sol = solve_coboundary(theta, 0.1, 16, s)
    psi, _ = sol.psi_values(s, 30)
    letters = s.letters(30 + 16)
    vals = theta.values_from_letters(letters, 30 + 16) - 0.1
    for i in range(30):
        brute = min(float(np.sum(vals[i : i + p])) for p in range(1, 17))
        assert psi[i] == pytest.approx(brute, abs=1e-9)


def test_coboundary_identity_and_floor():
    theta = CocycleSpec.from_letter_values([-1.0, 3.0])
    s = WordStream(seed=424242, weights=HALF)
    sol = solve_coboundary(theta, 0.1, 64, s)
    count = 2000
    psi, stab = sol.psi_values(s, count + 1)
    tau = np.maximum(psi, 0.0) + 0.1
    phi = np.maximum(-psi, 0.0)
    theta_vals = theta.values_from_letters(s.letters(count + 1), count + 1)
    # roof-plus-coboundary identity wherever the downstream minimum settled
    ok = stab[1:]
    residual = theta_vals[:count] - tau[:count] - phi[1:] + phi[:count]
    assert ok.mean() > 0.99
    assert np.abs(residual[ok]).max() <= 1e-9
    assert tau.min() >= 0.1


def test_coboundary_requires_positive_mean_margin():
    theta = CocycleSpec.constant(0.05)
    s = WordStream(seed=1, weights=HALF)
    with pytest.raises(PreconditionError):
        solve_coboundary(theta, 0.1, 8, s)
    with pytest.raises(InputError):
        solve_coboundary(theta, -0.1, 8, s)


def test_tau_roof_agrees_with_tau_values():
    theta = CocycleSpec.from_letter_values([-1.0, 3.0])
    s = WordStream(seed=55, weights=HALF)
    sol = solve_coboundary(theta, 0.1, 12, s)
    roof = sol.tau_roof()
    tau, _ = sol.tau_values(s, 10)
    for i in range(10):
        assert roof.value(s, i) == pytest.approx(tau[i], abs=1e-12)


def test_suspension_advance_semigroup():
    roof = CocycleSpec.from_letter_values([0.7, 1.3])
    s = WordStream(seed=31337, weights=HALF)
    start = SuspensionState(s, 0.25)
    one, p1 = suspension_advance(start, 3.7, roof)
    two, p2 = suspension_advance(one, 2.9, roof)
    whole, p = suspension_advance(start, 3.7 + 2.9, roof)
    assert p == p1 + p2
    assert whole.stream == two.stream
    assert whole.k == pytest.approx(two.k, abs=1e-9)


def test_suspension_advance_validates_inputs():
    roof = CocycleSpec.from_letter_values([0.7, 1.3])
    s = WordStream(seed=31337, weights=HALF)
    with pytest.raises(InputError):
        suspension_advance(SuspensionState(s, 5.0), 1.0, roof)
    with pytest.raises(InputError):
        suspension_advance(SuspensionState(s, 0.1), -1.0, roof)
    with pytest.raises(InputError):
        suspension_advance(SuspensionState(s, 0.0), 1.0, CocycleSpec.constant(-1.0))


def test_suspension_rate_check_targets_mean_roof():
    roof = CocycleSpec.from_letter_values([0.7, 1.3])
    s = WordStream(seed=2718, weights=HALF)
    out = suspension_rate_check(roof, s, 10_000.0)
    assert out["mean_roof"] == pytest.approx(1.0, abs=1e-12)
    assert out["birkhoff_average"] == pytest.approx(1.0, abs=0.02)
    assert out["jump_rate"] == pytest.approx(1.0, abs=0.02)


def test_last_jump_round_trip():
    roof = CocycleSpec.from_letter_values([0.7, 1.3])
    for rep in range(50):
        s = WordStream(seed=mix64(9000, rep), weights=HALF)
        k = 0.3 * float(roof.letter_table[s.letter(0)])
        target = SuspensionState(s, k)
        sample = last_jump_sample(target, 5.0, roof, mix64(9001, rep))
        back, p = suspension_advance(sample.preimage, 5.0, roof)
        assert p == sample.q
        assert back.stream == target.stream
        assert back.k == pytest.approx(target.k, abs=1e-9)
        assert sample.q >= math.ceil(5.0 / 1.3) - 1


def test_last_jump_requires_simple_roof():
    s = WordStream(seed=3, weights=HALF)
    window = CocycleSpec.from_window_table(2, {(a, b): 1.0 for a in (0, 1) for b in (0, 1)})
    with pytest.raises(UnsupportedConfiguration):
        last_jump_sample(SuspensionState(s, 0.1), 2.0, window, 7)


def test_last_jump_law_matches_letter_weights():
    roof = CocycleSpec.from_letter_values([0.7, 1.3])
    report = last_jump_law_test(PAIR, roof, ell=5.0, samples=3000, entropy=60601)
    assert report.single_hypothesis_met and report.pair_hypothesis_met
    assert report.counts_single.sum() == 3000
    assert report.pvalue_single > 1e-3
    assert report.pvalue_pair > 1e-3
    freq = report.frequencies_single()
    assert abs(freq[0] - 0.5) < 0.05
    # jump count concentrates near ell over the mean roof
    assert abs(report.mean_q - 5.0) < 0.5


def test_last_jump_law_flags_short_horizon():
    roof = CocycleSpec.from_letter_values([0.7, 1.3])
    report = last_jump_law_test(PAIR, roof, ell=1.0, samples=200, entropy=11)
    assert not report.single_hypothesis_met
    assert not report.pair_hypothesis_met
