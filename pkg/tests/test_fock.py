import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlmetro.errors import DimensionError, TruncationError
from nlmetro.fock import (
    DensityMatrix,
    SingleModeState,
    Truncation,
    TwoModeState,
    annihilate,
    beam_splitter,
    beam_splitter_sectors,
    embed,
    fidelity,
    fix_global_phase,
    fock,
    inner_product,
    normalize,
    number_moment,
    partial_trace,
    tensor,
    vacuum,
)
from nlmetro.states import coherent, ecs, noon


def _sectors(c):
    """Total-photon-number sector probabilities of a coefficient matrix."""
    p = np.abs(c) ** 2
    d = p.shape[0]
    return np.array([math.fsum(p[m, M - m] for m in range(max(0, M - d + 1), min(M, d - 1) + 1)) for M in range(2 * d - 1)])


def _random_two_mode(seed, cutoff=6):
    rng = np.random.default_rng(seed)
    c = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    # keep support below cutoff/2 per mode so the splitter cannot leak
    h = cutoff // 2 + 1
    c[:h, :h] = rng.normal(size=(h, h)) + 1j * rng.normal(size=(h, h))
    c /= np.sqrt(np.sum(np.abs(c) ** 2))
    return TwoModeState(c, Truncation(cutoff))


class TestTruncation:
    def test_rejects_bad_fields(self):
        with pytest.raises(ValueError):
            Truncation(-1)
        with pytest.raises(ValueError):
            Truncation(3, 0.0)
        with pytest.raises(ValueError):
            Truncation(3, 1.0)

    def test_admit(self):
        t = Truncation(5, 1e-12)
        t.admit(1e-13)
        with pytest.raises(TruncationError) as exc:
            t.admit(1e-6)
        assert exc.value.cutoff == 5

    def test_states_are_immutable(self):
        s = fock(2, Truncation(3))
        with pytest.raises(ValueError):
            s.amplitudes[0] = 1.0


class TestInnerProduct:
    def test_vacuum(self):
        t = Truncation(4)
        assert inner_product(vacuum(t), vacuum(t)) == 1 + 0j

    def test_orthogonal_fock(self):
        t = Truncation(4)
        assert inner_product(fock(0, t), fock(1, t)) == 0

    def test_coherent_self_overlap(self):
        s = coherent(1.0, tail_epsilon=1e-14)
        assert abs(inner_product(s, s) - 1) < 1e-12

    def test_conjugate_symmetry(self):
        a, b = _random_two_mode(1), _random_two_mode(2)
        assert inner_product(a, b) == pytest.approx(np.conj(inner_product(b, a)), abs=1e-15)

    def test_mismatched_cutoff(self):
        with pytest.raises(DimensionError):
            inner_product(fock(0, Truncation(3)), fock(0, Truncation(4)))

    def test_mismatched_kind(self):
        t = Truncation(2)
        with pytest.raises(DimensionError):
            inner_product(fock(0, t), tensor(fock(0, t), fock(0, t)))


class TestFidelity:
    def test_self(self):
        s = coherent(0.7)
        assert fidelity(s, s) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        t = Truncation(3)
        assert fidelity(fock(0, t), fock(1, t)) == 0.0


class TestTensor:
    def test_vacuum_product(self):
        t = Truncation(3)
        c = tensor(vacuum(t), vacuum(t)).coeffs
        assert c[0, 0] == 1 and np.count_nonzero(c) == 1

    def test_fock_product(self):
        t = Truncation(3)
        c = tensor(fock(1, t), fock(2, t)).coeffs
        assert c[1, 2] == 1 and np.count_nonzero(c) == 1

    def test_norm(self):
        a = coherent(1.0)
        b = coherent(2.0, Truncation(a.cutoff + 20))
        s = tensor(embed(a, b.cutoff), b)
        assert s.norm_squared() == pytest.approx(1.0, abs=1e-10)

    def test_mismatch(self):
        with pytest.raises(DimensionError):
            tensor(fock(0, Truncation(2)), fock(0, Truncation(3)))


class TestBeamSplitter:
    def test_identity_at_unit_transmission(self):
        s = _random_two_mode(3)
        out = beam_splitter(s, 1.0)
        assert np.allclose(out.coeffs, s.coeffs, atol=1e-15)

    def test_single_photon(self):
        t = Truncation(2)
        out = beam_splitter(tensor(fock(1, t), vacuum(t)), 0.5).coeffs
        assert out[1, 0] == pytest.approx(1 / math.sqrt(2))
        assert out[0, 1] == pytest.approx(-1 / math.sqrt(2))

    def test_coherent_pair_merges(self):
        a = coherent(1.0)
        t = Truncation(a.cutoff + 10)
        a = embed(a, t.cutoff)
        out = beam_splitter(tensor(a, a), 0.5)
        target = tensor(coherent(math.sqrt(2.0), t), vacuum(t))
        assert fidelity(out, target) > 1 - 1e-10

    def test_sector_blocks_are_orthogonal(self):
        for total, block in beam_splitter_sectors(12, 0.37):
            assert np.allclose(block @ block.T, np.eye(total + 1), atol=1e-12)

    def test_inverse_round_trip(self):
        s = _random_two_mode(4)
        back = beam_splitter(beam_splitter(s, 0.5), 0.5, inverse=True)
        assert fidelity(back, s) > 1 - 1e-10

    def test_invalid_transmission(self):
        with pytest.raises(ValueError):
            beam_splitter(_random_two_mode(5), 1.2)

    def test_leak_is_reported(self):
        t = Truncation(2)
        with pytest.raises(TruncationError):
            beam_splitter(tensor(fock(2, t), fock(2, t)), 0.5)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), eta=st.floats(0.0, 1.0))
    def test_unitarity_property(self, seed, eta):
        s = _random_two_mode(seed)
        out = beam_splitter(s, eta)
        assert out.norm_squared() == pytest.approx(s.norm_squared(), abs=1e-10)
        assert np.allclose(_sectors(out.coeffs), _sectors(s.coeffs), atol=1e-10)


class TestPartialTrace:
    def test_product(self):
        t = Truncation(2)
        rho = partial_trace(tensor(fock(0, t), fock(1, t)), keep=2).entries
        assert np.allclose(rho, np.diag([0, 1, 0]))

    def test_noon(self):
        rho = partial_trace(noon(2), keep=2).entries
        assert np.allclose(rho, np.diag([0.5, 0, 0.5]))

    def test_ecs_trace(self):
        rho = partial_trace(ecs(1.0, "+"), keep=2)
        assert math.fsum(rho.eigenvalues()) == pytest.approx(1.0, abs=1e-10)
        rho.check()

    def test_product_is_pure(self):
        a = coherent(0.8)
        s = tensor(a, embed(fock(3, Truncation(3)), a.cutoff))
        assert partial_trace(s, 1).eigenvalues().max() == pytest.approx(1.0, abs=1e-9)

    def test_from_density_matrix(self):
        s = _random_two_mode(6)
        v = s.coeffs.ravel()
        full = DensityMatrix(np.outer(v, v.conj()), s.truncation)
        for keep in (1, 2):
            assert np.allclose(partial_trace(full, keep).entries, partial_trace(s, keep).entries, atol=1e-14)

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            partial_trace(noon(1), keep=3)


class TestNumberMoment:
    def test_fock(self):
        t = Truncation(3)
        assert number_moment(tensor(fock(0, t), fock(3, t)), 2, 2) == 9

    def test_noon(self):
        assert number_moment(noon(4), 2, 1) == pytest.approx(2, rel=1e-15)

    def test_coherent(self):
        b = coherent(1.5)
        s = tensor(vacuum(b.truncation), b)
        assert number_moment(s, 2, 1) == pytest.approx(2.25, abs=1e-9)

    def test_zeroth(self):
        assert number_moment(noon(3), 2, 0) == 1.0


class TestAnnihilate:
    def test_single_photon(self):
        t = Truncation(3)
        out, w = annihilate(fock(1, t))
        assert w == 1.0 and out.amplitudes[0] == 1.0

    def test_vacuum(self):
        out, w = annihilate(vacuum(Truncation(3)))
        assert w == 0.0 and not np.any(out.amplitudes)

    def test_coherent_eigenstate(self):
        a = coherent(1.0)
        out, w = annihilate(a)
        assert fidelity(normalize(out), a) == pytest.approx(1.0, abs=1e-10)
        assert w == pytest.approx(1.0, abs=1e-10)

    def test_weight_is_mean_photon_number(self):
        a = coherent(1.3)
        _, w = annihilate(a)
        assert w == pytest.approx(number_moment(a, 1, 1), rel=1e-12)


class TestPhaseFixing:
    def test_first_significant_entry_real_positive(self):
        arr = np.array([1e-14, -0.6j, 0.8])
        out = fix_global_phase(arr)
        assert out[1].real > 0 and abs(out[1].imag) < 1e-15

    def test_two_mode_scan_order(self):
        c = np.zeros((2, 2), dtype=complex)
        c[1, 0], c[0, 1] = -1, 1
        out = fix_global_phase(c)
        assert out[1, 0] == 1


class TestEmbed:
    def test_pad_and_trim(self):
        s = SingleModeState(np.array([0.6, 0.8, 0]), Truncation(2))
        assert embed(s, 5).cutoff == 5
        assert np.allclose(embed(s, 1).amplitudes, [0.6, 0.8])

    def test_trim_checks_tail(self):
        s = SingleModeState(np.array([0.6, 0.8]), Truncation(1))
        with pytest.raises(TruncationError):
            embed(s, 0)
