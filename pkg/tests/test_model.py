import math
import unittest

import numpy as np
from scipy import linalg

from core.errors import ConfigError, LabelingError, ParameterDomainError
from simulation.model import (
    B_STATE, TWO_PI, BSuperposition, CouplingForm, ModeSpec, build, dressed_coupling, dressed_spectrum,
    effective_coupling, effective_hamiltonian, enumerate_basis, mediated_exchange, project, three_mode_couplings,
    three_mode_specs,
)
from simulation.quantize import REFERENCE_MODES

EQ3_STATES = [(0, 0, 0), (0, 1, 0), (1, 0, 0), (0, 2, 0), (1, 1, 0), (2, 0, 0)]


def reference_device(levels=4, form=CouplingForm.RWA, **changes):
    params = REFERENCE_MODES.with_(omega_c=5.5, **changes)
    return build(three_mode_specs(params, levels), three_mode_couplings(params), form)


class TestBuild(unittest.TestCase):

    def test_single_mode_diagonal(self):
        h = build([ModeSpec("q", 4.5, -0.25, 3)], {})
        np.testing.assert_allclose(np.diag(h.matrix).real, TWO_PI * np.array([0.0, 4.5, 8.75]), atol=1e-12)
        self.assertEqual(h.dimension, 3)

    def test_hermitian_and_real_diagonal(self):
        for form in CouplingForm:
            h = reference_device(form=form)
            self.assertEqual(np.max(np.abs(h.matrix - h.matrix.conj().T)), 0.0)
            self.assertTrue(np.all(np.diag(h.matrix).imag == 0))

    def test_two_excitation_block_matches_printed_structure(self):
        params = REFERENCE_MODES.with_(omega_c=5.5)
        h = reference_device()
        block = project(h, EQ3_STATES) / TWO_PI
        w1, w2 = params.omega_1, params.omega_2
        a1, a2 = params.alpha_1, params.alpha_2
        g = params.g_12
        expected = np.zeros((6, 6))
        np.fill_diagonal(expected, [0.0, w2, w1, 2 * w2 + a2, w1 + w2, 2 * w1 + a1])
        expected[1, 2] = expected[2, 1] = g
        expected[3, 4] = expected[4, 3] = math.sqrt(2) * g
        expected[4, 5] = expected[5, 4] = math.sqrt(2) * g
        np.testing.assert_allclose(block.real, expected, atol=1e-14)
        self.assertEqual(np.max(np.abs(block.imag)), 0.0)

    def test_rwa_conserves_excitation_number(self):
        h = reference_device(form=CouplingForm.RWA)
        n = np.diag(h.excitation_diagonal())
        commutator = h.matrix @ n - n @ h.matrix
        self.assertLess(np.max(np.abs(commutator)), 1e-12)

    def test_full_form_breaks_excitation_number(self):
        h = reference_device(form=CouplingForm.FULL)
        n = np.diag(h.excitation_diagonal())
        self.assertGreater(np.max(np.abs(h.matrix @ n - n @ h.matrix)), 1e-3)

    def test_unknown_mode_in_coupling_map(self):
        with self.assertRaises(ConfigError):
            build([ModeSpec("a", 4.0, -0.2, 3)], {("a", "b"): 0.01})

    def test_levels_out_of_range(self):
        with self.assertRaises(ParameterDomainError):
            ModeSpec("a", 4.0, -0.2, 7)
        with self.assertRaises(ParameterDomainError):
            ModeSpec("a", 4.0, -0.2, 1)

    def test_excitation_cutoff_basis(self):
        modes = [ModeSpec(name, 4.0, -0.2, 3) for name in "abcd"] + [ModeSpec(name, 5.5, -0.2, 2) for name in "efgh"]
        self.assertEqual(len(enumerate_basis(modes, 4)), 285)
        self.assertEqual(len(enumerate_basis(modes)), 3 ** 4 * 2 ** 4)
        self.assertTrue(all(sum(s) <= 4 for s in enumerate_basis(modes, 4)))

    def test_cutoff_basis_matches_enumeration(self):
        modes = [ModeSpec("a", 4.0, -0.2, 3), ModeSpec("b", 4.3, -0.2, 3), ModeSpec("c", 5.5, -0.2, 2)]
        h = build(modes, {("a", "c"): 0.1, ("b", "c"): 0.1}, max_excitations=2)
        self.assertEqual(set(h.basis), set(enumerate_basis(modes, 2)))
        self.assertEqual(len(h.basis), len(set(h.basis)))

    def test_cutoff_model_restricts_full_space(self):
        modes = [ModeSpec("a", 4.0, -0.2, 3), ModeSpec("b", 4.3, -0.25, 3), ModeSpec("c", 5.5, -0.3, 3)]
        couplings = {("a", "b"): 0.01, ("a", "c"): 0.1, ("b", "c"): 0.12}
        for form in CouplingForm:
            with self.subTest(form=form):
                dense = build(modes, couplings, form)
                restricted = build(modes, couplings, form, max_excitations=2)
                idx = [dense.state_index(s) for s in restricted.basis]
                np.testing.assert_allclose(restricted.matrix, dense.matrix[np.ix_(idx, idx)], atol=1e-12)

    def test_with_frequencies_matches_rebuild(self):
        h = reference_device(form=CouplingForm.FULL)
        retuned = h.with_frequencies({"q1": 4.6, "c": 5.7})
        params = REFERENCE_MODES.with_(omega_1=4.6, omega_c=5.7)
        rebuilt = build(three_mode_specs(params, 4), three_mode_couplings(params), CouplingForm.FULL)
        np.testing.assert_allclose(retuned.matrix, rebuilt.matrix, atol=1e-12)
        self.assertEqual(retuned.modes[0].omega, 4.6)

    def test_matrix_is_read_only(self):
        h = reference_device()
        with self.assertRaises(ValueError):
            h.matrix[0, 0] = 1.0


class TestDressedSpectrum(unittest.TestCase):

    def test_uncoupled_labels_are_bare(self):
        h = reference_device(g_12=0.0, g_1c=0.0, g_2c=0.0, omega_1=4.6)
        spectrum = dressed_spectrum(h)
        self.assertEqual(len(spectrum), h.dimension)
        for energy, label in spectrum:
            self.assertFalse(label.hybridized)
            self.assertAlmostEqual(label.overlap, 1.0, places=12)
            index = h.state_index(label.occupation)
            self.assertAlmostEqual(energy, h.matrix[index, index].real / TWO_PI, places=10)

    def test_eigenvalues_ascending(self):
        energies = dressed_spectrum(reference_device(form=CouplingForm.FULL)).energies
        self.assertTrue(np.all(np.diff(energies) >= 0))

    def test_work_point_bare_energies_degenerate(self):
        h = reference_device()
        e = {s: h.matrix[h.state_index(s), h.state_index(s)].real / TWO_PI for s in EQ3_STATES}
        self.assertAlmostEqual(e[(1, 1, 0)], e[(2, 0, 0)], places=12)
        self.assertAlmostEqual(e[(1, 1, 0)], e[(0, 2, 0)], places=12)

    def test_work_point_states_hybridize(self):
        spectrum = dressed_spectrum(reference_device(g_1c=0.0, g_2c=0.0))
        with self.assertRaises(LabelingError):
            spectrum.eigenindex((1, 1, 0))
        self.assertTrue(any(label.hybridized for label in spectrum.labels))

    def test_resonant_pair_splitting(self):
        g = 0.01
        h = build([ModeSpec("a", 5.0, -0.2, 2), ModeSpec("b", 5.0, -0.2, 2)], {("a", "b"): g}, "rwa")
        energies = dressed_spectrum(h).energies
        self.assertAlmostEqual(energies[2] - energies[1], 2 * g, places=12)

    def test_spectrum_invariant_under_coupler_gauge_flip(self):
        params = REFERENCE_MODES.with_(omega_c=5.5)
        couplings = three_mode_couplings(params)
        flipped = {k: (-v if "c" in k else v) for k, v in couplings.items()}
        specs = three_mode_specs(params, 4)
        for form in CouplingForm:
            e_plus = dressed_spectrum(build(specs, couplings, form)).energies
            e_minus = dressed_spectrum(build(specs, flipped, form)).energies
            np.testing.assert_allclose(e_plus, e_minus, rtol=1e-12, atol=1e-12)

    def test_global_flip_equals_direct_coupling_flip(self):
        # a_c -> -a_c undoes the coupler legs, leaving only g_12 flipped
        params = REFERENCE_MODES.with_(omega_c=5.5)
        couplings = three_mode_couplings(params)
        specs = three_mode_specs(params, 4)
        everything = {k: -v for k, v in couplings.items()}
        direct_only = {k: (-v if k == ("q1", "q2") else v) for k, v in couplings.items()}
        np.testing.assert_allclose(dressed_spectrum(build(specs, everything, "full")).energies,
                                   dressed_spectrum(build(specs, direct_only, "full")).energies,
                                   rtol=1e-12, atol=1e-12)

    def test_truncation_convergence(self):
        params = REFERENCE_MODES.with_(omega_1=4.6, omega_c=5.45)
        for form, tolerance in ((CouplingForm.RWA, 1e-9), (CouplingForm.FULL, 1e-5)):
            models = [build(three_mode_specs(params, levels), three_mode_couplings(params), form)
                      for levels in (4, 5)]
            e4, e5 = (np.sort(linalg.eigvalsh(h.matrix))[:6] / TWO_PI for h in models)
            self.assertLess(np.max(np.abs(e4 - e5)), tolerance)

    def test_round_trip_single_mode_transitions(self):
        h = build([ModeSpec("q", REFERENCE_MODES.omega_1, REFERENCE_MODES.alpha_1, 4)], {})
        energies = dressed_spectrum(h).energies
        self.assertAlmostEqual(energies[1] - energies[0], REFERENCE_MODES.omega_1, places=12)
        self.assertAlmostEqual(energies[2] - energies[1], REFERENCE_MODES.omega_1 + REFERENCE_MODES.alpha_1,
                               places=12)

    def test_phase_convention_on_labeled_vectors(self):
        h = reference_device(form=CouplingForm.FULL, omega_1=4.6)
        spectrum = dressed_spectrum(h)
        vector = spectrum.vector((0, 1, 0))
        component = vector[h.state_index((0, 1, 0))]
        self.assertAlmostEqual(component.imag, 0.0, places=12)
        self.assertGreater(component.real, 0.5)


class TestEffectiveCoupling(unittest.TestCase):

    def test_coupling_to_b_state_is_twice_g(self):
        self.assertAlmostEqual(effective_coupling(reference_device(), (1, 1, 0), B_STATE), 0.020, places=12)

    def test_single_path_coupling(self):
        self.assertAlmostEqual(effective_coupling(reference_device(), (1, 1, 0), (2, 0, 0)), math.sqrt(2) * 0.010,
                               places=12)

    def test_zero_coupling(self):
        self.assertEqual(effective_coupling(reference_device(g_12=0.0), (1, 1, 0), B_STATE), 0.0)

    def test_b_state_needs_both_components(self):
        h = reference_device(levels=2)
        with self.assertRaises(ParameterDomainError):
            effective_coupling(h, (1, 1, 0), B_STATE)

    def test_two_mode_b_state(self):
        h = build([ModeSpec("a", 4.5, -0.25, 3), ModeSpec("b", 4.25, 0.25, 3)], {("a", "b"): 0.01}, "rwa")
        self.assertAlmostEqual(effective_coupling(h, (1, 1), BSuperposition((2, 0), (0, 2))), 0.02, places=12)

    def test_dressed_coupling_without_coupler_is_twice_g(self):
        h = reference_device(g_1c=0.0, g_2c=0.0)
        self.assertAlmostEqual(dressed_coupling(h, (1, 1, 0), B_STATE), 0.020, places=10)
        self.assertAlmostEqual(dressed_coupling(h, (1, 1, 0), (2, 0, 0)), math.sqrt(2) * 0.010, places=10)

    def test_coupler_cancels_part_of_dressed_coupling(self):
        h = reference_device(form=CouplingForm.FULL)
        self.assertLess(abs(dressed_coupling(h, (1, 1, 0), B_STATE)), 0.015)

    def test_effective_hamiltonian_keeps_dressed_energies(self):
        h = reference_device(form=CouplingForm.FULL)
        block = effective_hamiltonian(h, EQ3_STATES[3:])
        np.testing.assert_allclose(block, block.conj().T, atol=1e-12)
        energies = linalg.eigvalsh(np.asarray(h.matrix)) / TWO_PI
        for value in linalg.eigvalsh(block):
            self.assertLess(np.min(np.abs(energies - value)), 1e-9)

    def test_mediated_exchange_changes_sign_across_window(self):
        low = mediated_exchange(4.6, 4.25, 5.0, 0.01, 0.1, 0.1)
        high = mediated_exchange(4.6, 4.25, 7.0, 0.01, 0.1, 0.1)
        self.assertLess(low, 0.0)
        self.assertGreater(high, 0.0)

    def test_mediated_exchange_resonant_coupler(self):
        with self.assertRaises(ParameterDomainError):
            mediated_exchange(4.6, 4.25, 4.6, 0.01, 0.1, 0.1)


if __name__ == '__main__':
    unittest.main()
