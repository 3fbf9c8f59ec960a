import math
import unittest

import numpy as np

from core.errors import LabelingError, ParameterDomainError, PhaseUndefinedError
from simulation.control import FlattopPulse, PulseSchedule
from simulation.dynamics import FrameConvention, GateSystem, Propagator, evolve_states
from simulation.gateval import (
    CZ, THREE_MODE_COMPUTATIONAL, CostFunction, avg_gate_fidelity, block_from_states, computational_labels,
    conditional_phase, cost_terms, extract_computational, gate_cost, leakage_and_swap,
    remove_single_qubit_phases, score, wrap_phase,
)
from simulation.model import LATTICE_ORDER, build, three_mode_couplings, three_mode_specs
from simulation.quantize import REFERENCE_MODES


def phased(diagonal_phases):
    return np.diag(np.exp(1j * np.asarray(diagonal_phases, dtype=float)))


def static_system(t_hold=5.0, dt=0.01, omega_1=4.6, omega_c=5.45, form="full", **changes):
    """Pulses whose on and off frequencies coincide, so H stays at the idle point."""
    params = REFERENCE_MODES.with_(omega_1=omega_1, omega_c=omega_c, **changes)
    model = build(three_mode_specs(params, 3), three_mode_couplings(params), form)
    pulses = {
        "q1": FlattopPulse.from_hold(omega_1, omega_1, 1.0, t_hold),
        "c": FlattopPulse.from_hold(omega_c, omega_c, 1.0, t_hold),
    }
    return GateSystem(model, PulseSchedule.flattop(pulses, dt))


class TestFidelity(unittest.TestCase):

    def test_ideal_gate_has_unit_fidelity(self):
        self.assertAlmostEqual(avg_gate_fidelity(CZ, CZ), 1.0, places=14)

    def test_identity_against_cz(self):
        self.assertAlmostEqual(avg_gate_fidelity(np.eye(4), CZ), 0.4, places=14)

    def test_zero_process(self):
        self.assertEqual(avg_gate_fidelity(np.zeros((4, 4)), CZ), 0.0)

    def test_global_phase_invariance(self):
        rng = np.random.default_rng(5)
        u = CZ @ phased(rng.uniform(-0.1, 0.1, 4))
        for phi in rng.uniform(-math.pi, math.pi, 10):
            self.assertAlmostEqual(avg_gate_fidelity(np.exp(1j * phi) * u, CZ), avg_gate_fidelity(u, CZ), places=12)


class TestPhases(unittest.TestCase):

    def test_single_qubit_phases_removed(self):
        phi_a, phi_b = 0.7, -1.9
        m = phased([0.0, phi_b, phi_a, phi_a + phi_b + math.pi])
        corrected, (theta_1, theta_2) = remove_single_qubit_phases(m)
        np.testing.assert_allclose(corrected, CZ, atol=1e-12)
        self.assertAlmostEqual(theta_1, -phi_a, places=12)
        self.assertAlmostEqual(theta_2, -phi_b, places=12)

    def test_identity_needs_no_correction(self):
        corrected, angles = remove_single_qubit_phases(np.eye(4))
        np.testing.assert_array_equal(corrected, np.eye(4))
        self.assertEqual(angles, (0.0, 0.0))

    def test_random_phase_perturbations_recover_cz(self):
        rng = np.random.default_rng(17)
        for _ in range(25):
            glob, a, b = rng.uniform(-math.pi, math.pi, 3)
            m = np.exp(1j * glob) * phased([0.0, b, a, a + b]) @ CZ
            corrected, _ = remove_single_qubit_phases(m)
            np.testing.assert_allclose(corrected, CZ, atol=1e-12)
            self.assertAlmostEqual(avg_gate_fidelity(corrected, CZ), 1.0, places=12)

    def test_vanishing_diagonal_has_no_phase(self):
        m = np.eye(4, dtype=complex)
        m[1, 1] = 1e-8
        with self.assertRaises(PhaseUndefinedError):
            remove_single_qubit_phases(m)
        with self.assertRaises(PhaseUndefinedError):
            conditional_phase(m)

    def test_conditional_phase_examples(self):
        self.assertAlmostEqual(conditional_phase(CZ), math.pi, places=14)
        self.assertEqual(conditional_phase(np.eye(4)), 0.0)
        beta, gamma, phi = 0.4, -2.2, 1.234
        self.assertAlmostEqual(conditional_phase(phased([0.0, beta, gamma, beta + gamma + phi])), phi, places=12)

    def test_conditional_phase_from_four_amplitudes(self):
        amplitudes = np.exp(1j * np.array([0.3, 0.1, -0.5, 2.0]))
        self.assertAlmostEqual(conditional_phase(amplitudes), wrap_phase(2.0 - 0.1 + 0.5 + 0.3), places=12)

    def test_conditional_phase_invariant_under_z_rotations(self):
        rng = np.random.default_rng(23)
        base = phased([0.1, 0.2, 0.3, 2.9])
        reference = conditional_phase(base)
        for _ in range(20):
            a, b, g = rng.uniform(-math.pi, math.pi, 3)
            z = np.exp(1j * g) * phased([0.0, b, a, a + b])
            self.assertAlmostEqual(conditional_phase(z @ base), reference, places=12)

    def test_wrap_phase_interval(self):
        self.assertEqual(wrap_phase(math.pi), math.pi)
        self.assertAlmostEqual(wrap_phase(-math.pi), math.pi, places=15)
        self.assertAlmostEqual(wrap_phase(3 * math.pi / 2), -math.pi / 2, places=15)


class TestCost(unittest.TestCase):

    def test_cz_costs_nothing(self):
        self.assertAlmostEqual(gate_cost(CZ), 0.0, places=20)

    def test_identity_costs_pi_squared(self):
        c_phase, c_leak = cost_terms(np.eye(4))
        self.assertAlmostEqual(c_phase, math.pi ** 2, places=12)
        self.assertEqual(c_leak, 0.0)

    def test_negative_pi_is_also_optimal(self):
        m = np.array(CZ)
        m[3, 3] = np.exp(-1j * (math.pi - 1e-9))
        self.assertLess(gate_cost(m), 1e-15)

    def test_leakage_is_mean_column_deficit(self):
        m = np.array(CZ)
        m[:, 3] *= math.sqrt(0.8)
        _, c_leak = cost_terms(m)
        self.assertAlmostEqual(c_leak, 0.05, places=14)

    def test_leakage_and_swap_channels(self):
        m = np.array(CZ)
        m[3, 3] = 0.0
        m[1, 1] = math.sqrt(0.9)
        eps_leak, eps_swap = leakage_and_swap(m)
        self.assertEqual(eps_leak, 1.0)
        self.assertAlmostEqual(eps_swap, 0.1, places=14)


class TestExtraction(unittest.TestCase):

    def test_identity_propagator_gives_identity_block(self):
        system = static_system()
        u = Propagator(np.eye(system.model.dimension, dtype=complex), system.t_gate, system.dt, 0.0)
        block = extract_computational(u, system, frame=FrameConvention.lab())
        np.testing.assert_allclose(block, np.eye(4), atol=1e-12)

    def test_block_matches_evolved_states(self):
        system = static_system(t_hold=3.0)
        propagator = system.propagate()
        from_u = extract_computational(propagator, system)
        from_states = block_from_states(evolve_states(system, THREE_MODE_COMPUTATIONAL), THREE_MODE_COMPUTATIONAL)
        np.testing.assert_allclose(from_u, from_states, atol=1e-10)

    def test_zero_amplitude_schedule_report(self):
        report = score(static_system())
        self.assertLess(report.eps_leak, 1e-9)
        self.assertLess(report.eps_swap, 1e-9)
        self.assertAlmostEqual(report.theta, 0.0, places=6)
        self.assertAlmostEqual(report.fidelity, 0.4, places=6)
        self.assertAlmostEqual(report.cost, math.pi ** 2, places=5)
        self.assertAlmostEqual(report.t_hold, 5.0, places=12)
        self.assertEqual(report.cost, report.c_phase + report.c_leak)
        self.assertEqual(report.gate_error, report.infidelity)

    def test_report_serializes(self):
        data = score(static_system()).to_dict()
        self.assertEqual(len(data['u_comp']['real']), 4)
        self.assertIn('unitarity_defect', data)

    def test_lattice_labels(self):
        labels = computational_labels(LATTICE_ORDER, ("Q1", "Q2"), background={"S1": 1})
        self.assertEqual(labels[3], (1, 1, 1, 0, 0, 0, 0, 0))
        self.assertEqual(labels[1], (0, 1, 1, 0, 0, 0, 0, 0))
        with self.assertRaises(LabelingError):
            computational_labels(("q1", "c"))


class TestCostFunction(unittest.TestCase):

    def test_failures_become_infinite_cost(self):
        def factory(p):
            raise ParameterDomainError("outside the decoupling window")

        f = CostFunction(factory)
        with self.assertLogs('simulation.gateval', level='WARNING'):
            self.assertEqual(f([1.0, 2.0, 3.0]), math.inf)
        self.assertEqual((f.evaluations, f.failures), (1, 1))

    def test_hybridized_idle_point_is_infinite(self):
        # q1 parked on the work point: |11> has no unambiguous dressed partner
        f = CostFunction(lambda p: static_system(omega_1=4.5, form="rwa", g_1c=0.0, g_2c=0.0))
        with self.assertLogs('simulation.gateval', level='WARNING'):
            self.assertEqual(f([0.0]), math.inf)

    def test_successful_evaluation_returns_cost(self):
        f = CostFunction(lambda p: static_system(t_hold=p[0]))
        self.assertAlmostEqual(f([5.0]), math.pi ** 2, places=5)
        self.assertEqual(f.failures, 0)


if __name__ == '__main__':
    unittest.main()
