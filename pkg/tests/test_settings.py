import json
import os
import tempfile
import unittest

from pydantic import ValidationError

from core.errors import ConfigError
from experiments.settings import ExperimentConfig, config_hash, load_config, validate_config
from simulation.model import CouplingForm
from simulation.quantize import REFERENCE_MODES


class TestExperimentConfig(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, "config.json")

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, text):
        with open(self.path, "w") as f:
            f.write(text)
        return self.path

    def test_defaults(self):
        cfg = ExperimentConfig()
        self.assertEqual(cfg.device.modes.to_params(), REFERENCE_MODES)
        self.assertEqual(cfg.device.levels, 4)
        self.assertEqual(cfg.device.form, CouplingForm.FULL)
        self.assertEqual(cfg.pulse.sigma, 2.0)
        self.assertEqual(cfg.pulse.target_cost, 1e-7)
        self.assertEqual(cfg.pulse.tol_x, (1e-4, 1e-6, 1e-6))
        self.assertEqual(cfg.run.dt, 0.01)
        self.assertEqual(cfg.scenario.name, "cz-demo")
        self.assertEqual(cfg.lattice.max_excitations, 4)

    def test_device_needs_exactly_one_source(self):
        with self.assertRaises(ConfigError):
            validate_config({'device': {}})
        circuit = {
            'ec_1': 0.22, 'ec_2': 0.228, 'ec_c': 0.2, 'ej_sum_1': 14.0, 'ej_sum_c': 24.0,
            'd_1': 0.0, 'd_c': 0.0, 'ej_2': 14.9, 'el_2': 24.5,
            'c_1': 88.0, 'c_2': 85.0, 'c_c': 96.0,
        }
        with self.assertRaises(ConfigError):
            validate_config({'device': {'modes': {}, 'circuit': circuit}})
        cfg = validate_config({'device': {'circuit': circuit}})
        self.assertIsNone(cfg.device.modes)
        self.assertEqual(cfg.device.circuit.to_params().flux_2, 0.5)

    def test_single_well_violation_rejected(self):
        circuit = {
            'ec_1': 0.22, 'ec_2': 0.228, 'ec_c': 0.2, 'ej_sum_1': 14.0, 'ej_sum_c': 24.0,
            'd_1': 0.0, 'd_c': 0.0, 'ej_2': 25.0, 'el_2': 24.5,
            'c_1': 88.0, 'c_2': 85.0, 'c_c': 96.0,
        }
        with self.assertRaises(ConfigError):
            validate_config({'device': {'circuit': circuit}})

    def test_unknown_keys_rejected(self):
        with self.assertRaises(ConfigError):
            validate_config({'run': {'dt': 0.01, 'step': 0.02}})
        with self.assertRaises(ConfigError):
            validate_config({'extras': True})

    def test_bad_values_rejected(self):
        with self.assertRaises(ConfigError):
            validate_config({'run': {'dt': -0.01}})
        with self.assertRaises(ConfigError):
            validate_config({'scenario': {'name': 'teleport'}})
        with self.assertRaises(ConfigError):
            validate_config({'pulse': {'hold_bounds': [40.0, 5.0]}})
        with self.assertRaises(ConfigError):
            validate_config({'device': {'modes': {}, 'levels': 9}})

    def test_load_config_from_file(self):
        cfg = load_config(self.write(json.dumps({'run': {'dt': 0.005}, 'scenario': {'name': 'rabi'}})))
        self.assertEqual(cfg.run.dt, 0.005)
        self.assertEqual(cfg.scenario.name, 'rabi')

    def test_load_config_bad_json(self):
        with self.assertRaises(ConfigError):
            load_config(self.write("{'run': "))

    def test_load_config_missing_file(self):
        with self.assertRaises(ConfigError):
            load_config(os.path.join(self.tmp.name, "absent.json"))

    def test_hash_is_stable_and_tracks_content(self):
        first, second = ExperimentConfig(), ExperimentConfig()
        self.assertEqual(config_hash(first), config_hash(second))
        self.assertEqual(len(config_hash(first)), 64)
        self.assertNotEqual(config_hash(first), config_hash(first.with_overrides(run__dt=0.005)))

    def test_hash_ignores_key_order(self):
        a = validate_config({'run': {'dt': 0.02, 'threads': 2}})
        b = validate_config(json.dumps({'run': {'threads': 2, 'dt': 0.02}}))
        self.assertEqual(config_hash(a), config_hash(b))

    def test_with_overrides_revalidates(self):
        cfg = ExperimentConfig().with_overrides(scenario__name="spectrum", run__dt=0.02)
        self.assertEqual((cfg.scenario.name, cfg.run.dt), ("spectrum", 0.02))
        with self.assertRaises(ConfigError):
            ExperimentConfig().with_overrides(run__dt=0.0)
        with self.assertRaises(ConfigError):
            ExperimentConfig().with_overrides(device__circuit__ec_1=0.2)

    def test_sections_are_frozen(self):
        cfg = ExperimentConfig()
        with self.assertRaises(ValidationError):
            cfg.run.dt = 0.5


if __name__ == '__main__':
    unittest.main()
