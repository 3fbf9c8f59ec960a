import json
import os
import tempfile
import unittest
from pathlib import Path

import pandas as pd

from core.errors import ConfigError, OutputConflictError
from experiments.persistence import ResultWriter, read_csv, read_provenance, sidecar_path


class TestResultWriter(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out_dir = Path(self.tmp.name)
        self.frame = pd.DataFrame({'t_hold': [10.0, 12.5], 'fidelity': [0.9999123456789012, 0.25]})

    def tearDown(self):
        self.tmp.cleanup()

    def writer(self, config_hash="a" * 64, force=False, out_dir=None):
        return ResultWriter(out_dir or self.out_dir, config_hash, 0.01, code_version="0.1.0", force=force)

    def test_json_carries_provenance(self):
        path = self.writer().write_json("report.json", {'theta': 3.14})
        document = json.loads(path.read_text())
        self.assertEqual(document['provenance'], {'config_hash': "a" * 64, 'code_version': "0.1.0", 'dt': 0.01})
        self.assertEqual(document['theta'], 3.14)

    def test_non_finite_values_written_as_null(self):
        payload = {'half_dt_deviation': float('inf'), 'points': [{'cost': 1.5}, {'cost': float('nan')}]}
        with self.assertLogs('experiments.persistence', level='WARNING'):
            path = self.writer().write_json("report.json", payload)
        text = path.read_text()
        self.assertNotIn("Infinity", text)
        self.assertNotIn("NaN", text)

        def strict(constant):
            raise ValueError(constant)

        document = json.loads(text, parse_constant=strict)
        self.assertIsNone(document['half_dt_deviation'])
        self.assertIsNone(document['points'][1]['cost'])
        self.assertEqual(document['points'][0]['cost'], 1.5)
        self.assertEqual(document['non_finite'], ['half_dt_deviation', 'points[1].cost'])

    def test_same_config_gives_identical_bytes(self):
        other = self.out_dir / "second"
        first = self.writer().write_csv("sweep.csv", self.frame)
        second = self.writer(out_dir=other).write_csv("sweep.csv", self.frame)
        self.assertEqual(first.read_bytes(), second.read_bytes())
        first = self.writer().write_json("report.json", {'b': 1, 'a': [1.5, 2.5]})
        second = self.writer(out_dir=other).write_json("report.json", {'a': [1.5, 2.5], 'b': 1})
        self.assertEqual(first.read_bytes(), second.read_bytes())

    def test_sidecar_records_write_time(self):
        path = self.writer().write_json("report.json", {})
        meta = json.loads(sidecar_path(path).read_text())
        self.assertIn('written_at', meta)
        self.assertEqual(meta['config_hash'], "a" * 64)
        self.assertNotIn('written_at', path.read_text())

    def test_rewrite_from_same_config_allowed(self):
        self.writer().write_json("report.json", {'x': 1})
        self.writer().write_json("report.json", {'x': 2})
        self.assertEqual(json.loads((self.out_dir / "report.json").read_text())['x'], 2)

    def test_conflicting_config_refused(self):
        self.writer().write_json("report.json", {'x': 1})
        with self.assertRaises(OutputConflictError):
            self.writer(config_hash="b" * 64).write_json("report.json", {'x': 2})
        with self.assertRaises(ConfigError):
            self.writer(config_hash="b" * 64).check(["report.json", "other.csv"])
        self.assertEqual(json.loads((self.out_dir / "report.json").read_text())['x'], 1)

    def test_force_overwrites(self):
        self.writer().write_json("report.json", {'x': 1})
        self.writer(config_hash="b" * 64, force=True).write_json("report.json", {'x': 2})
        self.assertEqual(json.loads((self.out_dir / "report.json").read_text())['x'], 2)
        self.assertEqual(json.loads(sidecar_path(self.out_dir / "report.json").read_text())['config_hash'], "b" * 64)

    def test_file_without_sidecar_is_a_conflict(self):
        (self.out_dir / "report.json").write_text("{}")
        with self.assertRaises(OutputConflictError):
            self.writer().check(["report.json"])

    def test_csv_provenance_line_and_round_trip(self):
        path = self.writer().write_csv("sweep.csv", self.frame)
        first_line = path.read_text().splitlines()[0]
        self.assertTrue(first_line.startswith("# config_hash="))
        self.assertEqual(read_provenance(path), {'config_hash': "a" * 64, 'code_version': "0.1.0", 'dt': "0.01"})
        frame = read_csv(path)
        self.assertEqual(list(frame.columns), ['t_hold', 'fidelity'])
        self.assertAlmostEqual(frame['fidelity'][0], 0.9999123456789012, places=11)

    def test_output_dir_created_on_demand(self):
        nested = self.out_dir / "runs" / "a"
        path = self.writer(out_dir=nested).write_json("r.json", {})
        self.assertTrue(os.path.exists(path))


if __name__ == '__main__':
    unittest.main()
