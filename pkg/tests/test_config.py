"""Tests for settings resolution."""

import os
import shutil
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

from src import config


class TestConfig(unittest.TestCase):
    """Test config file loading and precedence."""

    def setUp(self):
        """Set up a scratch config directory."""
        self.temp_dir = tempfile.mkdtemp()
        self.config_dir = Path(self.temp_dir)

    def tearDown(self):
        """Clean up test environment."""
        shutil.rmtree(self.temp_dir)

    def write(self, name, text):
        path = self.config_dir / name
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        return str(path)

    def test_builtin_defaults(self):
        """No file and no flags gives the built-in settings."""
        settings = config.load_settings("diamond")
        self.assertEqual(settings, config.DEFAULT_SETTINGS)
        self.assertEqual(settings["intervals"], 4096)

    def test_precedence(self):
        """Flags beat the model section, which beats [defaults]."""
        path = self.write("hc.ini", "[defaults]\nk = 3\ntol = 1e-8\nalpha = 0.2\n\n"
                                    "[diamond]\nk = 4\nalpha = 0.85\nbeta = 0.55\n")
        settings = config.load_settings("diamond", path, {"k": 5, "beta": None})
        self.assertEqual(settings["k"], 5)
        self.assertEqual(settings["alpha"], 0.85)
        self.assertEqual(settings["beta"], 0.55)
        self.assertEqual(settings["tol"], 1e-8)

        stick = config.load_settings("stick", path)
        self.assertEqual(stick["k"], 3)
        self.assertEqual(stick["alpha"], 0.2)

    def test_invalid_value_warns(self):
        """Out-of-range values are logged and skipped."""
        path = self.write("bad.ini", "[defaults]\nk = 0\nalpha = 1.5\nmystery = 1\n")
        with self.assertLogs("src.config", level="WARNING") as logs:
            settings = config.load_settings(None, path)
        self.assertEqual(settings["k"], 2)
        self.assertNotIn("alpha", settings)
        self.assertEqual(len(logs.output), 3)

    def test_missing_file(self):
        """A missing config file is ignored with a warning."""
        with self.assertLogs("src.config", level="WARNING"):
            self.assertIsNone(config.load_config_file(str(self.config_dir / "missing.ini")))
            settings = config.load_settings("gun", str(self.config_dir / "missing.ini"))
        self.assertEqual(settings, config.DEFAULT_SETTINGS)

    def test_unparsable_file(self):
        """A file without section headers is rejected."""
        path = self.write("broken.ini", "k = 2\n")
        with self.assertLogs("src.config", level="WARNING"):
            self.assertIsNone(config.load_config_file(path))

    def test_thread_count(self):
        """HC_THREADS sets the worker count; bad values fall back to 1."""
        with patch.dict(os.environ, {config.THREADS_ENV: "4"}):
            self.assertEqual(config.thread_count(), 4)
        for raw in ("zero", "0", "-2"):
            with self.subTest(raw=raw), patch.dict(os.environ, {config.THREADS_ENV: raw}):
                with self.assertLogs("src.config", level="WARNING"):
                    self.assertEqual(config.thread_count(), 1)
        with patch.dict(os.environ, {}, clear=True):
            self.assertEqual(config.thread_count(), 1)

    @patch("src.config.get_config_dir")
    def test_write_example_config(self, mock_get_dir):
        """The example config is written and loads cleanly."""
        mock_get_dir.return_value = self.config_dir / "config"
        path = config.write_example_config()
        self.assertEqual(path, self.config_dir / "config" / "hardcore_example.ini")
        settings = config.load_settings("key", str(path))
        self.assertEqual(settings["c"], 0.95)
        self.assertEqual(settings["epsilon"], 1e-8)

    def test_shipped_example_matches(self):
        """config/hardcore_example.ini is the generated example."""
        shipped = config.get_config_dir() / "hardcore_example.ini"
        with open(shipped, "r", encoding="utf-8") as f:
            self.assertEqual(f.read(), config.EXAMPLE_CONFIG)


if __name__ == "__main__":
    unittest.main()
