"""
Tests for oml_stream.utils.config_utils module.
"""

import os

from pyfakefs.fake_filesystem_unittest import TestCase

from oml_stream.config import OmlStreamConfig, build_config
from oml_stream.utils.config_utils import (
    create_default_config_file,
    render_config,
    validate_config_file,
)


class TestRenderConfig(TestCase):
    """Test render_config function."""

    def test_render_default(self):
        text = render_config(OmlStreamConfig())

        self.assertIn("k=10\n", text)
        self.assertIn("M=100000.0\n", text)
        self.assertIn("d=auto\n", text)
        self.assertIn("update_rule=exact\n", text)
        self.assertIn("shuffle=true\n", text)
        self.assertIn("# Neighbors used for prediction\n", text)


class TestCreateDefaultConfigFile(TestCase):
    """Test create_default_config_file function."""

    def setUp(self):
        """Set up test environment."""
        self.setUpPyfakefs()

    def test_create_default_config_file_creates_directory(self):
        """Test creating config file creates parent directories."""
        config_path = "/test/nested/dir/oml_stream.conf"

        create_default_config_file(config_path)

        self.assertTrue(os.path.exists("/test/nested/dir"))
        self.assertTrue(os.path.exists(config_path))

    def test_create_default_config_file_no_directory(self):
        """Test creating config file in current directory."""
        create_default_config_file("oml_stream.conf")

        self.assertTrue(os.path.exists("oml_stream.conf"))

    def test_default_file_loads_back(self):
        """The written defaults resolve to the default configuration."""
        config_path = "/test/oml_stream.conf"
        create_default_config_file(config_path)

        self.assertEqual(build_config(config_path), OmlStreamConfig())


class TestValidateConfigFile(TestCase):
    """Test validate_config_file function."""

    def setUp(self):
        """Set up test environment."""
        self.setUpPyfakefs()

    def test_validate_config_file_not_found(self):
        """Test validation when config file doesn't exist."""
        result = validate_config_file("/nonexistent/oml_stream.conf")

        self.assertFalse(result["valid"])
        self.assertEqual(len(result["errors"]), 1)
        self.assertIn("not found", result["errors"][0])

    def test_validate_config_file_valid(self):
        """Test validating a complete file."""
        self.fs.create_file(
            "/test/run.conf", contents="k=5\nm=0.001\nM=1000\nseed_fraction=0.3\n"
        )

        result = validate_config_file("/test/run.conf")

        self.assertTrue(result["valid"])
        self.assertEqual(result["errors"], [])
        self.assertEqual(result["warnings"], [])
        self.assertEqual(result["config"]["k"], 5)
        self.assertEqual(result["config"]["M"], 1000.0)

    def test_validate_config_file_missing_fields(self):
        """Test validation warns about missing important fields."""
        self.fs.create_file("/test/run.conf", contents="k=5\n")

        result = validate_config_file("/test/run.conf")

        self.assertTrue(result["valid"])
        self.assertEqual(len(result["warnings"]), 1)
        self.assertIn("'seed_fraction'", result["warnings"][0])
        self.assertNotIn("'k'", result["warnings"][0])

    def test_validate_config_file_unknown_key(self):
        """Test validation rejects keys the configuration does not define."""
        self.fs.create_file("/test/run.conf", contents="k=5\nport=8000\n")

        result = validate_config_file("/test/run.conf")

        self.assertFalse(result["valid"])
        self.assertIn("port", result["errors"][0])

    def test_validate_config_file_bad_value(self):
        """Test validation reports values that fail the hyperparameter checks."""
        self.fs.create_file("/test/run.conf", contents="m=10\nM=1\n")

        result = validate_config_file("/test/run.conf")

        self.assertFalse(result["valid"])
        self.assertIsNone(result["config"])
