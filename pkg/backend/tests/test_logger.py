"""
Test logging configuration.
"""

import logging
import unittest

from app.constants import ROOT_LOGGER_NAME
from app.utils import logger as logger_module
from app.utils.logger import set_quiet, setup_logger


class TestLogger(unittest.TestCase):
    """Test the project logger and its quiet switch."""

    def setUp(self):
        """Save the project logger state."""
        self.root = logging.getLogger(ROOT_LOGGER_NAME)
        self.handlers = list(self.root.handlers)
        self.level = self.root.level
        self.configured = logger_module._configured_level

    def tearDown(self):
        """Restore the project logger state."""
        for handler in list(self.root.handlers):
            if handler not in self.handlers:
                self.root.removeHandler(handler)
        for handler in self.handlers:
            if handler not in self.root.handlers:
                self.root.addHandler(handler)
        self.root.setLevel(self.level)
        logger_module._configured_level = self.configured

    def test_child_loggers(self):
        """Test named loggers nest under the project logger."""
        child = setup_logger("simulator")
        self.assertEqual(child.name, f"{ROOT_LOGGER_NAME}.simulator")
        self.assertIs(setup_logger(), self.root)

    def test_quiet_restores_configured_level(self):
        """Test leaving quiet mode returns to the configured level, not INFO."""
        for handler in list(self.root.handlers):
            self.root.removeHandler(handler)
        logger_module._configure_root("DEBUG", False)
        self.assertEqual(self.root.level, logging.DEBUG)

        set_quiet(True)
        self.assertEqual(self.root.level, logging.WARNING)
        set_quiet(False)
        self.assertEqual(self.root.level, logging.DEBUG)

    def test_quiet_never_lowers_the_threshold(self):
        """Test quiet mode keeps a configured level above WARNING."""
        for handler in list(self.root.handlers):
            self.root.removeHandler(handler)
        logger_module._configure_root("ERROR", False)

        set_quiet(True)
        self.assertEqual(self.root.level, logging.ERROR)
        set_quiet(False)
        self.assertEqual(self.root.level, logging.ERROR)


if __name__ == "__main__":
    unittest.main()
