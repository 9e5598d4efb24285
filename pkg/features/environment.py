"""
Environment for Behave Testing
"""

import logging
import shutil
import tempfile
from os import getenv

from click.testing import CliRunner

LOGGING_LEVEL = getenv("LOGGING_LEVEL", "WARNING")


def before_all(context):
    """Executed once before all tests"""
    context.runner = CliRunner()
    logging.getLogger("basketsim").setLevel(LOGGING_LEVEL)
    context.config.setup_logging()


def before_scenario(context, scenario):  # pylint: disable=unused-argument
    """Gives every scenario its own output directory"""
    context.out_dir = tempfile.mkdtemp(prefix="basketsim-")
    context.result = None


def after_scenario(context, scenario):  # pylint: disable=unused-argument
    """Removes the scenario's output directory"""
    shutil.rmtree(context.out_dir, ignore_errors=True)
