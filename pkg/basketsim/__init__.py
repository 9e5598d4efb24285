"""
Package: basketsim
Response-rate estimators for basket trials, a Monte-Carlo simulation
harness and a small REST service over the estimators.
This module creates and configures the Flask app and sets up the logging
"""
from flask import Flask

__version__ = "0.1.0"

# pylint: disable=wrong-import-position
from basketsim import config  # noqa: E402
from basketsim.common import log_handlers  # noqa: E402


############################################################
# Initialize the Flask instance
############################################################
def create_app():
    """Initialize the core application."""
    # Create Flask application
    app = Flask(__name__)
    app.config.from_object(config)

    with app.app_context():
        # Dependencies require we import the routes AFTER the Flask app is created
        # pylint: disable=wrong-import-position, wrong-import-order, unused-import, import-outside-toplevel
        from basketsim import routes  # noqa: F401 E402
        from basketsim.common import error_handlers  # noqa: F401, E402
        from basketsim.common.cli_commands import simulate

        app.cli.add_command(simulate)

        # Set up logging for production
        log_handlers.init_app_logging(app, "gunicorn.error")

        app.logger.info(70 * "*")
        app.logger.info("  E S T I M A T I O N   S E R V I C E   R U N N I N G  ".center(70, "*"))
        app.logger.info(70 * "*")

        app.logger.info("Service initialized!")

        return app
