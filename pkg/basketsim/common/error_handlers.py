"""
Module: error_handlers
"""
from http import HTTPStatus

from flask import current_app as app  # Import Flask application
from werkzeug.exceptions import NotFound

from basketsim.models import DataValidationError, EstimationError
from basketsim.routes import api


######################################################################
# Error Handlers
######################################################################
@api.errorhandler(DataValidationError)
def request_validation_error(error):
    """Handles invalid trials, parameters and request bodies"""
    message = str(error)
    app.logger.error(message)
    return {
        "status_code": HTTPStatus.BAD_REQUEST,
        "error": "Bad Request",
        "message": message,
    }, HTTPStatus.BAD_REQUEST


@api.errorhandler(EstimationError)
def estimation_error(error):
    """Handles numerical failures of an estimator on otherwise valid data"""
    message = str(error)
    app.logger.error(message)
    return {
        "status_code": HTTPStatus.UNPROCESSABLE_ENTITY,
        "error": "Unprocessable Entity",
        "message": message,
    }, HTTPStatus.UNPROCESSABLE_ENTITY


@app.errorhandler(NotFound)
def not_found(error):
    """Handles resources not found with 404_NOT_FOUND"""
    message = str(error)
    app.logger.warning(message)
    return {
        "status_code": HTTPStatus.NOT_FOUND,
        "error": "URL Not Found",
        "message": message,
    }, HTTPStatus.NOT_FOUND
