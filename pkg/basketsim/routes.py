"""
Basket Trial Estimation Service

This service implements a REST API that runs the response-rate estimators
on submitted trial data and lists the simulation scenarios

Paths:
------
GET /health - Performs a health check to ensure the server is running properly
GET /api/methods - Returns the estimators and whether they are exact
GET /api/scenarios - Returns all simulation scenarios
GET /api/scenarios/{scenario_id} - Returns the scenario with the given id
POST /api/estimates - Runs one estimator on the posted cohort counts
"""
# pylint: disable=cyclic-import
from http import HTTPStatus

from flask import abort, jsonify
from flask import current_app as app  # Import Flask application
from flask_restx import Api, Resource, fields

from basketsim import config
from basketsim.estimators import MethodConfigs, apply_prior_mean, estimate
from basketsim.harness import find_scenario, scenario_table
from basketsim.kernel import RngStream
from basketsim.mcmc import McmcConfig
from basketsim.models import DataValidationError, MethodId, TrialData

######################################################################
# Configure Swagger before initializing it
######################################################################
api = Api(
    app,
    version="1.0.0",
    title="Basket Trial Estimation Service",
    description="Response-rate estimators for basket trials with binary outcomes.",
    default="estimates",
    default_label="Estimation operations",
    doc="/apidocs",
    prefix="/api",
)

method_model = api.model(
    "Method",
    {
        "id": fields.String(description="Serialized method name", enum=[method.value for method in MethodId]),
        "exact": fields.Boolean(description="True when the estimator needs no Monte Carlo"),
    },
)

scenario_model = api.model(
    "Scenario",
    {
        "id": fields.String(readOnly=True, description="Scenario label, e.g. 2.B.1"),
        "true_rates": fields.List(fields.Float, description="True response rate per cohort"),
        "homogeneous": fields.Boolean(description="True when every cohort shares one rate"),
    },
)

cohort_model = api.model(
    "Cohort",
    {
        "n": fields.Integer(required=True, description="Patients in the cohort"),
        "r": fields.Integer(required=True, description="Responders in the cohort"),
    },
)

estimate_request_model = api.model(
    "EstimateRequest",
    {
        "method": fields.String(required=True, description="Serialized method name"),
        "cohorts": fields.List(fields.Nested(cohort_model), required=True, description="At least two cohorts"),
        "seed": fields.Integer(required=False, description="Seed of the MCMC stream"),
        "prior_mean": fields.Float(required=False, description="Prior mean in (0,1), default 0.5"),
    },
)

estimate_model = api.model(
    "Estimate",
    {
        "method": fields.String(description="Serialized method name"),
        "estimates": fields.List(fields.Float, description="Estimated response rate per cohort"),
        "cohorts": fields.List(fields.Nested(cohort_model)),
    },
)


######################################################################
# HEALTH CHECK
######################################################################
@app.route("/health")
def health_check():
    """Let them know our heart is still beating"""
    return jsonify(status=200, message="Healthy"), HTTPStatus.OK


######################################################################
#  PATH: /methods
######################################################################
@api.route("/methods")
class MethodCollection(Resource):
    """Lists the estimators"""

    @api.doc("list_methods")
    @api.marshal_list_with(method_model)
    def get(self):
        """Returns every estimator"""
        app.logger.info("Request to list methods")
        return [{"id": method.value, "exact": method.exact} for method in MethodId], HTTPStatus.OK


######################################################################
#  PATH: /scenarios
######################################################################
@api.route("/scenarios")
class ScenarioCollection(Resource):
    """Lists the simulation scenarios"""

    @api.doc("list_scenarios")
    @api.marshal_list_with(scenario_model)
    def get(self):
        """Returns all of the scenarios in table order"""
        app.logger.info("Request to list scenarios")
        return [scenario.serialize() for scenario in scenario_table()], HTTPStatus.OK


######################################################################
#  PATH: /scenarios/{scenario_id}
######################################################################
@api.route("/scenarios/<scenario_id>")
@api.param("scenario_id", "The scenario identifier")
class ScenarioResource(Resource):
    """Retrieves a single scenario"""

    @api.doc("get_scenarios")
    @api.response(404, "Scenario not found")
    @api.marshal_with(scenario_model)
    def get(self, scenario_id):
        """
        Retrieve a single Scenario

        This endpoint will return a Scenario based on its id
        """
        app.logger.info("Request to Retrieve a scenario with id [%s]", scenario_id)
        try:
            scenario = find_scenario(scenario_id)
        except DataValidationError:
            abort(HTTPStatus.NOT_FOUND, f"Scenario with id '{scenario_id}' was not found.")
        return scenario.serialize(), HTTPStatus.OK


######################################################################
#  PATH: /estimates
######################################################################
def _number(payload: dict, key: str, kind: type, default):
    value = payload.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)) or (kind is int and not isinstance(value, int)):
        raise DataValidationError(f"Invalid request: {key} must be a {kind.__name__}")
    return kind(value)


@api.route("/estimates")
class EstimateCollection(Resource):
    """Runs the estimators on posted data"""

    @api.doc("create_estimates")
    @api.response(400, "The posted data was not valid")
    @api.response(422, "The estimator failed on the posted data")
    @api.expect(estimate_request_model)
    def post(self):
        """
        Estimates response rates

        This endpoint runs one estimator on the cohort counts in the body
        """
        app.logger.info("Request to estimate response rates")
        payload = api.payload
        app.logger.debug("Payload = %s", payload)
        if not isinstance(payload, dict):
            raise DataValidationError("Invalid request: body must be a JSON object")
        if "method" not in payload or not isinstance(payload["method"], str):
            raise DataValidationError("Invalid request: missing method")
        method = MethodId.parse(payload["method"])
        trial = TrialData.deserialize(payload)
        seed = _number(payload, "seed", int, config.DEFAULT_SEED)
        prior_mean = _number(payload, "prior_mean", float, 0.5)
        if seed < 0:
            raise DataValidationError("Invalid request: seed must be nonnegative")

        configs = apply_prior_mean(MethodConfigs(), prior_mean)
        estimates = estimate(method, trial, configs, McmcConfig(), RngStream(seed))
        app.logger.info("Estimated %s on %d cohorts", method.value, trial.k)
        result = {
            "method": method.value,
            "estimates": estimates.serialize(),
            "cohorts": trial.serialize()["cohorts"],
        }
        return result, HTTPStatus.OK
