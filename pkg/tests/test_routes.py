"""
Estimation Service API Test Suite
"""

# pylint: disable=duplicate-code
import logging
from http import HTTPStatus
from unittest import TestCase
from unittest.mock import patch

from wsgi import app
from basketsim.models import EstimationError, MethodId
from .factories import TrialFactory

BASE_URL = "/api"


######################################################################
#  T E S T   C A S E S
######################################################################
class TestEstimationService(TestCase):
    """REST API Server Tests"""

    @classmethod
    def setUpClass(cls):
        """Run once before all tests"""
        app.config["TESTING"] = True
        app.config["DEBUG"] = False
        app.logger.setLevel(logging.CRITICAL)
        logging.getLogger("basketsim").setLevel(logging.CRITICAL)
        app.app_context().push()

    def setUp(self):
        """Runs before each test"""
        self.client = app.test_client()

    def post_estimate(self, body):
        """POST a body to the estimates endpoint"""
        return self.client.post(f"{BASE_URL}/estimates", json=body)

    ######################################################################
    #  P L A C E   T E S T   C A S E S   H E R E
    ######################################################################

    def test_health(self):
        """It should be healthy"""
        response = self.client.get("/health")
        self.assertEqual(response.status_code, HTTPStatus.OK)
        data = response.get_json()
        self.assertEqual(data["status"], 200)
        self.assertEqual(data["message"], "Healthy")

    def test_no_session_secret(self):
        """It should not configure a session secret for a stateless service"""
        self.assertIsNone(app.config.get("SECRET_KEY"))

    def test_list_methods(self):
        """It should list every estimator"""
        response = self.client.get(f"{BASE_URL}/methods")
        self.assertEqual(response.status_code, HTTPStatus.OK)
        data = response.get_json()
        self.assertEqual([item["id"] for item in data], [method.value for method in MethodId])
        exact = {item["id"] for item in data if item["exact"]}
        self.assertEqual(exact, {"sample_proportion", "psioda_bma", "fujikawa", "liu_local_mem"})

    def test_list_scenarios(self):
        """It should list the 25 scenarios"""
        response = self.client.get(f"{BASE_URL}/scenarios")
        self.assertEqual(response.status_code, HTTPStatus.OK)
        data = response.get_json()
        self.assertEqual(len(data), 25)
        self.assertEqual(data[0]["id"], "1.A.1")
        self.assertTrue(data[0]["homogeneous"])

    def test_get_scenario(self):
        """It should read a single scenario"""
        response = self.client.get(f"{BASE_URL}/scenarios/2.B.2")
        self.assertEqual(response.status_code, HTTPStatus.OK)
        data = response.get_json()
        self.assertEqual(data["true_rates"], [0.1, 0.1, 0.1, 0.3, 0.3, 0.3])
        self.assertFalse(data["homogeneous"])

    def test_get_scenario_not_found(self):
        """It should not read a scenario that is not in the table"""
        response = self.client.get(f"{BASE_URL}/scenarios/9.Z.9")
        self.assertEqual(response.status_code, HTTPStatus.NOT_FOUND)
        self.assertIn("was not found", response.get_json()["message"])

    def test_unknown_url(self):
        """It should answer unknown URLs with a JSON 404"""
        response = self.client.get("/nowhere")
        self.assertEqual(response.status_code, HTTPStatus.NOT_FOUND)
        self.assertEqual(response.get_json()["status_code"], HTTPStatus.NOT_FOUND)

    def test_estimate(self):
        """It should estimate response rates with an exact method"""
        body = {"method": "liu_local_mem", "cohorts": [{"n": 1, "r": 1}, {"n": 1, "r": 0}]}
        response = self.post_estimate(body)
        self.assertEqual(response.status_code, HTTPStatus.OK)
        data = response.get_json()
        self.assertEqual(data["method"], "liu_local_mem")
        self.assertAlmostEqual(data["estimates"][0], 2.0 / 3.0)
        self.assertAlmostEqual(data["estimates"][1], 1.0 / 3.0)
        self.assertEqual(data["cohorts"], body["cohorts"])

    def test_estimate_factory_trial(self):
        """It should estimate a trial with every exact method"""
        trial = TrialFactory(k=4)
        for method in ("sample_proportion", "psioda_bma", "fujikawa"):
            response = self.post_estimate({"method": method, **trial.serialize(), "prior_mean": 0.3})
            self.assertEqual(response.status_code, HTTPStatus.OK)
            self.assertEqual(len(response.get_json()["estimates"]), 4)

    def test_estimate_is_seeded(self):
        """It should give the same sampled estimate for the same seed"""
        body = {"method": "berry_bhm", "cohorts": [{"n": 10, "r": 2}, {"n": 10, "r": 5}], "seed": 3}
        first = self.post_estimate(body).get_json()
        second = self.post_estimate(body).get_json()
        self.assertEqual(first["estimates"], second["estimates"])

    def test_estimate_bad_method(self):
        """It should not estimate with an unknown method"""
        response = self.post_estimate({"method": "bogus", "cohorts": [{"n": 1, "r": 1}, {"n": 1, "r": 0}]})
        self.assertEqual(response.status_code, HTTPStatus.BAD_REQUEST)
        self.assertIn("unknown method", response.get_json()["message"])

    def test_estimate_missing_method(self):
        """It should not estimate without a method"""
        response = self.post_estimate({"cohorts": [{"n": 1, "r": 1}, {"n": 1, "r": 0}]})
        self.assertEqual(response.status_code, HTTPStatus.BAD_REQUEST)

    def test_estimate_bad_counts(self):
        """It should not estimate counts where r exceeds n"""
        response = self.post_estimate({"method": "fujikawa", "cohorts": [{"n": 1, "r": 2}, {"n": 1, "r": 0}]})
        self.assertEqual(response.status_code, HTTPStatus.BAD_REQUEST)
        self.assertIn("r exceeds n", response.get_json()["message"])

    def test_estimate_single_cohort(self):
        """It should not estimate a trial with a single cohort"""
        response = self.post_estimate({"method": "psioda_bma", "cohorts": [{"n": 5, "r": 1}]})
        self.assertEqual(response.status_code, HTTPStatus.BAD_REQUEST)

    def test_estimate_bad_parameters(self):
        """It should not accept a bad seed or prior mean"""
        cohorts = [{"n": 5, "r": 1}, {"n": 5, "r": 2}]
        for extra in ({"seed": -1}, {"seed": "x"}, {"seed": 1.5}, {"prior_mean": 1.0}, {"prior_mean": True}):
            response = self.post_estimate({"method": "fujikawa", "cohorts": cohorts, **extra})
            self.assertEqual(response.status_code, HTTPStatus.BAD_REQUEST, extra)

    def test_estimate_not_an_object(self):
        """It should not accept a body that is not a JSON object"""
        response = self.post_estimate([1, 2, 3])
        self.assertEqual(response.status_code, HTTPStatus.BAD_REQUEST)

    @patch("basketsim.routes.estimate", side_effect=EstimationError("chain diverged"))
    def test_estimation_failure(self, estimate_mock):
        """It should report an estimator failure as unprocessable"""
        response = self.post_estimate({"method": "berry_bhm", "cohorts": [{"n": 5, "r": 1}, {"n": 5, "r": 2}]})
        self.assertEqual(response.status_code, HTTPStatus.UNPROCESSABLE_ENTITY)
        self.assertEqual(response.get_json()["message"], "chain diverged")
        estimate_mock.assert_called_once()
