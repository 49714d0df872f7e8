"""LTI system identification in Brunovsky canonical form."""

import json

from ._sysid import *  # noqa: F401,F403
from ._sysid import run_experiment_json


def run_experiment(config):
    """Run a seeded experiment from a config dict and return the summary dict."""
    return json.loads(run_experiment_json(json.dumps(config)))
