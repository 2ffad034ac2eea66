"""Semi-supervised point localization on synthetic crowd scenes.

Thin wrapper over the C++ core. The heavy lifting (scene synthesis, the
proposal model, Hungarian matching, pseudo-point consistency, training,
metrics) all lives in the compiled extension.
"""

import json as _json

from ._core import *  # noqa: F401,F403
from ._core import __version__, run_training as _run_training  # noqa: F401


def run_training(dataset, config, out_dir=None):
    """Run mean-teacher training; returns the run report as a dict."""
    return _json.loads(_run_training(dataset, config, out_dir))
