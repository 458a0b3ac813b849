# Copyright 2026 The spr-annotate Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Self-paced reading annotation: experiment loading, sessions, logs and agreement statistics."""

import json

from ._core import (
    Error,
    Experiment,
    Session,
    fleiss_kappa,
    fnv1a64,
    mode_window_coverage,
    normalize_line,
    observed_agreement,
    prng_next,
    respondent_seed,
    shuffle_order,
    simulate,
    tokenize,
    tolerance_agreement,
    validate_log,
)
from . import _core

__all__ = [
    "Error",
    "Experiment",
    "Session",
    "analyze",
    "display",
    "fleiss_kappa",
    "fnv1a64",
    "mode_window_coverage",
    "normalize_line",
    "observed_agreement",
    "prng_next",
    "respondent_seed",
    "shuffle_order",
    "simulate",
    "tokenize",
    "tolerance_agreement",
    "validate_log",
]


def display(session):
    """Current display state of a session as a dict."""
    return json.loads(session.display_json())


def analyze(logs, experiment, include_practice=False, include_flagged=False, max_window=10):
    """Aggregates NDJSON session logs into the report document (a dict)."""
    return json.loads(_core.analyze(list(logs), experiment, include_practice, include_flagged, max_window))
