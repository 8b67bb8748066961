from __future__ import annotations

import numpy as np
import pytest

from choreokit import default_profile


@pytest.fixture(scope="session")
def ur5e():
    return default_profile()


# Folded configuration: elbow and wrist_1 bent so the tool point sits about
# 34 mm from the upper-arm segment. Found numerically, verified against the
# sampling oracle in the tests that use it.
FOLDED_Q = (0.0, -0.5, 3.05, 1.3, 3.1, 0.0)

# Safe endpoints placed symmetrically about FOLDED_Q, so the direct quintic
# between them passes through the flagged fold at its midpoint. The reroute
# through the neutral waypoint validates clean.
REROUTE_A = (0.0, -1.05, 3.0, 1.35, 4.5, 0.0)
REROUTE_B = (0.0, 0.05, 3.1, 1.25, 1.7, 0.0)


@pytest.fixture()
def folded_q():
    return np.array(FOLDED_Q)


@pytest.fixture()
def reroute_endpoints():
    return np.array(REROUTE_A), np.array(REROUTE_B)
