"""Shared fixtures: a showcase model with known truth, plus tiny datasets."""

from __future__ import annotations

import numpy as np
import pytest

from helpers import SHOWCASE_TEXT, simulate_showcase
from semforge import Dataset, fit_model


@pytest.fixture(scope="session")
def showcase_text():
    return SHOWCASE_TEXT


@pytest.fixture(scope="session")
def showcase_data():
    return simulate_showcase()


@pytest.fixture(scope="session")
def showcase_fit(showcase_data):
    return fit_model(SHOWCASE_TEXT, showcase_data, objective=["ULS", "MLW"],
                     method="SLSQP")


@pytest.fixture()
def xy_data():
    rng = np.random.default_rng(7)
    x2 = rng.standard_normal(200)
    x1 = 0.6 * x2 + rng.standard_normal(200) * 0.5
    return Dataset(names=("x1", "x2"), rows=np.column_stack([x1, x2]))
