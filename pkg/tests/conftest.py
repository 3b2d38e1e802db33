import numpy as np
import pytest

from causalshap.attribution import SamplerConfig
from causalshap.datatable import train_test_split
from causalshap.models import train_linear
from causalshap.pipeline import Explainer
from causalshap.sem import lung_cancer_spec, cardio_spec, sample_sem


@pytest.fixture(scope="session")
def lung_table():
    return sample_sem(lung_cancer_spec(0), 1000)


@pytest.fixture(scope="session")
def lung_split(lung_table):
    return train_test_split(lung_table, 0.2, 0)


@pytest.fixture(scope="session")
def lung_explainer(lung_split):
    model = train_linear(lung_split.train, ridge_lambda=100.0)
    return Explainer.build(lung_split.train, model, SamplerConfig(seed=0, mc_samples=64))


@pytest.fixture(scope="session")
def cardio_table():
    return sample_sem(cardio_spec(0), 1000)


@pytest.fixture(scope="session")
def cardio_split(cardio_table):
    return train_test_split(cardio_table, 0.2, 0)


@pytest.fixture(scope="session")
def cardio_explainer(cardio_split):
    model = train_linear(cardio_split.train)
    return Explainer.build(cardio_split.train, model, SamplerConfig(seed=0, mc_samples=64))
