import numpy as np
from pytest import fixture

from config import TestConfig
from polarspike.records import init_models
from polarspike.workbench import Workbench

from .utils import CliSession


@fixture
def workbench():
    workbench = Workbench(TestConfig())
    init_models(workbench.db_engine)
    return workbench


@fixture
def session(workbench: Workbench, tmp_path):
    return CliSession(workbench, tmp_path)


@fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))
