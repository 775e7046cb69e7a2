from .base import BaseConfig


class TestConfig(BaseConfig):
    RESULTS_DB_URL = 'sqlite:///:memory:'
    TRAIN_SAMPLES = 800
    TRAIN_EPOCHS = 20
    VERIFY_SAMPLES = 200
