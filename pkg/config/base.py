class BaseConfig:
    #
    # Required params
    #

    # Database URL for SQLAlchemy, where every command run and its metrics
    # are recorded. Set to None to disable the ledger.
    RESULTS_DB_URL = 'sqlite:///polarspike.db'

    #
    # Optional params
    #

    # Seed of the PCG64 generator used when --seed isn't given.
    DEFAULT_SEED = 42

    # Level of the 'polarspike' loggers, e.g. 'DEBUG' to see training epochs.
    LOG_LEVEL = 'INFO'

    # `verify` exits with an error when the largest absolute difference of the
    # head outputs exceeds this.
    VERIFY_TOLERANCE = 1e-4

    # How many random inputs does `verify` draw when no input file is given?
    VERIFY_SAMPLES = 1000

    # How far from R = 1 is an entropy ratio still near-lossless?
    REGIME_TOLERANCE = 0.02

    # Duration of one timestep in seconds and energy of one spike in joules.
    ENERGY_ETA = 1e-3
    ENERGY_XI = 0.9e-12

    # 'printed' or 'merged', see polarspike.entropy.
    ENTROPY_FORMULA = 'printed'

    # Training of the toy MLP.
    TRAIN_EPOCHS = 50
    TRAIN_BATCH_SIZE = 32
    TRAIN_LEARNING_RATE = 0.05
    TRAIN_MOMENTUM = 0.9
    TRAIN_HIDDEN = (8,)
    # (L, theta, alpha, beta) of every hidden PQA layer.
    TRAIN_QUANT = (8, 8.0, -0.25, 1.0)
    BN_MOMENTUM = 0.1

    # Size of the synthetic dataset and the share of it held out for testing.
    TRAIN_SAMPLES = 2000
    TEST_FRACTION = 0.25
