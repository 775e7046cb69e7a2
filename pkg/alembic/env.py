import os
import sys
from logging.config import fileConfig

from alembic import context
from sqlalchemy import pool, create_engine

project_root = os.path.dirname(os.path.dirname(__file__))
sys.path.append(project_root)

# Import app modules here
from config import Config as WorkbenchConfig  # noqa: E402
from polarspike.records import Base  # noqa: E402

# this is the Alembic Config object, which provides
# access to the values within the .ini file in use.
config = context.config

# Interpret the config file for Python logging.
if config.config_file_name is not None:
    fileConfig(config.config_file_name, disable_existing_loggers=False)

# An explicit sqlalchemy.url wins over the workbench configuration.
RESULTS_DB_URL = config.get_main_option("sqlalchemy.url") or WorkbenchConfig.RESULTS_DB_URL

# Ledger tables, for 'autogenerate' support.
target_metadata = Base.metadata


def run_migrations_offline():
    """
    Emits the migration SQL for the configured results database without
    connecting to it.
    """
    context.configure(
        url=RESULTS_DB_URL,
        target_metadata=target_metadata,
        literal_binds=True,
    )

    with context.begin_transaction():
        context.run_migrations()


def run_migrations_online():
    """
    Connects to the configured results database and migrates it.
    """
    connectable = create_engine(
        RESULTS_DB_URL,
        poolclass=pool.NullPool,
    )

    with connectable.connect() as connection:
        context.configure(
            connection=connection, target_metadata=target_metadata
        )

        with context.begin_transaction():
            context.run_migrations()


if context.is_offline_mode():
    run_migrations_offline()
else:
    run_migrations_online()
