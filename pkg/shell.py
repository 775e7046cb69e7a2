#!/usr/bin/env python3
import IPython

from polarspike.workbench import Workbench
from polarspike.records import *  # noqa: F401, F403
from polarspike import convert, entropy, energy, modelfile, simulate, trainer  # noqa: F401
from config import Config

workbench = Workbench(Config())
with workbench.db_session() as session:
    IPython.embed()
