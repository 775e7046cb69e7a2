import csv
import io
import json
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path
from typing import List, Optional, Sequence

import jsonschema
import numpy as np
from alembic import command
from alembic.config import Config as AlembicConfig

from polarspike import cli, modelfile
from polarspike.layers import AvgPool2d, BatchNorm, Conv2d, Flatten, Linear, Pqa
from polarspike.network import AnnModel
from polarspike.quant import QuantParams
from polarspike.records import get_latest_run
from polarspike.tensor import DTYPE
from polarspike.workbench import Workbench

ROOT = Path(__file__).resolve().parent.parent


def random_quant(rng: np.random.Generator, levels: Optional[int] = None,
                 theta: Optional[float] = None) -> QuantParams:
    """
    Random valid PQA parameters. theta defaults to L, which keeps theta_snn = 1.
    """
    L = int(levels if levels is not None else rng.integers(1, 17))
    k_neg = -int(rng.integers(0, L))
    k_pos = int(rng.integers(1, L + 1))
    return QuantParams(L, float(L if theta is None else theta), k_neg / L, k_pos / L)


def random_mlp(
            rng: np.random.Generator,
            widths: Sequence[int],
            quant: Optional[Sequence[QuantParams]] = None,
            batchnorm: bool = False,
            weight_scale: float = 1.0,
        ) -> AnnModel:
    """
    [linear (-> batchnorm) -> pqa] for every hidden width, then a linear head.
    widths is (in, hidden..., classes).
    """
    layers = []
    for i, (n_in, n_out) in enumerate(zip(widths[:-1], widths[1:])):
        std = weight_scale * np.sqrt(2.0 / n_in)
        layers.append(Linear(
            rng.normal(0, std, (n_out, n_in)).astype(DTYPE),
            rng.normal(0, 0.1, n_out).astype(DTYPE)))
        if i == len(widths) - 2:
            break
        if batchnorm:
            layers.append(random_batchnorm(rng, n_out))
        q = quant[i] if quant is not None else random_quant(rng)
        layers.append(Pqa(q))
    return AnnModel(layers)


def random_batchnorm(rng: np.random.Generator, n: int) -> BatchNorm:
    return BatchNorm(
        gamma=rng.uniform(0.5, 2.0, n).astype(DTYPE),
        beta=rng.normal(0, 0.5, n).astype(DTYPE),
        running_mean=rng.normal(0, 0.5, n).astype(DTYPE),
        running_var=rng.uniform(0.5, 2.0, n).astype(DTYPE),
        eps=1e-5,
    )


def random_conv_net(rng: np.random.Generator, batchnorm: bool = False) -> AnnModel:
    """
    conv2d(1->4, 3x3, pad 1) -> pqa -> avgpool 2 -> flatten -> linear(64->16)
    -> pqa -> head(3), on 1x8x8 images.
    """
    layers = [Conv2d(
        rng.normal(0, 0.5, (4, 1, 3, 3)).astype(DTYPE),
        rng.normal(0, 0.1, 4).astype(DTYPE),
        stride=1, padding=1)]
    if batchnorm:
        layers.append(random_batchnorm(rng, 4))
    layers += [
        Pqa(random_quant(rng, levels=8)),
        AvgPool2d(2),
        Flatten(),
        Linear(rng.normal(0, 0.2, (16, 64)).astype(DTYPE), rng.normal(0, 0.1, 16).astype(DTYPE)),
        Pqa(random_quant(rng, levels=4)),
        Linear(rng.normal(0, 0.3, (3, 16)).astype(DTYPE), np.zeros(3, dtype=DTYPE)),
    ]
    return AnnModel(layers)


def random_inputs(rng: np.random.Generator, n: int, shape: Sequence[int],
                  scale: float = 2.0) -> np.ndarray:
    return (scale * rng.standard_normal((n,) + tuple(shape))).astype(DTYPE)


class CliSession:
    """
    This class runs command lines against a workbench (play_* methods) and
    asserts their outcome (assert_* methods).

    Every play method overwrites the captured exit code and output, so assert
    methods only look at the most recent command.

    Files named in commands are resolved inside `workdir`.
    """
    def __init__(self, workbench: Workbench, workdir: Path):
        self.workbench = workbench
        self.workdir = workdir

        self.exit_code = None
        self.stdout = ''
        self.stderr = ''

    def path(self, name: str) -> str:
        return str(self.workdir / name)

    #
    # Play methods
    #

    def play_command(self, *args: str) -> int:
        """Runs one command line, e.g. play_command('convert', '--in', ...)"""
        out, err = io.StringIO(), io.StringIO()
        with redirect_stdout(out), redirect_stderr(err):
            self.exit_code = cli.main([str(a) for a in args], workbench=self.workbench)
        self.stdout = out.getvalue()
        self.stderr = err.getvalue()
        return self.exit_code

    def play_dataset(self, out: str = 'data.csv', n: int = 200, *extra: str) -> int:
        return self.play_command('dataset', '--n', n, '--out', self.path(out), *extra)

    def play_train(self, out: str = 'ann.json', seed: int = 42, *extra: str) -> int:
        return self.play_command(
            '--seed', seed, 'train', '--dataset', 'gaussians', '--out', self.path(out), *extra)

    def play_convert(self, ann: str = 'ann.json', out: str = 'snn.json', *extra: str) -> int:
        return self.play_command(
            'convert', '--in', self.path(ann), '--out', self.path(out), *extra)

    def play_run(self, model: str = 'snn.json', input: str = 'data.csv', T: int = 1,
                 out: str = 'report.json', *extra: str) -> int:
        return self.play_command(
            'run', '--model', self.path(model), '--input', self.path(input),
            '--timesteps', T, '--out', self.path(out), *extra)

    def play_verify(self, ann: str = 'ann.json', snn: str = 'snn.json', *extra: str) -> int:
        return self.play_command(
            'verify', '--ann', self.path(ann), '--snn', self.path(snn), *extra)

    def save_model(self, model, name: str, exact: bool = False) -> str:
        modelfile.save_model(model, self.path(name), exact=exact)
        return self.path(name)

    #
    # Assert methods
    #

    def assert_succeeded(self):
        assert self.exit_code == 0, \
            f"Command failed with exit code {self.exit_code}: {self.stderr}"

    def assert_failed(self, exit_code: int = 1, message: Optional[str] = None):
        assert self.exit_code == exit_code, \
            f"Expected exit code {exit_code}, got {self.exit_code}"
        if message is not None:
            assert message in self.stderr, \
                f"{message!r} not found in stderr: {self.stderr!r}"

    def assert_usage_error(self):
        self.assert_failed(exit_code=2)

    def assert_printed(self, text: str):
        assert text in self.stdout, \
            f"{text!r} not found in output: {self.stdout!r}"

    def assert_file_exists(self, name: str):
        assert (self.workdir / name).is_file(), \
            f"{name} wasn't written"

    def assert_json(self, name: str, schema_name: Optional[str] = None) -> dict:
        """Returns the parsed document after checking it against a shipped schema."""
        self.assert_file_exists(name)
        with open(self.path(name)) as f:
            document = json.load(f)
        if schema_name:
            jsonschema.validate(document, modelfile.load_schema(schema_name))
            assert document['format_version'] == 1
        return document

    def assert_csv(self, name: str, header: Sequence[str]) -> List[List[str]]:
        """Returns the data rows after checking the header."""
        self.assert_file_exists(name)
        with open(self.path(name), newline='') as f:
            rows = list(csv.reader(f))
        assert rows and rows[0] == list(header), \
            f"Unexpected CSV header in {name}: {rows[:1]}"
        return rows[1:]

    def assert_recorded(self, command: str, exit_code: int = 0):
        with self.workbench.db_session() as session:
            run = get_latest_run(session, command)
            assert run is not None, \
                f"No {command} run recorded"
            assert run.exit_code == exit_code, \
                f"Recorded exit code {run.exit_code}, expected {exit_code}"
            return run.metric_values


def upgrade_ledger(url: str):
    """Runs the shipped migrations against `url`, like `alembic upgrade head` does."""
    alembic_cfg = AlembicConfig(str(ROOT / 'alembic.ini'))
    alembic_cfg.set_main_option('script_location', str(ROOT / 'alembic'))
    alembic_cfg.set_main_option('sqlalchemy.url', url)
    command.upgrade(alembic_cfg, 'head')
