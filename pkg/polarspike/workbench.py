import logging
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from config.base import BaseConfig
from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker

from . import messages, modelfile
from .convert import convert_baseline, convert_model, fold_batchnorm, verify_equivalence
from .energy import compare_with_baseline, energy_from_counts, layerwise_spike_report
from .entropy import entropy_ratio_grid, regime_counts
from .errors import ConfigError
from .network import Model
from .quant import QuantParams
from .records import create_run, has_ledger, list_runs
from .simulate import DELTA_BUCKETS, decode_prediction, error_sweep, run_snn
from .tensor import DTYPE, make_rng
from .trainer import TrainConfig, eval_accuracy, gen_synthetic_dataset, train_ann

logging.basicConfig(
    level=logging.INFO,
    format='[%(asctime)s : %(name)s : %(levelname)s] %(message)s',
)

ERROR_ANALYSIS_COLUMNS = ('T', 'layer', 'mean_abs_err') + DELTA_BUCKETS
GRID_COLUMNS = ('alpha', 'beta', 'R')
SWEEP_COLUMNS = GRID_COLUMNS + ('test_accuracy', 'snn_test_accuracy')
LAYER_COLUMNS = ('layer_label', 'spike_count')
ENERGY_COMPARE_COLUMNS = ('method', 'T', 'N', 'P', 'accuracy')


@dataclass
class Outcome:
    """What a command reports back: text for the user, metrics for the ledger."""
    message: str
    metrics: Dict[str, float] = field(default_factory=dict)
    exit_code: int = 0


class Workbench:
    """
    Runs the train -> convert -> run -> analyze commands and keeps a ledger of
    their results.
    """
    def __init__(self, config: BaseConfig) -> None:
        self.config = config

        self.logger = logging.getLogger('polarspike')
        self.logger.setLevel(config.LOG_LEVEL)
        self.db_engine = None
        self.db_sessionmaker = None
        if config.RESULTS_DB_URL:
            self.db_engine = create_engine(config.RESULTS_DB_URL)
            self.db_sessionmaker = sessionmaker(bind=self.db_engine, expire_on_commit=False)

    def ledger_ready(self) -> bool:
        """Whether runs can be recorded: the ledger is enabled and migrated."""
        return self.db_engine is not None and has_ledger(self.db_engine)

    @contextmanager
    def db_session(self):
        """
        Starts a DB session. Commits it after the nested code is finished, unless
        it raises an exception, in which case rolls back.
        """
        session = self.db_sessionmaker()
        try:
            yield session
            session.commit()
        except Exception:
            session.rollback()
            raise
        finally:
            session.close()

    def record(
                self,
                command: str,
                metrics: Dict[str, float],
                seed: Optional[int] = None,
                argv: Sequence[str] = (),
                exit_code: int = 0,
            ) -> None:
        if self.db_engine is None:
            return
        if not has_ledger(self.db_engine):
            self.logger.warning(
                "%s The %s run is not recorded.", messages.LEDGER_NOT_MIGRATED, command)
            return
        with self.db_session() as session:
            run = create_run(session, command, metrics, seed, argv, exit_code)
            self.logger.info(
                "Recorded run #%s of %s (exit code %s)", run.id, command, exit_code)

    def _seed(self, seed: Optional[int]) -> int:
        return self.config.DEFAULT_SEED if seed is None else seed

    def _inputs(
                self,
                model: Model,
                seed: Optional[int],
                n_samples: Optional[int] = None,
                input_path: Optional[str] = None,
                header: bool = False,
                input_shape: Optional[Tuple[int, ...]] = None,
            ) -> np.ndarray:
        """
        Samples from a CSV file when one is given, standard-normal random samples
        otherwise.
        """
        if input_path:
            points, _ = modelfile.read_samples(input_path, header=header, shape=input_shape)
            return points

        shape = input_shape or modelfile.input_shape(model)
        if shape is None:
            raise ConfigError("the model starts with a conv2d layer, pass --input-shape C,H,W")
        n = self.config.VERIFY_SAMPLES if n_samples is None else n_samples
        if n < 1:
            raise ConfigError(f"number of samples must be >= 1, got {n}")
        rng = make_rng(self._seed(seed))
        return rng.standard_normal((n,) + tuple(shape)).astype(DTYPE)

    def cmd_dataset(
                self,
                out: str,
                kind: str = 'gaussians',
                n: Optional[int] = None,
                num_classes: int = 2,
                seed: Optional[int] = None,
                header: bool = False,
            ) -> Outcome:
        n = self.config.TRAIN_SAMPLES if n is None else n
        data = gen_synthetic_dataset(kind, n, self._seed(seed), num_classes)
        modelfile.write_samples(out, data.points, data.labels, header=header)
        self.logger.info("Wrote %s samples to %s", len(data), out)
        return Outcome(
            messages.DATASET_WRITTEN.format(
                n=len(data), kind=kind, num_classes=num_classes, path=out),
            {'n_samples': len(data)},
        )

    def cmd_train(
                self,
                out: str,
                dataset: str = 'gaussians',
                seed: Optional[int] = None,
                n: Optional[int] = None,
                epochs: Optional[int] = None,
                batch_size: Optional[int] = None,
                learning_rate: Optional[float] = None,
                hidden: Optional[Tuple[int, ...]] = None,
                quant: Optional[Tuple[float, float, float, float]] = None,
                metrics_out: Optional[str] = None,
                exact: bool = False,
            ) -> Outcome:
        seed = self._seed(seed)
        quant_params = None
        if quant is not None:
            levels, theta, alpha, beta = quant
            quant_params = (QuantParams(int(levels), float(theta), float(alpha), float(beta)),)
        cfg = TrainConfig.from_config(
            self.config,
            seed=seed,
            epochs=epochs,
            batch_size=batch_size,
            learning_rate=learning_rate,
            hidden=hidden,
            quant=quant_params,
        )
        cfg.validate()

        n = self.config.TRAIN_SAMPLES if n is None else n
        data = gen_synthetic_dataset(dataset, n, seed)
        train, test = data.split(self.config.TEST_FRACTION)

        self.logger.info(
            "Training on %s %s samples, %s epochs, seed %s", len(train), dataset,
            cfg.epochs, seed)
        model = train_ann(cfg, train)
        modelfile.save_model(model, out, exact=exact)

        snn = convert_model(model)
        metrics = {
            'train_accuracy': eval_accuracy(model, train),
            'test_accuracy': eval_accuracy(model, test),
            'snn_test_accuracy': eval_accuracy(snn, test, T=1),
        }
        if metrics_out:
            modelfile.write_report(
                metrics_out, modelfile.metrics_payload('train', metrics), 'metrics')

        return Outcome(
            messages.TRAINED.format(
                path=out,
                train_accuracy=metrics['train_accuracy'],
                test_accuracy=metrics['test_accuracy'],
                snn_accuracy=metrics['snn_test_accuracy'],
            ),
            metrics,
        )

    def cmd_convert(self, in_path: str, out: str, exact: bool = False) -> Outcome:
        ann = modelfile.load_ann(in_path)
        snn = convert_model(ann)
        modelfile.save_model(snn, out, exact=exact)
        firing = len(snn.spiking_layers)
        return Outcome(
            messages.CONVERTED.format(
                ann_layers=len(ann.layers), snn_layers=len(snn.layers), firing=firing,
                path=out),
            {'firing_layers': firing},
        )

    def cmd_run(
                self,
                model: str,
                input: str,
                timesteps: int,
                out: str,
                header: bool = False,
                labels: bool = False,
                input_shape: Optional[Tuple[int, ...]] = None,
                record_spikes: bool = False,
            ) -> Outcome:
        if timesteps < 1:
            raise ConfigError(f"--timesteps must be >= 1, got {timesteps}")
        snn = modelfile.load_snn(model)
        points, targets = modelfile.read_samples(
            input, header=header, labels=labels, shape=input_shape)

        report = run_snn(snn, points, timesteps)
        predictions = decode_prediction(report)
        modelfile.write_report(
            out,
            modelfile.run_report_payload(report, predictions, record_spikes),
            'run_report')

        metrics = {
            'n_samples': report.n_samples,
            'total_spike_events': report.total_spike_events,
        }
        message = messages.RUN_DONE.format(
            n=report.n_samples, T=timesteps, events=report.total_spike_events, path=out)
        if targets is not None:
            metrics['accuracy'] = float(np.mean(predictions == targets))
            message += "\n" + messages.RUN_ACCURACY.format(accuracy=metrics['accuracy'])
        return Outcome(message, metrics)

    def cmd_verify(
                self,
                ann: str,
                snn: str,
                seed: Optional[int] = None,
                n_samples: Optional[int] = None,
                input: Optional[str] = None,
                header: bool = False,
                input_shape: Optional[Tuple[int, ...]] = None,
                v_init: Optional[float] = None,
                tolerance: Optional[float] = None,
                out: Optional[str] = None,
            ) -> Outcome:
        ann_model = modelfile.load_ann(ann)
        snn_model = modelfile.load_snn(snn)
        inputs = self._inputs(ann_model, seed, n_samples, input, header, input_shape)
        tolerance = self.config.VERIFY_TOLERANCE if tolerance is None else tolerance

        report = verify_equivalence(ann_model, snn_model, inputs, v_init=v_init)
        passed = report.index_mismatches == 0 and report.max_abs_diff <= tolerance
        if out:
            payload = report.as_dict()
            payload.update(tolerance=tolerance, passed=passed)
            modelfile.write_report(out, payload, 'equivalence_report')

        template = messages.VERIFY_PASSED if passed else messages.VERIFY_FAILED
        if not passed:
            self.logger.warning(
                "Equivalence check failed: max_abs_diff=%g (tolerance %g), %s index mismatches",
                report.max_abs_diff, tolerance, report.index_mismatches)
        return Outcome(
            template.format(n=report.n_samples, tolerance=tolerance, **report.as_dict()),
            report.as_dict(),
            exit_code=0 if passed else 1,
        )

    def cmd_entropy_grid(
                self,
                levels: int,
                theta: float,
                out: str,
                formula: Optional[str] = None,
                step: str = 'auto',
                json_out: Optional[str] = None,
                ppm_out: Optional[str] = None,
            ) -> Outcome:
        formula = formula or self.config.ENTROPY_FORMULA
        grid = entropy_ratio_grid(levels, theta, formula, stride=grid_stride(step, levels))

        modelfile.write_rows(out, GRID_COLUMNS, list(grid.cells()))
        best_alpha, best_beta, best_r = grid.best_cell()
        if json_out:
            payload = grid.as_dict()
            payload['best_cell'] = [best_alpha, best_beta, best_r]
            modelfile.write_report(json_out, payload, 'entropy_grid')
        if ppm_out:
            grid.render_ppm(ppm_out)

        counts = regime_counts(grid, self.config.REGIME_TOLERANCE)
        metrics = {
            'cells': grid.ratios.size,
            'best_alpha': best_alpha,
            'best_beta': best_beta,
            'best_R': best_r,
            'max_R': grid.max_cell()[2],
        }
        return Outcome(
            messages.ENTROPY_GRID.format(
                L=levels, theta=theta, formula=formula, path=out, **metrics, **counts),
            metrics,
        )

    def cmd_alpha_beta_sweep(
                self,
                levels: int,
                theta: float,
                out: str,
                seed: Optional[int] = None,
                step: str = 'auto',
                formula: Optional[str] = None,
                dataset: str = 'gaussians',
                n: Optional[int] = None,
                epochs: Optional[int] = None,
                hidden: Optional[Tuple[int, ...]] = None,
            ) -> Outcome:
        """
        Trains one model per (alpha, beta) cell of the entropy grid, with theta
        held fixed, and reports its accuracy next to the cell's R.
        """
        seed = self._seed(seed)
        formula = formula or self.config.ENTROPY_FORMULA
        grid = entropy_ratio_grid(levels, theta, formula, stride=grid_stride(step, levels))

        n = self.config.TRAIN_SAMPLES if n is None else n
        train, test = gen_synthetic_dataset(dataset, n, seed).split(self.config.TEST_FRACTION)

        rows = []
        for alpha, beta, ratio in grid.cells():
            # alpha = -1 only exists for the entropy formula, PQA needs alpha > -1.
            if alpha <= -1:
                continue
            cfg = TrainConfig.from_config(
                self.config,
                seed=seed,
                epochs=epochs,
                hidden=hidden,
                quant=(QuantParams(levels, float(theta), alpha, beta),),
                learn_theta=False,
            )
            cfg.validate()
            model = train_ann(cfg, train)
            row = {
                'alpha': alpha,
                'beta': beta,
                'R': ratio,
                'test_accuracy': eval_accuracy(model, test),
                'snn_test_accuracy': eval_accuracy(convert_model(model), test),
            }
            self.logger.info(
                "Sweep cell alpha=%g beta=%g: R=%.4f, test accuracy %.4f",
                alpha, beta, ratio, row['test_accuracy'])
            rows.append(row)

        modelfile.write_dict_rows(out, SWEEP_COLUMNS, rows)

        best = max(rows, key=lambda row: row['test_accuracy'])
        metrics = {
            'cells': len(rows),
            'best_alpha': best['alpha'],
            'best_beta': best['beta'],
            'best_accuracy': best['test_accuracy'],
            'R_at_best': best['R'],
        }
        return Outcome(
            messages.ALPHA_BETA_SWEEP.format(
                L=levels, theta=theta, formula=formula, path=out, **metrics),
            metrics,
        )

    def cmd_energy(
                self,
                run_report: str,
                eta: Optional[float] = None,
                xi: Optional[float] = None,
                out: Optional[str] = None,
                layers_out: Optional[str] = None,
            ) -> Outcome:
        document = modelfile.read_report(run_report, 'run_report')
        eta = self.config.ENERGY_ETA if eta is None else eta
        xi = self.config.ENERGY_XI if xi is None else xi
        report = energy_from_counts(
            document['spike_counts'], document['T'], eta, xi, labels=document['labels'])

        if out:
            modelfile.write_report(out, report.as_dict(), 'energy_report')
        if layers_out:
            rows = [
                {'layer_label': label, 'spike_count': count}
                for label, count in zip(report.labels, report.per_layer_counts)
            ]
            modelfile.write_dict_rows(layers_out, LAYER_COLUMNS, rows)

        return Outcome(
            messages.ENERGY.format(
                N=report.N, N_1e8=report.N / 1e8, T=report.T, P=report.P, eta=eta, xi=xi),
            {'N': report.N, 'P': report.P},
        )

    def cmd_energy_compare(
                self,
                ann: str,
                out: str,
                timesteps_list: Sequence[int] = (1, 2, 4, 8),
                seed: Optional[int] = None,
                n_samples: Optional[int] = None,
                input: Optional[str] = None,
                header: bool = False,
                labels: bool = False,
                input_shape: Optional[Tuple[int, ...]] = None,
                eta: Optional[float] = None,
                xi: Optional[float] = None,
                layers_out: Optional[str] = None,
            ) -> Outcome:
        """
        Converts one ANN twice, into the polar AIF network and into the binary
        IF baseline, and compares their spike counts and power for every T.
        """
        if any(T < 1 for T in timesteps_list):
            raise ConfigError(f"every timestep count must be >= 1, got {list(timesteps_list)}")
        ann_model = modelfile.load_ann(ann)
        polar = convert_model(ann_model)
        baseline = convert_baseline(ann_model)

        targets = None
        if input:
            inputs, targets = modelfile.read_samples(
                input, header=header, labels=labels, shape=input_shape)
        else:
            inputs = self._inputs(ann_model, seed, n_samples, input_shape=input_shape)
        eta = self.config.ENERGY_ETA if eta is None else eta
        xi = self.config.ENERGY_XI if xi is None else xi

        rows = compare_with_baseline(polar, baseline, inputs, timesteps_list, targets, eta, xi)
        modelfile.write_dict_rows(out, ENERGY_COMPARE_COLUMNS, rows)
        if layers_out:
            T = max(timesteps_list)
            layers = layerwise_spike_report(
                run_snn(polar, inputs, T), baseline=run_snn(baseline, inputs, T))
            modelfile.write_dict_rows(
                layers_out, LAYER_COLUMNS + ('baseline_spike_count',), layers)

        metrics = {}
        lines = [messages.ENERGY_COMPARE.format(n=len(inputs), path=out)]
        for polar_row, baseline_row in zip(rows[::2], rows[1::2]):
            T = polar_row['T']
            metrics[f'N_polar_T{T}'] = polar_row['N']
            metrics[f'N_baseline_T{T}'] = baseline_row['N']
            lines.append(messages.ENERGY_COMPARE_ROW.format(
                T=T,
                N_polar=polar_row['N'], P_polar=polar_row['P'],
                N_baseline=baseline_row['N'], P_baseline=baseline_row['P']))
        return Outcome('\n'.join(lines), metrics)

    def cmd_error_analysis(
                self,
                ann: str,
                snn: str,
                out: str,
                timesteps_list: Sequence[int] = (1, 2, 4, 8, 16),
                seed: Optional[int] = None,
                n_samples: Optional[int] = None,
                input: Optional[str] = None,
                header: bool = False,
                input_shape: Optional[Tuple[int, ...]] = None,
            ) -> Outcome:
        if any(T < 1 for T in timesteps_list):
            raise ConfigError(f"every timestep count must be >= 1, got {list(timesteps_list)}")
        ann_model = fold_batchnorm(modelfile.load_ann(ann))
        snn_model = modelfile.load_snn(snn)
        inputs = self._inputs(ann_model, seed, n_samples, input, header, input_shape)

        rows = error_sweep(ann_model, snn_model, inputs, timesteps_list)
        modelfile.write_dict_rows(out, ERROR_ANALYSIS_COLUMNS, rows)

        metrics = {
            f'mean_abs_err_T{row["T"]}_{row["layer"]}': row['mean_abs_err'] for row in rows
        }
        return Outcome(
            messages.ERROR_ANALYSIS.format(
                rows=len(rows), timesteps=list(timesteps_list), path=out),
            metrics,
        )

    def cmd_history(self, limit: int = 10) -> Outcome:
        if self.db_engine is None:
            return Outcome(messages.HISTORY_LEDGER_DISABLED)
        if not self.ledger_ready():
            return Outcome(messages.LEDGER_NOT_MIGRATED, exit_code=1)
        with self.db_session() as session:
            lines = [
                messages.HISTORY_ROW.format(
                    id=run.id,
                    created_at=run.created_at,
                    command=run.command,
                    exit_code=run.exit_code,
                    metrics=' '.join(f'{k}={v:g}' for k, v in run.metric_values.items()),
                )
                for run in list_runs(session, limit)
            ]
        return Outcome('\n'.join(lines) if lines else messages.HISTORY_EMPTY)


def grid_stride(step: str, levels: int) -> int:
    """
    'auto' is the 1/L lattice itself; a number must be a whole multiple of 1/L.
    """
    if levels < 1:
        raise ConfigError(messages.GRID_BAD_LEVELS.format(levels=levels))
    if step == 'auto':
        return 1
    bad_step = ConfigError(messages.GRID_BAD_STEP.format(step=step, lattice=1 / levels))
    try:
        value = float(step)
    except ValueError:
        raise bad_step
    if not (math.isfinite(value) and 0 < value <= 1):
        raise bad_step
    stride = int(round(value * levels))
    if stride < 1 or abs(value * levels - stride) > 1e-9:
        raise bad_step
    return stride
