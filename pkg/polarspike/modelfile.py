"""
Model files, sample CSVs and JSON reports.

Model files are JSON documents with format_version 1:

    {"format_version": 1, "model_kind": "ann" | "snn", "layers": [...]}

Tensors are nested lists of the shortest decimals that read back to the same
float32 values. With exact=True every tensor also gets a `<name>_hex` twin of
float.hex() strings, which takes precedence on load.
"""
import csv
import json
import os
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import jsonschema
import numpy as np

from .errors import ModelFileError, PolarSpikeError, StructureError
from .layers import AvgPool2d, BatchNorm, Conv2d, Flatten, Linear, Pqa
from .network import AnnModel, Model, SnnLayer, SnnModel
from .neuron import AifParams
from .quant import QuantParams
from .tensor import DTYPE, Tensor

FORMAT_VERSION = 1

SCHEMA_DIR = os.path.join(os.path.dirname(__file__), 'schemas')


def load_schema(name: str) -> dict:
    with open(os.path.join(SCHEMA_DIR, f'{name}.schema.json')) as f:
        return json.load(f)


def validate_document(document: Any, schema_name: str) -> None:
    try:
        jsonschema.validate(document, load_schema(schema_name))
    except jsonschema.ValidationError as e:
        where = '/'.join(str(p) for p in e.absolute_path) or 'document'
        raise ModelFileError(f"{schema_name} {where}: {e.message}") from e


def _read_json(path: str) -> Any:
    with open(path) as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise ModelFileError(f"{path} isn't valid JSON: {e}") from e


#
# Tensor encoding
#

def encode_tensor(x: Tensor) -> list:
    x = np.asarray(x, dtype=DTYPE)
    if not np.all(np.isfinite(x)):
        raise ModelFileError("can't serialize non-finite values")
    shortest = [float(str(v)) for v in x.ravel()]
    return np.array(shortest, dtype=np.float64).reshape(x.shape).tolist()


def encode_tensor_hex(x: Tensor) -> list:
    x = np.asarray(x, dtype=DTYPE)
    hexes = [float(v).hex() for v in x.ravel()]
    return np.array(hexes, dtype=object).reshape(x.shape).tolist()


def decode_tensor(record: dict, name: str) -> Tensor:
    hex_values = record.get(f'{name}_hex')
    if hex_values is not None:
        flat = [float.fromhex(h) for h in np.asarray(hex_values, dtype=object).ravel()]
        shape = np.shape(hex_values)
        return np.array(flat, dtype=np.float64).reshape(shape).astype(DTYPE)
    return np.asarray(record[name], dtype=np.float64).astype(DTYPE)


def _tensors(record: dict, exact: bool, **tensors: Tensor) -> dict:
    for name, value in tensors.items():
        record[name] = encode_tensor(value)
        if exact:
            record[f'{name}_hex'] = encode_tensor_hex(value)
    return record


#
# Layer records
#

def _quant_record(q: QuantParams) -> dict:
    return {'levels': q.levels, 'theta': q.theta, 'alpha': q.alpha, 'beta': q.beta}


def _aif_record(aif: Optional[AifParams]) -> Optional[dict]:
    if aif is None:
        return None
    return {
        'theta_snn': aif.theta_snn,
        'c_neg': aif.c_neg,
        'c_pos': aif.c_pos,
        'v_init': aif.v_init,
    }


def layer_record(layer, exact: bool = False) -> dict:
    record: Dict[str, Any] = {'kind': layer.kind}
    if isinstance(layer, Linear):
        return _tensors(record, exact, weight=layer.weight, bias=layer.bias)
    if isinstance(layer, Conv2d):
        record.update(stride=layer.stride, padding=layer.padding)
        return _tensors(record, exact, weight=layer.weight, bias=layer.bias)
    if isinstance(layer, BatchNorm):
        record['eps'] = layer.eps
        return _tensors(
            record, exact, gamma=layer.gamma, beta=layer.beta,
            running_mean=layer.running_mean, running_var=layer.running_var)
    if isinstance(layer, Pqa):
        record.update(_quant_record(layer.quant))
        return record
    if isinstance(layer, AvgPool2d):
        record.update(window=layer.window, stride=layer.stride)
        return record
    if isinstance(layer, Flatten):
        return record
    if isinstance(layer, SnnLayer):
        record = {'kind': layer.kind}
        if layer.kind == 'conv2d':
            record.update(stride=layer.stride, padding=layer.padding)
        record['aif'] = _aif_record(layer.aif)
        return _tensors(record, exact, weight=layer.weight, bias=layer.bias)
    raise ModelFileError(f"don't know how to serialize {type(layer).__name__}")


def _ann_layer(record: dict):
    kind = record['kind']
    if kind == 'linear':
        return Linear(decode_tensor(record, 'weight'), decode_tensor(record, 'bias'))
    if kind == 'conv2d':
        return Conv2d(
            decode_tensor(record, 'weight'), decode_tensor(record, 'bias'),
            stride=int(record.get('stride', 1)), padding=int(record.get('padding', 0)))
    if kind == 'batchnorm':
        return BatchNorm(
            gamma=decode_tensor(record, 'gamma'),
            beta=decode_tensor(record, 'beta'),
            running_mean=decode_tensor(record, 'running_mean'),
            running_var=decode_tensor(record, 'running_var'),
            eps=float(record.get('eps', 1e-5)),
        )
    if kind == 'pqa':
        return Pqa(QuantParams(
            int(record['levels']), float(record['theta']),
            float(record['alpha']), float(record['beta'])))
    return _passthrough_layer(record)


def _passthrough_layer(record: dict):
    kind = record['kind']
    if kind == 'avgpool2d':
        return AvgPool2d(int(record['window']), int(record.get('stride', 0)))
    if kind == 'flatten':
        return Flatten()
    raise ModelFileError(f"layer kind {kind!r} isn't allowed here")


def _snn_layer(record: dict):
    kind = record['kind']
    if kind not in ('linear', 'conv2d'):
        return _passthrough_layer(record)
    aif = record.get('aif')
    return SnnLayer(
        kind=kind,
        weight=decode_tensor(record, 'weight'),
        bias=decode_tensor(record, 'bias'),
        stride=int(record.get('stride', 1)),
        padding=int(record.get('padding', 0)),
        aif=None if aif is None else AifParams(
            theta_snn=float(aif['theta_snn']),
            c_neg=int(aif['c_neg']),
            c_pos=int(aif['c_pos']),
            v_init=float(aif['v_init']),
        ),
    )


#
# Models
#

def model_document(model: Model, exact: bool = False) -> dict:
    return {
        'format_version': FORMAT_VERSION,
        'model_kind': 'snn' if isinstance(model, SnnModel) else 'ann',
        'layers': [layer_record(layer, exact) for layer in model.layers],
    }


def save_model(model: Model, path: str, exact: bool = False) -> None:
    model.validate()
    document = model_document(model, exact)
    validate_document(document, 'model')
    with open(path, 'w') as f:
        json.dump(document, f)


def parse_model(document: dict) -> Model:
    """
    Builds a model from a parsed model document. Every layer is validated on
    its own first, and the failure names the layer.
    """
    validate_document(document, 'model')
    snn = document['model_kind'] == 'snn'
    build: Callable[[dict], Any] = _snn_layer if snn else _ann_layer

    layers = []
    for i, record in enumerate(document['layers']):
        try:
            layer = build(record)
            layer.validate()
        except (PolarSpikeError, ValueError, KeyError, TypeError) as e:
            raise ModelFileError(
                f"Error while parsing layer {i + 1} ({record.get('kind')!r}): {e}") from e
        layers.append(layer)

    model = SnnModel(layers) if snn else AnnModel(layers)
    model.validate()
    return model


def load_model(path: str) -> Model:
    return parse_model(_read_json(path))


def load_ann(path: str) -> AnnModel:
    model = load_model(path)
    if not isinstance(model, AnnModel):
        raise StructureError(f"{path} holds an SNN, expected an ANN (already converted?)")
    return model


def load_snn(path: str) -> SnnModel:
    model = load_model(path)
    if not isinstance(model, SnnModel):
        raise StructureError(f"{path} holds an ANN, expected a converted SNN")
    return model


def input_shape(model: Model) -> Optional[Tuple[int, ...]]:
    """Per-sample input shape when the first layer is linear, None otherwise."""
    first = model.layers[0]
    if isinstance(first, Linear) or (isinstance(first, SnnLayer) and first.kind == 'linear'):
        return (first.weight.shape[1],)
    return None


#
# CSV
#

def _float_text(v) -> str:
    return str(np.float32(v))


def write_samples(path: str, points: Tensor, labels: Optional[np.ndarray] = None,
                  header: bool = False) -> None:
    """One sample per row, flattened; an integer label column is appended when given."""
    points = np.asarray(points).reshape(len(points), -1)
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        if header:
            names = [f'x{j}' for j in range(points.shape[1])]
            writer.writerow(names + (['label'] if labels is not None else []))
        for i, row in enumerate(points):
            cells = [_float_text(v) for v in row]
            if labels is not None:
                cells.append(str(int(labels[i])))
            writer.writerow(cells)


def read_samples(
            path: str,
            header: bool = False,
            labels: bool = False,
            shape: Optional[Sequence[int]] = None,
        ) -> Tuple[Tensor, Optional[np.ndarray]]:
    """
    Reads a comma-separated sample file. With labels=True the last column is
    split off as integer labels. `shape` reshapes every sample.
    """
    try:
        table = np.loadtxt(path, delimiter=',', ndmin=2, skiprows=1 if header else 0,
                           dtype=np.float64)
    except ValueError as e:
        raise ModelFileError(f"{path}: {e}") from e

    label_column = None
    if labels:
        label_column = table[:, -1].astype(np.int64)
        table = table[:, :-1]
    points = table.astype(DTYPE)
    if shape:
        try:
            points = points.reshape((points.shape[0],) + tuple(shape))
        except ValueError as e:
            raise ModelFileError(
                f"{path}: samples of {table.shape[1]} values can't take shape {tuple(shape)}"
            ) from e
    return points, label_column


def write_rows(path: str, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def write_dict_rows(path: str, header: Sequence[str], rows: Sequence[dict]) -> None:
    write_rows(path, header, [[row[name] for name in header] for row in rows])


#
# JSON reports
#

def write_report(path: str, payload: dict, schema_name: str) -> dict:
    document = {'format_version': FORMAT_VERSION}
    document.update(payload)
    validate_document(document, schema_name)
    with open(path, 'w') as f:
        json.dump(document, f, indent=2)
    return document


def read_report(path: str, schema_name: str) -> dict:
    document = _read_json(path)
    validate_document(document, schema_name)
    return document


def run_report_payload(report, predictions: np.ndarray, record_spikes: bool = False) -> dict:
    counts = [int(np.abs(s).sum(dtype=np.int64)) for s in report.spikes]
    payload = {
        'T': report.T,
        'n_samples': report.n_samples,
        'labels': report.labels,
        'thresholds': [float(t) for t in report.thresholds],
        'spike_counts': counts,
        'total_spike_events': report.total_spike_events,
        'head_output': report.head_output.astype(np.float64).tolist(),
        'predictions': [int(p) for p in predictions],
    }
    if record_spikes:
        payload['spikes'] = [s.tolist() for s in report.spikes]
    return payload


def metrics_payload(command: str, metrics: Dict[str, float]) -> dict:
    return {'command': command, 'metrics': {k: float(v) for k, v in metrics.items()}}
