"""File formats: dataset CSV and the self-describing model file.

Dataset CSV: header ``x1..xd,a,y[,w]``, UTF-8, '.' decimal separator.
Model file: JSON with an explicit ``format_version``; floats are written
with Python's shortest round-trip repr, so a save/load cycle reproduces
predictions bit for bit.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .types import (
    ConstantThreshold,
    Dataset,
    IntervalPolicyModel,
    KernelExpansion,
    KernelSpec,
    PolynomialThreshold,
    ThresholdSpec,
    ValidationError,
    validate_dataset,
)

MODEL_FORMAT_VERSION = 1

PathLike = Union[str, Path]


def write_dataset_csv(data: Dataset, path: PathLike) -> None:
    data = validate_dataset(data)
    header = [f"x{j + 1}" for j in range(data.d)] + ["a", "y"]
    if data.weights is not None:
        header.append("w")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(data.n):
            row = [repr(v) for v in data.x[i]] + [repr(data.a[i]), repr(data.y[i])]
            if data.weights is not None:
                row.append(repr(data.weights[i]))
            writer.writerow(row)


def read_dataset_csv(
    path: PathLike, dose_bounds: Optional[tuple[float, float]] = None
) -> Dataset:
    """Load a dataset CSV; bounds default to the observed dose range."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    header = [h.strip() for h in header]
    has_w = header[-1] == "w"
    core = header[:-1] if has_w else header
    if len(core) < 3 or core[-2] != "a" or core[-1] != "y":
        raise ValidationError(f"{path}: expected header x1..xd,a,y[,w], got {header}")
    d = len(core) - 2
    expected = [f"x{j + 1}" for j in range(d)]
    if core[:-2] != expected:
        raise ValidationError(f"{path}: covariate columns must be named x1..x{d}")
    try:
        values = np.array([[float(v) for v in row] for row in rows], dtype=float)
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric cell ({exc})") from None
    if values.ndim != 2 or values.shape[1] != len(header):
        raise ValidationError(f"{path}: ragged rows")
    x = values[:, :d]
    a = values[:, d]
    y = values[:, d + 1]
    w = values[:, d + 2] if has_w else None
    if dose_bounds is None:
        dose_bounds = (float(a.min()), float(a.max()))
    return validate_dataset(Dataset(x, a, y, w, dose_bounds))


# ---------------------------------------------------------------------------
# Model serialization
# ---------------------------------------------------------------------------

def _kernel_to_obj(spec: KernelSpec) -> dict:
    return {"kind": spec.kind, "gamma": spec.gamma}


def _kernel_from_obj(obj: dict) -> KernelSpec:
    return KernelSpec(obj["kind"], obj.get("gamma"))


def _threshold_to_obj(spec: ThresholdSpec) -> dict:
    if isinstance(spec, ConstantThreshold):
        return {"type": "constant", "value": spec.value}
    return {
        "type": "polynomial",
        "intercept": spec.intercept,
        "linear": list(map(float, spec.linear)),
        "square": list(map(float, spec.square)),
    }


def _threshold_from_obj(obj: dict) -> ThresholdSpec:
    if obj["type"] == "constant":
        return ConstantThreshold(float(obj["value"]))
    if obj["type"] == "polynomial":
        return PolynomialThreshold(
            float(obj["intercept"]),
            np.asarray(obj["linear"], dtype=float),
            np.asarray(obj["square"], dtype=float),
        )
    raise ValidationError(f"unknown threshold type {obj.get('type')!r}")


def _expansion_to_obj(exp: Optional[KernelExpansion]) -> Optional[dict]:
    if exp is None:
        return None
    return {
        "kernel": _kernel_to_obj(exp.kernel),
        "coef": list(map(float, exp.coef)),
        "intercept": exp.intercept,
        "train_x": [list(map(float, row)) for row in exp.train_x],
    }


def _expansion_from_obj(obj: Optional[dict]) -> Optional[KernelExpansion]:
    if obj is None:
        return None
    return KernelExpansion(
        _kernel_from_obj(obj["kernel"]),
        np.asarray(obj["coef"], dtype=float),
        float(obj["intercept"]),
        np.asarray(obj["train_x"], dtype=float),
    )


def model_to_json(model: IntervalPolicyModel) -> str:
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": "interval-policy",
        "side": model.side,
        "alpha": model.alpha,
        "dose_bounds": [model.dose_bounds[0], model.dose_bounds[1]],
        "threshold": _threshold_to_obj(model.threshold),
        "lower": _expansion_to_obj(model.lower),
        "upper": _expansion_to_obj(model.upper),
    }
    return json.dumps(payload, indent=2)


def model_from_json(text: str) -> IntervalPolicyModel:
    payload = json.loads(text)
    if payload.get("kind") != "interval-policy":
        raise ValidationError("not an interval policy model file")
    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValidationError(f"unsupported model format_version {version!r}")
    return IntervalPolicyModel(
        side=payload["side"],
        alpha=float(payload["alpha"]),
        dose_bounds=(float(payload["dose_bounds"][0]), float(payload["dose_bounds"][1])),
        threshold=_threshold_from_obj(payload["threshold"]),
        lower=_expansion_from_obj(payload["lower"]),
        upper=_expansion_from_obj(payload["upper"]),
    )


def save_model(model: IntervalPolicyModel, path: PathLike) -> None:
    Path(path).write_text(model_to_json(model), encoding="utf-8")


def load_model(path: PathLike) -> IntervalPolicyModel:
    return model_from_json(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Indirect classifier serialization (shares the CLI fit/predict surface)
# ---------------------------------------------------------------------------

def indirect_to_json(model) -> str:
    from .indirect import IndirectModel

    assert isinstance(model, IndirectModel)
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": "indirect-classifier",
        "coef": list(map(float, model.coef)),
        "intercept": model.intercept,
        "feature_mean": list(map(float, model.feature_mean)),
        "feature_sd": list(map(float, model.feature_sd)),
        "kept": list(map(int, model.kept)),
        "dose_bounds": [model.dose_bounds[0], model.dose_bounds[1]],
        "alpha": model.alpha,
        "l1_penalty": model.l1_penalty,
        "n_iters": model.n_iters,
        "grad_norm": model.grad_norm,
    }
    return json.dumps(payload, indent=2)


def indirect_from_json(text: str):
    from .indirect import IndirectModel

    payload = json.loads(text)
    if payload.get("kind") != "indirect-classifier":
        raise ValidationError("not an indirect classifier file")
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValidationError(f"unsupported format_version {payload.get('format_version')!r}")
    return IndirectModel(
        coef=np.asarray(payload["coef"], dtype=float),
        intercept=float(payload["intercept"]),
        feature_mean=np.asarray(payload["feature_mean"], dtype=float),
        feature_sd=np.asarray(payload["feature_sd"], dtype=float),
        kept=np.asarray(payload["kept"], dtype=int),
        dose_bounds=(float(payload["dose_bounds"][0]), float(payload["dose_bounds"][1])),
        alpha=float(payload["alpha"]),
        l1_penalty=float(payload["l1_penalty"]),
        n_iters=int(payload["n_iters"]),
        grad_norm=float(payload["grad_norm"]),
    )


def save_any_model(model, path: PathLike) -> None:
    from .indirect import IndirectModel

    if isinstance(model, IndirectModel):
        Path(path).write_text(indirect_to_json(model), encoding="utf-8")
    else:
        save_model(model, path)


def load_any_model(path: PathLike):
    text = Path(path).read_text(encoding="utf-8")
    kind = json.loads(text).get("kind")
    if kind == "interval-policy":
        return model_from_json(text)
    if kind == "indirect-classifier":
        return indirect_from_json(text)
    raise ValidationError(f"unknown model kind {kind!r}")
