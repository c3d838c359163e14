"""Versioned JSON model files.

Floats are written with ``repr`` precision by the json module, so a
save/load cycle reproduces every array bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .core import SvgpModel, VariationalGaussian
from .dataio import NormalizationRecord
from .errors import ConfigError

FORMAT = "svgp-model"
VERSION = 1


class ModelFormatError(ConfigError):
    """The file is not a model file or has an unsupported version."""


@dataclass
class ModelFile:
    model: SvgpModel
    norm: NormalizationRecord
    feature_names: tuple
    target_name: str = "target"
    provenance: dict = field(default_factory=dict)


def save(path, mf: ModelFile) -> None:
    m = mf.model
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "kernel": kernels.to_dict(m.spec),
        "log_beta": m.log_beta,
        "Z": m.Z.tolist(),
        "q_mean": m.q.mean.tolist(),
        "q_chol": m.q.chol.tolist(),
        "n_total": int(m.n_total),
        "normalization": mf.norm.to_dict(),
        "feature_names": list(mf.feature_names),
        "target_name": mf.target_name,
        "provenance": mf.provenance,
    }
    Path(path).write_text(json.dumps(doc, indent=1, default=_jsonable))


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def load(path) -> ModelFile:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"model file {str(path)!r} does not exist") from None
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path} is not a model file: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ModelFormatError(f"{path} is not a {FORMAT} file")
    if doc.get("version") != VERSION:
        raise ModelFormatError(
            f"{path} has model format version {doc.get('version')}, expected {VERSION}"
        )
    spec = kernels.from_dict(doc["kernel"])
    q = VariationalGaussian(np.array(doc["q_mean"], float), np.array(doc["q_chol"], float))
    model = SvgpModel(spec, doc["log_beta"], np.array(doc["Z"], float), q, doc["n_total"])
    return ModelFile(
        model,
        NormalizationRecord.from_dict(doc["normalization"]),
        tuple(doc["feature_names"]),
        doc.get("target_name", "target"),
        doc.get("provenance", {}),
    )
