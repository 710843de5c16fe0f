"""Trained model state and its on-disk directory format.

A bundle directory holds ``header.json`` (format version, configuration,
label dictionary, array shapes) and one raw little-endian binary file per
array, row-major. Floating arrays are float64 and integer arrays int64.
"""
import json
import os
from dataclasses import dataclass

import numpy as np

from sceneparse.classify import AccuracyTable
from sceneparse.config import Config
from sceneparse.errors import BundleError
from sceneparse.lda import LdaModel
from sceneparse.retrieval import TrainingIndex
from sceneparse.smoothing import CooccurrenceTable

FORMAT_NAME = "sceneparse-bundle"
FORMAT_VERSION = 1
HEADER = "header.json"

_DTYPES = {"f8": np.dtype("<f8"), "i8": np.dtype("<i8")}


@dataclass
class ModelBundle:
    config: Config
    labels: list
    lda: LdaModel
    index: TrainingIndex
    accuracy: AccuracyTable
    cooccurrence: CooccurrenceTable

    def __post_init__(self):
        n = len(self.labels)
        if self.index.n_labels != n or self.cooccurrence.P.shape != (n, n):
            raise BundleError("label dictionary does not match the stored tables")
        if self.accuracy.correct.shape[0] != self.index.n_images:
            raise BundleError("accuracy table rows do not match the training images")
        if self.lda.classes.size and self.lda.classes.max() >= n:
            raise BundleError("LDA class id out of range")
        if self.index.features.shape[1] != self.lda.output_dim:
            raise BundleError("index dimension does not match the LDA projection")

    @property
    def n_labels(self):
        return len(self.labels)

    def _arrays(self):
        return {
            "lda_W": self.lda.W,
            "lda_mean": self.lda.feature_mean,
            "lda_classes": self.lda.classes,
            "lda_eigenvalues": self.lda.eigenvalues,
            "index_features": self.index.features,
            "index_image_of": self.index.image_of,
            "index_labels": self.index.labels,
            "accuracy_correct": self.accuracy.correct,
            "accuracy_total": self.accuracy.total,
            "accuracy_valid": self.accuracy.valid.astype(np.int64),
            "cooccurrence_P": self.cooccurrence.P,
            "cooccurrence_counts": self.cooccurrence.counts,
        }

    def save(self, path):
        """Write the bundle directory, creating it if needed."""
        os.makedirs(path, exist_ok=True)
        specs = {}
        for name, arr in self._arrays().items():
            arr = np.asarray(arr)
            code = "i8" if np.issubdtype(arr.dtype, np.integer) else "f8"
            data = np.ascontiguousarray(arr, dtype=_DTYPES[code])
            fname = f"{name}.{code}"
            with open(os.path.join(path, fname), "wb") as fh:
                fh.write(data.tobytes(order="C"))
            specs[name] = {"file": fname, "dtype": data.dtype.str, "shape": list(data.shape)}
        header = {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "labels": list(self.labels),
            "lda": {"ridge": self.lda.ridge},
            "index": {
                "n_images": self.index.n_images,
                "n_labels": self.index.n_labels,
                "image_names": list(self.index.image_names),
            },
            "arrays": specs,
        }
        with open(os.path.join(path, HEADER), "w", encoding="utf-8") as fh:
            json.dump(header, fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        """Read a bundle written by :meth:`save`.

        Raises
        ------
        BundleError
            Missing or malformed files, or a format version this reader does
            not understand.
        """
        try:
            with open(os.path.join(path, HEADER), encoding="utf-8") as fh:
                header = json.load(fh)
        except (OSError, ValueError) as exc:
            raise BundleError(f"cannot read bundle header in {path}: {exc}") from exc
        if header.get("format") != FORMAT_NAME:
            raise BundleError(f"{path} is not a model bundle")
        if header.get("version") != FORMAT_VERSION:
            raise BundleError(
                f"bundle format version {header.get('version')} is not supported (expected {FORMAT_VERSION})"
            )
        arrays = {}
        for name, spec in header["arrays"].items():
            dtype = np.dtype(spec["dtype"])
            if dtype not in _DTYPES.values():
                raise BundleError(f"unsupported dtype {spec['dtype']} for {name}")
            fpath = os.path.join(path, spec["file"])
            try:
                raw = np.fromfile(fpath, dtype=dtype)
            except OSError as exc:
                raise BundleError(f"cannot read {fpath}: {exc}") from exc
            shape = tuple(spec["shape"])
            if raw.size != int(np.prod(shape)):
                raise BundleError(f"{fpath} holds {raw.size} values, expected shape {shape}")
            arrays[name] = raw.reshape(shape).astype(dtype.newbyteorder("="))
        try:
            cfg = Config.from_dict(header["config"])
            idx = header["index"]
            return cls(
                config=cfg,
                labels=list(header["labels"]),
                lda=LdaModel(
                    W=arrays["lda_W"],
                    feature_mean=arrays["lda_mean"],
                    classes=arrays["lda_classes"],
                    ridge=float(header["lda"]["ridge"]),
                    eigenvalues=arrays["lda_eigenvalues"],
                ),
                index=TrainingIndex(
                    arrays["index_features"],
                    arrays["index_image_of"],
                    arrays["index_labels"],
                    int(idx["n_images"]),
                    int(idx["n_labels"]),
                    tuple(idx["image_names"]),
                ),
                accuracy=AccuracyTable(
                    arrays["accuracy_correct"], arrays["accuracy_total"], arrays["accuracy_valid"].astype(bool)
                ),
                cooccurrence=CooccurrenceTable(arrays["cooccurrence_P"], arrays["cooccurrence_counts"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise BundleError(f"malformed bundle {path}: {exc}") from exc
