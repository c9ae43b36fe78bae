"""Dataset loaders, train/test splitting, model files and binary PPM/PGM images.

Model files are UTF-8 JSON; see ``docs/model_schema.md``. Floats are written
with Python's shortest round-trip representation, so a reloaded model
reproduces every parameter bit for bit.
"""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .codebook import Codebook
from .dataset import UNLABELED, LabeledDataset
from .errors import FormatError, InputError
from .kernels import KernelSpec
from .trainer import HashModel, TrainConfig

__all__ = [
    "LabeledDataset",
    "MODEL_FORMAT",
    "MODEL_VERSION",
    "load_csv",
    "save_csv",
    "load_idx",
    "split",
    "save_model",
    "load_model",
    "model_to_dict",
    "model_from_dict",
    "load_codes_csv",
    "save_codes_csv",
    "load_image_ppm",
    "save_image_ppm",
    "load_mask_pgm",
    "save_mask_pgm",
    "load_scribbles_pgm",
]

MODEL_FORMAT = "shl-model"
MODEL_VERSION = 1

SCRIBBLE_FOREGROUND = (254, 255)
SCRIBBLE_BACKGROUND = 127


# -- delimited text ---------------------------------------------------------

def _read_rows(path):
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                rows.append((lineno, [float(cell) for cell in row]))
            except ValueError:
                bad = next(c for c in row if not _is_float(c))
                raise FormatError(f"{path}:{lineno}: non-numeric cell {bad!r}") from None
    if not rows:
        raise InputError(f"{path}: file contains no data rows")
    width = len(rows[0][1])
    for lineno, values in rows:
        if len(values) != width:
            raise FormatError(f"{path}:{lineno}: expected {width} columns, found {len(values)}")
    return np.array([values for _, values in rows], dtype=float)


def _is_float(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_csv(path, label_column: int | None = None) -> LabeledDataset:
    """Read a header-less comma separated file.

    ``label_column`` (negative values count from the end) holds integer
    labels, ``-1`` meaning unlabeled. Without it every row is unlabeled.
    """
    table = _read_rows(path)
    if not np.all(np.isfinite(table)):
        raise FormatError(f"{path}: NaN or infinite values")
    if label_column is None:
        return LabeledDataset(table)
    ncol = table.shape[1]
    col = label_column + ncol if label_column < 0 else label_column
    if not 0 <= col < ncol:
        raise InputError(f"label column {label_column} out of range for {ncol} columns")
    labels = table[:, col]
    if not np.all(labels == np.round(labels)):
        raise FormatError(f"{path}: label column contains non-integer values")
    features = np.delete(table, col, axis=1)
    if features.shape[1] == 0:
        raise FormatError(f"{path}: no feature columns besides the labels")
    return LabeledDataset(features, labels.astype(np.int64))


def save_csv(data: LabeledDataset, path, with_labels: bool = True) -> None:
    """Write features (plus a trailing label column) at full precision."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for x, lab in zip(data.features, data.labels):
            row = [repr(float(v)) for v in x]
            if with_labels:
                row.append(str(int(lab)))
            w.writerow(row)


def save_codes_csv(codes, path, labels=None) -> None:
    """Rows of +-1 codes, optionally followed by an integer label column."""
    codes = np.asarray(codes)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for i, row in enumerate(codes):
            out = [str(int(v)) for v in row]
            if labels is not None:
                out.append(str(int(labels[i])))
            w.writerow(out)


def load_codes_csv(path, with_labels: bool = True):
    """Read a code file written by :func:`save_codes_csv`; returns ``(codes, labels)``."""
    table = _read_rows(path)
    if with_labels:
        if table.shape[1] < 2:
            raise FormatError(f"{path}: expected code columns followed by a label column")
        codes, labels = table[:, :-1], table[:, -1].astype(np.int64)
    else:
        codes, labels = table, None
    if not np.all(np.isin(codes, (-1.0, 1.0))):
        raise FormatError(f"{path}: code entries must be -1 or +1")
    return codes, labels


# -- idx --------------------------------------------------------------------

IDX_IMAGES = 0x00000803
IDX_LABELS = 0x00000801


def _read_idx(path, magic, ndim):
    raw = Path(path).read_bytes()
    if len(raw) < 4 + 4 * ndim:
        raise FormatError(f"{path}: truncated idx header")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise FormatError(f"{path}: bad magic 0x{found:08x}, expected 0x{magic:08x}")
    dims = struct.unpack(f">{ndim}I", raw[4 : 4 + 4 * ndim])
    body = raw[4 + 4 * ndim :]
    count = int(np.prod(dims))
    if len(body) != count:
        raise FormatError(f"{path}: expected {count} data bytes, found {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(dims)


def load_idx(images_path, labels_path=None) -> LabeledDataset:
    """Load unsigned-byte idx images (scaled to [0, 1]) and optional labels."""
    images = _read_idx(images_path, IDX_IMAGES, 3)
    X = images.reshape(images.shape[0], -1).astype(float) / 255.0
    if labels_path is None:
        return LabeledDataset(X)
    labels = _read_idx(labels_path, IDX_LABELS, 1)
    if labels.shape[0] != X.shape[0]:
        raise FormatError(f"{labels.shape[0]} labels for {X.shape[0]} images")
    return LabeledDataset(X, labels.astype(np.int64))


def split(data: LabeledDataset, train_n: int, seed: int = 0):
    """Seeded random split into ``train_n`` training rows and the rest."""
    n = len(data)
    if not 0 < int(train_n) < n:
        raise InputError(f"train_n must lie strictly between 0 and {n}")
    perm = np.random.default_rng(seed).permutation(n)
    return data.subset(perm[:train_n]), data.subset(perm[train_n:])


# -- model files ------------------------------------------------------------

def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def model_to_dict(model: HashModel) -> dict:
    opt = lambda a: None if a is None else np.asarray(a).tolist()  # noqa: E731
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config": model.config.to_dict(),
        "kernels": [k.to_string() for k in model.specs],
        "dim": int(model.support.shape[1]),
        "support": model.support.tolist(),
        "coef": model.coef.tolist(),
        "beta": model.beta.tolist(),
        "theta": model.theta.tolist(),
        "theta_next": model.theta_next.tolist(),
        "codebook": model.codebook.mu.tolist(),
        "loss_trace": [float(v) for v in model.loss_trace],
        "objective_trace": [float(v) for v in model.objective_trace],
        "feature_shift": opt(model.feature_shift),
        "feature_scale": opt(model.feature_scale),
        "train_decision": opt(model.train_decision),
        "info": _plain(model.info),
    }


def _array(d, key, ndim, allow_empty=False):
    try:
        a = np.array(d[key], dtype=float)
    except KeyError:
        raise FormatError(f"model file lacks field {key!r}") from None
    except (TypeError, ValueError):
        raise FormatError(f"field {key!r} is not a rectangular numeric array") from None
    if a.ndim != ndim and not (allow_empty and a.size == 0):
        raise FormatError(f"field {key!r} must be {ndim}-dimensional")
    return a


def model_from_dict(d: dict) -> HashModel:
    if not isinstance(d, dict) or d.get("format") != MODEL_FORMAT:
        raise FormatError("not an shl model file")
    if d.get("version") != MODEL_VERSION:
        raise FormatError(f"unsupported model version {d.get('version')!r}")
    try:
        config = TrainConfig.from_dict(d["config"])
        specs = tuple(KernelSpec.from_string(s) for s in d["kernels"])
    except (KeyError, TypeError, InputError) as exc:
        raise FormatError(f"bad config section: {exc}") from None
    coef = _array(d, "coef", 2, allow_empty=True)
    support = _array(d, "support", 2, allow_empty=True)
    beta = _array(d, "beta", 1)
    theta = _array(d, "theta", 2)
    theta_next = _array(d, "theta_next", 2)
    mu = _array(d, "codebook", 3)
    B, M = beta.shape[0], len(specs)
    if coef.size == 0:
        coef = np.zeros((B, 0))
        support = np.zeros((0, int(d.get("dim", 0))))
    if coef.shape != (B, support.shape[0]) or theta.shape != (B, M) or theta_next.shape != (B, M):
        raise FormatError("inconsistent array shapes in model file")
    if mu.shape[2] != B:
        raise FormatError("codebook bit length differs from the number of bits")
    shift = d.get("feature_shift")
    scale = d.get("feature_scale")
    decision = d.get("train_decision")
    return HashModel(
        config=config,
        specs=specs,
        support=support,
        coef=coef,
        beta=beta,
        theta=theta,
        theta_next=theta_next,
        codebook=Codebook(mu),
        loss_trace=[float(v) for v in d.get("loss_trace", [])],
        objective_trace=[float(v) for v in d.get("objective_trace", [])],
        feature_shift=None if shift is None else np.array(shift, dtype=float),
        feature_scale=None if scale is None else np.array(scale, dtype=float),
        train_decision=None if decision is None else np.array(decision, dtype=float),
        info=d.get("info", {}),
    )


def dumps_model(model: HashModel) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True, allow_nan=False) + "\n"


def save_model(model: HashModel, path) -> None:
    """Write ``model`` as versioned JSON."""
    Path(path).write_text(dumps_model(model))


def load_model(path) -> HashModel:
    """Read a model written by :func:`save_model`; raise :class:`FormatError` on any defect."""
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from None
    except UnicodeDecodeError:
        raise FormatError(f"{path}: not UTF-8 text") from None
    return model_from_dict(d)


# -- PPM / PGM ----------------------------------------------------------------

def _parse_pnm(path, magic: bytes):
    raw = Path(path).read_bytes()
    if raw[:2] != magic:
        raise FormatError(f"{path}: expected a binary {magic.decode()} header")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        token = raw[start:pos]
        if not token.isdigit():
            raise FormatError(f"{path}: malformed header")
        fields.append(int(token))
    pos += 1  # single whitespace byte before the raster
    width, height, maxval = fields
    if maxval != 255:
        raise FormatError(f"{path}: only maxval 255 is supported")
    return width, height, raw[pos:]


def load_image_ppm(path) -> np.ndarray:
    """Binary P6 image as an ``(H, W, 3)`` array of values in [0, 1].

    ``image.reshape(-1, 3)`` gives one feature row per pixel in row-major order.
    """
    w, h, body = _parse_pnm(path, b"P6")
    if len(body) != w * h * 3:
        raise FormatError(f"{path}: expected {w * h * 3} raster bytes, found {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3).astype(float) / 255.0


def save_image_ppm(image, path) -> None:
    img = np.asarray(image)
    if img.dtype.kind == "f":
        img = np.rint(np.clip(img, 0.0, 1.0) * 255.0)
    img = img.astype(np.uint8)
    if img.ndim != 3 or img.shape[2] != 3:
        raise InputError("image must have shape (H, W, 3)")
    h, w, _ = img.shape
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (w, h) + img.tobytes())


def load_mask_pgm(path) -> np.ndarray:
    """Binary P5 image as an ``(H, W)`` uint8 array."""
    w, h, body = _parse_pnm(path, b"P5")
    if len(body) != w * h:
        raise FormatError(f"{path}: expected {w * h} raster bytes, found {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w).copy()


def save_mask_pgm(mask, path) -> None:
    """Write a mask as P5; nonzero/True pixels become 255 (foreground), others 0.

    A uint8 array is written verbatim.
    """
    m = np.asarray(mask)
    if m.ndim != 2:
        raise InputError("mask must be 2-d")
    if m.dtype != np.uint8:
        m = np.where(m != 0, 255, 0).astype(np.uint8)
    h, w = m.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + m.tobytes())


def load_scribbles_pgm(path) -> np.ndarray:
    """Scribble file as per-pixel labels: 1 foreground, 0 background, -1 unlabeled.

    Gray 254 (or 255) marks foreground, 127 background and 0 unlabeled.
    """
    raw = load_mask_pgm(path)
    labels = np.full(raw.shape, UNLABELED, dtype=np.int64)
    labels[np.isin(raw, SCRIBBLE_FOREGROUND)] = 1
    labels[raw == SCRIBBLE_BACKGROUND] = 0
    known = np.isin(raw, SCRIBBLE_FOREGROUND + (SCRIBBLE_BACKGROUND, 0))
    if not known.all():
        bad = np.unique(raw[~known])[:5].tolist()
        raise FormatError(f"{path}: unexpected scribble gray levels {bad}")
    return labels
