"""Foreground/background segmentation from user scribbles.

Pixels are points in RGB space. Scribbled pixels are labeled samples
(0 background, 1 foreground), every other pixel is unlabeled, and a
two-class single-codeword hash model is trained semi-supervised. Each pixel
then takes the class of its nearest codeword.
"""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from .dataset import UNLABELED, LabeledDataset
from .errors import InputError
from .trainer import HashModel, TrainConfig, classify, train

__all__ = ["segment_image", "MAX_TRAIN_PIXELS"]

MAX_TRAIN_PIXELS = 4096


def _training_rows(labels, max_train, rng):
    labeled = np.flatnonzero(labels != UNLABELED)
    unlabeled = np.flatnonzero(labels == UNLABELED)
    if labeled.size + unlabeled.size <= max_train:
        return np.concatenate([labeled, unlabeled])
    if labeled.size > max_train:
        keep = []
        for cls in (0, 1):
            rows = labeled[labels[labeled] == cls]
            share = max(1, int(round(max_train * rows.size / labeled.size)))
            keep.append(np.sort(rng.choice(rows, size=min(share, rows.size), replace=False)))
        return np.concatenate(keep)
    room = max_train - labeled.size
    picked = np.sort(rng.choice(unlabeled, size=room, replace=False))
    return np.concatenate([labeled, picked])


def segment_image(
    image,
    scribbles,
    config: TrainConfig | None = None,
    max_train: int = MAX_TRAIN_PIXELS,
) -> tuple[np.ndarray, HashModel]:
    """Segment an ``(H, W, 3)`` image given per-pixel scribble labels.

    Parameters
    ----------
    image : array (H, W, 3)
        RGB values, typically in [0, 1].
    scribbles : int array (H, W)
        1 foreground, 0 background, -1 unlabeled.
    config : TrainConfig, optional
        Defaults to 5 bits, one codeword per class. ``n_classes`` and
        ``n_slots`` are forced to 2 and 1.
    max_train : int
        Cap on training pixels; unlabeled pixels are subsampled (seeded) to fit.

    Returns
    -------
    mask : bool array (H, W)
        True for foreground. Scribbled pixels keep their given label.
    model : HashModel
    """
    image = np.asarray(image, dtype=float)
    scribbles = np.asarray(scribbles)
    if image.ndim != 3 or image.shape[2] != 3:
        raise InputError("image must have shape (H, W, 3)")
    if scribbles.shape != image.shape[:2]:
        raise InputError(f"scribbles {scribbles.shape} do not match image {image.shape[:2]}")
    labels = scribbles.astype(np.int64).ravel()
    if not np.all(np.isin(labels, (UNLABELED, 0, 1))):
        raise InputError("scribble labels must be -1, 0 or 1")
    if not (np.any(labels == 0) and np.any(labels == 1)):
        raise InputError("both foreground and background must be scribbled")

    config = TrainConfig(n_bits=5) if config is None else config
    config = replace(config, n_classes=2, n_slots=1)
    pixels = image.reshape(-1, 3)
    rng = np.random.default_rng(config.seed)
    rows = _training_rows(labels, int(max_train), rng)
    model = train(config, LabeledDataset(pixels[rows], labels[rows]))

    predicted = classify(model, pixels)
    given = labels != UNLABELED
    predicted[given] = labels[given]
    return predicted.reshape(scribbles.shape) == 1, model
