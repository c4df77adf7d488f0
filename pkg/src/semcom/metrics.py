"""Reconstruction and interpretation metrics: PSNR, SSIM, accuracy, misleading rate.

All functions are pure numpy. SSIM is computed with an 8x8 uniform window
(small enough for 28x28 inputs), C1=(0.01)^2, C2=(0.03)^2 on unit dynamic
range, biased (1/N) moment estimators, averaged over all valid window
positions and channels.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, UndefinedMetric

PSNR_CAP_DB = 100.0
SSIM_WINDOW = 8
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


def psnr(x, y):
    """Peak signal-to-noise ratio in dB for images in [0, 1] (MAX=1).

    Identical images return the cap value 100 dB.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeError(f"psnr shapes differ: {x.shape} vs {y.shape}")
    mse = np.mean((x - y) ** 2)
    if mse == 0.0:
        return PSNR_CAP_DB
    return float(min(10.0 * np.log10(1.0 / mse), PSNR_CAP_DB))


def _window_sums(img, w):
    """Sliding-window sums over the last two axes via integral images."""
    pad = np.zeros((img.shape[0] + 1, img.shape[1] + 1), dtype=np.float64)
    pad[1:, 1:] = np.cumsum(np.cumsum(img, axis=0), axis=1)
    return (
        pad[w:, w:] - pad[:-w, w:] - pad[w:, :-w] + pad[:-w, :-w]
    )


def _ssim_channel(x, y, w):
    n = w * w
    mx = _window_sums(x, w) / n
    my = _window_sums(y, w) / n
    mxx = _window_sums(x * x, w) / n
    myy = _window_sums(y * y, w) / n
    mxy = _window_sums(x * y, w) / n
    vx = mxx - mx * mx
    vy = myy - my * my
    cov = mxy - mx * my
    num = (2 * mx * my + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2)
    return num / den


def ssim(x, y, window=SSIM_WINDOW):
    """Mean structural similarity between two (c, h, w) images in [0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeError(f"ssim shapes differ: {x.shape} vs {y.shape}")
    if x.ndim == 2:
        x = x[None]
        y = y[None]
    if x.ndim != 3:
        raise ShapeError(f"ssim expects (c, h, w), got {x.shape}")
    if x.shape[1] < window or x.shape[2] < window:
        raise ShapeError(f"{window}x{window} window does not fit image {x.shape}")
    maps = [_ssim_channel(x[c], y[c], window) for c in range(x.shape[0])]
    return float(np.mean(maps))


def per_class_accuracy(preds, truth, num_classes=10):
    """Per-class accuracy vector (NaN for absent classes) and mean over present ones."""
    preds = np.asarray(preds)
    truth = np.asarray(truth)
    if preds.shape != truth.shape:
        raise ShapeError(f"preds {preds.shape} vs truth {truth.shape}")
    acc = np.full(num_classes, np.nan)
    for c in range(num_classes):
        mask = truth == c
        if mask.any():
            acc[c] = float(np.mean(preds[mask] == c))
    mean = float(np.nanmean(acc)) if not np.all(np.isnan(acc)) else float("nan")
    return acc, mean


def misleading_rate(preds, truth, forced_class):
    """Fraction of samples with true class != forced_class predicted as forced_class."""
    preds = np.asarray(preds)
    truth = np.asarray(truth)
    if preds.shape != truth.shape:
        raise ShapeError(f"preds {preds.shape} vs truth {truth.shape}")
    mask = truth != forced_class
    if not mask.any():
        raise UndefinedMetric(
            f"no samples with true class != {forced_class}; rate undefined"
        )
    return float(np.mean(preds[mask] == forced_class))


@dataclass
class EvalReport:
    """Per-condition evaluation summary, grouped by true class."""

    condition: str
    snr_db: float
    psr_db: float | None
    per_class_accuracy: np.ndarray
    mean_accuracy: float
    per_class_psnr: np.ndarray
    mean_psnr: float
    per_class_ssim: np.ndarray
    mean_ssim: float
    misleading_rate: float | None = None
    num_classes: int = field(default=10)

    def rows(self):
        """One CSV row per class plus a summary row (class == 'mean')."""
        out = []
        for c in range(self.num_classes):
            out.append({
                "condition": self.condition,
                "class": str(c),
                "accuracy": _fmt(self.per_class_accuracy[c]),
                "psnr": _fmt(self.per_class_psnr[c]),
                "ssim": _fmt(self.per_class_ssim[c]),
                "misleading_rate": "",
                "snr_db": _fmt(self.snr_db),
                "psr_db": _fmt(self.psr_db),
            })
        out.append({
            "condition": self.condition,
            "class": "mean",
            "accuracy": _fmt(self.mean_accuracy),
            "psnr": _fmt(self.mean_psnr),
            "ssim": _fmt(self.mean_ssim),
            "misleading_rate": _fmt(self.misleading_rate),
            "snr_db": _fmt(self.snr_db),
            "psr_db": _fmt(self.psr_db),
        })
        return out


CSV_COLUMNS = [
    "condition", "class", "accuracy", "psnr", "ssim",
    "misleading_rate", "snr_db", "psr_db",
]


def _fmt(value):
    if value is None:
        return ""
    value = float(value)
    if np.isnan(value):
        return ""
    return f"{value:.6f}"


def evaluate_batch(truth, preds, originals, reconstructions, num_classes=10):
    """Group accuracy/PSNR/SSIM by true class over one evaluated split."""
    truth = np.asarray(truth)
    preds = np.asarray(preds)
    acc, mean_acc = per_class_accuracy(preds, truth, num_classes)
    class_psnr = np.full(num_classes, np.nan)
    class_ssim = np.full(num_classes, np.nan)
    for c in range(num_classes):
        idx = np.flatnonzero(truth == c)
        if idx.size == 0:
            continue
        class_psnr[c] = np.mean([psnr(originals[i], reconstructions[i]) for i in idx])
        class_ssim[c] = np.mean([ssim(originals[i], reconstructions[i]) for i in idx])
    return {
        "per_class_accuracy": acc,
        "mean_accuracy": mean_acc,
        "per_class_psnr": class_psnr,
        "mean_psnr": float(np.nanmean(class_psnr)),
        "per_class_ssim": class_ssim,
        "mean_ssim": float(np.nanmean(class_ssim)),
    }
