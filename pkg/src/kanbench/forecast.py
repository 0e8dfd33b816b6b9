"""Iterative multi-horizon forecasting shared by both model families.

One-step models are rolled forward: each predicted scaled close is written
into a pseudo-row (a copy of the window's last row with close and adj_close
overwritten) appended to the window, and the window slides one step. The
sequence model consumes the (L, F) window directly; the spline network
flattens it row-major. Predictions are never clamped — spline-domain
clamping already handles out-of-range inputs on the KAN side.
"""

from dataclasses import dataclass

import numpy as np

from .data import ADJ_CLOSE, CLOSE


@dataclass
class ForecastTrace:
    horizon: int
    predictions: np.ndarray  # (H,) scaled closes
    actual: np.ndarray | None  # (H,) scaled ground truth when known
    model_tag: str = ""

    def __post_init__(self):
        self.predictions = np.asarray(self.predictions, dtype=np.float64)
        if self.predictions.shape != (self.horizon,):
            raise ValueError(
                f"predictions shape {self.predictions.shape} != ({self.horizon},)"
            )
        if not np.all(np.isfinite(self.predictions)):
            raise ValueError("predictions must be finite")
        if self.actual is not None:
            self.actual = np.asarray(self.actual, dtype=np.float64)
            if self.actual.shape != (self.horizon,):
                raise ValueError(f"actual shape {self.actual.shape} != ({self.horizon},)")


def _close_columns(n_features: int, close_col, adj_close_col):
    """Resolve which columns the prediction overwrites in pseudo-rows."""
    if close_col is None:
        close_col = 0 if n_features == 1 else CLOSE
    if adj_close_col is None and n_features > max(CLOSE, ADJ_CLOSE):
        adj_close_col = ADJ_CLOSE
    if not 0 <= close_col < n_features:
        raise ValueError(f"close_col {close_col} out of range for {n_features} features")
    if adj_close_col is not None and not 0 <= adj_close_col < n_features:
        raise ValueError(f"adj_close_col {adj_close_col} out of range")
    return close_col, adj_close_col


def iterative_forecast(
    model,
    seed_window,
    horizon: int,
    actual=None,
    model_tag: str = "",
    close_col: int | None = None,
    adj_close_col: int | None = None,
) -> ForecastTrace:
    """Chain one-step predictions H times from an (L, F) scaled window."""
    window = np.array(seed_window, dtype=np.float64)
    if window.ndim != 2:
        raise ValueError(f"seed window must be 2-D (L, F), got shape {window.shape}")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    close_col, adj_close_col = _close_columns(window.shape[1], close_col, adj_close_col)

    preds = np.empty(horizon)
    for step in range(horizon):
        p = model.predict_window(window)
        if not np.isfinite(p):
            raise RuntimeError(f"non-finite prediction at step {step + 1}")
        preds[step] = p
        row = window[-1].copy()
        row[close_col] = p
        if adj_close_col is not None:
            row[adj_close_col] = p
        window = np.vstack([window[1:], row])
    return ForecastTrace(horizon, preds, actual, model_tag)


def iterative_forecast_batch(
    model,
    seed_windows,
    horizon: int,
    close_col: int | None = None,
    adj_close_col: int | None = None,
) -> np.ndarray:
    """Roll many (L, F) windows forward at once; returns (B, H) predictions."""
    windows = np.array(seed_windows, dtype=np.float64)
    if windows.ndim != 3:
        raise ValueError(f"seed windows must be 3-D (B, L, F), got shape {windows.shape}")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    close_col, adj_close_col = _close_columns(windows.shape[2], close_col, adj_close_col)

    preds = np.empty((windows.shape[0], horizon))
    for step in range(horizon):
        p = model.predict_window_batch(windows)
        if not np.all(np.isfinite(p)):
            raise RuntimeError(f"non-finite prediction at step {step + 1}")
        preds[:, step] = p
        rows = windows[:, -1, :].copy()
        rows[:, close_col] = p
        if adj_close_col is not None:
            rows[:, adj_close_col] = p
        windows = np.concatenate([windows[:, 1:, :], rows[:, None, :]], axis=1)
    return preds


def write_trace_csv(trace: ForecastTrace, path, scaler=None, price_feature="close") -> None:
    """Serialize a trace: step, predicted_scaled, predicted_price, actual_price."""
    from .data import scaler_inverse

    pred_price = (
        scaler_inverse(scaler, trace.predictions, price_feature) if scaler else None
    )
    actual_price = (
        scaler_inverse(scaler, trace.actual, price_feature)
        if scaler is not None and trace.actual is not None
        else None
    )
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("step,predicted_scaled,predicted_price,actual_price\n")
        for i in range(trace.horizon):
            cells = [
                str(i + 1),
                repr(float(trace.predictions[i])),
                repr(float(pred_price[i])) if pred_price is not None else "",
                repr(float(actual_price[i])) if actual_price is not None else "",
            ]
            fh.write(",".join(cells) + "\n")
