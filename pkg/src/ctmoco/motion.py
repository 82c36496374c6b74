"""Band-limited random motion synthesis and the Akima-spline motion model.

A motion curve is a (6, N_p) array of per-projection rigid parameters:
rows 0-2 are translations in mm, rows 3-5 rotations in degrees. Frequencies
are expressed as fractions of the projection sampling rate, so the Nyquist
bound for per-projection sampling is 0.5.

The spline model places N_n nodes equidistantly over [0, N_p - 1] with the
first and last node on the first and last projection; it has exactly
6 * N_n free parameters.
"""

from __future__ import annotations

import io
import json
import csv
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .validation import check_condition, check_positive

__all__ = [
    "SplineMotionModel",
    "sample_bandlimited",
    "sample_motion_curve",
    "cutoff_schedule",
    "akima_slopes",
    "akima_eval",
    "spline_to_curve",
    "nyquist_limit",
    "fit_spline_least_squares",
    "curve_to_json",
    "curve_from_json",
    "curve_to_csv",
    "curve_from_csv",
]

AXIS_NAMES = ("tx_mm", "ty_mm", "tz_mm", "rx_deg", "ry_deg", "rz_deg")


def check_cutoff(f_c: float) -> float:
    """Validate a normalized cutoff frequency (fraction of the sampling rate)."""
    if not 0.0 < f_c <= 0.5:
        raise ValueError(f"cutoff frequency must lie in (0, 0.5], got {f_c!r}")
    return float(f_c)


# ---------------------------------------------------------------------------
# Band-limited random signals
# ---------------------------------------------------------------------------

def bandlimit(signal: np.ndarray, f_c: float) -> np.ndarray:
    """Zero all DFT bins of `signal` with normalized frequency > f_c.

    Bin k of an N-point DFT has normalized frequency k / N; the comparison
    is strict, and the DC bin is always retained.
    """
    signal = np.asarray(signal, dtype=float)
    n = signal.shape[-1]
    spectrum = np.fft.rfft(signal)
    freqs = np.fft.rfftfreq(n)
    spectrum[..., freqs > f_c] = 0.0
    return np.fft.irfft(spectrum, n=n)


def sample_bandlimited(
    seed: int, n_samples: int, f_c: float, amplitude: float
) -> np.ndarray:
    """Seeded random signal, low-passed at `f_c` and rescaled to `amplitude`.

    Draws i.i.d. uniform(-1, 1) samples, band-limits them in Fourier domain,
    and rescales so max |x| equals `amplitude` exactly. A band-limited signal
    that is identically zero is returned as-is. Deterministic for fixed seed.
    """
    check_condition(n_samples >= 2, "n_samples must be >= 2")
    check_positive(amplitude, "amplitude")
    check_cutoff(f_c)
    rng = np.random.default_rng(seed)
    raw = rng.uniform(-1.0, 1.0, size=n_samples)
    limited = bandlimit(raw, f_c)
    peak = np.max(np.abs(limited))
    if peak == 0.0:
        return limited
    return limited * (amplitude / peak)


def sample_motion_curve(
    seed: int,
    n_projections: int,
    f_c: float,
    amp_translation_mm: float = 5.0,
    amp_rotation_deg: float = 5.0,
) -> np.ndarray:
    """Six independent band-limited signals as a (6, N_p) motion curve.

    Each axis uses its own child seed derived from `seed`, so axes are
    independent but the whole curve is reproducible. `seed` may be an int
    or a numpy SeedSequence.
    """
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    child_seeds = seed.spawn(6)
    curve = np.empty((6, n_projections))
    for axis, child in enumerate(child_seeds):
        amp = amp_translation_mm if axis < 3 else amp_rotation_deg
        curve[axis] = sample_bandlimited(child, n_projections, f_c, amp)
    return curve


def cutoff_schedule(n_points: int, f_min: float, f_max: float) -> np.ndarray:
    """`n_points` cutoff frequencies, equidistant in log space.

    The first value is exactly `f_min` and the last exactly `f_max`.
    """
    check_condition(n_points >= 2, "n_points must be >= 2")
    if not 0.0 < f_min < f_max <= 0.5:
        raise ValueError(
            f"need 0 < f_min < f_max <= 0.5, got ({f_min!r}, {f_max!r})"
        )
    return np.geomspace(f_min, f_max, n_points)


# ---------------------------------------------------------------------------
# Akima spline motion model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplineMotionModel:
    """Six Akima splines over equidistant nodes spanning a scan.

    Attributes
    ----------
    n_projections : int
        Number of projections N_p the model spans; node k sits at
        k * (N_p - 1) / (N_n - 1) on the projection-index axis.
    node_values : ndarray, shape (6, N_n)
        Per-node rigid parameters (mm for rows 0-2, degrees for rows 3-5).
    """

    n_projections: int
    node_values: np.ndarray

    def __post_init__(self):
        values = np.atleast_2d(np.asarray(self.node_values, dtype=float))
        if values.shape[0] != 6:
            raise ValueError(f"node_values must have 6 rows, got {values.shape}")
        n_nodes = values.shape[1]
        check_condition(
            2 <= n_nodes <= self.n_projections,
            f"need 2 <= n_nodes <= n_projections, got "
            f"({n_nodes}, {self.n_projections})",
        )
        object.__setattr__(self, "node_values", values)

    @property
    def n_nodes(self) -> int:
        return self.node_values.shape[1]

    @property
    def node_positions(self) -> np.ndarray:
        return np.linspace(0.0, self.n_projections - 1, self.n_nodes)

    @classmethod
    def zeros(cls, n_nodes: int, n_projections: int) -> "SplineMotionModel":
        return cls(n_projections, np.zeros((6, n_nodes)))

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_projections": self.n_projections,
                "n_nodes": self.n_nodes,
                "units": list(AXIS_NAMES),
                "node_values": self.node_values.tolist(),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "SplineMotionModel":
        doc = json.loads(text)
        return cls(int(doc["n_projections"]), np.asarray(doc["node_values"]))


def akima_slopes(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Node derivatives of the Akima (1970) interpolant through (x, y).

    Chord slopes are extended by two extrapolated slopes on each end
    (m[-1] = 2 m[0] - m[1] and so on); the slope at node i is the
    difference-weighted average of the two adjacent chords, falling back to
    their plain mean when both weights vanish.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n == 2:
        m = (y[1] - y[0]) / (x[1] - x[0])
        return np.array([m, m])
    chords = np.diff(y) / np.diff(x)
    m = np.empty(n + 3)
    m[2:-2] = chords
    m[1] = 2.0 * m[2] - m[3]
    m[0] = 2.0 * m[1] - m[2]
    m[-2] = 2.0 * m[-3] - m[-4]
    m[-1] = 2.0 * m[-2] - m[-3]
    w_right = np.abs(m[3:] - m[2:-1])  # |m_{i+1} - m_i|
    w_left = np.abs(m[1:-2] - m[:-3])  # |m_{i-1} - m_{i-2}|
    denom = w_right + w_left
    slopes = np.empty(n)
    tie = denom < 1e-12 * np.maximum(1.0, np.abs(m[2:-1]) + np.abs(m[1:-2]))
    safe = np.where(tie, 1.0, denom)
    slopes = (w_right * m[1:-2] + w_left * m[2:-1]) / safe
    slopes[tie] = 0.5 * (m[1:-2][tie] + m[2:-1][tie])
    return slopes


def _hermite_eval(x, y, slopes, t):
    """Piecewise cubic Hermite evaluation at points t inside [x[0], x[-1]]."""
    idx = np.clip(np.searchsorted(x, t, side="right") - 1, 0, x.size - 2)
    h = x[idx + 1] - x[idx]
    s = (t - x[idx]) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s**2 * (3 - 2 * s)
    h11 = s**2 * (s - 1)
    return (
        h00 * y[idx]
        + h10 * h * slopes[idx]
        + h01 * y[idx + 1]
        + h11 * h * slopes[idx + 1]
    )


def akima_eval(model: SplineMotionModel, t, axis: int):
    """Evaluate one axis of the spline model at projection-index positions t.

    `t` may be a scalar or array; every value must lie in [0, N_p - 1].
    """
    if not 0 <= axis <= 5:
        raise ValueError(f"axis must be in 0..5, got {axis}")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or np.any(t_arr > model.n_projections - 1):
        raise ValueError(
            f"evaluation points must lie in [0, {model.n_projections - 1}]"
        )
    x = model.node_positions
    y = model.node_values[axis]
    out = _hermite_eval(x, y, akima_slopes(x, y), t_arr)
    return float(out) if np.isscalar(t) else out


def spline_to_curve(model: SplineMotionModel, n_projections: int | None = None) -> np.ndarray:
    """Evaluate all six axes at integer projection indices, shape (6, N_p)."""
    if n_projections is None:
        n_projections = model.n_projections
    elif n_projections != model.n_projections:
        raise ValueError(
            f"model spans {model.n_projections} projections, requested "
            f"{n_projections}"
        )
    t = np.arange(n_projections, dtype=float)
    x = model.node_positions
    if model.n_nodes == n_projections:
        return model.node_values.copy()
    curve = np.empty((6, n_projections))
    for axis in range(6):
        y = model.node_values[axis]
        curve[axis] = _hermite_eval(x, y, akima_slopes(x, y), t)
    return curve


def nyquist_limit(n_nodes: int, n_projections: int) -> float:
    """Highest recoverable normalized frequency for an N_n-node spline grid.

    The nodes sample the scan at rate (N_n - 1) / (N_p - 1) relative to the
    per-projection rate, so their Nyquist frequency is half that.
    """
    check_condition(
        2 <= n_nodes <= n_projections,
        f"need 2 <= n_nodes <= n_projections, got ({n_nodes}, {n_projections})",
    )
    return 0.5 * (n_nodes - 1) / (n_projections - 1)


def fit_spline_least_squares(
    curve: np.ndarray, n_nodes: int
) -> tuple[SplineMotionModel, np.ndarray]:
    """Best spline approximation of a motion curve in the least-squares sense.

    Returns the fitted model and the per-axis RMS residual (length 6).
    The Akima interpolant is nonlinear in its node values (the slope weights
    involve absolute differences), so each axis is solved with a damped
    least-squares iteration started from the curve sampled at the node
    positions.
    """
    curve = np.asarray(curve, dtype=float)
    if curve.ndim != 2 or curve.shape[0] != 6:
        raise ValueError(f"curve must have shape (6, N_p), got {curve.shape}")
    n_projections = curve.shape[1]
    check_condition(
        2 <= n_nodes <= n_projections,
        f"need 2 <= n_nodes <= n_projections, got ({n_nodes}, {n_projections})",
    )
    t = np.arange(n_projections, dtype=float)
    x = np.linspace(0.0, n_projections - 1, n_nodes)
    node_values = np.empty((6, n_nodes))
    rms = np.empty(6)
    for axis in range(6):
        target = curve[axis]

        def residual(nodes, target=target):
            return _hermite_eval(x, nodes, akima_slopes(x, nodes), t) - target

        x0 = np.interp(x, t, target)
        sol = least_squares(residual, x0, method="lm", xtol=1e-12, ftol=1e-12)
        node_values[axis] = sol.x
        rms[axis] = np.sqrt(np.mean(sol.fun**2))
    return SplineMotionModel(n_projections, node_values), rms


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def curve_to_json(curve: np.ndarray) -> str:
    curve = np.asarray(curve, dtype=float)
    return json.dumps(
        {"units": list(AXIS_NAMES), "values": curve.tolist()}, indent=2
    )


def curve_from_json(text: str) -> np.ndarray:
    return np.asarray(json.loads(text)["values"], dtype=float)


def curve_to_csv(curve: np.ndarray) -> str:
    """One row per projection: index followed by the six rigid parameters."""
    curve = np.asarray(curve, dtype=float)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(("projection",) + AXIS_NAMES)
    for i in range(curve.shape[1]):
        writer.writerow([i] + [repr(float(v)) for v in curve[:, i]])
    return buf.getvalue()


def curve_from_csv(text: str) -> np.ndarray:
    rows = list(csv.reader(io.StringIO(text)))
    data = np.array([[float(v) for v in row[1:]] for row in rows[1:]])
    return data.T
