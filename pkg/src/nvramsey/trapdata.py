"""
Trap time series: synthesis, power spectral density and Lorentzian peak fits.

Text formats read by :func:`read_series`:

* two columns ``time_s<delim>signal`` (comma, whitespace or tab); the sample
  rate is taken from the median time step;
* one column ``signal`` preceded by a header line ``# sample_rate: <Hz>``.

Lines starting with ``#`` are comments; other ``# key: value`` header lines are
kept as metadata.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.signal as signal
from scipy.optimize import curve_fit


class EmptyInput(ValueError):
    pass


class ParseError(ValueError):
    def __init__(self, path, line_no, msg):
        super().__init__(f"{path}:{line_no}: {msg}")
        self.line_no = line_no


@dataclass(frozen=True, eq=False)
class TimeSeries:
    samples: np.ndarray
    sample_rate: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        s = np.asarray(self.samples, dtype=float).ravel()
        object.__setattr__(self, "samples", s)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True, eq=False)
class PSDRecord:
    freqs: np.ndarray
    power: np.ndarray
    window: str
    segments: int

    @property
    def df(self) -> float:
        return float(self.freqs[1] - self.freqs[0])

    def integrated(self) -> float:
        return float(np.sum(self.power) * self.df)


@dataclass(frozen=True)
class Peak:
    center: float
    width: float
    amplitude: float
    converged: bool = True
    message: str = ""


def _oscillator_step(omega, gamma, dt, variance):
    """Exact one-step propagator and noise covariance of
    ``x'' + gamma x' + omega^2 x = noise`` in stationary equilibrium."""
    m = np.array([[0.0, 1.0], [-omega ** 2, -gamma]])
    a = scipy.linalg.expm(m * dt)
    stat = np.diag([variance / omega ** 2, variance])
    q = stat - a @ stat @ a.T
    return a, 0.5 * (q + q.T), stat


def synthesize_trace(freqs, damping, temperature_scale, sample_rate, duration, seed=0) -> TimeSeries:
    """Sum of independent thermally driven damped oscillators.

    ``freqs`` and ``damping`` are in Hz (damping is the energy decay rate over
    2 pi, i.e. the PSD full width).  ``temperature_scale`` sets the velocity
    variance of each oscillator; zero gives an all-zero trace.  Each oscillator
    is advanced with its exact discrete-time propagator, so the trace is a
    sample of the continuous Langevin process at the sampling instants.
    """
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    damping = np.atleast_1d(np.asarray(damping, dtype=float))
    if freqs.shape != damping.shape:
        raise ValueError("freqs and damping must have equal length")
    if np.any(freqs >= sample_rate / 2):
        raise ValueError("oscillator frequency at or above the Nyquist frequency")
    if np.any(freqs <= 0) or np.any(damping <= 0):
        raise ValueError("frequencies and damping rates must be positive")
    n = int(round(duration * sample_rate))
    dt = 1.0 / sample_rate
    rng = np.random.default_rng(seed)
    total = np.zeros(n)
    if temperature_scale == 0:
        return TimeSeries(total, sample_rate, {"seed": seed})
    for f, g in zip(freqs, damping):
        a, q, stat = _oscillator_step(2 * np.pi * f, 2 * np.pi * g, dt, temperature_scale)
        chol_q = np.linalg.cholesky(q)
        chol_s = np.linalg.cholesky(stat)
        noise = rng.standard_normal((n, 2)) @ chol_q.T
        x0 = chol_s @ rng.standard_normal(2)
        # diagonalize the 2x2 recursion so each eigen-component is a scalar AR(1)
        mu, v = np.linalg.eig(a)
        vinv = np.linalg.inv(v)
        drive = noise @ vinv.T
        drive[0] += vinv @ (a @ x0)
        comp = np.empty((n, 2), dtype=complex)
        for k in range(2):
            comp[:, k] = signal.lfilter([1.0], [1.0, -mu[k]], drive[:, k])
        total += (comp @ v.T)[:, 0].real
    return TimeSeries(total, sample_rate, {"seed": seed})


def psd(ts: TimeSeries, segment_length: int = 4096, overlap: float = 0.5,
        window: str = "hann") -> PSDRecord:
    """One-sided averaged-periodogram density estimate (Welch)."""
    n = ts.samples.size
    segment_length = int(segment_length)
    if segment_length < 8 or segment_length > n:
        raise ValueError(f"segment_length must lie in [8, {n}], got {segment_length}")
    if not 0 <= overlap < 1:
        raise ValueError("overlap must lie in [0, 1)")
    noverlap = int(segment_length * overlap)
    f, p = signal.welch(ts.samples, fs=ts.sample_rate, window=window, nperseg=segment_length,
                        noverlap=noverlap, detrend="constant", scaling="density")
    step = segment_length - noverlap
    segments = 1 + (n - segment_length) // step
    return PSDRecord(f, np.maximum(p, 0.0), window, segments)


def lorentzian(f, center, width, amplitude, offset):
    hw = 0.5 * width
    return amplitude * hw ** 2 / ((f - center) ** 2 + hw ** 2) + offset


def fit_peaks(rec: PSDRecord, n_peaks: int, window_halfwidth: float | None = None) -> list[Peak]:
    """Lorentzian least-squares fits around the ``n_peaks`` most prominent maxima.

    Each fit uses the bins between the peak and half-way to its neighbours
    (capped at ``window_halfwidth`` Hz), so windows never overlap.  Peaks are
    returned sorted by centre frequency.
    """
    if n_peaks < 1:
        raise ValueError("n_peaks must be at least 1")
    f, p = rec.freqs, rec.power
    idx, props = signal.find_peaks(p, prominence=0)
    if idx.size == 0:
        return []
    chosen = np.sort(idx[np.argsort(props["prominences"])[::-1][:n_peaks]])
    df = rec.df
    out = []
    for k, i in enumerate(chosen):
        lo_lim = f[0] if k == 0 else 0.5 * (f[chosen[k - 1]] + f[i])
        hi_lim = f[-1] if k == len(chosen) - 1 else 0.5 * (f[i] + f[chosen[k + 1]])
        if window_halfwidth is not None:
            lo_lim = max(lo_lim, f[i] - window_halfwidth)
            hi_lim = min(hi_lim, f[i] + window_halfwidth)
        sel = (f >= lo_lim) & (f <= hi_lim)
        # half-maximum crossing for a width guess
        half = p[i] / 2
        j = i
        while j + 1 < f.size and p[j] > half and f[j] < hi_lim:
            j += 1
        w0 = max(2 * (f[j] - f[i]), 2 * df)
        # fit in units of the peak height and bin width to keep the problem well scaled
        scale = p[i] if p[i] > 0 else 1.0
        fs, ps = (f[sel] - f[i]) / df, p[sel] / scale
        guess = [0.0, w0 / df, 1.0, float(np.median(ps) * 0.1)]
        lower = [(lo_lim - f[i]) / df, 0.1, 0, 0]
        upper = [(hi_lim - f[i]) / df, (hi_lim - lo_lim) / df, np.inf, np.inf]
        try:
            popt, _ = curve_fit(lorentzian, fs, ps, p0=guess, bounds=(lower, upper), maxfev=20000)
            out.append(Peak(float(f[i] + popt[0] * df), float(popt[1] * df), float(popt[2] * scale)))
        except (RuntimeError, ValueError) as exc:
            out.append(Peak(float(f[i]), float(w0), float(p[i]), False, str(exc)))
    return out


_HEADER = re.compile(r"#\s*([A-Za-z_][\w\-]*)\s*[:=]\s*(.+?)\s*$")


def read_series(path) -> TimeSeries:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    meta, rows, ncols = {}, [], None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = _HEADER.match(line)
            if m:
                meta[m.group(1).lower()] = m.group(2)
            continue
        parts = [x for x in re.split(r"[,\s]+", line) if x]
        try:
            vals = [float(x) for x in parts]
        except ValueError:
            raise ParseError(path, no, f"cannot parse {raw!r} as numbers") from None
        if ncols is None:
            ncols = len(vals)
            if ncols not in (1, 2):
                raise ParseError(path, no, f"expected 1 or 2 columns, found {ncols}")
        elif len(vals) != ncols:
            raise ParseError(path, no, f"expected {ncols} columns, found {len(vals)}")
        rows.append(vals)
    if not rows:
        raise EmptyInput(f"{path}: no samples")
    data = np.asarray(rows)
    if ncols == 2:
        t = data[:, 0]
        if t.size < 2:
            raise EmptyInput(f"{path}: need at least two samples")
        dt = np.median(np.diff(t))
        if not dt > 0:
            raise ParseError(path, 0, "time column is not increasing")
        return TimeSeries(data[:, 1], 1.0 / dt, meta)
    if "sample_rate" not in meta:
        raise ParseError(path, 1, "single-column data needs a '# sample_rate: <Hz>' header")
    try:
        rate = float(meta["sample_rate"])
    except ValueError:
        raise ParseError(path, 1, f"bad sample_rate {meta['sample_rate']!r}") from None
    return TimeSeries(data[:, 0], rate, meta)


def write_series(ts: TimeSeries, path, header_lines=()) -> None:
    """Single-column format with a ``sample_rate`` header."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(f"# sample_rate: {ts.sample_rate!r}\n")
        for x in ts.samples:
            fh.write(f"{x:.10e}\n")
