"""Shared power-law analysis pipeline.

Fragment-size events from any simulator are reduced to a mean size histogram,
fit to n_A = q0 * A^(-tau) on a tau grid by weighted chi^2, and scanned for
the critical multiplicity (the bin with the best reduced chi^2).  Moment
series over a control parameter give gamma and beta via log-log slopes.

For each tau the amplitude q0 is the weighted least-squares solution, which
makes the fitted tau invariant under rescaling all bins and errors by a
common factor.  The closed-form normalization q0 = 1/sum A^(1-tau) (first
moment M1 = 1) is exposed separately and is what synthetic yields use.
"""

from dataclasses import dataclass, field

import numpy as np

DEFAULT_TAU_GRID = np.round(np.arange(2.00, 3.0001, 0.01), 10)


@dataclass
class EventRecord:
    """One simulation event: fragment sizes plus an optional control value."""

    fragment_sizes: np.ndarray
    control: float | None = None

    def __post_init__(self):
        self.fragment_sizes = np.asarray(self.fragment_sizes, dtype=np.int64)
        if self.fragment_sizes.ndim != 1:
            raise ValueError("fragment_sizes must be one-dimensional")
        if self.fragment_sizes.size and self.fragment_sizes.min() < 1:
            raise ValueError("all fragment sizes must be >= 1")

    @property
    def multiplicity(self) -> int:
        return int(self.fragment_sizes.size)

    @property
    def mass(self) -> int:
        return int(self.fragment_sizes.sum())


@dataclass
class SizeHistogram:
    """Mean per-event normalized counts n_A with standard errors."""

    sizes: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    n_events: int
    a_system: int
    normalize: str


@dataclass
class PowerLawFit:
    tau: float
    q0: float
    chi2: float
    fit_range: tuple
    n_events: int
    tau_se: float = float("nan")
    chi2_reduced: float = float("nan")
    n_bins: int = 0
    a_system: int = 0


@dataclass
class MomentSeries:
    """Per-ensemble moment values along a control parameter."""

    control: np.ndarray
    m1: np.ndarray
    m1_se: np.ndarray
    m2: np.ndarray
    m2_se: np.ndarray
    a_max: np.ndarray
    a_max_se: np.ndarray


@dataclass
class MultiplicityScan:
    m_c: float
    rows: list          # (m, n_events, fit) per retained bin
    degenerate: bool = False


def fisher_yield(a, tau, surface_coeff=0.0, temperature=1.0, dmu=0.0):
    """Unnormalized droplet yield A^(-tau) * exp(-(dmu*A + surface*A^(2/3))/T).

    With dmu = 0 and surface_coeff = 0 this is the pure critical power law.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    a = np.asarray(a, dtype=np.float64)
    if np.any(a < 1):
        raise ValueError("droplet sizes must be >= 1")
    return a ** (-tau) * np.exp(-(dmu * a + surface_coeff * a ** (2.0 / 3.0)) / temperature)


def normalization(tau: float, a_system: int) -> float:
    """q0 = 1 / sum_{A=1..a_system} A^(1-tau), so that M1 = sum n_A * A = 1."""
    if a_system < 1:
        raise ValueError("a_system must be >= 1")
    a = np.arange(1, int(a_system) + 1, dtype=np.float64)
    return 1.0 / float(np.sum(a ** (1.0 - tau)))


def build_histogram(events, a_system: int | None = None) -> SizeHistogram:
    """Mean n_A over events.

    With a_system given, counts are divided by that fixed system size; without
    it each event is normalized by its own total mass (M1 = 1 per event).
    """
    events = list(events)
    if not events:
        raise ValueError("no events")
    max_a = max(int(ev.fragment_sizes.max()) if ev.multiplicity else 1 for ev in events)
    acc = np.zeros(max_a + 1)
    acc2 = np.zeros(max_a + 1)
    masses = []
    for ev in events:
        counts = np.bincount(ev.fragment_sizes, minlength=max_a + 1).astype(np.float64)
        mass = ev.mass
        masses.append(mass)
        norm = float(a_system) if a_system is not None else float(max(mass, 1))
        x = counts / norm
        acc += x
        acc2 += x * x
    n = len(events)
    mean = acc / n
    if n > 1:
        var = np.maximum(acc2 - n * mean * mean, 0.0) / (n - 1)
        se = np.sqrt(var / n)
    else:
        se = np.zeros_like(mean)
    sizes = np.nonzero(mean)[0]
    used_a = int(a_system) if a_system is not None else int(round(float(np.mean(masses))))
    mode = "system" if a_system is not None else "event"
    return SizeHistogram(sizes.astype(np.int64), mean[sizes], se[sizes], n, used_a, mode)


def _chi2_for_tau(a, obs, w, tau):
    shape = a ** (-tau)
    denom = float(np.sum(w * shape * shape))
    q0 = float(np.sum(w * obs * shape)) / denom if denom > 0 else 0.0
    resid = obs - q0 * shape
    return float(np.sum(w * resid * resid)), q0


def fit_tau(hist: SizeHistogram, fit_range=None, tau_grid=None) -> PowerLawFit:
    """Grid chi^2 fit of n_A = q0 * A^(-tau) with parabolic refinement."""
    if tau_grid is None:
        tau_grid = DEFAULT_TAU_GRID
    tau_grid = np.asarray(tau_grid, dtype=np.float64)
    if fit_range is None:
        fit_range = (2, max(2, hist.a_system // 4))
    a_min, a_max = fit_range
    sel = (hist.sizes >= a_min) & (hist.sizes <= a_max) & (hist.mean > 0)
    if not np.any(sel):
        raise ValueError(f"no nonzero bins in fit range {fit_range}")
    a = hist.sizes[sel].astype(np.float64)
    obs = hist.mean[sel]
    se = hist.se[sel].copy()
    pos = se > 0
    if pos.any():
        se[~pos] = se[pos].min()
    else:
        se[:] = 1.0
    w = 1.0 / (se * se)

    chi2s = np.empty(tau_grid.size)
    q0s = np.empty(tau_grid.size)
    for i, tau in enumerate(tau_grid):
        chi2s[i], q0s[i] = _chi2_for_tau(a, obs, w, tau)
    i0 = int(np.argmin(chi2s))
    step = tau_grid[1] - tau_grid[0] if tau_grid.size > 1 else 0.01
    tau_hat = float(tau_grid[i0])
    tau_se = float(step)
    if 0 < i0 < tau_grid.size - 1:
        cl, cm, cr = chi2s[i0 - 1], chi2s[i0], chi2s[i0 + 1]
        denom = cl - 2 * cm + cr
        if denom > 0:
            delta = 0.5 * (cl - cr) / denom
            tau_hat = float(tau_grid[i0] + np.clip(delta, -1.0, 1.0) * step)
            # delta_chi2 = 1 error bar from the parabola curvature
            tau_se = float(step * np.sqrt(2.0 / denom))
    chi2, q0 = _chi2_for_tau(a, obs, w, tau_hat)
    n_bins = int(a.size)
    dof = max(n_bins - 2, 1)
    return PowerLawFit(tau=tau_hat, q0=q0, chi2=chi2, fit_range=(int(a_min), int(a_max)),
                       n_events=hist.n_events, tau_se=tau_se, chi2_reduced=chi2 / dof,
                       n_bins=n_bins, a_system=hist.a_system)


def fit_tau_events(events, a_system=None, fit_range=None, tau_grid=None) -> PowerLawFit:
    return fit_tau(build_histogram(events, a_system=a_system),
                   fit_range=fit_range, tau_grid=tau_grid)


def _merge_bins(groups, min_events):
    """Greedy left-to-right merge of multiplicity groups below min_events."""
    merged = []
    cur_m, cur_events = [], []
    for m, evs in groups:
        cur_m.append(m)
        cur_events.extend(evs)
        if len(cur_events) >= min_events:
            merged.append((cur_m, cur_events))
            cur_m, cur_events = [], []
    if cur_events:
        if merged:
            last_m, last_events = merged[-1]
            merged[-1] = (last_m + cur_m, last_events + cur_events)
        else:
            merged.append((cur_m, cur_events))
    return merged


def critical_multiplicity(events, tau_grid=None, fit_range=None,
                          min_events=20, a_system=None) -> MultiplicityScan:
    """Bin events by multiplicity, fit each bin, pick the best reduced chi^2.

    Bins with fewer than min_events events are merged with their neighbors.
    A single usable bin is returned flagged degenerate; two usable bins are
    rejected (no meaningful optimum).
    """
    events = list(events)
    by_m = {}
    for ev in events:
        by_m.setdefault(ev.multiplicity, []).append(ev)
    groups = sorted(by_m.items())
    merged = _merge_bins(groups, min_events)
    if not merged:
        raise ValueError("no events to bin")
    rows = []
    for ms, evs in merged:
        rep_m = float(np.average(ms, weights=[len(by_m[m]) for m in ms]))
        try:
            fit = fit_tau_events(evs, a_system=a_system, fit_range=fit_range,
                                 tau_grid=tau_grid)
        except ValueError:
            continue
        rows.append((rep_m, len(evs), fit))
    if not rows:
        raise ValueError("no fittable multiplicity bins")
    if len(rows) == 1:
        return MultiplicityScan(m_c=rows[0][0], rows=rows, degenerate=True)
    if len(rows) == 2:
        raise ValueError("fewer than 3 usable multiplicity bins")
    best = min(rows, key=lambda r: r[2].chi2_reduced)
    return MultiplicityScan(m_c=best[0], rows=rows, degenerate=False)


def _event_moment(ev: EventRecord, k: int, exclude_largest: bool, norm: float) -> float:
    sizes = ev.fragment_sizes.astype(np.float64)
    if exclude_largest and sizes.size:
        sizes = np.delete(sizes, int(np.argmax(sizes)))
    return float(np.sum(sizes ** k)) / norm


def moments(events, k: int, exclude_largest=False, a_system=None):
    """Per-control-group mean M_k = sum_A n_A A^k: (controls, values, ses)."""
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    groups = {}
    for ev in events:
        if ev.control is None:
            raise ValueError("events need control values for moment series")
        norm = float(a_system) if a_system is not None else float(max(ev.mass, 1))
        groups.setdefault(float(ev.control), []).append(
            _event_moment(ev, k, exclude_largest, norm))
    controls = np.array(sorted(groups))
    vals = np.array([np.mean(groups[c]) for c in controls])
    ses = np.array([np.std(groups[c], ddof=1) / np.sqrt(len(groups[c]))
                    if len(groups[c]) > 1 else 0.0 for c in controls])
    return controls, vals, ses


def moment_series(events, a_system=None, exclude_largest_m2=True) -> MomentSeries:
    controls, m1, m1_se = moments(events, 1, False, a_system)
    _, m2, m2_se = moments(events, 2, exclude_largest_m2, a_system)
    groups = {}
    for ev in events:
        amax = float(ev.fragment_sizes.max()) if ev.multiplicity else 0.0
        groups.setdefault(float(ev.control), []).append(amax)
    a_max = np.array([np.mean(groups[c]) for c in controls])
    a_max_se = np.array([np.std(groups[c], ddof=1) / np.sqrt(len(groups[c]))
                         if len(groups[c]) > 1 else 0.0 for c in controls])
    return MomentSeries(controls, m1, m1_se, m2, m2_se, a_max, a_max_se)


def _loglog_slope(control, values, critical_point, side, min_points):
    control = np.asarray(control, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if critical_point == 0:
        raise ValueError("critical point must be nonzero to form a reduced control")
    eps = (control - critical_point) / critical_point
    if side == "below":
        sel = eps < 0
    elif side == "above":
        sel = eps > 0
    else:
        raise ValueError("side must be 'below' or 'above'")
    eps = np.abs(eps[sel])
    vals = values[sel]
    if eps.size < min_points:
        raise ValueError(f"need >= {min_points} points on the {side} side, got {eps.size}")
    if np.any(vals <= 0):
        raise ValueError("series values must be positive for a log-log fit")
    slope = np.polyfit(np.log(eps), np.log(vals), 1)[0]
    return float(slope)


def extract_gamma(control, m2, critical_point, side="below", min_points=5) -> float:
    """M2 ~ |eps|^(-gamma): returns gamma (positive for a diverging second moment)."""
    return -_loglog_slope(control, m2, critical_point, side, min_points)


def extract_beta(control, a_max, critical_point, side="above", min_points=5) -> float:
    """A_max ~ |eps|^beta on the ordered side: returns beta."""
    return _loglog_slope(control, a_max, critical_point, side, min_points)


def read_events(path) -> list:
    """Events file: one line per event, `control,size1 size2 size3 ...`."""
    events = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            control_str, _, sizes_str = line.partition(",")
            control = float(control_str) if control_str.strip() else None
            sizes = np.array(sizes_str.split(), dtype=np.int64) \
                if sizes_str.strip() else np.empty(0, dtype=np.int64)
            events.append(EventRecord(sizes, control))
    return events


def write_events(path, events):
    with open(path, "w") as fh:
        for ev in events:
            control = "" if ev.control is None else repr(float(ev.control))
            fh.write(f"{control},{' '.join(str(int(s)) for s in ev.fragment_sizes)}\n")
