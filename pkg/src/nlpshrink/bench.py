"""Simulation benchmark: dispersed Donoho-Johnstone style test functions,
noise at a target SNR, replicated denoising and method comparison tables."""

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .ebayes import estimate_sigma_mad
from .hyperspec import METHOD_NAMES, MethodConfig
from .posterior import denoise
from .transform import dwt, idwt

__all__ = [
    "FUNCTION_NAMES",
    "BLOCKS_T",
    "BLOCKS_H",
    "BUMPS_T",
    "BUMPS_H",
    "BUMPS_W",
    "DOPPLER_EPS",
    "LCOMB_WEIGHTS",
    "HARD_THRESHOLD",
    "eval_test_function",
    "sample_function",
    "add_noise",
    "mse",
    "hard_threshold_denoise",
    "ExperimentPlan",
    "ExperimentResult",
    "run_experiment",
    "count_matrix",
    "render_count_matrix",
    "write_results_csv",
    "read_results_csv",
]

BLOCKS_T = (0.1, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81)
BLOCKS_H = (4, -8, 3, -4, 8, -4.2, 2.1, 4.3, -6.1, 2.1, -4.7)
BUMPS_T = BLOCKS_T
BUMPS_H = (2, 10, 1, 4, 8, 4.2, 2.1, 4.3, 1.1, 3.1, 8.2)
BUMPS_W = (0.005, 0.005, 0.006, 0.01, 0.01, 0.03, 0.01, 0.01, 0.005, 0.008, 0.005)
DOPPLER_EPS = 0.01
# (blocks, bumps, doppler) weights
LCOMB_WEIGHTS = {
    "lcomb1": (0.4, 0.4, 0.2),
    "lcomb2": (0.4, 0.2, 0.4),
    "lcomb3": (0.2, 0.4, 0.4),
}
FUNCTION_NAMES = ("blocks", "bumps", "doppler", "lcomb1", "lcomb2", "lcomb3")
HARD_THRESHOLD = "hard-universal"

_BLOCKS = (np.array(BLOCKS_T), np.array(BLOCKS_H, dtype=float))
_BUMPS = (np.array(BUMPS_T), np.array(BUMPS_H, dtype=float), np.array(BUMPS_W))


def _blocks(t):
    tj, hj = _BLOCKS
    # sign(0) = 0 puts the half step exactly on a jump
    return ((1.0 + np.sign(t[:, None] - tj)) / 2.0) @ hj


def _bumps(t):
    tj, hj, wj = _BUMPS
    return (1.0 + np.abs((t[:, None] - tj) / wj)) ** -4 @ hj


def _doppler(t):
    eps = DOPPLER_EPS
    return np.sqrt(t * (1.0 - t)) * np.sin(2.0 * math.pi * (1.0 + eps) / (t + eps))


_BASE = {"blocks": _blocks, "bumps": _bumps, "doppler": _doppler}


def eval_test_function(name, t):
    """Evaluate a test function at points ``t`` in (0, 1]."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr <= 0.0) or np.any(t_arr > 1.0):
        raise ValueError("test functions are defined on (0, 1]")
    if name in _BASE:
        out = _BASE[name](t_arr)
    elif name in LCOMB_WEIGHTS:
        w = LCOMB_WEIGHTS[name]
        out = w[0] * _blocks(t_arr) + w[1] * _bumps(t_arr) + w[2] * _doppler(t_arr)
    else:
        raise ValueError(f"unknown test function {name!r}; choose from {', '.join(FUNCTION_NAMES)}")
    return out[0] if np.ndim(t) == 0 else out


def sample_function(name, n):
    """``f(i / n)`` for ``i = 1..n``."""
    if n < 1 or n & (n - 1):
        raise ValueError(f"n must be a power of two, got {n}")
    return eval_test_function(name, np.arange(1, n + 1) / n)


def add_noise(f, snr, seed=None):
    """Add N(0, s^2) noise with ``s = sd(f) / snr`` (population sd).

    Returns ``(y, s)``.
    """
    f = np.asarray(f, dtype=float)
    sd = f.std()
    if not sd > 0:
        raise ValueError("signal is constant; SNR is undefined")
    if not snr > 0:
        raise ValueError("snr must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    sigma = sd / snr
    return f + sigma * rng.standard_normal(f.size), sigma


def mse(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def hard_threshold_denoise(y, wavelet="sym6", nlevels=None):
    """Keep detail coefficients above the universal threshold ``s sqrt(2 log n)``."""
    pyr = dwt(y, wavelet, nlevels)
    sigma = estimate_sigma_mad(pyr)
    lam = sigma * math.sqrt(2.0 * math.log(pyr.n))
    out = pyr.with_details([np.where(np.abs(d) > lam, d, 0.0) for d in pyr.details])
    return idwt(out)


@dataclass
class ExperimentPlan:
    functions: tuple = FUNCTION_NAMES
    n_values: tuple = (512, 1024, 2048, 4096)
    snr_values: tuple = (3, 5, 7)
    replications: int = 100
    methods: tuple = METHOD_NAMES
    seed: int = 0
    wavelet: str = "sym6"
    # optimizer budget per fit; lighter than the library defaults for speed
    starts: int = 1
    max_evals: int = 1000
    timing: bool = True

    def __post_init__(self):
        for n in self.n_values:
            if n < 8 or n & (n - 1):
                raise ValueError(f"n values must be powers of two >= 8, got {n}")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        for m in self.methods:
            if m != HARD_THRESHOLD:
                MethodConfig.from_name(m)
        for f in self.functions:
            if f not in FUNCTION_NAMES:
                raise ValueError(f"unknown test function {f!r}")


@dataclass
class ExperimentResult:
    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def table(self):
        """Nested dict ``{(function, n, snr): {method: mean_mse}}`` of valid cells."""
        out = {}
        for r in self.rows:
            if r["valid"]:
                out.setdefault((r["function"], r["n"], r["snr"]), {})[r["method"]] = r["mean_mse"]
        return out

    def mean_mse(self, function, n, snr, method):
        for r in self.rows:
            if (r["function"], r["n"], r["snr"], r["method"]) == (function, n, snr, method):
                return r["mean_mse"]
        raise KeyError((function, n, snr, method))


def _cell_seed(seed, fidx, n, snr, rep):
    ss = np.random.SeedSequence([int(seed), int(fidx), int(n), int(round(snr * 1000)), int(rep)])
    return np.random.default_rng(ss)


def run_experiment(plan, progress=None):
    """Replicated simulation over functions x n x SNR x methods.

    Each replication's noise depends only on (seed, function, n, snr, rep),
    so every method sees the same noisy data and results do not depend on
    execution order.
    """
    result = ExperimentResult()
    for fidx, fname in enumerate(plan.functions):
        for n in plan.n_values:
            f = sample_function(fname, n)
            for snr in plan.snr_values:
                errs = {m: [] for m in plan.methods}
                secs = {m: 0.0 for m in plan.methods}
                fails = {m: 0 for m in plan.methods}
                for rep in range(plan.replications):
                    rng = _cell_seed(plan.seed, FUNCTION_NAMES.index(fname), n, snr, rep)
                    y, _ = add_noise(f, snr, rng)
                    fit_seed = int(rng.integers(2**31))
                    for m in plan.methods:
                        t0 = time.perf_counter()
                        try:
                            if m == HARD_THRESHOLD:
                                est = hard_threshold_denoise(y, plan.wavelet)
                            else:
                                est, _, _ = denoise(y, m, plan.wavelet, starts=plan.starts,
                                                    max_evals=plan.max_evals, seed=fit_seed,
                                                    summaries=False)
                        except Exception as exc:  # recorded, cell judged below
                            fails[m] += 1
                            result.failures.append((fname, n, snr, m, rep, repr(exc)))
                            continue
                        finally:
                            secs[m] += time.perf_counter() - t0
                        errs[m].append(mse(est, f))
                    if progress is not None:
                        progress(fname, n, snr, rep)
                for m in plan.methods:
                    e = np.array(errs[m])
                    valid = fails[m] <= 0.1 * plan.replications and e.size > 0
                    result.rows.append({
                        "function": fname,
                        "n": n,
                        "snr": snr,
                        "method": m,
                        "mean_mse": float(e.mean()) if e.size else math.nan,
                        "sd_mse": float(e.std(ddof=1)) if e.size > 1 else 0.0,
                        "seconds": secs[m] / plan.replications if plan.timing else None,
                        "valid": valid,
                    })
    return result


def count_matrix(rows, methods=None, functions=None):
    """Wins per (method, function): cells ``(n, snr)`` where the method has the
    lowest mean MSE. Ties go to the method listed first.

    Returns ``(methods, functions, counts)`` with ``counts[i, j]`` for
    method ``i`` and function ``j``.
    """
    if methods is None:
        methods = list(dict.fromkeys(r["method"] for r in rows))
    if functions is None:
        functions = list(dict.fromkeys(r["function"] for r in rows))
    order = {m: i for i, m in enumerate(methods)}
    cells = {}
    for r in rows:
        if r["method"] not in order or r["function"] not in functions:
            continue
        if not r.get("valid", True) or not math.isfinite(r["mean_mse"]):
            continue
        cells.setdefault((r["function"], r["n"], r["snr"]), []).append(r)
    counts = np.zeros((len(methods), len(functions)), dtype=int)
    for (fname, _, _), entries in cells.items():
        winner = min(entries, key=lambda r: (r["mean_mse"], order[r["method"]]))
        counts[order[winner["method"]], functions.index(fname)] += 1
    return list(methods), list(functions), counts


def render_count_matrix(methods, functions, counts):
    """Plain-text table of win counts with row and column totals."""
    w0 = max([len("Method")] + [len(m) for m in methods]) + 2
    widths = [max(len(f), 5) + 2 for f in functions]
    head = "Method".ljust(w0) + "".join(f.rjust(w) for f, w in zip(functions, widths)) + "Total".rjust(7)
    lines = [head, "-" * len(head)]
    best = counts.max(axis=0) if counts.size else []
    for i, m in enumerate(methods):
        cells = []
        for j, w in enumerate(widths):
            c = counts[i, j]
            mark = "*" if c > 0 and c == best[j] else " "
            cells.append(f"{c}{mark}".rjust(w))
        lines.append(m.ljust(w0) + "".join(cells) + str(counts[i].sum()).rjust(7))
    lines.append("-" * len(head))
    lines.append("Total".ljust(w0) + "".join(str(c).rjust(w) for c, w in
                                             zip(counts.sum(axis=0), widths))
                 + str(counts.sum()).rjust(7))
    lines.append("")
    lines.append("* most wins for the function; ties in a cell go to the method listed first")
    return "\n".join(lines) + "\n"


CSV_FIELDS = ("function", "n", "snr", "method", "mean_mse", "sd_mse", "seconds")


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_results_csv(rows, path_or_file):
    """Long-format CSV; ``seconds`` is left empty when timing was not recorded."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in rows:
            mean = r["mean_mse"] if r.get("valid", True) else math.nan
            w.writerow([_fmt(r["function"]), _fmt(r["n"]), _fmt(r["snr"]), _fmt(r["method"]),
                        _fmt(mean), _fmt(r["sd_mse"]), _fmt(r.get("seconds"))])
    finally:
        if own:
            fh.close()


def _num(s):
    v = float(s)
    return int(v) if v.is_integer() and "." not in s and "e" not in s.lower() else v


def read_results_csv(path_or_file):
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, newline="") if own else path_or_file
    try:
        reader = csv.DictReader(fh)
        missing = set(CSV_FIELDS[:5]) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"results CSV lacks columns: {', '.join(sorted(missing))}")
        rows = []
        for r in reader:
            mean = float(r["mean_mse"])
            rows.append({
                "function": r["function"],
                "n": int(r["n"]),
                "snr": _num(r["snr"]),
                "method": r["method"],
                "mean_mse": mean,
                "sd_mse": float(r["sd_mse"]) if r.get("sd_mse") else math.nan,
                "seconds": float(r["seconds"]) if r.get("seconds") else None,
                "valid": math.isfinite(mean),
            })
        return rows
    finally:
        if own:
            fh.close()
