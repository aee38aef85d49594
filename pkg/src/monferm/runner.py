"""Deterministic ensemble execution and result persistence.

Trajectories are dispatched across worker processes; each draws from an
independent random stream derived purely from (seed, trajectory index),
so any trajectory can be re-run in isolation and the merged result is
independent of scheduling.  Outputs: an NDJSON event log, a structured
JSON summary, and CSV histogram tables, all written atomically.
"""

import dataclasses
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .gaussian import HoppingModel
from .jumps import run_jump_trajectory
from .projective import run_projective_trajectory
from .qsd import QsdParams, run_qsd_trajectory
from .stats import (
    DensityMap,
    Histogram,
    MomentAccumulator,
    auto_edges,
    balance_statistics,
)

PROTOCOLS = ("qsd", "qj", "pm")


@dataclass
class RunConfig:
    """Full description of one ensemble experiment."""

    protocol: str
    L: int
    gamma: float
    n_traj: int = 100
    seed: int = 0
    traj_offset: int = 0               # first trajectory index (for split runs)
    dt: float = 0.05                   # QSD time step
    t_final: float | None = None       # default 0.7 L (units of 1/J)
    window: tuple | None = None        # default (0.6 L, 0.7 L)
    ell: int | None = None             # subsystem size, default L/2
    ee_stride: int = 4                 # QSD steps between S(t) samples
    propagator: str = "spectral"       # unitary segments: spectral | rk4
    density_norm: str = "global-max"
    hist_bins: int = 201
    hist_range: tuple | None = None    # pinned (lo, hi) for dS histograms
    record_events: bool = True
    snapshot_dt: float = 0.0           # >0: sample D in the window
    output_dir: str | None = None

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.L < 4 or self.L % 2 != 0:
            raise ValueError("L must be even and >= 4")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.n_traj < 1:
            raise ValueError("n_traj must be >= 1")
        if self.traj_offset < 0:
            raise ValueError("traj_offset must be >= 0")
        if self.t_final is None:
            self.t_final = 0.7 * self.L
        if self.window is None:
            self.window = (0.6 * self.L, 0.7 * self.L)
        self.window = (float(self.window[0]), float(self.window[1]))
        if not 0 <= self.window[0] < self.window[1] <= self.t_final + 1e-9:
            raise ValueError(f"window {self.window} incompatible with t_final {self.t_final}")
        if self.ell is None:
            self.ell = self.L // 2
        if not 1 <= self.ell <= self.L - 1:
            raise ValueError(f"subsystem size {self.ell} out of range")
        if self.propagator not in ("spectral", "rk4"):
            raise ValueError(f"unknown propagator {self.propagator!r}")
        if self.hist_range is not None:
            self.hist_range = (float(self.hist_range[0]), float(self.hist_range[1]))

    def region(self) -> np.ndarray:
        return np.arange(self.ell)

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["window"] = list(self.window)
        if self.hist_range is not None:
            d["hist_range"] = list(self.hist_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        if d.get("window") is not None:
            d["window"] = tuple(d["window"])
        if d.get("hist_range") is not None:
            d["hist_range"] = tuple(d["hist_range"])
        return cls(**d)


def derive_stream(seed: int, trajectory_index: int) -> np.random.Generator:
    """Independent random stream, a pure function of (seed, index)."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(trajectory_index,))
    return np.random.default_rng(ss)


def run_trajectory(config: RunConfig, index: int) -> dict:
    """One trajectory as a dict of plain arrays (picklable)."""
    rng = derive_stream(config.seed, index)
    model = HoppingModel(config.L)
    region = config.region()
    if config.protocol == "qsd":
        traj = run_qsd_trajectory(
            model, QsdParams(config.gamma, config.dt), config.t_final,
            config.window, region, rng, ee_stride=config.ee_stride,
        )
        return {
            "index": index,
            "record_t": traj.record_t,
            "ds_rate": traj.ds_rate,
            "ee_t": traj.ee_t,
            "ee": traj.ee,
            "n_steps": traj.n_steps,
            "tiny_tau": 0,
            "snapshots": [],
        }
    runner = run_jump_trajectory if config.protocol == "qj" else run_projective_trajectory
    kwargs = {}
    if config.protocol == "pm":
        kwargs["propagator"] = config.propagator
    traj = runner(
        model, config.gamma, config.t_final, config.window, region, rng,
        record_events=config.record_events, snapshot_dt=config.snapshot_dt,
        **kwargs,
    )
    out = {"index": index, "n_steps": traj.n_events, "tiny_tau": traj.tiny_tau_excluded,
           "ee_t": traj.ee_t, "ee": traj.ee, "snapshots": traj.snapshots}
    out.update(traj.events)
    return out


def _worker(payload):
    config_dict, index = payload
    config = RunConfig.from_dict(config_dict)
    try:
        return run_trajectory(config, index)
    except Exception as exc:  # noqa: BLE001 - failures are counted, not fatal
        return {"index": index, "error": f"{type(exc).__name__}: {exc}"}


def _ds_edges(config: RunConfig, samples) -> np.ndarray:
    if config.hist_range is not None:
        lo, hi = config.hist_range
        return np.linspace(lo, hi, config.hist_bins + 1)
    return auto_edges(samples, bins=config.hist_bins, symmetric=True)


def _hist_block(hist: Histogram, scale: float | None = None) -> dict:
    block = {
        "edges": hist.edges.tolist(),
        "counts": hist.counts.tolist(),
        "underflow": hist.underflow,
        "overflow": hist.overflow,
        "density": hist.density().tolist(),
    }
    if scale is not None:
        block["density_L_scaled"] = (hist.density() * scale).tolist()
    return block


def _moment_block(acc: MomentAccumulator) -> dict:
    return {
        "power_sums": {"n": acc.n, "s1": acc.s1, "s2": acc.s2, "s3": acc.s3, "s4": acc.s4},
        "stats": acc.summary(),
    }


def run_ensemble(config: RunConfig, n_workers: int = 1) -> dict:
    """Run all trajectories, fold results in index order, build the report.

    When ``config.output_dir`` is set, writes events.ndjson (if events are
    recorded), summary.json, and one CSV table per histogram.
    """
    t0 = time.time()
    indices = range(config.traj_offset, config.traj_offset + config.n_traj)
    payloads = [(config.as_dict(), i) for i in indices]
    if n_workers > 1 and config.n_traj > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_worker, payloads, chunksize=1))
    else:
        results = [_worker(p) for p in payloads]

    ok = [r for r in results if "error" not in r]
    failures = [{"index": r["index"], "error": r["error"]} for r in results if "error" in r]

    summary = {
        "version": __version__,
        "config": config.as_dict(),
        "counters": {
            "n_traj": config.n_traj,
            "n_failed": len(failures),
            "n_steps": int(sum(r["n_steps"] for r in ok)),
            "tiny_tau_excluded": int(sum(r["tiny_tau"] for r in ok)),
        },
        "failures": failures,
        "valid": len(failures) <= 0.01 * config.n_traj,
        "histograms": {},
        "moments": {},
        "density_maps": {},
        "balance": None,
        "balance_partials": None,
        "ee_curve": None,
    }

    if config.protocol == "qsd":
        _summarize_qsd(config, ok, summary)
    else:
        _summarize_events(config, ok, summary)

    summary["wall_clock_s"] = round(time.time() - t0, 3)
    if config.output_dir:
        write_outputs(config, ok, summary)
    return summary


def _summarize_qsd(config: RunConfig, ok: list, summary: dict):
    rates = (np.concatenate([r["ds_rate"] for r in ok])
             if ok else np.empty(0))
    summary["moments"]["ds_rate"] = _moment_block(MomentAccumulator().add(rates))
    hist = Histogram(_ds_edges(config, rates)).add(rates)
    summary["histograms"]["ds_rate"] = _hist_block(hist, scale=config.L)
    summary["counters"]["n_window_samples"] = int(rates.size)

    if ok:
        # common stride grid: identical across trajectories by construction
        grid = ok[0]["ee_t"]
        ee = np.vstack([r["ee"] for r in ok])
        summary["ee_curve"] = {
            "t": grid.tolist(),
            "sum": ee.sum(axis=0).tolist(),
            "sum_sq": (ee**2).sum(axis=0).tolist(),
            "n": len(ok),
        }
        t_lo, t_hi = config.window
        in_win = (grid >= t_lo - 1e-9) & (grid <= t_hi + 1e-9)
        win_samples = ee[:, in_win].ravel()
        if win_samples.size:
            se_hist = Histogram(auto_edges(win_samples, config.hist_bins)).add(win_samples)
            summary["histograms"]["ee_window"] = _hist_block(se_hist)
            rescaled = win_samples / win_samples.mean()
            rs_hist = Histogram(auto_edges(rescaled, config.hist_bins)).add(rescaled)
            summary["histograms"]["ee_rescaled"] = _hist_block(rs_hist)


def _summarize_events(config: RunConfig, ok: list, summary: dict):
    def win(r):
        return r["in_window"]

    if not config.record_events or not ok:
        summary["counters"]["n_events"] = 0
        summary["counters"]["n_window_events"] = 0
        return

    ds_meas = np.concatenate([r["ds_meas"][win(r)] for r in ok])
    rate = np.concatenate([r["ds_between_rate"][win(r)] for r in ok])
    n_before = np.concatenate([r["n_before"][win(r)] for r in ok])
    site = np.concatenate([r["site"][win(r)] for r in ok])
    summary["counters"]["n_events"] = int(sum(r["t"].size for r in ok))
    summary["counters"]["n_window_events"] = int(ds_meas.size)

    summary["moments"]["ds_meas"] = _moment_block(MomentAccumulator().add(ds_meas))
    summary["moments"]["ds_between_rate"] = _moment_block(MomentAccumulator().add(rate))

    h_meas = Histogram(_ds_edges(config, ds_meas)).add(ds_meas)
    summary["histograms"]["ds_meas"] = _hist_block(h_meas, scale=config.L)
    h_rate = Histogram(_ds_edges(config, rate)).add(rate)
    summary["histograms"]["ds_between_rate"] = _hist_block(h_rate, scale=config.L)
    h_n = Histogram(np.linspace(0.0, 1.0, 102)).add(n_before)
    summary["histograms"]["n_before"] = _hist_block(h_n)

    if ds_meas.size:
        y_edges = _ds_edges(config, ds_meas)
        dm_n = DensityMap(np.linspace(0.0, 1.0, 52), y_edges).add(n_before, ds_meas)
        dm_site = DensityMap(np.arange(config.L + 1) - 0.5, y_edges).add(site, ds_meas)
        for name, dm in (("ds_meas_vs_n", dm_n), ("ds_meas_vs_site", dm_site)):
            summary["density_maps"][name] = {
                "x_edges": dm.x_edges.tolist(),
                "y_edges": dm.y_edges.tolist(),
                "counts": dm.counts.tolist(),
                "norm_mode": config.density_norm,
                "normalized": dm.normalized(config.density_norm).tolist(),
            }

    partials = []
    for r in ok:
        m = win(r)
        finite = m & np.isfinite(r["ds_between_rate"])
        partials.append([
            int(finite.sum()),
            float(np.nansum(r["ds_between_rate"][finite])),
            int(m.sum()),
            float(r["ds_meas"][m].sum()),
            float(r["tau"][m].sum()),
        ])
    summary["balance_partials"] = partials
    usable = [p for p in partials if p[0] > 0 and p[4] > 0]
    if sum(p[2] for p in usable) >= 100 and len(usable) >= 2:
        summary["balance"] = balance_statistics(usable)


# ---------------------------------------------------------------------------
# persistence


def _atomic_write(path: str, text: str):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def summary_to_json(summary: dict) -> str:
    return json.dumps(summary, sort_keys=True, indent=1)


def write_outputs(config: RunConfig, ok: list, summary: dict):
    out = config.output_dir
    os.makedirs(out, exist_ok=True)
    _atomic_write(os.path.join(out, "summary.json"), summary_to_json(summary))

    for name, block in summary["histograms"].items():
        edges = block["edges"]
        rows = ["bin_lo,bin_hi,count,density"]
        for lo, hi, c, d in zip(edges[:-1], edges[1:], block["counts"], block["density"]):
            rows.append(f"{lo!r},{hi!r},{c},{d!r}")
        _atomic_write(os.path.join(out, f"hist_{name}.csv"), "\n".join(rows) + "\n")

    if config.record_events:
        lines = []
        for r in ok:
            if config.protocol == "qsd":
                for t, rate in zip(r["record_t"], r["ds_rate"]):
                    lines.append(json.dumps({
                        "protocol": "qsd", "traj": r["index"], "t": t,
                        "site": None, "outcome": None, "n_before": None,
                        "dS_meas": None, "tau": config.dt,
                        "dS_between_rate": rate, "in_window": True,
                    }, sort_keys=True))
            else:
                for k in range(r["t"].size):
                    lines.append(json.dumps({
                        "protocol": config.protocol, "traj": r["index"],
                        "t": r["t"][k],
                        "site": int(r["site"][k]),
                        "outcome": int(r["outcome"][k]) if config.protocol == "pm" else None,
                        "n_before": r["n_before"][k],
                        "dS_meas": r["ds_meas"][k],
                        "tau": r["tau"][k],
                        "dS_between_rate": (None if not np.isfinite(r["ds_between_rate"][k])
                                            else r["ds_between_rate"][k]),
                        "in_window": bool(r["in_window"][k]),
                    }, sort_keys=True))
        _atomic_write(os.path.join(out, "events.ndjson"), "\n".join(lines) + "\n")


def load_summary(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# merging


_MERGE_IGNORED_KEYS = ("seed", "n_traj", "traj_offset", "output_dir")


def _comparable_config(cfg: dict) -> dict:
    return {k: v for k, v in cfg.items() if k not in _MERGE_IGNORED_KEYS}


def merge_summaries(summaries: list) -> dict:
    """Combine partial reports from runs that differ only in seed/n_traj."""
    if not summaries:
        raise ValueError("nothing to merge")
    base = summaries[0]
    for other in summaries[1:]:
        if _comparable_config(other["config"]) != _comparable_config(base["config"]):
            raise ValueError("summaries come from incompatible configurations")

    merged = json.loads(json.dumps(base))  # deep copy
    merged["config"]["n_traj"] = sum(s["config"]["n_traj"] for s in summaries)
    merged["merged_seeds"] = [s["config"]["seed"] for s in summaries]

    for key in merged["counters"]:
        merged["counters"][key] = sum(s["counters"].get(key, 0) for s in summaries)
    merged["failures"] = [f for s in summaries for f in s["failures"]]
    merged["valid"] = (len(merged["failures"])
                       <= 0.01 * merged["config"]["n_traj"])

    for name in merged["histograms"]:
        hists = [
            Histogram(np.asarray(s["histograms"][name]["edges"]),
                      np.asarray(s["histograms"][name]["counts"]),
                      s["histograms"][name]["underflow"],
                      s["histograms"][name]["overflow"])
            for s in summaries
        ]
        total = hists[0]
        for h in hists[1:]:
            total = total.merge(h)
        scale = merged["config"]["L"] if "density_L_scaled" in merged["histograms"][name] else None
        merged["histograms"][name] = _hist_block(total, scale=scale)

    for name in merged["moments"]:
        acc = MomentAccumulator()
        for s in summaries:
            ps = s["moments"][name]["power_sums"]
            acc = acc.merge(MomentAccumulator(ps["n"], ps["s1"], ps["s2"], ps["s3"], ps["s4"]))
        merged["moments"][name] = _moment_block(acc)

    for name in merged["density_maps"]:
        blocks = [s["density_maps"][name] for s in summaries]
        dm = DensityMap(np.asarray(blocks[0]["x_edges"]),
                        np.asarray(blocks[0]["y_edges"]),
                        np.asarray(blocks[0]["counts"]))
        for b in blocks[1:]:
            dm = dm.merge(DensityMap(np.asarray(b["x_edges"]),
                                     np.asarray(b["y_edges"]),
                                     np.asarray(b["counts"])))
        merged["density_maps"][name] = {
            "x_edges": dm.x_edges.tolist(),
            "y_edges": dm.y_edges.tolist(),
            "counts": dm.counts.tolist(),
            "norm_mode": blocks[0]["norm_mode"],
            "normalized": dm.normalized(blocks[0]["norm_mode"]).tolist(),
        }

    if any(s.get("balance_partials") for s in summaries):
        partials = [p for s in summaries for p in (s.get("balance_partials") or [])]
        merged["balance_partials"] = partials
        usable = [p for p in partials if p[0] > 0 and p[4] > 0]
        merged["balance"] = (balance_statistics(usable)
                             if sum(p[2] for p in usable) >= 100 and len(usable) >= 2
                             else None)

    curves = [s["ee_curve"] for s in summaries if s.get("ee_curve")]
    if curves:
        if any(c["t"] != curves[0]["t"] for c in curves[1:]):
            raise ValueError("entropy curves have incompatible time grids")
        merged["ee_curve"] = {
            "t": curves[0]["t"],
            "sum": np.sum([c["sum"] for c in curves], axis=0).tolist(),
            "sum_sq": np.sum([c["sum_sq"] for c in curves], axis=0).tolist(),
            "n": sum(c["n"] for c in curves),
        }

    merged["wall_clock_s"] = sum(s.get("wall_clock_s", 0) for s in summaries)
    return merged
