"""Scenario sweeps behind the command-line subcommands, plus CSV/manifest output.

Every sweep returns a list of CSV row dicts keyed by
:data:`lsaprecode.metrics.CSV_COLUMNS`.  Monte-Carlo trials are independent
work units (trial ``t`` uses random stream ``t``) and are reduced in trial
order, so results do not depend on the thread count.
"""
from __future__ import annotations

import csv
import json
import math
import subprocess
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import ScenarioConfig
from .errors import ConfigError
from .link import run_frame, table_counts
from .metrics import CSV_COLUMNS, complexity_counts, crossover_antennas

# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------
#
# Operating points (Es/N0, trial counts, Doppler and sigma grids, D values) are
# not given numerically in the source figures; the values below are artifact
# choices.  "desk" keeps M/P = 10 at a smaller array and fewer trials.

_SCALES = {
    "desk": {"M": 40, "P": 4, "trials": 20},
    "paper": {"M": 100, "P": 10, "trials": 200},
}

PRESETS = {
    "fig3": {"command": "complexity", "config": {"P": 8, "L": 38, "K": 512},
             "sweep": {"M_grid": list(range(8, 513, 8)), "B_grid": [1, 6, 12], "Q_grid": [1, 2, 3]}},
    "fig4": {"command": "init-mse", "config": {"esn0_db": [8.0]},
             "sweep": {"q_max": 10, "D_grid": [None, 20.0, 5.0]}},
    "fig5": {"command": "tracking", "config": {"esn0_db": [8.0]},
             "sweep": {"fd_grid": [0.0, 30.0, 75.0, 150.0], "D_grid": [None]}},
    "fig6": {"command": "chan-error", "config": {"esn0_db": [8.0]},
             "sweep": {"sigma_h2_db_grid": [-30.0, -25.0, -20.0, -15.0, -10.0, -5.0]}},
    "fig7": {"command": "ser-curve", "config": {"esn0_db": [0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0]},
             "sweep": {"fd_grid": [10.0, 75.0, 150.0], "B_grid": [1, 6, 12], "include_mf": True}},
}

SWEEP_DEFAULTS = {
    "init-mse": {"q_max": 10, "D_grid": [None], "oracle": False},
    "tracking": {"fd_grid": [0.0, 30.0, 75.0, 150.0], "D_grid": [None]},
    "chan-error": {"sigma_h2_db_grid": [-30.0, -20.0, -10.0]},
    "ser-curve": {"fd_grid": [10.0], "B_grid": [1, 6, 12], "include_mf": True},
    "complexity": {"M_grid": list(range(8, 513, 8)), "B_grid": [1, 6, 12], "Q_grid": [1, 2, 3]},
}


def preset_settings(name, scale="desk"):
    """Return ``(config_dict, sweep_dict)`` for a preset at a given scale."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    if scale not in _SCALES:
        raise ConfigError(f"unknown scale {scale!r}; choose desk or paper")
    p = PRESETS[name]
    cfg = {} if p["command"] == "complexity" else dict(_SCALES[scale])
    cfg.update(p["config"])
    return cfg, dict(p["sweep"])


# ---------------------------------------------------------------------------
# Running scenarios
# ---------------------------------------------------------------------------

def run_scenario(cfg, threads=1):
    """Run ``cfg.trials`` frames and merge them in trial order."""
    trials = range(cfg.trials)
    if threads > 1 and cfg.trials > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda t: run_frame(cfg, t), trials))
    else:
        records = [run_frame(cfg, t) for t in trials]
    total = records[0]
    for r in records[1:]:
        total = total.merge(r)
    return total


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return ""
        return repr(v)
    return str(v)


def _base_row(cfg, mu):
    name, arg = cfg.approach_name, cfg.approach_arg
    counts = table_counts(cfg)
    return {
        "scenario_id": cfg.scenario_id,
        "approach": cfg.approach,
        "M": cfg.M, "P": cfg.P, "K": cfg.K, "L": cfg.L,
        "B": (1 if arg is None else arg) if name == "zf" else None,
        "Q": (2 if arg is None else arg) if name == "tpe" else
             (cfg.init_q if name == "proposed" and cfg.init_mode == "order_recursion" else None),
        "mu": mu, "fd_hz": cfg.fd_hz, "sigma_h2": cfg.sigma_h2,
        "ifft_cm": counts.ifft if counts else None,
        "precode_cm": counts.precode if counts else None,
        "coeff_cm": counts.coeff if counts else None,
        "trials": cfg.trials, "seed": cfg.seed,
    }


def record_rows(rec, cfg, q_offset=None):
    """CSV rows for one scenario: one row per (Es/N0, block) plus an ``all`` row per Es/N0.

    With ``q_offset`` set, block ``n`` is reported as recursion order
    ``Q = q_offset + n`` (static channel: each block performs one more order
    recursion on the same channel).
    """
    base = _base_row(cfg, rec.mu)
    mse, theory = rec.mse, rec.mse_theory
    ser_blocks = rec.ser_per_block()
    ser_all = rec.ser()
    rows = []
    for i, snr in enumerate(rec.esn0_db):
        for n in range(len(mse)):
            row = dict(base, esn0_db=snr, block_n=n, mse_measured=mse[n],
                       mse_theory=theory[n], ser=ser_blocks[i, n])
            if q_offset is not None:
                row["Q"] = q_offset + n
            rows.append(row)
        rows.append(dict(base, esn0_db=snr, block_n="all", mse_measured=float(np.mean(mse)),
                         mse_theory=float(np.mean(theory)), ser=ser_all[i]))
    return rows


def _sweep(sweep, command):
    merged = dict(SWEEP_DEFAULTS[command])
    unknown = set(sweep) - set(merged)
    if unknown:
        raise ConfigError(f"unknown sweep keys for {command}: {sorted(unknown)}")
    merged.update(sweep)
    return merged


def _d_label(D):
    return "indep" if D is None else f"D{D:g}"


def cmd_init_mse(cfg, sweep=None, threads=1):
    """Order-recursion initialization: MSE and SER against recursion count ``Q``.

    Runs a static channel with ``Q = 0`` at block 0; every later block applies
    one more recursion on the same channel, so block ``n`` is order ``Q = n``.
    Sweep key ``oracle`` starts from exact ZF instead.  A ``zf`` reference
    scenario is emitted per channel type.
    """
    sw = _sweep(sweep or {}, "init-mse")
    mode = "oracle" if sw["oracle"] else "order_recursion"
    rows = []
    for D in sw["D_grid"]:
        c = cfg.replace(D=D, fd_hz=0.0, sigma_h2=0.0, approach="proposed", init_mode=mode,
                        init_q=0, blocks_per_frame=int(sw["q_max"]) + 1, reinit_period=None,
                        scenario_id=f"init_{_d_label(D)}")
        rows += record_rows(run_scenario(c, threads), c, q_offset=None if sw["oracle"] else 0)
        z = c.replace(approach="zf", scenario_id=f"init_{_d_label(D)}_zf")
        rows += record_rows(run_scenario(z, threads), z)
    return rows


def cmd_tracking(cfg, sweep=None, threads=1):
    """Per-block tracking MSE/SER for each Doppler frequency, exact start."""
    sw = _sweep(sweep or {}, "tracking")
    rows = []
    for D in sw["D_grid"]:
        for fd in sw["fd_grid"]:
            c = cfg.replace(D=D, fd_hz=float(fd), approach="proposed", init_mode="oracle",
                            scenario_id=f"track_{_d_label(D)}_fd{fd:g}")
            rows += record_rows(run_scenario(c, threads), c)
    return rows


def cmd_chan_error(cfg, sweep=None, threads=1):
    """Converged precoder error and SER against channel-estimation error variance."""
    sw = _sweep(sweep or {}, "chan-error")
    rows = []
    grid = [None] + list(sw["sigma_h2_db_grid"])
    for s_db in grid:
        s = 0.0 if s_db is None else 10.0 ** (s_db / 10.0)
        label = "perfect" if s_db is None else f"{s_db:g}dB"
        c = cfg.replace(sigma_h2=s, fd_hz=0.0, approach="proposed", init_mode="oracle",
                        scenario_id=f"chanerr_{label}")
        rows += record_rows(run_scenario(c, threads), c)
    return rows


def cmd_ser_curve(cfg, sweep=None, threads=1):
    """SER against Es/N0 for the proposed scheme (several Doppler values), ZF(B) and MF."""
    sw = _sweep(sweep or {}, "ser-curve")
    rows = []
    fds = [float(f) for f in sw["fd_grid"]]
    for fd in fds:
        c = cfg.replace(fd_hz=fd, approach="proposed", init_mode="oracle",
                        scenario_id=f"ser_proposed_fd{fd:g}")
        rows += record_rows(run_scenario(c, threads), c)
    # Per-block baselines do not depend on the Doppler frequency.
    fd0 = fds[0] if fds else cfg.fd_hz
    for B in sw["B_grid"]:
        c = cfg.replace(fd_hz=fd0, approach=f"zf({int(B)})", scenario_id=f"ser_zf{int(B)}")
        rows += record_rows(run_scenario(c, threads), c)
    if sw["include_mf"]:
        c = cfg.replace(fd_hz=fd0, approach="mf", scenario_id="ser_mf")
        rows += record_rows(run_scenario(c, threads), c)
    return rows


def cmd_complexity(cfg, sweep=None, threads=1):
    """Table-1 CM counts per approach over an antenna grid, plus the crossover ``M*``."""
    sw = _sweep(sweep or {}, "complexity")
    P, K, L = cfg.P, cfg.K, cfg.L
    rows = []
    approaches = [("proposed", None, None)]
    approaches += [(f"zf({int(B)})", int(B), None) for B in sw["B_grid"]]
    approaches += [(f"tpe({int(Q)})", None, int(Q)) for Q in sw["Q_grid"]]
    for M in sw["M_grid"]:
        M = int(M)
        if M < P:
            continue
        for name, B, Q in approaches:
            c = complexity_counts(name, M, P, K, L)
            rows.append({"scenario_id": "complexity", "approach": name, "M": M, "P": P, "K": K,
                         "L": L, "B": B, "Q": Q, "ifft_cm": c.ifft, "precode_cm": c.precode,
                         "coeff_cm": c.coeff, "trials": 0, "seed": cfg.seed})
    M_valid = [int(m) for m in sw["M_grid"] if int(m) >= P]
    for B in sw["B_grid"]:
        m_star = crossover_antennas(P, K, L, M_valid, B=int(B))
        rows.append({"scenario_id": f"crossover_zf{int(B)}", "approach": "proposed", "M": m_star,
                     "P": P, "K": K, "L": L, "B": int(B), "trials": 0, "seed": cfg.seed})
    return rows


COMMANDS = {
    "init-mse": cmd_init_mse,
    "tracking": cmd_tracking,
    "chan-error": cmd_chan_error,
    "ser-curve": cmd_ser_curve,
    "complexity": cmd_complexity,
}


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def write_csv(rows, path):
    """Write rows with the fixed column schema; missing values are empty cells."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r.get(col)) for col in CSV_COLUMNS])


def git_describe(cwd=None):
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], cwd=cwd,
                             capture_output=True, text=True, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def write_manifest(path, command, cfg, sweep, preset=None, scale=None):
    """Companion JSON: config echo, sweep, seed and source revision."""
    manifest = {
        "command": command,
        "preset": preset,
        "scale": scale,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "sweep": sweep,
        "git_describe": git_describe(Path(__file__).resolve().parent),
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
