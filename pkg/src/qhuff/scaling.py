"""Network-size sweeps and power-law fits (construction only, no simulation)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuit.layout import is_power_of_two, make_layout
from .comm import open_session, run_session
from .qmath import SourceModel
from .storage import build_parallel_encoder


@dataclass(frozen=True)
class PowerFit:
    """``y ~ coeff * x**exponent`` fitted by least squares in log-log space."""

    coeff: float
    exponent: float
    r_squared: float

    def as_dict(self) -> dict:
        return {"coeff": self.coeff, "exponent": self.exponent, "r_squared": self.r_squared}


def fit_power(x, y) -> PowerFit | None:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2 or np.any(x <= 0) or np.any(y <= 0):
        return None
    lx, ly = np.log(x), np.log(y)
    slope, icpt = np.polyfit(lx, ly, 1)
    pred = slope * lx + icpt
    ss_res = float(((ly - pred) ** 2).sum())
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return PowerFit(math.exp(icpt), float(slope), r2)


def storage_rows(model: SourceModel, ns) -> list[dict]:
    rows = []
    for n in ns:
        if not is_power_of_two(n):
            raise ValueError(f"storage sweep needs powers of two, got {n}")
        net = build_parallel_encoder(make_layout(n, model.code), model.code)
        rows.append({"n": n, **net.depth_metrics().as_dict()})
    return rows


def comm_rows(model: SourceModel, ns, flush_every: int | None = None) -> list[dict]:
    rows = []
    for n in ns:
        s = run_session(open_session(model, n, construct_only=True), flush_every=flush_every)
        rows.append({"n": n, **s.network.depth_metrics().as_dict()})
    return rows


def sweep(model: SourceModel, mode: str, ns, flush_every: int | None = None) -> dict:
    """Table of depth metrics against N plus the fits used to judge scaling.

    ``depth_vs_log2n`` fits idealized depth against log2 N (storage mode);
    ``gates_vs_n`` is the log-log slope of the gate count against N.
    """
    ns = sorted(set(int(n) for n in ns))
    if mode == "storage":
        rows = storage_rows(model, ns)
    elif mode == "comm":
        rows = comm_rows(model, ns, flush_every)
    else:
        raise ValueError(f"unknown sweep mode {mode!r}")
    n = [r["n"] for r in rows]
    fits = {
        "gates_vs_n": fit_power(n, [r["gate_count"] for r in rows]),
        "idealized_depth_vs_n": fit_power(n, [r["idealized_depth"] for r in rows]),
    }
    if mode == "storage":
        logs = [math.log2(v) for v in n]
        fits["depth_vs_log2n"] = fit_power(logs, [r["idealized_depth"] for r in rows])
        fits["strict_depth_vs_log2n"] = fit_power(logs, [r["strict_depth"] for r in rows])
    return {"mode": mode, "rows": rows,
            "fits": {k: (v.as_dict() if v else None) for k, v in fits.items()}}
