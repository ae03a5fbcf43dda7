"""CSV serialization of tracking and solve traces.

Files are written with explicit newlines and shortest round-trip float
formatting so a run is reproducible byte for byte: same scenario, same
seed, same bytes.  Quantities a record does not carry become empty
fields, never zeros.
"""

from __future__ import annotations

import numpy as np

TRACE_HEADER = (
    "k,xi,step_status,solver_iters,kkt_stationarity,kkt_equality,"
    "region_violation,jac_error,oracle_error"
)
SOLVE_HEADER = "j,step_inf_norm,kkt_total,error_vs_oracle"
BENCH_HEADER = (
    "scenario,status,records,max_oracle_error,mean_oracle_error,"
    "max_region_violation,solver_iters,jacobian_evals"
)


def fmt_float(value):
    """Shortest decimal that round-trips; empty field for a missing value."""
    if value is None:
        return ""
    return repr(float(value))


def fmt_xi(xi):
    """Vector parameters join with semicolons inside the one CSV field."""
    arr = np.atleast_1d(np.asarray(xi, dtype=float))
    return ";".join(repr(float(v)) for v in arr)


def trace_rows(trace):
    """Trace records as CSV lines (header excluded)."""
    rows = []
    for rec in trace.records:
        status = "" if rec.step_status is None else rec.step_status.value
        iters = "" if rec.solver_iters is None else str(rec.solver_iters)
        rows.append(
            ",".join(
                (
                    str(rec.k),
                    fmt_xi(rec.xi),
                    status,
                    iters,
                    fmt_float(rec.kkt.stationarity),
                    fmt_float(rec.kkt.equality),
                    fmt_float(rec.region_violation),
                    fmt_float(rec.jac_error),
                    fmt_float(rec.oracle_error),
                )
            )
        )
    return rows


def write_trace_csv(path, trace):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(TRACE_HEADER + "\n")
        for row in trace_rows(trace):
            fh.write(row + "\n")


def write_solve_csv(path, trace, errors=None):
    """Per-iteration solve log; errors vs the reference point optional."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(SOLVE_HEADER + "\n")
        for i, rec in enumerate(trace.records):
            err = None if errors is None else errors[i]
            fh.write(
                ",".join(
                    (
                        str(rec.j),
                        fmt_float(rec.step_inf_norm),
                        fmt_float(rec.kkt.total),
                        fmt_float(err),
                    )
                )
                + "\n"
            )


def summarize_trace(trace):
    """Headline numbers of one tracking run, missing ones as None."""
    oracle_errors = [r.oracle_error for r in trace.records if r.oracle_error is not None]
    violations = [r.region_violation for r in trace.records]
    return {
        "records": len(trace.records),
        "max_oracle_error": max(oracle_errors) if oracle_errors else None,
        "mean_oracle_error": (
            sum(oracle_errors) / len(oracle_errors) if oracle_errors else None
        ),
        "max_region_violation": max(violations) if violations else None,
        "solver_iters": trace.counters.solver_iters,
        "jacobian_evals": trace.counters.jacobian_evals,
    }


def summary_line(summary):
    parts = []
    for key in (
        "max_oracle_error",
        "mean_oracle_error",
        "max_region_violation",
        "solver_iters",
        "jacobian_evals",
    ):
        value = summary[key]
        if value is None:
            parts.append(f"{key}=-")
        elif isinstance(value, float):
            parts.append(f"{key}={fmt_float(value)}")
        else:
            parts.append(f"{key}={value}")
    return "summary " + " ".join(parts)


def write_bench_csv(path, rows):
    """Combined benchmark summary, one row per scenario in config order.

    Each row is (name, status, summary-or-None); scenarios that failed
    before producing a trace carry empty statistics.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(BENCH_HEADER + "\n")
        for name, status, summary in rows:
            if summary is None:
                summary = {
                    "records": None,
                    "max_oracle_error": None,
                    "mean_oracle_error": None,
                    "max_region_violation": None,
                    "solver_iters": None,
                    "jacobian_evals": None,
                }
            fh.write(
                ",".join(
                    (
                        name,
                        status,
                        "" if summary["records"] is None else str(summary["records"]),
                        fmt_float(summary["max_oracle_error"]),
                        fmt_float(summary["mean_oracle_error"]),
                        fmt_float(summary["max_region_violation"]),
                        "" if summary["solver_iters"] is None else str(summary["solver_iters"]),
                        "" if summary["jacobian_evals"] is None
                        else str(summary["jacobian_evals"]),
                    )
                )
                + "\n"
            )
