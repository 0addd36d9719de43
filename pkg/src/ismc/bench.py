"""Seeded, reproducible experiment runner behind the command line.

Each trial gets its own random stream derived from ``(master_seed, trial)``
so results do not depend on how trials are spread over worker processes,
and adding trials never changes earlier ones.
"""

from __future__ import annotations

import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .ais import run_ais
from .core import importance_weights, snis_estimate, uis_estimate, z_hat
from .diagnostics import ess_hat
from .errors import ConfigurationError
from .mis import mis_sample, mis_weight
from .oracle import default_spec, expectation

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
COMMANDS = ("estimate", "ais", "compare")


def trial_rng(master_seed, trial):
    """Independent stream for one trial, keyed by ``(master_seed, trial)``."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(trial,)))


# ---------------------------------------------------------------------------
# columns


def _batch_columns(prefix, names):
    cols = []
    for f in names:
        cols += [f"uis{prefix}[{f}]", f"snis{prefix}[{f}]"]
    return cols + [f"log_z_hat{prefix}", f"ess_hat{prefix}", f"inv_max_weight{prefix}"]


def columns(exp, command):
    """Fixed, ordered column set for an experiment and subcommand."""
    names = exp.integrands
    if command == "compare":
        cols = ["trial", "iteration"]
        for s in exp.mis_cfg["schemes"]:
            cols += _batch_columns(f"[{s}]", names) + [f"proposal_evals[{s}]"]
        return cols + ["target_evals", "wall_time_ms"]
    return (
        ["trial", "iteration"]
        + _batch_columns("", names)
        + ["target_evals", "proposal_evals", "wall_time_ms"]
    )


def check_command(exp, command):
    if command == "estimate" and exp.method not in ("is", "mis"):
        raise ConfigurationError("estimate runs method 'is' or 'mis'; use the ais subcommand")
    if command == "estimate" and exp.method == "mis" and not exp.mis_cfg.get("scheme"):
        raise ConfigurationError("estimate with method 'mis' needs [mis] scheme")
    if command == "ais" and exp.method != "ais":
        raise ConfigurationError("the ais subcommand needs method = \"ais\"")
    if command == "compare":
        if exp.method != "mis" or not exp.mis_cfg.get("schemes"):
            raise ConfigurationError("compare needs method = \"mis\" and a [mis] schemes list")
        if len(exp.mis_cfg["schemes"]) < 2:
            raise ConfigurationError("compare needs at least two schemes")
        m = len(exp.mis_cfg["proposals"])
        counts = {tuple(exp.build_scheme(s).sample_counts(m)) for s in exp.mis_cfg["schemes"]}
        if len(counts) != 1:
            raise ConfigurationError("compared schemes must draw the same samples per proposal")


# ---------------------------------------------------------------------------
# trials


def _batch_values(b, fs, log_z):
    vals = []
    for f in fs:
        uis = uis_estimate(b, f, log_z) if log_z is not None else None
        snis = snis_estimate(b, f) if not b.is_degenerate() else None
        vals += [uis, snis]
    if b.is_degenerate():
        return vals + [z_hat(b), None, None]
    ess = ess_hat(b)
    return vals + [z_hat(b), ess.ess_hat, ess.inv_max_weight]


def _estimate_trial(exp, trial, t, fs):
    rng = trial_rng(exp.master_seed, trial)
    if exp.method == "is":
        q = exp.build_is_proposal()
        b = importance_weights(t, q, q.draw(rng, exp.is_cfg["samples"]))
    else:
        proposals = exp.build_mis_proposals()
        scheme = exp.build_scheme(exp.mis_cfg["scheme"])
        b = mis_weight(mis_sample(proposals, scheme, rng), proposals, scheme, t)
    vals = _batch_values(b, fs, t.known_log_z)
    return [[trial, 0] + vals + [b.target_eval_count, b.proposal_eval_count]]


def _ais_trial(exp, trial, t, fs):
    rng = trial_rng(exp.master_seed, trial)
    cfg = exp.build_ais_config(rng)
    out = run_ais(t, cfg, rng)
    rows = []
    for rec in out.per_iteration:
        vals = _batch_values(rec.batch, fs, t.known_log_z)
        rows.append([trial, rec.iteration] + vals + list(rec.counters.table_pair()))
    vals = _batch_values(out.history, fs, t.known_log_z)
    rows.append([trial, "pooled"] + vals + list(out.counters.table_pair()))
    return rows


def _compare_trial(exp, trial, t, fs):
    rng = trial_rng(exp.master_seed, trial)
    proposals = exp.build_mis_proposals()
    schemes = [exp.build_scheme(s) for s in exp.mis_cfg["schemes"]]
    samples = mis_sample(proposals, schemes[0], rng)
    row = [trial, 0]
    for s in schemes:
        b = mis_weight(samples, proposals, s, t)
        row += _batch_values(b, fs, t.known_log_z) + [b.proposal_eval_count]
    return [row + [len(samples)]]


_RUNNERS = {"estimate": _estimate_trial, "ais": _ais_trial, "compare": _compare_trial}


def run_trial(exp, command, trial, timing=False):
    """Rows of one trial; the last column is wall time (blank unless ``timing``)."""
    t = exp.build_target()
    fs = exp.build_integrands()
    start = time.perf_counter()
    rows = _RUNNERS[command](exp, trial, t, fs)
    elapsed = (time.perf_counter() - start) * 1e3 if timing else None
    return [r + [elapsed] for r in rows]


def _job(args):
    return run_trial(*args)


def run_trials(exp, command, workers=1, timing=False):
    """All rows in trial order, regardless of ``workers``."""
    jobs = [(exp, command, k, timing) for k in range(exp.trials)]
    if workers <= 1:
        per_trial = [_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_trial = list(pool.map(_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [row for rows in per_trial for row in rows]


# ---------------------------------------------------------------------------
# summary


def _oracle_values(exp):
    """Reference values by column stem: ``I(f)`` by quadrature and ``log Z``."""
    t = exp.build_target()
    ref = {"log_z_hat": t.known_log_z}
    if t.dim <= 2:
        spec = default_spec(t)
        for f in exp.build_integrands():
            ref[f.name] = expectation(t, f, spec).value
    return ref


def _reference_for(col, ref):
    if col.startswith("log_z_hat"):
        return ref.get("log_z_hat")
    if col.startswith(("uis", "snis")):
        return ref.get(col[col.rindex("[") + 1 : -1])
    return None


def _stats(values):
    v = np.array([x for x in values if x is not None], dtype=float)
    if v.size == 0:
        return None, None, 0
    mean = float(np.mean(v))
    var = float(np.var(v, ddof=1)) if v.size > 1 else None
    return mean, var, int(v.size)


def summarize(exp, command, cols, rows):
    """Means, sample variances and oracle references of the estimator columns."""
    ref = _oracle_values(exp)
    skip = {"trial", "iteration", "wall_time_ms"}
    if command == "ais":
        last = exp.ais_cfg["iterations"] - 1
        groups = {
            "final": [r for r in rows if r[1] == last],
            "pooled": [r for r in rows if r[1] == "pooled"],
        }
    else:
        groups = {"all": rows}
    out = []
    for group, grows in groups.items():
        for i, col in enumerate(cols):
            if col in skip:
                continue
            mean, var, n = _stats([r[i] for r in grows])
            out.append(
                {"group": group, "quantity": col, "n": n, "mean": mean,
                 "variance": var, "oracle": _reference_for(col, ref)}
            )
    if command == "compare":
        out += _variance_ratios(exp, out)
    return out


def _variance_ratios(exp, entries):
    var = {e["quantity"]: e["variance"] for e in entries}
    schemes = exp.mis_cfg["schemes"]
    out = []
    for f in exp.integrands:
        for i, a in enumerate(schemes):
            for b in schemes[i + 1 :]:
                va, vb = var.get(f"snis[{a}][{f}]"), var.get(f"snis[{b}][{f}]")
                ratio = va / vb if va is not None and vb else None
                out.append(
                    {"group": "all", "quantity": f"variance_ratio[{a}/{b}][{f}]", "n": None,
                     "mean": ratio, "variance": None, "oracle": None}
                )
    return out


# ---------------------------------------------------------------------------
# output


def fmt_value(v):
    """CSV cell: 17 significant digits for floats, blank for missing."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def _json_value(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v) or math.isnan(v):
            return fmt_value(v)
        return v
    if isinstance(v, np.integer):
        return int(v)
    return v


def header_line(command):
    return f"# ismc {__version__} schema={SCHEMA_VERSION} command={command}"


SUMMARY_COLUMNS = ("group", "quantity", "n", "mean", "variance", "oracle")


def render_csv(command, cols, rows):
    buf = io.StringIO()
    buf.write(header_line(command) + "\n")
    buf.write(",".join(cols) + "\n")
    for r in rows:
        buf.write(",".join(fmt_value(v) for v in r) + "\n")
    return buf.getvalue()


def render_summary_csv(command, summary):
    buf = io.StringIO()
    buf.write(header_line(command) + " table=summary\n")
    buf.write(",".join(SUMMARY_COLUMNS) + "\n")
    for e in summary:
        buf.write(",".join(fmt_value(e[c]) for c in SUMMARY_COLUMNS) + "\n")
    return buf.getvalue()


def render_json(command, exp, cols, rows, summary):
    doc = {
        "tool": "ismc",
        "version": __version__,
        "schema": SCHEMA_VERSION,
        "command": command,
        "master_seed": exp.master_seed,
        "trials": exp.trials,
        "columns": list(cols),
        "rows": [[_json_value(v) for v in r] for r in rows],
        "summary": [{k: _json_value(v) for k, v in e.items()} for e in summary],
    }
    return json.dumps(doc, indent=1) + "\n"


def summary_path(path):
    p = Path(path)
    return p.with_name(p.stem + ".summary" + p.suffix)


def run_experiment(exp, command, workers=1, timing=False, stdout=None):
    """Run every trial and write the result files.

    Returns the list of paths written (empty when writing to ``stdout``).
    """
    check_command(exp, command)
    cols = columns(exp, command)
    rows = run_trials(exp, command, workers, timing)
    summary = summarize(exp, command, cols, rows)
    if exp.output_format == "json":
        files = {exp.output_path: render_json(command, exp, cols, rows, summary)}
    else:
        body = render_csv(command, cols, rows)
        summ = render_summary_csv(command, summary)
        if exp.output_path is None:
            files = {None: body + "\n" + summ}
        else:
            files = {exp.output_path: body, str(summary_path(exp.output_path)): summ}
    written = []
    for path, text in files.items():
        if path is None:
            stdout.write(text)
        else:
            Path(path).parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", newline="") as fh:
                fh.write(text)
            written.append(path)
    log.info("wrote %s", ", ".join(written) or "stdout")
    return written

