"""Per-round CSV exports, the audit log, and the run manifest.

One CSV per evaluation figure. Floats are written with 17 significant digits
so the text parses back to the identical binary64 value; a missing AUC (a
single-class test set) is an empty field; booleans are 0/1.
"""

from __future__ import annotations

import csv
import hashlib
import io
import platform
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__, tcm
from .config import SimConfig

# file name -> (columns, row builder)
FIGURE_FILES = {
    "global_metrics.csv": ("round", "accuracy", "f1", "auc"),
    "dp_noise_scale.csv": ("round", "mean_noise_sigma"),
    "server_status.csv": ("round", "server_alive", "coordinator_id", "active_client_count"),
    "tcm_state_count.csv": ("round", "tcm_entry_count"),
    "delta_norm.csv": ("round", "aggregated_delta_l2"),
    "zkip_failures.csv": ("round", "zkip_failures"),
    "ebcd_stats.csv": ("round", "variance", "kurtosis", "skewness"),
    "ebcd_alerts.csv": ("round", "alert"),
    "earlystop_server_best_val_acc.csv": ("round", "best_val_acc"),
}

_FIELD = {
    "variance": "ebcd_variance",
    "kurtosis": "ebcd_kurtosis",
    "skewness": "ebcd_skewness",
    "alert": "ebcd_alert",
    "best_val_acc": "server_best_val_acc",
}

AUDIT_FILE = "audit_manifold.log"
MANIFEST_FILE = "run_manifest.txt"


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def render_csv(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def figure_tables(history) -> dict[str, str]:
    out = {}
    for name, columns in FIGURE_FILES.items():
        rows = [[getattr(h, _FIELD.get(c, c)) for c in columns] for h in history]
        out[name] = render_csv(columns, rows)
    return out


def manifest_text(cfg: SimConfig, result) -> str:
    lines = [
        f"package_version={__version__}",
        f"config_sha256={cfg.digest()}",
        f"master_seed={cfg.master_seed}",
        f"python={platform.python_version()}",
        f"numpy={np.__version__}",
        f"rounds_completed={len(result.history)}",
        f"stop_reason={result.stop_reason}",
        f"tcm_entries={len(result.manifold)}",
        f"tcm_head={result.manifold.head_hash.hex()}",
        f"final_model_sha256={hashlib.sha256(result.final_model.to_bytes()).hexdigest()}",
    ]
    return "\n".join(lines) + "\n"


def write_outputs(cfg: SimConfig, result, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in figure_tables(result.history).items():
        p = out / name
        p.write_text(text, encoding="utf-8", newline="")
        written.append(p)
    tcm.export_manifold(result.manifold, out / AUDIT_FILE)
    (out / MANIFEST_FILE).write_text(manifest_text(cfg, result), encoding="utf-8")
    return written + [out / AUDIT_FILE, out / MANIFEST_FILE]


SWEEP_COLUMNS = ("epsilon", "final_accuracy", "final_f1", "final_auc", "mean_sigma", "status")


def sweep_summary(rows) -> str:
    return render_csv(SWEEP_COLUMNS, rows)
