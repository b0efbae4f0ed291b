"""Result persistence: delimited output, accumulator streams, the run
manifest, and the rendered figures that accompany each report."""

from __future__ import annotations

import datetime
import json
import math
import os
import platform

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .config import ExperimentConfig
from .model import DiagnosticResult
from .spinmc import SEED_SCHEME

CSV_COLUMNS = ("quantity", "n", "L", "p", "value", "error", "method", "seed_base")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return repr(x)
    return str(x)


def results_csv_text(rows: list[DiagnosticResult]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for r in rows:
        seed = r.provenance.get("seed_base", "")
        lines.append(",".join(_fmt(v) for v in (
            r.quantity, r.n, r.L, r.p, r.value, r.error, r.method, seed)))
    return "\n".join(lines) + "\n"


def results_jsonl_text(rows: list[DiagnosticResult]) -> str:
    out = []
    for r in rows:
        rec = {"quantity": r.quantity, "n": r.n, "L": r.L, "p": r.p,
               "value": r.value, "error": r.error, "method": r.method,
               "flag": r.flag, "provenance": r.provenance}
        out.append(json.dumps(rec, sort_keys=True, default=str))
    return "\n".join(out) + "\n"


def write_results(rows, cfg: ExperimentConfig, out_dir: str) -> str:
    if cfg.io.format == "csv":
        path = os.path.join(out_dir, "results.csv")
        text = results_csv_text(rows)
    else:
        path = os.path.join(out_dir, "results.jsonl")
        text = results_jsonl_text(rows)
    with open(path, "w") as fh:
        fh.write(text)
    return path


def write_accumulators(accs, out_dir: str) -> str | None:
    if not accs:
        return None
    path = os.path.join(out_dir, "accumulators.jsonl")
    with open(path, "w") as fh:
        for acc in accs:
            fh.write(acc.to_jsonl() + "\n")
    return path


def write_manifest(cfg: ExperimentConfig, out_dir: str, wall_time_s: float,
                   extra: dict | None = None) -> str:
    import numba
    import numpy
    import scipy

    from . import __version__
    manifest = {
        "command": cfg.command,
        "config": cfg.to_dict(),
        "seed_scheme": SEED_SCHEME,
        "versions": {
            "tcdiag": __version__,
            "python": platform.python_version(),
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
        },
        "wall_time_s": wall_time_s,
        "timestamp_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def write_reports(reports: dict[str, str], out_dir: str) -> list[str]:
    paths = []
    for name, text in reports.items():
        path = os.path.join(out_dir, f"report_{name}.txt")
        with open(path, "w") as fh:
            fh.write(text + "\n")
        paths.append(path)
    return paths


# -- figures -------------------------------------------------------------------


def _new_axes(title, xlabel, ylabel):
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3)
    return fig, ax


def _save(fig, out_dir, name):
    path = os.path.join(out_dir, f"{name}.png")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def render_figures(command: str, data: dict, out_dir: str) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    if command == "threshold" and "threshold" in data:
        d = data["threshold"]
        fig, ax = _new_axes("Binder ratio crossing", "error rate p", "B")
        for L, (ps, bs, es) in sorted(d["curves"].items()):
            ax.errorbar(ps, bs, yerr=es, marker="o", ms=3, capsize=2, label=f"L={L}")
        if d.get("crossing"):
            pc, err = d["crossing"]
            ax.axvline(pc, color="k", ls="--", lw=1)
            ax.axvspan(pc - err, pc + err, color="k", alpha=0.15)
        ax.legend()
        paths.append(_save(fig, out_dir, "binder_crossing"))
    if command == "collapse" and "collapse" in data:
        d = data["collapse"]
        fit = d["fit"]
        fig, axes = plt.subplots(2, 2, figsize=(9, 7))
        for L, (ps, m2s, bs) in sorted(d["data"].items()):
            ps = np.asarray(ps)
            x = (ps - fit["p_c"]) * float(L) ** (1.0 / fit["nu"])
            axes[0, 0].plot(ps, m2s, "o-", ms=3, label=f"L={L}")
            axes[0, 1].plot(x, np.asarray(m2s) * float(L) ** (2 * fit["beta"] / fit["nu"]),
                            "o", ms=3)
            axes[1, 0].plot(ps, bs, "o-", ms=3)
            axes[1, 1].plot(x, bs, "o", ms=3)
        axes[0, 0].set_ylabel(r"$\langle m^2\rangle$")
        axes[0, 1].set_ylabel(r"$\langle m^2\rangle L^{2\beta/\nu}$")
        axes[1, 0].set_ylabel("B")
        axes[1, 1].set_ylabel("B")
        axes[1, 0].set_xlabel("p")
        axes[1, 1].set_xlabel(r"$(p-p_c)L^{1/\nu}$")
        axes[0, 0].legend(fontsize=8)
        for ax in axes.ravel():
            ax.grid(alpha=0.3)
        fig.suptitle(f"collapse: p_c={fit['p_c']:.4f}, nu={fit['nu']:.3f}, "
                     f"beta={fit['beta']:.3f}")
        paths.append(_save(fig, out_dir, "fss_collapse"))
    if command == "negativity" and "negativity" in data:
        d = data["negativity"]
        fig, ax = _new_axes("Topological negativity", "error rate p", r"$\gamma_N$")
        for L, (ps, gs, es) in sorted(d["curves"].items()):
            ax.errorbar(ps, gs, yerr=es, marker="s", ms=3, capsize=2, label=f"L={L}")
        ax.axhline(d["log2"], color="gray", ls=":", label="log 2")
        ax.axhline(0.0, color="gray", ls="-", lw=0.8)
        ax.legend()
        paths.append(_save(fig, out_dir, "topological_negativity"))
    if command == "coherent-info" and "coherent-info" in data:
        d = data["coherent-info"]
        fig, ax = _new_axes("Coherent information (single error type)",
                            "error rate p", r"$I_c$")
        for L, (ps, vs, es) in sorted(d["curves"].items()):
            ax.errorbar(ps, vs, yerr=es, marker="o", ms=3, capsize=2, label=f"L={L}")
        for ref in d["bounds"]:
            ax.axhline(ref, color="gray", ls=":", lw=0.8)
        ax.legend()
        paths.append(_save(fig, out_dir, "coherent_info"))
    if command == "relative-entropy" and "relative-entropy" in data:
        d = data["relative-entropy"]
        fig, ax = _new_axes("Relative entropy vs anyon separation",
                            "separation", r"$D^{(n)}$")
        for label, (rs, ds, es) in sorted(d["curves"].items()):
            if rs:
                ax.errorbar(rs, ds, yerr=es, marker="o", ms=3, capsize=2, label=label)
        ax.legend(fontsize=8)
        paths.append(_save(fig, out_dir, "relative_entropy"))
    if command == "moments" and "moments" in data:
        fig, ax = _new_axes("Renyi moments", "error rate p", r"tr $\rho^n$")
        for L, (ps, vals) in sorted(data["moments"]["curves"].items()):
            ax.semilogy(ps, vals, "o-", ms=3, label=f"L={L}")
        ax.legend()
        paths.append(_save(fig, out_dir, "moments"))
    return paths
