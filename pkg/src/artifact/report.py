"""Serialization of report records and the figures that accompany them."""
import csv
import io
import json
import math

RECORD_FIELDS = ["identity", "seed", "q", "params", "lhs_re", "lhs_im", "rhs_re", "rhs_im",
                 "abs_residual", "rel_residual", "convention_flags", "settings",
                 "runtime_ms", "pass"]

SCAN_FIELDS = ["block", "q", "alpha", "angle_i", "angle_j", "m_i", "m_j", "value_re",
               "value_im", "phase", "positive", "flags"]

LIMIT_FIELDS = ["block", "seed", "k", "q", "deviation", "flags"]


def _clean(v):
    # json has no inf/nan literals; keep them readable as strings
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def to_jsonl(records):
    return "".join(json.dumps(_clean(r), sort_keys=False) + "\n" for r in records)


def to_csv(records, fields):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in records:
        row = {}
        for k in fields:
            v = r.get(k)
            if isinstance(v, (dict, list)):
                v = json.dumps(_clean(v), sort_keys=True)
            row[k] = v
        w.writerow(row)
    return buf.getvalue()


def render(records, fmt, fields=RECORD_FIELDS):
    if fmt == "json":
        return to_jsonl(records)
    if fmt == "csv":
        return to_csv(records, fields)
    raise ValueError(f"unknown format {fmt!r}")


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def residual_figure(records, path):
    """log10 relative residual per instance, one marker series per q, with the tolerance."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    by_q = {}
    for r in records:
        by_q.setdefault(r["q"], []).append(r)
    for q, rows in sorted(by_q.items(), key=lambda kv: (kv[0] is None, kv[0])):
        xs = [r["seed"] for r in rows]
        ys = [max(float(r["rel_residual"]), 1e-17) if r["rel_residual"] is not None
              and math.isfinite(float(r["rel_residual"])) else 1.0 for r in rows]
        ax.semilogy(xs, ys, "o", label=f"q = {q}")
    tols = {r["settings"].get("rel_tol") for r in records if r.get("settings")}
    for tol in sorted(t for t in tols if t):
        ax.axhline(tol, color="k", lw=0.8, ls="--")
    ident = records[0]["identity"] if records else ""
    ax.set_xlabel("seed")
    ax.set_ylabel("relative residual")
    ax.set_title(ident)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def scan_figure(rows, path):
    """Phase of the weight against the spin angle difference, per q block."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    blocks = sorted({r["block"] for r in rows})
    for b in blocks:
        pts = [r for r in rows if r["block"] == b and r.get("phase") is not None]
        xs = [(r["angle_j"] - r["angle_i"]) % (2 * math.pi) for r in pts]
        ys = [r["phase"] for r in pts]
        ax.plot(xs, ys, ".", ms=3, label=f"q = {pts[0]['q']}" if pts else str(b))
    ax.set_xlabel("angle difference")
    ax.set_ylabel("phase of W")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def limit_figure(rows, path):
    """Deviation from the gamma weight against k for q = 1 - 2^-k."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for seed in sorted({r["seed"] for r in rows}):
        pts = [r for r in rows if r["seed"] == seed]
        ax.semilogy([r["k"] for r in pts], [r["deviation"] for r in pts], "o-",
                    label=f"seed {seed}")
    ax.set_xlabel("k  (q = 1 - 2^-k)")
    ax.set_ylabel("deviation from gamma weight")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
