"""Head/tail disagreement traces and potential-function summaries."""

from __future__ import annotations

import numpy as np

from .rewards import bernoulli_kl


def _split_kl(outputs, blocks, labels):
    per_label = []
    for l in labels:
        covering = [(o, int(np.flatnonzero(b == l)[0])) for o, b in zip(outputs, blocks) if np.any(b == l)]
        if len(covering) < 2:
            continue
        probs = np.stack([o[:, k] for o, k in covering])  # players x samples
        total = probs.sum(axis=0)
        peer = (total[None, :] - probs) / (len(covering) - 1)
        # mean over players, then (below) labels, then samples
        per_label.append(bernoulli_kl(probs, peer).mean(axis=0))
    if not per_label:
        return 0.0, False
    return float(np.mean(np.mean(per_label, axis=0))), True


def disagreement_by_split(outputs, partition, split) -> dict:
    """Mean player-to-peer-mean Bernoulli KL on shared head and shared tail labels.

    A split without any label covered by two or more players reports 0 and is
    flagged.
    """
    outputs = [np.atleast_2d(o) for o in outputs]
    flags = []
    if partition.n_players < 2:
        return {"kl_head": 0.0, "kl_tail": 0.0, "flags": ["no peers"]}
    blocks = partition.block_arrays()
    kl_head, ok_head = _split_kl(outputs, blocks, sorted(split.head))
    kl_tail, ok_tail = _split_kl(outputs, blocks, sorted(split.tail))
    if not ok_head:
        flags.append("no shared head labels")
    if not ok_tail:
        flags.append("no shared tail labels")
    return {"kl_head": max(kl_head, 0.0), "kl_tail": max(kl_tail, 0.0), "flags": flags}


def _best_window(values, width, sign):
    v = np.asarray(values, dtype=np.float64)
    gains = sign * (v[width:] - v[:-width])
    start = int(np.argmax(gains))
    return start, float(gains[start])


def trace_summary(records, window: int = 5) -> dict:
    """Summarise a diagnostics sequence (list of per-epoch dicts)."""
    if len(records) < 2:
        raise ValueError("trace summary needs at least two epochs")
    epochs = [int(r["epoch"]) for r in records]
    phi = np.array([r["phi"] for r in records], dtype=np.float64)
    kl_tail = np.array([r["kl_tail"] for r in records], dtype=np.float64)
    steps = np.diff(phi)
    gain_idx = int(np.argmax(steps))
    w = min(window, len(records) - 1)
    phi_start, phi_gain = _best_window(phi, w, +1.0)
    kl_start, kl_drop = _best_window(kl_tail, w, -1.0)
    phi_win = (epochs[phi_start], epochs[phi_start + w])
    kl_win = (epochs[kl_start], epochs[kl_start + w])
    return {
        "epochs": len(records),
        "monotone_fraction": float(np.mean(steps >= 0.0)),
        "phi_first": float(phi[0]),
        "phi_last": float(phi[-1]),
        "max_phi_gain": float(steps[gain_idx]),
        "max_phi_gain_epoch": epochs[gain_idx + 1],
        "kl_tail_first": float(kl_tail[0]),
        "kl_tail_last": float(kl_tail[-1]),
        "window": w,
        "max_phi_gain_window": list(phi_win),
        "max_kl_tail_decline_window": list(kl_win),
        "max_kl_tail_decline": kl_drop,
        "windows_overlap": bool(phi_win[0] <= kl_win[1] and kl_win[0] <= phi_win[1]),
    }
