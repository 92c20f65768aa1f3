"""Per-(AST type x position range) logistic probes over attribution rows.

Each cell of the probe grid fits a 2-D logistic regression on
(position, phi) with IRLS, reports held-out accuracy from a seeded
stratified split, and describes its decision boundary both as a phi
threshold at the range midpoint and as a line in the raw
(position, phi) plane.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InsufficientData, InvalidArgs, SingleClass
from .lexing import AstTag, ClassLabel
from .tensor import ShapTensorRow

DEGENERATE_W_PHI = 1e-12


@dataclass(frozen=True, order=True)
class PositionRange:
    lo: int
    hi: int

    def __post_init__(self):
        if not 0 <= self.lo <= self.hi:
            raise InvalidArgs(f"invalid position range [{self.lo}, {self.hi}]")

    def __contains__(self, position: int) -> bool:
        return self.lo <= position <= self.hi

    @property
    def label(self) -> str:
        return f"{self.lo}-{self.hi}"


@dataclass(frozen=True)
class ProbeSample:
    position: int
    phi: float
    class_label: int  # 1 = insecure


@dataclass(frozen=True)
class FeatureScaling:
    """Raw -> model feature transform; defaults are the identity."""
    pos_lo: float = 0.0
    pos_width: float = 1.0  # scaled_pos = (pos - pos_lo) / pos_width
    phi_mean: float = 0.0
    phi_std: float = 1.0

    def scale_pos(self, pos):
        return (np.asarray(pos, dtype=float) - self.pos_lo) / self.pos_width

    def scale_phi(self, phi):
        return (np.asarray(phi, dtype=float) - self.phi_mean) / self.phi_std


@dataclass(frozen=True)
class BoundaryDescription:
    phi_at_midrange: float
    # raw-unit line coef_pos * position + coef_phi * phi + intercept = 0
    line: tuple[float, float, float]


@dataclass(frozen=True)
class SideCounts:
    """Class counts on each side of the phi threshold, over all cell samples."""
    ge_secure: int
    ge_insecure: int
    lt_secure: int
    lt_insecure: int


@dataclass(frozen=True)
class ProbeConfig:
    min_samples: int = 30
    l2: float = 1e-6
    max_iter: int = 100
    tol: float = 1e-8
    test_fraction: float = 0.2
    feature_mode: str = "pos_phi"  # or "phi"
    gate: float = 0.6


@dataclass(frozen=True)
class LogisticProbe:
    tag: AstTag
    range: PositionRange
    w_pos: float
    w_phi: float
    bias: float
    train_accuracy: float
    test_accuracy: float
    boundary: Optional[BoundaryDescription]
    sample_count: int
    seed: int
    scaling: FeatureScaling = FeatureScaling()
    side_counts: Optional[SideCounts] = None
    class_counts: tuple[int, int] = (0, 0)  # (secure, insecure) samples in the cell


def bin_ranges(max_len: int, k: int) -> list[PositionRange]:
    """k contiguous equal-width ranges over [0, max_len); the last absorbs the remainder."""
    if k < 1 or max_len < k:
        raise InvalidArgs(f"need max_len >= k >= 1, got max_len={max_len}, k={k}")
    width = max_len // k
    ranges = [PositionRange(i * width, (i + 1) * width - 1) for i in range(k - 1)]
    ranges.append(PositionRange((k - 1) * width, max_len - 1))
    return ranges


def gather_samples(rows: list[ShapTensorRow], tag: AstTag,
                   rng: PositionRange) -> list[ProbeSample]:
    return [
        ProbeSample(r.position, r.phi, int(r.class_label == ClassLabel.INSECURE))
        for r in rows
        if r.tag == tag and r.position in rng
    ]


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


def _nll(X, y, w, l2):
    p = np.clip(_sigmoid(X @ w), 1e-12, 1 - 1e-12)
    return -np.sum(y * np.log(p) + (1 - y) * np.log(1 - p)) + 0.5 * l2 * w @ w


def _irls(X: np.ndarray, y: np.ndarray, l2: float, max_iter: int, tol: float) -> np.ndarray:
    """Newton / iteratively-reweighted least squares for L2 logistic regression."""
    w = np.zeros(X.shape[1])
    for _ in range(max_iter):
        mu = _sigmoid(X @ w)
        grad = X.T @ (y - mu) - l2 * w
        r = mu * (1.0 - mu)
        H = X.T @ (r[:, None] * X) + l2 * np.eye(X.shape[1])
        delta = np.linalg.solve(H, grad)
        # halve overshooting steps; the objective is convex
        step = 1.0
        base = _nll(X, y, w, l2)
        while step > 1e-4 and _nll(X, y, w + step * delta, l2) > base:
            step *= 0.5
        w = w + step * delta
        if np.max(np.abs(step * delta)) < tol:
            break
    return w


def _stratified_split(labels: np.ndarray, seed: int, test_fraction: float):
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for cls in (0, 1):
        idx = np.nonzero(labels == cls)[0]
        idx = idx[rng.permutation(len(idx))]
        n_test = max(1, int(round(len(idx) * test_fraction)))
        test_idx.append(idx[:n_test])
        train_idx.append(idx[n_test:])
    return np.sort(np.concatenate(train_idx)), np.sort(np.concatenate(test_idx))


def _design(samples_pos, samples_phi, scaling: FeatureScaling, feature_mode: str):
    phi = scaling.scale_phi(samples_phi)
    if feature_mode == "phi":
        return np.column_stack([np.ones(len(phi)), np.zeros(len(phi)), phi])
    pos = scaling.scale_pos(samples_pos)
    return np.column_stack([np.ones(len(pos)), pos, phi])


def fit_logistic(samples: list[ProbeSample], tag: AstTag, rng: PositionRange,
                 seed: int, config: ProbeConfig = ProbeConfig()) -> LogisticProbe:
    if len(samples) < config.min_samples:
        raise InsufficientData(
            f"cell ({tag.value}, {rng.label}): {len(samples)} < {config.min_samples} samples"
        )
    y = np.array([s.class_label for s in samples], dtype=float)
    if len(set(y)) < 2:
        raise SingleClass(f"cell ({tag.value}, {rng.label}) has a single class")
    pos = np.array([s.position for s in samples], dtype=float)
    phi = np.array([s.phi for s in samples], dtype=float)

    train, test = _stratified_split(y.astype(int), seed, config.test_fraction)
    phi_std = float(np.std(phi[train]))
    scaling = FeatureScaling(
        pos_lo=float(rng.lo),
        pos_width=float(max(rng.hi - rng.lo, 1)),
        phi_mean=float(np.mean(phi[train])),
        phi_std=phi_std if phi_std > 0 else 1.0,
    )
    X = _design(pos, phi, scaling, config.feature_mode)
    w = _irls(X[train], y[train], config.l2, config.max_iter, config.tol)

    pred = (_sigmoid(X @ w) >= 0.5).astype(float)
    probe = LogisticProbe(
        tag=tag, range=rng, w_pos=float(w[1]), w_phi=float(w[2]), bias=float(w[0]),
        train_accuracy=float(np.mean(pred[train] == y[train])),
        test_accuracy=float(np.mean(pred[test] == y[test])),
        boundary=None, sample_count=len(samples), seed=seed, scaling=scaling,
        class_counts=(int(np.sum(y == 0)), int(np.sum(y == 1))),
    )
    boundary = decision_boundary(probe)
    side = None
    if boundary is not None:
        ge = phi >= boundary.phi_at_midrange
        side = SideCounts(
            ge_secure=int(np.sum(ge & (y == 0))),
            ge_insecure=int(np.sum(ge & (y == 1))),
            lt_secure=int(np.sum(~ge & (y == 0))),
            lt_insecure=int(np.sum(~ge & (y == 1))),
        )
    return LogisticProbe(
        **{**probe.__dict__, "boundary": boundary, "side_counts": side}
    )


def decision_boundary(probe: LogisticProbe) -> Optional[BoundaryDescription]:
    """Solve the fitted decision surface for phi at the range midpoint.

    Absent (None) when the phi weight is degenerate, i.e. the surface never
    crosses the phi axis.
    """
    if abs(probe.w_phi) < DEGENERATE_W_PHI:
        return None
    s = probe.scaling
    # midpoint of the scaled position domain [0, 1]
    phi_scaled = -(probe.bias + probe.w_pos * 0.5) / probe.w_phi
    phi_raw = s.phi_mean + s.phi_std * phi_scaled
    line = (
        probe.w_pos / s.pos_width,
        probe.w_phi / s.phi_std,
        probe.bias - probe.w_pos * s.pos_lo / s.pos_width
        - probe.w_phi * s.phi_mean / s.phi_std,
    )
    return BoundaryDescription(phi_at_midrange=float(phi_raw),
                               line=tuple(float(v) for v in line))


@dataclass(frozen=True)
class GridCell:
    status: str  # "ok" | "insufficient-data"
    probe: Optional[LogisticProbe] = None


@dataclass(frozen=True)
class ProbeGrid:
    cells: dict[tuple[AstTag, PositionRange], GridCell]
    seed: int
    config: ProbeConfig

    def passed_gate(self, tag: AstTag, rng: PositionRange) -> bool:
        cell = self.cells[(tag, rng)]
        return (
            cell.status == "ok"
            and cell.probe.test_accuracy > self.config.gate
            and cell.probe.boundary is not None
        )


def probe_grid(rows: list[ShapTensorRow], tags: list[AstTag],
               ranges: list[PositionRange], seed: int,
               config: ProbeConfig = ProbeConfig()) -> ProbeGrid:
    """Fit one probe per (tag, range) cell; underpopulated cells are marked, not fitted."""
    cells = {}
    for idx, (tag, rng) in enumerate((t, r) for t in tags for r in ranges):
        samples = gather_samples(rows, tag, rng)
        try:
            probe = fit_logistic(samples, tag, rng, seed + idx, config)
            cells[(tag, rng)] = GridCell("ok", probe)
        except (InsufficientData, SingleClass):
            cells[(tag, rng)] = GridCell("insufficient-data")
    return ProbeGrid(cells=cells, seed=seed, config=config)


# ---------------------------------------------------------------------------
# grid reports

def _cell_record(tag: AstTag, rng: PositionRange, cell: GridCell, gate: float) -> dict:
    rec = {
        "tag": tag.value, "lo": rng.lo, "hi": rng.hi, "status": cell.status,
        "n": 0, "train_acc": None, "test_acc": None,
        "boundary_type": None, "boundary_phi": None, "boundary_line": None,
        "passed_gate": False,
    }
    if cell.status != "ok":
        return rec
    p = cell.probe
    rec.update(n=p.sample_count, train_acc=p.train_accuracy, test_acc=p.test_accuracy)
    if p.boundary is not None:
        rec.update(
            boundary_type="phi-threshold-at-midrange+line",
            boundary_phi=p.boundary.phi_at_midrange,
            boundary_line=list(p.boundary.line),
        )
    rec["passed_gate"] = p.test_accuracy > gate and p.boundary is not None
    return rec


def iter_cells(grid: ProbeGrid, tags: list[AstTag], ranges: list[PositionRange]):
    for tag in tags:
        for rng in ranges:
            yield tag, rng, grid.cells[(tag, rng)]


def write_grid_csv(grid: ProbeGrid, tags, ranges, path) -> None:
    fields = ["tag", "lo", "hi", "n", "train_acc", "test_acc",
              "boundary_type", "boundary_values", "passed_gate"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for tag, rng, cell in iter_cells(grid, tags, ranges):
            rec = _cell_record(tag, rng, cell, grid.config.gate)
            if rec["boundary_type"]:
                bvals = "phi=%r;line=%r,%r,%r" % (
                    rec["boundary_phi"], *rec["boundary_line"])
            else:
                bvals = ""
            writer.writerow([
                rec["tag"], rec["lo"], rec["hi"], rec["n"],
                "" if rec["train_acc"] is None else repr(rec["train_acc"]),
                "" if rec["test_acc"] is None else repr(rec["test_acc"]),
                rec["boundary_type"] or "", bvals, str(rec["passed_gate"]).lower(),
            ])


def grid_records(grid: ProbeGrid, tags, ranges) -> list[dict]:
    """Per-cell record dicts with everything rule derivation needs."""
    records = []
    for tag, rng, cell in iter_cells(grid, tags, ranges):
        rec = _cell_record(tag, rng, cell, grid.config.gate)
        if cell.status == "ok":
            p = cell.probe
            rec["weights"] = {"w_pos": p.w_pos, "w_phi": p.w_phi, "bias": p.bias}
            rec["seed"] = p.seed
            rec["class_counts"] = list(p.class_counts)
            if p.side_counts is not None:
                rec["side_counts"] = p.side_counts.__dict__
        records.append(rec)
    return records


def write_grid_meta(grid: ProbeGrid, tags, ranges, path) -> None:
    """Full machine-readable grid state, consumed by the rule-derivation stage."""
    records = grid_records(grid, tags, ranges)
    payload = {
        "seed": grid.seed,
        "gate": grid.config.gate,
        "feature_mode": grid.config.feature_mode,
        "cells": records,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def write_plot_data(grid: ProbeGrid, rows, tags, ranges, path) -> None:
    """Per-cell scatter of (position, phi, class) plus the boundary line, JSONL."""
    with open(path, "w", encoding="utf-8") as fh:
        for tag, rng, cell in iter_cells(grid, tags, ranges):
            samples = gather_samples(rows, tag, rng)
            obj = {
                "tag": tag.value, "lo": rng.lo, "hi": rng.hi,
                "status": cell.status,
                "points": [[s.position, s.phi, s.class_label] for s in samples],
                "boundary": None,
            }
            if cell.status == "ok" and cell.probe.boundary is not None:
                obj["boundary"] = {
                    "phi_at_midrange": cell.probe.boundary.phi_at_midrange,
                    "line": list(cell.probe.boundary.line),
                }
            fh.write(json.dumps(obj, sort_keys=True) + "\n")
