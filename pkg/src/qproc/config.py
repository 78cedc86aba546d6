"""Run configuration and CSV helpers for the command-line driver."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .iontrap import IonTrapParams

MODES = ("ideal", "simulate", "sweep", "metrics", "liouvillian")
_ION_KEYS = ("eta_cm", "eta_r", "delta1", "delta2", "omega1", "omega2", "n_max", "calibrate")


@dataclass
class SweepConfig:
    omega_values: list[float] = field(default_factory=lambda: [0.05, 0.1, 0.2, 0.5])
    eta_values: list[float] = field(default_factory=lambda: [0.1, 0.5, 0.9])


@dataclass
class RunConfig:
    mode: str = "simulate"
    iontrap: IonTrapParams = field(default_factory=IonTrapParams)
    shots: int = 0
    seed: int = 0
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output_dir: str = "out"
    restarts: int = 32
    workers: int = 1
    transfer_operators: list[str] = field(default_factory=list)
    times: list[float] = field(default_factory=list)

    def validate(self) -> "RunConfig":
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.shots < 0:
            raise ValueError("shots must be >= 0")
        if self.mode == "sweep":
            if not self.sweep.omega_values or not self.sweep.eta_values:
                raise ValueError("sweep needs non-empty omega_values and eta_values")
            if any(w <= 0 for w in self.sweep.omega_values):
                raise ValueError("omega_values must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        return self

    def to_dict(self) -> dict:
        out = {"mode": self.mode}
        out.update({k: getattr(self.iontrap, k) for k in _ION_KEYS})
        out.update(shots=self.shots, seed=self.seed, sweep=asdict(self.sweep),
                   output_dir=self.output_dir, restarts=self.restarts, workers=self.workers,
                   transfer_operators=list(self.transfer_operators), times=list(self.times))
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)} | set(_ION_KEYS)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        ion = IonTrapParams(**{k: data[k] for k in _ION_KEYS if k in data})
        sweep = SweepConfig(**data.get("sweep", {}))
        paths = data.get("transfer_operators", [])
        if isinstance(paths, str):
            paths = [paths]
        times = data.get("times", [])
        if isinstance(times, (int, float)):
            times = [times]
        return cls(
            mode=data.get("mode", "simulate"),
            iontrap=ion,
            shots=int(data.get("shots", 0)),
            seed=int(data.get("seed", 0)),
            sweep=sweep,
            output_dir=str(data.get("output_dir", "out")),
            restarts=int(data.get("restarts", 32)),
            workers=int(data.get("workers", 1)),
            transfer_operators=[str(p) for p in paths],
            times=[float(t) for t in times],
        ).validate()

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def write_complex_csv(path: str | Path, m: np.ndarray) -> None:
    """One row per matrix row, ``re_k, im_k`` column pairs, 17 significant digits."""
    m = np.asarray(m, dtype=complex)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"{part}_{k}" for k in range(m.shape[1]) for part in ("re", "im")])
        for row in m:
            w.writerow([f"{x:.17g}" for z in row for x in (z.real, z.imag)])


def read_complex_csv(path: str | Path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    a = np.array([[float(x) for x in row] for row in rows])
    return a[:, 0::2] + 1j * a[:, 1::2]


def write_table(path: str | Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{x:.17g}" if isinstance(x, float) else x for x in row])


def read_table(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
