"""``qproc`` command-line driver.

Every command writes plain data files (CSV/JSON) into the output directory;
nothing is plotted. Runs are deterministic given the configuration and seed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import RunConfig, write_complex_csv, write_table
from .iontrap import GATE_UNITARY, IonTrapParams, simulate_process
from .linalg import LinalgError
from .metrics import GateMetrics, OptimizerConfig, compute_all_metrics
from .tomography import (
    NonLoggableChannelError,
    TransferOperators,
    estimate_liouvillian,
    transfer_operators_of_unitary,
)

log = logging.getLogger("qproc")

SWEEP_COLUMNS = ["omega_over_nu", "eta", "fidelity", "purity", "quantum_degree",
                 "entanglement_capability", "max_leakage"]
MARKOV_THRESHOLD = 1e-3


class CommandError(RuntimeError):
    pass


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise CommandError(f"cannot write to output directory {out}: {exc}") from exc
    return out


def _optimizer(cfg: RunConfig) -> OptimizerConfig:
    return OptimizerConfig(restarts=cfg.restarts, seed=cfg.seed)


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _write_process(out: Path, r: TransferOperators, metrics: GateMetrics) -> None:
    write_complex_csv(out / "egrid.csv", r.egrid())
    _write_json(out / "metrics.json", metrics.to_dict())
    r.save(out / "transfer_operators.json")


def cmd_ideal(cfg: RunConfig) -> dict:
    out = _outdir(cfg)
    r = transfer_operators_of_unitary(GATE_UNITARY)
    metrics = compute_all_metrics(r, GATE_UNITARY, _optimizer(cfg))
    _write_process(out, r, metrics)
    return metrics.to_dict()


def cmd_simulate(cfg: RunConfig) -> dict:
    out = _outdir(cfg)
    res = simulate_process(cfg.iontrap, shots=cfg.shots, seed=cfg.seed)
    metrics = compute_all_metrics(res.transfer, GATE_UNITARY, _optimizer(cfg))
    _write_process(out, res.transfer, metrics)
    write_table(out / "leakage.csv", ["k", "leakage"], [[k, x] for k, x in enumerate(res.leakage)])
    ideal = transfer_operators_of_unitary(GATE_UNITARY).egrid()
    deviation = float(np.max(np.abs(res.transfer.egrid() - ideal)))
    _write_json(out / "run.json", {"config": cfg.to_dict(), "max_egrid_deviation": deviation})
    return {**metrics.to_dict(), "max_egrid_deviation": deviation}


def _sweep_point(args: tuple[IonTrapParams, int, int, int]) -> list:
    p, shots, seed, restarts = args
    res = simulate_process(p, shots=shots, seed=seed)
    m = compute_all_metrics(res.transfer, GATE_UNITARY, OptimizerConfig(restarts=restarts, seed=seed))
    return [p.omega1, p.eta_cm, m.fidelity, m.purity, m.quantum_degree,
            m.entanglement_capability, m.max_leakage]


def cmd_sweep(cfg: RunConfig) -> dict:
    out = _outdir(cfg)
    jobs = [
        (cfg.iontrap.replace(omega1=w, omega2=w, eta_cm=eta, eta_r=eta), cfg.shots, cfg.seed, cfg.restarts)
        for w in cfg.sweep.omega_values
        for eta in cfg.sweep.eta_values
    ]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    rows.sort(key=lambda row: (row[0], row[1]))
    write_table(out / "sweep.csv", SWEEP_COLUMNS, rows)
    return {"rows": len(rows)}


def cmd_metrics(cfg: RunConfig) -> dict:
    if len(cfg.transfer_operators) != 1:
        raise CommandError("metrics needs exactly one transfer_operators file")
    out = _outdir(cfg)
    r = TransferOperators.load(cfg.transfer_operators[0])
    metrics = compute_all_metrics(r, GATE_UNITARY, _optimizer(cfg))
    _write_json(out / "metrics.json", metrics.to_dict())
    if r.out_dim == 4:
        write_complex_csv(out / "egrid.csv", r.egrid())
    return metrics.to_dict()


def cmd_liouvillian(cfg: RunConfig) -> dict:
    """Generator from one snapshot, or from snapshots at ``t`` and ``2t`` plus a Markovianity residual."""
    paths, times = cfg.transfer_operators, cfg.times
    if len(paths) not in (1, 2) or len(times) != len(paths):
        raise CommandError("liouvillian needs one or two transfer_operators files with matching times")
    out = _outdir(cfg)
    try:
        gens = [estimate_liouvillian(TransferOperators.load(p), t) for p, t in zip(paths, times)]
    except NonLoggableChannelError as exc:
        raise CommandError(f"non-loggable channel: {exc}") from exc
    write_complex_csv(out / "liouvillian.csv", gens[0])
    summary: dict = {"times": times}
    if len(gens) == 2:
        residual = float(np.max(np.abs(gens[0] - gens[1])))
        summary.update(residual=residual, threshold=MARKOV_THRESHOLD,
                       markovian=bool(residual <= MARKOV_THRESHOLD))
        write_complex_csv(out / "liouvillian_2.csv", gens[1])
    _write_json(out / "markovianity.json", summary)
    return summary


COMMANDS = {
    "ideal": cmd_ideal,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "metrics": cmd_metrics,
    "liouvillian": cmd_liouvillian,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qproc", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=Path, help="JSON run configuration")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--shots", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        data = json.loads(args.config.read_text()) if args.config else {}
        data["mode"] = args.command
        for key in ("seed", "shots", "workers"):
            if getattr(args, key) is not None:
                data[key] = getattr(args, key)
        if args.out is not None:
            data["output_dir"] = args.out
        cfg = RunConfig.from_dict(data)
        summary = COMMANDS[args.command](cfg)
    except (CommandError, LinalgError, ValueError, OSError) as exc:
        print(f"qproc {args.command}: error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(summary, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
