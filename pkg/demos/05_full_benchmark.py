"""A miniature end-to-end benchmark sweep.

Runs the full orchestration path -- grid of (model, window length, seed)
jobs, aggregation, baselines, artifact emission -- on a deliberately tiny
configuration so it finishes in about a minute. The same call with the
default TrainConfig is the real benchmark; the CLI command

    qseq benchmark --config cfg.json --out out/

is a thin wrapper over exactly this.
"""

from pathlib import Path

from qseq import TrainConfig, emit_report, multi_run, synthesize

series = synthesize("sinusoid", length=600, noise_sd=0.05, seed=0)

config = TrainConfig(
    max_epochs=3,
    early_stop_patience=None,
    models=("lstm", "qfwp8"),
    seq_lens=(4, 8),
    seeds=(0, 1),
)

report = multi_run(config, series, jobs=1)

print("runs:")
for run in report.runs:
    flag = "" if run.completed else "  [aborted]"
    print(
        f"  {run.model:6s} T={run.seq_len:2d} seed={run.seed}: "
        f"mae={run.mae:.5f} mse={run.mse:.5f} epochs={run.epochs}{flag}"
    )

print("\nper-(model, T) aggregates over seeds:")
for entry in report.aggregates:
    print(
        f"  {entry['model']:6s} T={entry['seq_len']:2d}: "
        f"mae={entry['mae_mean']:.5f} +- {entry['mae_std']:.5f} "
        f"({entry['count']} runs)"
    )

print("\npersistence baselines:")
for baseline in report.baselines:
    print(f"  T={baseline['seq_len']:2d}: mse={baseline['mse']:.5f}")

out = Path("out") / "mini-benchmark"
emit_report(report, out_dir=out)
print(f"\nartifacts written to {out}/: runs.csv, pivot_mae.csv, pivot_mse.csv,")
print("complexity.csv, report.json -- reruns reproduce the CSVs byte for byte.")
