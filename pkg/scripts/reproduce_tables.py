"""Print modulus, lattice and size rows for the filtering and volume configurations.

    python3 scripts/reproduce_tables.py [--format csv|json] [--out rows.csv]
"""
import argparse

from mrlwe.cli import emit
from mrlwe.experiments import ExperimentConfig, params_report

# (scenario, N, F, I, Nz, univariate slack h)
CONFIGS = [
    ("filtering", 246, 11, 4, 1, 8),
    ("filtering", 502, 11, 2, 1, 4),
    ("filtering", 502, 11, 4, 1, 4),
    ("volume", 60, 5, 1, 12, 32),
    ("volume", 124, 5, 1, 12, 16),
    ("volume", 252, 5, 1, 12, 8),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--format", choices=("csv", "json", "both"), default="csv")
    ap.add_argument("--out", default=None)
    ap.add_argument("--t", type=int, default=12289)
    args = ap.parse_args()
    rows = []
    for scenario, N, F, I, Nz, h in CONFIGS:
        cfg = ExperimentConfig(scenario=scenario, N=N, F=F, I=I, Nz=Nz, h=(h, 1, 1), t=args.t)
        rows += [{"N": N, "I": I, "Nz": Nz, **r} for r in params_report(cfg)]
    emit(rows, args.format, args.out)


if __name__ == "__main__":
    main()
