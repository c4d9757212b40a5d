"""Budgeted sensor placement with bulk discounts per sensor type.

Sweeps the budget and shows how much coverage each method buys.  The
agnostic greedy ignores the discount structure, so it tends to stop early.

    python demos/sensor_budget.py --seed 1
"""
import argparse

from coopsub.experiments import gen_sensor, run_sensor_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"{'budget':>7} | {'PLA':>7} {'SGA':>7} {'AG':>7} | sensors PLA/SGA/AG")
    for fraction in (0.1, 0.2, 0.3, 0.5):
        inst = gen_sensor(40, 3, seed=args.seed, budget_fraction=fraction)
        rows = run_sensor_experiment(inst).rows
        sizes = "/".join(str(rows[a]["size"]) for a in ("pla", "sga", "ag"))
        print(f"{inst.budget:7.2f} | {rows['pla']['g']:7.2f} {rows['sga']['g']:7.2f} {rows['ag']['g']:7.2f} | {sizes}")


if __name__ == "__main__":
    main()
