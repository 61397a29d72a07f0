"""Run both shipped scenarios with both controllers and print the timing tables."""

import argparse
from pathlib import Path

from lpvmpc.cli import compare_report, format_report
from lpvmpc.scenario import shipped_scenario
from lpvmpc.sim import run


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--duration", type=int, help="override the number of steps")
    parser.add_argument("--out", type=Path, help="directory for the text reports")
    args = parser.parse_args()
    for name in ("scenario_rt.json", "scenario_obstacle.json"):
        sc = shipped_scenario(name)
        if args.duration is not None:
            sc.duration = args.duration
        text = format_report(compare_report(run(sc)))
        print(f"== {sc.name} ({sc.duration} steps)\n{text}\n")
        if args.out:
            args.out.mkdir(parents=True, exist_ok=True)
            (args.out / f"{sc.name}.txt").write_text(text + "\n")


if __name__ == "__main__":
    main()
