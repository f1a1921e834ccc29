import argparse
import os
import subprocess
import sys
from typing import List

# Paths
BASE_DIR = os.path.dirname(os.path.abspath(__file__))
BACKEND_DIR = os.path.join(BASE_DIR, "backend")

DESK_SCALE = {"n_atoms": 8, "boson_cutoff": 48, "steps": 40, "max_dim": None}
PAPER_SCALE = {"n_atoms": 20, "boson_cutoff": 192, "steps": 60, "max_dim": 4032}


def build_commands(out_dir: str, paper_scale: bool = False) -> List[List[str]]:
    """The pipeline as a list of main.py invocations, in execution order."""
    scale = PAPER_SCALE if paper_scale else DESK_SCALE
    main = [sys.executable, os.path.join(BACKEND_DIR, "main.py")]
    dicke = [
        "dicke-sweep",
        "--n-atoms", str(scale["n_atoms"]),
        "--boson-cutoff", str(scale["boson_cutoff"]),
        "--steps", str(scale["steps"]),
    ]
    if scale["max_dim"]:
        dicke += ["--max-dim", str(scale["max_dim"])]

    def path(name: str) -> str:
        return os.path.join(out_dir, name)

    return [
        main + dicke + [
            "--times", "1,10,100,1000", "--beta", "0",
            "--out", path("dicke_uniform.csv"),
            "--plot", path("dicke_uniform.svg"),
            "--entropy-plot", path("dicke_entropy.svg"),
        ],
        main + dicke + [
            "--times", "100,1000", "--beta", "0.014,ratio:0.05",
            "--out", path("dicke_thermal.csv"),
            "--plot", path("dicke_thermal.svg"),
        ],
        main + ["rmt", "conjecture", "--ensemble", "goe", "--times", "100,200,400", "--out", path("conjecture_goe.csv")],
        main + ["rmt", "conjecture", "--ensemble", "poisson", "--times", "100,200,400",
                "--out", path("conjecture_poisson.csv")],
    ]


def run_pipeline(commands: List[List[str]]) -> int:
    for cmd in commands:
        print(f"Running: {' '.join(cmd[1:])}")
        proc = subprocess.Popen(cmd, cwd=BACKEND_DIR)
        try:
            code = proc.wait()
        except KeyboardInterrupt:
            print("\nStopping pipeline...")
            proc.terminate()
            try:
                proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                print("Force killing process...")
                proc.kill()
            return 130
        if code != 0:
            print(f"Step failed with exit code {code}; stopping.")
            return code
    print("Pipeline finished.")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Run the sweep and random-matrix reproduction pipeline")
    parser.add_argument("--paper-scale", action="store_true", help="N=20, M=192 (d=4032) instead of N=8, M=48")
    parser.add_argument("--dry-run", action="store_true", help="print the commands without running them")
    parser.add_argument("--out", default=os.path.join(BASE_DIR, "results"))
    args = parser.parse_args(argv)

    out_dir = os.path.abspath(args.out)
    commands = build_commands(out_dir, args.paper_scale)
    if args.dry_run:
        for cmd in commands:
            print(" ".join(cmd))
        return 0

    os.makedirs(out_dir, exist_ok=True)
    return run_pipeline(commands)


if __name__ == "__main__":
    sys.exit(main())
