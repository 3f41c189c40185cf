"""Run every pipeline stage offline against the bundled 20-question fixture.

Run with ``python demos/replay_pipeline.py [OUT_DIR]``. LLM and search calls
are answered from the recorded archive shipped with the package, so two runs
produce byte-identical artifacts.
"""

import sys
import tempfile
from pathlib import Path

from deepsearch_data.backends import FIXTURE20
from deepsearch_data.cli import main as cli


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="dsd-"))
    common = ["--replay", str(FIXTURE20 / "replay"), "--out", str(out),
              "--corpus", str(FIXTURE20 / "corpus.jsonl"), "--set", "sample_size=20"]
    steps = [["annotate"], ["sample"], ["synthesize"], ["curate"], ["export-sft"], ["reward"], ["stats"],
             ["eval", "--metrics", "f1,judge,stages,stats"]]
    for step in steps:
        code = cli([*step, *common])
        if code:
            sys.exit(code)
    # strong and weak pools are the same run here, so only weak failures next to strong passes pair up
    traj = str(out / "trajectories.jsonl")
    cli(["export-dpo", "--out", str(out), "--strong", traj, "--weak", traj])

    print(f"\nartifacts in {out}:")
    for p in sorted(out.glob("*")):
        if p.is_file():
            print(f"  {p.name:26} {p.stat().st_size:>9,} bytes")
    print("\n" + (out / "eval_table.txt").read_text())


if __name__ == "__main__":
    main()
