"""Replay the ten-player baiting run and narrate its five milestones.

    python demos/walkthrough_n10.py
"""

from trapsim import harness

STAGES = {
    "M1": "correct players hold conflicting predecisions",
    "M2": "every correct player committed, nobody can decide",
    "M3": "the baiter has assembled proofs of fraud",
    "M4": "the baiter committed them",
    "M5": "keys revealed, winner drawn, value resolved",
}


def main():
    lines, out, obs = harness.replay_golden("baiting_n10")
    print(f"roles: { {p: r for p, r in sorted(out.roles.items())} }")
    for line in lines:
        step, player, _, action = line.split("|", 3)
        for tag in action.split(";!")[1:]:
            stage = tag.split()[0]
            print(f"step {step:>4} player {player}: {stage} {STAGES[stage]} ({tag})")
    print(f"winner {out.winner}, slashed {sorted(out.slashed)}, classes {out.run_class}")
    if harness.diff_golden("baiting_n10", lines):
        print("replay differs from the checked-in golden log")


if __name__ == "__main__":
    main()
