#!/usr/bin/env python3
"""Writes the bundled toy levels under data/levels/.

The levels are synthetic stand-ins in VGLC text format: a horizontal
platformer in the style of Super Mario Bros. (14 rows, pits, pipes,
bricks, stairs, enemies) and a vertical one in the style of Kid Icarus
(16 columns, stacked platforms, walls, spikes, doors). Output is
deterministic for a given seed.

    python3 tools/make_toy_levels.py data/levels
"""
import os
import random
import sys

MARIO_ROWS = 14
ICARUS_COLS = 16


def mario_level(rng, width):
    g = [["-"] * width for _ in range(MARIO_ROWS)]
    ground = MARIO_ROWS - 2
    for c in range(width):
        g[ground][c] = "X"
        g[ground + 1][c] = "X"
    c = 12
    while c < width - 20:
        feature = rng.choice(["gap", "pipe", "bricks", "stairs", "enemy", "flat", "coins"])
        if feature == "gap":
            w = rng.randint(2, 3)
            for k in range(w):
                g[ground][c + k] = "-"
                g[ground + 1][c + k] = "-"
            c += w + rng.randint(3, 6)
        elif feature == "pipe":
            h = rng.randint(2, 4)
            for r in range(ground - h, ground):
                g[r][c] = "["
                g[r][c + 1] = "["
            c += 2 + rng.randint(3, 7)
        elif feature == "bricks":
            row = ground - 4
            w = rng.randint(3, 6)
            for k in range(w):
                g[row][c + k] = "S" if rng.random() < 0.7 else "o"
            if rng.random() < 0.4:
                g[row - 4][c + w // 2] = "o"
            c += w + rng.randint(2, 5)
        elif feature == "stairs":
            h = rng.randint(3, 4)
            for k in range(h):
                for r in range(ground - k - 1, ground):
                    g[r][c + k] = "X"
            c += h + rng.randint(3, 6)
        elif feature == "enemy":
            g[ground - 1][c] = "E"
            if rng.random() < 0.5:
                g[ground - 1][c + 2] = "E"
            c += rng.randint(4, 7)
        elif feature == "coins":
            row = ground - rng.randint(2, 3)
            for k in range(rng.randint(2, 4)):
                g[row][c + k] = "o"
            c += rng.randint(5, 8)
        else:
            c += rng.randint(3, 6)
    return ["".join(r) for r in g]


def icarus_level(rng, height):
    g = [["-"] * ICARUS_COLS for _ in range(height)]
    for r in range(height):
        if rng.random() < 0.8:
            g[r][0] = "#"
        if rng.random() < 0.8:
            g[r][ICARUS_COLS - 1] = "#"
    # bottom floor with an opening
    for c in range(ICARUS_COLS):
        if not 6 <= c <= 9:
            g[height - 1][c] = "#"
    r = height - 4
    while r > 2:
        kind = rng.choice(["platform", "platform", "ledge", "spikes", "door"])
        start = rng.randint(1, 8)
        w = rng.randint(3, 7)
        if kind == "platform":
            for c in range(start, min(ICARUS_COLS - 1, start + w)):
                g[r][c] = "T"
        elif kind == "ledge":
            side = rng.random() < 0.5
            cols = range(1, 1 + w) if side else range(ICARUS_COLS - 1 - w, ICARUS_COLS - 1)
            for c in cols:
                g[r][c] = "#"
        elif kind == "spikes":
            for c in range(start, min(ICARUS_COLS - 1, start + w)):
                g[r][c] = "#"
            g[r - 1][start + w // 2] = "H"
        else:
            for c in range(start, min(ICARUS_COLS - 1, start + w)):
                g[r][c] = "#"
            g[r - 1][start] = "D"
        if rng.random() < 0.3:
            g[r - 1][min(ICARUS_COLS - 2, start + 1)] = "E"
        r -= rng.randint(3, 4)
    return ["".join(row) for row in g]


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "data/levels"
    rng = random.Random(20201)
    os.makedirs(os.path.join(out, "smb"), exist_ok=True)
    os.makedirs(os.path.join(out, "kid_icarus"), exist_ok=True)
    for i in range(2):
        rows = mario_level(rng, 408)
        with open(os.path.join(out, "smb", f"mario-{i + 1}-1.txt"), "w") as f:
            f.write("\n".join(rows) + "\n")
    for i in range(2):
        rows = icarus_level(rng, 408)
        with open(os.path.join(out, "kid_icarus", f"kidicarus_{i + 1}.txt"), "w") as f:
            f.write("\n".join(rows) + "\n")


if __name__ == "__main__":
    main()
