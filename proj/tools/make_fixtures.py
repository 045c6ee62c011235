#!/usr/bin/env python3
"""Generate the benchmark fixtures in fixtures/ and their SHA256SUMS.

Each builder returns dense arrays; `write` emits the .dpomdp text format.
Run with --report to print MDP and uniform-random values for a few horizons.
"""
import argparse
import hashlib
import itertools
import math
import pathlib

import numpy as np


class Model:
    def __init__(self, states, actions, obs, T, O, R, b0):
        self.states, self.actions, self.obs = states, actions, obs
        self.T, self.O, self.R = (np.asarray(x, float) for x in (T, O, R))
        self.b0 = np.asarray(b0, float)
        n_s = len(states)
        n_a = int(np.prod([len(a) for a in actions]))
        n_o = int(np.prod([len(o) for o in obs]))
        assert self.T.shape == (n_s, n_a, n_s)
        assert self.O.shape == (n_a, n_s, n_o)
        assert self.R.shape == (n_s, n_a)
        assert np.allclose(self.T.sum(2), 1) and np.allclose(self.O.sum(2), 1)
        assert np.isclose(self.b0.sum(), 1)

    def mdp(self, h):
        v = np.zeros(len(self.states))
        for _ in range(h):
            v = (self.R + self.T @ v).max(1)
        return float(self.b0 @ v)

    def random(self, h):
        b, total = self.b0.copy(), 0.0
        for _ in range(h):
            total += b @ self.R.mean(1)
            b = b @ self.T.mean(1)
        return float(total)


def fmt(x):
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


def write(m, path):
    sizes_a = [len(a) for a in m.actions]
    sizes_o = [len(o) for o in m.obs]

    def joint(sizes, names, i):
        parts = []
        for n in reversed(sizes):
            parts.append(i % n)
            i //= n
        return " ".join(names[k][p] for k, p in enumerate(reversed(parts)))

    lines = [f"agents: {len(m.actions)}", "discount: 1", "values: reward",
             "states: " + " ".join(m.states), "start: ", " ".join(fmt(x) for x in m.b0), "actions: "]
    lines += [" ".join(a) for a in m.actions]
    lines.append("observations: ")
    lines += [" ".join(o) for o in m.obs]
    n_s, n_a, n_o = len(m.states), m.R.shape[1], m.O.shape[2]
    for a in range(n_a):
        an = joint(sizes_a, m.actions, a)
        for s in range(n_s):
            for t in range(n_s):
                if m.T[s, a, t] != 0:
                    lines.append(f"T: {an} : {m.states[s]} : {m.states[t]} : {fmt(m.T[s, a, t])}")
    for a in range(n_a):
        an = joint(sizes_a, m.actions, a)
        for t in range(n_s):
            for o in range(n_o):
                if m.O[a, t, o] != 0:
                    lines.append(f"O: {an} : {m.states[t]} : {joint(sizes_o, m.obs, o)} : {fmt(m.O[a, t, o])}")
    for a in range(n_a):
        an = joint(sizes_a, m.actions, a)
        for s in range(n_s):
            if m.R[s, a] != 0:
                lines.append(f"R: {an} : {m.states[s]} : * : * : {fmt(m.R[s, a])}")
    path.write_text("\n".join(lines) + "\n")


def dectiger():
    acts = ["listen", "open-left", "open-right"]
    T = np.zeros((2, 9, 2)); O = np.zeros((9, 2, 4)); R = np.zeros((2, 9))
    for a1, a2 in itertools.product(range(3), repeat=2):
        a = a1 * 3 + a2
        if a1 == 0 and a2 == 0:
            T[:, a, :] = np.eye(2)
            for s, o1, o2 in itertools.product(range(2), repeat=3):
                O[a, s, o1 * 2 + o2] = (0.85 if o1 == s else 0.15) * (0.85 if o2 == s else 0.15)
        else:
            T[:, a, :] = 0.5
            O[a] = 0.25
        for s in range(2):
            good = 2 if s == 0 else 1
            if a1 == 0 and a2 == 0:
                r = -2
            elif a1 == 0 or a2 == 0:
                r = 9 if max(a1, a2) == good else -101
            elif a1 == a2:
                r = 20 if a1 == good else -50
            else:
                r = -100
            R[s, a] = r
    return Model(["tiger-left", "tiger-right"], [acts, acts], [["hear-left", "hear-right"]] * 2,
                 T, O, R, [0.5, 0.5])


def broadcast():
    # each node holds a one-message buffer; a lone send succeeds, simultaneous sends collide and drop both
    st = [(b1, b2) for b1 in (1, 0) for b2 in (1, 0)]
    T = np.zeros((4, 4, 4)); R = np.zeros((4, 4))
    for si, (b1, b2) in enumerate(st):
        for a1, a2 in itertools.product((0, 1), repeat=2):
            a = a1 * 2 + a2
            n1, n2, r = b1, b2, 0
            if a1 and not a2 and b1:
                n1, r = 0, 1
            elif a2 and not a1 and b2:
                n2, r = 0, 1
            elif a1 and a2:
                n1 = n2 = 0
            R[si, a] = r
            q1 = [(1, 1.0)] if n1 else [(1, 0.9), (0, 0.1)]
            q2 = [(1, 1.0)] if n2 else [(1, 0.1), (0, 0.9)]
            for (x1, w1), (x2, w2) in itertools.product(q1, q2):
                T[si, a, st.index((x1, x2))] += w1 * w2
    O = np.full((4, 4, 4), 0.25)
    return Model(["full-full", "full-empty", "empty-full", "empty-empty"], [["wait", "send"]] * 2,
                 [["quiet", "busy"]] * 2, T, O, R, [1, 0, 0, 0])


def firefighting(houses=3, levels=3):
    states = list(itertools.product(range(levels), repeat=houses))
    idx = {x: i for i, x in enumerate(states)}
    n_s, n_a = len(states), houses * houses
    T = np.zeros((n_s, n_a, n_s)); O = np.zeros((n_a, n_s, 4))
    flame = [0.2, 0.5, 0.8]
    for si, x in enumerate(states):
        for a1, a2 in itertools.product(range(houses), repeat=2):
            a = a1 * houses + a2
            per = []
            for h in range(houses):
                f, crew = x[h], (a1 == h) + (a2 == h)
                burning_nb = any(x[j] > 0 for j in (h - 1, h + 1) if 0 <= j < houses)
                d = {}
                if crew == 0:
                    if f == 0:
                        d = {0: 0.2, 1: 0.8} if burning_nb else {0: 1.0}
                    else:
                        p = 0.8 if burning_nb else 0.4
                        d = {f: 1 - p}
                        up = min(f + 1, levels - 1)
                        d[up] = d.get(up, 0) + p
                elif crew == 1:
                    if burning_nb:
                        d = {f: 0.4}
                        d[max(f - 1, 0)] = d.get(max(f - 1, 0), 0) + 0.6
                    else:
                        d = {max(f - 1, 0): 1.0}
                else:
                    d = {0: 1.0}
                per.append(list(d.items()))
            for combo in itertools.product(*per):
                T[si, a, idx[tuple(c[0] for c in combo)]] += np.prod([c[1] for c in combo])
    for a1, a2 in itertools.product(range(houses), repeat=2):
        a = a1 * houses + a2
        for yi, y in enumerate(states):
            p1, p2 = flame[y[a1]], flame[y[a2]]
            O[a, yi] = [(1 - p1) * (1 - p2), (1 - p1) * p2, p1 * (1 - p2), p1 * p2]
    # reward is minus the expected total fire level after the transition
    level = np.array([sum(x) for x in states], float)
    R = -(T @ level)
    names = ["f" + "".join(map(str, x)) for x in states]
    acts = [f"house{h + 1}" for h in range(houses)]
    return Model(names, [acts, acts], [["no-flames", "flames"]] * 2, T, O, R, np.full(n_s, 1 / n_s))


MOVES = {0: (-1, 0), 1: (1, 0), 2: (0, -1), 3: (0, 1), 4: (0, 0)}


def grid_step(side, c, a):
    r, col = divmod(c, side)
    dr, dc = MOVES[a]
    r2, c2 = r + dr, col + dc
    return r2 * side + c2 if 0 <= r2 < side and 0 <= c2 < side else c


def meeting_local(side, p):
    # the intended move succeeds with probability p, otherwise one of the other moves happens; stay is exact
    n = side * side
    T = np.zeros((n, 5, n))
    for c in range(n):
        T[c, 4, c] = 1.0
        for a in range(4):
            T[c, a, grid_step(side, c, a)] += p
            for b in range(5):
                if b != a:
                    T[c, a, grid_step(side, c, b)] += (1 - p) / 4
    return T


def grid():
    # two agents in a 2x2 grid, rewarded for being in the same cell after moving; each sees its column
    loc = meeting_local(2, 0.6)
    st = [(x, y) for x in range(4) for y in range(4)]
    T = np.zeros((16, 25, 16)); O = np.zeros((25, 16, 4))
    for si, (x, y) in enumerate(st):
        for a1, a2 in itertools.product(range(5), repeat=2):
            T[si, a1 * 5 + a2] = np.outer(loc[x, a1], loc[y, a2]).reshape(16)
        O[:, si, (x % 2) * 2 + (y % 2)] = 1.0
    same = np.array([1.0 if x == y else 0.0 for x, y in st])
    R = T @ same
    b0 = np.zeros(16); b0[st.index((0, 3))] = 1
    acts = ["up", "down", "left", "right", "stay"]
    return Model([f"c{x}{y}" for x, y in st], [acts, acts], [["west", "east"]] * 2, T, O, R, b0)


def grid3x3():
    # meet in the top-left or bottom-right corner of a 3x3 grid; each agent sees its own cell
    loc = meeting_local(3, 0.6)
    st = [(x, y) for x in range(9) for y in range(9)]
    T = np.zeros((81, 25, 81)); O = np.zeros((25, 81, 81))
    for si, (x, y) in enumerate(st):
        for a1, a2 in itertools.product(range(5), repeat=2):
            T[si, a1 * 5 + a2] = np.outer(loc[x, a1], loc[y, a2]).reshape(81)
        O[:, si, x * 9 + y] = 1.0
    R = np.repeat(np.array([1.0 if x == y and x in (0, 8) else 0.0 for x, y in st])[:, None], 25, 1)
    b0 = np.zeros(81); b0[st.index((2, 6))] = 1
    acts = ["up", "down", "left", "right", "stay"]
    return Model([f"c{x}{y}" for x, y in st], [acts, acts], [[f"cell{i}" for i in range(9)]] * 2, T, O, R, b0)


def recycling():
    # battery 0 = high, 1 = low; actions: search big can (needs both), search small can, recharge
    st = [(x, y) for x in (0, 1) for y in (0, 1)]
    stay_high = {0: 0.5, 1: 0.7}
    stay_low = {0: 0.8, 1: 0.6718}
    T = np.zeros((4, 9, 4)); R = np.zeros((4, 9)); O = np.zeros((9, 4, 4))

    def battery(b, a):
        # (next battery, probability, penalty, still searching)
        if a == 2:
            return [(0, 1.0, 0.0, 1)]
        if b == 0:
            q = stay_high[a]
            return [(0, q, 0.0, 1), (1, 1 - q, 0.0, 1)]
        q = stay_low[a]
        return [(1, q, 0.0, 1), (0, 1 - q, -10.0, 0)]

    for si, (b1, b2) in enumerate(st):
        for a1, a2 in itertools.product(range(3), repeat=2):
            a = a1 * 3 + a2
            r = 0.0
            for (n1, p1, q1, g1), (n2, p2, q2, g2) in itertools.product(battery(b1, a1), battery(b2, a2)):
                T[si, a, st.index((n1, n2))] += p1 * p2
                rr = q1 + q2
                if a1 == 0 and a2 == 0:
                    rr += 5 * g1 * g2
                if a1 == 1:
                    rr += 2 * g1
                if a2 == 1:
                    rr += 2 * g2
                r += p1 * p2 * rr
            R[si, a] = r
        for a in range(9):
            O[a, si, b1 * 2 + b2] = 1.0
    acts = ["search-big", "search-small", "recharge"]
    return Model(["high-high", "high-low", "low-high", "low-low"], [acts, acts], [["high", "low"]] * 2,
                 T, O, R, [1, 0, 0, 0])


def boxpushing(p=0.9, step=-0.1, bump=-5.0, small=10.0, large=100.0):
    # agents move along the bottom row of a 4-column grid facing N/E/S/W; small boxes above columns 0 and 3,
    # the large box above columns 1-2; pushing a box to the goal resets the episode
    dirs = [(-1, 0), (0, 1), (1, 0), (0, -1)]
    locs = [(c, o) for c in range(4) for o in range(4)]
    st = [(x, y) for x in locs for y in locs if x[0] != y[0]]
    idx = {s: i for i, s in enumerate(st)}
    n_s = len(st)
    start = ((0, 1), (3, 3))
    s0 = idx[start]
    T = np.zeros((n_s, 16, n_s)); R = np.zeros((n_s, 16)); O = np.zeros((16, n_s, 25))

    def outcome(loc, a):
        c, o = loc
        if a == 0:
            return (c, (o + 3) % 4), None
        if a == 1:
            return (c, (o + 1) % 4), None
        if a == 3:
            return loc, None
        if o == 0:
            return loc, "small" if c in (0, 3) else "large"
        if o == 2:
            return loc, "bump"
        nc = c + dirs[o][1]
        if nc < 0 or nc > 3:
            return loc, "bump"
        return (nc, o), None

    for (l1, l2), si in idx.items():
        for a1, a2 in itertools.product(range(4), repeat=2):
            a = a1 * 4 + a2
            r = 2 * step
            for ok1, ok2 in itertools.product((True, False), repeat=2):
                pr = (p if ok1 else 1 - p) * (p if ok2 else 1 - p)
                n1, e1 = outcome(l1, a1) if ok1 else (l1, None)
                n2, e2 = outcome(l2, a2) if ok2 else (l2, None)
                rr, reset = 0.0, False
                for e in (e1, e2):
                    if e == "bump":
                        rr += bump
                    if e == "small":
                        rr += small
                        reset = True
                if e1 == "large" and e2 == "large":
                    rr += large
                    reset = True
                if reset:
                    ns = s0
                else:
                    if n1[0] == n2[0]:
                        if n1[0] != l1[0]:
                            n1 = l1
                        if n2[0] != l2[0]:
                            n2 = l2
                        if n1[0] == n2[0]:
                            n1, n2 = l1, l2
                    ns = idx[(n1, n2)]
                T[si, a, ns] += pr
                r += pr * rr
            R[si, a] = r

    def sees(me, other):
        c, o = me
        if o == 0:
            return 3 if c in (0, 3) else 4
        if o == 2:
            return 1
        nc = c + dirs[o][1]
        if nc < 0 or nc > 3:
            return 1
        return 2 if nc == other[0] else 0

    for (l1, l2), si in idx.items():
        O[:, si, sees(l1, l2) * 5 + sees(l2, l1)] = 1.0
    b0 = np.zeros(n_s); b0[s0] = 1
    acts = ["turn-left", "turn-right", "move", "stay"]
    obs = ["empty", "wall", "agent", "small-box", "large-box"]
    names = [f"a{c1}{o1}-b{c2}{o2}" for (c1, o1), (c2, o2) in st]
    return Model(names, [acts, acts], [obs, obs], T, O, R, b0)


def mars(p_move=0.9, sample=1.2, drill=6.8, repeat=1.0, wrong=-2.5, move=-0.1):
    # two rovers on a 2x2 grid with four sites; cells 0 and 3 need a joint drill, cells 1 and 2 a single
    # sample; finishing all four sites restarts the mission
    drill_sites = {0, 3}

    def mv(c, a):
        r, col = divmod(c, 2)
        dr, dc = MOVES[a]
        r2, c2 = r + dr, col + dc
        return r2 * 2 + c2 if 0 <= r2 < 2 and 0 <= c2 < 2 else c

    st = [(x, y, f) for x in range(4) for y in range(4) for f in range(16)]
    idx = {s: i for i, s in enumerate(st)}
    s0 = idx[(0, 0, 0)]
    T = np.zeros((256, 36, 256)); R = np.zeros((256, 36)); O = np.zeros((36, 256, 64))
    for (x, y, f), si in idx.items():
        for a1, a2 in itertools.product(range(6), repeat=2):
            a = a1 * 6 + a2
            r, nf = 0.0, f
            for me, other, ai, aj in ((x, y, a1, a2), (y, x, a2, a1)):
                if ai < 4:
                    r += move
                elif ai == 4:
                    if me in drill_sites:
                        r += wrong
                    elif f >> me & 1:
                        r += repeat
                    else:
                        r += sample
                        nf |= 1 << me
                else:
                    if me not in drill_sites or not (aj == 5 and other == me):
                        r += wrong
                    elif f >> me & 1:
                        r += repeat / 2
                    else:
                        r += drill / 2
                        nf |= 1 << me
            R[si, a] = r
            outs1 = [(mv(x, a1), p_move), (x, 1 - p_move)] if a1 < 4 else [(x, 1.0)]
            outs2 = [(mv(y, a2), p_move), (y, 1 - p_move)] if a2 < 4 else [(y, 1.0)]
            for (nx, p1), (ny, p2) in itertools.product(outs1, outs2):
                T[si, a, s0 if nf == 15 else idx[(nx, ny, nf)]] += p1 * p2
        O[:, si, (x * 2 + (f >> x & 1)) * 8 + y * 2 + (f >> y & 1)] = 1.0
    b0 = np.zeros(256); b0[s0] = 1
    acts = ["north", "south", "west", "east", "sample", "drill"]
    obs = [f"cell{c}-{d}" for c in range(4) for d in ("open", "done")]
    return Model([f"r{x}{y}-{f:04b}" for x, y, f in st], [acts, acts], [obs, obs], T, O, R, b0)


def hotel(arrive=1.0, depart=0.75, fee=2.5, refuse=-7.5, overbook=-10.0, capacity=3):
    # each agent sells rooms of its own hotel (occupancy 0..3) and may route a client to the partner hotel
    lv = range(capacity + 1)
    st = [(x, y) for x in lv for y in lv]
    n_s = len(st)
    T = np.zeros((n_s, 9, n_s)); R = np.zeros((n_s, 9)); O = np.zeros((9, n_s, 4))

    def leave(x):
        # each guest checks out independently
        return {x - k: math.comb(x, k) * depart ** k * (1 - depart) ** (x - k) for k in range(x + 1)}

    for si, (x, y) in enumerate(st):
        for a1, a2 in itertools.product(range(3), repeat=2):
            a = a1 * 3 + a2
            r = 0.0
            for c1, c2 in itertools.product((0, 1), repeat=2):
                pc = (arrive if c1 else 1 - arrive) * (arrive if c2 else 1 - arrive)
                occ = [x, y]
                rr = 0.0
                for me, has, act in ((0, c1, a1), (1, c2, a2)):
                    if not has:
                        continue
                    if act == 2:
                        rr += refuse
                        continue
                    target = me if act == 0 else 1 - me
                    if occ[target] < capacity:
                        occ[target] += 1
                        rr += fee
                    else:
                        rr += overbook
                r += pc * rr
                d1, d2 = leave(occ[0]), leave(occ[1])
                for (n1, q1), (n2, q2) in itertools.product(d1.items(), d2.items()):
                    T[si, a, st.index((n1, n2))] += pc * q1 * q2
            R[si, a] = r

    for si, (x, y) in enumerate(st):
        O[:, si, (0 if x < capacity else 1) * 2 + (0 if y < capacity else 1)] = 1.0
    b0 = np.zeros(n_s); b0[0] = 1
    acts = ["book-own", "book-partner", "decline"]
    return Model([f"h{x}{y}" for x, y in st], [acts, acts], [["vacant", "full"]] * 2, T, O, R, b0)


BUILDERS = {
    "dectiger": dectiger,
    "broadcast": broadcast,
    "firefighting": firefighting,
    "grid": grid,
    "grid3x3": grid3x3,
    "recycling": recycling,
    "boxpushing": boxpushing,
    "mars": mars,
    "hotel": hotel,
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "fixtures"))
    ap.add_argument("--report", action="store_true")
    ap.add_argument("only", nargs="*")
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, build in BUILDERS.items():
        if args.only and name not in args.only:
            continue
        m = build()
        write(m, out / f"{name}.dpomdp")
        if args.report:
            hs = (4, 6, 10, 100)
            print(name, "mdp", [round(m.mdp(h), 4) for h in hs], "random", [round(m.random(h), 4) for h in hs])
    sums = []
    for f in sorted(out.glob("*.dpomdp")):
        sums.append(f"{hashlib.sha256(f.read_bytes()).hexdigest()}  {f.name}")
    (out / "SHA256SUMS").write_text("\n".join(sums) + "\n")


if __name__ == "__main__":
    main()
