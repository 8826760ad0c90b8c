#!/usr/bin/env python3
"""Regenerates the scene fixtures under fixtures/.

Each scenario is a 60 s walk through a street-like corridor lined with
static facades. The MDC variant holds only the background and a couple of
passers-by; the APC variant adds the attention-provoking entities.
Layouts are deterministic: rerunning the script reproduces the files.
"""

import json
import math
import random
import sys
from pathlib import Path

VERSION = "headsim-scene/1"
EYE = 1.6
SPEED = 1.4
DURATION = 60.0


def box(eid, cls, pos, ext, tags=(), hint="", **extra):
    e = {"id": eid, "class": cls, "tags": list(tags),
         "waypoints": [{"t": 0.0, "position": [round(v, 3) for v in pos]}],
         "extents": list(ext)}
    if hint:
        e["hint"] = hint
    e.update(extra)
    return e


def walker(eid, start, velocity, tags=("social",), hint="", cls="pedestrian", **extra):
    e = box(eid, cls, start, (0.25, 0.25, 0.9), tags, hint, **extra)
    e["velocity"] = list(velocity)
    return e


def facades(rng, labels, length, side_offset=5.0, spacing=2.5):
    out = []
    x = 4.0
    i = 0
    while x < length + 30:
        for side in (-1, 1):
            label = labels[rng.randrange(len(labels))]
            width = rng.uniform(0.6, 1.3)
            height = rng.uniform(2.0, 6.0)
            y = side * (side_offset + rng.uniform(-0.8, 0.8))
            out.append(box(f"bg{i:03d}", label, (x + rng.uniform(-1, 1), y, height / 2),
                           (width, 0.6, height / 2), ("static_background",)))
            i += 1
        x += spacing
    return out


SCENARIOS = {
    "bus": dict(goal="catch the bus at the stop", goal_pos=(86.0, 4.5, 1.5), goal_cls="bus stop",
                labels=["shopfront", "bench", "lamp post", "tree", "kiosk", "billboard"], bend=0.0),
    "cafe": dict(goal="find the cafe with the green awning", goal_pos=(60.0, -9.0, 1.5), goal_cls="cafe entrance",
                 labels=["cafe table", "planter", "awning", "shopfront", "menu board"], bend=0.0),
    "crossing": dict(goal="cross the road at the zebra crossing", goal_pos=(84.0, 0.0, 0.1),
                     goal_cls="zebra crossing", labels=["traffic light", "railing", "parked car", "lamp post", "sign"],
                     bend=0.0),
    "mall": dict(goal="reach the escalator to the second floor", goal_pos=(70.0, -14.0, 1.5), goal_cls="escalator",
                 labels=["store window", "pillar", "fountain", "kiosk", "plant"], bend=-0.25),
    "street": dict(goal="walk to the post office", goal_pos=(80.0, 20.0, 1.5), goal_cls="post office",
                   labels=["shopfront", "doorway", "tree", "bicycle rack", "lamp post"], bend=0.25),
}


def route(bend):
    """Straight for 40 m, then a bend of `bend` radians for the rest."""
    length = SPEED * DURATION
    a = (0.0, 0.0, EYE)
    b = (40.0, 0.0, EYE)
    rest = length - 40.0
    c = (40.0 + rest * math.cos(bend), rest * math.sin(bend), EYE)
    return [a, b, c]


def base_scene(name, layout, condition, rng):
    path = route(layout["bend"])
    ents = facades(rng, layout["labels"], SPEED * DURATION)
    # Rotate background placed past the bend so the corridor follows the route.
    if layout["bend"]:
        for e in ents:
            p = e["waypoints"][0]["position"]
            if p[0] > 40.0:
                dx, dy = p[0] - 40.0, p[1]
                cb, sb = math.cos(layout["bend"]), math.sin(layout["bend"])
                e["waypoints"][0]["position"] = [round(40.0 + dx * cb - dy * sb, 3), round(dx * sb + dy * cb, 3), p[2]]
    ents.append(box("goal", layout["goal_cls"], layout["goal_pos"], (1.0, 0.4, 1.0), ("goal_relevant",),
                    hint="the place the walk is heading for"))
    agents = [
        walker("passerby1", (70.0, 3.0, 0.9), (-1.2, 0.0, 0.0)),
        walker("passerby2", (20.0, -3.2, 0.9), (0.9, 0.0, 0.0)),
    ]
    return {
        "version": VERSION, "name": name, "condition": condition,
        "goal": {"text": layout["goal"], "position": list(layout["goal_pos"])},
        "entities": ents, "agents": agents,
        "trajectories": [{"agent": "self", "path": [list(p) for p in path], "speed": SPEED}],
    }


def along(path, s, lateral):
    """Point `s` meters along the route, shifted `lateral` meters to the left."""
    for a, b in zip(path, path[1:]):
        seg = math.dist(a[:2], b[:2])
        if s <= seg:
            ux, uy = (b[0] - a[0]) / seg, (b[1] - a[1]) / seg
            return (a[0] + ux * s - uy * lateral, a[1] + uy * s + ux * lateral)
        s -= seg
    return path[-1][:2]


def attention_entities(path):
    sx, sy = along(path, 30.0, 4.0)
    ax, ay = along(path, 52.0, -4.5)
    gx, gy = along(path, 70.0, 4.5)
    return [
        box("santa", "person in a santa costume", (sx, sy, 0.9), (0.35, 0.35, 0.9), ("novel",),
            hint="a man dressed as santa claus ringing a bell"),
        box("accident", "traffic accident", (ax, ay, 0.7), (2.0, 1.0, 0.7), ("hazard",),
            hint="two crumpled cars blocking the kerb"),
    ], [
        box("arguer1", "arguing person", (gx, gy, 0.9), (0.25, 0.25, 0.9), ("social", "novel"),
            hint="shouting and gesturing"),
        box("arguer2", "arguing person", (gx + 0.8, gy + 0.5, 0.9), (0.25, 0.25, 0.9), ("social", "novel"),
            hint="shouting back"),
    ]


def driver_fixture(name, layout, rng, extra_entities=(), extra_agents=(), condition="APC"):
    scene = base_scene(name, layout, condition, rng)
    scene["entities"].extend(extra_entities)
    scene["agents"].extend(extra_agents)
    return scene


def main(out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def dump(fname, scene):
        (out / fname).write_text(json.dumps(scene, indent=2) + "\n")
        written.append(fname)

    for name, layout in SCENARIOS.items():
        mdc = base_scene(name, layout, "MDC", random.Random(name))
        apc = base_scene(name, layout, "APC", random.Random(name))
        path = [tuple(p) for p in apc["trajectories"][0]["path"]]
        objs, people = attention_entities(path)
        apc["entities"].extend(objs)
        apc["agents"].extend(people)
        dump(f"{name}_mdc.json", mdc)
        dump(f"{name}_apc.json", apc)

    street = SCENARIOS["street"] | {"bend": 0.0}

    hazard = box("hole", "open manhole", (45.0, -3.5, 0.2), (0.6, 0.6, 0.2), ("hazard",),
                 hint="an uncovered manhole by the kerb")
    dump("hazard.json", driver_fixture("hazard", street, random.Random("hazard"), [hazard]))

    statue = box("statue", "living statue performer", (38.0, 4.5, 1.0), (0.4, 0.4, 1.0), ("novel",),
                 hint="a silver-painted performer standing perfectly still")
    dump("novel.json", driver_fixture("novel", street, random.Random("novel"), [statue]))

    flow = [walker(f"flow{i}", (40.0 + 1.2 * i, 14.0 + 0.7 * (i % 2), 0.9), (0.0, -1.1, 0.0), vanish_at=32.0)
            for i in range(4)]
    dump("flow.json", driver_fixture("flow", street, random.Random("flow"), extra_agents=flow))

    injected_mdc = base_scene("injected", street, "MDC", random.Random("injected"))
    injected_apc = base_scene("injected", street, "APC", random.Random("injected"))
    injected_apc["entities"].append(
        box("debris", "fallen scaffolding", (50.0, -3.0, 0.5), (1.2, 0.8, 0.5), ("hazard",),
            hint="scaffolding poles scattered across the pavement"))
    dump("injected_mdc.json", injected_mdc)
    dump("injected_apc.json", injected_apc)

    print("\n".join(written))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "fixtures")
