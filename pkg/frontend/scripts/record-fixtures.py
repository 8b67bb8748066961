"""Record real wire-protocol documents for the console tests.

Drives the bundled demo show through the engine and freezes the JSON the
server would put on the socket at interesting moments. Rerun after any
protocol change:

    python3 frontend/scripts/record-fixtures.py
"""

import dataclasses
import json
from pathlib import Path

import numpy as np

from choreokit.robot_model import default_profile
from choreokit.sequencer import (
    Cue,
    CueSheet,
    TrajectoryStore,
    cards_json,
    load_cue_sheet,
)
from choreokit.server import Command, Engine
from choreokit.sim import SimSession, demo_paths, read_force
from choreokit.trajectory import Trajectory, uniform_times

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def dump(name: str, doc) -> None:
    (OUT / name).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print("wrote", name)


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    profile = default_profile()
    paths = demo_paths()
    store = TrajectoryStore.from_dir(paths["motifs"], rate_hz=profile.control_rate_hz)
    sheet = load_cue_sheet(paths["cuesheet"], store=store)
    scripts = {
        2: read_force(paths["teach_push"], seed=0),
        4: read_force(paths["tap"], seed=0),
    }

    (OUT / "cuesheet.json").write_text(cards_json(sheet))
    print("wrote cuesheet.json")

    engine = Engine(
        SimSession(
            sheet, store, profile, initial_q=np.zeros(6), force_scripts=scripts
        )
    )
    dump("snapshot_idle.json", engine.snapshot())

    engine.submit(Command(id="rec-start", action="start"))
    for _ in range(5000):
        engine.step(1)
        if engine.session.state.phase == "running":
            break
    engine.step(250)  # half a second into the cue proper
    assert engine.session.state.phase == "running"
    dump("snapshot_running.json", engine.snapshot())

    wanted = {"in_teach": "snapshot_teach.json"}
    for _ in range(200_000):
        engine.step(1)
        phase = engine.session.state.phase
        if phase in wanted:
            dump(wanted.pop(phase), engine.snapshot())
        if engine.session.taps:
            break
        if engine.session.done:
            raise SystemExit("show finished before the tap fixture was captured")
    assert engine.session.force_average == 22.5
    dump("snapshot_tap.json", engine.snapshot())

    # a show whose first cue cannot be planned: starting it latches the stop
    trap_store = TrajectoryStore()
    far = np.full((10, 6), 3.0)
    trap_store.register(
        "far",
        Trajectory(
            rate=profile.control_rate_hz,
            ts=uniform_times(10, profile.control_rate_hz),
            qs=far,
            source="recording",
        ),
    )
    trap = Engine(
        SimSession(
            CueSheet(title="trap", cues=(Cue(1, "prerecorded", "far", "", 0.1, ""),)),
            trap_store,
            profile,
            initial_q=np.zeros(6),
        )
    )
    trap.submit(Command(id="rec-trap", action="start"))
    assert trap.session.state.phase == "protective_stop"
    dump("snapshot_stop.json", trap.snapshot())


if __name__ == "__main__":
    main()
