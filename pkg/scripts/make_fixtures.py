#!/usr/bin/env python3
"""Regenerate the bundled fixture corpus (src/eegtext/data/fixtures/fixture_reports.jsonl).

The fixture is frozen in the repo; rerun this only when the templates change,
then review the diff. Term-dense templates keep lexicon coverage well above
the 20% piece-level floor the corruption tests assume.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from eegtext.util import stable_rng  # noqa: E402

LATERALITIES = ["left", "right", "bilateral", "diffuse", "generalized"]
LOCALIZATIONS = [
    "temporal",
    "frontal",
    "parietal",
    "occipital",
    "central",
    "frontotemporal",
    "centrotemporal",
    "parieto-occipital",
]
PATTERNS = [
    "focal slowing",
    "sharp waves",
    "spike-and-wave discharges",
    "epileptiform discharges",
    "triphasic waves",
    "rhythmic delta activity",
    "polymorphic delta activity",
    "beta activity",
    "theta activity",
    "sleep spindles",
    "vertex waves",
    "lateralized periodic discharges",
    "intermittent slowing",
    "alpha attenuation",
]
STATES = ["wakefulness", "drowsiness", "sleep", "hyperventilation", "photic stimulation"]
HZ = ["2", "3", "3.5", "4", "5", "6", "7", "9", "10"]

FINDINGS_TEMPLATES = [
    "Frequent {patt} over the {lat} {loc} region with preserved reactivity.",
    "Intermittent {patt} at {hz} Hz in the {lat} {loc} area during {state}.",
    "Occasional {patt} were seen over the {loc} regions bilaterally.",
    "The background shows a posterior dominant rhythm at {hz} Hz with {patt}.",
    "No {patt} during {state}.",
    "There is no evidence of {patt} on this recording.",
    "Rare {lat} {loc} {patt} increase during {state}.",
    "Mild {patt} is observed over the {lat} {loc} regions.",
    "{Patt} without associated {patt2} were noted.",
    "Continuous {patt} with superimposed {patt2} over the {loc} region.",
    "Alpha attenuation with eye opening was preserved throughout {state}.",
    "Sleep spindles and K complexes were symmetric during stage 2 sleep.",
    "Photic stimulation elicited a photic driving response without {patt}.",
    "Hyperventilation produced no activation of {patt}.",
    "The record is negative for {patt} and electrographic seizures.",
    "Excess beta activity consistent with sedation is present diffusely.",
]
IMPRESSION_TEMPLATES = [
    "Abnormal EEG due to {lat} {loc} {patt}.",
    "Normal EEG in wakefulness and drowsiness.",
    "Mildly abnormal recording with {patt} suggesting {lat} cerebral dysfunction.",
    "No epileptiform discharges or electrographic seizures were captured.",
    "Abnormal study showing {patt} at {hz} Hz over the {loc} region.",
]
TECHNIQUE_TEMPLATE = (
    "Digital EEG was recorded using the international 10-20 electrode placement "
    "with standard montages; impedances were kept below 5 kilohms."
)
HISTORY_TEMPLATES = [
    "Patient evaluated on 03/14/2021 by Dr. Smith for episodes of confusion.",
    "Follow-up study; prior EEG on 2020-11-02. MRN 4455667.",
    "Referred by Dr. Jones for staring spells; last event January 5, 2022.",
]
MEDICATION_TEMPLATES = [
    "Levetiracetam 500 mg twice daily.",
    "Valproate 250 mg daily; lorazepam as needed.",
]


def fill(template: str, rng) -> str:
    patt = rng.choice(PATTERNS)
    patt2 = rng.choice([p for p in PATTERNS if p != patt])
    values = {
        "lat": rng.choice(LATERALITIES),
        "loc": rng.choice(LOCALIZATIONS),
        "patt": patt,
        "patt2": patt2,
        "Patt": patt[0].upper() + patt[1:],
        "state": rng.choice(STATES),
        "hz": rng.choice(HZ),
    }
    return template.format(**values)


def make_report(index: int) -> dict:
    rng = stable_rng(20240701, "fixture-report", index)
    blocks = []
    if rng.random() < 0.5:
        blocks.append("HISTORY:\n" + rng.choice(HISTORY_TEMPLATES))
    if rng.random() < 0.3:
        blocks.append("MEDICATIONS:\n" + rng.choice(MEDICATION_TEMPLATES))
    if rng.random() < 0.6:
        blocks.append("TECHNIQUE:\n" + TECHNIQUE_TEMPLATE)
    n_paragraphs = rng.randint(2, 4)
    paragraphs = []
    for _ in range(n_paragraphs):
        sentences = [fill(rng.choice(FINDINGS_TEMPLATES), rng) for _ in range(rng.randint(2, 4))]
        paragraphs.append(" ".join(sentences))
    blocks.append("FINDINGS:\n" + "\n\n".join(paragraphs))
    impression = [fill(rng.choice(IMPRESSION_TEMPLATES), rng) for _ in range(rng.randint(1, 2))]
    blocks.append("IMPRESSION:\n" + "\n\n".join(impression))
    return {"id": f"fx{index:03d}", "text": "\n\n".join(blocks), "meta": {"origin": "fixture"}}


def main() -> None:
    out = Path(__file__).resolve().parents[1] / "src/eegtext/data/fixtures/fixture_reports.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    n_reports = 46
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        for i in range(n_reports):
            fh.write(json.dumps(make_report(i), ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")
    print(f"wrote {n_reports} fixture reports -> {out}")


if __name__ == "__main__":
    main()
