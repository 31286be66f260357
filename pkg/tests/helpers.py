import csv
import random

from abbrevtag.corpus import LabelVocabulary, RawRecord, normalize_corpus

MEDAL_TEXT = (
    "The kinetic disposition and betaadrenergic blocking action in relation to plasma level of a "
    "single oral dosey proportional to the extent of the histamine release it is concluded that the "
    "reduction in the in vitro amine uptake after anaphylactic and compound induced histamine release "
    "is due to the fact that there are a fewer intact granules capable of storing histamine and not "
    "primarily due to a damage to the mechanisms by which mast cells take up BA in vitro the "
    "observations further strengthen the view that anaphylactic and compound induced HR are "
    "noncytolytic processes"
)
MEDAL_LOCATIONS = [76, 90]
MEDAL_LABELS = ["Biogenic Amines", "Histamine Release"]

UMN_TEXT = (
    "Her PA pressures were 44/26 with a wedge of 22 with a CVP of 10 and her heart rate of 120 to "
    "139. Her cardiac index was 3. Nursing made aggressive attempts to bring her PA pressures down "
    "and on the day 2 of admission, she was found to have her Nipride running at 7 mcg/kg/minute. "
    "This was quickly weaned, and captopril instituted with hydralazine as needed."
)
UMN_LOCATIONS = [1, 35]
UMN_LABELS = ["Pulmonary Artery", "Pulmonary Artery"]

# Separable toy corpus: each sense has its own context words.
SENSES = {
    "PA": ("pulmonary artery", "physician assistant"),
    "BA": ("bile acid", "blood alcohol"),
    "HR": ("heart rate",),
}
CONTEXT = {
    "pulmonary artery": ("pressures", "catheter"),
    "physician assistant": ("clinic", "visit"),
    "bile acid": ("liver", "bile"),
    "blood alcohol": ("ethanol", "level"),
    "heart rate": ("beats", "minute"),
}


def toy_records(n=90, seed=0):
    rng = random.Random(seed)
    records = []
    for i in range(n):
        abv = list(SENSES)[i % 3]
        sense = rng.choice(SENSES[abv])
        words = ["patient"] + [abv] + list(CONTEXT[sense]) + ["noted", "today"]
        if i % 2:
            words = ["recent"] + words
        records.append(RawRecord(i, " ".join(words), [words.index(abv)], [sense]))
    return records


def write_csv(path, rows, header=("TEXT", "LOCATION", "LABEL")):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


# filled by test_acceptance, reported by conftest.pytest_terminal_summary
ACCEPTANCE_LINES: list[str] = []
