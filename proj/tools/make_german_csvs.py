#!/usr/bin/env python3
"""Convert the UCI Statlog German credit file (german.data) into the two CSVs
under data/.

  statlog.csv       categorical attributes kept as their A-codes, target
                    column `default` (1 = bad credit, 0 = good credit).
  south_german.csv  the same 1,000 loans in the integer coding of the
                    corrected South German Credit release (kredit.asc):
                    every A-code becomes its positional integer code, the
                    German column names are used, and `kredit` (1 = good)
                    is replaced by `default` (1 = bad).

Usage: make_german_csvs.py path/to/german.data out_dir
"""
import csv
import sys
from pathlib import Path

STATLOG_COLUMNS = [
    "checking_status", "duration", "credit_history", "purpose", "credit_amount",
    "savings", "employment", "installment_rate", "personal_status_sex",
    "other_debtors", "residence_since", "property", "age",
    "other_installment_plans", "housing", "existing_credits", "job",
    "num_dependents", "telephone", "foreign_worker",
]

SOUTH_GERMAN_COLUMNS = [
    "laufkont", "laufzeit", "moral", "verw", "hoehe", "sparkont", "beszeit",
    "rate", "famges", "buerge", "wohnzeit", "verm", "alter", "weitkred",
    "wohn", "bishkred", "beruf", "pers", "telef", "gastarb",
]

# kredit.asc level codes equal the digits after each attribute's A-prefix
# (A11 -> 1, A30 -> 0, A410 -> 10).
ATTRIBUTE_PREFIX = {
    0: "A1", 2: "A3", 3: "A4", 5: "A6", 6: "A7", 8: "A9", 9: "A10",
    11: "A12", 13: "A14", 14: "A15", 16: "A17", 18: "A19", 19: "A20",
}


def integer_code(column: int, value: str) -> int:
    prefix = ATTRIBUTE_PREFIX[column]
    if not value.startswith(prefix):
        raise ValueError(f"column {column}: unexpected code {value}")
    return int(value[len(prefix):])


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__, file=sys.stderr)
        return 2
    rows = [line.split() for line in Path(sys.argv[1]).read_text().splitlines() if line.strip()]
    if any(len(r) != 21 for r in rows):
        raise SystemExit("german.data: expected 21 whitespace-separated fields per row")
    out = Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "statlog.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(STATLOG_COLUMNS + ["default"])
        for r in rows:
            w.writerow(r[:20] + ["1" if r[20] == "2" else "0"])

    with open(out / "south_german.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(SOUTH_GERMAN_COLUMNS + ["default"])
        for r in rows:
            coded = [str(integer_code(i, v)) if i in ATTRIBUTE_PREFIX else v
                     for i, v in enumerate(r[:20])]
            w.writerow(coded + ["1" if r[20] == "2" else "0"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
