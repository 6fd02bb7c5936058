"""Record CSV files and annual count tables.

Record files are UTF-8 CSV with header ``y,l,r,weight``; the weight column
may be omitted, in which case every row has weight 1.  Annual count tables
are small JSON documents; the mid-year convention turns each count cell
into a weighted record.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import IO, Iterable

from .estimator import ObservedRecord
from .model import StudyWindow

__all__ = [
    "ParseError",
    "AnnualCountsTable",
    "parse_records",
    "write_records",
    "expand_annual_counts",
    "load_counts_table",
    "enterprise_table",
    "enterprise_records",
]

ENTERPRISE_FIXTURE = "enterprise_2018_2019.json"


class ParseError(ValueError):
    """Malformed input; the message carries the line number when known."""


def _open_text(source):
    if hasattr(source, "read"):
        return source, False
    if str(source) == "-":
        return sys.stdin, False
    try:
        return open(source, encoding="utf-8", newline=""), True
    except OSError as exc:
        raise ParseError(f"cannot open {source}: {exc.strerror}") from exc


def _indicator(text: str, name: str, lineno: int) -> int:
    try:
        val = float(text)
    except ValueError:
        raise ParseError(f"line {lineno}: {name} is not a number: {text!r}") from None
    if val not in (0.0, 1.0):
        raise ParseError(f"line {lineno}: {name} must be 0 or 1, got {text!r}")
    return int(val)


def _number(text: str, name: str, lineno: int) -> float:
    try:
        val = float(text)
    except ValueError:
        raise ParseError(f"line {lineno}: {name} is not a number: {text!r}") from None
    if not math.isfinite(val):
        raise ParseError(f"line {lineno}: {name} must be finite, got {text!r}")
    return val


def parse_records(source) -> list[ObservedRecord]:
    """Read records from a path, an open text stream, or ``"-"`` for stdin."""
    fh, close = _open_text(source)
    try:
        reader = csv.reader(fh)
        records: list[ObservedRecord] = []
        header_seen = False
        for row in reader:
            lineno = reader.line_num
            cells = [c.strip() for c in row]
            if not cells or all(c == "" for c in cells):
                continue
            if not header_seen:
                header_seen = True
                names = [c.lower() for c in cells]
                if names[:3] == ["y", "l", "r"] and names[3:] in ([], ["weight"]):
                    continue
                # headerless file: fall through and parse this line as data
            if len(cells) not in (3, 4):
                raise ParseError(f"line {lineno}: expected 3 or 4 fields, got {len(cells)}")
            y = _number(cells[0], "y", lineno)
            l = _indicator(cells[1], "l", lineno)
            r = _indicator(cells[2], "r", lineno)
            weight = _number(cells[3], "weight", lineno) if len(cells) == 4 and cells[3] != "" else 1.0
            if (l, r) == (1, 1):
                raise ParseError(f"line {lineno}: (l, r) = (1, 1) is unobservable")
            if weight < 0:
                raise ParseError(f"line {lineno}: negative weight {weight}")
            records.append(ObservedRecord.of(y, l, r, weight))
        return records
    finally:
        if close:
            fh.close()


def _fmt_weight(w: float) -> str:
    return str(int(w)) if float(w).is_integer() else repr(float(w))


def write_records(records: Iterable[ObservedRecord], dest: IO[str] | str | Path) -> None:
    """Write records as CSV; floats use their shortest round-trip repr."""
    if hasattr(dest, "write"):
        _write(records, dest)
    else:
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            _write(records, fh)


def _write(records, fh):
    fh.write("y,l,r,weight\n")
    for rec in records:
        fh.write(f"{float(rec.y)!r},{rec.l},{rec.r},{_fmt_weight(rec.weight)}\n")


@dataclass
class AnnualCountsTable:
    """Annual counts of closures and foundations over consecutive study years.

    ``closures_founded_in_study`` lists ``(founded, closed, count)`` for
    units born and closed during the study; cells not reported are simply
    absent.  ``foundations_include_uncensored`` states whether a year's
    foundation count already contains the units of that cohort that closed
    during the study.
    """

    study_years: list[int]
    closures_founded_in_study: list[tuple[int, int, float]] = field(default_factory=list)
    closures_founded_before: dict[int, float] = field(default_factory=dict)
    foundations: dict[int, float] = field(default_factory=dict)
    foundations_include_uncensored: bool = True

    def __post_init__(self):
        years = [int(y) for y in self.study_years]
        if not years:
            raise ValueError("study_years must not be empty")
        if years != list(range(years[0], years[0] + len(years))):
            raise ValueError(f"study_years must be contiguous and ascending, got {years}")
        self.study_years = years
        for founded, closed, count in self.closures_founded_in_study:
            if not (years[0] <= founded <= closed <= years[-1]):
                raise ValueError(f"closure cell founded={founded}, closed={closed} lies outside the study years")
            _check_count(count)
        for table in (self.closures_founded_before, self.foundations):
            for year, count in table.items():
                if year not in years:
                    raise ValueError(f"year {year} is not a study year")
                _check_count(count)

    @classmethod
    def from_dict(cls, doc: dict) -> "AnnualCountsTable":
        return cls(
            study_years=list(doc["study_years"]),
            closures_founded_in_study=[
                (int(c["founded"]), int(c["closed"]), float(c["count"])) for c in doc.get("closures_founded_in_study", [])
            ],
            closures_founded_before={int(k): float(v) for k, v in doc.get("closures_founded_before", {}).items()},
            foundations={int(k): float(v) for k, v in doc.get("foundations", {}).items()},
            foundations_include_uncensored=bool(doc.get("foundations_include_uncensored", True)),
        )

    def to_dict(self) -> dict:
        return {
            "study_years": self.study_years,
            "closures_founded_in_study": [
                {"founded": f, "closed": c, "count": n} for f, c, n in self.closures_founded_in_study
            ],
            "closures_founded_before": {str(k): v for k, v in self.closures_founded_before.items()},
            "foundations": {str(k): v for k, v in self.foundations.items()},
            "foundations_include_uncensored": self.foundations_include_uncensored,
        }


def _check_count(count):
    if not (math.isfinite(count) and count >= 0):
        raise ValueError(f"counts must be finite and non-negative, got {count}")


def expand_annual_counts(table: AnnualCountsTable, w: StudyWindow) -> list[ObservedRecord]:
    """Turn annual counts into weighted records, assuming every event happens mid-year.

    With study years numbered ``k = 1..s`` and the study starting at the
    beginning of year 1:

    * born and closed in the study: ``y = closed - founded``, ``(0, 0)``
    * born before, closed in year k: ``y = k - 0.5``, ``(1, 0)``
    * born in year k, alive at study end: ``y = s - k + 0.5``, ``(0, 1)``
    """
    years = table.study_years
    if len(years) != w.s:
        raise ValueError(f"table covers {len(years)} study years but s = {w.s}")
    s = len(years)
    index = {year: k for k, year in enumerate(years, start=1)}
    out: list[ObservedRecord] = []

    closed_by_cohort: dict[int, float] = {}
    for founded, closed, count in table.closures_founded_in_study:
        closed_by_cohort[founded] = closed_by_cohort.get(founded, 0.0) + count
        if count > 0:
            out.append(ObservedRecord.of(closed - founded, 0, 0, count))
    for year in years:
        count = table.closures_founded_before.get(year, 0.0)
        if count > 0:
            out.append(ObservedRecord.of(index[year] - 0.5, 1, 0, count))
    for year in years:
        count = table.foundations.get(year, 0.0)
        if table.foundations_include_uncensored:
            count -= closed_by_cohort.get(year, 0.0)
        if count < 0:
            raise ValueError(f"foundations in {year} are fewer than the closures of that cohort")
        if count > 0:
            out.append(ObservedRecord.of(s - index[year] + 0.5, 0, 1, count))
    if not out:
        raise ValueError("counts table contains no observations")
    return out


def load_counts_table(source) -> AnnualCountsTable:
    fh, close = _open_text(source)
    try:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {exc.lineno}: invalid JSON: {exc.msg}") from None
    finally:
        if close:
            fh.close()
    try:
        return AnnualCountsTable.from_dict(doc)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"counts table is missing or has a malformed field: {exc}") from None


def enterprise_table() -> AnnualCountsTable:
    """The bundled 2018-2019 enterprise counts."""
    text = resources.files("truncexp.data").joinpath(ENTERPRISE_FIXTURE).read_text(encoding="utf-8")
    return load_counts_table(io.StringIO(text))


def enterprise_records(G: float, s: float = 2.0) -> list[ObservedRecord]:
    return expand_annual_counts(enterprise_table(), StudyWindow(s, G))
