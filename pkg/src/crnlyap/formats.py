"""On-disk formats: certificate JSON, matrix JSON/CSV, analysis JSON."""

from __future__ import annotations

import csv
import io
import json
from functools import lru_cache
from importlib.resources import files
from pathlib import Path
from typing import Any, Optional

import jsonschema

from . import linalg
from .certificate import PwlrCertificate, convex, from_sum_abs, general, l1_candidate
from .network import ReactionNetwork

SCHEMA_VERSION = 1


class FormatError(ValueError):
    pass


@lru_cache(maxsize=None)
def schema(name: str) -> dict:
    return json.loads((files("crnlyap") / "schemas" / f"{name}.schema.json").read_text())


def validate(doc: Any, name: str) -> None:
    try:
        jsonschema.validate(doc, schema(name))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise FormatError(f"{name} schema violation at {where}: {exc.message}") from exc


def dumps(doc: Any) -> str:
    """Deterministic JSON text."""
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def read_json(path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


# --- certificates ----------------------------------------------------------------

def certificate_document(
    cert: PwlrCertificate,
    net: Optional[ReactionNetwork] = None,
    method: Optional[str] = None,
    report: Optional[dict] = None,
) -> dict:
    doc: dict = {
        "schema_version": SCHEMA_VERSION,
        "kind": "certificate",
        "form": "convex" if cert.is_convex else "general",
        "C": linalg.fmt_matrix(cert.C),
        "reactions": cert.nu,
    }
    if cert.H is not None:
        doc["H"] = linalg.fmt_matrix(cert.H)
    if net is not None:
        doc["network"] = net.source
        doc["species"] = list(net.species)
    if method:
        doc["method"] = method
    if report is not None:
        doc["report"] = report
    validate(doc, "certificate")
    return doc


def certificate_from_document(doc: dict, net: ReactionNetwork) -> PwlrCertificate:
    """Build a certificate, expanding ξ and sum-of-abs forms into max form."""
    validate(doc, "certificate")
    form = doc["form"]
    try:
        if form == "convex":
            cert = convex(doc["C"])
        elif form == "general":
            cert = general(doc["C"], doc["H"])
        elif form == "l1":
            cert = l1_candidate(doc["xi"], net.gamma)
        else:
            cert = from_sum_abs(doc["terms"])
    except (ValueError, ZeroDivisionError) as exc:
        raise FormatError(f"invalid certificate: {exc}") from exc
    if cert.nu != net.nu:
        raise FormatError(f"certificate has {cert.nu} columns but the network has {net.nu} reactions")
    if "reactions" in doc and doc["reactions"] != net.nu:
        raise FormatError(f"certificate declares {doc['reactions']} reactions but the network has {net.nu}")
    return cert


# --- matrices ---------------------------------------------------------------------

def load_matrix(path) -> linalg.Matrix:
    """Rational matrix from JSON (bare rows or a matrix document) or CSV."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".csv":
        rows = [[c.strip() for c in r] for r in csv.reader(io.StringIO(text)) if any(c.strip() for c in r)]
    else:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc.msg})") from exc
        validate(doc, "matrix")
        rows = doc["rows"] if isinstance(doc, dict) else doc
    try:
        return linalg.matrix(rows)
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
