"""Text and JSON formats for algebras, structures, sentences and clause sets.

The text grammars are line based; ``#`` starts a comment, blank lines are
skipped.  Serialization is canonical, so serialize(parse(text)) reproduces a
canonically formatted file byte for byte.

Algebra file::

    domain 3
    op s 2
    table: 0 2 2 2 1 2 2 2 2

Structure file::

    domain 3
    rel rho 2 tuples 00 01
    rel diag 2 dnf (x0=0&x1=0)|(x0=1&x1=1)
    rel neq 2 qf !(x0=x1)
    const a 0

Tuples are digit strings (domains stay below size 10); the token ``-``
denotes the empty tuple of an arity-0 relation.

Sentence file::

    forall x
    exists y
    matrix: rho(x,y) & x=y & y=0

Clause file: one ``nae x y z`` line per triple, with optional leading
``var x`` lines for variables outside every clause.
"""

from __future__ import annotations

import json
import re
from typing import Optional

from .errors import ParseError, ValidationError
from .model import (
    Algebra,
    Domain,
    ENC_DNF,
    ENC_QF,
    ENC_TUPLES,
    OpTable,
    Relation,
    Structure,
    formula_to_text,
    materialize,
    parse_formula,
)
from .qcsp import (
    EXISTS,
    FORALL,
    EqAtom,
    NaeInstance,
    Pi2NaeInstance,
    RelAtom,
    SentencePH,
)

_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_']*$")


def _lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def _parse_domain(lineno: int, line: str) -> Domain:
    parts = line.split()
    if len(parts) != 2 or parts[0] != "domain" or not parts[1].isdigit():
        raise ParseError("expected 'domain N'", line=lineno)
    return Domain(int(parts[1]))


# ---------------------------------------------------------------------------
# algebra files


def parse_algebra(text: str) -> Algebra:
    domain: Optional[Domain] = None
    ops: dict[str, OpTable] = {}
    pending: Optional[tuple[str, int, list, int]] = None  # name, arity, entries, lineno

    def finish_pending():
        nonlocal pending
        if pending is None:
            return
        name, arity, entries, lineno = pending
        need = domain.size**arity
        if len(entries) != need:
            raise ParseError(
                f"operation {name!r} needs {need} table entries, got {len(entries)}",
                line=lineno,
            )
        try:
            ops[name] = OpTable(arity, domain, tuple(entries))
        except ValidationError as exc:
            raise ParseError(str(exc), line=lineno) from exc
        pending = None

    for lineno, line in _lines(text):
        parts = line.split()
        if parts[0] == "domain":
            if domain is not None:
                raise ParseError("duplicate domain line", line=lineno)
            domain = _parse_domain(lineno, line)
        elif parts[0] == "op":
            if domain is None:
                raise ParseError("domain must come first", line=lineno)
            finish_pending()
            if len(parts) != 3 or not parts[2].isdigit():
                raise ParseError("expected 'op NAME ARITY'", line=lineno)
            if not _NAME.match(parts[1]):
                raise ParseError(f"bad operation name {parts[1]!r}", line=lineno)
            if parts[1] in ops:
                raise ParseError(f"duplicate operation {parts[1]!r}", line=lineno)
            pending = (parts[1], int(parts[2]), [], lineno)
        elif parts[0] == "table:" or pending is not None and _all_ints(parts):
            if pending is None:
                raise ParseError("table entries outside an op block", line=lineno)
            entries = parts[1:] if parts[0] == "table:" else parts
            for e in entries:
                if not e.isdigit():
                    raise ParseError(f"bad table entry {e!r}", line=lineno)
                pending[2].append(int(e))
        else:
            raise ParseError(f"unrecognized line {line!r}", line=lineno)
    if domain is None:
        raise ParseError("missing domain line", line=1)
    finish_pending()
    return Algebra(domain, ops)


def _all_ints(parts) -> bool:
    return all(p.isdigit() for p in parts)


def serialize_algebra(algebra: Algebra) -> str:
    out = [f"domain {algebra.domain.size}"]
    for name, op in algebra.ops.items():
        out.append(f"op {name} {op.arity}")
        out.append("table: " + " ".join(str(v) for v in op.table))
    return "\n".join(out) + "\n"


def algebra_to_json(algebra: Algebra) -> dict:
    return {
        "domain": algebra.domain.size,
        "ops": [
            {"name": name, "arity": op.arity, "table": list(op.table)}
            for name, op in algebra.ops.items()
        ],
    }


def algebra_from_json(data: dict) -> Algebra:
    domain = Domain(data["domain"])
    ops = {
        entry["name"]: OpTable(entry["arity"], domain, tuple(entry["table"]))
        for entry in data["ops"]
    }
    return Algebra(domain, ops)


# ---------------------------------------------------------------------------
# structure files


def _tuple_token(t: tuple) -> str:
    return "-" if not t else "".join(str(v) for v in t)


def _parse_tuple_token(token: str, arity: int, domain: Domain, lineno: int) -> tuple:
    if token == "-":
        t: tuple = ()
    else:
        if not token.isdigit():
            raise ParseError(f"bad tuple token {token!r}", line=lineno)
        t = tuple(int(c) for c in token)
    if len(t) != arity:
        raise ParseError(
            f"tuple {token!r} has arity {len(t)}, relation declares {arity}", line=lineno
        )
    for v in t:
        if v >= domain.size:
            raise ParseError(f"element {v} out of range in tuple {token!r}", line=lineno)
    return t


def parse_structure(text: str) -> Structure:
    domain: Optional[Domain] = None
    relations: dict[str, Relation] = {}
    constants: dict[str, int] = {}
    for lineno, line in _lines(text):
        parts = line.split(None, 4)
        if parts[0] == "domain":
            if domain is not None:
                raise ParseError("duplicate domain line", line=lineno)
            domain = _parse_domain(lineno, line)
        elif parts[0] == "rel":
            if domain is None:
                raise ParseError("domain must come first", line=lineno)
            if len(parts) < 4 or not parts[2].isdigit():
                raise ParseError("expected 'rel NAME ARITY KIND ...'", line=lineno)
            name, arity, kind = parts[1], int(parts[2]), parts[3]
            if not _NAME.match(name):
                raise ParseError(f"bad relation name {name!r}", line=lineno)
            if name in relations:
                raise ParseError(f"duplicate relation {name!r}", line=lineno)
            rest = parts[4] if len(parts) > 4 else ""
            try:
                if kind == "tuples":
                    tuples = [
                        _parse_tuple_token(tok, arity, domain, lineno)
                        for tok in rest.split()
                    ]
                    relations[name] = Relation.from_tuples(domain, arity, tuples)
                elif kind in ("dnf", "qf"):
                    formula = parse_formula(rest.strip(), arity, domain)
                    if kind == "dnf":
                        relations[name] = Relation.from_dnf(domain, arity, formula)
                    else:
                        relations[name] = Relation.from_qf(domain, arity, formula)
                else:
                    raise ParseError(f"unknown relation kind {kind!r}", line=lineno)
            except ValidationError as exc:
                if isinstance(exc, ParseError):
                    raise
                raise ParseError(str(exc), line=lineno) from exc
        elif parts[0] == "const":
            if domain is None:
                raise ParseError("domain must come first", line=lineno)
            if len(parts) != 3 or not parts[2].isdigit():
                raise ParseError("expected 'const NAME VALUE'", line=lineno)
            value = int(parts[2])
            if value >= domain.size:
                raise ParseError(f"constant value {value} out of range", line=lineno)
            constants[parts[1]] = value
        else:
            raise ParseError(f"unrecognized line {line!r}", line=lineno)
    if domain is None:
        raise ParseError("missing domain line", line=1)
    return Structure(domain, relations, constants)


def serialize_structure(struct: Structure) -> str:
    if struct.domain.size > 10:
        raise ValidationError("digit-string tuple tokens support domains up to size 10")
    out = [f"domain {struct.domain.size}"]
    for name, rel in struct.relations.items():
        if rel.encoding == ENC_TUPLES:
            toks = " ".join(_tuple_token(t) for t in materialize(rel))
            out.append(f"rel {name} {rel.arity} tuples {toks}".rstrip())
        else:
            kind = "dnf" if rel.encoding == ENC_DNF else "qf"
            out.append(f"rel {name} {rel.arity} {kind} {formula_to_text(rel.formula)}")
    for name, value in struct.constants.items():
        out.append(f"const {name} {value}")
    return "\n".join(out) + "\n"


def structure_to_json(struct: Structure) -> dict:
    rels = []
    for name, rel in struct.relations.items():
        entry: dict = {"name": name, "arity": rel.arity, "encoding": rel.encoding}
        if rel.encoding == ENC_TUPLES:
            entry["tuples"] = [list(t) for t in materialize(rel)]
        else:
            entry["formula"] = formula_to_text(rel.formula)
        rels.append(entry)
    return {
        "domain": struct.domain.size,
        "relations": rels,
        "constants": dict(struct.constants),
    }


def structure_from_json(data: dict) -> Structure:
    domain = Domain(data["domain"])
    relations = {}
    for entry in data["relations"]:
        if entry["encoding"] == ENC_TUPLES:
            rel = Relation.from_tuples(
                domain, entry["arity"], [tuple(t) for t in entry["tuples"]]
            )
        elif entry["encoding"] == ENC_DNF:
            rel = Relation.from_dnf(domain, entry["arity"], entry["formula"])
        elif entry["encoding"] == ENC_QF:
            rel = Relation.from_qf(domain, entry["arity"], entry["formula"])
        else:
            raise ValidationError(f"unknown encoding {entry['encoding']!r}")
        relations[entry["name"]] = rel
    return Structure(domain, relations, data.get("constants", {}))


# ---------------------------------------------------------------------------
# sentence files

_ATOM = re.compile(r"([A-Za-z_][A-Za-z0-9_']*)\(([^()]*)\)$")


def _parse_term(token: str, lineno: int):
    token = token.strip()
    if token.isdigit():
        return int(token)
    if _NAME.match(token):
        return token
    raise ParseError(f"bad term {token!r}", line=lineno)


def parse_sentence(text: str) -> SentencePH:
    prefix = []
    atoms = []
    saw_matrix = False
    for lineno, line in _lines(text):
        if line.startswith("matrix:"):
            saw_matrix = True
            body = line[len("matrix:"):].strip()
            if not body:
                continue
            for chunk in body.split("&"):
                chunk = chunk.strip()
                m = _ATOM.match(chunk)
                if m:
                    args = tuple(
                        _parse_term(tok, lineno)
                        for tok in m.group(2).split(",")
                        if tok.strip()
                    )
                    atoms.append(RelAtom(m.group(1), args))
                elif "=" in chunk:
                    left, right = chunk.split("=", 1)
                    atoms.append(
                        EqAtom(_parse_term(left, lineno), _parse_term(right, lineno))
                    )
                else:
                    raise ParseError(f"bad atom {chunk!r}", line=lineno)
        else:
            parts = line.split()
            if len(parts) != 2 or parts[0] not in (FORALL, EXISTS):
                raise ParseError("expected 'forall VAR', 'exists VAR' or 'matrix: ...'", line=lineno)
            if not _NAME.match(parts[1]):
                raise ParseError(f"bad variable name {parts[1]!r}", line=lineno)
            prefix.append((parts[0], parts[1]))
    if not saw_matrix:
        raise ParseError("missing matrix line", line=1)
    return SentencePH(tuple(prefix), tuple(atoms))


def _term_text(term) -> str:
    return str(term)


def serialize_sentence(phi: SentencePH) -> str:
    out = [f"{q} {v}" for q, v in phi.prefix]
    rendered = []
    for atom in phi.atoms:
        if isinstance(atom, RelAtom):
            rendered.append(f"{atom.rel}({','.join(_term_text(a) for a in atom.args)})")
        else:
            rendered.append(f"{_term_text(atom.left)}={_term_text(atom.right)}")
    out.append("matrix: " + " & ".join(rendered))
    return "\n".join(out) + "\n"


def sentence_to_json(phi: SentencePH) -> dict:
    atoms = []
    for atom in phi.atoms:
        if isinstance(atom, RelAtom):
            atoms.append({"rel": atom.rel, "args": list(atom.args)})
        else:
            atoms.append({"eq": [atom.left, atom.right]})
    return {"prefix": [[q, v] for q, v in phi.prefix], "atoms": atoms}


def sentence_from_json(data: dict) -> SentencePH:
    atoms = []
    for entry in data["atoms"]:
        if "rel" in entry:
            atoms.append(RelAtom(entry["rel"], tuple(entry["args"])))
        else:
            atoms.append(EqAtom(entry["eq"][0], entry["eq"][1]))
    return SentencePH(tuple((q, v) for q, v in data["prefix"]), tuple(atoms))


# ---------------------------------------------------------------------------
# clause files


def parse_nae(text: str) -> NaeInstance:
    variables: list[str] = []
    clauses = []

    def note(v: str):
        if v not in variables:
            variables.append(v)

    for lineno, line in _lines(text):
        parts = line.split()
        if parts[0] == "var" and len(parts) == 2:
            note(parts[1])
        elif parts[0] == "nae" and len(parts) == 4:
            for v in parts[1:]:
                if not _NAME.match(v):
                    raise ParseError(f"bad variable name {v!r}", line=lineno)
                note(v)
            clauses.append(tuple(parts[1:]))
        else:
            raise ParseError("expected 'var X' or 'nae X Y Z'", line=lineno)
    return NaeInstance(tuple(variables), tuple(clauses))


def serialize_nae(inst: NaeInstance) -> str:
    in_clause = {v for clause in inst.clauses for v in clause}
    out = [f"var {v}" for v in inst.variables if v not in in_clause]
    out += [f"nae {a} {b} {c}" for a, b, c in inst.clauses]
    return "\n".join(out) + "\n"


def parse_pi2_nae(text: str) -> Pi2NaeInstance:
    """Quantified clause file: 'forall X' / 'exists Y' lines, then 'nae X Y Z'
    lines."""
    universals: list[str] = []
    existentials: list[str] = []
    clauses = []
    for lineno, line in _lines(text):
        parts = line.split()
        if parts[0] in (FORALL, EXISTS) and len(parts) == 2:
            if not _NAME.match(parts[1]):
                raise ParseError(f"bad variable name {parts[1]!r}", line=lineno)
            (universals if parts[0] == FORALL else existentials).append(parts[1])
        elif parts[0] == "nae" and len(parts) == 4:
            clauses.append(tuple(parts[1:]))
        else:
            raise ParseError("expected 'forall X', 'exists Y' or 'nae X Y Z'", line=lineno)
    try:
        return Pi2NaeInstance(tuple(universals), tuple(existentials), tuple(clauses))
    except ValidationError as exc:
        raise ParseError(str(exc)) from exc


def serialize_pi2_nae(inst: Pi2NaeInstance) -> str:
    out = [f"forall {v}" for v in inst.universals]
    out += [f"exists {v}" for v in inst.existentials]
    out += [f"nae {a} {b} {c}" for a, b, c in inst.clauses]
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# convenience wrappers


def load_algebra(path: str) -> Algebra:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if path.endswith(".json"):
        return algebra_from_json(json.loads(text))
    return parse_algebra(text)


def load_structure(path: str) -> Structure:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if path.endswith(".json"):
        return structure_from_json(json.loads(text))
    return parse_structure(text)


def load_sentence(path: str) -> SentencePH:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if path.endswith(".json"):
        return sentence_from_json(json.loads(text))
    return parse_sentence(text)


def load_nae(path: str) -> NaeInstance:
    with open(path, encoding="utf-8") as fh:
        return parse_nae(fh.read())
