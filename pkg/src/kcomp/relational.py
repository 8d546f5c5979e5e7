"""Multivalued circuits computing relations over finite ordered domains.

Nodes mirror the Boolean case: inputs assert one attribute/value pair,
joins generalize AND, extended unions generalize OR.  A union child that
misses attributes of its gate is extended, by default over the full domain
of each missing attribute; a circuit built with zero-suppressed defaults
extends with one fixed default value per attribute instead.  The same rule
extends the output gate to the attribute universe.

Node records:

    ('I', attr, vidx)   input relation attr/value (value by domain index)
    ('U', children)     extended union
    ('J', children)     natural join
    ('1',)              unit relation (join identity, no attributes)
    ('0',)              empty relation

A union gate is a decision gate on attribute x when every child is a join
of exactly one input x/d and one continuation without x, with the values d
pairwise distinct; decisions certify disjointness syntactically.  A circuit
is ordered when each decision on an attribute only has continuation
attributes that come later in the circuit's attribute list; ordered
circuits support counting, enumeration, and lexicographic direct access.
"""

from __future__ import annotations

import heapq
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

from .circuits import BoolCircuit, CircuitBuilder
from .errors import (DomainViolation, NonBooleanDomain, NotCountable,
                     NotDecomposable, NotOrdered, OutOfRange)


class RelCircuit:
    """Frozen relational circuit; caches are lazy and idempotent."""

    def __init__(self, nodes: tuple, output: int, attrs: tuple, domains: tuple,
                 defaults: Optional[tuple] = None):
        self.nodes = nodes
        self.output = output
        self.attrs = attrs                    # attribute names, lexicographic order
        self.domains = domains                # per attribute, ordered value tuple
        self.defaults = defaults              # value indexes, or None for full
        self.attr_index = {a: i for i, a in enumerate(attrs)}
        self._size = None
        self._attrsets = None
        self._report = None
        self._counts = None
        self._access = None

    @property
    def size(self) -> int:
        if self._size is None:
            self._size = sum(len(rec[1]) for rec in self.nodes
                             if rec[0] in ('U', 'J'))
        return self._size

    def ext_domain_size(self, attr: int) -> int:
        return 1 if self.defaults is not None else len(self.domains[attr])

    def ext_domain_values(self, attr: int) -> tuple:
        if self.defaults is not None:
            return (self.domains[attr][self.defaults[attr]],)
        return self.domains[attr]

    def attrsets(self) -> tuple:
        if self._attrsets is None:
            sets = []
            for rec in self.nodes:
                if rec[0] == 'I':
                    sets.append(frozenset((rec[1],)))
                elif rec[0] in ('1', '0'):
                    sets.append(frozenset())
                elif len(rec[1]) == 1:
                    sets.append(sets[rec[1][0]])
                else:
                    acc = set()
                    for c in rec[1]:
                        acc.update(sets[c])
                    sets.append(frozenset(acc))
            self._attrsets = tuple(sets)
        return self._attrsets


@dataclass
class RelClassReport:
    decomposable: bool
    smooth_union: bool
    decision_only: bool
    ordered_witness: Optional[tuple] = None
    structured_witness: Optional[object] = None


class RelBuilder:
    """Hash-consing builder; finish() prunes unreachable nodes."""

    def __init__(self, attrs: Iterable[str], domains: dict,
                 defaults: Optional[dict] = None):
        self.attrs = tuple(attrs)
        self.attr_index = {a: i for i, a in enumerate(self.attrs)}
        if len(self.attr_index) != len(self.attrs):
            raise ValueError("duplicate attribute names")
        doms = []
        for a in self.attrs:
            values = tuple(domains[a])
            if not values:
                raise ValueError(f"attribute {a!r} has an empty domain")
            if len(set(values)) != len(values):
                raise ValueError(f"attribute {a!r} repeats domain values")
            doms.append(values)
        self.domains = tuple(doms)
        self.value_index = [{v: i for i, v in enumerate(d)} for d in self.domains]
        if defaults is None:
            self.defaults = None
        else:
            self.defaults = tuple(self.value_index[i][defaults[a]]
                                  for i, a in enumerate(self.attrs))
        self.nodes = []
        self._intern = {}

    def _add(self, rec) -> int:
        nid = self._intern.get(rec)
        if nid is None:
            nid = len(self.nodes)
            self.nodes.append(rec)
            self._intern[rec] = nid
        return nid

    def input(self, attr: str, value) -> int:
        i = self.attr_index[attr]
        vi = self.value_index[i].get(value)
        if vi is None:
            raise DomainViolation(f"value {value!r} outside domain of {attr!r}")
        return self._add(('I', i, vi))

    def unit(self) -> int:
        return self._add(('1',))

    def empty(self) -> int:
        return self._add(('0',))

    def union(self, children: Iterable[int]) -> int:
        return self._add(('U', tuple(children)))

    def join(self, children: Iterable[int]) -> int:
        return self._add(('J', tuple(children)))

    def finish(self, output: int) -> RelCircuit:
        keep = [False] * len(self.nodes)
        keep[output] = True
        stack = [output]
        while stack:
            rec = self.nodes[stack.pop()]
            if rec[0] in ('U', 'J'):
                for c in rec[1]:
                    if not keep[c]:
                        keep[c] = True
                        stack.append(c)
        remap = {}
        out = []
        for nid, rec in enumerate(self.nodes):
            if not keep[nid]:
                continue
            if rec[0] in ('U', 'J'):
                rec = (rec[0], tuple(remap[c] for c in rec[1]))
            remap[nid] = len(out)
            out.append(rec)
        return RelCircuit(tuple(out), remap[output], self.attrs, self.domains,
                          self.defaults)


# -- evaluation -----------------------------------------------------------------

def eval_rel(circuit: RelCircuit, tup: dict) -> bool:
    """Membership of a tuple (attr name -> value) in the computed relation."""
    vidx = {}
    for i, a in enumerate(circuit.attrs):
        if a not in tup:
            raise DomainViolation(f"tuple misses attribute {a!r}")
        try:
            vidx[i] = circuit.domains[i].index(tup[a])
        except ValueError:
            raise DomainViolation(
                f"value {tup[a]!r} outside domain of {a!r}") from None
    extra = set(tup) - set(circuit.attrs)
    if extra:
        raise DomainViolation(f"unknown attributes {sorted(extra)}")
    attrsets = circuit.attrsets()

    def extension_ok(attr: int) -> bool:
        if circuit.defaults is None:
            return True
        return vidx[attr] == circuit.defaults[attr]

    vals = []
    for nid, rec in enumerate(circuit.nodes):
        kind = rec[0]
        if kind == 'I':
            vals.append(vidx[rec[1]] == rec[2])
        elif kind == '1':
            vals.append(True)
        elif kind == '0':
            vals.append(False)
        elif kind == 'J':
            vals.append(all(vals[c] for c in rec[1]))
        else:
            gate_attrs = attrsets[nid]
            ok = False
            for c in rec[1]:
                if vals[c] and all(extension_ok(a)
                                   for a in gate_attrs - attrsets[c]):
                    ok = True
                    break
            vals.append(ok)
    if not vals[circuit.output]:
        return False
    outside = set(range(len(circuit.attrs))) - attrsets[circuit.output]
    return all(extension_ok(a) for a in outside)


# -- classification ----------------------------------------------------------------

def _decision_branches(circuit: RelCircuit, nid: int) -> Optional[tuple]:
    """Decompose a decision-shaped union into (attr, [(value_idx, cont)]).

    Each child must be a binary join of an input on one common attribute
    and a continuation not mentioning it, with pairwise distinct values.
    """
    rec = circuit.nodes[nid]
    if rec[0] != 'U' or not rec[1]:
        return None
    attrsets = circuit.attrsets()
    options = []
    for c in rec[1]:
        crec = circuit.nodes[c]
        if crec[0] != 'J' or len(crec[1]) != 2:
            return None
        cands = {}
        for inp in crec[1]:
            other = crec[1][0] if inp == crec[1][1] else crec[1][1]
            irec = circuit.nodes[inp]
            if irec[0] == 'I' and irec[1] not in attrsets[other]:
                cands.setdefault(irec[1], (irec[2], other))
        if not cands:
            return None
        options.append(cands)
    shared = set(options[0])
    for cands in options[1:]:
        shared &= set(cands)
    for attr in sorted(shared):
        values = [cands[attr][0] for cands in options]
        if len(set(values)) == len(values):
            return attr, [(cands[attr][0], cands[attr][1]) for cands in options]
    return None


def decision_attr(circuit: RelCircuit, nid: int) -> Optional[int]:
    """Attribute tested by a decision-shaped union, else None."""
    parsed = _decision_branches(circuit, nid)
    return None if parsed is None else parsed[0]


def classify_rel(circuit: RelCircuit) -> RelClassReport:
    """Syntactic flags; union disjointness is certified only through the
    decision shape."""
    if circuit._report is not None:
        return circuit._report
    attrsets = circuit.attrsets()
    decomposable = True
    smooth_union = True
    decision_only = True
    for nid, rec in enumerate(circuit.nodes):
        if rec[0] == 'J':
            total = sum(len(attrsets[c]) for c in rec[1])
            if total != len(attrsets[nid]):
                decomposable = False
        elif rec[0] == 'U':
            gate = attrsets[nid]
            if any(attrsets[c] != gate for c in rec[1]):
                smooth_union = False
            if decision_attr(circuit, nid) is None:
                decision_only = False

    ordered = None
    if decision_only and decomposable:
        ordered = _ordered_witness(circuit)

    structured = None
    if decomposable:
        structured = _structured_witness(circuit)

    report = RelClassReport(decomposable, smooth_union, decision_only,
                            ordered, structured)
    circuit._report = report
    return report


def _ordered_witness(circuit: RelCircuit) -> Optional[tuple]:
    """The circuit's attribute list, if decisions respect it."""
    attrsets = circuit.attrsets()
    for nid, rec in enumerate(circuit.nodes):
        if rec[0] != 'U':
            continue
        attr = decision_attr(circuit, nid)
        if attr is None:
            return None
        if any(other < attr for other in attrsets[nid] if other != attr):
            return None
    return circuit.attrs


def _structured_witness(circuit: RelCircuit):
    """Best-effort vtree over attribute indexes, via the Boolean machinery."""
    from .circuits import _synthesize_vtree

    attrsets = circuit.attrsets()
    splits = []
    for rec in circuit.nodes:
        if rec[0] != 'J':
            continue
        kids = rec[1]
        for i in range(len(kids) - 1):
            left = attrsets[kids[i]]
            right = frozenset()
            for c in kids[i + 1:]:
                right |= attrsets[c]
            if left and right:
                splits.append((left, right))
    universe = frozenset(range(len(circuit.attrs)))
    if not universe:
        return None
    vtree = _synthesize_vtree(universe, splits)
    if vtree is None:
        return None

    def respects(split):
        left, right = split
        node = vtree
        union = left | right
        while not node.is_leaf():
            if union <= node.left.vars:
                node = node.left
            elif union <= node.right.vars:
                node = node.right
            else:
                break
        if node.is_leaf():
            return False
        return ((left <= node.left.vars and right <= node.right.vars)
                or (left <= node.right.vars and right <= node.left.vars))

    if all(respects(s) for s in splits):
        return vtree
    return None


# -- counting --------------------------------------------------------------------

def _require_countable(circuit: RelCircuit, assume_disjoint: bool):
    report = classify_rel(circuit)
    if report.decision_only and report.decomposable:
        return report
    if assume_disjoint and report.decomposable:
        return report
    raise NotCountable(
        "counting needs decision-shaped unions (or assume_disjoint=True "
        "with certified disjointness) on a decomposable circuit")


def _gate_counts(circuit: RelCircuit) -> list:
    """Per-gate |rel| over the gate's own attributes."""
    if circuit._counts is not None:
        return circuit._counts
    attrsets = circuit.attrsets()
    counts = []
    for nid, rec in enumerate(circuit.nodes):
        kind = rec[0]
        if kind == 'I':
            counts.append(1)
        elif kind == '1':
            counts.append(1)
        elif kind == '0':
            counts.append(0)
        elif kind == 'J':
            prod = 1
            for c in rec[1]:
                prod *= counts[c]
            counts.append(prod)
        else:
            gate = attrsets[nid]
            total = 0
            for c in rec[1]:
                sub = counts[c]
                for a in gate - attrsets[c]:
                    sub *= circuit.ext_domain_size(a)
                total += sub
            counts.append(total)
    circuit._counts = counts
    return counts


def count_rel(circuit: RelCircuit, assume_disjoint: bool = False) -> int:
    """Number of tuples over the attribute universe."""
    _require_countable(circuit, assume_disjoint)
    counts = _gate_counts(circuit)
    total = counts[circuit.output]
    for a in set(range(len(circuit.attrs))) - circuit.attrsets()[circuit.output]:
        total *= circuit.ext_domain_size(a)
    return total


# -- enumeration ---------------------------------------------------------------------

def enumerate_rel(circuit: RelCircuit, assume_disjoint: bool = False) -> Iterator[dict]:
    """Yield each tuple of the relation exactly once, as attr -> value."""
    _require_countable(circuit, assume_disjoint)
    attrsets = circuit.attrsets()

    def expand(partial: dict, missing: list) -> Iterator[dict]:
        if not missing:
            yield dict(partial)
            return
        first, rest = missing[0], missing[1:]
        for value in circuit.ext_domain_values(first):
            partial[first] = value
            yield from expand(partial, rest)
        del partial[first]

    def gen(nid: int) -> Iterator[dict]:
        rec = circuit.nodes[nid]
        kind = rec[0]
        if kind == 'I':
            yield {rec[1]: circuit.domains[rec[1]][rec[2]]}
        elif kind == '1':
            yield {}
        elif kind == '0':
            return
        elif kind == 'J':
            def product(idx: int, acc: dict) -> Iterator[dict]:
                if idx == len(rec[1]):
                    yield acc
                    return
                for part in gen(rec[1][idx]):
                    merged = dict(acc)
                    merged.update(part)
                    yield from product(idx + 1, merged)
            yield from product(0, {})
        else:
            gate = attrsets[nid]
            for c in rec[1]:
                missing = sorted(gate - attrsets[c])
                for part in gen(c):
                    yield from expand(part, missing)

    outside = sorted(set(range(len(circuit.attrs)))
                     - attrsets[circuit.output])
    for part in gen(circuit.output):
        for full in expand(part, outside):
            yield {circuit.attrs[i]: v for i, v in full.items()}


# -- lexicographic direct access -----------------------------------------------------

class _AccessIndex:
    """Per-decision-gate branch tables for rank arithmetic.

    For each decision gate: branches sorted by value index, each with its
    continuation, the extension attributes it leaves free, and its local
    tuple count; zero-count branches are dropped.  Prefix sums support a
    binary search per accessed attribute.
    """

    def __init__(self, circuit: RelCircuit):
        counts = _gate_counts(circuit)
        attrsets = circuit.attrsets()
        self.branches = {}
        for nid, rec in enumerate(circuit.nodes):
            if rec[0] != 'U':
                continue
            parsed = _decision_branches(circuit, nid)
            if parsed is None:
                raise NotOrdered("direct access needs decision-shaped unions")
            attr, pairs = parsed
            gate_attrs = attrsets[nid]
            rows = []
            for vi, cont in pairs:
                ext = sorted(gate_attrs - {attr} - attrsets[cont])
                local = counts[cont]
                for a in ext:
                    local *= circuit.ext_domain_size(a)
                if local:
                    rows.append((vi, cont, tuple(ext), local))
            rows.sort()
            prefix = [0]
            for row in rows:
                prefix.append(prefix[-1] + row[3])
            self.branches[nid] = (rows, prefix)


def _prepare_access(circuit: RelCircuit) -> _AccessIndex:
    if circuit._access is None:
        report = classify_rel(circuit)
        if report.ordered_witness is None:
            raise NotOrdered("direct access needs an ordered decision circuit")
        circuit._access = _AccessIndex(circuit)
    return circuit._access


def direct_access(circuit: RelCircuit, index: int) -> dict:
    """The index-th tuple (1-based) in lexicographic order.

    Order: attributes in circuit order, values in domain order.  The walk
    keeps a frontier of independent pending gates and free attributes; at
    each step the globally smallest pending attribute is resolved, dividing
    the rank by the weight of everything else.
    """
    if index < 1:
        raise OutOfRange(f"answer indexes are 1-based, got {index}")
    access = _prepare_access(circuit)
    counts = _gate_counts(circuit)
    attrsets = circuit.attrsets()

    frontier = []          # heap of (attr, kind_tag, payload)

    def push_gate(nid: int):
        rec = circuit.nodes[nid]
        if rec[0] == 'J':
            for c in rec[1]:
                push_gate(c)
        elif rec[0] == '1':
            pass
        elif rec[0] == 'I':
            heapq.heappush(frontier, (rec[1], 1, nid))
        elif rec[0] == 'U':
            # ordered circuit: the decision attribute is the smallest one
            heapq.heappush(frontier, (min(attrsets[nid]), 2, nid))
        else:
            raise NotOrdered("empty relation inside an access path")

    def push_free(attrs_: Iterable[int]):
        for a in attrs_:
            heapq.heappush(frontier, (a, 0, None))

    outside = set(range(len(circuit.attrs))) - attrsets[circuit.output]
    total = counts[circuit.output]
    for a in outside:
        total *= circuit.ext_domain_size(a)
    push_free(outside)
    if counts[circuit.output]:
        push_gate(circuit.output)
    if index > total:
        raise OutOfRange(f"relation has {total} tuples, asked for {index}")

    k = index - 1
    out = {}
    while frontier:
        attr, tag, payload = heapq.heappop(frontier)
        if tag == 0:
            size = circuit.ext_domain_size(attr)
            rest = total // size
            out[attr] = circuit.ext_domain_values(attr)[k // rest]
            k %= rest
            total = rest
        elif tag == 1:
            rec = circuit.nodes[payload]
            out[attr] = circuit.domains[attr][rec[2]]
        else:
            rows, prefix = access.branches[payload]
            local = prefix[-1]
            rest = total // local
            rank, k_inner = divmod(k, rest)
            j = bisect_right(prefix, rank) - 1
            vi, cont, ext, local_j = rows[j]
            out[attr] = circuit.domains[attr][vi]
            # remaining rank interleaves the branch content with the rest
            k = (rank - prefix[j]) * rest + k_inner
            total = local_j * rest
            push_gate(cont)
            push_free(ext)
    return {circuit.attrs[i]: v for i, v in out.items()}


# -- projection -------------------------------------------------------------------------

def project_away(circuit: RelCircuit, attrs: Iterable[str]) -> RelCircuit:
    """Existentially project the given attributes out of the relation.

    Inputs on projected attributes become the unit relation, which is the
    correct existential on decomposable circuits; decision shape is
    generally lost and flags are recomputed on the result.
    """
    report = classify_rel(circuit)
    if not report.decomposable:
        raise NotDecomposable("projection requires a decomposable circuit")
    drop = set(attrs)
    unknown = drop - set(circuit.attrs)
    if unknown:
        raise DomainViolation(f"unknown attributes {sorted(unknown)}")
    drop_idx = {circuit.attr_index[a] for a in drop}
    keep = [i for i in range(len(circuit.attrs)) if i not in drop_idx]
    b = RelBuilder([circuit.attrs[i] for i in keep],
                   {circuit.attrs[i]: list(circuit.domains[i]) for i in keep},
                   None if circuit.defaults is None else
                   {circuit.attrs[i]: circuit.domains[i][circuit.defaults[i]]
                    for i in keep})
    out = []
    for rec in circuit.nodes:
        kind = rec[0]
        if kind == 'I':
            if rec[1] in drop_idx:
                out.append(b.unit())
            else:
                out.append(b.input(circuit.attrs[rec[1]],
                                   circuit.domains[rec[1]][rec[2]]))
        elif kind == '1':
            out.append(b.unit())
        elif kind == '0':
            out.append(b.empty())
        elif kind == 'J':
            out.append(b.join(tuple(out[c] for c in rec[1])))
        else:
            out.append(b.union(tuple(out[c] for c in rec[1])))
    return b.finish(out[circuit.output])


# -- Boolean bridge ------------------------------------------------------------------------

def to_boolean(circuit: RelCircuit) -> BoolCircuit:
    """Rename x/1 to x and x/0 to not-x, joins to AND, unions to OR.

    Every attribute domain must be exactly (0, 1), as integers or as the
    text tokens a file round trip produces; zero-suppressed circuits have
    no plain Boolean counterpart and are rejected.
    """
    if circuit.defaults is not None:
        raise NonBooleanDomain("zero-suppressed circuits do not map to "
                               "plain Boolean circuits")
    for a, dom in zip(circuit.attrs, circuit.domains):
        if dom not in ((0, 1), ('0', '1')):
            raise NonBooleanDomain(f"attribute {a!r} has domain {dom}, not (0, 1)")
    b = CircuitBuilder(len(circuit.attrs))
    out = []
    for rec in circuit.nodes:
        kind = rec[0]
        if kind == 'I':
            out.append(b.literal(rec[1], rec[2] == 1))
        elif kind == '1':
            out.append(b.true())
        elif kind == '0':
            out.append(b.false())
        elif kind == 'J':
            out.append(b.conj(tuple(out[c] for c in rec[1])))
        else:
            out.append(b.disj(tuple(out[c] for c in rec[1])))
    return b.finish(out[circuit.output])


# -- text serialization -----------------------------------------------------------

def write_rel(circuit: RelCircuit) -> str:
    """Serialize in a line format mirroring the Boolean circuit files.

    Header `rel A V E`, one `attr <name> <d> <v1> ... <vd>` line per
    attribute (domain values as text tokens), a `mode` line (`full`, or
    `zero` with the per-attribute default indexes), then one node per line:
    `I a k` (input, attribute and value index), `U c i1 ... ic`,
    `J c i1 ... ic`; the unit relation is `J 0`, the empty one `U 0`, ids
    are 0-based in file order and the last node is the output.
    """
    lines = []
    for a, dom in zip(circuit.attrs, circuit.domains):
        tokens = [str(v) for v in dom]
        for tok in [a] + tokens:
            if not tok or any(ch.isspace() for ch in tok):
                raise ValueError(f"token {tok!r} cannot be serialized")
        lines.append("attr " + a + " " + str(len(tokens)) + " " + " ".join(tokens))
    if circuit.defaults is None:
        lines.append("mode full")
    else:
        lines.append("mode zero " + " ".join(str(k) for k in circuit.defaults))
    edges = 0
    for rec in circuit.nodes:
        kind = rec[0]
        if kind == 'I':
            lines.append(f"I {rec[1]} {rec[2]}")
        elif kind == '1':
            lines.append("J 0")
        elif kind == '0':
            lines.append("U 0")
        else:
            kids = rec[1]
            edges += len(kids)
            lines.append(kind + " " + " ".join([str(len(kids))] + [str(c) for c in kids]))
    header = f"rel {len(circuit.attrs)} {len(circuit.nodes)} {edges}"
    return "\n".join([header] + lines) + "\n"


def read_rel(text: str) -> RelCircuit:
    """Parse the write_rel format; domain values come back as text."""
    from .errors import InputFormatError

    lines = [ln for ln in (raw.strip() for raw in text.splitlines())
             if ln and not ln.startswith('#')]
    if not lines or not lines[0].startswith('rel'):
        raise InputFormatError("missing rel header")
    try:
        num_attrs, node_count, _edges = (int(t) for t in lines[0].split()[1:])
    except ValueError:
        raise InputFormatError(f"bad header {lines[0]!r}") from None
    if len(lines) < 1 + num_attrs + 1:
        raise InputFormatError("truncated file")
    attrs = []
    domains = {}
    for ln in lines[1:1 + num_attrs]:
        parts = ln.split()
        if len(parts) < 3 or parts[0] != 'attr':
            raise InputFormatError(f"bad attribute line {ln!r}")
        name = parts[1]
        try:
            count = int(parts[2])
        except ValueError:
            raise InputFormatError(f"bad attribute line {ln!r}") from None
        values = parts[3:]
        if len(values) != count:
            raise InputFormatError(f"attribute {name!r} declares {count} values, "
                                   f"lists {len(values)}")
        attrs.append(name)
        domains[name] = values
    mode_parts = lines[1 + num_attrs].split()
    defaults = None
    if mode_parts[0] != 'mode':
        raise InputFormatError("expected a mode line after the attributes")
    if mode_parts[1] == 'zero':
        try:
            idxs = [int(t) for t in mode_parts[2:]]
        except ValueError:
            raise InputFormatError("bad default indexes") from None
        if len(idxs) != num_attrs:
            raise InputFormatError("one default index per attribute required")
        defaults = {a: domains[a][k] for a, k in zip(attrs, idxs)}
    elif mode_parts[1] != 'full':
        raise InputFormatError(f"unknown mode {mode_parts[1]!r}")
    b = RelBuilder(attrs, domains, defaults)
    node_lines = lines[2 + num_attrs:]
    if len(node_lines) != node_count:
        raise InputFormatError(f"header declares {node_count} nodes, "
                               f"file has {len(node_lines)}")
    ids = []
    for lineno, ln in enumerate(node_lines, start=1):
        parts = ln.split()
        tag = parts[0]
        try:
            args = [int(t) for t in parts[1:]]
        except ValueError:
            raise InputFormatError(f"node {lineno}: non-numeric field") from None
        if tag == 'I':
            if len(args) != 2 or not 0 <= args[0] < num_attrs:
                raise InputFormatError(f"node {lineno}: bad input line")
            a = attrs[args[0]]
            if not 0 <= args[1] < len(domains[a]):
                raise InputFormatError(f"node {lineno}: value index out of range")
            ids.append(b.input(a, domains[a][args[1]]))
        elif tag in ('U', 'J'):
            if not args or args[0] != len(args) - 1:
                raise InputFormatError(f"node {lineno}: bad arity")
            if args[0] == 0:
                ids.append(b.empty() if tag == 'U' else b.unit())
            else:
                try:
                    kids = tuple(ids[i] for i in args[1:])
                except IndexError:
                    raise InputFormatError(f"node {lineno}: forward reference") from None
                ids.append(b.union(kids) if tag == 'U' else b.join(kids))
        else:
            raise InputFormatError(f"node {lineno}: unknown tag {tag!r}")
    if not ids:
        raise InputFormatError("no nodes in file")
    return b.finish(ids[-1])


def from_boolean(circuit: BoolCircuit, attr_names: Optional[tuple] = None) -> RelCircuit:
    """Inverse renaming; the circuit must be in NNF (normalize first)."""
    svars = circuit.sorted_vars()
    if attr_names is None:
        attr_names = tuple(f"x{v}" for v in svars)
    name_of = dict(zip(svars, attr_names))
    b = RelBuilder([name_of[v] for v in svars], {a: [0, 1] for a in attr_names})
    out = []
    for rec in circuit.nodes:
        kind = rec[0]
        if kind == 'T':
            out.append(b.unit())
        elif kind == 'F':
            out.append(b.empty())
        elif kind == 'L':
            out.append(b.input(name_of[rec[1]], 1 if rec[2] else 0))
        elif kind == 'N':
            child = circuit.nodes[rec[1]]
            if child[0] != 'L':
                raise ValueError("normalize to NNF before converting")
            out.append(b.input(name_of[child[1]], 0 if child[2] else 1))
        elif kind == 'A':
            out.append(b.join(tuple(out[c] for c in rec[1])))
        else:
            out.append(b.union(tuple(out[c] for c in rec[1])))
    return b.finish(out[circuit.output])
