"""Immutable Boolean circuits and their class certificates.

A circuit is a rooted DAG over variables 0..n-1 with input nodes (constants
and literals) and AND/OR/NOT gates.  Construction goes through
CircuitBuilder, which hash-conses nodes so that structurally identical
subcircuits share one id; finish() prunes unreachable nodes and freezes the
result.  All transformations (NNF normalization, conditioning, smoothing)
return new circuits.

Node records, children always before parents in the node list:

    ('T',)            constant true
    ('F',)            constant false
    ('L', var, pol)   literal, pol True for the positive literal
    ('A', children)   AND gate, children a tuple of node ids
    ('O', children)   OR gate
    ('N', child)      NOT gate (eliminated by to_nnf)

Size is the number of edges of the DAG.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import NotDecomposable

TRUE = ('T',)
FALSE = ('F',)

Valuation = dict  # var id -> 0/1, total over a circuit's variable universe
PartialValuation = dict


class VTree:
    """Full binary tree whose leaves are in bijection with a variable set."""

    __slots__ = ('var', 'left', 'right', 'vars')

    def __init__(self, var=None, left: 'VTree | None' = None,
                 right: 'VTree | None' = None):
        if (left is None) != (right is None):
            raise ValueError("internal vtree nodes need two children")
        self.var = var
        self.left = left
        self.right = right
        if left is None:
            self.vars = frozenset((var,))
        else:
            if left.vars & right.vars:
                raise ValueError("vtree leaves must not repeat variables")
            self.vars = left.vars | right.vars

    @staticmethod
    def leaf(var: int) -> 'VTree':
        return VTree(var=var)

    @staticmethod
    def internal(left: 'VTree', right: 'VTree') -> 'VTree':
        return VTree(left=left, right=right)

    @staticmethod
    def right_linear(order: Iterable[int]) -> 'VTree':
        """Caterpillar vtree: x1, then x2, ... along the given order."""
        order = list(order)
        if not order:
            raise ValueError("empty variable order")
        node = VTree.leaf(order[-1])
        for v in reversed(order[:-1]):
            node = VTree.internal(VTree.leaf(v), node)
        return node

    def is_leaf(self) -> bool:
        return self.left is None

    def __repr__(self):
        if self.is_leaf():
            return f"v{self.var}"
        return f"({self.left!r} {self.right!r})"


@dataclass
class ClassReport:
    """Syntactic class certificate for one circuit.

    syntactic_deterministic is exactly all_or_decision: decision gates are
    the checkable witness for determinism.  A missing structured_witness
    means no vtree was found, not that none exists.
    """
    is_nnf: bool
    is_decomposable: bool
    all_or_decision: bool
    is_smooth: bool
    structured_witness: Optional[VTree] = None
    obdd_order: Optional[tuple] = None

    @property
    def syntactic_deterministic(self) -> bool:
        return self.all_or_decision


@dataclass
class DeterminismVerdict:
    status: str                      # 'deterministic' | 'notDeterministic' | 'unknown'
    witness: Optional[Valuation] = None


@dataclass(frozen=True)
class DNFFormula:
    """Disjunction of terms; each term a frozenset of (var, polarity)."""
    num_vars: int
    terms: tuple

    def __post_init__(self):
        for t in self.terms:
            seen = {}
            for var, pol in t:
                if not 0 <= var < self.num_vars:
                    raise ValueError(f"literal on unknown variable {var}")
                if seen.setdefault(var, pol) != pol:
                    raise ValueError(f"term uses x{var} in both polarities")

    @staticmethod
    def from_literal_lists(num_vars: int, terms: Iterable[Iterable[tuple]]) -> 'DNFFormula':
        return DNFFormula(num_vars, tuple(frozenset(t) for t in terms))


class BoolCircuit:
    """Frozen circuit: node array, output id, variable universe.

    Instances are immutable; helper caches (variable sets, class report,
    model counts) are computed lazily and idempotently, so concurrent
    readers are safe.
    """

    def __init__(self, nodes: tuple, output: int, universe: frozenset,
                 var_names: Optional[tuple] = None):
        self.nodes = nodes
        self.output = output
        self.universe = universe
        self.var_names = var_names
        self._size = None
        self._varsets = None
        self._core_flags = None
        self._report = None
        self._counts = None

    # -- basic queries ------------------------------------------------------

    @property
    def size(self) -> int:
        """Edge count of the DAG."""
        if self._size is None:
            total = 0
            for rec in self.nodes:
                if rec[0] in ('A', 'O'):
                    total += len(rec[1])
                elif rec[0] == 'N':
                    total += 1
            self._size = total
        return self._size

    def __len__(self) -> int:
        return len(self.nodes)

    def sorted_vars(self) -> list:
        return sorted(self.universe)

    def varsets(self) -> tuple:
        """Per-node variable sets: vars with a directed path to the node."""
        if self._varsets is None:
            sets = []
            for rec in self.nodes:
                kind = rec[0]
                if kind == 'L':
                    sets.append(frozenset((rec[1],)))
                elif kind in ('T', 'F'):
                    sets.append(frozenset())
                elif kind == 'N':
                    sets.append(sets[rec[1]])
                elif len(rec[1]) == 1:
                    sets.append(sets[rec[1][0]])
                else:
                    acc = set()
                    for c in rec[1]:
                        acc.update(sets[c])
                    sets.append(frozenset(acc))
            self._varsets = tuple(sets)
        return self._varsets

    def evaluate(self, valuation: Valuation) -> int:
        """Evaluate under a valuation covering var(output); extra vars are
        ignored (they do not affect the computed function)."""
        vals = []
        for rec in self.nodes:
            kind = rec[0]
            if kind == 'T':
                vals.append(1)
            elif kind == 'F':
                vals.append(0)
            elif kind == 'L':
                v = valuation.get(rec[1])
                if v is None:
                    raise ValueError(f"valuation misses variable {rec[1]}")
                vals.append(int(v) if rec[2] else 1 - int(v))
            elif kind == 'N':
                vals.append(1 - vals[rec[1]])
            elif kind == 'A':
                vals.append(int(all(vals[c] for c in rec[1])))
            else:
                vals.append(int(any(vals[c] for c in rec[1])))
        return vals[self.output]

    def decision_var(self, gate: int) -> Optional[int]:
        """Variable tested by a decision-shaped OR gate, else None.

        Shape: exactly two AND children, one holding a negative and the
        other a positive literal of the same variable as a direct input.
        """
        rec = self.nodes[gate]
        if rec[0] != 'O' or len(rec[1]) != 2:
            return None
        sides = []
        for c in rec[1]:
            crec = self.nodes[c]
            if crec[0] != 'A':
                return None
            lits = {}
            for g in crec[1]:
                grec = self.nodes[g]
                if grec[0] == 'L':
                    lits.setdefault(grec[1], set()).add(grec[2])
            sides.append(lits)
        for var in sides[0]:
            if var in sides[1]:
                pols0, pols1 = sides[0][var], sides[1][var]
                if (False in pols0 and True in pols1 and True not in pols0
                        and False not in pols1):
                    return var
                if (True in pols0 and False in pols1 and False not in pols0
                        and True not in pols1):
                    return var
        return None

    def structurally_equal(self, other: 'BoolCircuit') -> bool:
        return (self.nodes == other.nodes and self.output == other.output
                and self.universe == other.universe)


class CircuitBuilder:
    """Mutable constructor with hash-consing; finish() freezes.

    Children must exist before their parents, so the node list is always
    topologically sorted.
    """

    def __init__(self, universe: Iterable[int] | int):
        if isinstance(universe, int):
            universe = range(universe)
        self.universe = frozenset(universe)
        self.nodes = []
        self._intern = {}

    def _add(self, rec) -> int:
        nid = self._intern.get(rec)
        if nid is None:
            nid = len(self.nodes)
            self.nodes.append(rec)
            self._intern[rec] = nid
        return nid

    def true(self) -> int:
        return self._add(TRUE)

    def false(self) -> int:
        return self._add(FALSE)

    def literal(self, var: int, positive: bool = True) -> int:
        if var not in self.universe:
            raise ValueError(f"variable {var} outside the declared universe")
        return self._add(('L', var, bool(positive)))

    def conj(self, children: Iterable[int]) -> int:
        return self._add(('A', tuple(children)))

    def disj(self, children: Iterable[int]) -> int:
        return self._add(('O', tuple(children)))

    def neg(self, child: int) -> int:
        return self._add(('N', child))

    def decision(self, var: int, if_false: int, if_true: int) -> int:
        """(not x and if_false) or (x and if_true)."""
        lo = self.conj((self.literal(var, False), if_false))
        hi = self.conj((self.literal(var, True), if_true))
        return self.disj((lo, hi))

    def kind(self, nid: int) -> str:
        return self.nodes[nid][0]

    def children(self, nid: int):
        return self.nodes[nid][1]

    def finish(self, output: int, var_names: Optional[tuple] = None) -> BoolCircuit:
        """Freeze, keeping only nodes reachable from the output."""
        keep = [False] * len(self.nodes)
        stack = [output]
        keep[output] = True
        while stack:
            rec = self.nodes[stack.pop()]
            if rec[0] in ('A', 'O'):
                for c in rec[1]:
                    if not keep[c]:
                        keep[c] = True
                        stack.append(c)
            elif rec[0] == 'N':
                if not keep[rec[1]]:
                    keep[rec[1]] = True
                    stack.append(rec[1])
        remap = {}
        out_nodes = []
        for nid, rec in enumerate(self.nodes):
            if not keep[nid]:
                continue
            if rec[0] in ('A', 'O'):
                rec = (rec[0], tuple(remap[c] for c in rec[1]))
            elif rec[0] == 'N':
                rec = ('N', remap[rec[1]])
            remap[nid] = len(out_nodes)
            out_nodes.append(rec)
        return BoolCircuit(tuple(out_nodes), remap[output], self.universe,
                           var_names)


def varset(circuit: BoolCircuit, gate: int) -> frozenset:
    """Variables with a directed path to the gate."""
    if not 0 <= gate < len(circuit.nodes):
        raise ValueError(f"invalid node id {gate}")
    return circuit.varsets()[gate]


# -- NNF normalization -------------------------------------------------------

def to_nnf(circuit: BoolCircuit) -> BoolCircuit:
    """Push negations onto inputs with De Morgan's laws.

    Builds both polarities of every node bottom-up; the result computes the
    same function and at most doubles the edge count.
    """
    b = CircuitBuilder(circuit.universe)
    pos = []
    neg = []
    for rec in circuit.nodes:
        kind = rec[0]
        if kind == 'T':
            pos.append(b.true())
            neg.append(b.false())
        elif kind == 'F':
            pos.append(b.false())
            neg.append(b.true())
        elif kind == 'L':
            pos.append(b.literal(rec[1], rec[2]))
            neg.append(b.literal(rec[1], not rec[2]))
        elif kind == 'N':
            pos.append(neg[rec[1]])
            neg.append(pos[rec[1]])
        elif kind == 'A':
            pos.append(b.conj(tuple(pos[c] for c in rec[1])))
            neg.append(b.disj(tuple(neg[c] for c in rec[1])))
        else:
            pos.append(b.disj(tuple(pos[c] for c in rec[1])))
            neg.append(b.conj(tuple(neg[c] for c in rec[1])))
    return b.finish(pos[circuit.output], circuit.var_names)


# -- conditioning -------------------------------------------------------------

def condition(circuit: BoolCircuit, partial: PartialValuation) -> BoolCircuit:
    """Substitute constants for the assigned variables (partial evaluation).

    One pass; untouched gates keep their shape, so decomposability and
    decision gates away from the assigned variables survive.  The result's
    universe excludes the assigned variables.
    """
    extra = set(partial) - circuit.universe
    if extra:
        raise ValueError(f"assigned variables outside universe: {sorted(extra)}")
    b = CircuitBuilder(circuit.universe - set(partial))
    out = []
    for rec in circuit.nodes:
        kind = rec[0]
        if kind == 'T':
            out.append(b.true())
        elif kind == 'F':
            out.append(b.false())
        elif kind == 'L':
            var = rec[1]
            if var in partial:
                bit = int(partial[var])
                out.append(b.true() if bit == int(rec[2]) else b.false())
            else:
                out.append(b.literal(var, rec[2]))
        elif kind == 'N':
            out.append(b.neg(out[rec[1]]))
        elif kind == 'A':
            out.append(b.conj(tuple(out[c] for c in rec[1])))
        else:
            out.append(b.disj(tuple(out[c] for c in rec[1])))
    return b.finish(out[circuit.output], circuit.var_names)


# -- smoothing ----------------------------------------------------------------

def smooth(circuit: BoolCircuit) -> BoolCircuit:
    """Give every OR gate children with identical variable sets.

    Missing variables are conjoined as shared tautology gadgets, built in
    decision shape (x and 1) or (not x and 1) so that decision-only
    circuits stay decision-only.  Size grows by at most a factor linear in
    the number of variables.
    """
    is_nnf, is_decomposable, _, _ = core_flags(circuit)
    if not is_nnf or not is_decomposable:
        raise NotDecomposable("smoothing requires a decomposable NNF circuit")
    vsets = circuit.varsets()
    b = CircuitBuilder(circuit.universe)
    gadgets = {}

    def gadget(var: int) -> int:
        g = gadgets.get(var)
        if g is None:
            g = b.disj((b.conj((b.literal(var, True), b.true())),
                        b.conj((b.literal(var, False), b.true()))))
            gadgets[var] = g
        return g

    out = []
    for nid, rec in enumerate(circuit.nodes):
        kind = rec[0]
        if kind == 'T':
            out.append(b.true())
        elif kind == 'F':
            out.append(b.false())
        elif kind == 'L':
            out.append(b.literal(rec[1], rec[2]))
        elif kind == 'A':
            out.append(b.conj(tuple(out[c] for c in rec[1])))
        else:
            gate_vars = vsets[nid]
            new_children = []
            for c in rec[1]:
                missing = gate_vars - vsets[c]
                mapped = out[c]
                if missing:
                    pads = tuple(gadget(v) for v in sorted(missing))
                    if circuit.nodes[c][0] == 'A':
                        mapped = b.conj(tuple(b.children(mapped)) + pads)
                    else:
                        mapped = b.conj((mapped,) + pads)
                new_children.append(mapped)
            out.append(b.disj(tuple(new_children)))
    return b.finish(out[circuit.output], circuit.var_names)


# -- classification -----------------------------------------------------------

def _binary_splits(circuit: BoolCircuit):
    """And-gate variable splits, k-ary gates folded left to right.

    Yields (left_vars, right_vars) pairs with both sides nonempty.
    """
    vsets = circuit.varsets()
    for rec in circuit.nodes:
        if rec[0] != 'A':
            continue
        kids = rec[1]
        suffixes = [frozenset()] * len(kids)
        acc = set()
        for i in range(len(kids) - 1, 0, -1):
            acc.update(vsets[kids[i]])
            suffixes[i - 1] = frozenset(acc)
        for i in range(len(kids) - 1):
            left = vsets[kids[i]]
            if left and suffixes[i]:
                yield (left, suffixes[i])


def respects_vtree(circuit: BoolCircuit, vtree: VTree) -> bool:
    """Check that every AND split fits under some vtree node."""
    if not circuit.universe <= vtree.vars:
        return False
    for left, right in _binary_splits(circuit):
        node = vtree
        union = left | right
        # descend to the lowest vtree node covering the split
        while not node.is_leaf():
            if union <= node.left.vars:
                node = node.left
            elif union <= node.right.vars:
                node = node.right
            else:
                break
        if node.is_leaf():
            return False
        ok = ((left <= node.left.vars and right <= node.right.vars)
              or (left <= node.right.vars and right <= node.left.vars))
        if not ok:
            return False
    return True


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


def _synthesize_vtree(variables: frozenset, splits: list) -> Optional[VTree]:
    """Greedy vtree synthesis from AND splits; None when the greedy
    bipartitioning gets stuck (which does not prove unstructuredness)."""
    variables = set(variables)
    if not variables:
        return None
    if len(variables) == 1:
        return VTree.leaf(next(iter(variables)))
    splits = [s for s in splits if (s[0] | s[1]) <= variables]
    uf = _UnionFind(variables)
    for left, right in splits:
        for side in (left, right):
            first = None
            for v in side:
                if first is None:
                    first = v
                else:
                    uf.union(first, v)
    groups = {}
    for v in variables:
        groups.setdefault(uf.find(v), set()).add(v)
    groups = list(groups.values())
    if len(groups) == 1:
        return None
    full = [s for s in splits if (s[0] | s[1]) == variables]
    if full:
        part_a, part_b = set(full[0][0]), set(full[0][1])
        for left, right in full[1:]:
            if {frozenset(left), frozenset(right)} != {frozenset(part_a), frozenset(part_b)}:
                return None
        for g in groups:
            if g & part_a and g & part_b:
                return None
    else:
        part_a = groups[0]
        part_b = set().union(*groups[1:])
    left_tree = _synthesize_vtree(frozenset(part_a),
                                  [s for s in splits if (s[0] | s[1]) <= part_a])
    right_tree = _synthesize_vtree(frozenset(part_b),
                                   [s for s in splits if (s[0] | s[1]) <= part_b])
    if left_tree is None or right_tree is None:
        return None
    return VTree.internal(left_tree, right_tree)


def _detect_obdd_order(circuit: BoolCircuit) -> Optional[tuple]:
    """Global decision order, if the circuit is a pure decision diagram.

    Requires every OR to be a decision gate, every AND to be one of the two
    gadgets of a decision gate (decision literal plus a continuation that is
    itself a decision gate or a constant), and the decision variables to
    admit one topological order along all paths.
    """
    nodes = circuit.nodes
    if nodes[circuit.output][0] not in ('O', 'T', 'F'):
        return None
    dec_var = {}
    gadget_ands = set()
    for nid, rec in enumerate(nodes):
        if rec[0] == 'N':
            return None
        if rec[0] != 'O':
            continue
        var = circuit.decision_var(nid)
        if var is None:
            return None
        dec_var[nid] = var
        for c in rec[1]:
            gadget_ands.add(c)
            crec = nodes[c]
            if len(crec[1]) != 2:
                return None
            lit = [g for g in crec[1]
                   if nodes[g][0] == 'L' and nodes[g][1] == var]
            cont = [g for g in crec[1] if g not in lit]
            if len(lit) != 1 or nodes[cont[0]][0] not in ('O', 'T', 'F'):
                return None
    for nid, rec in enumerate(nodes):
        if rec[0] == 'A' and nid not in gadget_ands:
            return None
    # below[nid]: decision variables tested at or below the node
    below = []
    for nid, rec in enumerate(nodes):
        if rec[0] in ('T', 'F', 'L'):
            below.append(frozenset())
        else:
            acc = frozenset()
            for c in rec[1]:
                acc |= below[c]
            if nid in dec_var:
                acc |= {dec_var[nid]}
            below.append(acc)
    succ = {}
    for nid, var in dec_var.items():
        strictly_below = frozenset()
        for c in nodes[nid][1]:
            strictly_below |= below[c]
        if var in strictly_below:
            return None
        succ.setdefault(var, set()).update(strictly_below)
    # Kahn toposort, smallest variable first for determinism
    vars_all = set(succ)
    for later in succ.values():
        vars_all |= later
    indeg = {v: 0 for v in vars_all}
    for later in succ.values():
        for w in later:
            indeg[w] += 1
    ready = [v for v, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        v = heapq.heappop(ready)
        order.append(v)
        for w in succ.get(v, ()):
            indeg[w] -= 1
            if indeg[w] == 0:
                heapq.heappush(ready, w)
    if len(order) != len(vars_all):
        return None
    order += sorted(circuit.universe - set(order))
    return tuple(order)


def core_flags(circuit: BoolCircuit) -> tuple:
    """(is_nnf, is_decomposable, all_or_decision, is_smooth).

    The cheap linear-time part of classification, enough for the counting
    and sampling preconditions; witness search lives in classify.
    """
    if circuit._core_flags is not None:
        return circuit._core_flags
    nodes = circuit.nodes
    vsets = circuit.varsets()

    is_nnf = True
    for rec in nodes:
        if rec[0] == 'N' and nodes[rec[1]][0] not in ('L', 'T', 'F'):
            is_nnf = False
            break

    is_decomposable = True
    for nid, rec in enumerate(nodes):
        if rec[0] != 'A':
            continue
        # decomposable exactly when child set sizes add up to the union
        total = sum(len(vsets[c]) for c in rec[1])
        if total != len(vsets[nid]):
            is_decomposable = False
            break

    all_or_decision = all(circuit.decision_var(nid) is not None
                          for nid, rec in enumerate(nodes) if rec[0] == 'O')

    is_smooth = True
    for nid, rec in enumerate(nodes):
        if rec[0] != 'O':
            continue
        gate_vars = vsets[nid]
        if any(vsets[c] != gate_vars for c in rec[1]):
            is_smooth = False
            break

    circuit._core_flags = (is_nnf, is_decomposable, all_or_decision, is_smooth)
    return circuit._core_flags


def classify(circuit: BoolCircuit, hint: Optional[VTree] = None) -> ClassReport:
    """Certify syntactic membership in the circuit class lattice.

    Checks NNF shape, decomposability of every AND gate, the decision
    shape of every OR gate, and smoothness.  A vtree witness is verified
    when hinted, otherwise synthesized best-effort; absence of a witness is
    reported, never treated as a refutation.
    """
    if hint is None and circuit._report is not None:
        return circuit._report
    is_nnf, is_decomposable, all_or_decision, is_smooth = core_flags(circuit)

    obdd_order = None
    witness = None
    if is_nnf and is_decomposable:
        if hint is not None and respects_vtree(circuit, hint):
            witness = hint
        if all_or_decision and circuit.universe:
            obdd_order = _detect_obdd_order(circuit)
            if obdd_order is not None and witness is None:
                cand = VTree.right_linear(obdd_order)
                if respects_vtree(circuit, cand):
                    witness = cand
                else:
                    obdd_order = None
        if witness is None and hint is None and circuit.universe:
            cand = _synthesize_vtree(circuit.universe,
                                     list(_binary_splits(circuit)))
            if cand is not None and respects_vtree(circuit, cand):
                witness = cand

    report = ClassReport(is_nnf=is_nnf, is_decomposable=is_decomposable,
                         all_or_decision=all_or_decision, is_smooth=is_smooth,
                         structured_witness=witness, obdd_order=obdd_order)
    if hint is None:
        circuit._report = report
    return report


# -- semantic determinism check ----------------------------------------------

def check_determinism_semantic(circuit: BoolCircuit, max_vars: int = 20) -> DeterminismVerdict:
    """Brute-force determinism check; 'unknown' above the variable cap.

    Valuations are scanned in lexicographic order (smallest variable is the
    most significant bit); the first valuation satisfying two children of
    one OR gate is returned as the witness.
    """
    svars = circuit.sorted_vars()
    n = len(svars)
    if n > max_vars:
        return DeterminismVerdict('unknown')
    or_gates = [(nid, rec[1]) for nid, rec in enumerate(circuit.nodes)
                if rec[0] == 'O' and len(rec[1]) > 1]
    if not or_gates:
        return DeterminismVerdict('deterministic')
    nodes = circuit.nodes
    for m in range(1 << n):
        val = {svars[j]: (m >> (n - 1 - j)) & 1 for j in range(n)}
        vals = []
        for rec in nodes:
            kind = rec[0]
            if kind == 'T':
                vals.append(1)
            elif kind == 'F':
                vals.append(0)
            elif kind == 'L':
                vals.append(val[rec[1]] if rec[2] else 1 - val[rec[1]])
            elif kind == 'N':
                vals.append(1 - vals[rec[1]])
            elif kind == 'A':
                vals.append(int(all(vals[c] for c in rec[1])))
            else:
                vals.append(int(any(vals[c] for c in rec[1])))
        for nid, kids in or_gates:
            if sum(vals[c] for c in kids) >= 2:
                return DeterminismVerdict('notDeterministic', val)
    return DeterminismVerdict('deterministic')
