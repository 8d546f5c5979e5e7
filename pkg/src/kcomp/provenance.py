"""Boolean provenance of conjunctive queries and the aggregation tasks on
top of it: query probability, uniform reliability, and Shapley values.

Provenance treats the query as Boolean (free variables are existentially
closed) and maps each fact of the database to one Boolean variable; a
valuation selects a subinstance and the provenance is true exactly on the
subinstances where the query holds.

Three representations are built here:

  * a decomposable circuit, extracted from a compiled lifted query where
    every fact carries a fresh identifier (works for any self-join-free
    query, generally not deterministic);
  * a monotone DNF with one term per homomorphism image (any query, feeds
    the approximation path);
  * a read-once tree for hierarchical self-join-free queries, turned into
    an ordered decision diagram for the exact counting paths.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import Optional

from .circuits import (BoolCircuit, CircuitBuilder, DNFFormula, condition,
                       smooth)
from .cq import (ConjunctiveQuery, Database, compile_cq, domain_sort_key,
                 query_holds)
from .errors import (InputFormatError, NotHierarchical, SelfJoinPresent,
                     TargetExogenous, TooLargeForBruteForce)
from .queries import ApproxParams, WeightMap, approx_count_dnf, model_count, wmc


@dataclass(frozen=True)
class TID:
    """Tuple-independent database: per-fact probability and an
    exogenous/endogenous mark ('x' facts are always present)."""
    db: Database
    prob: dict              # (rel, values) -> Fraction in [0, 1]
    kind: dict              # (rel, values) -> 'x' | 'n'

    def __post_init__(self):
        for fact in self.db.facts():
            if fact not in self.prob:
                raise ValueError(f"fact {fact} has no probability")
            p = self.prob[fact]
            if not 0 <= p <= 1:
                raise ValueError(f"fact {fact} has probability {p} outside [0, 1]")
            if self.kind.get(fact, 'n') not in ('x', 'n'):
                raise ValueError(f"fact {fact} has unknown kind {self.kind[fact]!r}")

    def endogenous(self) -> list:
        return [f for f in self.db.facts() if self.kind.get(f, 'n') == 'n']

    def exogenous(self) -> list:
        return [f for f in self.db.facts() if self.kind.get(f, 'n') == 'x']

    @staticmethod
    def from_tsv(text: str) -> 'TID':
        """Fact lines extended with a probability and an x/n marker:
        `R<TAB>v1<TAB>...<TAB>p<TAB>n`."""
        relations = {}
        prob = {}
        kind = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.rstrip('\n')
            if not line.strip() or line.startswith('#'):
                continue
            parts = line.split('\t')
            if len(parts) < 4:
                raise InputFormatError(
                    f"line {lineno}: expected relation, values, probability, marker")
            rel, values, p_text, marker = parts[0], tuple(parts[1:-2]), parts[-2], parts[-1]
            try:
                p = Fraction(p_text)
            except (ValueError, ZeroDivisionError):
                raise InputFormatError(f"line {lineno}: bad probability {p_text!r}") from None
            if not 0 <= p <= 1:
                raise InputFormatError(f"line {lineno}: probability {p_text} outside [0, 1]")
            if marker not in ('x', 'n'):
                raise InputFormatError(f"line {lineno}: marker must be 'x' or 'n'")
            relations.setdefault(rel, set()).add(values)
            prob[(rel, values)] = p
            kind[(rel, values)] = marker
        return TID(Database(relations), prob, kind)

    @staticmethod
    def uniform(db: Database, p: Fraction = Fraction(1, 2)) -> 'TID':
        facts = db.facts()
        return TID(db, {f: p for f in facts}, {f: 'n' for f in facts})


class FactVar:
    """Bijection between the facts of a database and circuit variables."""

    def __init__(self, db: Database):
        self.facts = db.facts()
        self.var_of = {f: i for i, f in enumerate(self.facts)}

    def fact_of(self, var: int):
        return self.facts[var]

    def labels(self) -> tuple:
        return tuple(f"{rel}({','.join(str(v) for v in values)})"
                     for rel, values in self.facts)

    def __len__(self):
        return len(self.facts)


@dataclass(frozen=True)
class Lifted:
    query: ConjunctiveQuery        # one fresh identifier variable per atom
    db: Database                   # each fact extended with its identifier
    fact_vars: FactVar
    id_vars: tuple                 # the fresh variables, one per atom


def lift(query: ConjunctiveQuery, db: Database) -> Lifted:
    """Add per-atom identifier attributes and per-fact identifier values.

    The lifted query is projection-free; its answers are the original
    answers paired with the facts used, and acyclicity is preserved.
    """
    fact_vars = FactVar(db)
    taken = set(query.variables())
    id_vars = []
    for i in range(len(query.atoms)):
        name = f"_id{i}"
        while name in taken:
            name = "_" + name
        taken.add(name)
        id_vars.append(name)
    atoms = []
    head = []
    for (rel, vs), idv in zip(query.atoms, id_vars):
        atoms.append((rel + "*", tuple(vs) + (idv,)))
        for v in vs:
            if v not in head:
                head.append(v)
        head.append(idv)
    relations = {}
    for (rel, vs) in query.atoms:
        relations.setdefault(rel + "*", set())
    for fact in fact_vars.facts:
        rel, values = fact
        starred = rel + "*"
        if starred in relations:
            relations[starred].add(tuple(values) + (fact_vars.var_of[fact],))
    lifted_q = ConjunctiveQuery(tuple(head), tuple(atoms))
    return Lifted(lifted_q, Database(relations), fact_vars, tuple(id_vars))


def provenance_circuit_sjf(query: ConjunctiveQuery, db: Database) -> BoolCircuit:
    """Decomposable circuit over one variable per fact, true exactly on the
    subinstances where the (existentially closed) query holds.

    Compiles the lifted query, renames identifier inputs to fact variables,
    and projects the data attributes away; self-join-freeness keeps the
    join gates decomposable.  The result is generally not deterministic.
    """
    if not query.self_join_free:
        raise SelfJoinPresent(f"{query} repeats a relation name")
    lifted = lift(query, db)
    rel_circuit = compile_cq(lifted.query, lifted.db)
    id_attr_idx = {rel_circuit.attr_index[v] for v in lifted.id_vars
                   if v in rel_circuit.attr_index}
    b = CircuitBuilder(len(lifted.fact_vars))
    out = []
    for rec in rel_circuit.nodes:
        kind = rec[0]
        if kind == 'I':
            if rec[1] in id_attr_idx:
                fact_id = rel_circuit.domains[rec[1]][rec[2]]
                out.append(b.literal(fact_id, True))
            else:
                out.append(b.true())
        elif kind == '1':
            out.append(b.true())
        elif kind == '0':
            out.append(b.false())
        elif kind == 'J':
            out.append(b.conj(tuple(out[c] for c in rec[1])))
        else:
            out.append(b.disj(tuple(out[c] for c in rec[1])))
    return b.finish(out[rel_circuit.output], var_names=lifted.fact_vars.labels())


def provenance_dnf(queries, db: Database) -> DNFFormula:
    """Monotone DNF with one term per homomorphism image.

    Accepts one query or an iterable of queries (a union); duplicate fact
    sets collapse to one term.
    """
    if isinstance(queries, ConjunctiveQuery):
        queries = [queries]
    fact_vars = FactVar(db)
    terms = set()

    for query in queries:
        by_rel = {}
        for rel, fs in db.relations.items():
            by_rel[rel] = sorted(fs, key=lambda f: tuple(domain_sort_key(v) for v in f))

        def extend(idx: int, binding: dict, used: frozenset):
            if idx == len(query.atoms):
                terms.add(used)
                return
            rel, vs = query.atoms[idx]
            for fact in by_rel.get(rel, ()):
                if len(fact) != len(vs):
                    continue
                new = dict(binding)
                ok = True
                for var, value in zip(vs, fact):
                    if new.setdefault(var, value) != value:
                        ok = False
                        break
                if ok:
                    extend(idx + 1, new,
                           used | {fact_vars.var_of[(rel, fact)]})

        extend(0, {}, frozenset())
    dnf_terms = sorted({frozenset((v, True) for v in t) for t in terms},
                       key=lambda t: sorted(v for v, _ in t))
    return DNFFormula(len(fact_vars), tuple(dnf_terms))


def is_hierarchical(query: ConjunctiveQuery) -> bool:
    """Atom sets of any two variables are nested or disjoint.

    Checked on the existentially closed query, matching the provenance
    semantics used here; requires self-join-freeness.
    """
    if not query.self_join_free:
        raise SelfJoinPresent(f"{query} repeats a relation name")
    occurs = {}
    for i, (_, vs) in enumerate(query.atoms):
        for v in vs:
            occurs.setdefault(v, set()).add(i)
    sets = list(occurs.values())
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            a, b = sets[i], sets[j]
            if a & b and not (a <= b or b <= a):
                return False
    return True


# -- read-once provenance ------------------------------------------------------------

@dataclass(frozen=True)
class ReadOnceTree:
    """Independent-AND/OR tree; leaves hold fact variables, each at most
    once, so child probabilities combine independently."""
    kind: str                # 'and' | 'or' | 'leaf'
    children: tuple = ()
    var: Optional[int] = None

    def variables(self) -> list:
        if self.kind == 'leaf':
            return [self.var]
        out = []
        for c in self.children:
            out.extend(c.variables())
        return out

    def evaluate(self, valuation: dict) -> bool:
        if self.kind == 'leaf':
            return bool(valuation[self.var])
        if self.kind == 'and':
            return all(c.evaluate(valuation) for c in self.children)
        return any(c.evaluate(valuation) for c in self.children)


def provenance_read_once(query: ConjunctiveQuery, db: Database) -> ReadOnceTree:
    """Read-once provenance tree for a hierarchical self-join-free query.

    Recursion: disconnected atom groups combine by independent AND; a
    variable shared by every atom of a connected group splits it into
    independent OR branches, one per value; a single atom is the OR of its
    matching facts.
    """
    if not is_hierarchical(query):
        raise NotHierarchical(f"{query} is not hierarchical")
    fact_vars = FactVar(db)
    per_atom = []
    for rel, vs in query.atoms:
        facts = []
        for f in sorted(db.relations.get(rel, ()),
                        key=lambda f: tuple(domain_sort_key(v) for v in f)):
            if len(f) == len(vs):
                facts.append(f)
        per_atom.append(facts)

    def consistent(atom_idx: int, facts: list, binding: dict) -> list:
        _, vs = query.atoms[atom_idx]
        out = []
        for f in facts:
            ok = True
            seen = dict(binding)
            for var, value in zip(vs, f):
                if seen.setdefault(var, value) != value:
                    ok = False
                    break
            if ok:
                out.append(f)
        return out

    def recurse(atom_ids: list, facts: dict, binding: dict) -> ReadOnceTree:
        if not atom_ids:
            return ReadOnceTree('and', ())
        unbound = {a: {v for v in query.atoms[a][1] if v not in binding}
                   for a in atom_ids}
        # split into groups connected by shared unbound variables
        groups = []
        remaining = set(atom_ids)
        while remaining:
            seed = min(remaining)
            group = {seed}
            frontier = [seed]
            while frontier:
                a = frontier.pop()
                for other in list(remaining - group):
                    if unbound[a] & unbound[other]:
                        group.add(other)
                        frontier.append(other)
            groups.append(sorted(group))
            remaining -= group
        if len(groups) > 1:
            return ReadOnceTree('and', tuple(recurse(g, facts, binding)
                                             for g in groups))
        group = groups[0]
        if len(group) == 1:
            a = group[0]
            matching = consistent(a, facts[a], binding)
            leaves = tuple(ReadOnceTree('leaf', var=fact_vars.var_of[(query.atoms[a][0], f)])
                           for f in matching)
            return ReadOnceTree('or', leaves)
        shared = set.intersection(*(unbound[a] for a in group))
        if not shared:
            raise NotHierarchical(
                f"{query}: connected atoms {group} share no variable")
        root_var = min(shared)
        values = None
        positions = {}
        for a in group:
            _, vs = query.atoms[a]
            pos = vs.index(root_var)
            vals = {f[pos] for f in consistent(a, facts[a], binding)}
            values = vals if values is None else values & vals
        branches = []
        for value in sorted(values, key=domain_sort_key):
            new_binding = dict(binding)
            new_binding[root_var] = value
            new_facts = dict(facts)
            for a in group:
                new_facts[a] = consistent(a, facts[a], new_binding)
            branches.append(recurse(group, new_facts, new_binding))
        return ReadOnceTree('or', tuple(branches))

    tree = recurse(list(range(len(query.atoms))),
                   {a: per_atom[a] for a in range(len(query.atoms))}, {})
    seen = tree.variables()
    assert len(seen) == len(set(seen)), "read-once recursion repeated a fact"
    return tree


def read_once_to_obdd(tree: ReadOnceTree, num_vars: int) -> BoolCircuit:
    """Ordered decision diagram along the tree's depth-first leaf order.

    Continuation composition: an AND chains its children on the true
    branch, an OR on the false branch, so each leaf becomes exactly one
    decision gate and the size stays linear in the number of leaves.
    """
    b = CircuitBuilder(num_vars)

    def build(node: ReadOnceTree, on_true: int, on_false: int) -> int:
        if node.kind == 'leaf':
            return b.decision(node.var, on_false, on_true)
        if node.kind == 'and':
            acc = on_true
            for child in reversed(node.children):
                acc = build(child, acc, on_false)
            return acc
        acc = on_false
        for child in reversed(node.children):
            acc = build(child, on_true, acc)
        return acc

    return b.finish(build(tree, b.true(), b.false()))


# -- aggregation tasks ------------------------------------------------------------------

def _hierarchical_obdd(query: ConjunctiveQuery, db: Database) -> BoolCircuit:
    tree = provenance_read_once(query, db)
    return read_once_to_obdd(tree, len(FactVar(db)))


def pqe(query: ConjunctiveQuery, tid: TID, mode: str = 'exact',
        params: Optional[ApproxParams] = None):
    """Probability that the query holds on the tuple-independent database.

    'exact' builds the read-once decision diagram (hierarchical self-join-
    free queries) and runs weighted counting with exact rationals; 'approx'
    runs the Monte Carlo DNF counter and needs ApproxParams.
    """
    fact_vars = FactVar(tid.db)
    probs = {fact_vars.var_of[f]: Fraction(tid.prob[f]) for f in fact_vars.facts}
    if mode == 'exact':
        circuit = smooth(_hierarchical_obdd(query, tid.db))
        return wmc(circuit, WeightMap.from_probabilities(probs))
    if mode == 'approx':
        if params is None:
            raise ValueError("approx mode needs ApproxParams")
        dnf = provenance_dnf(query, tid.db)
        return approx_count_dnf(dnf, probs, params)
    raise ValueError(f"unknown mode {mode!r}")


def uniform_reliability(query: ConjunctiveQuery, db: Database,
                        brute_force_limit: int = 20) -> int:
    """Number of subinstances satisfying the query."""
    facts = db.facts()
    try:
        circuit = smooth(_hierarchical_obdd(query, db))
        return model_count(circuit)
    except (NotHierarchical, SelfJoinPresent):
        pass
    if len(facts) > brute_force_limit:
        raise TooLargeForBruteForce(
            f"{len(facts)} facts exceed the brute-force cap {brute_force_limit}")
    total = 0
    for mask in range(1 << len(facts)):
        subset = [facts[j] for j in range(len(facts)) if (mask >> j) & 1]
        if query_holds(query, subset):
            total += 1
    return total


def shapley(query: ConjunctiveQuery, tid: TID, target,
            brute_force_limit: int = 15) -> Fraction:
    """Shapley value of an endogenous fact for making the query true.

    Exogenous facts are fixed present (their variables conditioned to 1);
    the value aggregates, per cardinality, how many endogenous subsets
    flip the query when the target joins them.
    """
    target = (target[0], tuple(target[1]))
    if tid.kind.get(target, 'n') != 'n':
        raise TargetExogenous(f"{target} is exogenous")
    if target not in tid.prob:
        raise ValueError(f"{target} is not a fact of the database")
    endo = tid.endogenous()
    exo = tid.exogenous()
    m = len(endo)
    try:
        circuit = _hierarchical_obdd(query, tid.db)
    except (NotHierarchical, SelfJoinPresent):
        circuit = None
    if circuit is not None:
        fact_vars = FactVar(tid.db)
        fixed = {fact_vars.var_of[f]: 1 for f in exo}
        conditioned = condition(circuit, fixed)
        plus = _cardinality_vector(conditioned, fact_vars.var_of[target], 1)
        minus = _cardinality_vector(conditioned, fact_vars.var_of[target], 0)
    else:
        if m > brute_force_limit:
            raise TooLargeForBruteForce(
                f"{m} endogenous facts exceed the brute-force cap")
        others = [f for f in endo if f != target]
        plus = [0] * m
        minus = [0] * m
        for mask in range(1 << len(others)):
            subset = [others[j] for j in range(len(others)) if (mask >> j) & 1]
            k = len(subset)
            if query_holds(query, exo + subset + [target]):
                plus[k] += 1
            if query_holds(query, exo + subset):
                minus[k] += 1
    total = Fraction(0)
    for k in range(m):
        coeff = Fraction(factorial(k) * factorial(m - 1 - k), factorial(m))
        total += coeff * (plus[k] - minus[k])
    return total


def _cardinality_vector(circuit: BoolCircuit, target_var: int, bit: int) -> list:
    """Counts of satisfying endogenous subsets by size, with the target
    conditioned to the given value; determinism survives conditioning even
    though the decision shape does not."""
    from .queries import count_by_cardinality
    conditioned = smooth(condition(circuit, {target_var: bit}))
    return count_by_cardinality(conditioned, assume_deterministic=True)


def shapley_all(query: ConjunctiveQuery, tid: TID) -> dict:
    """Shapley value of every endogenous fact."""
    return {f: shapley(query, tid, f) for f in tid.endogenous()}
