"""Conjunctive queries: parsing, acyclicity, and compilation to ordered
decision circuits over the query's free variables.

The compiler follows a total variable order with the free variables first.
At each step it branches on the next variable, keeping per-atom sorted fact
indexes so that only values consistent with every remaining atom are tried;
independent components of the residual query compile separately under a
join gate, and residual states are cached.  Once all free variables of a
component are fixed, the remaining existential part reduces to a cached
emptiness test.  With an order witnessing free-connex acyclicity the
circuit size is linear in the database, up to query-dependent factors.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

from .errors import (ArityMismatch, NotFreeConnex, OrderMissingVariables,
                     OutOfRange, QuerySyntaxError, UnboundHeadVariable,
                     UnknownRelation)
from .relational import RelBuilder, RelCircuit, count_rel, direct_access, enumerate_rel


@dataclass(frozen=True)
class ConjunctiveQuery:
    head: tuple              # free variables, in head order
    atoms: tuple             # (relation name, variable tuple)

    @property
    def self_join_free(self) -> bool:
        rels = [rel for rel, _ in self.atoms]
        return len(rels) == len(set(rels))

    def variables(self) -> list:
        """All variables in first-appearance order, head first."""
        seen = []
        for v in self.head:
            if v not in seen:
                seen.append(v)
        for _, vs in self.atoms:
            for v in vs:
                if v not in seen:
                    seen.append(v)
        return seen

    def existential_variables(self) -> list:
        head = set(self.head)
        return [v for v in self.variables() if v not in head]

    def __str__(self):
        body = ", ".join(f"{rel}({', '.join(vs)})" for rel, vs in self.atoms)
        return f"Q({', '.join(self.head)}) :- {body}."


_IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
_ATOM_RE = re.compile(rf"({_IDENT})\s*\(([^()]*)\)")


def domain_sort_key(value):
    """Total order over possibly mixed-type values (class name, then value)."""
    return (value.__class__.__name__, value)


def parse_cq(text: str) -> ConjunctiveQuery:
    """Parse `Q(x, y) :- R(x, y), S(y, z).`; the head may be empty."""
    text = text.strip()
    if text.endswith('.'):
        text = text[:-1]
    if ':-' not in text:
        raise QuerySyntaxError("expected `head :- body`")
    head_part, body_part = text.split(':-', 1)
    head_match = _ATOM_RE.fullmatch(head_part.strip())
    if head_match is None:
        raise QuerySyntaxError(f"bad head {head_part.strip()!r}")
    head = _split_vars(head_match.group(2))
    atoms = []
    body_part = body_part.strip()
    if body_part:
        pos = 0
        while pos < len(body_part):
            m = _ATOM_RE.match(body_part, pos)
            if m is None:
                raise QuerySyntaxError(f"bad atom near {body_part[pos:pos + 20]!r}")
            atoms.append((m.group(1), tuple(_split_vars(m.group(2)))))
            pos = m.end()
            rest = body_part[pos:].lstrip()
            if rest.startswith(','):
                rest = rest[1:].lstrip()
            elif rest:
                raise QuerySyntaxError(f"expected ',' near {rest[:20]!r}")
            pos = len(body_part) - len(rest)
    arities = {}
    for rel, vs in atoms:
        if arities.setdefault(rel, len(vs)) != len(vs):
            raise ArityMismatch(f"relation {rel} used with arities "
                                f"{arities[rel]} and {len(vs)}")
    body_vars = {v for _, vs in atoms for v in vs}
    unbound = [v for v in head if v not in body_vars]
    if unbound:
        raise UnboundHeadVariable(f"head variables {unbound} not in any atom")
    return ConjunctiveQuery(tuple(head), tuple(atoms))


def _split_vars(csv: str) -> list:
    csv = csv.strip()
    if not csv:
        return []
    out = []
    for tok in csv.split(','):
        tok = tok.strip()
        if not re.fullmatch(_IDENT, tok):
            raise QuerySyntaxError(f"bad variable name {tok!r}")
        out.append(tok)
    return out


class Database:
    """Per-relation fact sets over an ordered active domain."""

    def __init__(self, relations: dict):
        self.relations = {}
        self.arity = {}
        values = set()
        for rel, facts in relations.items():
            facts = {tuple(f) for f in facts}
            for f in facts:
                values.update(f)
                if self.arity.setdefault(rel, len(f)) != len(f):
                    raise ArityMismatch(f"relation {rel} has facts of "
                                        f"different arities")
            self.arity.setdefault(rel, None)
            self.relations[rel] = facts
        self.active_domain = sorted(values, key=domain_sort_key)

    @staticmethod
    def from_tsv(text: str) -> 'Database':
        """Combined format: one fact per line, `R<TAB>v1<TAB>v2...`."""
        relations = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.rstrip('\n')
            if not line.strip() or line.startswith('#'):
                continue
            parts = line.split('\t')
            if len(parts) < 2:
                raise QuerySyntaxError(
                    f"line {lineno}: expected relation and at least one value")
            relations.setdefault(parts[0], set()).add(tuple(parts[1:]))
        return Database(relations)

    @staticmethod
    def from_relation_texts(texts: dict) -> 'Database':
        """One text per relation, each line the tab-separated values of one
        fact (an empty text declares an empty relation)."""
        relations = {}
        for rel, text in texts.items():
            facts = set()
            for lineno, raw in enumerate(text.splitlines(), start=1):
                line = raw.rstrip('\n')
                if not line.strip() or line.startswith('#'):
                    continue
                facts.add(tuple(line.split('\t')))
            relations[rel] = facts
        return Database(relations)

    @staticmethod
    def from_tsv_dir(path) -> 'Database':
        """Directory with one `<relation>.tsv` file per relation."""
        import os
        texts = {}
        for name in sorted(os.listdir(path)):
            if not name.endswith('.tsv'):
                continue
            with open(os.path.join(path, name), 'r', encoding='utf-8') as handle:
                texts[name[:-4]] = handle.read()
        if not texts:
            raise QuerySyntaxError(f"no .tsv files under {path}")
        return Database.from_relation_texts(texts)

    def facts(self) -> list:
        """All facts as (relation, values), sorted for determinism."""
        return sorted((rel, f) for rel, fs in self.relations.items() for f in fs)


# -- hypergraph acyclicity -----------------------------------------------------

@dataclass
class JoinTree:
    root: int
    adjacency: dict          # atom id -> sorted list of neighbour ids

    def bfs_order(self) -> list:
        seen = {self.root}
        order = [self.root]
        queue = [self.root]
        while queue:
            node = queue.pop(0)
            for nxt in self.adjacency.get(node, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    order.append(nxt)
                    queue.append(nxt)
        return order


def _gyo(edges: list) -> Optional[dict]:
    """GYO ear reduction; returns parent links when acyclic, else None.

    edges: list of variable sets, indexed by atom id.
    """
    current = {i: set(vs) for i, vs in enumerate(edges)}
    parent = {}
    changed = True
    while changed and len(current) > 1:
        changed = False
        counts = {}
        for vs in current.values():
            for v in vs:
                counts[v] = counts.get(v, 0) + 1
        for i, vs in current.items():
            isolated = {v for v in vs if counts[v] == 1}
            if isolated:
                vs -= isolated
                changed = True
        ids = sorted(current)
        removed = None
        for i in ids:
            for j in ids:
                if i != j and current[i] <= current[j]:
                    parent[i] = j
                    removed = i
                    break
            if removed is not None:
                break
        if removed is not None:
            del current[removed]
            changed = True
    if len(current) > 1:
        return None
    if current:
        root = next(iter(current))
        parent[root] = None
    return parent


def is_acyclic(query: ConjunctiveQuery) -> bool:
    if not query.atoms:
        return True
    return _gyo([set(vs) for _, vs in query.atoms]) is not None


def join_tree(query: ConjunctiveQuery) -> Optional[JoinTree]:
    """A join tree with the running-intersection property, or None."""
    if not query.atoms:
        return None
    parent = _gyo([set(vs) for _, vs in query.atoms])
    if parent is None:
        return None
    adjacency = {i: [] for i in range(len(query.atoms))}
    root = None
    for child, par in parent.items():
        if par is None:
            root = child
        else:
            adjacency[child].append(par)
            adjacency[par].append(child)
    for nbrs in adjacency.values():
        nbrs.sort()
    tree = JoinTree(root, adjacency)
    _assert_running_intersection(query, tree)
    return tree


def _assert_running_intersection(query: ConjunctiveQuery, tree: JoinTree):
    order = tree.bfs_order()
    pos = {a: k for k, a in enumerate(order)}
    for var in {v for _, vs in query.atoms for v in vs}:
        holders = [i for i, (_, vs) in enumerate(query.atoms) if var in vs]
        # connectivity: every holder except the shallowest must have a
        # neighbour holder strictly closer to the root
        shallowest = min(holders, key=lambda a: pos[a])
        for a in holders:
            if a == shallowest:
                continue
            if not any(n in holders and pos[n] < pos[a]
                       for n in tree.adjacency[a]):
                raise AssertionError("join tree violates running intersection")


def _with_head_atom(query: ConjunctiveQuery) -> ConjunctiveQuery:
    head_atom = ('__head__', tuple(query.head))
    return ConjunctiveQuery(query.head, query.atoms + (head_atom,))


def is_free_connex(query: ConjunctiveQuery) -> bool:
    """Acyclic, and still acyclic with a virtual atom over the head."""
    return is_acyclic(query) and is_acyclic(_with_head_atom(query))


def elimination_order(query: ConjunctiveQuery) -> list:
    """Total variable order witnessing free-connexity, free variables first.

    Breadth-first over a join tree of the query extended with a virtual
    head atom, rooted at that atom; variables are listed by first visit.
    """
    if not is_free_connex(query):
        raise NotFreeConnex(f"{query} is not free-connex acyclic")
    if not query.atoms:
        return list(query.head)
    extended = _with_head_atom(query)
    tree = join_tree(extended)
    head_id = len(query.atoms)
    tree = _reroot(tree, head_id)
    order = []
    for atom_id in tree.bfs_order():
        for v in extended.atoms[atom_id][1]:
            if v not in order:
                order.append(v)
    return order


def _reroot(tree: JoinTree, new_root: int) -> JoinTree:
    return JoinTree(new_root, tree.adjacency)


# -- per-atom fact indexes --------------------------------------------------------

class _AtomIndex:
    """Facts of one atom, sorted along the decision order.

    Variables of the atom are grouped in decision order; the sort key of a
    fact lists its values by group (a repeated variable contributes one
    group with several positions).  Narrowing by the next group's value
    keeps the consistent facts a contiguous slice.
    """

    def __init__(self, atom_id: int, rel: str, vars_: tuple, facts: Iterable[tuple],
                 rank: dict):
        self.atom_id = atom_id
        self.rel = rel
        self.vars = vars_
        groups = {}
        for pos, v in enumerate(vars_):
            groups.setdefault(v, []).append(pos)
        self.group_vars = sorted(groups, key=lambda v: rank[v])
        self.group_positions = [tuple(groups[v]) for v in self.group_vars]
        keys = []
        for f in facts:
            ok = True
            key = []
            for positions in self.group_positions:
                vals = {f[p] for p in positions}
                if len(vals) > 1:
                    ok = False
                    break
                key.append(f[positions[0]])
            if ok:
                keys.append(tuple(key))
        keys.sort()
        self.keys = keys

    def full_range(self) -> tuple:
        return (0, len(self.keys), 0)

    def narrow(self, state: tuple, value) -> Optional[tuple]:
        """Restrict to facts whose next group equals the value."""
        lo, hi, depth = state
        lo2 = _lower_bound(self.keys, lo, hi, depth, value)
        hi2 = _upper_bound(self.keys, lo2, hi, depth, value)
        if lo2 >= hi2:
            return None
        return (lo2, hi2, depth + 1)

    def candidate_values(self, state: tuple) -> list:
        """Distinct values of the next group within the state's slice."""
        lo, hi, depth = state
        out = []
        while lo < hi:
            v = self.keys[lo][depth]
            out.append(v)
            lo = _upper_bound(self.keys, lo, hi, depth, v)
        return out

    def next_var(self, state: tuple) -> Optional[str]:
        depth = state[2]
        if depth >= len(self.group_vars):
            return None
        return self.group_vars[depth]


def _lower_bound(keys, lo, hi, depth, value):
    while lo < hi:
        mid = (lo + hi) // 2
        if keys[mid][depth] < value:
            lo = mid + 1
        else:
            hi = mid
    return lo


def _upper_bound(keys, lo, hi, depth, value):
    while lo < hi:
        mid = (lo + hi) // 2
        if keys[mid][depth] <= value:
            lo = mid + 1
        else:
            hi = mid
    return lo


# -- semijoin reduction --------------------------------------------------------------

def _semijoin(left_vars, left_facts, right_vars, right_facts):
    shared = sorted(set(left_vars) & set(right_vars))
    if not shared:
        return left_facts
    rpos = {v: right_vars.index(v) for v in shared}
    proj = {tuple(f[rpos[v]] for v in shared) for f in right_facts}
    lpos = {v: left_vars.index(v) for v in shared}
    return [f for f in left_facts
            if tuple(f[lpos[v]] for v in shared) in proj]


def _reduce_facts(query: ConjunctiveQuery, per_atom: list) -> list:
    """Yannakakis-style full reduction along a join tree (acyclic only)."""
    tree = join_tree(query)
    if tree is None:
        return per_atom
    order = tree.bfs_order()
    pos = {a: k for k, a in enumerate(order)}
    facts = list(per_atom)
    for a in reversed(order):           # leaves first
        for n in tree.adjacency[a]:
            if pos[n] > pos[a]:
                facts[a] = _semijoin(query.atoms[a][1], facts[a],
                                     query.atoms[n][1], facts[n])
    for a in order:                     # root first
        for n in tree.adjacency[a]:
            if pos[n] < pos[a]:
                facts[a] = _semijoin(query.atoms[a][1], facts[a],
                                     query.atoms[n][1], facts[n])
    return facts


# -- compilation -----------------------------------------------------------------------

def compile_cq(query: ConjunctiveQuery, db: Database,
               order: Optional[list] = None, reduce_first: bool = True,
               use_cache: bool = True) -> RelCircuit:
    """Compile the answer relation into an ordered decision circuit.

    The order must cover every query variable with the free variables as a
    prefix; when omitted it is derived for free-connex queries.  Orders
    that do not witness free-connexity still give a correct circuit, only
    the linear size guarantee is lost.
    """
    for rel, _ in query.atoms:
        if rel not in db.relations:
            raise UnknownRelation(f"relation {rel} not in the database")
    if order is None:
        if is_free_connex(query):
            order = elimination_order(query)
        else:
            order = list(query.head) + query.existential_variables()
            warnings.warn(f"{query}: no free-connex witness order; "
                          "circuit size may not be linear in the database")
    all_vars = set(query.variables())
    if set(order) != all_vars:
        raise OrderMissingVariables(
            f"order {order} must cover exactly the query variables {sorted(all_vars)}")
    num_free = len(set(query.head))
    if set(order[:num_free]) != set(query.head):
        raise OrderMissingVariables("free variables must form a prefix of the order")
    rank = {v: i for i, v in enumerate(order)}

    per_atom = [sorted(db.relations[rel],
                       key=lambda f: tuple(domain_sort_key(v) for v in f))
                for rel, _ in query.atoms]
    if reduce_first and is_acyclic(query):
        per_atom = _reduce_facts(query, per_atom)

    indexes = [_AtomIndex(i, rel, vs, per_atom[i], rank)
               for i, (rel, vs) in enumerate(query.atoms)]

    # per-attribute domains: values seen at any position of the variable
    domains = {}
    for v in query.head:
        seen = set()
        for idx in indexes:
            for gi, gv in enumerate(idx.group_vars):
                if gv == v:
                    seen.update(key[gi] for key in idx.keys)
        dummy = db.active_domain[0] if db.active_domain else '_'
        domains[v] = sorted(seen, key=domain_sort_key) if seen else [dummy]

    b = RelBuilder(order[:num_free], domains)
    free_vars = set(query.head)

    circuit_cache = {}
    exists_cache = {}

    def state_key(atom_states: dict) -> tuple:
        return tuple(sorted((a,) + atom_states[a] for a in atom_states))

    def components(atom_states: dict) -> list:
        """Group atoms by connectivity over their undecided variables."""
        undecided = {a: set(indexes[a].group_vars[atom_states[a][2]:])
                     for a in atom_states}
        parent = {a: a for a in atom_states}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        var_owner = {}
        for a, vs in undecided.items():
            for v in vs:
                if v in var_owner:
                    ra, rb = find(a), find(var_owner[v])
                    if ra != rb:
                        parent[ra] = rb
                else:
                    var_owner[v] = a
        groups = {}
        for a in atom_states:
            groups.setdefault(find(a), []).append(a)
        return list(groups.values())

    def next_variable(atom_states: dict, atoms: list) -> Optional[str]:
        best = None
        for a in atoms:
            v = indexes[a].next_var(atom_states[a])
            if v is not None and (best is None or rank[v] < rank[best]):
                best = v
        return best

    def branch_values(atom_states: dict, atoms: list, var: str) -> list:
        values = None
        for a in atoms:
            if indexes[a].next_var(atom_states[a]) == var:
                cand = indexes[a].candidate_values(atom_states[a])
                values = cand if values is None else [v for v in values if v in set(cand)]
                if not values:
                    return []
        return values or []

    def narrowed(atom_states: dict, atoms: list, var: str, value) -> Optional[dict]:
        out = dict(atom_states)
        for a in atoms:
            if indexes[a].next_var(atom_states[a]) == var:
                nxt = indexes[a].narrow(atom_states[a], value)
                if nxt is None:
                    return None
                out[a] = nxt
        return out

    def exists(atom_states: dict, atoms: list) -> bool:
        atoms = [a for a in atoms
                 if indexes[a].next_var(atom_states[a]) is not None]
        if not atoms:
            return True
        key = state_key({a: atom_states[a] for a in atoms})
        if use_cache:
            hit = exists_cache.get(key)
            if hit is not None:
                return hit
        var = next_variable(atom_states, atoms)
        result = False
        for value in branch_values(atom_states, atoms, var):
            sub = narrowed(atom_states, atoms, var, value)
            if sub is not None and exists(sub, atoms):
                result = True
                break
        if use_cache:
            exists_cache[key] = result
        return result

    def compile_part(atom_states: dict) -> int:
        """Circuit node for the relation of this residual, or the empty
        node when no assignment survives."""
        live = {a: s for a, s in atom_states.items()
                if indexes[a].next_var(s) is not None}
        if not live:
            return b.unit()
        key = state_key(live)
        if use_cache:
            hit = circuit_cache.get(key)
            if hit is not None:
                return hit
        comps = components(live)
        if len(comps) > 1:
            parts = []
            for comp in comps:
                node = compile_part({a: live[a] for a in comp})
                if b.nodes[node] == ('0',):
                    if use_cache:
                        circuit_cache[key] = b.empty()
                    return b.empty()
                if b.nodes[node] != ('1',):
                    parts.append(node)
            node = b.join(tuple(parts)) if len(parts) > 1 else (
                parts[0] if parts else b.unit())
        else:
            atoms = comps[0]
            var = next_variable(live, atoms)
            if var not in free_vars:
                node = b.unit() if exists(live, atoms) else b.empty()
            else:
                branches = []
                for value in branch_values(live, atoms, var):
                    sub_states = narrowed(live, atoms, var, value)
                    if sub_states is None:
                        continue
                    sub = compile_part(sub_states)
                    if b.nodes[sub] == ('0',):
                        continue
                    branches.append(b.join((b.input(var, value), sub)))
                node = b.union(tuple(branches)) if branches else b.empty()
        if use_cache:
            circuit_cache[key] = node
        return node

    initial = {}
    for idx in indexes:
        state = idx.full_range()
        if state[1] == 0:
            return b.finish(b.empty())
        initial[idx.atom_id] = state
    return b.finish(compile_part(initial))


# -- answer wrappers ----------------------------------------------------------------------

def _materialize(query: ConjunctiveQuery, db: Database) -> list:
    """Backtracking join; answers as dicts over the head variables."""
    for rel, _ in query.atoms:
        if rel not in db.relations:
            raise UnknownRelation(f"relation {rel} not in the database")
    answers = set()

    def extend(idx: int, binding: dict):
        if idx == len(query.atoms):
            answers.add(tuple(binding[v] for v in query.head))
            return
        rel, vs = query.atoms[idx]
        for fact in db.relations[rel]:
            new = dict(binding)
            ok = True
            for var, value in zip(vs, fact):
                if new.setdefault(var, value) != value:
                    ok = False
                    break
            if ok:
                extend(idx + 1, new)

    extend(0, {})
    ordered = sorted(answers,
                     key=lambda t: tuple(domain_sort_key(v) for v in t))
    return [dict(zip(query.head, t)) for t in ordered]


def query_holds(query: ConjunctiveQuery, facts: Iterable[tuple]) -> bool:
    """Boolean satisfaction over a plain fact collection (rel, values)."""
    by_rel = {}
    for rel, values in facts:
        by_rel.setdefault(rel, []).append(tuple(values))

    def extend(idx: int, binding: dict) -> bool:
        if idx == len(query.atoms):
            return True
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
            if ok and extend(idx + 1, new):
                return True
        return False

    return extend(0, {})


def answer_count(query: ConjunctiveQuery, db: Database) -> int:
    if is_free_connex(query):
        return count_rel(compile_cq(query, db))
    return len(_materialize(query, db))


def answer_enum(query: ConjunctiveQuery, db: Database) -> Iterator[dict]:
    """Answers as dicts over the head variables."""
    if is_free_connex(query):
        for tup in enumerate_rel(compile_cq(query, db)):
            yield {v: tup[v] for v in query.head}
    else:
        yield from _materialize(query, db)


def answer_access(query: ConjunctiveQuery, db: Database, index: int) -> dict:
    """The index-th answer (1-based) in the compiled lexicographic order."""
    if is_free_connex(query):
        circuit = compile_cq(query, db)
        tup = direct_access(circuit, index)
        return {v: tup[v] for v in query.head}
    answers = _materialize(query, db)
    if not 1 <= index <= len(answers):
        raise OutOfRange(f"query has {len(answers)} answers, asked for {index}")
    return answers[index - 1]
