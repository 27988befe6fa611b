"""Property verdicts for reward mechanisms, with re-checkable witnesses.

Schedule-level checks scan bounded (position, length, attack-size) domains:
strictly positive pay (PO), budget balance (BB), the split ratio, and the
split/merge inequalities at every size. Tree-level checks enumerate
deviations exhaustively on small trees: truth-telling as a dominant strategy
(IC) and coalition stability (core). A certificate check confirms that no
positive schedule survives the split and merge inequalities together.

Every check is pure and independent; reports merge deterministically.
Verdict conventions:

* Weak inequalities hold with equality: boundary schedules pass exactly
  where the algebra says they break even, and the report surfaces equality
  separately (detected at 1e-12 relative).
* A ``fail`` verdict always carries a witness whose replay through the
  corresponding reward/gain operation reproduces the numbers bit for bit
  (see :func:`replay_witness`).

Tie-breaks are handled in expectation, computed exactly by enumerating the
tied shortest paths -- no sampling, so IC/core verdicts are deterministic.

Blocking, for the core check, means a joint deviation that every coalition
member strictly prefers: a deviation some member loses by is not a coalition
its members would form (rewards are paid to individuals on the path, and a
deviation needs the loser's cooperation). Under the unrestricted reading --
maximum coalition total over arbitrary joint deviations -- no shortest-path
geometric mechanism is stable: one agent can always sacrifice its own pay to
reroute the path toward fellow members.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from . import adversary, mechanisms
from .mechanisms import (EQ_TOL, MechanismSpec, position_reward,
                         rewards_for_length)
from .querytree import QueryTree, tied_shortest_paths

DEFAULT_N_MAX = 50
DEFAULT_ATTACK_N_MAX = 20
DEFAULT_SIZE_MAX = 20
DEFAULT_TREE_CAP = 10
DEFAULT_COALITION_CAP = 8


class AuditError(ValueError):
    """Rejected audit input (oversized tree, malformed table)."""


@dataclass
class PropertyReport:
    property: str
    verdict: str                      # "pass" | "fail"
    witness: Optional[dict] = None
    domain: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_json(self) -> dict:
        return {"property": self.property, "verdict": self.verdict,
                "witness": self.witness, "domain": self.domain,
                "details": self.details}


def render_table(reports) -> str:
    """Human-readable one-line-per-property summary."""
    lines = [f"{'property':<14} {'verdict':<8} notes"]
    for rep in reports:
        notes = []
        for key, value in rep.details.items():
            if isinstance(value, float):
                notes.append(f"{key}={value:.6g}")
            elif isinstance(value, (str, bool, int)):
                notes.append(f"{key}={value}")
        if rep.witness is not None:
            notes.append(f"witness={rep.witness}")
        lines.append(f"{rep.property:<14} {rep.verdict:<8} {'; '.join(notes)}")
    return "\n".join(lines)


def _scan_n_max(spec: MechanismSpec, n_max: int) -> int:
    # explicit tables only cover the lengths they list
    if isinstance(spec.beta, Mapping):
        return min(n_max, max(spec.beta))
    return n_max


# ---------------------------------------------------------------------------
# Schedule-level checks
# ---------------------------------------------------------------------------

def check_po(spec: MechanismSpec, n_max: int = DEFAULT_N_MAX) -> PropertyReport:
    """Strictly positive pay at every position of every length <= n_max."""
    n_max = _scan_n_max(spec, n_max)
    for n in range(1, n_max + 1):
        for i in range(1, n + 1):
            x = position_reward(i, n, spec)
            if not x > 0.0:
                return PropertyReport(
                    "po", "fail",
                    witness={"i": i, "n": n, "reward": x},
                    domain={"n_max": n_max})
    return PropertyReport("po", "pass", domain={"n_max": n_max})


def check_bb(spec: MechanismSpec, n_max: int = DEFAULT_N_MAX) -> PropertyReport:
    """Total pay never exceeds the budget; flags exact exhaustion."""
    n_max = _scan_n_max(spec, n_max)
    budget = spec.budget
    strongly = True
    worst_total, worst_n = -1.0, 1
    for n in range(1, n_max + 1):
        total = rewards_for_length(n, spec).total
        if total > worst_total:
            worst_total, worst_n = total, n
        if abs(total - budget) > EQ_TOL * budget:
            strongly = False
        if total > budget * (1.0 + EQ_TOL):
            return PropertyReport(
                "bb", "fail",
                witness={"n": n, "total": total, "budget": budget},
                domain={"n_max": n_max})
    return PropertyReport(
        "bb", "pass", domain={"n_max": n_max},
        details={"strongly_bb": strongly, "max_total": worst_total,
                 "max_total_n": worst_n})


def check_split(spec: MechanismSpec, rho_expected: Optional[float] = None,
                n_max: int = DEFAULT_N_MAX) -> PropertyReport:
    """Adjacent positions split at least rho_expected; reports the exact
    achieved ratio. Defaults to the family's own ratio capped at 1."""
    n_max = _scan_n_max(spec, n_max)
    theoretical = mechanisms.split_ratio(spec)
    if rho_expected is None:
        rho_expected = min(theoretical, 1.0)
    achieved = None
    for n in range(2, n_max + 1):
        for i in range(1, n):
            lhs = position_reward(i, n, spec)
            rhs = position_reward(i + 1, n, spec)
            ratio = lhs / rhs
            achieved = ratio if achieved is None else min(achieved, ratio)
            if lhs < rho_expected * rhs * (1.0 - EQ_TOL):
                return PropertyReport(
                    "split", "fail",
                    witness={"i": i, "n": n, "ratio": ratio,
                             "rho_expected": rho_expected},
                    domain={"n_max": n_max},
                    details={"theoretical_ratio": theoretical})
    return PropertyReport(
        "split", "pass", domain={"n_max": n_max, "rho_expected": rho_expected},
        details={"theoretical_ratio": theoretical,
                 "achieved_ratio": achieved if achieved is not None else theoretical,
                 "increasing_toward_root": theoretical > 1.0})


def check_sp(spec: MechanismSpec, lambda_max: int = DEFAULT_SIZE_MAX,
             n_max: int = DEFAULT_ATTACK_N_MAX) -> PropertyReport:
    """Splitting any position into any number of extra identities (up to
    lambda_max) never pays. Per-size verdicts expose the threshold at which
    an almost-proof mechanism starts holding."""
    per_lambda: dict[int, str] = {}
    smallest_violating: dict[str, int] = {}
    equality_sizes: set[int] = set()
    first_witness = None
    for lam in range(1, lambda_max + 1):
        lam_ok = True
        for n in range(1, n_max + 1):
            for i in range(1, n + 1):
                out = adversary.sybil_gain(spec, i, n, lam)
                if out.break_even:
                    equality_sizes.add(lam)
                elif out.profitable:
                    lam_ok = False
                    smallest_violating.setdefault(f"{i},{n}", lam)
                    if first_witness is None:
                        first_witness = {
                            "i": i, "n": n, "lambda": lam,
                            "reward_before": out.reward_before,
                            "reward_after": out.reward_after}
        per_lambda[lam] = "pass" if lam_ok else "fail"
    verdict = "pass" if first_witness is None else "fail"
    return PropertyReport(
        "sp", verdict, witness=first_witness,
        domain={"n_max": n_max, "lambda_max": lambda_max},
        details={"per_lambda": per_lambda,
                 "equality_at": sorted(equality_sizes),
                 "smallest_violating_lambda": smallest_violating})


def check_cp(spec: MechanismSpec, gamma_max: int = DEFAULT_SIZE_MAX,
             n_max: int = DEFAULT_ATTACK_N_MAX) -> PropertyReport:
    """Merging consecutive identities (merge sizes up to gamma_max+1) never
    pays. Per-size verdicts expose the approximate-proof threshold."""
    per_size: dict[int, str] = {}
    equality_sizes: set[int] = set()
    first_witness = None
    for gamma in range(1, gamma_max + 1):
        size_ok = True
        for n in range(1, n_max + 1):
            for i in range(1, n + 1):
                out = adversary.collusion_gain(spec, i, n, gamma)
                if out.break_even:
                    equality_sizes.add(gamma + 1)
                elif out.profitable:
                    size_ok = False
                    if first_witness is None:
                        first_witness = {
                            "i": i, "n_merged": n, "gamma": gamma,
                            "merge_size": gamma + 1,
                            "reward_before": out.reward_before,
                            "reward_after": out.reward_after}
        per_size[gamma + 1] = "pass" if size_ok else "fail"
    verdict = "pass" if first_witness is None else "fail"
    return PropertyReport(
        "cp", verdict, witness=first_witness,
        domain={"n_max": n_max, "gamma_max": gamma_max},
        details={"per_merge_size": per_size,
                 "equality_at": sorted(equality_sizes)})


def check_monotone_solver_reward(spec: MechanismSpec,
                                 n_max: int = DEFAULT_N_MAX) -> PropertyReport:
    """Direction of the solver's own pay x(n, n) as paths lengthen.

    Split-proof schedules must pay later solvers no more; the check records
    the observed direction for every family rather than asserting a
    direction, and passes whenever the sequence is monotone at all.
    """
    n_max = _scan_n_max(spec, n_max)
    xs = [position_reward(n, n, spec) for n in range(1, n_max + 1)]
    non_increasing = all(a >= b * (1.0 - EQ_TOL) for a, b in zip(xs, xs[1:]))
    non_decreasing = all(a <= b * (1.0 + EQ_TOL) for a, b in zip(xs, xs[1:]))
    if non_increasing and non_decreasing:
        direction = "constant"
    elif non_increasing:
        direction = "non-increasing"
    elif non_decreasing:
        direction = "non-decreasing"
    else:
        direction = "none"
    witness = None
    if direction == "none":
        for n, (a, b) in enumerate(zip(xs, xs[1:]), start=1):
            if a < b:
                witness = {"n": n, "x_n": a, "x_n_plus_1": b}
                break
    return PropertyReport(
        "solver_reward_monotone", "pass" if direction != "none" else "fail",
        witness=witness, domain={"n_max": n_max},
        details={"direction": direction,
                 "sp_direction": direction in ("non-increasing", "constant")})


# ---------------------------------------------------------------------------
# Impossibility certificate
# ---------------------------------------------------------------------------

def reward_table(spec: MechanismSpec, n_max: int) -> dict[tuple[int, int], float]:
    """Explicit x(i, n) table for 1 <= i <= n <= n_max."""
    return {(i, n): position_reward(i, n, spec)
            for n in range(1, n_max + 1) for i in range(1, n + 1)}


def random_positive_table(rng: np.random.Generator, n_max: int,
                          low: float = 0.05,
                          high: float = 1.0) -> dict[tuple[int, int], float]:
    """Uniform positive entries; PO holds by construction."""
    return {(i, n): float(rng.uniform(low, high))
            for n in range(1, n_max + 1) for i in range(1, n + 1)}


def impossibility_certificate(table: Mapping[tuple[int, int], float]
                              ) -> PropertyReport:
    """No positive schedule survives both attack inequalities.

    Checks three things on the table: strict positivity, the split
    inequality at one extra identity, and the merge inequality at merge size
    three. Applying the split bound twice and combining with the merge bound
    forces x(i+1, n+2) <= 0, so a table passing all three contradicts
    positivity; the verdict is ``pass`` ("consistent") when at least one of
    the three fails, and names which.
    """
    if not table:
        raise AuditError("empty reward table")
    lengths = sorted({n for (_, n) in table})
    n_top = lengths[-1]
    if n_top < 3:
        raise AuditError(f"table must cover lengths up to 3, got {n_top}")
    for n in range(1, n_top + 1):
        for i in range(1, n + 1):
            value = table.get((i, n))
            if value is None or not np.isfinite(value):
                raise AuditError(f"table entry ({i},{n}) missing or not finite")

    po_witness = None
    for n in range(1, n_top + 1):
        for i in range(1, n + 1):
            if not table[(i, n)] > 0.0:
                po_witness = {"i": i, "n": n, "reward": table[(i, n)]}
                break
        if po_witness:
            break

    sp1_witness = None
    for n in range(1, n_top):
        for i in range(1, n + 1):
            lhs = table[(i, n)]
            rhs = table[(i, n + 1)] + table[(i + 1, n + 1)]
            scale = max(1.0, abs(lhs), abs(rhs))
            if lhs < rhs - EQ_TOL * scale:
                sp1_witness = {"i": i, "n": n, "x": lhs, "split_sum": rhs}
                break
        if sp1_witness:
            break

    cp2_witness = None
    for n in range(1, n_top - 1):
        for i in range(1, n + 1):
            lhs = table[(i, n)]
            rhs = table[(i, n + 2)] + table[(i + 1, n + 2)] + table[(i + 2, n + 2)]
            scale = max(1.0, abs(lhs), abs(rhs))
            if lhs > rhs + EQ_TOL * scale:
                cp2_witness = {"i": i, "n": n, "x": lhs, "merge_sum": rhs}
                break
        if cp2_witness:
            break

    failed = [name for name, wit in (("po", po_witness), ("sp_m1", sp1_witness),
                                     ("cp_m2", cp2_witness)) if wit]
    details = {
        "po": "fail" if po_witness else "pass",
        "sp_m1": "fail" if sp1_witness else "pass",
        "cp_m2": "fail" if cp2_witness else "pass",
        "failed_properties": failed,
        "certificate": ("joint satisfaction chains the split bound twice "
                        "against the merge bound and forces x(i+1, n+2) <= 0, "
                        "contradicting strict positivity"),
    }
    if failed:
        return PropertyReport("impossibility", "pass",
                              domain={"n_max": n_top}, details=details)
    witness = {"po": "holds", "sp_m1": "holds", "cp_m2": "holds",
               "note": "table claims all three; positivity must be broken"}
    return PropertyReport("impossibility", "fail", witness=witness,
                          domain={"n_max": n_top}, details=details)


# ---------------------------------------------------------------------------
# Tree-level checks: exact tie expectations, deviations, coalitions
# ---------------------------------------------------------------------------

class _DeviationEngine:
    """Exhaustive deviation evaluation on one (tree, spec) pair.

    Expected rewards are exact: tied shortest paths are enumerated and each
    carries equal probability. Reported profiles are memoized by their
    non-truthful part, which collapses the overlap between coalitions.
    """

    def __init__(self, tree: QueryTree, spec: MechanismSpec):
        self.tree = tree
        self.spec = spec
        self.root = tree.root
        self.parent = tree.parent
        self.truth = {n: (tree.resp[n], tree.children[n])
                      for n in tree.nodes}
        self._memo: dict[frozenset, dict[int, float]] = {}
        self._x: dict[tuple[int, int], float] = {}

    def reward(self, i: int, n: int) -> float:
        key = (i, n)
        if key not in self._x:
            self._x[key] = position_reward(i, n, self.spec)
        return self._x[key]

    def options(self, agent: int) -> list[tuple[bool, tuple[int, ...]]]:
        """All reports an agent can make, truthful first. An answer can be
        withheld but not invented; children can be pruned but not added."""
        true_resp, true_kids = self.truth[agent]
        resp_choices = (true_resp, False) if true_resp else (False,)
        subsets = [tuple(combo)
                   for r in range(len(true_kids), -1, -1)
                   for combo in itertools.combinations(true_kids, r)]
        return [(resp, kids) for resp in resp_choices for kids in subsets]

    def expected(self, overrides: Mapping[int, tuple[bool, tuple[int, ...]]]
                 ) -> dict[int, float]:
        """Expected reward per agent under the given deviations (everyone
        else truthful); agents off every tied path are absent (reward 0)."""
        key = frozenset(overrides.items())
        cached = self._memo.get(key)
        if cached is not None:
            return cached
        truth = self.truth
        frontier = [self.root]
        depth = 0
        tied: list[int] = []
        while frontier:
            tied = sorted(
                node for node in frontier
                if node != self.root
                and (overrides[node][0] if node in overrides
                     else truth[node][0]))
            if tied:
                break
            nxt = []
            for node in frontier:
                kids = (overrides[node][1] if node in overrides
                        else truth[node][1])
                nxt.extend(kids)
            frontier = nxt
            depth += 1
        result: dict[int, float] = {}
        if tied:
            share = 1.0 / len(tied)
            for solver in tied:
                node, pos = solver, depth
                while node != self.root:
                    result[node] = result.get(node, 0.0) + \
                        share * self.reward(pos, depth)
                    node = self.parent[node]
                    pos -= 1
        self._memo[key] = result
        return result

    def on_path_agents(self) -> list[int]:
        paths = tied_shortest_paths(self.tree)
        return sorted({a for p in paths for a in p.agents[1:]})


def expected_rewards(tree: QueryTree, spec: MechanismSpec) -> dict[int, float]:
    """Truthful expected reward per agent, exact over tie-breaks."""
    return dict(_DeviationEngine(tree, spec).expected({}))


def check_ic(tree: QueryTree, spec: MechanismSpec, rng_seed: int = 0,
             size_cap: int = DEFAULT_TREE_CAP) -> PropertyReport:
    """No on-path agent gains by withholding its answer or pruning invites.

    Every unilateral deviation of every agent on a tied shortest path is
    enumerated against the truthful profile; comparisons use exact expected
    rewards, so the verdict does not depend on the seed (it is recorded for
    witness replay through ``allocate``).
    """
    if len(tree.nodes) > size_cap:
        raise AuditError(f"tree has {len(tree.nodes)} nodes; IC enumeration "
                         f"is capped at {size_cap}")
    engine = _DeviationEngine(tree, spec)
    baseline = engine.expected({})
    agents = engine.on_path_agents()
    tol = EQ_TOL * spec.budget
    deviations = 0
    for agent in agents:
        truthful = engine.truth[agent]
        for option in engine.options(agent):
            if option == truthful:
                continue
            deviations += 1
            payoff = engine.expected({agent: option}).get(agent, 0.0)
            if payoff > baseline.get(agent, 0.0) + tol:
                return PropertyReport(
                    "ic", "fail",
                    witness={"agent": agent,
                             "report": {"resp": option[0],
                                        "children": list(option[1])},
                             "truthful_reward": baseline.get(agent, 0.0),
                             "deviant_reward": payoff},
                    domain={"tree_nodes": len(tree.nodes), "seed": rng_seed},
                    details={"on_path_agents": agents})
    return PropertyReport(
        "ic", "pass",
        domain={"tree_nodes": len(tree.nodes), "seed": rng_seed},
        details={"on_path_agents": agents, "deviations_checked": deviations})


def check_core(tree: QueryTree, spec: MechanismSpec,
               coalition_cap: int = DEFAULT_COALITION_CAP) -> PropertyReport:
    """No coalition has a joint deviation every member strictly prefers.

    Candidate coalitions are all non-empty agent subsets; for each, every
    combination of member reports (others truthful) is evaluated in exact
    expectation. A blocking witness names the coalition, the deviation, and
    both payoff vectors. Singleton coalitions reduce to the IC check.
    """
    if len(tree.nodes) > coalition_cap:
        raise AuditError(f"tree has {len(tree.nodes)} nodes; coalition "
                         f"enumeration is capped at {coalition_cap}")
    engine = _DeviationEngine(tree, spec)
    baseline = engine.expected({})
    agents = sorted(tree.agents)
    tol = EQ_TOL * spec.budget
    option_lists = {a: engine.options(a) for a in agents}
    coalitions = 0
    for size in range(1, len(agents) + 1):
        for coalition in itertools.combinations(agents, size):
            coalitions += 1
            for profile in itertools.product(
                    *(option_lists[a] for a in coalition)):
                overrides = {a: opt for a, opt in zip(coalition, profile)
                             if opt != engine.truth[a]}
                if not overrides:
                    continue
                payoffs = engine.expected(overrides)
                if all(payoffs.get(a, 0.0) > baseline.get(a, 0.0) + tol
                       for a in coalition):
                    return PropertyReport(
                        "core", "fail",
                        witness={
                            "coalition": list(coalition),
                            "deviation": {
                                a: {"resp": o[0], "children": list(o[1])}
                                for a, o in overrides.items()},
                            "truthful": {a: baseline.get(a, 0.0)
                                         for a in coalition},
                            "deviant": {a: payoffs.get(a, 0.0)
                                        for a in coalition}},
                        domain={"tree_nodes": len(tree.nodes)},
                        details={"coalitions_checked": coalitions})
    return PropertyReport(
        "core", "pass", domain={"tree_nodes": len(tree.nodes)},
        details={"coalitions_checked": coalitions})


# ---------------------------------------------------------------------------
# Witness replay
# ---------------------------------------------------------------------------

def replay_witness(report: PropertyReport, spec: Optional[MechanismSpec] = None,
                   tree: Optional[QueryTree] = None) -> bool:
    """Recompute a fail witness through the original operation.

    True when the replay reproduces the recorded numbers exactly and still
    constitutes a violation. Pass verdicts replay trivially.
    """
    if report.verdict == "pass":
        return True
    w = report.witness
    if w is None:
        return False
    prop = report.property
    if prop == "po":
        x = position_reward(w["i"], w["n"], spec)
        return x == w["reward"] and not x > 0.0
    if prop == "bb":
        total = rewards_for_length(w["n"], spec).total
        return total == w["total"] and total > spec.budget * (1.0 + EQ_TOL)
    if prop == "split":
        ratio = (position_reward(w["i"], w["n"], spec)
                 / position_reward(w["i"] + 1, w["n"], spec))
        return ratio == w["ratio"] and ratio < w["rho_expected"] * (1.0 - EQ_TOL)
    if prop == "sp":
        out = adversary.sybil_gain(spec, w["i"], w["n"], w["lambda"])
        return (out.reward_before == w["reward_before"]
                and out.reward_after == w["reward_after"] and out.profitable)
    if prop == "cp":
        out = adversary.collusion_gain(spec, w["i"], w["n_merged"], w["gamma"])
        return (out.reward_before == w["reward_before"]
                and out.reward_after == w["reward_after"] and out.profitable)
    if prop == "ic":
        engine = _DeviationEngine(tree, spec)
        baseline = engine.expected({}).get(w["agent"], 0.0)
        option = (w["report"]["resp"], tuple(w["report"]["children"]))
        payoff = engine.expected({w["agent"]: option}).get(w["agent"], 0.0)
        return (baseline == w["truthful_reward"]
                and payoff == w["deviant_reward"] and payoff > baseline)
    if prop == "core":
        engine = _DeviationEngine(tree, spec)
        baseline = engine.expected({})
        overrides = {int(a): (rep["resp"], tuple(rep["children"]))
                     for a, rep in w["deviation"].items()}
        payoffs = engine.expected(overrides)
        for a in w["coalition"]:
            if baseline.get(a, 0.0) != w["truthful"][a]:
                return False
            if payoffs.get(a, 0.0) != w["deviant"][a]:
                return False
            if not payoffs.get(a, 0.0) > baseline.get(a, 0.0):
                return False
        return True
    return False
