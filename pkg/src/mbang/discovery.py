"""Recovering multidirected edges: first-stage adapters and the gated clique search.

The pipeline takes observations Y, a first stage supplying the direct-effects
estimate and the bidirected pair structure, removes the direct effects
(X = Y - B^T Y), and then merges bidirected pairs into multidirected edges by
running a Bron-Kerbosch recursion whose every extension is gated on a nonzero
higher-order cumulant of X.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .cumulants import (
    MAX_ORDER,
    MomentTable,
    cumulant_from_moments,
    population_cumulant_entry,
    source_cumulants,
)
from .errors import SchemaError, ValidationError
from .graphs import BidirectedGraph, MixedGraph, bidirected_subdivision
from .sem import (
    Dataset,
    LsemSpec,
    center_rows,
    dedirect,
    extended_total_effects,
    standardize_rows,
)

EXACT_EPS = 1e-9

_ZERO_TEST_MODES = ("threshold", "exact")
_RELAXATION_VARIANTS = ("listing", "prose")


@dataclass(frozen=True)
class DiscoveryConfig:
    """Knobs for the merge stage.

    ``cumulant_tolerance`` is the nonzero-test threshold on (standardized)
    sample cumulants.  ``zero_test_mode='exact'`` replaces it with 1e-9, the
    right scale for population-oracle runs.  The relaxed test also accepts an
    order-(k+2) entry with one index repeated; the ``listing`` variant repeats
    a clique member, the ``prose`` variant may also repeat the candidate.
    """

    cumulant_tolerance: float = 0.05
    standardize: bool = True
    relaxed_test: bool = True
    zero_test_mode: str = "threshold"
    relaxation_variant: str = "listing"

    def __post_init__(self):
        if not np.isfinite(self.cumulant_tolerance) or self.cumulant_tolerance < 0:
            raise ValidationError("cumulant tolerance must be finite and >= 0")
        if self.zero_test_mode not in _ZERO_TEST_MODES:
            raise ValidationError(f"zero_test_mode must be one of {_ZERO_TEST_MODES}")
        if self.relaxation_variant not in _RELAXATION_VARIANTS:
            raise ValidationError(f"relaxation_variant must be one of {_RELAXATION_VARIANTS}")

    @property
    def threshold(self) -> float:
        return EXACT_EPS if self.zero_test_mode == "exact" else self.cumulant_tolerance

    def to_json_dict(self) -> dict:
        return {
            "cumulant_tolerance": self.cumulant_tolerance,
            "standardize": self.standardize,
            "relaxed_test": self.relaxed_test,
            "zero_test_mode": self.zero_test_mode,
            "relaxation_variant": self.relaxation_variant,
        }


@dataclass(frozen=True)
class FirstStageResult:
    """Output of the first stage: effects estimate plus pair-level structure."""

    B_hat: np.ndarray
    directed: frozenset[tuple[int, int]]
    bidirected: BidirectedGraph

    def __post_init__(self):
        B = np.asarray(self.B_hat, dtype=float)
        p = self.bidirected.p
        if B.shape != (p, p):
            raise ValidationError(f"B_hat must be {p}x{p}, got {B.shape}")
        object.__setattr__(self, "B_hat", B)
        object.__setattr__(
            self, "directed", frozenset((int(i), int(j)) for i, j in self.directed)
        )
        for i, j in self.directed:
            if not (1 <= i <= p and 1 <= j <= p) or i == j:
                raise ValidationError(f"directed edge ({i}, {j}) invalid for p={p}")
        support = self.directed
        for i0, j0 in np.argwhere(B != 0.0):
            if (int(i0) + 1, int(j0) + 1) not in support:
                raise ValidationError(
                    f"B_hat[{i0 + 1},{j0 + 1}] nonzero but edge {i0 + 1}->{j0 + 1} absent"
                )

    @property
    def p(self) -> int:
        return self.bidirected.p

    def bows(self) -> list[tuple[int, int]]:
        return sorted(
            (i, j) for i, j in self.directed if frozenset((i, j)) in self.bidirected.pairs
        )


def oracle_first_stage(spec: LsemSpec, perturbation: float = 0.0, seed=None) -> FirstStageResult:
    """Ground-truth stand-in for the external first stage.

    Returns the true effects matrix (optionally with additive noise of the
    given magnitude on supported entries) and the bidirected subdivision of
    the true multidirected edges.
    """
    B_hat = spec.B.copy()
    if perturbation:
        rng = np.random.default_rng(seed)
        for i, j in sorted(spec.graph.directed):
            B_hat[i - 1, j - 1] += rng.uniform(-perturbation, perturbation)
    return FirstStageResult(
        B_hat=B_hat,
        directed=spec.graph.directed,
        bidirected=bidirected_subdivision(spec.graph),
    )


def first_stage_from_json_dict(obj, strict: bool = True) -> FirstStageResult:
    """Parse externally computed first-stage output.

    Schema: {"p": int, "directed": [[i,j],...], "bidirected": [[i,j],...],
    "B": [[...],...]}.  A bow (directed edge whose endpoints are also a
    bidirected pair) raises in strict mode and warns otherwise.
    """
    if not isinstance(obj, dict):
        raise SchemaError("first-stage document must be a JSON object")
    try:
        p = int(obj["p"])
        directed = frozenset((int(i), int(j)) for i, j in obj.get("directed", []))
        pairs = frozenset(frozenset((int(i), int(j))) for i, j in obj.get("bidirected", []))
        B = np.asarray(obj["B"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed first-stage document: {exc}") from exc
    try:
        result = FirstStageResult(B, directed, BidirectedGraph(p, pairs))
    except ValidationError as exc:
        raise SchemaError(str(exc)) from exc
    bows = result.bows()
    if bows:
        if strict:
            raise SchemaError(f"first-stage output contains bows {bows}")
        warnings.warn(f"first-stage output contains bows {bows}", stacklevel=2)
    return result


def load_first_stage(path, strict: bool = True) -> FirstStageResult:
    """Read and validate a first-stage JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read first-stage file {path}: {exc}") from exc
    return first_stage_from_json_dict(obj, strict=strict)


class SampleCumulants:
    """Lazily computed plug-in cumulants of a fixed data matrix.

    Moments and cumulant entries are memoized per sorted index; the recursion
    only ever touches indices inside bidirected cliques, so nothing close to a
    full high-order tensor is materialized.
    """

    def __init__(self, data):
        mat = data.values if isinstance(data, Dataset) else np.asarray(data, dtype=float)
        self._rows = mat - mat.mean(axis=1, keepdims=True)
        self._moments: dict[tuple[int, ...], float] = {}
        self._entries: dict[tuple[int, ...], float] = {}
        self._table = _LazyMomentTable(self)

    def _moment(self, key: tuple[int, ...]) -> float:
        try:
            return self._moments[key]
        except KeyError:
            prod = self._rows[key[0] - 1].copy()
            for v in key[1:]:
                prod *= self._rows[v - 1]
            value = float(prod.mean())
            self._moments[key] = value
            return value

    def entry(self, idx) -> float:
        key = tuple(sorted(int(v) for v in idx))
        if not 1 <= len(key) <= MAX_ORDER:
            raise ValidationError(f"cumulant order must be in 1..{MAX_ORDER}, got {len(key)}")
        try:
            return self._entries[key]
        except KeyError:
            value = cumulant_from_moments(self._table, key)
            self._entries[key] = value
            return value


class _LazyMomentTable(MomentTable):
    def __init__(self, owner: SampleCumulants):
        super().__init__({})
        self._owner = owner

    def get(self, idx) -> float:
        return self._owner._moment(tuple(sorted(int(v) for v in idx)))


class PopulationCumulants:
    """Exact model cumulants served entry by entry."""

    def __init__(self, W: np.ndarray, sources):
        self._W = W
        self._sources = tuple(sources)
        self._kappas: dict[int, np.ndarray] = {}

    @classmethod
    def from_spec(cls, spec: LsemSpec, dedirected: bool = True) -> "PopulationCumulants":
        """Oracle for a model; with ``dedirected`` the direct effects are zeroed
        first, matching the X = Y - B^T Y step of the pipeline."""
        if dedirected:
            graph = MixedGraph(spec.graph.p, frozenset(), spec.graph.multi)
            spec = LsemSpec(graph, np.zeros_like(spec.B), spec.noise, spec.hidden)
        W, sources = extended_total_effects(spec)
        return cls(W, sources)

    def entry(self, idx) -> float:
        k = len(tuple(idx))
        if not 1 <= k <= MAX_ORDER:
            raise ValidationError(f"cumulant order must be in 1..{MAX_ORDER}, got {k}")
        if k not in self._kappas:
            self._kappas[k] = source_cumulants(self._sources, k)
        return population_cumulant_entry(self._W, self._kappas[k], idx)


def cumulant_test(provider, R, v: int, cfg: DiscoveryConfig):
    """Gate for extending the ordered clique R by candidate v.

    Passes when |C^(k+1)_{R,v}| exceeds the threshold, or (relaxed) when some
    repeat index j gives |C^(k+2)_{R,v,j}| above it.  An empty R passes
    unconditionally: the order-1 cumulant of centered data carries no signal,
    so the first vertex is always admitted.

    Returns (passed, evidence) where evidence names the entry that fired.
    """
    R = tuple(R)
    if not R:
        return True, {"vertex": int(v), "kind": "root", "order": 0, "index": [], "value": None}
    thr = cfg.threshold
    idx = R + (int(v),)
    value = provider.entry(idx)
    if abs(value) > thr:
        return True, {
            "vertex": int(v),
            "kind": "primary",
            "order": len(idx),
            "index": sorted(idx),
            "value": value,
        }
    if cfg.relaxed_test:
        pool = R if cfg.relaxation_variant == "listing" else idx
        for j in pool:
            value2 = provider.entry(idx + (j,))
            if abs(value2) > thr:
                return True, {
                    "vertex": int(v),
                    "kind": "relaxed",
                    "order": len(idx) + 1,
                    "index": sorted(idx + (j,)),
                    "value": value2,
                }
    return False, None


def find_multidirected(provider, bg: BidirectedGraph, cfg: DiscoveryConfig | None = None):
    """Cumulant-gated Bron-Kerbosch over the bidirected pairs.

    Exactly the pivotless recursion: a node reports its clique R (when
    |R| >= 2) only if both the candidate set P and the excluded set Q are
    empty on entry; each v in P with a nonempty bidirected neighborhood is
    recursed into only when :func:`cumulant_test` passes, and is then moved
    from P to Q whether or not it passed.  Iteration order over P is sorted,
    so results are deterministic.

    Returns (edges, diagnostics): the reported vertex sets, deduplicated, and
    one record per reported edge listing the cumulant entries that justified
    each admission along its path.
    """
    cfg = cfg or DiscoveryConfig()
    adj = bg.adjacency
    reported: dict[frozenset[int], list[dict]] = {}

    def walk(R: tuple[int, ...], P: set[int], Q: set[int], chain: tuple[dict, ...]):
        if not P and not Q and len(R) >= 2:
            reported.setdefault(frozenset(R), list(chain))
            return
        for v in sorted(P):
            if adj[v]:
                passed, evidence = cumulant_test(provider, R, v, cfg)
                if passed:
                    walk(R + (v,), P & adj[v], Q & adj[v], chain + (evidence,))
            P = P - {v}
            Q = Q | {v}

    walk((), set(range(1, bg.p + 1)), set(), ())
    edges = set(reported)
    diagnostics = [
        {"edge": sorted(e), "source": "merged", "tests": reported[e]}
        for e in sorted(edges, key=lambda s: tuple(sorted(s)))
    ]
    return edges, diagnostics


@dataclass(frozen=True)
class DiscoveryResult:
    """Recovered graph, the effects estimate used, and per-merge diagnostics."""

    graph: MixedGraph
    B_hat: np.ndarray
    config: DiscoveryConfig
    diagnostics: tuple[dict, ...] = ()

    def to_json_dict(self) -> dict:
        from .graphs import graph_to_json_dict

        out = graph_to_json_dict(self.graph)
        out["B_hat"] = [[float(x) for x in row] for row in self.B_hat]
        out["config"] = self.config.to_json_dict()
        out["diagnostics"] = list(self.diagnostics)
        return out


def _assemble(stage: FirstStageResult, edges, diagnostics, cfg, B_hat) -> DiscoveryResult:
    # Bidirected pairs the recursion left uncovered stay in the output as
    # 2-directed edges; dropping them would lose structure the first stage
    # already established.
    multi = set(edges)
    diags = list(diagnostics)
    for pair in sorted(stage.bidirected.pairs, key=lambda s: tuple(sorted(s))):
        if not any(pair <= m for m in edges):
            multi.add(pair)
            diags.append({"edge": sorted(pair), "source": "retained", "tests": []})
    graph = MixedGraph(stage.p, stage.directed, frozenset(multi))
    return DiscoveryResult(graph=graph, B_hat=B_hat, config=cfg, diagnostics=tuple(diags))


def run_mbang(Y: Dataset, stage, cfg: DiscoveryConfig | None = None) -> DiscoveryResult:
    """Full pipeline on observations: first stage, dedirection, merge.

    ``stage`` is a FirstStageResult or a callable producing one from Y.
    """
    cfg = cfg or DiscoveryConfig()
    result = stage(Y) if callable(stage) else stage
    if result.p != Y.p:
        raise ValidationError(
            f"first stage is for p={result.p} but data has {Y.p} rows"
        )
    X = dedirect(Y, result.B_hat)
    X = center_rows(X)
    if cfg.standardize:
        X = standardize_rows(X)
    provider = SampleCumulants(X)
    edges, diagnostics = find_multidirected(provider, result.bidirected, cfg)
    return _assemble(result, edges, diagnostics, cfg, result.B_hat)


def run_mbang_population(spec: LsemSpec, cfg: DiscoveryConfig | None = None) -> DiscoveryResult:
    """Pipeline driven by exact population cumulants and the oracle first stage.

    The zero test is forced to exact mode; standardization does not apply
    (scaling never moves a population entry onto or off zero).
    """
    cfg = cfg or DiscoveryConfig(zero_test_mode="exact", standardize=False)
    if cfg.zero_test_mode != "exact":
        cfg = replace(cfg, zero_test_mode="exact")
    stage = oracle_first_stage(spec)
    provider = PopulationCumulants.from_spec(spec, dedirected=True)
    edges, diagnostics = find_multidirected(provider, stage.bidirected, cfg)
    return _assemble(stage, edges, diagnostics, cfg, stage.B_hat)
