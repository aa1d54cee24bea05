"""Obligation graphs: pooled intents, aggregation, net positions, flow networks.

The pipeline is pool -> aggregate() -> ObligationGraph -> build_network() ->
FlowNetwork. Aggregation is forgiving (bad intents are excluded and reported);
network lowering is strict (a tender that cannot be priced is a build error).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from .errors import GraphBuildError, NetworkBuildError
from .model import (
    Acceptance,
    AcceptanceKind,
    AgentId,
    Intent,
    KeyRegistry,
    Ledger,
    Obligation,
    SignatureScheme,
    DEFAULT_SCHEME,
    Tender,
    TenderKind,
    add_amounts,
    as_amount,
    verify_ascertainment,
)

# Sorts None due dates after every real ISO date.
_NO_DATE = "9999-99-99"

# Prefix for synthesized infinite acceptances of the default liquidity source.
DEFAULT_ACCEPT_PREFIX = "accept:default:"


class EpochPool:
    """All intents submitted for one clearing epoch, plus epoch configuration.

    ``currencies`` maps asset codes to their issuing liquidity sources. When
    ``default_source`` is set, every non-issuer agent implicitly holds an
    unlimited deposit acceptance of that source in the unit of account.
    """

    def __init__(
        self,
        unit: str,
        currencies: dict[str, AgentId] | None = None,
        default_source: AgentId | None = None,
        registry: KeyRegistry | None = None,
        scheme: SignatureScheme = DEFAULT_SCHEME,
    ) -> None:
        self.unit = unit
        self.currencies: dict[str, AgentId] = dict(currencies or {})
        if default_source is not None:
            registered = self.currencies.setdefault(unit, default_source)
            if registered != default_source:
                raise GraphBuildError(
                    f"default source {default_source} is not the issuer of {unit}"
                )
        self.default_source = default_source
        issuers: dict[AgentId, str] = {}
        for code, issuer in self.currencies.items():
            if issuer in issuers:
                raise GraphBuildError(
                    f"{issuer} cannot issue both {issuers[issuer]} and {code}"
                )
            issuers[issuer] = code
        self._issuer_assets = issuers
        self.registry = registry or KeyRegistry()
        self.scheme = scheme
        self.obligations: dict[str, Obligation] = {}
        self.acceptances: dict[str, Acceptance] = {}
        self.tenders: dict[str, Tender] = {}
        self.preverified: set[str] = set()

    def issuer_of(self, asset: str) -> AgentId | None:
        return self.currencies.get(asset)

    def asset_of(self, issuer: AgentId) -> str | None:
        return self._issuer_assets.get(issuer)

    def intent_ids(self) -> set[str]:
        return set(self.obligations) | set(self.acceptances) | set(self.tenders)

    def add(self, intent: Intent, preverified: bool = False) -> None:
        """Admit one intent; duplicate ids are an error."""
        if intent.id in self.intent_ids():
            raise GraphBuildError(f"duplicate intent id {intent.id}")
        if isinstance(intent, Obligation):
            self.obligations[intent.id] = intent
        elif isinstance(intent, Acceptance):
            self.acceptances[intent.id] = intent
        elif isinstance(intent, Tender):
            self.tenders[intent.id] = intent
        else:
            raise GraphBuildError(f"not an intent: {intent!r}")
        if preverified:
            self.preverified.add(intent.id)

    def get(self, intent_id: str) -> Intent | None:
        return (
            self.obligations.get(intent_id)
            or self.acceptances.get(intent_id)
            or self.tenders.get(intent_id)
        )

    def is_ascertained(self, intent: Intent) -> bool:
        if intent.id in self.preverified:
            return True
        return verify_ascertainment(intent, self.registry, self.scheme)


@dataclass(frozen=True)
class AggregatedEdge:
    """All open obligations between one ordered (debtor, creditor) pair."""

    debtor: AgentId
    creditor: AgentId
    amount: int
    obligations: tuple[str, ...]  # contributing ids, oldest due date first, then id


@dataclass(frozen=True)
class TenderEdge:
    """A tender resolved against the epoch's currency registry.

    For assignments the liquidity enters from the issuer itself and
    ``facility`` is None; for overdrafts ``facility`` is the lender whose
    matched repayment acceptances back the draw.
    """

    tender_id: str
    sender: AgentId
    issuer: AgentId
    currency: str
    kind: TenderKind
    max_amount: int
    price: Fraction | None  # None = asset is the unit of account
    facility: AgentId | None = None
    matched_acceptances: tuple[str, ...] = ()
    limit_total: int | None = None


@dataclass(frozen=True)
class AcceptanceEdge:
    """A deposit acceptance (explicit or synthesized default) ready for routing."""

    edge_id: str
    origin: AgentId
    issuer: AgentId
    currency: str
    limit: int | None  # None = unlimited
    implicit: bool = False


@dataclass
class ObligationGraph:
    """Frozen per-epoch view: aggregated debt plus priced liquidity edges."""

    unit: str
    nodes: tuple[AgentId, ...]
    edges: dict[tuple[AgentId, AgentId], AggregatedEdge]
    tender_edges: tuple[TenderEdge, ...]
    acceptance_edges: tuple[AcceptanceEdge, ...]
    pool: EpochPool
    excluded: tuple[tuple[str, str], ...] = ()

    def total_debt(self) -> int:
        return add_amounts(*(e.amount for e in self.edges.values()))


@dataclass(frozen=True)
class NetPosition:
    agent: AgentId
    payables: int
    receivables: int

    @property
    def net(self) -> int:
        return self.receivables - self.payables


def aggregate(pool: EpochPool) -> ObligationGraph:
    """Fold a pool into an obligation graph.

    Unascertained or inconsistent intents are excluded and reported in
    ``graph.excluded`` rather than failing the epoch.
    """
    excluded: list[tuple[str, str]] = []
    nodes: set[AgentId] = set()

    by_pair: dict[tuple[AgentId, AgentId], list[Obligation]] = {}
    for ob in sorted(pool.obligations.values(), key=lambda o: o.id):
        if not pool.is_ascertained(ob):
            excluded.append((ob.id, "ascertainment failed"))
            continue
        if ob.unit != pool.unit:
            excluded.append((ob.id, f"unit {ob.unit} is not the epoch unit {pool.unit}"))
            continue
        by_pair.setdefault((ob.debtor, ob.creditor), []).append(ob)
        nodes.update((ob.debtor, ob.creditor))

    edges: dict[tuple[AgentId, AgentId], AggregatedEdge] = {}
    for pair, obs in sorted(by_pair.items()):
        obs.sort(key=lambda o: (o.due_date or _NO_DATE, o.id))
        edges[pair] = AggregatedEdge(
            debtor=pair[0],
            creditor=pair[1],
            amount=add_amounts(*(o.amount for o in obs)),
            obligations=tuple(o.id for o in obs),
        )

    deposit_accepts: list[Acceptance] = []
    repayment_accepts: list[Acceptance] = []
    for acc in sorted(pool.acceptances.values(), key=lambda a: a.id):
        if not pool.is_ascertained(acc):
            excluded.append((acc.id, "ascertainment failed"))
            continue
        if acc.kind is AcceptanceKind.DEPOSIT:
            issuer = pool.issuer_of(acc.currency)
            if issuer is None:
                excluded.append((acc.id, f"unknown currency {acc.currency}"))
                continue
            if acc.target != issuer:
                excluded.append(
                    (acc.id, f"target {acc.target} does not issue {acc.currency}")
                )
                continue
            deposit_accepts.append(acc)
            nodes.add(acc.origin)
        else:
            repayment_accepts.append(acc)
            nodes.update((acc.origin, acc.target))

    tender_edges: list[TenderEdge] = []
    for tender in sorted(pool.tenders.values(), key=lambda t: t.id):
        if not pool.is_ascertained(tender):
            excluded.append((tender.id, "ascertainment failed"))
            continue
        if tender.kind is TenderKind.ASSIGNMENT:
            currency = pool.asset_of(tender.source)
            if currency is None:
                excluded.append(
                    (tender.id, f"source {tender.source} is not a liquidity source")
                )
                continue
            tender_edges.append(
                TenderEdge(
                    tender_id=tender.id,
                    sender=tender.sender,
                    issuer=tender.source,
                    currency=currency,
                    kind=tender.kind,
                    max_amount=tender.max_amount,
                    price=None if currency == pool.unit else tender.price,
                )
            )
            nodes.add(tender.sender)
        else:
            matches = [
                a
                for a in repayment_accepts
                if a.origin == tender.source and a.target == tender.sender
            ]
            if not matches:
                excluded.append(
                    (tender.id, "overdraft tender has no matching repayment acceptance")
                )
                continue
            currencies = {a.currency for a in matches}
            if len(currencies) > 1:
                excluded.append(
                    (tender.id, "matching repayment acceptances disagree on currency")
                )
                continue
            currency = currencies.pop()
            issuer = pool.issuer_of(currency)
            if issuer is None:
                excluded.append((tender.id, f"unknown currency {currency}"))
                continue
            matches.sort(key=lambda a: (a.repayment_due or _NO_DATE, a.id))
            tender_edges.append(
                TenderEdge(
                    tender_id=tender.id,
                    sender=tender.sender,
                    issuer=issuer,
                    currency=currency,
                    kind=tender.kind,
                    max_amount=tender.max_amount,
                    price=None if currency == pool.unit else tender.price,
                    facility=tender.source,
                    matched_acceptances=tuple(a.id for a in matches),
                    limit_total=add_amounts(*(a.limit or 0 for a in matches)),
                )
            )
            nodes.add(tender.sender)

    acceptance_edges: list[AcceptanceEdge] = [
        AcceptanceEdge(
            edge_id=acc.id,
            origin=acc.origin,
            issuer=pool.issuer_of(acc.currency) or acc.target,
            currency=acc.currency,
            limit=acc.limit,
        )
        for acc in deposit_accepts
    ]
    if pool.default_source is not None:
        issuer_agents = set(pool.currencies.values())
        for agent in sorted(nodes):
            if agent in issuer_agents:
                continue
            acceptance_edges.append(
                AcceptanceEdge(
                    edge_id=f"{DEFAULT_ACCEPT_PREFIX}{agent}",
                    origin=agent,
                    issuer=pool.default_source,
                    currency=pool.unit,
                    limit=None,
                    implicit=True,
                )
            )

    referenced_issuers = {e.issuer for e in tender_edges} | {
        e.issuer for e in acceptance_edges
    }
    nodes.update(referenced_issuers)
    nodes.update(e.facility for e in tender_edges if e.facility is not None)

    return ObligationGraph(
        unit=pool.unit,
        nodes=tuple(sorted(nodes)),
        edges=edges,
        tender_edges=tuple(sorted(tender_edges, key=lambda e: e.tender_id)),
        acceptance_edges=tuple(sorted(acceptance_edges, key=lambda e: e.edge_id)),
        pool=pool,
        excluded=tuple(excluded),
    )


def net_positions(g: ObligationGraph) -> dict[AgentId, NetPosition]:
    """Per-agent payables/receivables over obligation edges only."""
    payables: dict[AgentId, int] = {a: 0 for a in g.nodes}
    receivables: dict[AgentId, int] = {a: 0 for a in g.nodes}
    for (debtor, creditor), edge in g.edges.items():
        payables[debtor] = add_amounts(payables[debtor], edge.amount)
        receivables[creditor] = add_amounts(receivables[creditor], edge.amount)
    return {
        a: NetPosition(agent=a, payables=payables[a], receivables=receivables[a])
        for a in g.nodes
    }


def compute_nid(g: ObligationGraph) -> int:
    """Net internal debt: the minimum liquidity that can discharge all debt."""
    return sum(max(0, -p.net) for p in net_positions(g).values())


# --- flow network ------------------------------------------------------------


@dataclass(frozen=True)
class ObArc:
    tail: int
    head: int
    cap: int
    debtor: AgentId
    creditor: AgentId


@dataclass(frozen=True)
class TenderArc:
    node: int  # sender index
    cap: int   # unit-of-account minor units
    edge: TenderEdge


@dataclass(frozen=True)
class AcceptArc:
    node: int  # origin index
    cap: int | None  # None = unlimited
    edge: AcceptanceEdge


@dataclass(frozen=True)
class Stage:
    """One currency circuit: processed separately, in ascending code order."""

    currency: str
    issuer: AgentId
    tender_arcs: tuple[TenderArc, ...]
    accept_arcs: tuple[AcceptArc, ...]


@dataclass
class FlowNetwork:
    unit: str
    nodes: tuple[AgentId, ...]
    node_index: dict[AgentId, int]
    ob_arcs: tuple[ObArc, ...]
    stages: tuple[Stage, ...]
    budget: int | None
    graph: ObligationGraph


def floor_mul_price(amount: int, price: Fraction | None) -> int:
    """Convert a currency amount to unit-of-account units, flooring dust."""
    if price is None:
        return amount
    return int(amount * price)  # Fraction * int is exact; int() floors positives


def floor_div_price(amount_uoa: int, price: Fraction | None) -> int:
    """Convert a unit-of-account flow back to currency units, flooring dust.

    The floored remainder stays with the tenderer.
    """
    if price is None:
        return amount_uoa
    return int(Fraction(amount_uoa) / price)


def build_network(
    g: ObligationGraph,
    budget: int | None = None,
    ledger: Ledger | None = None,
    seed: int | None = None,
    *,
    clamp_payers: set[AgentId] | None = None,
) -> FlowNetwork:
    """Lower an obligation graph to the solver's flow network.

    Obligation arcs carry the aggregated amounts at unit cost -1; liquidity
    arcs carry converted unit-of-account capacities at cost 0, grouped into
    per-currency stages. When a ledger is given, tender capacities are
    clamped so the eventual transfers cannot overdraw the payer: assignments
    debit the sender's balance, overdrafts the facility's, and tenders
    debiting the same balance split it in tender-id order rather than each
    seeing the full amount. Issuers are exempt; they may issue. The clamp is
    conservative: a draw that exits at its own facility nets to nothing and
    needs no balance, but that is only known after routing. ``clamp_payers``
    narrows the clamp to the named payers; other tenders keep their declared
    capacity.

    ``seed`` deterministically permutes arc order, selecting among equally
    optimal solutions; without it, order is lexicographic.
    """
    if budget is not None:
        as_amount(budget)
    rng = random.Random(seed) if seed is not None else None

    firm_nodes: set[AgentId] = set()
    for debtor, creditor in g.edges:
        firm_nodes.update((debtor, creditor))
    firm_nodes.update(e.sender for e in g.tender_edges)
    firm_nodes.update(e.origin for e in g.acceptance_edges)
    nodes = tuple(sorted(firm_nodes))
    node_index = {a: i for i, a in enumerate(nodes)}

    ob_arcs = [
        ObArc(
            tail=node_index[edge.debtor],
            head=node_index[edge.creditor],
            cap=edge.amount,
            debtor=edge.debtor,
            creditor=edge.creditor,
        )
        for _, edge in sorted(g.edges.items())
    ]
    if rng is not None:
        rng.shuffle(ob_arcs)

    by_currency: dict[str, tuple[list[TenderArc], list[AcceptArc]]] = {}
    allocated: dict[tuple[AgentId, str], int] = {}

    def draw_balance(payer: AgentId, currency: str, want: int) -> int:
        pot = max(0, ledger.balance(payer, currency))
        used = allocated.get((payer, currency), 0)
        take = min(want, pot - used)
        if take <= 0:
            return 0
        allocated[(payer, currency)] = used + take
        return take

    for te in g.tender_edges:
        if te.price is None and te.currency != g.unit:
            raise NetworkBuildError(
                f"tender {te.tender_id} needs a price for {te.currency}"
            )
        if te.kind is TenderKind.ASSIGNMENT:
            avail = te.max_amount
            if (
                ledger is not None
                and te.sender != te.issuer
                and (clamp_payers is None or te.sender in clamp_payers)
            ):
                avail = draw_balance(te.sender, te.currency, avail)
            cap = floor_mul_price(avail, te.price)
        else:
            # Per-acceptance floors, not a floor of the sum: settlement must be
            # able to attribute the whole draw across the matched credit lines.
            matched_cap = sum(
                floor_mul_price(g.pool.acceptances[acc_id].limit or 0, te.price)
                for acc_id in te.matched_acceptances
            )
            cap = min(floor_mul_price(te.max_amount, te.price), matched_cap)
            if (
                ledger is not None
                and te.facility != te.issuer
                and (clamp_payers is None or te.facility in clamp_payers)
            ):
                want = floor_div_price(cap, te.price)
                if floor_mul_price(want, te.price) < cap:
                    want += 1
                taken = draw_balance(te.facility, te.currency, want)
                cap = min(cap, floor_mul_price(taken, te.price))
        by_currency.setdefault(te.currency, ([], []))[0].append(
            TenderArc(node=node_index[te.sender], cap=cap, edge=te)
        )

    # Finite foreign-currency limits convert at the lowest tender price of the
    # stage: any mix of tenders at or above that price cannot overfill the
    # limit in currency units.
    min_price: dict[str, Fraction] = {}
    for currency, (tender_arcs, _) in by_currency.items():
        prices = [a.edge.price for a in tender_arcs if a.edge.price is not None]
        if prices:
            min_price[currency] = min(prices)

    for ae in g.acceptance_edges:
        slot = by_currency.setdefault(ae.currency, ([], []))
        if ae.limit is None:
            cap: int | None = None
        elif ae.currency == g.unit:
            cap = ae.limit
        else:
            price = min_price.get(ae.currency)
            cap = 0 if price is None else floor_mul_price(ae.limit, price)
        slot[1].append(AcceptArc(node=node_index[ae.origin], cap=cap, edge=ae))

    stages = []
    for currency in sorted(by_currency):
        tender_arcs, accept_arcs = by_currency[currency]
        issuer = g.pool.issuer_of(currency)
        if issuer is None:
            # Unreachable after aggregate(), which excludes unknown currencies.
            raise NetworkBuildError(f"currency {currency} has no issuer")
        if rng is not None:
            rng.shuffle(tender_arcs)
            rng.shuffle(accept_arcs)
        stages.append(
            Stage(
                currency=currency,
                issuer=issuer,
                tender_arcs=tuple(tender_arcs),
                accept_arcs=tuple(accept_arcs),
            )
        )

    return FlowNetwork(
        unit=g.unit,
        nodes=nodes,
        node_index=node_index,
        ob_arcs=tuple(ob_arcs),
        stages=tuple(stages),
        budget=budget,
        graph=g,
    )


def dump_graph(g: ObligationGraph) -> str:
    """Debug dump, one edge per line; stable across runs for fixtures.

    Lines: ``unit <code>``, ``ob <debtor> <creditor> <amount>``,
    ``tender <id> <sender> <issuer> <kind> <currency> <max> <price|->``,
    ``accept <edge-id> <origin> <issuer> <currency> <limit|inf>``.
    """
    lines = [f"unit {g.unit}"]
    for _, edge in sorted(g.edges.items()):
        lines.append(f"ob {edge.debtor} {edge.creditor} {edge.amount}")
    for te in g.tender_edges:
        price = "-" if te.price is None else str(te.price)
        lines.append(
            f"tender {te.tender_id} {te.sender} {te.issuer} {te.kind.value}"
            f" {te.currency} {te.max_amount} {price}"
        )
    for ae in g.acceptance_edges:
        limit = "inf" if ae.limit is None else str(ae.limit)
        lines.append(
            f"accept {ae.edge_id} {ae.origin} {ae.issuer} {ae.currency} {limit}"
        )
    return "\n".join(lines) + "\n"
