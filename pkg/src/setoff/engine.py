"""Batch clearing engine: epoch state machine over a plain-file store.

Store layout::

    store/
      config.json            unit, currencies, default source, quota
      keys.json              agent -> hex ascertainment key
      state.json             current epoch number and phase (open | frozen)
      ledger.json            balances and open obligations
      epochs/00000/
        pool.jsonl           submitted intents, one per line, append only
        flow.json            solved settlement flow
        report.json          epoch outcome
        applied.json         commit log, written before any state changes
        notices.csv          set-off notices

Every output is canonical JSON (sorted keys, compact separators, trailing
newline) or deterministic CSV, so replaying the same intents with the same
seed reproduces every file byte for byte.

``run`` writes the full outcome to ``applied.json`` first and only then
mutates ledger and state; a crash at any point either leaves the old state
intact or leaves a complete commit log that the next ``run`` replays. The
store has a single writer; concurrent readers see complete snapshots.
"""

from __future__ import annotations

import json
import os
import secrets
from pathlib import Path
from typing import Callable

from .errors import IntentError, QuotaExceeded, SetoffError, StateError
from .graph import DEFAULT_ACCEPT_PREFIX, EpochPool, aggregate, compute_nid
from .model import (
    Intent,
    KeyRegistry,
    Ledger,
    SettlementFlow,
    bound_party,
    flow_from_obj,
    flow_to_obj,
    intent_from_obj,
    intent_to_obj,
)
from .settle import NEW_OBLIGATION_PREFIX, apply_flow, notices_to_csv
from .solver import solve_settleable
from .validate import is_valid_flow

RESERVED_PREFIXES = (DEFAULT_ACCEPT_PREFIX, NEW_OBLIGATION_PREFIX)

PHASE_OPEN = "open"
PHASE_FROZEN = "frozen"


def canonical_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True) + "\n"


def _write_atomic(path: Path, data: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(data, encoding="utf-8")
    os.replace(tmp, path)


class ClearingEngine:
    """One clearing store: submit intents, freeze the epoch, run, report."""

    def __init__(self, store: str | Path) -> None:
        self.store = Path(store)
        config_path = self.store / "config.json"
        if not config_path.exists():
            raise StateError(f"{self.store} is not an initialized store")
        self.config = json.loads(config_path.read_text())
        self.registry = KeyRegistry()
        for agent, key_hex in json.loads((self.store / "keys.json").read_text()).items():
            self.registry.register(agent, bytes.fromhex(key_hex))
        state = json.loads((self.store / "state.json").read_text())
        self.epoch: int = state["epoch"]
        self.phase: str = state["phase"]
        self.ledger = Ledger.from_obj(json.loads((self.store / "ledger.json").read_text()))

    # --- store lifecycle ---------------------------------------------------

    @classmethod
    def init(
        cls,
        store: str | Path,
        unit: str,
        currencies: dict[str, str] | None = None,
        default_source: str | None = None,
        quota_per_agent: int | None = None,
        opening_balances: dict[str, dict[str, int]] | None = None,
    ) -> "ClearingEngine":
        """Create a fresh store; fails if one already exists there."""
        store = Path(store)
        if (store / "config.json").exists():
            raise StateError(f"{store} is already initialized")
        currencies = dict(currencies or {})
        if default_source is not None:
            registered = currencies.setdefault(unit, default_source)
            if registered != default_source:
                raise StateError(f"default source {default_source} does not issue {unit}")
        store.mkdir(parents=True, exist_ok=True)
        (store / "epochs").mkdir(exist_ok=True)
        _write_atomic(
            store / "config.json",
            canonical_dumps(
                {
                    "unit": unit,
                    "currencies": currencies,
                    "default_source": default_source,
                    "quota_per_agent": quota_per_agent,
                }
            ),
        )
        _write_atomic(store / "keys.json", canonical_dumps({}))
        _write_atomic(store / "state.json", canonical_dumps({"epoch": 0, "phase": PHASE_OPEN}))
        ledger = Ledger(balances=opening_balances or {})
        _write_atomic(store / "ledger.json", canonical_dumps(ledger.to_obj()))
        engine = cls(store)
        engine._epoch_dir(0).mkdir(parents=True, exist_ok=True)
        return engine

    def register_key(self, agent: str, key_hex: str | None = None) -> str:
        """Add (or rotate) an agent's ascertainment key; returns the hex key."""
        if key_hex is None:
            key_hex = secrets.token_hex(32)
        keys = json.loads((self.store / "keys.json").read_text())
        keys[agent] = key_hex
        _write_atomic(self.store / "keys.json", canonical_dumps(keys))
        self.registry.register(agent, bytes.fromhex(key_hex))
        return key_hex

    # --- paths and persistence ----------------------------------------------

    def _epoch_dir(self, epoch: int) -> Path:
        return self.store / "epochs" / f"{epoch:05d}"

    def _pool_path(self, epoch: int) -> Path:
        return self._epoch_dir(epoch) / "pool.jsonl"

    def _save_state(self) -> None:
        _write_atomic(
            self.store / "state.json",
            canonical_dumps({"epoch": self.epoch, "phase": self.phase}),
        )

    def _pool_lines(self, epoch: int) -> list[dict]:
        path = self._pool_path(epoch)
        if not path.exists():
            return []
        return [json.loads(line) for line in path.read_text().splitlines() if line]

    def _load_pool(self, epoch: int) -> EpochPool:
        pool = EpochPool(
            unit=self.config["unit"],
            currencies=self.config["currencies"],
            default_source=self.config["default_source"],
            registry=self.registry,
        )
        for obj in self._pool_lines(epoch):
            system = bool(obj.pop("system", False))
            pool.add(intent_from_obj(obj), preverified=system)
        return pool

    # --- intent intake -------------------------------------------------------

    def submit_intent(self, intent: Intent | dict) -> int:
        """Queue one intent; returns the epoch it will clear in.

        Intents submitted while the epoch is frozen go to the next epoch.
        A resubmitted id is accepted idempotently without changing the pool.
        """
        if isinstance(intent, dict):
            if "system" in intent:
                raise IntentError("the system marker is reserved")
            intent = intent_from_obj(intent)
        for prefix in RESERVED_PREFIXES:
            if intent.id.startswith(prefix):
                raise IntentError(f"intent id prefix {prefix!r} is reserved")
        target = self.epoch if self.phase == PHASE_OPEN else self.epoch + 1
        for epoch in (self.epoch, self.epoch + 1):
            for obj in self._pool_lines(epoch):
                if obj["id"] == intent.id:
                    return epoch
        quota = self.config.get("quota_per_agent")
        if quota is not None:
            party = bound_party(intent)
            held = sum(
                1
                for obj in self._pool_lines(target)
                if bound_party(intent_from_obj({k: v for k, v in obj.items() if k != "system"}))
                == party
            )
            if held >= quota:
                raise QuotaExceeded(f"{party} already holds {held} intents in epoch {target}")
        pool = self._load_pool(target)
        pool.add(intent)  # duplicate or malformed ids fail here
        if not pool.is_ascertained(intent):
            raise IntentError(f"intent {intent.id} is not ascertained")
        self._append_pool_line(target, intent_to_obj(intent))
        return target

    def submit_file(self, path: str | Path) -> dict[str, int]:
        """Submit a JSONL file of intents; returns {intent id: epoch}."""
        accepted: dict[str, int] = {}
        text = Path(path).read_text()
        for i, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IntentError(f"{path}:{i}: not valid JSON: {exc}") from exc
            try:
                accepted[obj.get("id", "?")] = self.submit_intent(obj)
            except SetoffError as exc:
                raise type(exc)(f"{path}:{i}: {exc}") from exc
        return accepted

    def _append_pool_line(self, epoch: int, obj: dict) -> None:
        self._epoch_dir(epoch).mkdir(parents=True, exist_ok=True)
        with open(self._pool_path(epoch), "a", encoding="utf-8") as fh:
            fh.write(json.dumps(obj, separators=(",", ":"), ensure_ascii=True) + "\n")

    def cancel_intent(self, intent_id: str) -> bool:
        """Withdraw a pooled intent; only allowed while the epoch is open."""
        if self.phase != PHASE_OPEN:
            raise StateError(f"epoch {self.epoch} is frozen; cancellation closed")
        lines = self._pool_lines(self.epoch)
        kept = [obj for obj in lines if obj["id"] != intent_id]
        if len(kept) == len(lines):
            return False
        body = "".join(json.dumps(o, separators=(",", ":"), ensure_ascii=True) + "\n" for o in kept)
        _write_atomic(self._pool_path(self.epoch), body)
        return True

    # --- epoch lifecycle -----------------------------------------------------

    def freeze(self) -> int:
        """Close the current epoch's pool; late intents queue for the next."""
        if self.phase != PHASE_OPEN:
            raise StateError(f"epoch {self.epoch} is already frozen")
        self._epoch_dir(self.epoch).mkdir(parents=True, exist_ok=True)
        self._pool_path(self.epoch).touch()
        self.phase = PHASE_FROZEN
        self._save_state()
        return self.epoch

    def run(
        self,
        budget: int | None = None,
        seed: int | None = None,
        _flow_hook: Callable[[SettlementFlow], SettlementFlow] | None = None,
        _failpoint: Callable[[str], None] | None = None,
        _crash_after_wal: bool = False,
    ) -> dict:
        """Clear the frozen epoch: aggregate, solve, validate, settle, commit.

        On validation failure the epoch is recorded as failed, the ledger is
        untouched, and the next epoch opens. Any other fault leaves the epoch
        frozen and the store unchanged, so run can simply be retried. If a
        previous run crashed after writing its commit log, this replays it.
        """
        wal_path = self._epoch_dir(self.epoch) / "applied.json"
        if self.phase == PHASE_FROZEN and wal_path.exists():
            return self._commit_from_wal(json.loads(wal_path.read_text()))
        if self.phase != PHASE_FROZEN:
            raise StateError(f"epoch {self.epoch} is open; freeze it before running")

        epoch = self.epoch
        pool = self._load_pool(epoch)
        g = aggregate(pool)

        work = self.ledger.copy()
        for edge in g.edges.values():
            for ob_id in edge.obligations:
                work.open_obligations[ob_id] = pool.obligations[ob_id]

        flow, solution = solve_settleable(g, budget, work, epoch_id=epoch, seed=seed)
        if _flow_hook is not None:
            flow = _flow_hook(flow)

        report: dict = {
            "epoch": epoch,
            "budget": budget,
            "seed": seed,
            "unit": g.unit,
            "total_debt": g.total_debt(),
            "nid": compute_nid(g),
            "excluded": [list(item) for item in g.excluded],
        }
        check = is_valid_flow(g, flow, work)
        if not check.ok:
            report.update(
                status="failed",
                violations=[[v.check, list(v.ids), v.detail] for v in check.violations],
            )
            wal = {
                "epoch": epoch,
                "status": "failed",
                "flow": flow_to_obj(flow),
                "report": report,
            }
        else:
            applied = apply_flow(work, flow, g, failpoint=_failpoint)
            report.update(
                status="applied",
                cleared_debt=applied.cleared_debt,
                residual_debt=g.total_debt() - applied.cleared_debt,
                liquidity_used=solution.liquidity_used,
                discharged=applied.discharged,
                new_obligations=[ob.id for ob in applied.new_obligations],
            )
            wal = {
                "epoch": epoch,
                "status": "applied",
                "flow": flow_to_obj(flow),
                "report": report,
                "ledger": work.to_obj(),
                "notices_csv": notices_to_csv(applied.notices),
                "enqueue": [
                    dict(intent_to_obj(ob), system=True) for ob in applied.new_obligations
                ],
            }
        _write_atomic(wal_path, canonical_dumps(wal))
        if _crash_after_wal:
            raise RuntimeError("crash requested after commit log write")
        return self._commit_from_wal(wal)

    def _commit_from_wal(self, wal: dict) -> dict:
        """Finish (or replay) a run from its commit log; idempotent."""
        epoch = wal["epoch"]
        epoch_dir = self._epoch_dir(epoch)
        _write_atomic(epoch_dir / "flow.json", canonical_dumps(wal["flow"]))
        _write_atomic(epoch_dir / "report.json", canonical_dumps(wal["report"]))
        if wal["status"] == "applied":
            _write_atomic(epoch_dir / "notices.csv", wal["notices_csv"])
            _write_atomic(self.store / "ledger.json", canonical_dumps(wal["ledger"]))
            self.ledger = Ledger.from_obj(wal["ledger"])
            queued = {obj["id"] for obj in self._pool_lines(epoch + 1)}
            for obj in wal["enqueue"]:
                if obj["id"] not in queued:
                    self._append_pool_line(epoch + 1, obj)
        self.epoch = epoch + 1
        self.phase = PHASE_OPEN
        self._epoch_dir(self.epoch).mkdir(parents=True, exist_ok=True)
        self._pool_path(self.epoch).touch()
        self._save_state()
        return wal["report"]

    # --- inspection ------------------------------------------------------------

    def nid(self) -> dict:
        """NID and total debt of the current epoch's pool as it stands."""
        g = aggregate(self._load_pool(self.epoch))
        return {
            "epoch": self.epoch,
            "nid": compute_nid(g),
            "total_debt": g.total_debt(),
        }

    def report(self, epoch: int | None = None) -> dict:
        if epoch is None:
            epoch = self.epoch - 1
        path = self._epoch_dir(epoch) / "report.json"
        if epoch < 0 or not path.exists():
            raise StateError(f"epoch {epoch} has no report")
        return json.loads(path.read_text())

    def flow(self, epoch: int) -> SettlementFlow:
        path = self._epoch_dir(epoch) / "flow.json"
        if not path.exists():
            raise StateError(f"epoch {epoch} has no flow")
        return flow_from_obj(json.loads(path.read_text()))
