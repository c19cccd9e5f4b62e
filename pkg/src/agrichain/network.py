"""Simulated transaction / functional nodes and the per-round mining pipeline.

One round, in order:

1. a functional node (FN) is drawn at random from the roster as miner and
   generates a fresh keypair;
2. the miner reads the current prior from the head of its FN ledger;
3. every transaction node (TN, one per farm gateway) generates a keypair,
   samples ``tw`` sweeps of its sensors, and submits the sealed counts with
   its public key;
4. the miner opens every submission, aggregates the window and runs one
   Bayesian update;
5. per farm it builds a colour token, records E / not-E, updates credits and
   runs the token traceability check;
6. it seals each farm's [token, credits] for the TN block, mines the TN block
   and then the FN block holding the plaintext round data;
7. every node appends both blocks to its copy of the ledgers.

Farm state between rounds (prior, credits, E counts) lives only on the chain.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import canon
from .bayes import PosteriorMatrix, PriorMatrix, sbu_step
from .chain import ColorToken, Ledger, latest_prior, mine_block, validate_chain
from .credit import (
    FarmAccount,
    TokenTransfer,
    declared_class_tokens,
    detected_class_tokens,
    is_class_e,
    record_classification,
    traceability_check,
    update_credit,
)
from .crypto import (
    FN_TO_TN,
    SUITE,
    TN_TO_FN,
    KeyPair,
    SealedPayload,
    derive_shared_key,
    generate_keypair,
    open_sealed,
    seal,
)
from .errors import AuthenticationError, CorruptLedgerError
from .field import N_CLASSES, FarmConfig, FrequencyTable, gateway_likelihood, rng_stream, sample_sweeps
from .kinetics import ResponseClass, SensorParams, true_class

# stream keys under the master seed
STREAM_SENSORS = 1
STREAM_DRIFT = 2
STREAM_MINER = 3


def _tn_submit_ad(T: int, farm_id: str) -> bytes:
    return f"tn-submit|{T}|{farm_id}".encode()


def _tn_block_ad(T: int, farm_id: str) -> bytes:
    return f"tn-block|{T}|{farm_id}".encode()


@dataclass
class Submission:
    """What a TN hands the miner: sealed window counts plus its public key."""

    farm_id: str
    sealed: bytes
    public_key: bytes


@dataclass
class TransactionNode:
    farm: FarmConfig
    index: int
    fn_ledger: Ledger
    tn_ledger: Ledger
    keys: dict[int, KeyPair] = field(default_factory=dict)

    @property
    def node_id(self) -> str:
        return self.farm.farm_id

    def keypair(self, seed: int, T: int) -> KeyPair:
        if T not in self.keys:
            self.keys[T] = generate_keypair(f"{seed}|TN|{self.node_id}|{T}")
        return self.keys[T]

    def read_entry(self, tn_block) -> dict:
        """Decrypt this farm's [colour token, credits] from a TN block."""
        data = tn_block.data()
        T = int(data["round"])
        sealed = SealedPayload.from_bytes(data["entries"][self.node_id])
        key = derive_shared_key(self.keys[T].secret_key, data["miner_public_key"], FN_TO_TN)
        return canon.decode(open_sealed(key, sealed, _tn_block_ad(T, self.node_id)))


@dataclass
class FunctionalNode:
    node_id: str
    fn_ledger: Ledger
    tn_ledger: Ledger


@dataclass
class RoundResult:
    T: int
    miner_id: str
    fn_block: object
    tn_block: object
    prior: PriorMatrix
    posterior: PosteriorMatrix
    next_prior: PriorMatrix
    table: FrequencyTable
    levels: np.ndarray
    excluded: list[str]
    compliant: np.ndarray


@dataclass
class World:
    """Everything a run needs: farms, sensor model, roster and settings."""

    farms: list[FarmConfig]
    params: SensorParams
    seed: int
    tns: list[TransactionNode]
    fns: list[FunctionalNode]
    tw: int = 50
    alpha: float = 0.05
    cr0: float = 500.0
    difficulty: int = 12
    drift: float = 0.0
    likelihood: str = "class-marginal"
    granularity: str = "window"
    compliance: str = "argmax"
    p_not_e_threshold: float = 0.8
    trace_threshold: float = 1e-3
    history: list[RoundResult] = field(default_factory=list)

    @classmethod
    def build(cls, farms: Sequence[FarmConfig], params: SensorParams, seed: int, *,
              fn_count: int = 3, cr0: float = 500.0, difficulty: int = 12, **settings) -> "World":
        farms = list(farms)
        ids = [f.farm_id for f in farms]
        fn_genesis = Ledger.create("FN", len(farms), ids, cr0, difficulty)
        tn_genesis = Ledger.create("TN", len(farms), ids, cr0, difficulty)
        tns = [TransactionNode(f, i, fn_genesis.copy(), tn_genesis.copy()) for i, f in enumerate(farms)]
        fns = [FunctionalNode(f"FN{j}", fn_genesis.copy(), tn_genesis.copy()) for j in range(fn_count)]
        return cls(farms, params, seed, tns, fns, cr0=cr0, difficulty=difficulty, **settings)

    @property
    def farm_ids(self) -> list[str]:
        return [f.farm_id for f in self.farms]

    @property
    def fn_ledger(self) -> Ledger:
        """The roster's view of the FN ledger (all copies are identical)."""
        return self.fns[0].fn_ledger

    @property
    def tn_ledger(self) -> Ledger:
        return self.fns[0].tn_ledger

    def true_classes(self) -> np.ndarray:
        """Ground-truth class index per farm from its mean level."""
        return np.array([true_class(f.mean_conc, self.params.k_D).index for f in self.farms])

    def run(self, rounds: int, intercept=None) -> list[RoundResult]:
        start = len(self.history) + 1
        return [run_mining_round(self, T, intercept) for T in range(start, start + rounds)]


def _round_levels(world: World, T: int) -> np.ndarray:
    means = np.array([f.mean_conc for f in world.farms])
    if world.drift <= 0:
        return means
    shift = rng_stream(world.seed, STREAM_DRIFT, T).uniform(-world.drift, world.drift, len(means))
    return np.maximum(means + shift, 0.0)


def _accounts_from_block(world: World, data: dict) -> list[FarmAccount]:
    if "credits" not in data:  # genesis
        return [FarmAccount.open(fid, world.cr0) for fid in world.farm_ids]
    return [
        FarmAccount(fid, float(cr), int(fe), int(fne), history=((int(data["round"]), float(cr)),),
                    prev_freq_E=int(fe))
        for fid, cr, fe, fne in zip(world.farm_ids, data["credits"], data["f_E"], data["f_notE"])
    ]


def encode_counts(counts: np.ndarray) -> bytes:
    """TN plaintext: the (sweeps, 5) count matrix as big-endian u32 cells."""
    counts = np.asarray(counts)
    return canon.encode({"shape": list(counts.shape), "counts": counts.astype(">u4").tobytes()})


def decode_counts(raw: bytes) -> np.ndarray:
    data = canon.decode(raw)
    shape = tuple(data["shape"])
    return np.frombuffer(data["counts"], dtype=">u4").reshape(shape).astype(np.int64)


def collect_submissions(world: World, T: int, fn_public_key: bytes, levels: np.ndarray) -> list[Submission]:
    """Step 3: every TN samples its window and seals it to the miner."""
    out = []
    for tn in world.tns:
        kp = tn.keypair(world.seed, T)
        counts = sample_sweeps(tn.farm, world.params, rng_stream(world.seed, STREAM_SENSORS, T, tn.index),
                               world.tw, float(levels[tn.index]))
        key = derive_shared_key(kp.secret_key, fn_public_key, TN_TO_FN)
        sealed = seal(key, encode_counts(counts), _tn_submit_ad(T, tn.node_id), kp.public_key)
        out.append(Submission(tn.node_id, sealed.to_bytes(), kp.public_key))
    return out


def _open_submissions(world: World, T: int, fn_kp: KeyPair, submissions: Sequence[Submission]):
    windows = np.zeros((len(world.farms), world.tw, N_CLASSES), dtype=np.int64)
    excluded = []
    by_id = {s.farm_id: s for s in submissions}
    for i, fid in enumerate(world.farm_ids):
        sub = by_id.get(fid)
        try:
            if sub is None:
                raise AuthenticationError("no submission")
            key = derive_shared_key(fn_kp.secret_key, sub.public_key, TN_TO_FN)
            sealed = SealedPayload.from_bytes(sub.sealed)
            if sealed.sender_public_key != sub.public_key:
                raise AuthenticationError("sender key mismatch")
            counts = decode_counts(open_sealed(key, sealed, _tn_submit_ad(T, fid)))
            if counts.shape != (world.tw, N_CLASSES):
                raise AuthenticationError("submission has the wrong shape")
            windows[i] = counts
        except (AuthenticationError, ValueError):
            excluded.append(fid)
    return windows, excluded


def _bayes_update(world: World, prior: PriorMatrix, windows: np.ndarray):
    if world.granularity == "window":
        table = FrequencyTable(windows.sum(axis=1).T, world.tw, tuple(world.farm_ids))
        posterior, carried = sbu_step(prior, gateway_likelihood(table, world.likelihood))
        return posterior, carried
    if world.granularity == "sweep":
        posterior, carried = None, prior
        for s in range(world.tw):
            table = FrequencyTable(windows[:, s, :].T, 1, tuple(world.farm_ids))
            posterior, carried = sbu_step(carried, gateway_likelihood(table, world.likelihood))
        return PosteriorMatrix(posterior.probs, prior.step + 1), PriorMatrix(carried.probs, prior.step + 1)
    raise ValueError(f"unknown granularity {world.granularity!r}")


def run_mining_round(world: World, T: int,
                     intercept: Callable[[list[Submission]], list[Submission]] | None = None) -> RoundResult:
    """Execute one mining round and append its two blocks everywhere.

    ``intercept`` sees the TN submissions in transit and may return altered
    ones; farms whose submission then fails authentication are excluded for
    the round and keep their previous posterior and prior.
    """
    miner = world.fns[int(rng_stream(world.seed, STREAM_MINER, T).integers(len(world.fns)))]
    fn_kp = generate_keypair(f"{world.seed}|FN|{miner.node_id}|{T}")

    if not validate_chain(miner.tn_ledger):
        raise CorruptLedgerError("TN ledger failed validation")
    prior = latest_prior(miner.fn_ledger)
    head = miner.fn_ledger.head.data()
    prev_posterior = np.asarray(head.get("posterior", head["prior"]), dtype=float)
    accounts = _accounts_from_block(world, head)

    levels = _round_levels(world, T)
    submissions = collect_submissions(world, T, fn_kp.public_key, levels)
    if intercept is not None:
        submissions = intercept(submissions)

    windows, excluded = _open_submissions(world, T, fn_kp, submissions)
    posterior, next_prior = _bayes_update(world, prior, windows)
    skip = np.array([fid in excluded for fid in world.farm_ids])
    if skip.any():
        post = posterior.probs.copy()
        post[:, skip] = prev_posterior[:, skip]
        carried = next_prior.probs.copy()
        carried[:, skip] = prior.probs[:, skip]
        posterior = PosteriorMatrix(post, posterior.step)
        next_prior = PriorMatrix(carried, next_prior.step)

    tokens, declared, detected, compliant = [], [], [], []
    for i, acct in enumerate(accounts):
        col = posterior.probs[:, i]
        tokens.append(ColorToken.from_posterior(col))
        if not skip[i]:
            acct = record_classification(acct, is_class_e(col, world.compliance, world.p_not_e_threshold))
            acct = update_credit(acct, float(col[ResponseClass.E.index]), world.alpha, T)
        else:
            acct = replace(acct, prev_freq_E=acct.cum_freq_E)
        accounts[i] = acct
        transfer = TokenTransfer(world.farm_ids[i], T,
                                 declared_class_tokens(float(levels[i]), world.params.k_D, world.alpha),
                                 detected_class_tokens(col, world.alpha))
        declared.append(transfer.declared_tokens)
        detected.append(transfer.detected_tokens)
        compliant.append(traceability_check(transfer, world.trace_threshold))

    # TN block: one sealed [token, credits] entry per included farm
    entries = {}
    for i, (tn, sub) in enumerate(zip(world.tns, _submissions_by_farm(world, submissions))):
        if skip[i]:
            continue
        key = derive_shared_key(fn_kp.secret_key, sub.public_key, FN_TO_TN)
        body = canon.encode({"token": list(tokens[i].segments), "credits": accounts[i].credits})
        entries[tn.node_id] = seal(key, body, _tn_block_ad(T, tn.node_id), fn_kp.public_key).to_bytes()
    tn_payload = canon.encode({"round": T, "miner_public_key": fn_kp.public_key,
                               "suite": SUITE, "entries": entries})
    tn_block = mine_block(miner.tn_ledger.head, tn_payload, miner.node_id, world.difficulty, T)

    fn_payload = canon.encode({
        "round": T,
        "miner": miner.node_id,
        "fn_public_key": fn_kp.public_key,
        "prior": prior.probs,
        "posterior": posterior.probs,
        "next_prior": next_prior.probs,
        "tokens": [list(t.segments) for t in tokens],
        "credits": [a.credits for a in accounts],
        "f_E": [a.cum_freq_E for a in accounts],
        "f_notE": [a.cum_freq_notE for a in accounts],
        "declared": declared,
        "detected": detected,
        "compliant": compliant,
        "excluded": excluded,
        "tn_block_hash": tn_block.hash,
    })
    fn_block = mine_block(miner.fn_ledger.head, fn_payload, miner.node_id, world.difficulty, T)

    seen = set()
    for node in [*world.fns, *world.tns]:
        for ledger, block in ((node.fn_ledger, fn_block), (node.tn_ledger, tn_block)):
            if id(ledger) not in seen:
                seen.add(id(ledger))
                ledger.append(block, world.difficulty)

    table = FrequencyTable(windows.sum(axis=1).T, world.tw, tuple(world.farm_ids))
    result = RoundResult(T, miner.node_id, fn_block, tn_block, prior, posterior, next_prior, table,
                         levels, excluded, np.array(compliant))
    world.history.append(result)
    return result


def _submissions_by_farm(world: World, submissions: Sequence[Submission]) -> list[Submission | None]:
    by_id = {s.farm_id: s for s in submissions}
    return [by_id.get(fid) for fid in world.farm_ids]
