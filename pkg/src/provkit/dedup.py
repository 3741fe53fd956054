"""Near-deduplication with MinHash + LSH at a 0.87-style similarity threshold.

Pipeline: normalize text -> 5-word shingles -> 128-permutation MinHash
signatures -> LSH banding (8 bands x 16 rows, S-curve threshold
(1/8)^(1/16) ~= 0.8779) -> union-find clusters -> keep the lowest corpus
index per cluster.

Signature computation is order-independent, so results never depend on
document processing order or worker count.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ContractError
from .rng import SplitMix64, splitmix64_hash

NUM_PERMUTATIONS = 128
SHINGLE_WORDS = 5
LSH_BANDS = 8
LSH_ROWS = 16
KEY_SEED = 0xC0FFEE
EMPTY_SENTINEL = (1 << 64) - 1

# Frozen hash-permutation keys: 128 odd constants, splitmix64 stream seeded
# with KEY_SEED, each output OR 1. test_dedup regenerates and checks these.
PERMUTATION_KEYS = (
    0xCA8216FA9058D0FB, 0xECE45BABCE870479, 0x87BE93A4A16A73CB, 0x5A71C08957A50D45,
    0xC345D6E168AD2C79, 0xE47DF32A3A624293, 0x08CAB724CA100235, 0xDFA4529422A994BF,
    0x1A4C7945EF3E2887, 0xA3148D0AD0AD2A9B, 0x62D1D0D9D4002759, 0x507065D804077EDD,
    0x75A5A799430A358D, 0xDFAA618F05E814AD, 0xDFDC1F1E3FD80EE5, 0xAA4F1B082AF8064F,
    0x2DD35B22825E9E21, 0x8258297E8B33077D, 0x9547A3D84C96AFB3, 0x14A2E2D414D15ACF,
    0x401D2708B1A6F24D, 0x07E7425232185DF7, 0x40F1CC64D4F6E967, 0x62FBD74C6CF6756D,
    0xB6E2C223523178D1, 0xD15193D6622B12A9, 0xFAFA7D3979287E71, 0xC3CAC3E16D161A69,
    0x23F31DFC3ECB73D1, 0xA9827391BEC8A295, 0x1E19E3078153254B, 0x7DD0207825606CC9,
    0x099DC1F55073DEBF, 0x86CA2CBA13FE4CB9, 0x0A0F4FCF12D727B5, 0xA1FDDB44848138BD,
    0xB3DE8FA80A8312A3, 0xFD12F2B74F7EFCFD, 0x38ADC0A83F9E49C5, 0x0498B8209519EBF5,
    0x07D6DA6CE496B3EF, 0x9AF4C0EE4D2B954D, 0x4AFB105F29F066E7, 0x485BE9E0C0AB7C01,
    0xB6C2D889268CF23F, 0xBE38F54F7A211B91, 0x993E0F3EC7F8FB5D, 0xC48F71AFC86DCE2D,
    0x546E05CCC2DD8F0D, 0x0CAC6676C2EE96F9, 0xBEE5C87F89022FDB, 0x8ED8B8C0991A945F,
    0xCF40C10841B90D6D, 0x80F4F265A3D68295, 0xF163669B673B6E75, 0xD6012B81B39BB79B,
    0x3AD56BD0CC64F2D7, 0x6497BA74EECAA7A1, 0xAF5C8FE9E41C3B71, 0xD658D0BEDD5F4FB3,
    0x5BD3A48419F36CD3, 0xBF05FE0B7C822E15, 0x5E289FD028330A6F, 0x7FAF20355D9DF547,
    0x2385A661EB378F85, 0x6C3C64E859D466D5, 0x7B9A958E68EA55E3, 0xA9E0901A88436E83,
    0x86A00465918DBD79, 0xF15B171086DCA961, 0x78F7A812703A3AA1, 0xD86D278D0B030DC1,
    0x9845B2D26E56066F, 0x29281E8D6135F90F, 0x6E85C3E1E3F391AD, 0x33AD175B764C99EB,
    0x61E9D7FFD8725DA3, 0x21B7DB0500A53299, 0x2F880AF58CFD395D, 0x54A1D27E41A267DF,
    0xA2164DCEBC06DA4B, 0x1B073DFB56FE939B, 0x17F7503974FA2CD5, 0x4D30E6F3B8AF66E7,
    0xCD33DA64109E6A67, 0xA5DE441ADA7029CD, 0x87FF248BD515301D, 0x2692EE2107A8BCFD,
    0xD921539364E848BB, 0xBFBB0037355A313D, 0x303AA10EA1A1B4C3, 0xD37981DA6858F6D9,
    0x6AFAA8080F4B3283, 0x39BB2C389AA33FF9, 0x6669EE8DDEF70BBF, 0x21D9CC4ACA626927,
    0x5B47DFAA75C325DB, 0xF7F390220C99B427, 0x5B1D07A2900A83D5, 0xD7CCC1259E5526EB,
    0xB3B0B7A96BF7884D, 0x40FF77434D087133, 0x8C210667F36FA609, 0xE0EA4D4A9577E127,
    0x10F3AC04260E8617, 0x405DFE51E0EEF9B7, 0x3A27E95E67710143, 0xADE78E0546E539FD,
    0xDE8F33EF43979DF1, 0x802AF2D2376437E3, 0x679CFE92CD023AD9, 0xDC82E76283DC4C09,
    0x98C94E6B3AA7E83D, 0xB86598FE74D7396B, 0xE75A17EAFC5ABC87, 0xBD24FDCE56D4166F,
    0xC674ACFABE3B443B, 0x9D3B7F64D6C71035, 0x155D05517984566F, 0xA310D669E0F0510B,
    0x160EFB654E237FF7, 0xCC402C0AB00A1A6B, 0xD92A4B0A5AB280D5, 0xA9887C970C31ED35,
    0xCA9447EBCEE330CB, 0x768DCB82D4A2B18D, 0x7028116DC8A44677, 0xFE1DA002E69FDA57,
)

_KEYS_ARRAY = np.array(PERMUTATION_KEYS, dtype=np.uint64)


def generate_permutation_keys(seed: int = KEY_SEED, count: int = NUM_PERMUTATIONS) -> tuple[int, ...]:
    """Regenerate the key table; frozen copy above must always match."""
    rng = SplitMix64(seed)
    return tuple(rng.next() | 1 for _ in range(count))


def _hash_text(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")


def shingle(text: str) -> set[int]:
    """5-word shingle hashes of normalized text.

    Normalization lowercases and collapses whitespace runs; documents with
    fewer than 5 words hash the whole normalized text instead.
    """
    words = text.lower().split()
    if len(words) < SHINGLE_WORDS:
        return {_hash_text(" ".join(words))}
    return {
        _hash_text(" ".join(words[i : i + SHINGLE_WORDS]))
        for i in range(len(words) - SHINGLE_WORDS + 1)
    }


@dataclass(frozen=True)
class MinHashSignature:
    """Per-document minima of the 128 keyed hash permutations."""

    doc: int
    values: np.ndarray = field(compare=False)

    def __post_init__(self):
        if len(self.values) != NUM_PERMUTATIONS:
            raise ContractError(f"signature must have {NUM_PERMUTATIONS} values")


def minhash(shingles: set[int] | Sequence[int], doc: int = -1) -> MinHashSignature:
    """MinHash signature of a shingle set: values[p] = min over s of h_p(s)."""
    if not shingles:
        vals = np.full(NUM_PERMUTATIONS, EMPTY_SENTINEL, dtype=np.uint64)
        return MinHashSignature(doc=doc, values=vals)
    svals = np.fromiter(shingles, dtype=np.uint64, count=len(shingles))
    mins = np.empty(NUM_PERMUTATIONS, dtype=np.uint64)
    for p in range(NUM_PERMUTATIONS):
        mins[p] = splitmix64_hash(svals, int(_KEYS_ARRAY[p])).min()
    return MinHashSignature(doc=doc, values=mins)


def estimated_jaccard(a: MinHashSignature, b: MinHashSignature) -> float:
    """Fraction of matching signature components."""
    return float(np.count_nonzero(a.values == b.values)) / NUM_PERMUTATIONS


def exact_jaccard(a: set[int], b: set[int]) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


class UnionFind:
    """Disjoint sets with path compression; roots are minimal member ids."""

    def __init__(self):
        self.parent: dict[int, int] = {}

    def find(self, x: int) -> int:
        if x not in self.parent:
            self.parent[x] = x
            return x
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> None:
        rx, ry = self.find(x), self.find(y)
        target = min(rx, ry)
        self.parent[rx] = self.parent[ry] = target


@dataclass
class DedupReport:
    """Outcome of LSH clustering over a corpus."""

    clusters: list[list[int]]
    kept: list[int]
    threshold_estimate: float
    doc_count: int
    params: dict = field(default_factory=dict)

    @property
    def discarded(self) -> list[int]:
        kept = set(self.kept)
        return sorted(d for c in self.clusters for d in c if d not in kept)

    def to_json(self) -> str:
        return json.dumps(
            {
                "doc_count": self.doc_count,
                "threshold_estimate": self.threshold_estimate,
                "params": self.params,
                "kept": self.kept,
                "clusters": self.clusters,
            },
            sort_keys=True,
        )


def lsh_threshold(bands: int = LSH_BANDS, rows: int = LSH_ROWS) -> float:
    """S-curve midpoint of the banding scheme: (1/b)^(1/r)."""
    return (1.0 / bands) ** (1.0 / rows)


def lsh_cluster(
    signatures: Sequence[MinHashSignature],
    shingle_sets: Sequence[set[int]] | None = None,
    verify_threshold: float | None = None,
) -> DedupReport:
    """Cluster candidate duplicates found by LSH banding.

    Same band hash in any of the 8 bands makes a candidate pair; connected
    components over candidates form clusters; the lowest document id of each
    cluster is kept. When ``verify_threshold`` is set, candidate pairs whose
    exact Jaccard (from ``shingle_sets``) falls below it are rejected before
    clustering.
    """
    for sig in signatures:
        if len(sig.values) != NUM_PERMUTATIONS:
            raise ContractError("all signatures must have the same permutation count")
    if verify_threshold is not None and shingle_sets is None:
        raise ContractError("verification pass requires the shingle sets")

    uf = UnionFind()
    docs = sorted(sig.doc for sig in signatures)
    for d in docs:
        uf.find(d)

    buckets: dict[tuple[int, bytes], list[int]] = {}
    for sig in signatures:
        raw = sig.values.astype("<u8", copy=False).tobytes()
        for band in range(LSH_BANDS):
            key = (band, raw[band * LSH_ROWS * 8 : (band + 1) * LSH_ROWS * 8])
            buckets.setdefault(key, []).append(sig.doc)

    seen_pairs: set[tuple[int, int]] = set()
    for members in buckets.values():
        if len(members) < 2:
            continue
        members = sorted(members)
        anchor = members[0]
        for other in members[1:]:
            pair = (anchor, other)
            if pair in seen_pairs:
                continue
            seen_pairs.add(pair)
            if verify_threshold is not None:
                j = exact_jaccard(shingle_sets[anchor], shingle_sets[other])
                if j < verify_threshold:
                    continue
            uf.union(anchor, other)

    groups: dict[int, list[int]] = {}
    for d in docs:
        groups.setdefault(uf.find(d), []).append(d)
    clusters = [sorted(members) for _, members in sorted(groups.items())]
    kept = sorted(min(c) for c in clusters)
    return DedupReport(
        clusters=clusters,
        kept=kept,
        threshold_estimate=lsh_threshold(),
        doc_count=len(docs),
        params={
            "bands": LSH_BANDS,
            "rows": LSH_ROWS,
            "permutations": NUM_PERMUTATIONS,
            "shingle_words": SHINGLE_WORDS,
            "key_seed": KEY_SEED,
            "verify_threshold": verify_threshold,
        },
    )


def dedup_texts(
    texts: Iterable[str],
    verify_threshold: float | None = None,
    threads: int = 1,
) -> DedupReport:
    """Shingle, sign, and cluster an iterable of document texts."""
    texts = list(texts)
    shingle_sets = [shingle(t) for t in texts]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            sigs = list(pool.map(minhash, shingle_sets, range(len(texts))))
    else:
        sigs = [minhash(s, doc=i) for i, s in enumerate(shingle_sets)]
    return lsh_cluster(sigs, shingle_sets=shingle_sets, verify_threshold=verify_threshold)


def dedup_dataset(dataset, detok: Callable[[np.ndarray], str], **kwargs) -> DedupReport:
    """Dedup a token dataset given a detokenizer callback."""
    return dedup_texts((detok(doc) for doc in dataset.documents()), **kwargs)


def expected_estimator_std(j: float, perms: int = NUM_PERMUTATIONS) -> float:
    """Binomial std of the matching-component estimator at true Jaccard j."""
    return math.sqrt(j * (1.0 - j) / perms)
