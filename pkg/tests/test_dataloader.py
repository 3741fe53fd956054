import numpy as np
import pytest

from provkit.dataloader import (
    CheckpointSchedule,
    DataOrderPlan,
    TrainingStream,
    batch_at,
    build_sample_index,
    checkpoint_schedule,
    context_count,
    epoch_permutation,
    epochs_needed,
    read_sample_index,
    tokens_seen,
    write_sample_index,
)
from provkit.dataset import open_dataset, write_dataset
from provkit.errors import ContractError

# Frozen golden vectors, hand-executed from the shuffle definition with an
# independent pure-int implementation (see oracle in test body below).
GOLDEN_PERM_10_SEED0_E0 = [5, 3, 8, 2, 4, 1, 7, 9, 6, 0]
GOLDEN_PERM_10_SEED0_E1 = [4, 3, 8, 2, 9, 6, 5, 7, 1, 0]
GOLDEN_PERM_7_SEED42_E0 = [5, 6, 2, 1, 4, 3, 0]


def _oracle_permutation(n, seed, epoch):
    """Reference Fisher-Yates on pure python ints, independent of provkit.rng."""
    M = (1 << 64) - 1
    G = 0x9E3779B97F4A7C15

    def nxt(state):
        state = (state + G) & M
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M
        return state, z ^ (z >> 31)

    _, epoch_seed = nxt((seed ^ ((G * (epoch + 1)) & M)) & M)
    perm = list(range(n))
    s = epoch_seed
    for i in range(n - 1, 0, -1):
        s, out = nxt(s)
        j = out % (i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def test_golden_permutations():
    assert list(epoch_permutation(10, 0, 0)) == GOLDEN_PERM_10_SEED0_E0
    assert list(epoch_permutation(10, 0, 1)) == GOLDEN_PERM_10_SEED0_E1
    assert list(epoch_permutation(7, 42, 0)) == GOLDEN_PERM_7_SEED42_E0
    assert _oracle_permutation(10, 0, 0) == GOLDEN_PERM_10_SEED0_E0


def test_permutation_matches_oracle_random_cases():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(1, 200))
        seed = int(rng.integers(0, 2**64, dtype=np.uint64))
        epoch = int(rng.integers(0, 5))
        assert list(epoch_permutation(n, seed, epoch)) == _oracle_permutation(n, seed, epoch)


def _toy_dataset(tmp_path, n_tokens=230, name="toy", dtype="u16", vocab=1000):
    rng = np.random.default_rng(0)
    docs, left = [], n_tokens
    while left > 0:
        k = int(min(left, rng.integers(1, 40)))
        docs.append(rng.integers(0, vocab, size=k))
        left -= k
    write_dataset(docs, dtype, tmp_path / name)
    return open_dataset(tmp_path / name)


def test_single_context_index_is_all_zero(tmp_path):
    ds = _toy_dataset(tmp_path, n_tokens=10)
    plan = DataOrderPlan(seed=99, batch_size=2, seq_len=9, train_iters=3)
    assert context_count(ds, plan) == 1
    assert list(build_sample_index(ds, plan)) == [0] * 6


def test_zero_contexts_is_config_error(tmp_path):
    ds = _toy_dataset(tmp_path, n_tokens=5)
    plan = DataOrderPlan(seed=0, batch_size=1, seq_len=63, train_iters=1)
    with pytest.raises(ContractError):
        build_sample_index(ds, plan)


def test_exact_once_per_epoch(tmp_path):
    ds = _toy_dataset(tmp_path, n_tokens=500)
    plan = DataOrderPlan(seed=3, batch_size=4, seq_len=9, train_iters=30)
    n = context_count(ds, plan)
    index = build_sample_index(ds, plan)
    full_epochs = len(index) // n
    for e in range(full_epochs):
        sl = index[e * n : (e + 1) * n]
        assert sorted(sl) == list(range(n))


def test_prefix_stability(tmp_path):
    ds = _toy_dataset(tmp_path, n_tokens=400)
    short = DataOrderPlan(seed=11, batch_size=3, seq_len=7, train_iters=10)
    long = DataOrderPlan(seed=11, batch_size=3, seq_len=7, train_iters=25)
    a = build_sample_index(ds, short)
    b = build_sample_index(ds, long)
    assert np.array_equal(a, b[: len(a)])
    for step in range(short.train_iters):
        assert np.array_equal(batch_at(ds, short, step), batch_at(ds, long, step))


def test_context_reassembly_with_eod(tmp_path):
    docs = [[1, 2, 3], [4], [], [5, 6, 7, 8, 9]]
    write_dataset(docs, "u16", tmp_path / "r")
    ds = open_dataset(tmp_path / "r")
    eod = 0
    plan = DataOrderPlan(seed=5, batch_size=1, seq_len=3, train_iters=3, eod_token=eod)
    joined = []
    for d in docs:
        joined.extend(d)
        joined.append(eod)
    n = context_count(ds, plan)
    stream = TrainingStream(ds, plan)
    got = np.concatenate([stream.context(c) for c in range(n)])
    L = plan.context_len
    assert list(got) == joined[: n * L]


def test_context_reassembly_without_eod(tmp_path):
    docs = [[1, 2, 3], [4, 5], [6, 7, 8, 9, 10]]
    write_dataset(docs, "u16", tmp_path / "r2")
    ds = open_dataset(tmp_path / "r2")
    plan = DataOrderPlan(seed=5, batch_size=1, seq_len=2, train_iters=3)
    stream = TrainingStream(ds, plan)
    n = context_count(ds, plan)
    flat = [t for d in docs for t in d]
    got = np.concatenate([stream.context(c) for c in range(n)])
    assert list(got) == flat[: n * plan.context_len]


def test_batch_contents_match_index(tmp_path):
    ds = _toy_dataset(tmp_path, n_tokens=300)
    plan = DataOrderPlan(seed=8, batch_size=4, seq_len=5, train_iters=8)
    stream = TrainingStream(ds, plan)
    for step in (0, 3, 7):
        batch = stream.batch(step)
        assert batch.shape == (plan.batch_size, plan.context_len)
        cids = stream.index[step * plan.batch_size : (step + 1) * plan.batch_size]
        for row, cid in zip(batch, cids):
            assert np.array_equal(row, stream.context(int(cid)))


def test_batch_step_out_of_range(tmp_path):
    ds = _toy_dataset(tmp_path, n_tokens=100)
    plan = DataOrderPlan(seed=1, batch_size=1, seq_len=4, train_iters=2)
    with pytest.raises(ContractError):
        batch_at(ds, plan, 2)
    with pytest.raises(ContractError):
        batch_at(ds, plan, -1)


def test_determinism_two_independent_builds(tmp_path):
    ds = _toy_dataset(tmp_path, n_tokens=600)
    plan = DataOrderPlan(seed=123, batch_size=5, seq_len=6, train_iters=20)
    i1 = build_sample_index(ds, plan)
    ds2 = open_dataset(tmp_path / "toy")
    i2 = build_sample_index(ds2, plan)
    assert np.array_equal(i1, i2)
    assert np.array_equal(batch_at(ds, plan, 7), batch_at(ds2, plan, 7))


def test_partial_second_epoch(tmp_path):
    # budget of ~1.45 epochs: epoch 0 exactly once, epoch 1 a prefix
    ds = _toy_dataset(tmp_path, n_tokens=430)
    plan = DataOrderPlan(seed=2, batch_size=1, seq_len=9, train_iters=60)
    n = context_count(ds, plan)
    assert n == 43
    assert epochs_needed(ds, plan) == 2
    index = build_sample_index(ds, plan)
    assert sorted(index[:n]) == list(range(n))
    tail = index[n:]
    assert len(tail) == 60 - n
    assert np.array_equal(tail, epoch_permutation(n, plan.seed, 1)[: len(tail)])


def test_checkpoint_schedule_defaults():
    sched = checkpoint_schedule(DataOrderPlan(seed=0))
    assert len(sched) == 154
    assert 0 in sched
    for s in (1, 2, 4, 8, 16, 32, 64, 128, 256, 512):
        assert s in sched
    assert all(k in sched for k in range(1000, 143001, 1000))
    assert sched.steps == tuple(sorted(sched.steps))


def test_checkpoint_schedule_small():
    sched = checkpoint_schedule(1000)
    assert sched.steps == (0, 1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1000)
    assert len(sched) == 12
    assert min(s for s in sched if s > 0) == 1


def test_checkpoint_schedule_caps_log_steps():
    sched = checkpoint_schedule(100)
    assert sched.steps == (0, 1, 2, 4, 8, 16, 32, 64)
    assert checkpoint_schedule(512).steps == (0, 1, 2, 4, 8, 16, 32, 64, 128, 256, 512)


def test_tokens_seen_paper_arithmetic():
    plan = DataOrderPlan(seed=0)
    assert tokens_seen(plan, 1000) == 2_097_152_000
    assert tokens_seen(plan, 143000) == 299_892_736_000
    assert tokens_seen(plan, 0) == 0
    assert tokens_seen(DataOrderPlan(seed=0, batch_size=512, seq_len=128), 3) == 196_608


def test_plan_json_round_trip():
    plan = DataOrderPlan(seed=9, batch_size=2, seq_len=8, train_iters=4, eod_token=0)
    assert DataOrderPlan.from_json(plan.to_json()) == plan
    text = plan.to_json()
    for key in ("seed", "batch_size", "seq_len", "train_iters", "eod_token"):
        assert key in text


def test_sample_index_export_round_trip(tmp_path):
    ds = _toy_dataset(tmp_path, n_tokens=120)
    plan = DataOrderPlan(seed=4, batch_size=2, seq_len=5, train_iters=6)
    index = build_sample_index(ds, plan)
    p = write_sample_index(index, tmp_path / "index.u64")
    back = read_sample_index(p)
    assert np.array_equal(index, back)
    assert p.stat().st_size == 8 * len(index)
    assert p.read_bytes()[:8] == int(index[0]).to_bytes(8, "little")
