import numpy as np

from provkit.rng import SplitMix64, mix_epoch_seed, splitmix64, splitmix64_hash, splitmix64_outputs

# Published reference outputs of splitmix64 for seed 0.
SEED0_OUTPUTS = [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_canonical_vectors_seed0():
    rng = SplitMix64(0)
    assert [rng.next() for _ in range(3)] == SEED0_OUTPUTS


def test_splitmix64_first_output_matches_stream():
    for seed in (0, 1, 0xDEADBEEF, (1 << 64) - 1):
        assert splitmix64(seed) == SplitMix64(seed).next()


def test_vectorized_outputs_match_sequential():
    for seed in (0, 7, 123456789, 2**63 + 11):
        rng = SplitMix64(seed)
        seq = [rng.next() for _ in range(257)]
        vec = splitmix64_outputs(seed, 257)
        assert vec.dtype == np.uint64
        assert [int(x) for x in vec] == seq


def test_vectorized_hash_matches_scalar():
    vals = np.array([0, 1, 2**63, (1 << 64) - 1, 0xC0FFEE], dtype=np.uint64)
    key = 0x9E3779B97F4A7C15
    out = splitmix64_hash(vals, key)
    for v, h in zip(vals, out):
        assert int(h) == splitmix64(int(v) ^ key)


def test_epoch_seed_mix_definition():
    G = 0x9E3779B97F4A7C15
    M = (1 << 64) - 1
    for seed, epoch in [(0, 0), (0, 1), (42, 0), (2**60, 5)]:
        expected = splitmix64((seed ^ ((G * (epoch + 1)) & M)) & M)
        assert mix_epoch_seed(seed, epoch) == expected
    # epoch 0 with seed 0 reduces to splitmix64(GOLDEN)
    assert mix_epoch_seed(0, 0) == 0x6E789E6AA1B965F4
