import numpy as np

from ldpc_lab.seeding import derive_seed, fisher_yates_rows, splitmix64, stream_keys


def test_splitmix64_reference():
    # first outputs of the reference splitmix64 generator seeded with 0
    z = splitmix64(np.array([0], dtype=np.uint64), 0)
    assert int(z[0]) == 0xE220A8397B1DCDAF
    z = splitmix64(np.array([0], dtype=np.uint64), 1)
    assert int(z[0]) == 0x6E789E6AA1B965F4


def test_fisher_yates_rows_are_permutations():
    perm = fisher_yates_rows(stream_keys(7, 50), 33)
    assert perm.shape == (50, 33)
    assert all(sorted(r) == list(range(33)) for r in perm.tolist())


def test_substreams_do_not_depend_on_count():
    a = fisher_yates_rows(stream_keys(7, 10), 16)
    b = fisher_yates_rows(stream_keys(7, 20), 16)
    assert np.array_equal(a, b[:10])


def test_derive_seed():
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
    assert derive_seed(1, 2, 3) != derive_seed(1, 3, 2)
    assert 0 <= derive_seed(5) < 2**64
