import numpy as np
import pytest
from hypothesis import given, strategies as st

from banditmips.bandit import banditmips
from banditmips.bucket import bucket_ae, bucket_search, build_bins, estimate_norms, norm_caps
from banditmips.core import BanditConfig, MipsInstance, SampleLedger, naive_mips
from banditmips.datasets import gen_correlated_normal_custom, gen_normal_custom


def test_full_sweep_is_exact():
    rng = np.random.default_rng(0)
    inst = MipsInstance(rng.normal(size=(10, 50)), rng.normal(size=50))
    ledger = SampleLedger()
    est = estimate_norms(inst, 50, seed=1, ledger=ledger, full_sweep=True)
    direct = np.array([sum(x * x for x in row) for row in inst.atoms])
    assert np.allclose(est, direct, rtol=1e-12)
    assert ledger.mults == 500


def test_zero_atom_has_zero_estimate():
    atoms = np.vstack([np.zeros(20), np.ones(20)])
    assert estimate_norms(MipsInstance(atoms, np.ones(20)), 5, seed=0)[0] == 0.0


def test_probe_bounds():
    inst = gen_normal_custom(3, 10, 0)
    for m in (0, 11):
        with pytest.raises(ValueError):
            estimate_norms(inst, m, seed=0)


def test_bins_examples():
    assert [b.tolist() for b in build_bins([3.0, 1.0, 2.0], 30).bins] == [[0, 2, 1]]
    sizes = [len(b) for b in build_bins(np.arange(7.0), 3).bins]
    assert sizes == [3, 3, 1]
    assert [b.tolist() for b in build_bins(np.ones(5), 2).bins] == [[0, 1], [2, 3], [4]]
    with pytest.raises(ValueError):
        build_bins([1.0], 0)


@given(st.lists(st.integers(0, 6), min_size=1, max_size=60), st.integers(1, 10))
def test_bins_partition_and_order(est, size):
    nb = build_bins(est, size)
    flat = np.concatenate(nb.bins)
    assert sorted(flat.tolist()) == list(range(len(est)))
    keys = [(-est[i], i) for i in flat]
    assert keys == sorted(keys)
    assert all(len(b) == size for b in nb.bins[:-1]) and 1 <= len(nb.bins[-1]) <= size
    assert np.all(nb.bin_of[flat] == np.repeat(np.arange(len(nb.bins)), [len(b) for b in nb.bins]))


@pytest.mark.parametrize("seed", range(10))
def test_single_bin_equals_banditmips(seed):
    inst = gen_normal_custom(30, 1000, seed)
    cfg = BanditConfig(seed=seed)
    bins = build_bins(estimate_norms(inst, 32, seed), 30)
    assert len(bins.bins) == 1
    events = []
    b_ledger, p_ledger = SampleLedger(), SampleLedger()
    out = bucket_ae(inst, cfg, bins, b_ledger, on_eliminate=events.append)
    ref_ledger = SampleLedger()
    ref = banditmips(inst, cfg, ledger=ref_ledger)
    assert out.result.best == ref.result.best
    assert b_ledger.mults == ref_ledger.mults
    # no cross-bin prune: every elimination was against the best lower bound
    for ev in events:
        assert np.all(ev.thresholds == ev.best_lower_bound)


def test_bin_sized_instance_seed3():
    inst = gen_normal_custom(30, 1000, 3)
    assert bucket_search(inst, BanditConfig(seed=3)).result.best == naive_mips(inst).best


@pytest.mark.parametrize("seed", range(30))
def test_exact_norms_tiny_delta_is_naive(seed):
    inst = gen_normal_custom(90, 300, seed)
    bins = build_bins(estimate_norms(inst, inst.d, seed, full_sweep=True), 30)
    caps = norm_caps(inst, bins)
    mu = inst.atoms @ inst.query / inst.d
    assert np.all(mu <= caps * (1 + 1e-12))
    out = bucket_ae(inst, BanditConfig(delta=1e-12, seed=seed), bins)
    assert out.result.best == naive_mips(inst).best


def test_norm_caps_charge_d():
    inst = gen_normal_custom(5, 40, 0)
    ledger = SampleLedger()
    norm_caps(inst, build_bins(np.ones(5)), ledger)
    assert ledger.mults == 40


def test_bins_for_other_instance_rejected():
    inst = gen_normal_custom(5, 40, 0)
    with pytest.raises(ValueError):
        bucket_ae(inst, BanditConfig(), build_bins(np.ones(6)))


def test_probe_cost_is_charged():
    inst = gen_normal_custom(100, 500, 1)
    ledger = SampleLedger()
    out = bucket_search(inst, BanditConfig(seed=1), m_probe=16, ledger=ledger)
    assert ledger.mults == out.result.ledger.mults >= 100 * 16


def test_correlated_accuracy_floor():
    hits = 0
    for s in range(100):
        inst = gen_correlated_normal_custom(300, 2000, s)
        hits += bucket_search(inst, BanditConfig(delta=1e-3, seed=s)).result.best == naive_mips(inst).best
    assert hits / 100 >= 0.95
