"""Shared table builders for the test suite."""

from intobs.correlators import CorrelatorTable, psi_correlator
from intobs.exactnum import compositions


def psi_twin_all_splits(slot_counts, m_max=2):
    """An obs_O table replaying the psi observable at genus zero.

    Entries carry every frozen-slot count up to m_max so a tree assembly can
    distribute frozen slots over vertices freely.  Values are bare psi
    intersection numbers with the per-slot exponents.
    """
    tbl = CorrelatorTable("obs_O", 1, [[1]], complete=[(0, k) for k in slot_counts])
    for k in slot_counts:
        dim = k - 3
        if dim < 0:
            continue
        for m in range(0, min(m_max, k) + 1):
            nr = k - m
            for e in compositions(dim, k):
                cls_ = {"tag": "obs_o", "a": list(e[:nr]), "b": list(e[nr:])}
                tbl.add_entry(0, [1] * k, [0] * k, cls_, psi_correlator(0, list(e)))
    return tbl
