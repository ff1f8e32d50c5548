"""
Source and receiver directivity
===============================

The same room rendered four ways. Identity tables reproduce the multiband
render exactly; the bundled tables tilt the spectrum and the energy.
"""
import numpy as np

from mbrir import (BAND_CENTERS_HZ, DirectivityTable, FilterBank, ReceiverFilterSet, render,
                   sample_room)

room = sample_room(21)
bank = FilterBank()


def band_energy_db(x):
    return np.array([10 * np.log10(np.sum(bank.filter_band(x, b) ** 2)) for b in range(6)])


mb = render(room, "MB").samples
renders = {
    "REC_MB": render(room, "REC_MB").samples,          # synthetic spherical-head ear
    "SRC_REC_MB": render(room, "SRC_REC_MB").samples,  # plus the placeholder source pattern
}

# With an all-ones source table and a unit impulse receiver filter the
# directional path collapses to the plain multiband render, byte for byte.
identity = render(room, "SRC_REC_MB", src_table=DirectivityTable.omni(),
                  rec_filters=ReceiverFilterSet.identity()).samples
print("identity directivity equals MB:", identity.tobytes() == mb.tobytes())

# Band energies relative to the omnidirectional render.
ref = band_energy_db(mb)
print("\nband    " + "  ".join(f"{k:>10s}" for k in renders))
for b, fc in enumerate(BAND_CENTERS_HZ):
    cols = "  ".join(f"{band_energy_db(x)[b] - ref[b]:+10.2f}" for x in renders.values())
    print(f"{fc:5.0f}   {cols}")
