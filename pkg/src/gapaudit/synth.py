"""Synthetic fixtures with a planted target leak.

Matrix fixture (``synth_matrix``), with ``x ~ U(-1, 1)^p`` and weights
``a_j = 1/(1+j)``, ``b_j = 0.5/(1+j)``::

    s      = sin(pi x_0) + sum_j a_j x_j + sum_j b_j x_j x_{j+1}
    target = sqrt(1 - h) * s / sd(s) + sqrt(h) * z        z ~ N(0, 1), never exposed
    leak   = target + N(0, (leak_noise_fraction * sd(target))^2)

``h`` (``hidden_share``) is the variance share the clean columns cannot
explain. Draw order is x, z, leak noise, so fixtures that differ only in
``leak_noise_fraction`` share their clean columns and target.

Record fixture (``synth_records``) produces JARVIS-like raw records, including
placeholder strings, invalid entries, duplicate compositions and EFG tensors,
whose bandgap depends smoothly on the dielectric response, electronegativity
contrast and formation energy plus a hidden term. ``avg_elec_mass`` and
``avg_hole_mass`` are affine images of the bandgap plus noise, i.e. leaks.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from gapaudit.features.elements import default_table
from gapaudit.features.formula import Composition
from gapaudit.features.matrix import FeatureMatrix
from gapaudit.ingest import RawRecord

LEAK_COLUMN = "leak"

CATIONS = ("Li", "Na", "K", "Mg", "Ca", "Sr", "Ba", "Al", "Ga", "In", "Zn", "Cd", "Ti", "Zr", "Cu", "Ag", "Sn", "Pb", "Bi", "Y")
ANIONS = ("O", "S", "Se", "Te", "F", "Cl", "Br", "I", "N", "P")


def synth_matrix(n: int, p_clean: int, leak_noise_fraction: float, seed: int, hidden_share: float = 0.3) -> tuple[FeatureMatrix, str]:
    """Clean columns ``x0..x{p-1}`` plus the planted column ``leak``."""
    if n < 50 or p_clean < 3:
        raise ValueError("need n >= 50 and p_clean >= 3")
    if leak_noise_fraction <= 0:
        raise ValueError("leak_noise_fraction must be positive")
    if not 0 <= hidden_share < 1:
        raise ValueError("hidden_share must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=(n, p_clean))
    z = rng.standard_normal(n)
    j = np.arange(p_clean)
    s = np.sin(math.pi * x[:, 0]) + x @ (1.0 / (1.0 + j)) + (x[:, :-1] * x[:, 1:]) @ (0.5 / (1.0 + j[:-1]))
    target = math.sqrt(1 - hidden_share) * s / s.std() + math.sqrt(hidden_share) * z
    leak = target + rng.standard_normal(n) * leak_noise_fraction * target.std()
    names = [f"x{i}" for i in range(p_clean)] + [LEAK_COLUMN]
    m = FeatureMatrix(names, np.column_stack([x, leak]), target, "synthetic", [f"s{i}" for i in range(n)])
    return m, LEAK_COLUMN


def _formula(rng) -> Composition:
    cat = CATIONS[rng.integers(len(CATIONS))]
    an = ANIONS[rng.integers(len(ANIONS))]
    amounts = {cat: int(rng.integers(1, 4)), an: int(rng.integers(1, 5))}
    if rng.random() < 0.25:
        third = ANIONS[rng.integers(len(ANIONS))]
        if third not in amounts:
            amounts[third] = int(rng.integers(1, 3))
    if rng.random() < 0.3:
        k = int(rng.integers(2, 4))
        amounts = {el: v * k for el, v in amounts.items()}
    return Composition({el: Fraction(v) for el, v in amounts.items()})


def synth_records(n: int = 2000, leak_noise_fraction: float = 0.05, seed: int = 7, mass_coverage: float = 0.85) -> list[RawRecord]:
    """Raw JARVIS-like records; roughly 60-70% survive curation with defaults."""
    if n < 50:
        raise ValueError("need n >= 50 records")
    if leak_noise_fraction <= 0:
        raise ValueError("leak_noise_fraction must be positive")
    rng = np.random.default_rng(seed)
    table = default_table()
    comps = [_formula(rng) for _ in range(n)]
    chi_range = np.array([max(table[e].chi for e in c.amounts) - min(table[e].chi for e in c.amounts) for c in comps])

    ef = -rng.uniform(0.1, 3.0, n)
    ehull = np.abs(rng.normal(0.0, 0.04, n))
    density = rng.uniform(2.0, 9.0, n)
    nat = rng.integers(2, 41, n)
    bulk = rng.uniform(15.0, 250.0, n)
    shear = bulk * rng.uniform(0.3, 0.8, n)
    poisson = rng.uniform(0.15, 0.42, n)
    eps_base = rng.uniform(2.0, 30.0, n)
    eps = eps_base[:, None] * rng.uniform(0.9, 1.1, (n, 3))
    spg = rng.integers(1, 231, n)
    dims = rng.choice(["3D", "2D", "1D", "0D", "intercalated"], size=n, p=[0.8, 0.12, 0.04, 0.02, 0.02])
    hidden = rng.standard_normal(n)

    raw = 9.0 / np.sqrt(eps.mean(axis=1)) + 0.8 * chi_range - 0.3 * ef + 0.002 * bulk + 0.35 * hidden - 1.2
    gap = np.log1p(np.exp(2.0 * raw)) / 2.0  # smooth, non-negative
    sd = gap.std()
    elec = 0.05 + 0.2 * (gap + rng.standard_normal(n) * leak_noise_fraction * sd)
    hole = 0.08 + 0.3 * (gap + rng.standard_normal(n) * leak_noise_fraction * sd)
    has_mass = rng.random(n) < mass_coverage

    efg_mode = rng.random(n)
    corrupt = rng.random((n, 6))
    records = []
    for i in range(n):
        v: dict[str, object] = {
            "formation_energy_per_atom": float(ef[i]),
            "ehull": float(ehull[i]),
            "density": float(density[i]),
            "nat": int(nat[i]),
            "dimensionality": str(dims[i]),
            "spg_number": int(spg[i]),
            "bulk_modulus_kv": float(bulk[i]),
            "shear_modulus_gv": float(shear[i]),
            "poisson": float(poisson[i]),
            "epsx": float(eps[i, 0]),
            "epsy": float(eps[i, 1]),
            "epsz": float(eps[i, 2]),
            "optb88vdw_bandgap": float(gap[i]),
            "avg_elec_mass": float(elec[i]) if has_mass[i] else "na",
            "avg_hole_mass": float(hole[i]) if has_mass[i] else "na",
        }
        if efg_mode[i] < 0.6:
            v["max_efg"] = float(abs(rng.normal(0, 30)))
        elif efg_mode[i] < 0.9:
            v["max_efg"] = "na"
            v["efg_tensor"] = rng.normal(0, 20, size=(2, 3, 3)).round(4).tolist()
        else:
            v["max_efg"] = "None"
            v["efg_tensor"] = []
        # a few records violate one physical constraint each
        if corrupt[i, 0] < 0.05:
            v["formation_energy_per_atom"] = float(rng.uniform(0.05, 1.0))
        if corrupt[i, 1] < 0.03:
            v["poisson"] = "na" if corrupt[i, 2] < 0.5 else 0.05
        if corrupt[i, 3] < 0.02:
            v["bulk_modulus_kv"] = float(rng.uniform(310, 450))
        if corrupt[i, 4] < 0.01:
            v["epsz"] = 500.0
        if corrupt[i, 5] < 0.01:
            v["spg_number"] = 0
        records.append(RawRecord(id=f"SYN-{seed}-{i:05d}", formula=comps[i].formula(), values=v))
    return records


def split_sources(records: list[RawRecord], seed: int = 0, overlap: float = 0.3) -> tuple[list[RawRecord], list[RawRecord]]:
    """Two overlapping sources: shared ids appear in both, with ``a`` missing some fields ``b`` supplies."""
    rng = np.random.default_rng(seed)
    a, b = [], []
    for rec in records:
        u = rng.random()
        if u < overlap:
            va = dict(rec.values)
            vb = dict(rec.values)
            for name in ("epsx", "max_efg", "avg_elec_mass"):
                if rng.random() < 0.5 and name in va:
                    va[name] = "na"
            a.append(RawRecord(rec.id, rec.formula, va))
            b.append(RawRecord(rec.id, rec.formula, vb))
        elif u < overlap + (1 - overlap) / 2:
            a.append(RawRecord(rec.id, rec.formula, dict(rec.values)))
        else:
            b.append(RawRecord(rec.id, rec.formula, dict(rec.values)))
    return a, b
