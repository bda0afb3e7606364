"""Ideal-geometry protein chains for tests, demos and the pipeline.

Atoms are placed one at a time from three reference atoms and an internal
coordinate (bond length, bond angle, torsion). Bond geometry is close to
textbook values; side-chain rotamers are fixed, so these chains are
plausible but not energy-minimized.
"""

import numpy as np

from .residues import AMINO_ACIDS, FROM_ONE_LETTER, HEAVY_ATOMS
from .volume import Residue, Structure

# (atom, ref1, ref2, ref3, bond, angle, torsion); torsion may name a chi slot.
_SIDE_CHAIN_IC = {
    "ALA": [],
    "ARG": [("CG", "N", "CA", "CB", 1.52, 114.0, "chi1"), ("CD", "CA", "CB", "CG", 1.52, 111.0, 180.0),
            ("NE", "CB", "CG", "CD", 1.46, 112.0, 180.0), ("CZ", "CG", "CD", "NE", 1.33, 124.0, 180.0),
            ("NH1", "CD", "NE", "CZ", 1.33, 120.0, 0.0), ("NH2", "CD", "NE", "CZ", 1.33, 120.0, 180.0)],
    "ASN": [("CG", "N", "CA", "CB", 1.52, 113.0, "chi1"), ("OD1", "CA", "CB", "CG", 1.23, 121.0, -60.0),
            ("ND2", "CA", "CB", "CG", 1.33, 116.0, 120.0)],
    "ASP": [("CG", "N", "CA", "CB", 1.52, 113.0, "chi1"), ("OD1", "CA", "CB", "CG", 1.25, 119.0, -60.0),
            ("OD2", "CA", "CB", "CG", 1.25, 119.0, 120.0)],
    "CYS": [("SG", "N", "CA", "CB", 1.81, 114.0, "chi1")],
    "GLN": [("CG", "N", "CA", "CB", 1.52, 114.0, "chi1"), ("CD", "CA", "CB", "CG", 1.52, 112.0, 180.0),
            ("OE1", "CB", "CG", "CD", 1.23, 121.0, 0.0), ("NE2", "CB", "CG", "CD", 1.33, 117.0, 180.0)],
    "GLU": [("CG", "N", "CA", "CB", 1.52, 114.0, "chi1"), ("CD", "CA", "CB", "CG", 1.52, 112.0, 180.0),
            ("OE1", "CB", "CG", "CD", 1.25, 119.0, 0.0), ("OE2", "CB", "CG", "CD", 1.25, 119.0, 180.0)],
    "GLY": [],
    "HIS": [("CG", "N", "CA", "CB", 1.50, 114.0, "chi1"), ("ND1", "CA", "CB", "CG", 1.38, 122.0, 90.0),
            ("CD2", "CA", "CB", "CG", 1.36, 131.0, -90.0), ("CE1", "CB", "CG", "ND1", 1.32, 109.0, 180.0),
            ("NE2", "CB", "CG", "CD2", 1.37, 107.0, 180.0)],
    "ILE": [("CG1", "N", "CA", "CB", 1.53, 110.0, "chi1"), ("CG2", "N", "CA", "CB", 1.53, 110.0, "chi1+120"),
            ("CD1", "CA", "CB", "CG1", 1.52, 114.0, 180.0)],
    "LEU": [("CG", "N", "CA", "CB", 1.53, 116.0, "chi1"), ("CD1", "CA", "CB", "CG", 1.52, 110.0, 180.0),
            ("CD2", "CA", "CB", "CG", 1.52, 110.0, -60.0)],
    "LYS": [("CG", "N", "CA", "CB", 1.52, 114.0, "chi1"), ("CD", "CA", "CB", "CG", 1.52, 111.0, 180.0),
            ("CE", "CB", "CG", "CD", 1.52, 111.0, 180.0), ("NZ", "CG", "CD", "CE", 1.49, 112.0, 180.0)],
    "MET": [("CG", "N", "CA", "CB", 1.52, 114.0, "chi1"), ("SD", "CA", "CB", "CG", 1.81, 113.0, 180.0),
            ("CE", "CB", "CG", "SD", 1.79, 100.0, 180.0)],
    "PHE": [("CG", "N", "CA", "CB", 1.50, 114.0, "chi1"), ("CD1", "CA", "CB", "CG", 1.39, 121.0, 90.0),
            ("CD2", "CA", "CB", "CG", 1.39, 121.0, -90.0), ("CE1", "CB", "CG", "CD1", 1.39, 120.0, 180.0),
            ("CE2", "CB", "CG", "CD2", 1.39, 120.0, 180.0), ("CZ", "CG", "CD1", "CE1", 1.39, 120.0, 0.0)],
    "PRO": [("CG", "N", "CA", "CB", 1.50, 104.0, 30.0), ("CD", "CA", "CB", "CG", 1.51, 105.0, -35.0)],
    "SER": [("OG", "N", "CA", "CB", 1.42, 111.0, "chi1")],
    "THR": [("OG1", "N", "CA", "CB", 1.43, 109.0, "chi1"), ("CG2", "N", "CA", "CB", 1.52, 111.0, "chi1+120")],
    "TRP": [("CG", "N", "CA", "CB", 1.50, 114.0, "chi1"), ("CD1", "CA", "CB", "CG", 1.37, 127.0, 90.0),
            ("CD2", "CA", "CB", "CG", 1.43, 126.0, -90.0), ("NE1", "CB", "CG", "CD1", 1.38, 110.0, 180.0),
            ("CE2", "CB", "CG", "CD2", 1.41, 107.0, 180.0), ("CE3", "CB", "CG", "CD2", 1.40, 134.0, 0.0),
            ("CZ2", "CG", "CD2", "CE2", 1.40, 122.0, 180.0), ("CZ3", "CG", "CD2", "CE3", 1.39, 119.0, 180.0),
            ("CH2", "CD2", "CE2", "CZ2", 1.37, 118.0, 0.0)],
    "TYR": [("CG", "N", "CA", "CB", 1.51, 114.0, "chi1"), ("CD1", "CA", "CB", "CG", 1.39, 121.0, 90.0),
            ("CD2", "CA", "CB", "CG", 1.39, 121.0, -90.0), ("CE1", "CB", "CG", "CD1", 1.39, 120.0, 180.0),
            ("CE2", "CB", "CG", "CD2", 1.39, 120.0, 180.0), ("CZ", "CG", "CD1", "CE1", 1.39, 120.0, 0.0),
            ("OH", "CD1", "CE1", "CZ", 1.38, 120.0, 180.0)],
    "VAL": [("CG1", "N", "CA", "CB", 1.52, 111.0, "chi1"), ("CG2", "N", "CA", "CB", 1.52, 111.0, "chi1+120")],
}

HELIX = (-57.0, -47.0)
STRAND = (-120.0, 130.0)


def place(a, b, c, bond, angle, torsion):
    """Position of atom d given a, b, c and the internal coordinate of d (degrees)."""
    angle = np.radians(angle)
    torsion = np.radians(torsion)
    bc = c - b
    bc /= np.linalg.norm(bc)
    n = np.cross(b - a, bc)
    n /= np.linalg.norm(n)
    m = np.cross(n, bc)
    d2 = np.array([-bond * np.cos(angle), bond * np.sin(angle) * np.cos(torsion), bond * np.sin(angle) * np.sin(torsion)])
    return c + d2[0] * bc + d2[1] * m + d2[2] * n


def _torsion(spec, chi1):
    if isinstance(spec, str):
        if spec == "chi1":
            return chi1
        return chi1 + float(spec[4:])
    return spec


def build_chain(sequence, torsions=HELIX, chi1=180.0, chain_id="A"):
    """Build a chain from a sequence of three-letter codes or a one-letter string.

    ``torsions`` is a single ``(phi, psi)`` pair or one pair per residue.
    """
    if isinstance(sequence, str):
        names = [FROM_ONE_LETTER[c] for c in sequence.upper()]
    else:
        names = [s if isinstance(s, str) else AMINO_ACIDS[int(s)] for s in sequence]
    n = len(names)
    tors = np.asarray(torsions, dtype=np.float64)
    if tors.ndim == 1:
        tors = np.tile(tors, (n, 1))
    if len(tors) != n:
        raise ValueError("need one (phi, psi) pair per residue")

    backbone = []
    N = np.array([0.0, 0.0, 0.0])
    CA = np.array([1.458, 0.0, 0.0])
    C = place(np.array([0.0, 1.0, 0.0]), N, CA, 1.525, 111.2, -60.0)
    for i in range(n):
        if i > 0:
            pC = backbone[-1][2]
            pCA = backbone[-1][1]
            pN = backbone[-1][0]
            psi_prev = tors[i - 1, 1]
            N = place(pN, pCA, pC, 1.329, 116.2, psi_prev)
            CA = place(pCA, pC, N, 1.458, 121.7, 180.0)
            C = place(pC, N, CA, 1.525, 111.2, tors[i, 0])
        backbone.append((N, CA, C))

    residues = []
    for i, name in enumerate(names):
        N, CA, C = backbone[i]
        atoms = {"N": N, "CA": CA, "C": C}
        atoms["O"] = place(N, CA, C, 1.231, 120.5, tors[i, 1] + 180.0)
        if name != "GLY":
            atoms["CB"] = place(C, N, CA, 1.53, 110.5, -122.6)
        for atom, r1, r2, r3, bond, ang, tor in _SIDE_CHAIN_IC[name]:
            atoms[atom] = place(atoms[r1], atoms[r2], atoms[r3], bond, ang, _torsion(tor, chi1))
        coords = np.array([atoms[a] for a in HEAVY_ATOMS[name]])
        residues.append(Residue(name, HEAVY_ATOMS[name], coords, i + 1))
    return Structure(residues, chain_id)


def random_sequence(n, rng):
    return [AMINO_ACIDS[i] for i in rng.integers(0, len(AMINO_ACIDS), size=n)]


def helix(n=50, seed=0):
    """Straight alpha helix of ``n`` residues with a seeded random sequence."""
    rng = np.random.default_rng(seed)
    return build_chain(random_sequence(n, rng), HELIX)
