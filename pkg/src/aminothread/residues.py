"""The 20 standard amino acids: canonical ordering, heavy atoms, elements."""

AMINO_ACIDS = (
    "ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE",
    "LEU", "LYS", "MET", "PHE", "PRO", "SER", "THR", "TRP", "TYR", "VAL",
)
NUM_CLASSES = len(AMINO_ACIDS)
CLASS_INDEX = {name: i for i, name in enumerate(AMINO_ACIDS)}

ONE_LETTER = dict(zip(AMINO_ACIDS, "ARNDCQEGHILKMFPSTWYV"))
FROM_ONE_LETTER = {v: k for k, v in ONE_LETTER.items()}

BACKBONE = ("N", "CA", "C", "O")

_SIDE_CHAINS = {
    "ALA": ("CB",),
    "ARG": ("CB", "CG", "CD", "NE", "CZ", "NH1", "NH2"),
    "ASN": ("CB", "CG", "OD1", "ND2"),
    "ASP": ("CB", "CG", "OD1", "OD2"),
    "CYS": ("CB", "SG"),
    "GLN": ("CB", "CG", "CD", "OE1", "NE2"),
    "GLU": ("CB", "CG", "CD", "OE1", "OE2"),
    "GLY": (),
    "HIS": ("CB", "CG", "ND1", "CD2", "CE1", "NE2"),
    "ILE": ("CB", "CG1", "CG2", "CD1"),
    "LEU": ("CB", "CG", "CD1", "CD2"),
    "LYS": ("CB", "CG", "CD", "CE", "NZ"),
    "MET": ("CB", "CG", "SD", "CE"),
    "PHE": ("CB", "CG", "CD1", "CD2", "CE1", "CE2", "CZ"),
    "PRO": ("CB", "CG", "CD"),
    "SER": ("CB", "OG"),
    "THR": ("CB", "OG1", "CG2"),
    "TRP": ("CB", "CG", "CD1", "CD2", "NE1", "CE2", "CE3", "CZ2", "CZ3", "CH2"),
    "TYR": ("CB", "CG", "CD1", "CD2", "CE1", "CE2", "CZ", "OH"),
    "VAL": ("CB", "CG1", "CG2"),
}

HEAVY_ATOMS = {name: BACKBONE + side for name, side in _SIDE_CHAINS.items()}
ATOM_COUNT = {name: len(atoms) for name, atoms in HEAVY_ATOMS.items()}

ATOMIC_NUMBER = {"H": 1, "C": 6, "N": 7, "O": 8, "S": 16, "SE": 34, "P": 15}


def class_id(name):
    """Index of a three-letter residue code; raises KeyError for non-standard codes."""
    return CLASS_INDEX[name.upper()]


def class_name(idx):
    return AMINO_ACIDS[int(idx)]


def element_of(atom_name):
    """Element symbol of a standard amino-acid heavy atom, from its PDB name."""
    return atom_name.strip()[0]


def parse_sequence(text):
    """Parse a one-letter string or whitespace-separated three-letter codes into class ids."""
    text = text.strip()
    tokens = text.split()
    if len(tokens) > 1 or (len(tokens) == 1 and len(tokens[0]) == 3 and tokens[0].upper() in CLASS_INDEX):
        return [class_id(t) for t in tokens]
    return [CLASS_INDEX[FROM_ONE_LETTER[c]] for c in text.upper()]
