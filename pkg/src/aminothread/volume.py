"""Density volumes, atomic structures, density simulation and file I/O."""

import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import Box3
from .residues import ATOM_COUNT, ATOMIC_NUMBER, CLASS_INDEX, HEAVY_ATOMS, element_of

logger = logging.getLogger(__name__)


class StructureError(ValueError):
    pass


class PdbParseError(ValueError):
    def __init__(self, lineno, msg):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


class MrcError(ValueError):
    pass


class MrcTruncatedError(MrcError):
    pass


class MrcModeError(MrcError):
    def __init__(self, mode):
        super().__init__(f"unsupported MRC mode {mode} (only mode 2, float32, is supported)")
        self.mode = mode


class MrcMagicError(MrcError):
    pass


# -- structures --------------------------------------------------------


@dataclass
class Residue:
    name: str
    atom_names: tuple
    coords: np.ndarray
    seq_id: int = 0

    def __post_init__(self):
        self.name = self.name.upper()
        if self.name not in CLASS_INDEX:
            raise StructureError(f"non-standard residue {self.name!r}")
        self.atom_names = tuple(self.atom_names)
        self.coords = np.asarray(self.coords, dtype=np.float64).reshape(-1, 3)
        if len(self.atom_names) != len(self.coords):
            raise StructureError("atom name / coordinate count mismatch")
        if len(self.coords) != ATOM_COUNT[self.name]:
            raise StructureError(
                f"{self.name} {self.seq_id}: {len(self.coords)} atoms, expected {ATOM_COUNT[self.name]}"
            )

    @property
    def class_id(self):
        return CLASS_INDEX[self.name]

    @property
    def elements(self):
        return tuple(element_of(a) for a in self.atom_names)

    @property
    def gt_box(self):
        return Box3.bounding(self.coords)

    def atom(self, name):
        return self.coords[self.atom_names.index(name)]

    def translated(self, shift):
        return Residue(self.name, self.atom_names, self.coords + np.asarray(shift), self.seq_id)


@dataclass
class Structure:
    residues: list
    chain_id: str = "A"

    @property
    def sequence(self):
        return [r.class_id for r in self.residues]

    def __len__(self):
        return len(self.residues)

    def all_coords(self):
        if not self.residues:
            return np.zeros((0, 3))
        return np.vstack([r.coords for r in self.residues])

    def all_elements(self):
        return [e for r in self.residues for e in r.elements]

    def gt_boxes(self):
        return np.stack([r.gt_box.as_array() for r in self.residues])

    def centers(self):
        b = self.gt_boxes()
        return b[:, :3] + b[:, 3:] / 2

    def translated(self, shift):
        return Structure([r.translated(shift) for r in self.residues], self.chain_id)

    def concat(self, other):
        return Structure(self.residues + other.residues, self.chain_id)


# -- density volume ----------------------------------------------------


@dataclass
class DensityVolume:
    """Dense scalar grid; voxel ``(i, j, k)`` sits at ``origin + (i, j, k) * voxel_size``."""

    data: np.ndarray
    voxel_size: float = 1.0
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 3 or min(self.data.shape) < 1:
            raise ValueError(f"density must be a non-empty 3D grid, got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("density contains non-finite values")
        if not self.voxel_size > 0:
            raise ValueError("voxel_size must be positive")
        # MRC headers carry the geometry as float32; keep only what a file can hold
        self.voxel_size = float(np.float32(self.voxel_size))
        self.origin = np.asarray(self.origin, dtype=np.float64).reshape(3).astype(np.float32).astype(np.float64)

    @property
    def shape(self):
        return self.data.shape

    def world_to_voxel(self, xyz):
        return (np.asarray(xyz, dtype=np.float64) - self.origin) / self.voxel_size

    def voxel_to_world(self, ijk):
        return self.origin + np.asarray(ijk, dtype=np.float64) * self.voxel_size


def _grid_for(coords, pad, voxel_size):
    lo = coords.min(axis=0) - pad
    hi = coords.max(axis=0) + pad
    shape = tuple(int(n) for n in np.ceil((hi - lo) / voxel_size).astype(int) + 1)
    return lo, shape


def simulate_density(structure, resolution=3.0, voxel_size=1.0, grid=None):
    """Render a structure as a sum of atom-centred Gaussians.

    Each atom contributes ``Z * exp(-r**2 / (2 sigma**2))`` with
    ``sigma = 0.225 * resolution`` and ``Z`` its atomic number. Unless an
    explicit ``grid=(origin, shape)`` is given, the box is the structure's
    bounding box padded by ``3 sigma``.
    """
    if structure is None or len(structure) == 0:
        raise StructureError("cannot simulate an empty structure")
    if resolution < 2 * voxel_size:
        raise ValueError(f"resolution {resolution} below Nyquist for voxel size {voxel_size}")
    sigma = 0.225 * resolution
    coords = structure.all_coords()
    amps = np.array([ATOMIC_NUMBER[e] for e in structure.all_elements()], dtype=np.float64)
    if grid is None:
        origin, shape = _grid_for(coords, 3 * sigma, voxel_size)
    else:
        origin, shape = np.asarray(grid[0], dtype=np.float64), tuple(int(s) for s in grid[1])
    rel = np.ascontiguousarray((coords - origin) / voxel_size)
    s = sigma / voxel_size
    # 5 sigma keeps the truncated mass below 1e-5 per atom.
    data = kernels.splat_gaussians(rel, amps, s, np.array(shape, dtype=np.int64), 5.0 * s)
    return DensityVolume(data.astype(np.float32), voxel_size, origin)


def crop_cube(vol, corner, size):
    """Crop ``size`` voxels starting at voxel index ``corner``; outside reads as 0."""
    size = (int(size),) * 3 if np.isscalar(size) else tuple(int(s) for s in size)
    if min(size) < 1:
        raise ValueError("crop size must be >= 1")
    corner = tuple(int(c) for c in corner)
    out = np.zeros(size, dtype=np.float32)
    src, dst = [], []
    for c, sz, n in zip(corner, size, vol.shape):
        lo, hi = max(c, 0), min(c + sz, n)
        if lo >= hi:
            return DensityVolume(out, vol.voxel_size, vol.voxel_to_world(corner))
        src.append(slice(lo, hi))
        dst.append(slice(lo - c, hi - c))
    out[tuple(dst)] = vol.data[tuple(src)]
    return DensityVolume(out, vol.voxel_size, vol.voxel_to_world(corner))


# -- MRC ---------------------------------------------------------------

_HEADER = 1024


# cella / mx cannot hold every float32 voxel size exactly, so the value itself
# also goes into the free EXTRA words; other writers leave these zero
_EXACT_VOXEL_OFFSET = 128


def write_mrc(path, vol):
    """Write an MRC2014 mode-2 file (no extended header)."""
    nx, ny, nz = vol.shape
    data = vol.data.astype("<f4")
    hdr = bytearray(_HEADER)
    struct.pack_into("<4i", hdr, 0, nx, ny, nz, 2)
    struct.pack_into("<3i", hdr, 16, 0, 0, 0)
    struct.pack_into("<3i", hdr, 28, nx, ny, nz)
    struct.pack_into("<3f", hdr, 40, nx * vol.voxel_size, ny * vol.voxel_size, nz * vol.voxel_size)
    struct.pack_into("<3f", hdr, 52, 90.0, 90.0, 90.0)
    struct.pack_into("<3i", hdr, 64, 1, 2, 3)
    struct.pack_into("<3f", hdr, 76, float(data.min()), float(data.max()), float(data.mean()))
    struct.pack_into("<i", hdr, 92, 0)
    struct.pack_into("<i", hdr, 108, 20140)  # NVERSION
    struct.pack_into("<f", hdr, _EXACT_VOXEL_OFFSET, vol.voxel_size)
    struct.pack_into("<3f", hdr, 196, *vol.origin)
    hdr[208:212] = b"MAP "
    hdr[212:216] = b"\x44\x44\x00\x00"
    struct.pack_into("<f", hdr, 216, float(data.std()))
    with open(path, "wb") as fh:
        fh.write(bytes(hdr))
        # x is the fastest-varying axis on disk
        fh.write(np.asfortranarray(data).tobytes(order="F"))


def read_mrc(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER:
        raise MrcTruncatedError(f"{path}: {len(raw)} bytes, shorter than the 1024-byte header")
    if raw[208:212] != b"MAP ":
        raise MrcMagicError(f"{path}: missing 'MAP ' magic at byte 208")
    nx, ny, nz, mode = struct.unpack_from("<4i", raw, 0)
    if mode != 2:
        raise MrcModeError(mode)
    mx, my, mz = struct.unpack_from("<3i", raw, 28)
    cella = struct.unpack_from("<3f", raw, 40)
    nsymbt = struct.unpack_from("<i", raw, 92)[0]
    origin = np.array(struct.unpack_from("<3f", raw, 196), dtype=np.float64)
    offset = _HEADER + max(nsymbt, 0)
    count = nx * ny * nz
    if len(raw) < offset + 4 * count:
        raise MrcTruncatedError(f"{path}: data block truncated ({len(raw) - offset} of {4 * count} bytes)")
    data = np.frombuffer(raw, dtype="<f4", count=count, offset=offset).reshape((nx, ny, nz), order="F")
    voxel_size = float(np.float32(cella[0] / (mx if mx > 0 else nx)))
    exact = struct.unpack_from("<f", raw, _EXACT_VOXEL_OFFSET)[0]
    if exact > 0 and abs(exact - voxel_size) <= 1e-5 * exact:
        voxel_size = exact
    return DensityVolume(np.ascontiguousarray(data, dtype=np.float32), voxel_size, origin)


# -- PDB ---------------------------------------------------------------


def read_pdb(path):
    """Parse ATOM records into one :class:`Structure` per chain.

    Hydrogens, HETATM records and alternate locations other than the first
    are ignored. Residues lacking any canonical heavy atom are dropped.
    """
    with open(path, encoding="utf-8") as fh:
        return parse_pdb(fh.read())


def parse_pdb(text):
    chains = {}
    order = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if line.startswith("ENDMDL"):
            break
        if not line.startswith("ATOM  "):
            continue
        line = line.rstrip("\r\n")
        try:
            name = line[12:16].strip()
            altloc = line[16:17]
            resname = line[17:20].strip().upper()
            chain = line[21:22]
            resseq = int(line[22:26])
            icode = line[26:27]
            xyz = (float(line[30:38]), float(line[38:46]), float(line[46:54]))
        except (ValueError, IndexError) as exc:
            raise PdbParseError(lineno, f"malformed ATOM record ({exc})") from None
        element = line[76:78].strip().upper() if len(line) >= 78 else ""
        if element in ("H", "D") or (not element and name[:1] in ("H", "D")):
            continue
        if altloc not in (" ", "", "A", "1"):
            continue
        if chain not in chains:
            chains[chain] = {}
            order.append(chain)
        key = (resseq, icode)
        res = chains[chain].setdefault(key, {"name": resname, "atoms": {}, "seq": resseq})
        res["atoms"].setdefault(name, xyz)

    out = []
    for chain in order:
        residues = []
        for rec in chains[chain].values():
            canon = HEAVY_ATOMS.get(rec["name"])
            if canon is None:
                continue
            if not all(a in rec["atoms"] for a in canon):
                logger.debug("dropping %s %s%d: missing atoms", rec["name"], chain, rec["seq"])
                continue
            coords = np.array([rec["atoms"][a] for a in canon])
            residues.append(Residue(rec["name"], canon, coords, rec["seq"]))
        if residues:
            out.append(Structure(residues, chain.strip() or "A"))
    return out


def format_pdb(structure):
    lines = []
    serial = 1
    chain = (structure.chain_id or "A")[0]
    for i, res in enumerate(structure.residues):
        seq = res.seq_id if res.seq_id else i + 1
        for name, (x, y, z) in zip(res.atom_names, res.coords):
            el = element_of(name)
            padded = f" {name:<3}" if len(name) < 4 else name
            lines.append(
                f"ATOM  {serial:5d} {padded:<4} {res.name:>3} {chain}{seq:4d}    "
                f"{x:8.3f}{y:8.3f}{z:8.3f}{1.0:6.2f}{0.0:6.2f}          {el:>2}"
            )
            serial += 1
    lines.append("TER")
    lines.append("END")
    return "\n".join(lines) + "\n"


def write_pdb(path, structure):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_pdb(structure))
