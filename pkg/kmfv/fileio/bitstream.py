"""
Functions for reading and writing coded video containers (.kmfv files).

A container holds a fixed file header followed by one entry per coding step
in coding order.  Each entry is a step header and two length-prefixed chunks,
the entropy coded hyper-latent (z) and latent (y) of that frame.
"""

__developer_info__ = """
kmfv container format
^^^^^^^^^^^^^^^^^^^^^

All multi-byte integers are little-endian.

File header (19 bytes, struct '<4sBHHIBIB')::

    magic        4s   b'KMFV'
    version      u8   1
    width        u16  display width (unpadded)
    height       u16  display height (unpadded)
    frame_count  u32  number of coding steps
    gop_size     u8
    model_id     u32  checkpoint id of the parameters used
    flags        u8   bit 0: interpolated reference used

Step entry::

    display_index  u32
    type           u8   0 = I, 1 = B
    z chunk        [u32 length][payload]
    y chunk        [u32 length][payload]

The file ends right after the last step entry.

"""

import struct

from . import fileiobase

MAGIC = b'KMFV'
VERSION = 1
FILEHEADER = '<4sBHHIBIB'
FILEHEADER_SIZE = struct.calcsize(FILEHEADER)
STEPHEADER = '<IB'
STEPHEADER_SIZE = struct.calcsize(STEPHEADER)
CHUNKHEADER = '<I'
CHUNKHEADER_SIZE = struct.calcsize(CHUNKHEADER)

FLAG_INTERP = 0x01
FRAME_TYPES = {0: 'I', 1: 'B'}
FRAME_CODES = {'I': 0, 'B': 1}


class BitstreamError(ValueError):
    """Malformed or incompatible container."""


class MagicError(BitstreamError):
    pass


class VersionError(BitstreamError):
    pass


class ModelMismatchError(BitstreamError):
    """Container was coded with different parameters."""

    def __init__(self, expected, found):
        self.expected = expected
        self.found = found
        BitstreamError.__init__(
            self, "model id mismatch: container has %08x, parameters are "
            "%08x" % (found, expected))


class TruncatedError(BitstreamError):
    """Container ends inside a header or chunk."""

    def __init__(self, offset, what):
        self.offset = offset
        BitstreamError.__init__(
            self, "truncated container at byte %d while reading %s"
            % (offset, what))


def create_blank_cdic(width, height, gop_size, model_id, interp=True):
    """
    Create a blank container dictionary with no steps.
    """
    cdic = dict()
    cdic["magic"] = MAGIC
    cdic["version"] = VERSION
    cdic["width"] = int(width)
    cdic["height"] = int(height)
    cdic["frame_count"] = 0
    cdic["gop_size"] = int(gop_size)
    cdic["model_id"] = int(model_id)
    cdic["flags"] = FLAG_INTERP if interp else 0
    cdic["steps"] = []
    return cdic


def add_step(cdic, display_index, frame_type, z, y):
    """
    Append a coding step to a container dictionary.
    """
    if frame_type not in FRAME_CODES:
        raise ValueError("unknown frame type %r" % (frame_type, ))
    cdic["steps"].append({"display_index": int(display_index),
                          "frame_type": frame_type,
                          "z": bytes(z), "y": bytes(y)})
    cdic["frame_count"] = len(cdic["steps"])
    return cdic


def payload_bits(cdic):
    """
    Total number of chunk payload bits in a container.
    """
    return 8 * sum(len(s["z"]) + len(s["y"]) for s in cdic["steps"])


# fileheader functions
def get_fileheader(buf, offset=0):
    """
    Unpack the file header at offset, returning a list.
    """
    if len(buf) - offset < FILEHEADER_SIZE:
        raise TruncatedError(len(buf), "file header")
    return list(struct.unpack_from(FILEHEADER, buf, offset))


def put_fileheader(fl):
    """
    Pack a file header list into bytes.
    """
    return struct.pack(FILEHEADER, *fl)


def fileheader2dic(header):
    """
    Convert a file header list into a container dictionary.

    The magic and version are validated before anything else is looked at.
    """
    if header[0] != MAGIC:
        raise MagicError("not a kmfv container (magic %r)" % (header[0], ))
    if header[1] != VERSION:
        raise VersionError("unsupported container version %d" % header[1])
    cdic = create_blank_cdic(header[2], header[3], header[5], header[6],
                             bool(header[7] & FLAG_INTERP))
    cdic["frame_count"] = header[4]
    cdic["flags"] = header[7]
    return cdic


def dic2fileheader(cdic):
    """
    Convert a container dictionary into a file header list.
    """
    return [MAGIC, VERSION, cdic["width"], cdic["height"],
            len(cdic["steps"]), cdic["gop_size"], cdic["model_id"],
            cdic["flags"]]


# chunk functions
def pack_chunk(payload):
    """
    Frame a payload as [u32 length][payload].
    """
    return struct.pack(CHUNKHEADER, len(payload)) + bytes(payload)


def unpack_chunk(buf, offset=0):
    """
    Read one framed chunk, returning (payload, offset after the chunk).
    """
    if len(buf) - offset < CHUNKHEADER_SIZE:
        raise TruncatedError(offset, "chunk length")
    n, = struct.unpack_from(CHUNKHEADER, buf, offset)
    start = offset + CHUNKHEADER_SIZE
    if len(buf) - start < n:
        raise TruncatedError(offset, "chunk payload of %d bytes" % n)
    return bytes(buf[start:start + n]), start + n


def pack(cdic):
    """
    Serialise a container dictionary into bytes.
    """
    out = [put_fileheader(dic2fileheader(cdic))]
    for step in cdic["steps"]:
        out.append(struct.pack(STEPHEADER, step["display_index"],
                               FRAME_CODES[step["frame_type"]]))
        out.append(pack_chunk(step["z"]))
        out.append(pack_chunk(step["y"]))
    return b''.join(out)


def unpack(buf, model_id=None):
    """
    Parse container bytes into a container dictionary.

    Parameters
    ----------
    buf : bytes
        Container bytes.
    model_id : int, optional
        Checkpoint id of the parameters that will decode the container.
        When given, a container coded with other parameters is rejected.

    Returns
    -------
    cdic : dict
        Container dictionary.

    Raises
    ------
    MagicError, VersionError, ModelMismatchError, TruncatedError
        See :class:`BitstreamError`.

    """
    cdic = fileheader2dic(get_fileheader(buf))
    if model_id is not None and model_id != cdic["model_id"]:
        raise ModelMismatchError(model_id, cdic["model_id"])

    offset = FILEHEADER_SIZE
    for i in range(cdic["frame_count"]):
        if len(buf) - offset < STEPHEADER_SIZE:
            raise TruncatedError(offset, "header of step %d" % i)
        idx, code = struct.unpack_from(STEPHEADER, buf, offset)
        if code not in FRAME_TYPES:
            raise BitstreamError("unknown frame type code %d at byte %d"
                                 % (code, offset))
        offset += STEPHEADER_SIZE
        z, offset = unpack_chunk(buf, offset)
        y, offset = unpack_chunk(buf, offset)
        cdic["steps"].append({"display_index": idx,
                              "frame_type": FRAME_TYPES[code],
                              "z": z, "y": y})
    if offset != len(buf):
        raise BitstreamError("%d trailing bytes after last step"
                             % (len(buf) - offset))
    return cdic


def read(filename, model_id=None):
    """
    Read a kmfv container file.

    See Also
    --------
    unpack : Parse container bytes.
    write : Write a container file.

    """
    with open(filename, 'rb') as f:
        return unpack(f.read(), model_id)


def write(filename, cdic, overwrite=False):
    """
    Write a container dictionary to a kmfv file.
    """
    fileiobase.write_atomic(filename, pack(cdic), overwrite=overwrite)
