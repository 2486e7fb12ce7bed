"""
Functions for reading and writing kmfv parameter archives (.kmfp files).

A parameter archive stores named arrays (the parameters of every codec
sub-network or of a frame interpolator) plus a metadata dictionary.  The
layout is fully determined by its contents so loading then saving an archive
reproduces it byte for byte.
"""

__developer_info__ = """
kmfv parameter archive format
^^^^^^^^^^^^^^^^^^^^^^^^^^^^^

All integers are little-endian.

    offset  size  field
    0       4     magic b'KMFP'
    4       1     format version (u8, currently 1)
    5       4     metadata length L (u32)
    9       L     UTF-8 JSON, keys sorted, no whitespace:
                  {"meta": {...}, "tensors": [{"name", "dtype", "shape",
                   "offset", "nbytes"}, ...]}
    9+L     ...   tensor bytes, concatenated in name order, each in the
                  stored dtype (little-endian)

The checkpoint id is the CRC-32 of everything after the 9 byte preamble.

"""

import json
import struct
import zlib

import numpy as np

from . import fileiobase

MAGIC = b'KMFP'
VERSION = 1
PREAMBLE = '<4sBI'
PREAMBLE_SIZE = struct.calcsize(PREAMBLE)


def pack(meta, params):
    """
    Pack metadata and named arrays into archive bytes.

    Parameters
    ----------
    meta : dict
        JSON serialisable metadata (configuration, lambda, ...).
    params : dict
        Mapping of parameter name to ndarray.

    Returns
    -------
    buf : bytes
        Complete archive.
    ckpt_id : int
        CRC-32 checkpoint id of the archive.

    """
    tensors = []
    chunks = []
    offset = 0
    for name in sorted(params):
        arr = np.asarray(params[name])
        if arr.dtype.kind == 'f':
            arr = arr.astype('<f4')
        elif arr.dtype.kind in 'iu':
            arr = arr.astype('<i8')
        else:
            raise TypeError("unsupported dtype %s for %s" % (arr.dtype, name))
        raw = np.ascontiguousarray(arr).tobytes()
        tensors.append({"name": name, "dtype": arr.dtype.str,
                        "shape": list(arr.shape), "offset": offset,
                        "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)

    header = json.dumps({"meta": meta, "tensors": tensors}, sort_keys=True,
                        separators=(',', ':')).encode('utf-8')
    body = header + b''.join(chunks)
    ckpt_id = zlib.crc32(body) & 0xffffffff
    return struct.pack(PREAMBLE, MAGIC, VERSION, len(header)) + body, ckpt_id


def unpack(buf):
    """
    Unpack archive bytes, returning (meta, params).

    ``meta["ckpt_id"]`` is set to the checkpoint id of the archive.
    """
    if len(buf) < PREAMBLE_SIZE:
        raise IOError("parameter archive too short")
    magic, version, hlen = struct.unpack(PREAMBLE, buf[:PREAMBLE_SIZE])
    if magic != MAGIC:
        raise IOError("not a kmfv parameter archive (magic %r)" % magic)
    if version != VERSION:
        raise IOError("unsupported parameter archive version %d" % version)
    body = buf[PREAMBLE_SIZE:]
    header = json.loads(body[:hlen].decode('utf-8'))
    data = body[hlen:]

    params = dict()
    for t in header["tensors"]:
        raw = data[t["offset"]:t["offset"] + t["nbytes"]]
        if len(raw) != t["nbytes"]:
            raise IOError("parameter archive truncated in %s" % t["name"])
        params[t["name"]] = np.frombuffer(raw, dtype=t["dtype"]).reshape(
            t["shape"]).copy()
    meta = header["meta"]
    meta["ckpt_id"] = zlib.crc32(body) & 0xffffffff
    return meta, params


def write(filename, meta, params, overwrite=False):
    """
    Write a parameter archive atomically and return its checkpoint id.

    See Also
    --------
    read : Read a parameter archive.

    """
    meta = {k: v for k, v in meta.items() if k != "ckpt_id"}
    buf, ckpt_id = pack(meta, params)
    fileiobase.write_atomic(filename, buf, overwrite=overwrite)
    return ckpt_id


def read(filename):
    """
    Read a parameter archive.

    Returns
    -------
    meta : dict
        Metadata dictionary, including the derived ``ckpt_id``.
    params : dict
        Mapping of parameter name to ndarray.

    """
    with open(filename, 'rb') as f:
        return unpack(f.read())


# torch modules
def module_arrays(module):
    """
    Named arrays of a torch module's state dictionary.
    """
    return {k: v.detach().cpu().numpy()
            for k, v in module.state_dict().items()}


def load_module_arrays(module, params, strict=True):
    """
    Copy named arrays into a torch module's parameters and buffers.
    """
    import torch
    state = module.state_dict()
    for name, arr in params.items():
        if name in state:
            state[name] = torch.from_numpy(np.ascontiguousarray(arr)).to(
                state[name].dtype)
        elif strict:
            raise KeyError("unexpected parameter %s in archive" % name)
    if strict:
        missing = sorted(set(state) - set(params))
        if missing:
            raise KeyError("archive lacks parameters: %s" % ", ".join(missing))
    module.load_state_dict(state)
    return module


def write_module(filename, module, meta, overwrite=False):
    """
    Write the state of a torch module, returning the checkpoint id.
    """
    return write(filename, meta, module_arrays(module), overwrite=overwrite)
