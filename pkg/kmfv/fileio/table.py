"""
kmfv table functions.

kmfv uses numpy records arrays as stores of tabular results (training metric
logs, rate-distortion points, timing and size reports).  This module provides
functions to create records arrays and to read and write them as
comma-separated files with a single header line of column names.  Numeric
values are written with Python's repr so that floats read back exactly.
"""

import os

import numpy as np

from . import fileiobase


def make_table(rows, names, formats):
    """
    Create a records array from a list of row tuples.

    Parameters
    ----------
    rows : list of tuple
        Table rows, one value per column.
    names : list of str
        Column names.
    formats : list of str
        numpy dtype strings for each column, e.g. 'i8', 'f8', 'U32'.

    Returns
    -------
    rec : recarray
        Records array with named fields.

    """
    dtype = np.dtype({'names': list(names), 'formats': list(formats)})
    return np.rec.array(np.array([tuple(r) for r in rows], dtype=dtype))


def _format(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bytes, np.bytes_)):
        v = v.decode()
    s = str(v)
    if ',' in s or '\n' in s:
        raise ValueError("table values may not contain commas: %r" % s)
    return s


def write(filename, rec, comments=None, overwrite=False):
    """
    Write a records array to a comma-separated file.

    Parameters
    ----------
    filename : str
        Filename of file to write table to.
    rec : recarray
        Records array to write to file.
    comments : list, optional
        Comment lines written before the header, each prefixed with '# '.
    overwrite : bool, optional
        True to overwrite file if it exists. False will raise an IOError if
        the file exists.

    """
    names = rec.dtype.names
    with fileiobase.open_towrite(filename, overwrite, mode='w') as f:
        for c in comments or []:
            f.write("# " + c.rstrip("\n") + "\n")
        f.write(",".join(names) + "\n")
        for row in rec:
            f.write(",".join(_format(v) for v in row) + "\n")


def append_rows(filename, names, rows):
    """
    Append rows to a comma-separated table, creating it with a header first.

    Used for metric logs that grow while a run progresses.  Appending to an
    existing file with a different header raises ValueError.
    """
    header = ",".join(names)
    if os.path.exists(filename) and os.path.getsize(filename) > 0:
        with open(filename, 'r') as f:
            first = [l for l in f if not l.startswith('#')][:1]
        if first and first[0].strip() != header:
            raise ValueError("%s has columns %s, expected %s" %
                             (filename, first[0].strip(), header))
        mode = 'a'
        lines = []
    else:
        p = os.path.dirname(filename)
        if p != '' and not os.path.exists(p):
            os.makedirs(p)
        mode = 'w'
        lines = [header + "\n"]
    lines += [",".join(_format(v) for v in r) + "\n" for r in rows]
    with open(filename, mode) as f:
        f.writelines(lines)


def read(filename):
    """
    Read a comma-separated table file.

    Parameters
    ----------
    filename : str
        Filename of table file to read.

    Returns
    -------
    comments : list
        List of comment lines (without the leading '# ').
    rec : recarray
        Records array with named fields, column types guessed from the
        values.

    """
    with open(filename, 'r') as f:
        lines = f.readlines()
    comments = [l[2:].rstrip("\n") for l in lines if l.startswith('#')]
    body = [l for l in lines if not l.startswith('#')]
    if len(body) == 0:
        raise IOError("%s does not have a header line" % (filename))
    names = body[0].strip().split(',')
    if len(body) == 1:
        return comments, make_table([], names, ['f8'] * len(names))
    data = np.genfromtxt(body, delimiter=',', names=True, dtype=None,
                         encoding='utf-8')
    return comments, np.rec.array(np.atleast_1d(data))


# Row functions
def append_row(rec, row):
    """
    Append a row to the end of a records array, returning a new array.
    """
    new = np.rec.array(np.array([tuple(row)], dtype=rec.dtype))
    return np.rec.array(np.concatenate([rec, new]))


def select(rec, **conditions):
    """
    Return the rows of rec whose columns equal the given values.

    >>> select(rec, codec="kmfv", sequence="translate")  # doctest: +SKIP
    """
    mask = np.ones(len(rec), dtype=bool)
    for key, value in conditions.items():
        mask &= rec[key] == value
    return rec[mask]
