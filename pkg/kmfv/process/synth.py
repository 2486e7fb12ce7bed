"""
Synthetic sequences, padding and training tuple extraction.

Sequences are ``(vdic, data)`` pairs with ``data`` a float32 array of shape
[T, 3, H, W] in [0, 1].  The generators below are deterministic for a fixed
seed and stand in for natural video at desk scale.
"""

import numpy as np

from ..fileio import fileiobase

KINDS = ("translating-texture", "rotating-pattern", "noise-floor")
TUPLE_LENGTH = 5


def _size2hw(size):
    if np.ndim(size) == 0:
        return int(size), int(size)
    h, w = size
    return int(h), int(w)


############################
# Synthetic sequence kinds #
############################


def _texture_params(rng, ncomp=12, fmax=0.15):
    """
    Random sinusoid parameters (fx, fy, phase, amplitude) for 3 channels.
    """
    fx = rng.uniform(-fmax, fmax, size=(3, ncomp))
    fy = rng.uniform(-fmax, fmax, size=(3, ncomp))
    ph = rng.uniform(0, 2 * np.pi, size=(3, ncomp))
    amp = rng.uniform(0.2, 1.0, size=(3, ncomp))
    amp *= 0.45 / amp.sum(axis=1, keepdims=True)
    return fx, fy, ph, amp


def _eval_texture(params, xx, yy):
    fx, fy, ph, amp = params
    out = np.empty((3, ) + xx.shape, dtype=np.float64)
    for c in range(3):
        acc = np.full(xx.shape, 0.5)
        for k in range(fx.shape[1]):
            acc += amp[c, k] * np.sin(2 * np.pi * (fx[c, k] * xx +
                                                   fy[c, k] * yy) + ph[c, k])
        out[c] = acc
    return out


def translating_texture(n_frames, height, width, rng, velocity=(1.0, 0.0)):
    """
    Textured field moving by ``velocity`` = (vx, vy) pixels per frame.

    Frame t samples the texture at (x - vx*t, y - vy*t), so for integer
    velocities each frame is an exact shift of the previous one.
    """
    params = _texture_params(rng)
    vx, vy = velocity
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    data = np.empty((n_frames, 3, height, width), dtype=np.float32)
    for t in range(n_frames):
        data[t] = _eval_texture(params, xx - vx * t, yy - vy * t)
    return data


def rotating_pattern(n_frames, height, width, rng):
    """
    Spoked radial pattern rotating about the frame centre.
    """
    spokes = rng.integers(3, 9)
    omega = rng.uniform(0.02, 0.08)
    rings = rng.uniform(0.05, 0.2)
    phase = rng.uniform(0, 2 * np.pi, size=3)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    yy -= (height - 1) / 2.
    xx -= (width - 1) / 2.
    r = np.hypot(xx, yy)
    theta = np.arctan2(yy, xx)
    data = np.empty((n_frames, 3, height, width), dtype=np.float32)
    for t in range(n_frames):
        for c in range(3):
            data[t, c] = (0.5 + 0.25 * np.cos(spokes * (theta - omega * t) +
                                              phase[c]) +
                          0.2 * np.sin(rings * r + phase[c]))
    return data


def noise_floor(n_frames, height, width, rng):
    """
    Temporally uncorrelated uniform noise.
    """
    return rng.random((n_frames, 3, height, width), dtype=np.float32)


def make_synthetic_sequence(kind, n_frames, size, seed, velocity=(1.0, 0.0),
                            fps=30.0):
    """
    Generate a deterministic synthetic video sequence.

    Parameters
    ----------
    kind : {'translating-texture', 'rotating-pattern', 'noise-floor'}
        Kind of content.
    n_frames : int
        Number of frames, at least 5.
    size : int or (int, int)
        Frame size, square or (height, width).
    seed : int
        Seed of the random generator, equal seeds give identical sequences.
    velocity : (float, float), optional
        Pixels per frame (vx, vy) for translating-texture.  Sub-pixel values
        are allowed.
    fps : float, optional
        Frame rate stored in the video dictionary.

    Returns
    -------
    vdic : dict
        Video dictionary.
    data : ndarray
        Frames, float32 [T, 3, H, W] in [0, 1].

    """
    if kind not in KINDS:
        raise ValueError("unknown sequence kind %r, expected one of %s" %
                         (kind, ", ".join(KINDS)))
    if n_frames < TUPLE_LENGTH:
        raise ValueError("n_frames must be at least %d" % TUPLE_LENGTH)
    height, width = _size2hw(size)
    rng = np.random.default_rng(seed)
    if kind == "translating-texture":
        data = translating_texture(n_frames, height, width, rng, velocity)
    elif kind == "rotating-pattern":
        data = rotating_pattern(n_frames, height, width, rng)
    else:
        data = noise_floor(n_frames, height, width, rng)
    np.clip(data, 0.0, 1.0, out=data)
    vdic = fileiobase.guess_vdic(data, fps=fps)
    vdic["source"] = "synthetic:%s:%d" % (kind, seed)
    return vdic, data


###########
# Padding #
###########


def padded_size(height, width, multiple=64):
    """
    Smallest (height, width) divisible by multiple.
    """
    return (-(-height // multiple) * multiple, -(-width // multiple) * multiple)


def pad_frames(data, multiple=64):
    """
    Reflect pad the last two dimensions up to a multiple of ``multiple``.

    Padding is added at the bottom and right only.  Use :func:`crop_frames`
    with the original height and width to undo it.
    """
    height, width = data.shape[-2:]
    ph, pw = padded_size(height, width, multiple)
    if (ph, pw) == (height, width):
        return data
    pad = [(0, 0)] * (data.ndim - 2) + [(0, ph - height), (0, pw - width)]
    return np.pad(data, pad, mode='reflect')


def crop_frames(data, height, width):
    """
    Crop the last two dimensions back to (height, width).
    """
    if data.shape[-2] < height or data.shape[-1] < width:
        raise ValueError("cannot crop %s to %dx%d" %
                         (data.shape[-2:], height, width))
    return data[..., :height, :width]


###################
# Training tuples #
###################


def crop_tuple(frames, patch, rng):
    """
    Crop the same window from every frame of a 5 frame tuple.

    Parameters
    ----------
    frames : ndarray
        Five frames, [5, 3, H, W].
    patch : int or (int, int)
        Patch size, square or (height, width).
    rng : numpy.random.Generator
        Source of the window offset.

    Returns
    -------
    crop : ndarray
        Cropped tuple, [5, 3, ph, pw].
    offset : (int, int)
        Window origin (y, x).

    """
    if frames.shape[0] != TUPLE_LENGTH:
        raise ValueError("a training tuple has %d frames, got %d" %
                         (TUPLE_LENGTH, frames.shape[0]))
    height, width = frames.shape[-2:]
    ph, pw = _size2hw(patch)
    if ph > height or pw > width:
        raise ValueError("patch %dx%d larger than frame %dx%d" %
                         (ph, pw, height, width))
    y0 = int(rng.integers(0, height - ph + 1))
    x0 = int(rng.integers(0, width - pw + 1))
    return frames[..., y0:y0 + ph, x0:x0 + pw], (y0, x0)


def iterate_tuples(sequences, patch, seed, count=None):
    """
    Yield random cropped 5 frame tuples from a list of sequences.

    Each item is drawn by picking a sequence, a start frame and a crop
    window with a generator seeded by ``seed``.  ``count`` limits the number
    of tuples, None iterates forever.
    """
    rng = np.random.default_rng(seed)
    usable = [d for d in sequences if d.shape[0] >= TUPLE_LENGTH]
    if len(usable) == 0:
        raise ValueError("no sequence has at least %d frames" % TUPLE_LENGTH)
    n = 0
    while count is None or n < count:
        data = usable[int(rng.integers(len(usable)))]
        t0 = int(rng.integers(data.shape[0] - TUPLE_LENGTH + 1))
        crop, _ = crop_tuple(data[t0:t0 + TUPLE_LENGTH], patch, rng)
        yield crop
        n += 1


def make_triplets(data, distance=1):
    """
    Cut (previous, middle, next) frame triples for interpolator training.

    Returns an array of shape [N, 3, 3, H, W] where triple i holds frames
    i, i + distance and i + 2 * distance.
    """
    n = data.shape[0] - 2 * distance
    if n <= 0:
        raise ValueError("sequence of %d frames too short for distance %d" %
                         (data.shape[0], distance))
    return np.stack([data[i:i + 2 * distance + 1:distance] for i in range(n)])
