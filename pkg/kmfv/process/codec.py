"""
Video encode and decode pipelines.

Frames are reflect padded to the model's size multiple, coded in the order
of :func:`kmfv.process.gop.build_schedule` and written as one container
step per frame.  Every B-frame is predicted from decoder-identical
reconstructions, and the decoder recomputes the interpolated reference, so
decoded frames match the encoder's reconstructions exactly.
"""

import numpy as np
import torch

from ..analysis import metrics
from ..fileio import bitstream
from ..fileio import fileiobase
from . import gop
from . import nets
from . import synth


def _frame_tensor(frame, device):
    return torch.from_numpy(np.ascontiguousarray(frame))[None].to(device)


def _to_numpy(x, height, width):
    return synth.crop_frames(x[0].cpu().numpy(), height, width)


def encode_video(data, model, gop_size=8, verb=False):
    """
    Encode frames into a container.

    Parameters
    ----------
    data : ndarray
        Frames, float32 [T, 3, H, W] in [0, 1], H and W even.
    model : VideoCodec
        Trained model, its ``ckpt_id`` is stored in the container.
    gop_size : int
        Distance between I-frames (1 to 255).
    verb : bool
        Print a line per coded frame.

    Returns
    -------
    cdic : dict
        Container dictionary, see :mod:`kmfv.fileio.bitstream`.
    stats : list of dict
        Per step, in coding order: display_index, gop, frame_type, level,
        bits (actual chunk payload bits), est_bits, psnr and escapes.
    recon : ndarray
        Encoder side reconstructions in display order, [T, 3, H, W].

    """
    fileiobase.check_frames(data)
    if not 1 <= gop_size <= 255:
        raise ValueError("gop_size must be in 1..255")
    nframes, _, height, width = data.shape
    device = next(model.parameters()).device
    model.eval()
    model.update_tables()
    padded = synth.pad_frames(np.asarray(data, dtype=np.float32),
                              nets.frame_multiple(model.cfg))
    schedule = gop.build_schedule(nframes, gop_size)
    release = gop.release_after(schedule)
    cdic = bitstream.create_blank_cdic(width, height, gop_size, model.ckpt_id,
                                       interp=model.interpolator is not None)

    dpb = dict()
    recon = np.empty(data.shape, dtype=np.float32)
    stats = []
    for pos, s in enumerate(schedule["steps"]):
        d = s["display_index"]
        x = _frame_tensor(padded[d], device)
        if s["frame_type"] == "I":
            out = model.image_codec.compress(x)
        else:
            refs = model.references(dpb[s["ref_prev"]], dpb[s["ref_next"]])
            out = model.bframe_codec.compress(x, refs)
        dpb[d] = out["x_hat"]
        recon[d] = _to_numpy(out["x_hat"], height, width)
        bitstream.add_step(cdic, d, s["frame_type"], out["z"], out["y"])
        stats.append({"display_index": d, "gop": gop.gop_of(d, gop_size),
                      "frame_type": s["frame_type"],
                      "level": s["level"],
                      "bits": 8 * (len(out["z"]) + len(out["y"])),
                      "est_bits": out["est_bits"],
                      "psnr": metrics.rgb_psnr(data[d], recon[d]),
                      "escapes": out["escapes"]})
        for k in [k for k in dpb if release[k] <= pos]:
            del dpb[k]
        if verb:
            st = stats[-1]
            print("encode %d %s L%d bits %d est %.0f psnr %.2f" % (
                d, st["frame_type"], st["level"], st["bits"],
                st["est_bits"], st["psnr"]))
    return cdic, stats, recon


def check_container(cdic, model):
    """
    Verify that a container can be decoded by model.

    Raises ModelMismatchError for other parameters and BitstreamError when
    the steps differ from the schedule implied by the header.
    """
    if cdic["model_id"] != model.ckpt_id:
        raise bitstream.ModelMismatchError(model.ckpt_id, cdic["model_id"])
    interp_flag = bool(cdic["flags"] & bitstream.FLAG_INTERP)
    if interp_flag != (model.interpolator is not None):
        raise bitstream.BitstreamError("interpolator flag does not match "
                                       "the model")
    if cdic["frame_count"] == 0:
        raise bitstream.BitstreamError("container holds no frames")
    schedule = gop.build_schedule(cdic["frame_count"], cdic["gop_size"])
    for s, c in zip(schedule["steps"], cdic["steps"]):
        if (s["display_index"], s["frame_type"]) != (c["display_index"],
                                                     c["frame_type"]):
            raise bitstream.BitstreamError(
                "step %d is %s%d, schedule expects %s%d" % (
                    s["coding_order"], c["frame_type"], c["display_index"],
                    s["frame_type"], s["display_index"]))
    return schedule


def decode_video(cdic, model, verb=False):
    """
    Decode a container.

    Returns
    -------
    vdic : dict
        Video dictionary.
    data : ndarray
        Decoded frames in display order, float32 [T, 3, H, W].

    """
    schedule = check_container(cdic, model)
    device = next(model.parameters()).device
    model.eval()
    model.update_tables()
    height, width = cdic["height"], cdic["width"]
    ph, pw = synth.padded_size(height, width, nets.frame_multiple(model.cfg))
    release = gop.release_after(schedule)

    dpb = dict()
    data = np.empty((cdic["frame_count"], 3, height, width), dtype=np.float32)
    for pos, (s, c) in enumerate(zip(schedule["steps"], cdic["steps"])):
        d = s["display_index"]
        if s["frame_type"] == "I":
            x_hat = model.image_codec.decompress(c["z"], c["y"], (ph, pw))
        else:
            refs = model.references(dpb[s["ref_prev"]], dpb[s["ref_next"]])
            x_hat = model.bframe_codec.decompress(c["z"], c["y"], refs)
        dpb[d] = x_hat.to(device)
        data[d] = _to_numpy(x_hat, height, width)
        for k in [k for k in dpb if release[k] <= pos]:
            del dpb[k]
        if verb:
            print("decode %d %s" % (d, s["frame_type"]))
    vdic = fileiobase.guess_vdic(data)
    vdic["source"] = "kmfv:%08x" % cdic["model_id"]
    return vdic, data
