"""Binary archive formats for maps, descriptors, and indexes.

All integers and floats are little-endian. A map record stores the raw
pointset and trajectory; a descriptor record stores the word triples,
change words, and raw relative positions (the rotation payload is never
archived; only live queries rotate). An index directory holds
header.json, postings.bin, and one descriptor record per map.

Map record (.lmap):     LMAP1\\n  u16 dataset-name length, utf-8 name,
  u32 map index, u32 n_points, u32 n_poses, f64 arc_start, f64 arc_end,
  f64 points [n,2], u32 point_pose_index [n], f64 trajectory [m,3].
Descriptor record (.lmd): LMDR1\\n  id as above, f64 viewpoint x, y,
  theta, u8 method (0 cog / 1 cor), f64 q, f64 R, u16 A, u16 S, u16 B,
  u64 projection seed, f64 change R, u16 change A, u16 change S,
  u32 n, u16 words_a [n], i16 words_x [n], i16 words_y [n],
  u64 change_words [n], f64 positions [n,2].
Postings file:          LPST1\\n  u32 word count, then per word u32
  entry count and entries of (u32 map ordinal, u32 feature index).
"""

import json
import struct
from pathlib import Path

import numpy as np

from lmdkit.descriptor import DescriptorConfig, LocalMapDescriptor
from lmdkit.ingest import LocalMap
from lmdkit.planner import SceneFrame, Viewpoint
from lmdkit.retrieval import InvertedIndex, PyramidConfig

MAP_MAGIC = b"LMAP1\n"
LMD_MAGIC = b"LMDR1\n"
POSTINGS_MAGIC = b"LPST1\n"


def _pack_id(map_id):
    dataset, index = map_id
    name = str(dataset).encode("utf-8")
    return struct.pack("<H", len(name)) + name + struct.pack("<I", int(index))


def _unpack_id(buf, pos):
    (nlen,) = struct.unpack_from("<H", buf, pos)
    pos += 2
    name = bytes(buf[pos : pos + nlen]).decode("utf-8")
    pos += nlen
    (index,) = struct.unpack_from("<I", buf, pos)
    return (name, index), pos + 4


def _array(buf, pos, dtype, count):
    arr = np.frombuffer(buf, dtype=dtype, count=count, offset=pos)
    return arr.copy(), pos + arr.nbytes


def save_local_map(local_map, path):
    n = len(local_map.points)
    m = len(local_map.trajectory)
    blob = bytearray(MAP_MAGIC)
    blob += _pack_id(local_map.id)
    blob += struct.pack("<IIdd", n, m, local_map.arc_start, local_map.arc_end)
    blob += np.ascontiguousarray(local_map.points, dtype="<f8").tobytes()
    blob += np.ascontiguousarray(local_map.point_pose_index, dtype="<u4").tobytes()
    blob += np.ascontiguousarray(local_map.trajectory, dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(blob))


def load_local_map(path):
    buf = Path(path).read_bytes()
    if buf[: len(MAP_MAGIC)] != MAP_MAGIC:
        raise ValueError(f"{path}: not a map record")
    map_id, pos = _unpack_id(buf, len(MAP_MAGIC))
    n, m, arc_start, arc_end = struct.unpack_from("<IIdd", buf, pos)
    pos += struct.calcsize("<IIdd")
    points, pos = _array(buf, pos, "<f8", n * 2)
    pose_index, pos = _array(buf, pos, "<u4", n)
    trajectory, pos = _array(buf, pos, "<f8", m * 3)
    return LocalMap(
        id=map_id,
        points=points.reshape(n, 2),
        trajectory=trajectory.reshape(m, 3),
        arc_start=arc_start,
        arc_end=arc_end,
        point_pose_index=pose_index.astype(np.int64),
    )


def save_lmd(lmd, path):
    n = len(lmd)
    vp = lmd.viewpoint
    cfg = lmd.retrieval_cfg
    ccfg = lmd.change_cfg
    for arr in (lmd.words_x, lmd.words_y):
        if arr.size and (arr.max() > 32767 or arr.min() < -32768):
            raise ValueError("pose word exceeds the archived i16 range")
    blob = bytearray(LMD_MAGIC)
    blob += _pack_id(lmd.map_id)
    blob += struct.pack(
        "<dddBd", vp.position[0], vp.position[1], vp.frame.theta, 1 if vp.method == "cor" else 0, lmd.q
    )
    blob += struct.pack("<dHHHQ", cfg.R, cfg.A, cfg.S, cfg.B, cfg.seed)
    blob += struct.pack("<dHH", ccfg.R, ccfg.A, ccfg.S)
    blob += struct.pack("<I", n)
    blob += np.ascontiguousarray(lmd.words_a, dtype="<u2").tobytes()
    blob += np.ascontiguousarray(lmd.words_x, dtype="<i2").tobytes()
    blob += np.ascontiguousarray(lmd.words_y, dtype="<i2").tobytes()
    blob += np.ascontiguousarray(lmd.change_words, dtype="<u8").tobytes()
    blob += np.ascontiguousarray(lmd.positions, dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(blob))


def load_lmd(path):
    buf = Path(path).read_bytes()
    if buf[: len(LMD_MAGIC)] != LMD_MAGIC:
        raise ValueError(f"{path}: not a descriptor record")
    map_id, pos = _unpack_id(buf, len(LMD_MAGIC))
    x, y, theta, method, q = struct.unpack_from("<dddBd", buf, pos)
    pos += struct.calcsize("<dddBd")
    r, a, s, b, seed = struct.unpack_from("<dHHHQ", buf, pos)
    pos += struct.calcsize("<dHHHQ")
    cr, ca, cs = struct.unpack_from("<dHH", buf, pos)
    pos += struct.calcsize("<dHH")
    (n,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    words_a, pos = _array(buf, pos, "<u2", n)
    words_x, pos = _array(buf, pos, "<i2", n)
    words_y, pos = _array(buf, pos, "<i2", n)
    change_words, pos = _array(buf, pos, "<u8", n)
    positions, pos = _array(buf, pos, "<f8", n * 2)
    vp = Viewpoint(
        position=np.array([x, y]),
        frame=SceneFrame(theta=theta),
        method="cor" if method == 1 else "cog",
    )
    return LocalMapDescriptor(
        map_id=map_id,
        viewpoint=vp,
        words_a=words_a,
        words_x=words_x.astype(np.int32),
        words_y=words_y.astype(np.int32),
        change_words=change_words,
        positions=positions.reshape(n, 2),
        retrieval_cfg=DescriptorConfig(R=r, A=a, S=s, B=b, seed=seed),
        change_cfg=DescriptorConfig(R=cr, A=ca, S=cs, seed=seed),
        q=q,
    )


def save_index(index, out_dir):
    out = Path(out_dir)
    (out / "records").mkdir(parents=True, exist_ok=True)
    map_ids = sorted(index.descriptors)
    header = {
        "retrieval": _cfg_dict(index.retrieval_cfg),
        "change": _cfg_dict(next(iter(index.descriptors.values())).change_cfg)
        if index.descriptors
        else None,
        "pyramid": {"L": index.pyramid_cfg.L, "W": index.pyramid_cfg.W},
        "q": index.q,
        "maps": [[d, i] for d, i in map_ids],
    }
    (out / "header.json").write_text(json.dumps(header, indent=1, sort_keys=True))
    for ordinal, map_id in enumerate(map_ids):
        save_lmd(index.descriptors[map_id], out / "records" / f"{ordinal:05d}.lmd")
    ord_of = {map_id: k for k, map_id in enumerate(map_ids)}
    n_words = 1 << index.retrieval_cfg.B
    blob = bytearray(POSTINGS_MAGIC)
    blob += struct.pack("<I", n_words)
    for word in range(n_words):
        entries = index.postings.get(word, [])
        blob += struct.pack("<I", len(entries))
        for map_id, feat in entries:
            blob += struct.pack("<II", ord_of[map_id], feat)
    (out / "postings.bin").write_bytes(bytes(blob))


def _cfg_dict(cfg):
    return {
        "R": cfg.R,
        "A": cfg.A,
        "S": cfg.S,
        "B": cfg.B,
        "seed": cfg.seed,
        "fine_resolution": cfg.fine_resolution,
    }


def _cfg_from(d):
    return DescriptorConfig(
        R=d["R"], A=d["A"], S=d["S"], B=d["B"], seed=d["seed"], fine_resolution=d["fine_resolution"]
    )


def load_index(in_dir):
    src = Path(in_dir)
    header = json.loads((src / "header.json").read_text())
    index = InvertedIndex(
        _cfg_from(header["retrieval"]),
        PyramidConfig(L=header["pyramid"]["L"], W=header["pyramid"]["W"]),
        header["q"],
    )
    map_ids = [tuple(m) for m in header["maps"]]
    for ordinal, map_id in enumerate(map_ids):
        lmd = load_lmd(src / "records" / f"{ordinal:05d}.lmd")
        if lmd.map_id != map_id:
            raise ValueError(f"index record {ordinal} does not match the header")
        index.descriptors[map_id] = lmd
    buf = (src / "postings.bin").read_bytes()
    if buf[: len(POSTINGS_MAGIC)] != POSTINGS_MAGIC:
        raise ValueError("bad postings file")
    pos = len(POSTINGS_MAGIC)
    (n_words,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    for word in range(n_words):
        (count,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        if count == 0:
            continue
        entries = []
        for _ in range(count):
            ordinal, feat = struct.unpack_from("<II", buf, pos)
            pos += 8
            entries.append((map_ids[ordinal], feat))
        index.postings[word] = entries
    return index
