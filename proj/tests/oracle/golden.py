"""Independent reference values for the C++ tests.

Recomputes hash/noise samples, a small PNG and a two-splat composite from
first principles with Python and numpy, and writes them to
tests/fixtures/golden/golden.json. Run from the repository root:

    python3 tests/oracle/golden.py
"""

import json
import math
import struct
import zlib
from pathlib import Path

import numpy as np

M64 = (1 << 64) - 1


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & M64
    return x ^ (x >> 31)


def lattice(v):
    if math.isnan(v):
        return 0
    f = math.floor(v)
    return max(-(1 << 62), min(1 << 62, f))


def unit(h):
    return (h >> 11) * 2.0**-53


def hash01(seed, i, k):
    h = splitmix64(seed)
    h = splitmix64(h ^ (lattice(i) & M64))
    h = splitmix64(h ^ (lattice(k) & M64))
    return unit(h)


def lattice_value(seed, x, y, z):
    h = splitmix64(seed ^ 0x6A09E667F3BCC909)
    for c in (x, y, z):
        h = splitmix64(h ^ (c & M64))
    return 2.0 * unit(h) - 1.0


def noise3(seed, x, y, z):
    ix, iy, iz = lattice(x), lattice(y), lattice(z)
    fx, fy, fz = x - math.floor(x), y - math.floor(y), z - math.floor(z)

    def lerp(p, q, w):
        return p * (1.0 - w) + q * w

    c = [[[lattice_value(seed, ix + a, iy + b, iz + d) for d in (0, 1)] for b in (0, 1)] for a in (0, 1)]
    x00 = lerp(c[0][0][0], c[1][0][0], fx)
    x10 = lerp(c[0][1][0], c[1][1][0], fx)
    x01 = lerp(c[0][0][1], c[1][0][1], fx)
    x11 = lerp(c[0][1][1], c[1][1][1], fx)
    return lerp(lerp(x00, x10, fy), lerp(x01, x11, fy), fz)


def png_rgba(width, height, pixels):
    raw = b"".join(b"\x00" + bytes(pixels[y * width * 4:(y + 1) * width * 4]) for y in range(height))

    def chunk(tag, data):
        body = tag + data
        return struct.pack(">I", len(data)) + body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)

    ihdr = struct.pack(">IIBBBBB", width, height, 8, 6, 0, 0, 0)
    return b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr) + chunk(b"IDAT", zlib.compress(raw, 6)) + chunk(b"IEND", b"")


def quat_matrix(q):
    w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def render_two_splats(cam, splats, width, height, background):
    eye, target, up = (np.array(cam[k], dtype=float) for k in ("eye", "target", "up"))
    fwd = (target - eye) / np.linalg.norm(target - eye)
    right = np.cross(fwd, up)
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    W = np.stack([right, down, fwd])
    f = 0.5 * height / math.tan(math.radians(cam["fov"]) / 2)
    projected = []
    for idx, s in enumerate(splats):
        pc = W @ (np.array(s["position"]) - eye)
        if pc[2] <= cam["near"]:
            continue
        J = np.array([[f / pc[2], 0, -f * pc[0] / pc[2] ** 2], [0, f / pc[2], -f * pc[1] / pc[2] ** 2]])
        R = quat_matrix(s["rotation"])
        cov3 = R @ np.diag(np.square(s["scale"])) @ R.T
        cov2 = J @ W @ cov3 @ W.T @ J.T + 0.3 * np.eye(2)
        mean = np.array([f * pc[0] / pc[2] + width / 2, f * pc[1] / pc[2] + height / 2])
        projected.append((pc[2], idx, mean, np.linalg.inv(cov2), np.array(s["rgb"]), s["opacity"]))
    projected.sort(key=lambda p: (p[0], p[1]))
    img = np.zeros((height, width, 3))
    for y in range(height):
        for x in range(width):
            T = 1.0
            c = np.zeros(3)
            for _, _, mean, conic, rgb, alpha in projected:
                if alpha < 1 / 255:
                    continue
                d = np.array([x + 0.5, y + 0.5]) - mean
                a = alpha * math.exp(-0.5 * d @ conic @ d)
                if a < 1 / 255:
                    continue
                c += rgb * a * T
                T *= 1 - a
                if T < 1e-4:
                    break
            img[y, x] = c + T * np.array(background)
    return img


def main():
    out = {}
    samples = [(0, 0.0, 0.0), (1, 5.0, 2.0), (42, 17.9, -3.2), (7, -1.0, 1e6), (123456789, 999.5, 0.25)]
    out["hash01"] = [{"seed": s, "i": i, "k": k, "value": hash01(s, i, k)} for s, i, k in samples]
    points = [(0, 0.0, 0.0, 0.0), (3, 0.5, 0.25, 0.75), (9, -1.3, 2.7, 10.01), (11, 100.9, -50.2, 0.001)]
    out["noise3"] = [{"seed": s, "p": [x, y, z], "value": noise3(s, x, y, z)} for s, x, y, z in points]

    w, h = 5, 3
    pixels = []
    for y in range(h):
        for x in range(w):
            pixels += [255, 255, 255, 255] if (x + y) % 2 == 0 else [10, 20, 30, 255]
    out["png_checkerboard"] = {"width": w, "height": h, "rgba": pixels, "hex": png_rgba(w, h, pixels).hex()}

    cam = {"eye": [0.3, -3.0, 0.8], "target": [0.0, 0.0, 0.1], "up": [0.0, 0.0, 1.0], "fov": 50.0, "near": 0.01}
    splats = [
        {"position": [0.0, 0.0, 0.0], "rotation": [1.0, 0.0, 0.0, 0.0], "scale": [0.25, 0.1, 0.15],
         "rgb": [0.9, 0.2, 0.1], "opacity": 0.8},
        {"position": [0.2, 0.5, 0.2], "rotation": [0.9, 0.1, -0.3, 0.2], "scale": [0.3, 0.2, 0.05],
         "rgb": [0.1, 0.4, 0.9], "opacity": 0.95},
    ]
    width, height, bg = 32, 24, [0.2, 0.2, 0.2]
    img = render_two_splats(cam, splats, width, height, bg)
    out["two_splats"] = {"camera": cam, "splats": splats, "width": width, "height": height,
                         "background": bg, "rgb": img.reshape(-1).tolist()}

    path = Path(__file__).resolve().parents[1] / "fixtures" / "golden" / "golden.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(out, indent=1) + "\n")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
