"""Convert the Hosek-Wilkie spectral tables shipped in Mitsuba 3's
`data/sunsky/sunsky_datasets.bin` tensor file into `hw_spectral_v1.bin`.

Usage: python3 convert_hw_tables.py <sunsky_datasets.bin> <out.bin>

Output layout (little endian):
    magic      8 bytes  b"HWSPEC01"
    dims       8 x u32  wavelengths, albedos, turbidities, control points,
                        sky params, solar segments, solar coefficients,
                        limb darkening coefficients
    wavelengths        f64[wl]
    sky_params         f64[wl][albedo][turbidity][ctrl][param]
    sky_radiance       f64[wl][albedo][turbidity][ctrl]
    solar_radiance     f64[wl][turbidity][segment][coef]   (ascending powers)
    limb_darkening     f64[wl][coef]                      (ascending powers)
"""
import struct
import sys

import numpy as np


def load_tensor_file(path):
    b = open(path, "rb").read()
    assert b[:12] == b"tensor_file\x00"
    p = 14
    (n,) = struct.unpack("<I", b[p:p + 4])
    p += 4
    out = {}
    for _ in range(n):
        (l,) = struct.unpack("<H", b[p:p + 2])
        p += 2
        name = b[p:p + l].decode()
        p += l
        (nd,) = struct.unpack("<H", b[p:p + 2])
        p += 2
        dt = b[p]
        p += 1
        (off,) = struct.unpack("<Q", b[p:p + 8])
        p += 8
        shape = struct.unpack("<%dQ" % nd, b[p:p + 8 * nd])
        p += 8 * nd
        dtype = {10: "<f4", 11: "<f8"}[dt]
        out[name] = np.frombuffer(b, dtype=dtype, count=int(np.prod(shape)), offset=off).reshape(shape)
    return out


def main():
    src, dst = sys.argv[1], sys.argv[2]
    d = load_tensor_file(src)
    # source: [turbidity][albedo][ctrl][wl][param]
    sky_params = d["sky_params_spec"].transpose(3, 1, 0, 2, 4)
    # source: [turbidity][albedo][ctrl][wl]
    sky_rad = d["sky_rad_spec"].transpose(3, 1, 0, 2)
    # source: [turbidity][segment][wl][coef]
    solar = d["sun_rad_spec"].transpose(2, 0, 1, 3)
    ld = d["sun_ld_spec"]
    wl = np.arange(320.0, 721.0, 40.0)
    dims = (11, 2, 10, 6, 9, 45, 4, 6)
    assert sky_params.shape == (11, 2, 10, 6, 9)
    assert sky_rad.shape == (11, 2, 10, 6)
    assert solar.shape == (11, 10, 45, 4)
    assert ld.shape == (11, 6)
    with open(dst, "wb") as f:
        f.write(b"HWSPEC01")
        f.write(struct.pack("<8I", *dims))
        for arr in (wl, sky_params, sky_rad, solar, ld):
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


if __name__ == "__main__":
    main()
