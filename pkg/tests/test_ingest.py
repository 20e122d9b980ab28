import io
import struct
import zlib

import numpy as np
import pytest

from latticeviz import make_field, marching_cubes, slice_field
from latticeviz.field import histogram
from latticeviz.ingest import (
    BadMagic,
    FieldFileError,
    Truncated,
    UnknownDtype,
    load_field,
    load_raw,
    save_field,
    synth_meteorite_phantom,
    synth_qcd_lumps,
    synthesize,
    write_image_ppm,
    write_image_png,
    write_mesh_off,
)
from latticeviz.geometry import TriangleMesh
from latticeviz.render import Image


def random_field(dims, seed=0, masked=False):
    rng = np.random.default_rng(seed)
    n = int(np.prod(dims))
    mask = rng.random(n) > 0.25 if masked else None
    return make_field(
        dims,
        rng.standard_normal(n),
        mask,
        spacing=tuple(0.5 + i for i in range(len(dims))),
        origin=tuple(-1.0 * i for i in range(len(dims))),
    )


class TestFieldFile:
    def test_round_trip_f64(self, tmp_path):
        f = random_field((4, 4, 4, 4), seed=1)
        p = str(tmp_path / "a.ndvf")
        save_field(f, p)
        g = load_field(p)
        assert g == f
        assert np.array_equal(g.values, f.values)  # bit-identical

    def test_round_trip_f32(self, tmp_path):
        f = random_field((4, 4, 4, 4), seed=2)
        p = str(tmp_path / "a.ndvf")
        save_field(f, p, dtype="f32")
        g = load_field(p)
        assert np.array_equal(g.values, f.values.astype(np.float32).astype(np.float64))
        assert g.dims == f.dims and g.spacing == f.spacing

    def test_masked_round_trip(self, tmp_path):
        f = random_field((3, 5, 2), seed=3, masked=True)
        assert not f.mask.all()
        p = str(tmp_path / "m.ndvf")
        save_field(f, p)
        g = load_field(p)
        assert np.array_equal(g.mask, f.mask)
        assert g == f

    def test_unmasked_file_size_arithmetic(self, tmp_path):
        f = make_field((2, 2), np.arange(4.0))
        p = str(tmp_path / "s.ndvf")
        save_field(f, p)
        # magic 4 + version 4 + nAxes 1 + 2 axes * (4+8+8+1+1) + dtype 1 + hasMask 1
        header = 4 + 4 + 1 + 2 * 22 + 2
        assert (tmp_path / "s.ndvf").stat().st_size == header + 4 * 8
        save_field(f, p, dtype="f32")
        assert (tmp_path / "s.ndvf").stat().st_size == header + 4 * 4

    def test_masked_file_adds_byte_per_voxel(self, tmp_path):
        values = np.arange(4.0)
        all_true = make_field((2, 2), values)
        holed = make_field((2, 2), values, np.array([True, False, True, True]))
        pa, pb = str(tmp_path / "a.ndvf"), str(tmp_path / "b.ndvf")
        save_field(all_true, pa)
        save_field(holed, pb)
        assert (
            (tmp_path / "b.ndvf").stat().st_size
            == (tmp_path / "a.ndvf").stat().st_size + 4
        )

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "x.ndvf"
        p.write_bytes(b"XXXX" + bytes(64))
        with pytest.raises(BadMagic):
            load_field(str(p))

    def test_truncated_payload_names_sizes(self, tmp_path):
        f = make_field((2, 2), np.arange(4.0))
        p = tmp_path / "t.ndvf"
        save_field(f, str(p))
        whole = p.read_bytes()
        p.write_bytes(whole[:-8])  # drop one f64 voxel
        with pytest.raises(Truncated, match="expected 32 bytes"):
            load_field(str(p))

    def test_truncated_header(self, tmp_path):
        p = tmp_path / "h.ndvf"
        p.write_bytes(b"NDVF\x01")
        with pytest.raises(Truncated):
            load_field(str(p))

    def test_unknown_dtype_code(self, tmp_path):
        f = make_field((2, 2), np.arange(4.0))
        p = tmp_path / "d.ndvf"
        save_field(f, str(p))
        raw = bytearray(p.read_bytes())
        raw[-4 * 8 - 2] = 7  # dtype byte sits just before hasMask + payload
        p.write_bytes(bytes(raw))
        with pytest.raises(UnknownDtype):
            load_field(str(p))

    def test_voxel_limit(self, tmp_path):
        buf = io.BytesIO()
        buf.write(b"NDVF")
        buf.write(struct.pack("<IB", 1, 3))
        for extent in (1024, 1024, 1024):
            buf.write(struct.pack("<IddB", extent, 1.0, 0.0, 1) + b"x")
        buf.write(struct.pack("<BB", 1, 0))
        p = tmp_path / "big.ndvf"
        p.write_bytes(buf.getvalue())
        with pytest.raises(FieldFileError, match="limit"):
            load_field(str(p))

    def test_missing_file_has_path_context(self, tmp_path):
        missing = str(tmp_path / "nope.ndvf")
        with pytest.raises(OSError, match="nope.ndvf"):
            load_field(missing)

    def test_axis_metadata_survives(self, tmp_path):
        f = make_field(
            (2, 3),
            np.arange(6.0),
            spacing=(0.25, 4.0),
            origin=(-2.0, 7.5),
            axis_names=("u", "v"),
        )
        p = str(tmp_path / "m.ndvf")
        save_field(f, p)
        g = load_field(p)
        assert g.axis_names == ("u", "v")
        assert g.spacing == (0.25, 4.0)
        assert g.origin == (-2.0, 7.5)


class TestRawImport:
    def test_f_order(self, tmp_path):
        values = np.arange(24, dtype=np.float32)
        p = tmp_path / "v.raw"
        p.write_bytes(values.tobytes())
        f = load_raw(str(p), (2, 3, 4), dtype="f32")
        assert np.array_equal(f.values, values.astype(np.float64))

    def test_c_order_transposes(self, tmp_path):
        grid = np.arange(24, dtype=np.float64).reshape(2, 3, 4)
        p = tmp_path / "v.raw"
        p.write_bytes(grid.tobytes())  # C order: last axis fastest
        f = load_raw(str(p), (2, 3, 4), dtype="f64", order="c")
        assert np.array_equal(f.grid(), grid)

    def test_u8(self, tmp_path):
        p = tmp_path / "v.raw"
        p.write_bytes(bytes([0, 128, 255, 3]))
        f = load_raw(str(p), (4,), dtype="u8")
        assert f.values.tolist() == [0.0, 128.0, 255.0, 3.0]

    def test_size_mismatch(self, tmp_path):
        p = tmp_path / "v.raw"
        p.write_bytes(bytes(10))
        with pytest.raises(Truncated, match="expected 96"):
            load_raw(str(p), (2, 3, 4), dtype="f32")

    def test_bad_dtype(self, tmp_path):
        with pytest.raises(UnknownDtype):
            load_raw(str(tmp_path / "v.raw"), (2,), dtype="i64")


class TestQcdLumps:
    def test_deterministic(self):
        a = synth_qcd_lumps((8, 8, 8, 8), n_lumps=5, seed=11)
        b = synth_qcd_lumps((8, 8, 8, 8), n_lumps=5, seed=11)
        assert np.array_equal(a.values, b.values)
        c = synth_qcd_lumps((8, 8, 8, 8), n_lumps=5, seed=12)
        assert not np.array_equal(a.values, c.values)

    def test_peak_magnitude_pinned(self):
        f = synth_qcd_lumps((8, 8, 8, 8), n_lumps=4, seed=3)
        assert np.abs(f.values).max() == pytest.approx(0.01, abs=1e-15)

    def test_single_lump_peaks_at_its_center(self):
        f = synth_qcd_lumps((12, 12, 12, 12), n_lumps=1, seed=5)
        rng = np.random.default_rng(5)
        center = rng.uniform(0.0, np.full(4, 12.0), size=(1, 4))[0]
        site = tuple(min(11, int(round(c))) for c in center)
        peak_flat = int(np.abs(f.values).argmax())
        peak_site = np.unravel_index(peak_flat, f.dims, order="F")
        assert tuple(peak_site) == site

    def test_metadata(self):
        f = synth_qcd_lumps((4, 5, 6, 7), seed=0)
        assert f.dims == (4, 5, 6, 7)
        assert f.axis_names == ("x", "y", "z", "t")
        assert f.mask.all()

    def test_isolevel_cuts_a_surface_on_some_slice(self):
        f = synth_qcd_lumps((16, 16, 16, 16), n_lumps=12, seed=7)
        assert any(
            marching_cubes(slice_field(f, "t", t), 0.005).triangle_count > 0
            for t in range(16)
        )

    def test_rejects_wrong_rank(self):
        with pytest.raises(ValueError, match="4 axes"):
            synth_qcd_lumps((8, 8, 8))
        with pytest.raises(ValueError, match="lump"):
            synth_qcd_lumps((4, 4, 4, 4), n_lumps=0)


class TestMeteoritePhantom:
    def test_deterministic(self):
        a = synth_meteorite_phantom((24, 24, 24), seed=2)
        b = synth_meteorite_phantom((24, 24, 24), seed=2)
        assert np.array_equal(a.values, b.values)

    def test_value_bands(self):
        f = synth_meteorite_phantom((32, 32, 32), seed=9)
        v = f.values
        air = v < 0.0025
        rock = (v >= 0.0025) & (v < 0.0125)
        core = v >= 0.0125
        assert air.any() and rock.any() and core.any()
        assert v[air].max() <= 0.0015 + 1e-12
        assert v[rock].min() >= 0.004 - 1e-12
        assert v[rock].max() <= 0.011 + 1e-12
        assert 0.013 - 1e-12 <= v[core].min() and v[core].max() <= 0.019 + 1e-12

    def test_air_peak_is_modal_and_below_threshold(self):
        f = synth_meteorite_phantom((32, 32, 32), seed=4)
        h = histogram(f, 64)
        modal = int(h.counts.argmax())
        assert h.bin_edges[modal + 1] < 0.0025

    def test_filtered_histogram_drops_air(self):
        from latticeviz import filter_range

        f = synth_meteorite_phantom((32, 32, 32), seed=4)
        g = filter_range(f, lo=0.0025)
        h = histogram(g, 64)
        assert h.bin_edges[0] >= 0.0025
        assert h.total_counted < f.voxel_count

    def test_core_is_connected_and_inside_rock(self):
        f = synth_meteorite_phantom((28, 28, 28), seed=6)
        core = (f.grid() >= 0.0125)
        labels = _flood_count(core)
        assert labels == 1
        # every boundary-adjacent neighbor of the core is rock, never air:
        # dilate the core by one voxel and look at the shell values
        shell = _dilate(core) & ~core
        shell_values = f.grid()[shell]
        assert shell_values.size > 0
        assert (shell_values >= 0.0025).all()

    def test_rejects_wrong_rank(self):
        with pytest.raises(ValueError, match="3 axes"):
            synth_meteorite_phantom((8, 8, 8, 8))


def _dilate(m):
    out = m.copy()
    for axis in range(3):
        for shift in (1, -1):
            out |= np.roll(m, shift, axis=axis) & _roll_ok(m.shape, axis, shift)
    return out


def _roll_ok(shape, axis, shift):
    ok = np.ones(shape, dtype=bool)
    index = [slice(None)] * 3
    index[axis] = 0 if shift == 1 else -1
    ok[tuple(index)] = False
    return ok


def _flood_count(m):
    """Number of 6-connected components of True voxels."""
    m = m.copy()
    count = 0
    while m.any():
        count += 1
        seed = np.unravel_index(int(np.argmax(m)), m.shape)
        frontier = [seed]
        m[seed] = False
        while frontier:
            i, j, k = frontier.pop()
            for di, dj, dk in (
                (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1),
            ):
                ni, nj, nk = i + di, j + dj, k + dk
                if (
                    0 <= ni < m.shape[0]
                    and 0 <= nj < m.shape[1]
                    and 0 <= nk < m.shape[2]
                    and m[ni, nj, nk]
                ):
                    m[ni, nj, nk] = False
                    frontier.append((ni, nj, nk))
    return count


class TestSynthesizeRegistry:
    def test_qcd_by_name(self):
        f = synthesize("qcdLumps", {"dims": (6, 6, 6, 6), "seed": 2, "lumps": 3})
        assert f == synth_qcd_lumps((6, 6, 6, 6), n_lumps=3, seed=2)

    def test_meteorite_by_name(self):
        f = synthesize("meteoritePhantom", {"dims": (16, 16, 16)})
        assert f == synth_meteorite_phantom((16, 16, 16), seed=0)

    def test_unknown_generator(self):
        with pytest.raises(KeyError, match="unknown generator"):
            synthesize("plasma", {})

    def test_unknown_parameter(self):
        with pytest.raises(ValueError, match="parameters"):
            synthesize("meteoritePhantom", {"dims": (8, 8, 8), "vortices": 3})

    def test_missing_dims(self):
        with pytest.raises(ValueError, match="dims"):
            synthesize("qcdLumps", {"seed": 1})


class TestWriters:
    def test_ppm_one_red_pixel(self, tmp_path):
        img = Image(1, 1, np.array([255, 0, 0, 255], dtype=np.uint8))
        p = tmp_path / "r.ppm"
        write_image_ppm(img, str(p))
        assert p.read_bytes() == b"P6\n1 1\n255\n\xff\x00\x00"

    def test_png_decodes_back(self, tmp_path):
        rng = np.random.default_rng(8)
        rgba = rng.integers(0, 256, size=5 * 3 * 4, dtype=np.uint8)
        img = Image(5, 3, rgba)
        p = tmp_path / "i.png"
        write_image_png(img, str(p))
        data = p.read_bytes()
        assert data[:8] == b"\x89PNG\r\n\x1a\n"
        w, h = struct.unpack(">II", data[16:24])
        assert (w, h) == (5, 3)
        idat_start = data.index(b"IDAT") + 4
        idat_len = struct.unpack(">I", data[idat_start - 8 : idat_start - 4])[0]
        raw = zlib.decompress(data[idat_start : idat_start + idat_len])
        rows = np.frombuffer(raw, dtype=np.uint8).reshape(3, 1 + 5 * 4)
        assert (rows[:, 0] == 0).all()  # filter byte per scanline
        assert np.array_equal(rows[:, 1:].reshape(-1), rgba)

    def test_off_empty_mesh(self, tmp_path):
        mesh = TriangleMesh(np.zeros(0), np.zeros(0, dtype=int), np.zeros(0))
        p = tmp_path / "e.off"
        write_mesh_off(mesh, str(p))
        assert p.read_text() == "OFF\n0 0 0\n"

    def test_off_round_trip_exact(self, tmp_path):
        vertices = np.array([0.1, -2.5, 3.0000000000000004, 1e-17, 7.25, -0.0])
        mesh = TriangleMesh(vertices, np.array([0, 1, 0]), np.zeros(2))
        p = tmp_path / "m.off"
        write_mesh_off(mesh, str(p))
        lines = p.read_text().splitlines()
        assert lines[0] == "OFF"
        assert lines[1] == "2 1 0"
        parsed = [float(tok) for line in lines[2:4] for tok in line.split()]
        assert np.array_equal(np.array(parsed), vertices)
        assert lines[4] == "3 0 1 0"

    def test_write_errors_carry_path(self, tmp_path):
        img = Image(1, 1, np.array([1, 2, 3, 255], dtype=np.uint8))
        bad = str(tmp_path / "no" / "dir" / "x.ppm")
        with pytest.raises(OSError, match="x.ppm"):
            write_image_ppm(img, bad)
