import numpy as np
import pytest

from latticeviz import make_field
from latticeviz.evaluator import Environment, EvalError, evaluate, run_script
from latticeviz.language import (
    Anim,
    CameraSet,
    ColorbarShow,
    CutAdd,
    Filter,
    HistShow,
    IsoAdd,
    IsoRemove,
    Layout,
    Load,
    Mode,
    OpacitySet,
    PaletteSet,
    Project,
    RangeSet,
    Slice,
    Snapshot,
    Source,
    Synth,
    ViewAdd,
    ViewRemove,
    parse,
)
from latticeviz.session import new_session, session_to_doc, view_field


def fake_synthesize(name, params):
    if name not in ("blob", "attenuation"):
        raise KeyError(f"unknown generator {name!r}")
    dims = tuple(params.get("dims", (8, 8, 8)))
    rng = np.random.default_rng(int(params.get("seed", 0)))
    values = rng.random(int(np.prod(dims)))
    if name == "attenuation":
        values *= 0.02
    return make_field(dims, values)


def fake_load(path):
    if path != "runs/a.ndvf":
        raise OSError(f"no such file {path}")
    rng = np.random.default_rng(42)
    return make_field((4, 4, 4, 4), rng.random(256))


SCRIPTS = {
    "good.vl": "synth blob dims=4x4x4 seed=1 as inner\nview add inner\n",
    "mixed.vl": "mode sync\nslice missing axis=t index=0 as x\nmode camera\n",
}

def fake_read_text(path):
    try:
        return SCRIPTS[path]
    except KeyError:
        raise FileNotFoundError(path) from None


ENV = Environment(
    load_path=fake_load,
    synthesize=fake_synthesize,
    read_text=fake_read_text,
)


def start():
    return new_session()


def with_blob(dims=(6, 6, 6), name="blob", seed=3):
    s, ev = evaluate(
        start(),
        Synth("blob", (("dims", dims), ("seed", seed)), name),
        ENV,
    )
    return s


def run(session, *asts):
    events = []
    for ast in asts:
        session, ev = evaluate(session, ast, ENV)
        events.extend(ev)
    return session, events


class TestDatasets:
    def test_load(self):
        s, ev = evaluate(start(), Load("runs/a.ndvf", "run"), ENV)
        assert s.datasets["run"].dims == (4, 4, 4, 4)
        assert s.recipes["run"] == ("load", "runs/a.ndvf")
        assert ev == [{"event": "datasetAdded", "name": "run"}]

    def test_load_missing_file(self):
        with pytest.raises(EvalError) as e:
            evaluate(start(), Load("runs/z.ndvf", "run"), ENV)
        assert e.value.kind == "io-error"

    def test_load_without_backend(self):
        with pytest.raises(EvalError) as e:
            evaluate(start(), Load("runs/a.ndvf", "run"), Environment())
        assert e.value.kind == "no-io"

    def test_name_collision(self):
        s = with_blob()
        with pytest.raises(EvalError) as e:
            evaluate(s, Synth("blob", (), "blob"), ENV)
        assert e.value.kind == "name-exists"

    def test_unknown_generator(self):
        with pytest.raises(EvalError) as e:
            evaluate(start(), Synth("vortex", (), "v"), ENV)
        assert e.value.kind == "unknown-generator"

    def test_slice_single(self):
        s, ev = evaluate(start(), Load("runs/a.ndvf", "run"), ENV)
        s, ev = evaluate(s, Slice("run", "t", 2, "frame"), ENV)
        assert s.datasets["frame"].dims == (4, 4, 4)
        assert s.recipes["frame"] == ("slice", ("load", "runs/a.ndvf"), "t", 2)
        assert ev == [{"event": "datasetAdded", "name": "frame"}]

    def test_slice_range_expands_with_suffixes(self):
        s, _ = evaluate(start(), Load("runs/a.ndvf", "run"), ENV)
        s, ev = evaluate(s, Slice("run", "t", (0, 3), "s"), ENV)
        assert [e["name"] for e in ev] == ["s0", "s1", "s2", "s3"]
        for i in range(4):
            assert s.datasets[f"s{i}"].dims == (4, 4, 4)
        # each slice is the matching hyperplane of the source
        src = s.datasets["run"].grid()
        assert np.array_equal(s.datasets["s2"].grid(), src[:, :, :, 2])

    def test_slice_unknown_source(self):
        with pytest.raises(EvalError) as e:
            evaluate(start(), Slice("nope", "t", 0, "s"), ENV)
        assert e.value.kind == "unknown-dataset"

    def test_slice_missing_axis_is_distinct_error(self):
        s = with_blob()  # 3-D: no t axis
        with pytest.raises(EvalError) as e:
            evaluate(s, Slice("blob", "t", 0, "s"), ENV)
        assert e.value.kind == "unknown-axis"

    def test_slice_index_out_of_range(self):
        s = with_blob(dims=(4, 4, 4))
        with pytest.raises(EvalError) as e:
            evaluate(s, Slice("blob", "z", 9, "s"), ENV)
        assert e.value.kind == "bad-index"

    def test_slice_range_collision_is_atomic(self):
        s, _ = evaluate(start(), Load("runs/a.ndvf", "run"), ENV)
        s, _ = evaluate(s, Synth("blob", (), "s2"), ENV)
        before = session_to_doc(s)
        with pytest.raises(EvalError) as e:
            evaluate(s, Slice("run", "t", (0, 3), "s"), ENV)
        assert e.value.kind == "name-exists"
        assert session_to_doc(s) == before
        assert "s0" not in s.datasets

    def test_project(self):
        s, _ = evaluate(start(), Load("runs/a.ndvf", "run"), ENV)
        s, ev = evaluate(s, Project("run", "t", "mean", "avg"), ENV)
        assert s.datasets["avg"].dims == (4, 4, 4)
        assert np.allclose(
            s.datasets["avg"].grid(), s.datasets["run"].grid().mean(axis=3)
        )

    def test_project_unknown_reducer(self):
        s, _ = evaluate(start(), Load("runs/a.ndvf", "run"), ENV)
        with pytest.raises(EvalError) as e:
            evaluate(s, Project("run", "t", "median", "m"), ENV)
        assert e.value.kind == "unknown-reducer"

    def test_filter_rebinds_in_place(self):
        s = with_blob()
        n_before = int(s.datasets["blob"].mask.sum())
        s, ev = evaluate(s, Filter("blob", lo=0.5), ENV)
        f = s.datasets["blob"]
        assert int(f.mask.sum()) < n_before
        assert np.all(f.values[f.mask] >= 0.5)
        assert ev == [{"event": "datasetChanged", "name": "blob"}]
        assert s.recipes["blob"][0] == "filter"
        s, _ = evaluate(s, Filter("blob", hi=0.8), ENV)
        assert s.recipes["blob"] == (
            "filter", ("filter", ("synth", "blob", (("dims", (6, 6, 6)), ("seed", 3))), 0.5, None),
            None, 0.8,
        )

    def test_filter_bad_bounds(self):
        s = with_blob()
        with pytest.raises(EvalError) as e:
            evaluate(s, Filter("blob", lo=0.9, hi=0.1), ENV)
        assert e.value.kind == "invalid-filter"


class TestViewCommands:
    def test_add_and_remove(self):
        s = with_blob()
        s, ev = evaluate(s, ViewAdd("blob"), ENV)
        assert ev == [{"event": "viewAdded", "viewId": 0}]
        assert len(s.views) == 1
        s, ev = evaluate(s, ViewRemove(0), ENV)
        assert s.views == ()
        assert ev == [{"event": "viewRemoved", "viewId": 0}]

    def test_add_needs_3d(self):
        s, _ = evaluate(start(), Load("runs/a.ndvf", "run"), ENV)
        with pytest.raises(EvalError) as e:
            evaluate(s, ViewAdd("run"), ENV)
        assert e.value.kind == "needs-3d"

    def test_add_occupied_cell(self):
        s, _ = run(with_blob(), ViewAdd("blob", cell=(0, 0)))
        with pytest.raises(EvalError) as e:
            evaluate(s, ViewAdd("blob", cell=(0, 0)), ENV)
        assert e.value.kind == "bad-cell"

    def test_remove_unknown_is_atomic(self):
        s = with_blob()
        before = session_to_doc(s)
        with pytest.raises(EvalError) as e:
            evaluate(s, ViewRemove(7), ENV)
        assert e.value.kind == "unknown-view"
        assert session_to_doc(s) == before

    def test_iso_add_remove(self):
        s, _ = run(with_blob(), ViewAdd("blob"))
        s, ev = evaluate(s, IsoAdd(0, 0.25), ENV)
        s, _ = evaluate(s, IsoAdd(0, 0.75), ENV)
        assert s.views[0].iso_levels == (0.25, 0.75)
        assert ev == [{"event": "viewChanged", "viewId": 0}]
        s, _ = evaluate(s, IsoAdd(0, 0.25), ENV)  # duplicate is a no-op
        assert s.views[0].iso_levels == (0.25, 0.75)
        s, _ = evaluate(s, IsoRemove(0, 0.25), ENV)
        assert s.views[0].iso_levels == (0.75,)
        s, _ = evaluate(s, IsoRemove(0, None), ENV)
        assert s.views[0].iso_levels == ()

    def test_iso_remove_missing_level(self):
        s, _ = run(with_blob(), ViewAdd("blob"))
        with pytest.raises(EvalError) as e:
            evaluate(s, IsoRemove(0, 0.5), ENV)
        assert e.value.kind == "unknown-iso"

    def test_cut_axis_form(self):
        s, _ = run(with_blob(), ViewAdd("blob"))
        s, _ = evaluate(s, CutAdd(0, axis="z"), ENV)
        s, _ = evaluate(s, CutAdd(0, axis="x", offset=2.5), ENV)
        planes = s.views[0].cut_planes
        assert planes[0].axis == 2 and planes[0].offset is None
        assert planes[1].axis == 0 and planes[1].offset == 2.5

    def test_cut_unknown_axis(self):
        s, _ = run(with_blob(), ViewAdd("blob"))
        with pytest.raises(EvalError) as e:
            evaluate(s, CutAdd(0, axis="t"), ENV)
        assert e.value.kind == "unknown-axis"

    def test_cut_normal_is_normalized(self):
        s, _ = run(with_blob(), ViewAdd("blob"))
        s, _ = evaluate(s, CutAdd(0, normal=(1, 1, 0), offset=3.0), ENV)
        n = s.views[0].cut_planes[0].normal
        r = 1.0 / np.sqrt(2.0)
        assert np.allclose(n, (r, r, 0.0))

    def test_cut_zero_normal(self):
        s, _ = run(with_blob(), ViewAdd("blob"))
        with pytest.raises(EvalError) as e:
            evaluate(s, CutAdd(0, normal=(0, 0, 0)), ENV)
        assert e.value.kind == "bad-normal"

    def test_palette_set_keeps_range_and_opacity(self):
        s, _ = run(with_blob(), ViewAdd("blob"))
        before = s.views[0].tf
        s, _ = evaluate(s, PaletteSet(0, "rainbow"), ENV)
        tf = s.views[0].tf
        assert tf.palette_name == "rainbow"
        assert tf.scalar_range == before.scalar_range
        assert tf.opacity_points == before.opacity_points
        assert len(tf.color_points) == 5

    def test_palette_all(self):
        s, _ = run(with_blob(), ViewAdd("blob"), ViewAdd("blob"))
        s, ev = evaluate(s, PaletteSet("all", "heat"), ENV)
        assert all(v.tf.palette_name == "heat" for v in s.views)
        assert len(ev) == 2

    def test_palette_unknown(self):
        s, _ = run(with_blob(), ViewAdd("blob"))
        with pytest.raises(EvalError) as e:
            evaluate(s, PaletteSet(0, "viridis"), ENV)
        assert e.value.kind == "unknown-palette"

    def test_opacity_set(self):
        s, _ = run(with_blob(), ViewAdd("blob"))
        s, _ = evaluate(s, OpacitySet(0, ((0.0, 0.0), (0.5, 0.1), (1.0, 0.9))), ENV)
        tf = s.views[0].tf
        assert tf.opacity_points == ((0.0, 0.0), (0.5, 0.1), (1.0, 0.9))

    def test_opacity_set_rejects_bad_points(self):
        s, _ = run(with_blob(), ViewAdd("blob"))
        with pytest.raises(EvalError) as e:
            evaluate(s, OpacitySet(0, ((0.5, 0.0), (0.1, 1.0))), ENV)
        assert e.value.kind == "bad-opacity"

    def test_range_set(self):
        s, _ = run(with_blob(), ViewAdd("blob"))
        s, _ = evaluate(s, RangeSet(0, 0.002, 0.02), ENV)
        assert s.views[0].window == (0.002, 0.02)

    def test_range_set_rejects_empty(self):
        s, _ = run(with_blob(), ViewAdd("blob"))
        with pytest.raises(EvalError) as e:
            evaluate(s, RangeSet(0, 0.5, 0.5), ENV)
        assert e.value.kind == "bad-range"

    def test_hist_show_reports_distribution(self):
        s, _ = run(with_blob(), ViewAdd("blob"))
        s, ev = evaluate(s, HistShow(0, 16), ENV)
        assert s.views[0].show_histogram and s.views[0].hist_bins == 16
        (e,) = ev
        assert e["event"] == "histogram" and len(e["counts"]) == 16
        assert sum(e["counts"]) == 6 * 6 * 6
        assert len(e["edges"]) == 17

    def test_filtered_histogram_has_no_low_tail(self):
        s, _ = evaluate(
            start(), Synth("attenuation", (("dims", (8, 8, 8)), ("seed", 1)), "m"), ENV
        )
        raw, _ = evaluate(s, ViewAdd("m"), ENV)
        _, ev_raw = evaluate(raw, HistShow(0, 32), ENV)
        assert ev_raw[0]["edges"][0] < 0.0025  # air peak present before the cut
        s, _ = evaluate(s, Filter("m", lo=0.0025), ENV)
        s, _ = evaluate(s, ViewAdd("m"), ENV)
        s, ev = evaluate(s, HistShow(0, 32), ENV)
        assert ev[0]["edges"][0] >= 0.0025
        assert sum(ev[0]["counts"]) < 8 * 8 * 8

    def test_colorbar_show(self):
        s, _ = run(with_blob(), ViewAdd("blob"))
        s, ev = evaluate(s, ColorbarShow(0), ENV)
        assert s.views[0].show_colorbar
        assert ev == [{"event": "viewChanged", "viewId": 0}]


class TestSessionCommands:
    def test_mode(self):
        s, ev = evaluate(start(), Mode("sync"), ENV)
        assert s.mode == "sync"
        assert ev == [{"event": "modeChanged", "mode": "sync"}]

    def test_camera_partial_update(self):
        s0 = start()
        s, ev = evaluate(s0, CameraSet(position=(1.0, -30.0, 4.0)), ENV)
        assert s.camera.position == (1.0, -30.0, 4.0)
        assert s.camera.focal_point == s0.camera.focal_point
        assert ev == [{"event": "cameraChanged"}]
        s, _ = evaluate(s, CameraSet(fov=45.0), ENV)
        assert s.camera.vertical_fov_degrees == 45.0
        assert s.camera.position == (1.0, -30.0, 4.0)

    def test_camera_degenerate(self):
        s = start()
        focal = s.camera.focal_point
        with pytest.raises(EvalError) as e:
            evaluate(s, CameraSet(position=focal), ENV)
        assert e.value.kind == "bad-camera"

    def test_anim_orbits_camera(self):
        s = start()
        s2, ev = evaluate(s, Anim("orbit", "z", 90.0, 3), ENV)
        assert ev == [{"event": "animation", "kind": "orbit", "frames": 3}]
        assert s2.camera.position != s.camera.position
        full, _ = evaluate(s, Anim("orbit", "z", 360.0, 4), ENV)
        assert np.allclose(full.camera.position, s.camera.position, atol=1e-6)

    def test_anim_bad_axis(self):
        with pytest.raises(EvalError) as e:
            evaluate(start(), Anim("rotate", "t", 90.0, 4), ENV)
        assert e.value.kind == "bad-animation"

    def test_snapshot_is_pure(self):
        s = start()
        before = session_to_doc(s)
        s2, ev = evaluate(s, Snapshot("out.ppm", (640, 400)), ENV)
        assert session_to_doc(s2) == before
        assert ev == [{"event": "snapshot", "path": "out.ppm", "size": [640, 400]}]
        _, ev = evaluate(s, Snapshot("out.ppm"), ENV)
        assert ev[0]["size"] is None

    def test_layout_reflows_placements(self):
        s, _ = run(with_blob(), ViewAdd("blob"), ViewAdd("blob"))
        v1 = s.views[1]
        assert v1.base_position == (20.0, 0.0, 0.0)
        s, ev = evaluate(s, Layout(2, 10, 12), ENV)
        v1 = s.views[1]
        assert v1.base_position == (10.0, 0.0, 0.0)
        assert v1.object_origin == (12.5, 2.5, 2.5)
        assert ev == [{"event": "layoutChanged", "cols": 2}]

    def test_layout_cannot_orphan_views(self):
        s, _ = run(with_blob(), ViewAdd("blob"), ViewAdd("blob"), ViewAdd("blob"))
        before = session_to_doc(s)
        with pytest.raises(EvalError) as e:
            evaluate(s, Layout(2, 10, 10), ENV)
        assert e.value.kind == "bad-layout"
        assert session_to_doc(s) == before

    def test_source_runs_nested_script(self):
        s, ev = evaluate(start(), Source("good.vl"), ENV)
        assert "inner" in s.datasets
        assert len(s.views) == 1
        assert [e["event"] for e in ev] == ["datasetAdded", "viewAdded"]

    def test_source_reports_nested_errors_and_continues(self):
        s, ev = evaluate(start(), Source("mixed.vl"), ENV)
        assert s.mode == "camera"  # last good line still applied
        errs = [e for e in ev if e["event"] == "scriptError"]
        assert len(errs) == 1 and errs[0]["line"] == 2
        assert "missing" in errs[0]["message"]

    def test_source_missing_file(self):
        with pytest.raises(EvalError) as e:
            evaluate(start(), Source("absent.vl"), Environment(read_text=open))
        assert e.value.kind == "io-error"

    def test_source_without_reader(self):
        with pytest.raises(EvalError) as e:
            evaluate(start(), Source("good.vl"), Environment())
        assert e.value.kind == "no-io"


QCD_SCRIPT = """\
# eight time slices of a lattice volume, tiled four across
synth blob dims=4x4x4x4 seed=7 as qcd
slice qcd axis=t index=0..3 as s
view add s0
view add s1
view add s2
view add s3
iso add view=0 level=0.5
cut add view=0 axis=x
cut add view=0 axis=y
cut add view=0 axis=z
"""


class TestRunScript:
    def test_two_valid_lines(self):
        s, ev, errs = run_script(start(), "mode sync\nmode object\n", ENV)
        assert errs == []
        assert s.mode == "object"
        assert [e["mode"] for e in ev] == ["sync", "object"]

    def test_continue_on_error(self):
        text = "mode sync\nslice nope axis=t index=0 as s\nmode camera\n"
        s, ev, errs = run_script(start(), text, ENV)
        assert s.mode == "camera"
        assert len(errs) == 1 and errs[0][0] == 2
        assert isinstance(errs[0][1], EvalError)

    def test_parse_errors_are_reported_with_lines(self):
        s, ev, errs = run_script(start(), "mode sync\nfrobnicate\n", ENV)
        assert s.mode == "sync"
        assert errs[0][0] == 2

    def test_strict_stops_at_first_error(self):
        text = "mode sync\nslice nope axis=t index=0 as s\nmode camera\n"
        s, ev, errs = run_script(start(), text, ENV, strict=True)
        assert s.mode == "sync"  # third line never ran
        assert len(errs) == 1

    def test_scenario_layout_matches_reading_order(self):
        s, ev, errs = run_script(start(), QCD_SCRIPT, ENV)
        assert errs == []
        assert [v.cell for v in s.views] == [(0, 0), (0, 1), (0, 2), (0, 3)]
        assert [v.source for v in s.views] == ["s0", "s1", "s2", "s3"]
        assert s.views[0].iso_levels == (0.5,)
        planes = s.views[0].cut_planes
        assert [p.axis for p in planes] == [0, 1, 2]
        assert all(p.offset is None for p in planes)  # through the center
        # every view shows a 3-D slice of the 4-D source
        for v in s.views:
            assert view_field(s, v).dims == (4, 4, 4)

    def test_determinism(self):
        a = run_script(start(), QCD_SCRIPT, ENV)
        b = run_script(start(), QCD_SCRIPT, ENV)
        assert session_to_doc(a[0]) == session_to_doc(b[0])
        assert a[1] == b[1]
        assert [(n, str(e)) for n, e in a[2]] == [(n, str(e)) for n, e in b[2]]

    def test_round_trip_through_parser(self):
        # scripts built from formatted asts evaluate identically
        from latticeviz.language import format_command

        asts = [parse(line) for line in QCD_SCRIPT.splitlines() if not line.startswith("#")]
        rebuilt = "\n".join(format_command(a) for a in asts)
        a = run_script(start(), QCD_SCRIPT, ENV)
        b = run_script(start(), rebuilt, ENV)
        assert session_to_doc(a[0]) == session_to_doc(b[0])


class TestAtomicity:
    CASES = [
        Load("runs/z.ndvf", "x"),
        Synth("vortex", (), "x"),
        Slice("absent", "t", 0, "s"),
        Project("absent", "t", "mean", "p"),
        Filter("absent", lo=0.1),
        ViewAdd("absent"),
        ViewRemove(3),
        IsoAdd(3, 0.5),
        IsoRemove(3, 0.5),
        CutAdd(3, axis="x"),
        PaletteSet(3, "gray"),
        OpacitySet(3, ((0.0, 0.0), (1.0, 1.0))),
        RangeSet(3, 0.0, 1.0),
        HistShow(3, 8),
        ColorbarShow(3),
        CameraSet(fov=500.0),
        Anim("rotate", "t", 90.0, 2),
        Source("absent.vl"),
    ]

    @pytest.mark.parametrize("ast", CASES, ids=lambda a: type(a).__name__)
    def test_failed_commands_leave_session_intact(self, ast):
        s, _ = run(with_blob(), ViewAdd("blob"))
        before = session_to_doc(s)
        with pytest.raises(EvalError):
            evaluate(s, ast, ENV)
        assert session_to_doc(s) == before
