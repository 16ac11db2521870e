"""CLI contract tests: documents, reports, bitmaps, exit codes."""

import json

import numpy as np
import pytest

from continuum_sums.cli import (
    InputError,
    main,
    parse_document,
    render_pbm,
)

FULL_SQUARE = {
    "dim": 2,
    "sets": [{"points": [[0, 0], [1, 0], [0, 1], [1, 1]], "density": 0.0}],
}


def _write_doc(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestDocumentParsing:
    def test_minimal_generator_document(self):
        doc = parse_document(
            {"dim": 2, "sets": [{"kind": "circle", "budget": 12, "radius": 2.0}]}
        )
        assert doc.dim == 2
        assert len(doc.sets) == 1
        assert doc.sets[0].count == 12
        assert doc.seed == 0

    def test_hyphenated_kind_accepted(self):
        doc = parse_document({"dim": 2, "sets": [{"kind": "cantor-graph", "depth": 2}]})
        assert doc.sets[0].dim == 2

    def test_raw_points_set(self):
        doc = parse_document(FULL_SQUARE)
        assert doc.sets[0].count == 4
        assert doc.sets[0].density == 0.0
        assert doc.sets[0].exact

    def test_unknown_top_key_path(self):
        with pytest.raises(InputError, match=r"unknown key at extra"):
            parse_document({"dim": 2, "sets": [], "extra": 1})

    def test_unknown_set_key_path(self):
        with pytest.raises(InputError, match=r"unknown key at sets\[0\].radius"):
            parse_document({"dim": 2, "sets": [{"kind": "l_shape", "radius": 1.0}]})

    def test_unknown_kind_names_path(self):
        with pytest.raises(InputError, match=r"sets\[1\].kind: unknown generator"):
            parse_document(
                {"dim": 2, "sets": [{"kind": "circle"}, {"kind": "blob"}]}
            )

    def test_bad_point_row_path(self):
        bad = {"dim": 2, "sets": [{"points": [[0, 0], [1]], "density": 0.1}]}
        with pytest.raises(InputError, match=r"sets\[0\].points\[1\]"):
            parse_document(bad)

    def test_non_numeric_coordinate_path(self):
        bad = {"dim": 2, "sets": [{"points": [[0, "x"]], "density": 0.1}]}
        with pytest.raises(InputError, match=r"sets\[0\].points\[0\]\[1\]"):
            parse_document(bad)

    def test_density_required(self):
        with pytest.raises(InputError, match=r"sets\[0\].density"):
            parse_document({"dim": 2, "sets": [{"points": [[0, 0]]}]})

    def test_construction_block(self):
        doc = parse_document({**FULL_SQUARE, "construction": {"s": 2}})
        assert doc.construction_s == 2
        with pytest.raises(InputError, match=r"unknown key at construction.t"):
            parse_document({**FULL_SQUARE, "construction": {"s": 1, "t": 2}})

    def test_resolutions_must_be_positive(self):
        with pytest.raises(InputError, match=r"resolutions\[1\]"):
            parse_document({**FULL_SQUARE, "resolutions": [0.1, -0.2]})

    def test_version_gate(self):
        with pytest.raises(InputError, match="version"):
            parse_document({**FULL_SQUARE, "version": 99})

    def test_dimension_mismatch(self):
        with pytest.raises(InputError, match=r"sets\[0\]: set lives in dimension 2"):
            parse_document({"dim": 3, "sets": [{"kind": "circle"}]})

    def test_booleans_are_not_numbers(self):
        with pytest.raises(InputError, match="dim: must be an integer"):
            parse_document({"dim": True, "sets": [{"kind": "circle"}]})


class TestPbm:
    def test_golden_full_square(self, tmp_path, capsys):
        doc = _write_doc(tmp_path, "square.json", FULL_SQUARE)
        code, out, _ = _run(capsys, "bitmap", doc, "--h", "1.0")
        assert code == 0
        assert out == "P1\n2 2\n1 1\n1 1\n"

    def test_golden_empty_single_cell(self):
        assert render_pbm(np.zeros((1, 1), dtype=bool)) == "P1\n1 1\n0\n"

    def test_row_zero_is_highest_y(self, tmp_path, capsys):
        doc = _write_doc(
            tmp_path,
            "dot.json",
            {"dim": 2, "sets": [{"points": [[0, 0], [1, 1]], "density": 0.0}]},
        )
        code, out, _ = _run(capsys, "bitmap", doc, "--h", "1.0")
        assert code == 0
        # Occupied cells are (0,0) and (1,1); the top row shows the y=1 cells.
        assert out == "P1\n2 2\n0 1\n1 0\n"

    def test_three_dimensional_needs_slice(self, tmp_path, capsys):
        doc = _write_doc(
            tmp_path,
            "tri.json",
            {"dim": 3, "sets": [{"kind": "l_shape", "dim": 3, "budget": 12}]},
        )
        code, _, err = _run(capsys, "bitmap", doc, "--h", "0.25")
        assert code == 2 and "--slice" in err
        code, out, _ = _run(capsys, "bitmap", doc, "--h", "0.25", "--slice", "2", "0")
        assert code == 0 and out.startswith("P1\n5 5\n")
        code, _, err = _run(capsys, "bitmap", doc, "--h", "0.25", "--slice", "3", "0")
        assert code == 2 and "axis" in err
        code, _, err = _run(capsys, "bitmap", doc, "--h", "0.25", "--slice", "2", "99")
        assert code == 2 and "out of range" in err

    def test_slice_rejected_in_two_dimensions(self, tmp_path, capsys):
        doc = _write_doc(tmp_path, "square.json", FULL_SQUARE)
        code, _, err = _run(capsys, "bitmap", doc, "--h", "1.0", "--slice", "0", "0")
        assert code == 2 and "3-D" in err

    def test_pixel_count_matches_measure(self, tmp_path, capsys):
        doc = _write_doc(
            tmp_path, "circle.json", {"dim": 2, "sets": [{"kind": "circle", "budget": 180}]}
        )
        code, out, _ = _run(capsys, "bitmap", doc, "--h", "0.1")
        assert code == 0
        body = out.splitlines()[2:]
        ones = sum(row.split().count("1") for row in body)
        assert ones > 0
        # One circle only: ring of cells, strictly fewer than the full box.
        width, height = map(int, out.splitlines()[1].split())
        assert ones < width * height


class TestGallery:
    def test_document_round_trips(self, capsys):
        code, out, _ = _run(capsys, "gallery", "circle", "--r", "1", "--budget", "24")
        assert code == 0
        doc = parse_document(json.loads(out))
        assert doc.sets[0].count == 24

    def test_cantor_graph_kind(self, capsys):
        code, out, _ = _run(capsys, "gallery", "cantor-graph", "--depth", "2", "--budget", "16")
        assert code == 0
        data = json.loads(out)
        assert data["sets"][0]["kind"] == "cantor_graph"
        assert data["sets"][0]["depth"] == 2

    def test_unknown_kind_exits_two(self, capsys):
        code, _, err = _run(capsys, "gallery", "unknown")
        assert code == 2
        assert "unknown generator kind" in err

    def test_missing_required_parameter_exits_two(self, capsys):
        code, _, err = _run(capsys, "gallery", "cantor-graph")
        assert code == 2 and "depth" in err

    def test_inapplicable_flag_exits_two(self, capsys):
        code, _, err = _run(capsys, "gallery", "l-shape", "--r", "2")
        assert code == 2 and "does not take" in err


class TestVerifyCommands:
    def test_main_supported_exit_zero(self, tmp_path, capsys):
        doc = _write_doc(
            tmp_path,
            "pair.json",
            {"dim": 2, "sets": [{"kind": "l_shape", "budget": 42}] * 2},
        )
        code, out, _ = _run(capsys, "verify", "main", doc, "--h", "0.1", "--h", "0.05")
        assert code == 0
        report = json.loads(out)
        assert report["passed"] is True
        assert report["scenario"] == "theorem-main"
        assert report["evidence"]["verdict"] == "supported"
        assert [e["h"] for e in report["evidence"]["resolutions"]] == [0.1, 0.05]
        assert report["version"] == 1

    def test_main_single_set_self_sum(self, tmp_path, capsys):
        doc = _write_doc(
            tmp_path, "one.json", {"dim": 2, "sets": [{"kind": "l_shape", "budget": 42}]}
        )
        code, out, _ = _run(capsys, "verify", "main", doc, "--h", "0.1")
        assert code == 0
        assert json.loads(out)["evidence"]["n_copies"] == 2

    def test_main_flat_input_exit_one(self, tmp_path, capsys):
        doc = _write_doc(
            tmp_path,
            "flat.json",
            {
                "dim": 2,
                "sets": [
                    {"kind": "segment", "start": [0, 0], "end": [1, 0], "budget": 11}
                ],
            },
        )
        code, out, _ = _run(capsys, "verify", "main", doc, "--h", "0.1")
        assert code == 1
        report = json.loads(out)
        assert report["evidence"]["verdict"] == "refuted"
        assert report["evidence"]["resolutions"][0]["density_margin"] is None

    def test_main_missing_file_exit_two(self, capsys):
        code, _, err = _run(capsys, "verify", "main", "/nonexistent/x.json")
        assert code == 2 and "cannot read" in err

    def test_main_invalid_json_exit_two(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text('{"dim": 2,,}')
        code, _, err = _run(capsys, "verify", "main", str(path))
        assert code == 2 and "not valid JSON" in err

    def test_doc_resolutions_used_when_no_flags(self, tmp_path, capsys):
        doc = _write_doc(
            tmp_path,
            "pair.json",
            {
                "dim": 2,
                "sets": [{"kind": "l_shape", "budget": 42}] * 2,
                "resolutions": [0.1],
            },
        )
        code, out, _ = _run(capsys, "verify", "main", doc)
        assert code == 0
        assert [e["h"] for e in json.loads(out)["evidence"]["resolutions"]] == [0.1]

    def test_claim_report_shape(self, tmp_path, capsys):
        doc = _write_doc(
            tmp_path,
            "pair.json",
            {
                "dim": 2,
                "sets": [{"kind": "l_shape", "budget": 82}] * 2,
                "construction": {"s": 1},
            },
        )
        code, out, _ = _run(capsys, "verify", "claim", doc, "--h", "0.1", "--h", "0.05")
        assert code == 0
        report = json.loads(out)
        assert report["scenario"] == "lattice-shift-claim"
        cons = report["evidence"]["construction"]
        assert cons["s"] == 1 and cons["l"] == 3 and cons["n"] == 2
        names = [c["name"] for c in report["checks"]]
        assert names == [
            "cube-evidence[h=0.1]",
            "measure-chain[h=0.1]",
            "cube-evidence[h=0.05]",
            "measure-chain[h=0.05]",
        ]
        assert all(c["passed"] for c in report["checks"])

    def test_c1_requires_single_set(self, tmp_path, capsys):
        doc = _write_doc(
            tmp_path, "two.json", {"dim": 2, "sets": [{"kind": "circle"}] * 2}
        )
        code, _, err = _run(capsys, "verify", "c1", doc)
        assert code == 2 and "exactly one set" in err

    def test_c1_circle_passes(self, tmp_path, capsys):
        doc = _write_doc(
            tmp_path, "circle.json", {"dim": 2, "sets": [{"kind": "circle", "budget": 400}]}
        )
        code, out, _ = _run(
            capsys, "verify", "c1", doc, "--h", "0.08", "--h", "0.04", "--directions", "20"
        )
        assert code == 0
        report = json.loads(out)
        assert report["scenario"] == "corollary-equivalences"
        assert report["passed"] is True

    def test_cantor_scenario(self, capsys):
        code, out, _ = _run(capsys, "verify", "cantor", "--depth", "3", "--h", "0.05", "--h", "0.025")
        assert code == 0
        report = json.loads(out)
        assert report["scenario"] == "cantor-example"
        assert report["inputs"]["depth"] == 3

    def test_hl_scenario_and_bad_trials(self, capsys):
        code, out, _ = _run(capsys, "verify", "hl", "--trials", "10", "--seed", "4")
        assert code == 0
        assert json.loads(out)["scenario"] == "separator-suite"
        code, _, err = _run(capsys, "verify", "hl", "--trials", "0")
        assert code == 2 and "trials" in err

    def test_out_file_written_atomically(self, tmp_path, capsys):
        out_path = tmp_path / "report.json"
        code, out, _ = _run(
            capsys, "verify", "hl", "--trials", "5", "--out", str(out_path)
        )
        assert code == 0
        assert out == ""
        report = json.loads(out_path.read_text())
        assert report["passed"] is True
        leftovers = [p for p in tmp_path.iterdir() if p.name != "report.json"]
        assert leftovers == []


class TestDeterminism:
    @staticmethod
    def _strip_clock(text):
        data = json.loads(text)
        del data["elapsed_seconds"]
        return json.dumps(data, sort_keys=True)

    def test_reports_and_bitmaps_reproduce(self, tmp_path, capsys):
        doc = _write_doc(
            tmp_path,
            "circle.json",
            {"dim": 2, "sets": [{"kind": "circle", "budget": 90}], "seed": 7},
        )
        runs = []
        for tag in ("a", "b"):
            out_path = tmp_path / f"report-{tag}.json"
            prefix = tmp_path / f"pix-{tag}"
            code = main(
                [
                    "verify",
                    "main",
                    doc,
                    "--h",
                    "0.1",
                    "--out",
                    str(out_path),
                    "--bitmap",
                    str(prefix),
                ]
            )
            assert code == 0
            runs.append((out_path.read_text(), (tmp_path / f"pix-{tag}-h0.1.pbm").read_bytes()))
        capsys.readouterr()
        assert self._strip_clock(runs[0][0]) == self._strip_clock(runs[1][0])
        assert runs[0][1] == runs[1][1]

    def test_hl_reports_reproduce(self, tmp_path, capsys):
        texts = []
        for tag in ("a", "b"):
            out_path = tmp_path / f"hl-{tag}.json"
            assert main(["verify", "hl", "--trials", "6", "--seed", "2", "--out", str(out_path)]) == 0
            texts.append(out_path.read_text())
        capsys.readouterr()
        assert self._strip_clock(texts[0]) == self._strip_clock(texts[1])


class TestTopLevel:
    def test_no_arguments_is_usage_error(self, capsys):
        code, _, err = _run(capsys)
        assert code == 2
        assert "usage" in err.lower()

    def test_bad_thread_env_exits_two(self, capsys, monkeypatch):
        monkeypatch.setenv("CONTINUUM_SUMS_THREADS", "lots")
        code, _, err = _run(capsys, "verify", "hl", "--trials", "2")
        assert code == 2 and "CONTINUUM_SUMS_THREADS" in err

    def test_thread_env_accepted(self, capsys, monkeypatch):
        monkeypatch.setenv("CONTINUUM_SUMS_THREADS", "0")
        code, _, _ = _run(capsys, "verify", "hl", "--trials", "2")
        assert code == 0
