import csv
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from kreiss import fixtures as fx
from kreiss.cli import main
from kreiss.errors import ParseError
from kreiss.io import ReportRecord, SystemFile, dump, format_table, load, parse, serialize


def records(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            kv = dict(tok.split("=", 1) for tok in line.split())
            out[kv["quantity"]] = kv
    return out


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# ---------------------------------------------------------------------------
# fixtures


class TestFixtures:
    def test_checksum(self):
        assert fx.checksum() == fx.FIXTURE_CHECKSUM

    def test_grcar_structure(self):
        G = fx.grcar(6)
        for i in range(6):
            for j in range(6):
                expected = -1.0 if j in (i, i - 1) else (1.0 if 1 <= j - i <= 3 else 0.0)
                assert G[i, j] == expected

    def test_example_plant(self):
        p = fx.example_plant()
        assert (p.A.shape, p.B.shape, p.C.shape, p.D.shape) == ((7, 7), (7, 4), (1, 7), (1, 4))
        assert p.A[0, 6] == -625 and p.A[5, 4] == -100 and p.A[5, 6] == -1000
        np.testing.assert_array_equal(p.B[:4], np.eye(4))
        np.testing.assert_array_equal(p.C, [[0, 0, 0, 0, 0, 1, 0]])

    def test_controllers(self):
        for name in fx.CONTROLLER_NAMES:
            K = fx.example_controller(name)
            assert (K.n_K, K.n_u, K.n_y) == (3, 4, 1)
        assert fx.example_controller("kreiss").packed[0, 0] == -42.9038

    def test_catalog_round_trip(self):
        for name, (kind, blocks) in fx.catalog().items():
            sf = SystemFile(kind, blocks)
            assert parse(serialize(sf)) == sf, name

    def test_unknown(self):
        with pytest.raises(KeyError):
            fx.fixture("nope")


# ---------------------------------------------------------------------------
# file format


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


class TestFormat:
    @settings(max_examples=100, deadline=None)
    @given(A=arrays(float, st.tuples(st.integers(1, 5), st.integers(1, 5)), elements=finite),
           extra=arrays(float, st.tuples(st.integers(0, 3), st.integers(0, 3)), elements=finite))
    def test_round_trip(self, A, extra):
        sf = SystemFile("matrix", {"A": A, "X": extra.reshape(extra.shape)})
        back = parse(serialize(sf, comment="generated\nsecond line"))
        assert back == sf
        np.testing.assert_array_equal(back["A"], A)

    def test_round_trip_controller(self, tmp_path):
        sf = SystemFile.from_controller(fx.example_controller("numabs"))
        path = tmp_path / "k.txt"
        dump(sf, path, comment="x")
        back = load(path)
        assert back == sf
        np.testing.assert_array_equal(back.to_controller().packed,
                                      fx.example_controller("numabs").packed)

    def test_comments_and_layout(self):
        text = "# header\nkind matrix # trailing\nblock A 2 2\n 1 2\n\n 3 4 # row\n"
        np.testing.assert_array_equal(parse(text)["A"], [[1, 2], [3, 4]])

    @pytest.mark.parametrize("text, line, col", [
        ("kinds matrix", 1, 1),
        ("kind bogus", 1, 6),
        ("kind matrix\nblock A 2 x", 2, 11),
        ("kind matrix\nblock A 1 2\n 1 abc", 3, 4),
        ("kind matrix\nblock A 1 1\n 1\nblock A 1 1\n 2", 4, 7),
        ("kind matrix\nblock A 2 2\n 1 2 3", 3, 6),
        ("kind matrix\nblock A 1 1\n nan", 3, 2),
        ("kind matrix\nblock A -1 1", 2, 9),
        ("kind matrix\nfoo", 2, 1),
    ])
    def test_parse_errors(self, text, line, col):
        with pytest.raises(ParseError) as exc:
            parse(text)
        assert (exc.value.line, exc.value.column) == (line, col)
        assert str(exc.value).startswith(f"line {line}, column {col}: ")

    def test_dimension_mismatch_is_parse_error(self):
        text = "kind plant\nblock A 2 2\n -1 0 0 -1\nblock B 3 1\n 1 1 1\nblock C 1 2\n 1 0"
        with pytest.raises(ParseError):
            parse(text)

    def test_missing_block(self):
        with pytest.raises(ParseError):
            parse("kind plant\nblock B 1 1\n 1")

    def test_report_record(self):
        rec = ReportRecord("K", 1.5, 1e-4, 0.25, {"delta_star": 0.1, "n": 10})
        line = rec.to_line()
        assert line.startswith("quantity=K value=1.5 tol=0.0001 time=0.250")
        assert "delta_star=0.1" in line and "n=10" in line
        with pytest.raises(ValueError):
            ReportRecord("K", np.inf, 1e-4, 0.0)

    def test_table(self):
        t = format_table(["a", "bb"], [[1, 22], [333, 4]]).splitlines()
        assert t[0] == "  a  bb" and t[1] == "---  --" and t[2] == "  1  22"


# ---------------------------------------------------------------------------
# commands


class TestAnalyze:
    def test_grcar(self, capsys, tmp_path):
        out = tmp_path / "r.txt"
        code, text, _ = run(capsys, "analyze", "grcar-10", "--quantity", "K,M0,alpha",
                            "--out", str(out), "--workers", "1")
        assert code == 0
        rec = records(out)
        assert float(rec["K"]["value"]) == pytest.approx(1.1855, rel=5e-3)
        assert float(rec["M0"]["value"]) >= float(rec["K"]["value"])
        assert float(rec["alpha"]["value"]) < 0
        assert "quantity" in text

    def test_omega_of_example(self, capsys, tmp_path):
        out = tmp_path / "r.txt"
        assert run(capsys, "analyze", "example-7x7", "--quantity", "omega",
                   "--out", str(out))[0] == 0
        assert float(records(out)["omega"]["value"]) == pytest.approx(680.4, rel=1e-3)

    def test_nonlinear_open_loop(self, capsys, tmp_path):
        out = tmp_path / "r.txt"
        assert run(capsys, "analyze", "nl-A", "--out", str(out), "--workers", "1")[0] == 0
        assert float(records(out)["K"]["value"]) == pytest.approx(4.36, rel=1e-2)

    def test_with_controller(self, capsys, tmp_path):
        out = tmp_path / "r.txt"
        code, *_ = run(capsys, "analyze", "example-7x7", "--controller", "controller-kreiss",
                       "--quantity", "Kr,M0r,Omega", "--out", str(out), "--workers", "1")
        assert code == 0
        rec = records(out)
        assert float(rec["Kr"]["value"]) == pytest.approx(10.91, rel=5e-2)
        assert float(rec["M0r"]["value"]) == pytest.approx(42.8, rel=5e-2)
        assert float(rec["Omega"]["value"]) == pytest.approx(656, rel=5e-2)

    def test_file_input(self, capsys, tmp_path):
        path = tmp_path / "m.txt"
        dump(SystemFile("matrix", {"A": [[-2.0, 0.0], [3.0, -1.0]],
                                   "J": [[1.0], [0.0]]}), path)
        out = tmp_path / "r.txt"
        assert run(capsys, "analyze", str(path), "--quantity", "M0r,omega,h2,wc_energy",
                   "--out", str(out))[0] == 0
        rec = records(out)
        assert float(rec["M0r"]["value"]) == pytest.approx(1.0, abs=1e-9)
        assert float(rec["omega"]["value"]) == pytest.approx((-3 + np.sqrt(10)) / 2)
        assert float(rec["h2"]["value"]) == pytest.approx(0.5)
        assert float(rec["wc_energy"]["value"]) == pytest.approx(0.5)

    def test_usage_errors(self, capsys, tmp_path):
        assert run(capsys, "analyze", "no-such-thing")[0] == 1
        assert run(capsys, "analyze", "grcar-10", "--controller", "grcar-10")[0] == 1
        assert run(capsys, "analyze", "controller-kreiss")[0] == 1
        with pytest.raises(SystemExit) as exc:
            main(["analyze", "grcar-10", "--quantity", "bogus"])
        assert exc.value.code == 1
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 1

    def test_parse_error_reports_position(self, capsys, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("kind matrix\nblock A 1 1\n oops\n")
        code, _, err = run(capsys, "analyze", str(path))
        assert code == 1
        assert "line 3, column 2" in err

    def test_unstable_is_numeric_error(self, capsys, tmp_path):
        path = tmp_path / "u.txt"
        dump(SystemFile("matrix", {"A": [[0.5]]}), path)
        code, _, err = run(capsys, "analyze", str(path))
        assert code == 2
        assert "NotHurwitzError" in err


class TestBenchAndTable:
    def test_bench_small(self, capsys, tmp_path):
        out = tmp_path / "t1.csv"
        assert run(capsys, "bench-grcar", "--sizes", "2,10", "--out", str(out),
                   "--workers", "1")[0] == 0
        rows = read_csv(out)
        assert [r["n"] for r in rows] == ["2", "10"]
        assert float(rows[0]["estimate"]) >= 1 - 1e-4
        assert float(rows[1]["estimate"]) == pytest.approx(1.1855, rel=5e-3)

    def test_bench_rejects_size_one(self, capsys):
        assert run(capsys, "bench-grcar", "--sizes", "1")[0] == 1

    def test_table2(self, capsys, tmp_path):
        out = tmp_path / "t2.csv"
        assert run(capsys, "table2", "--out", str(out), "--workers", "1")[0] == 0
        got = {r["controller"]: r for r in read_csv(out)}
        expected = {"kreiss": (42.8, 10.91, 656), "numabs": (1208, 349.6, 502),
                    "h2match": (44.37, 23.5, 621), "wcenergy": (57.1, 24.8, 686)}
        for name, vals in expected.items():
            for key, ref in zip(("M0r", "Kr", "Omega"), vals):
                assert float(got[name][key]) == pytest.approx(ref, rel=5e-2), (name, key)


class TestSimulate:
    def test_open_split(self, capsys, tmp_path):
        code, out, _ = run(capsys, "simulate", "--loop", "open", "--x0", "4e-4,5e-4",
                           "--out", str(tmp_path))
        assert code == 0
        lines = out.splitlines()[2:]
        assert "origin" in lines[0] and "remote" in lines[1]
        assert len(os.listdir(tmp_path)) == 2

    def test_closed_all_origin(self, capsys):
        code, out, _ = run(capsys, "simulate", "--loop", "closed")
        assert code == 0
        body = out.splitlines()[2:]
        assert len(body) == 8
        assert all("origin" in ln and ln.rstrip().endswith("yes") for ln in body)

    def test_zero(self, capsys, tmp_path):
        assert run(capsys, "simulate", "--x0", "0", "--horizon", "10",
                   "--out", str(tmp_path))[0] == 0
        (name,) = os.listdir(tmp_path)
        rows = read_csv(tmp_path / name)
        assert all(float(r["x1"]) == 0 and float(r["x2"]) == 0 for r in rows)


class TestSynthesize:
    def _toy(self, tmp_path):
        path = tmp_path / "plant.txt"
        dump(SystemFile("plant", {"A": [[-1.0, 5.0], [0.0, -2.0]], "B": [[0.0], [1.0]],
                                  "C": [[1.0, 0.0]], "D": [[0.0]]}), path)
        return path

    def test_toy(self, capsys, tmp_path):
        out = tmp_path / "k.txt"
        code, text, _ = run(capsys, "synthesize", str(self._toy(tmp_path)), "--order", "0",
                            "--restarts", "2", "--out", str(out), "--workers", "1")
        assert code == 0
        K = load(out).to_controller()
        assert K.kind == "static"
        head = out.read_text().splitlines()[0]
        assert head.startswith("# quantity=objective")
        assert "Kr" in text

    def test_numabs_improves_open_loop(self, capsys, tmp_path):
        out = tmp_path / "k.txt"
        code, *_ = run(capsys, "synthesize", "example-7x7", "--method", "numabs", "--order", "3",
                       "--restarts", "2", "--out", str(out), "--workers", "1")
        assert code == 0
        with open(out) as fh:
            line = fh.readline()[2:]
        value = float(dict(t.split("=", 1) for t in line.split())["value"])
        assert value < 680.4

    def test_infeasible(self, capsys, tmp_path):
        path = tmp_path / "p.txt"
        dump(SystemFile("plant", {"A": [[1.0]], "B": [[0.0]], "C": [[1.0]], "D": [[0.0]]}), path)
        code, _, err = run(capsys, "synthesize", str(path), "--restarts", "1", "--workers", "1")
        assert code == 2
        assert "InfeasibleError" in err

    def test_feedthrough_rejected(self, capsys, tmp_path):
        path = tmp_path / "p.txt"
        dump(SystemFile("plant", {"A": [[-1.0]], "B": [[1.0]], "C": [[1.0]], "D": [[1.0]]}),
             path)
        assert run(capsys, "synthesize", str(path))[0] == 1

    def test_bad_region_and_order(self, capsys, tmp_path):
        p = str(self._toy(tmp_path))
        assert run(capsys, "synthesize", p, "--decay", "5", "--radius", "1")[0] == 1
        with pytest.raises(SystemExit) as exc:
            main(["synthesize", p, "--order", "-1"])
        assert exc.value.code == 1


class TestFixturesVerb:
    def test_list(self, capsys):
        code, out, _ = run(capsys, "fixtures", "list")
        assert code == 0
        assert "grcar-50" in out and "controller-wcenergy" in out
        assert fx.FIXTURE_CHECKSUM in out

    def test_dump(self, capsys, tmp_path):
        out = tmp_path / "g.txt"
        assert run(capsys, "fixtures", "dump", "grcar-10", "--out", str(out))[0] == 0
        np.testing.assert_array_equal(load(out)["A"], fx.grcar(10))
        code, text, _ = run(capsys, "fixtures", "dump", "nl-closed-loop")
        assert code == 0 and parse(text)["A"].shape == (4, 4)

    def test_dump_errors(self, capsys):
        assert run(capsys, "fixtures", "dump")[0] == 1
        assert run(capsys, "fixtures", "dump", "nope")[0] == 1


def test_console_script():
    res = subprocess.run([sys.executable, "-m", "kreiss.cli", "fixtures", "list"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "example-7x7" in res.stdout
