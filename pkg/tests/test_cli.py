import csv
import io
import itertools
import json
import subprocess
import sys

import pytest

from rankpower.cli import run


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def ok_json(*argv):
    code, out, err = call(*argv)
    assert code == 0, err
    return json.loads(out)


def ok_csv(*argv):
    code, out, err = call(*argv, "--format", "csv")
    assert code == 0, err
    return list(csv.DictReader(io.StringIO(out)))


class TestExamples:
    def test_null_dist_csv(self):
        code, out, _ = call("null-dist", "--m", "2", "--n", "2", "--scores", "wilcoxon", "--format", "csv")
        assert code == 0
        rows = list(csv.reader(io.StringIO(out)))
        assert rows[0] == ["t", "prob", "prob_exact"]
        assert [(r[0], r[2]) for r in rows[1:]] == [("3", "1/6"), ("4", "1/6"), ("5", "1/3"), ("6", "1/6"), ("7", "1/6")]

    def test_power_exact(self):
        rec = ok_json("power-exact", "--m", "2", "--n", "2", "--scores", "wilcoxon", "--alpha", "0.1666666667", "--a", "2")
        # alpha sits 3.3e-11 above 1/6, so the power is 1/3 + 4.4e-11
        assert abs(rec["results"][0]["power"] - 0.3333333333) <= 1e-10

    def test_record_layout(self):
        rec = ok_json("critical", "--m", "2", "--n", "2", "--scores", "wilcoxon", "--alpha", str(1 / 6))
        assert rec["schema_version"] == "1"
        assert rec["command"] == "critical"
        assert rec["params"]["m"] == 2 and rec["params"]["alpha"] == 1 / 6
        assert "seed" not in rec
        assert rec["results"] == [{"threshold": 6, "gamma": 0.0, "size": 1 / 6, "alpha": 1 / 6}]

    def test_prob_rankset(self):
        rec = ok_json("prob-rankset", "--m", "1", "--n", "1", "--a", "2", "--ranks", "2")
        assert rec["results"][0]["prob"] == pytest.approx(2 / 3, abs=1e-15)

    def test_prob_rankset_bad_ranks(self):
        assert call("prob-rankset", "--m", "2", "--n", "2", "--a", "2", "--ranks", "3,3")[0] == 2

    def test_lmp_scores(self):
        rec = ok_json("lmp-scores", "--m", "1", "--n", "2")
        assert [r["score"] for r in rec["results"]] == pytest.approx([-11 / 6, -5 / 6, -1 / 3])

    def test_mp_test(self):
        rec = ok_json("mp-test", "--m", "2", "--n", "2", "--a", "2", "--alpha", "0.2")
        table = {r["ranks"]: r["reject_prob"] for r in rec["results"]}
        assert table["3 4"] == 1.0
        assert table["2 4"] == pytest.approx(0.2)
        assert rec["results"][0]["size"] == pytest.approx(0.2)

    def test_power_exact_mp(self):
        rec = ok_json("power-exact", "--m", "3", "--n", "3", "--test", "mp", "--alpha", "0.1", "--a", "2")
        rank = ok_json("power-exact", "--m", "3", "--n", "3", "--scores", "savage", "--alpha", "0.1", "--a", "2")
        assert rec["results"][0]["power"] >= rank["results"][0]["power"] - 1e-12

    def test_are(self):
        rec = ok_json("are", "--efficacy", "2", "1", "--c", "1.5")
        assert rec["results"][0]["are"] == pytest.approx(4.0, abs=1e-9)

    def test_expansion_from_tables(self, tmp_path):
        from scipy import special

        z = special.ndtri(0.95)
        paths = []
        for name, p1 in (("a.csv", 0.1), ("b.csv", 0.0)):
            lines = ["c,p0,p1,p2"]
            for i in range(0, 401):
                c = i / 50
                lines.append(f"{c!r},{float(special.ndtr(c - z))!r},{p1},0")
            path = tmp_path / name
            path.write_text("\n".join(lines) + "\n")
            paths.append(str(path))
        rec = ok_json("deficiency-expansion", "--coeffs", paths[0], "--coeffs", paths[1], "--c", "1", "--n-grid", "1e4,1e5,1e6,1e7")
        row = rec["results"][0]
        assert row["h1_closed_form"] == pytest.approx(0.617, abs=2e-3)
        assert row["h1"] == pytest.approx(row["h1_closed_form"], rel=1e-2)

    def test_expansion_needs_two_models(self, tmp_path):
        assert call("are", "--c", "1")[0] == 2
        assert call("are", "--c", "1", "--coeffs", str(tmp_path / "missing.csv"), "--coeffs", "x")[0] == 2


class TestErrors:
    def test_unknown_flag(self):
        code, out, err = call("null-dist", "--m", "2", "--n", "2", "--scores", "wilcoxon", "--bogus", "1")
        assert code == 2 and out == "" and "unrecognized" in err

    def test_unknown_command(self):
        assert call("power")[0] == 2

    def test_bad_choice(self):
        assert call("null-dist", "--m", "2", "--n", "2", "--scores", "median")[0] == 2

    def test_bad_alpha(self):
        assert call("critical", "--m", "2", "--n", "2", "--scores", "vdw", "--alpha", "1.5")[0] == 2

    def test_missing_command(self):
        assert call()[0] == 2

    def test_flag_of_other_command_rejected(self):
        assert call("lmp-scores", "--m", "2", "--n", "2", "--seed", "3")[0] == 2

    def test_cap_exceeded_is_computational(self):
        code, out, err = call("null-dist", "--m", "30", "--n", "30", "--scores", "vdw")
        assert code == 3
        rec = json.loads(out)
        assert rec["error"]["name"] == "CapExceeded"
        assert "results" not in rec
        assert "CapExceeded" in err

    def test_no_solution_is_computational(self):
        code, out, _ = call("are", "--efficacy", "1", "1e-6", "--c", "1")
        assert code == 3 and json.loads(out)["error"]["name"] == "NoSolution"

    def test_error_as_csv(self):
        code, out, _ = call("null-dist", "--m", "30", "--n", "30", "--scores", "vdw", "--format", "csv")
        assert code == 3 and out.startswith("error,message\nCapExceeded,")


MC = ("power-mc", "--m", "4", "--n", "5", "--a", "2", "--alpha", "0.1", "--reps", "3000", "--seed", "42")


class TestDeterminism:
    def test_byte_identical(self):
        first = call(*MC, "--chunk-size", "700")
        second = call(*MC, "--chunk-size", "700")
        assert first == second and first[0] == 0

    @pytest.mark.parametrize("argv", [MC + ("--test", "perm-mean"), MC + ("--test", "t-test", "--family", "normal")])
    def test_threads_do_not_change_numbers(self, argv):
        one = ok_json(*argv, "--threads", "1", "--chunk-size", "500")
        four = ok_json(*argv, "--threads", "4", "--chunk-size", "500")
        assert one["results"] == four["results"]
        assert one["seed"] == 42 and one["results"][0]["reps"] == 3000

    def test_env_thread_fallback(self, monkeypatch):
        monkeypatch.setenv("RANKPOWER_THREADS", "3")
        rec = ok_json(*MC)
        assert rec["params"]["threads"] == 3
        monkeypatch.setenv("RANKPOWER_THREADS", "zero")
        assert call(*MC)[0] == 2

    def test_flag_beats_env(self, monkeypatch):
        monkeypatch.setenv("RANKPOWER_THREADS", "3")
        assert ok_json(*MC, "--threads", "2")["params"]["threads"] == 2

    def test_deficiency_mc_repeatable(self):
        argv = ("deficiency-mc", "--test-a", "t-test", "--test-b", "wilcoxon", "--c", "2", "--n-grid", "8,12", "--reps", "2000", "--seed", "5")
        a, b = call(*argv), call(*argv)
        assert a == b and a[0] == 0
        rec = json.loads(a[1])
        assert [r["n"] for r in rec["results"]] == [8, 12]
        assert rec["seed"] == 5


def _numbers(value):
    try:
        return float(value)
    except (TypeError, ValueError):
        return value


@pytest.mark.parametrize(
    "argv",
    [
        ("null-dist", "--m", "3", "--n", "4", "--scores", "normal"),
        ("null-dist", "--m", "3", "--n", "4", "--scores", "savage"),
        ("critical", "--m", "4", "--n", "4", "--scores", "vdw", "--alpha", "0.05"),
        ("power-exact", "--m", "3", "--n", "5", "--scores", "savage", "--alpha", "0.1", "--a", "1.5"),
        MC,
        ("mp-test", "--m", "3", "--n", "3", "--a", "0.5", "--alpha", "0.1"),
        ("lmp-scores", "--m", "4", "--n", "3"),
        ("deficiency-expansion", "--efficacy", "1", "1", "--c", "1", "--n-grid", "10,100,1000"),
    ],
)
def test_csv_and_json_agree(argv):
    rec = ok_json(*argv)
    rows = ok_csv(*argv)
    assert len(rows) == len(rec["results"])
    for j, c in zip(rec["results"], rows):
        for key, value in j.items():
            got = _numbers(c[key])
            if isinstance(value, bool):
                assert c[key] == ("true" if value else "false")
            elif isinstance(value, (int, float)):
                assert float(f"{got:.15g}") == float(f"{value:.15g}")
            else:
                assert c[key] == str(value)


def test_conservative_never_more_powerful():
    for m, n in itertools.product(range(1, 5), repeat=2):
        for scores in ("wilcoxon", "vdw", "normal", "savage"):
            for alpha in ("0.05", "0.1", "0.3"):
                base = ("power-exact", "--m", str(m), "--n", str(n), "--scores", scores, "--alpha", alpha, "--a", "2")
                rnd = ok_json(*base)["results"][0]["power"]
                con = ok_json(*base, "--conservative")["results"][0]["power"]
                assert con <= rnd + 1e-15


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "rankpower", "lmp-scores", "--m", "1", "--n", "1", "--format", "csv"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert proc.stdout == "rank,score\n1,-1.5\n2,-0.5\n"


def test_help_exits_zero():
    assert call("--help")[0] == 0
