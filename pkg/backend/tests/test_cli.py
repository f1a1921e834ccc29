import csv
import re

import numpy as np
import pytest

import main
from services import spectra_service

TINY_SWEEP = ["dicke-sweep", "--n-atoms", "2", "--boson-cutoff", "8", "--steps", "3", "--lambda-min", "0.1",
              "--lambda-max", "0.9", "--times", "1,10", "--workers", "2"]


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def test_version_exits_zero(capsys):
    assert main.main(["--version"]) == 0
    assert "opfid" in capsys.readouterr().out


def test_missing_subcommand_is_a_usage_error(capsys):
    assert main.main([]) == 2
    assert "usage" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# dicke-sweep
# ---------------------------------------------------------------------------

def test_dicke_sweep_requires_out(capsys):
    assert main.main(TINY_SWEEP) == 2
    assert "--out" in capsys.readouterr().err


def test_dicke_sweep_writes_all_outputs(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    code = main.main(TINY_SWEEP + ["--beta", "0,inf", "--out", str(out), "--plot", str(tmp_path / "chi1.svg")])
    assert code == 0
    rows = read_rows(out)
    assert len(rows) == 3 * 2 * 2
    assert {row["beta"] for row in rows} == {"0", "inf"}
    assert {row["status"] for row in rows} == {"ok"}
    assert (tmp_path / "sweep_summary.csv").exists()
    assert (tmp_path / "sweep_meta.json").exists()
    assert (tmp_path / "chi1.svg").read_text(encoding="utf-8").count("<polyline") == 4
    assert "wrote 12 rows" in capsys.readouterr().out


def test_dicke_sweep_accepts_thermal_ratio(tmp_path):
    out = tmp_path / "thermal.csv"
    assert main.main(TINY_SWEEP + ["--beta", "ratio:0.05", "--no-normalize", "--out", str(out)]) == 0
    betas = {float(row["beta"]) for row in read_rows(out)}
    assert len(betas) == 1
    assert betas.pop() > 0


def test_dicke_sweep_uses_cache_dir(tmp_path):
    cache_dir = tmp_path / "cache"
    assert main.main(TINY_SWEEP + ["--out", str(tmp_path / "s.csv"), "--cache", str(cache_dir)]) == 0
    assert len(list(cache_dir.iterdir())) == 3


@pytest.mark.parametrize("beta", ["-1", "ratio:2", "warm"])
def test_dicke_sweep_rejects_bad_beta(tmp_path, beta):
    assert main.main(TINY_SWEEP + ["--beta", beta, "--out", str(tmp_path / "s.csv")]) == 2


@pytest.mark.parametrize("fraction", ["0", "1.5", "nan", "half"])
def test_level_fraction_is_checked_at_parse_time(tmp_path, capsys, fraction):
    assert main.main(TINY_SWEEP + ["--level-fraction", fraction, "--out", str(tmp_path / "s.csv")]) == 2
    assert "--level-fraction" in capsys.readouterr().err
    assert not (tmp_path / "s.csv").exists()

    spacing = ["spacing-stats", "--dicke", "2,8,0.5", "--level-fraction", fraction]
    code = main.main(spacing + ["--out", str(tmp_path / "h.csv")])
    assert code == 2


def test_dicke_sweep_runtime_failure_exits_one(tmp_path):
    code = main.main(TINY_SWEEP + ["--lambda-min", "0.9", "--lambda-max", "0.1", "--out", str(tmp_path / "s.csv")])
    assert code == 1


def test_dicke_sweep_dimension_guard_exits_one(tmp_path):
    code = main.main(TINY_SWEEP + ["--max-dim", "10", "--out", str(tmp_path / "s.csv")])
    assert code == 1


# ---------------------------------------------------------------------------
# spacing-stats
# ---------------------------------------------------------------------------

def test_spacing_stats_equally_spaced_levels(tmp_path, capsys):
    levels = tmp_path / "levels.csv"
    spectra_service.write_column_csv(str(levels), "energy", np.arange(400.0))
    out = tmp_path / "hist.csv"
    assert main.main(["spacing-stats", "--levels", str(levels), "--out", str(out)]) == 0

    printed = capsys.readouterr().out
    entropy = float(re.search(r"relative entropy to wigner: (\S+)", printed).group(1))
    assert entropy > 1.0
    rows = read_rows(out)
    assert len(rows) == 50
    assert set(rows[0]) == {"bin_left", "bin_right", "density", "reference_density"}


def test_spacing_stats_too_few_levels(tmp_path):
    levels = tmp_path / "levels.csv"
    spectra_service.write_column_csv(str(levels), "energy", np.arange(15.0))
    assert main.main(["spacing-stats", "--levels", str(levels), "--out", str(tmp_path / "h.csv")]) == 1


def test_spacing_stats_from_dicke_instance(tmp_path, capsys):
    out = tmp_path / "hist.csv"
    code = main.main(["spacing-stats", "--dicke", "4,24,0.8", "--reference", "poisson", "--out", str(out)])
    assert code == 0
    assert "relative entropy to poisson" in capsys.readouterr().out


def test_spacing_stats_needs_a_source(tmp_path):
    assert main.main(["spacing-stats", "--out", str(tmp_path / "h.csv")]) == 2


# ---------------------------------------------------------------------------
# rmt
# ---------------------------------------------------------------------------

def test_conjecture_with_one_sample_fails(tmp_path):
    code = main.main(["rmt", "conjecture", "--dim", "20", "--samples", "1", "--out", str(tmp_path / "c.csv")])
    assert code == 1


def test_conjecture_is_deterministic(tmp_path):
    args = ["rmt", "conjecture", "--ensemble", "poisson", "--dim", "30", "--samples", "6", "--times", "10,50",
            "--seed", "5"]
    assert main.main(args + ["--out", str(tmp_path / "a.csv")]) == 0
    assert main.main(args + ["--out", str(tmp_path / "b.csv")]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    rows = read_rows(tmp_path / "a.csv")
    assert [row["ensemble"] for row in rows] == ["PoissonDiagonal", "PoissonDiagonal"]


def test_verify_average_passes(capsys):
    assert main.main(["rmt", "verify-average", "--dim", "32", "--samples", "500", "--seed", "3"]) == 0
    assert capsys.readouterr().out.count("z=") == 6


# ---------------------------------------------------------------------------
# fidelity-check
# ---------------------------------------------------------------------------

def test_fidelity_check_random_pair(capsys):
    assert main.main(["fidelity-check", "--dim", "30", "--t", "3", "--dlambda", "1e-3", "--seed", "2"]) == 0
    ratio = float(re.search(r"ratio = (\S+)", capsys.readouterr().out).group(1))
    assert 4.0 <= ratio <= 16.0


def test_fidelity_check_dicke_instance():
    assert main.main(["fidelity-check", "--dicke", "4,16,0.3", "--t", "3"]) == 0


def test_fidelity_check_rejects_zero_dlambda():
    assert main.main(["fidelity-check", "--dlambda", "0"]) == 2


def test_fidelity_check_zero_perturbation(capsys):
    assert main.main(["fidelity-check", "--dim", "10", "--zero-perturbation"]) == 0
    assert "residuals vanish" in capsys.readouterr().out
