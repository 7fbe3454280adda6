import csv
import io
from pathlib import Path

import pytest

from parallel_aspects.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
RR_CFG = CONFIGS / "rr_rrr_paper.cfg"
TRI_CFG = CONFIGS / "3rrr_table3.cfg"
PATH_CFG = CONFIGS / "table4_trajectory.cfg"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_ik_lists_four_branches(capsys):
    code, out, _ = run(capsys, "ik", "--config", RR_CFG, "--pose=4.5,6")
    assert code == 0
    table = rows(out)
    assert table[0] == ["index", "mode", "theta1", "theta2", "residual"]
    assert [r[1] for r in table[1:]] == ["++", "+-", "-+", "--"]
    assert float(table[1][2]) == pytest.approx(1.5811418257666698, abs=1e-9)


def test_ik_mode_filter_and_unreachable(capsys):
    code, out, _ = run(capsys, "ik", "--config", RR_CFG, "--pose=4.5,6", "--mode=-+")
    assert code == 0 and len(rows(out)) == 2
    code, out, _ = run(capsys, "ik", "--config", RR_CFG, "--pose=40,0")
    assert code == 0 and len(rows(out)) == 1


def test_fk_two_assembly_modes(capsys, tmp_path):
    code, _, _ = run(capsys, "fk", "--config", RR_CFG, "--q=1.5707963267948966,1.5707963267948966", "--out", tmp_path)
    assert code == 0
    table = rows((tmp_path / "fk.csv").read_text())
    assert len(table) == 3
    assert float(table[1][2]) == pytest.approx(3.8832291625973383, abs=1e-9) or float(table[2][2]) == pytest.approx(
        3.8832291625973383, abs=1e-9
    )


def test_fk_three_rrr(capsys):
    code, out, _ = run(capsys, "fk", "--config", TRI_CFG, "--q=0,0.5235987755982988,1.0471975511965976")
    assert code == 0
    poses = [(float(r[2]), float(r[3]), float(r[4])) for r in rows(out)[1:]]
    assert any(max(abs(v) for v in p) < 1e-6 for p in poses)


def test_jacobians_columns(capsys):
    code, out, _ = run(capsys, "jacobians", "--config", TRI_CFG, "--pose=0,0,0", "--mode", "+++")
    assert code == 0
    table = rows(out)
    assert table[0][:6] == ["index", "mode", "alpha1", "alpha2", "alpha3", "det_a"]
    assert table[0][-1] == "a33" and len(table) == 2


def test_jacobians_inconsistent_q_is_numeric_failure(capsys):
    code, _, err = run(capsys, "jacobians", "--config", RR_CFG, "--pose=0,0", "--q=0,0")
    assert code == 3 and "numeric failure" in err


def test_singularities(capsys):
    code, out, _ = run(capsys, "singularities", "--config", RR_CFG)
    assert code == 0
    table = rows(out)
    assert table[0] == ["leg", "kind", "center_x", "center_y", "radius"]
    assert table[1] == ["1", "extended", "0", "0", "13"]


@pytest.mark.parametrize(
    "text, needle",
    [
        ("[model]\nkind = delta\n", "kind"),
        ("[model]\nkind = rr_rrr\nl1 = 8\n", "missing"),
        ("[model]\nkind = rr_rrr\nl1 = 8\nl2 = 5\nl3 = 5\nl4 = 8\nbogus = 1\n", "unknown key"),
        ("[model]\nkind = rr_rrr\nl1 = 8\nl2 = 5\nl3 = 5\nl4 = 8\n[extra]\n", "unknown section"),
        ("[model]\nkind = rr_rrr\nl1 = -8\nl2 = 5\nl3 = 5\nl4 = 8\n", "invalid model"),
        ("not an ini file", "malformed"),
    ],
)
def test_config_errors_exit_2(capsys, tmp_path, text, needle):
    cfg = tmp_path / "m.cfg"
    cfg.write_text(text)
    code, _, err = run(capsys, "singularities", "--config", cfg)
    assert code == 2 and needle in err


def test_missing_config_file(capsys, tmp_path):
    code, _, err = run(capsys, "singularities", "--config", tmp_path / "nope.cfg")
    assert code == 2


def test_bad_pose_and_mode_are_config_errors(capsys):
    assert run(capsys, "ik", "--config", RR_CFG, "--pose=1,2,3")[0] == 2
    assert run(capsys, "ik", "--config", RR_CFG, "--pose=1,2", "--mode", "+++")[0] == 2
    assert run(capsys, "aspects", "--config", PATH_CFG)[0] == 2


def test_aspects_census_and_files(capsys, tmp_path):
    code, out, _ = run(capsys, "aspects", "--config", RR_CFG, "--out", tmp_path, "--svg")
    assert code == 0
    census = dict(rows(out)[1:])
    assert census["total"] == "10"
    expected = {"+++": "1", "++-": "1", "+--": "1", "+-+": "2", "-++": "1", "-+-": "2", "---": "1", "--+": "1"}
    assert {k: v for k, v in census.items() if k != "total"} == expected
    files = sorted(p.name for p in tmp_path.iterdir())
    assert "census.csv" in files and "field_pm.csv" in files and "field_mm.svg" in files
    header = (tmp_path / "field_pp.csv").read_text().splitlines()[0]
    assert header == "i,j,x,y,feasible,det_a_sign,b11_sign,b22_sign,aspect,region,surface"
    assert (tmp_path / "field_pp.svg").read_text().startswith("<svg")


def test_empty_bounds_write_headers_only(capsys, tmp_path):
    cfg = tmp_path / "far.cfg"
    cfg.write_text(RR_CFG.read_text().replace("x = -13, 22", "x = 100, 120").replace("y = -13, 13", "y = 100, 120"))
    code, out, _ = run(capsys, "aspects", "--config", cfg, "--out", tmp_path, "--grid", "32")
    assert code == 0
    assert len((tmp_path / "field_pp.csv").read_text().splitlines()) == 1
    assert dict(rows(out)[1:])["total"] == "0"


def test_aspects_output_is_deterministic(capsys, tmp_path):
    outs = []
    for k, workers in enumerate((1, 1, 3)):
        d = tmp_path / f"run{k}"
        code, out, _ = run(capsys, "aspects", "--config", RR_CFG, "--out", d, "--grid", "120", "--workers", workers)
        assert code == 0
        outs.append((out, {p.name: p.read_bytes() for p in sorted(d.iterdir())}))
    assert outs[0] == outs[1] == outs[2]


def test_regions_and_domains_for_five_bar(capsys, tmp_path):
    code, _, _ = run(capsys, "domains", "--config", RR_CFG, "--out", tmp_path, "--grid", "120", "--mode", "+-")
    assert code == 0
    regions = rows((tmp_path / "regions.csv").read_text())
    domains = rows((tmp_path / "domains.csv").read_text())
    assert regions[0] == ["mode", "aspect", "region", "cells", "image_cells"]
    assert len(domains) == len(regions)
    assert all(d[3] == r[2] for d, r in zip(domains[1:], regions[1:]))


def test_domains_on_coarse_spatial_grid_is_numeric_failure(capsys, tmp_path):
    code, _, err = run(capsys, "domains", "--config", TRI_CFG, "--out", tmp_path, "--grid", "24", "--mode", "+++")
    assert code == 3 and "refine the grid" in err


def test_trajectory_single_mode(capsys, tmp_path):
    code, _, _ = run(capsys, "trajectory", "--config", PATH_CFG, "--mode", "+++", "--out", tmp_path)
    assert code == 0
    lines = (tmp_path / "trajectory_ppp.csv").read_text().splitlines()
    assert lines[-1] == "PASS"
    assert lines[0].startswith("index,x,y,phi,alpha1,alpha2,alpha3,det_a,b11,b22,b33,n_det_a")
    assert len(lines) == 1 + 801 + 1


def test_trajectory_violation_verdict(capsys):
    code, out, _ = run(capsys, "trajectory", "--config", PATH_CFG, "--mode", "++-")
    assert code == 0
    assert out.splitlines()[-1] == "VIOLATION(429,det_a)"


def test_trajectory_summary(capsys):
    code, out, _ = run(capsys, "trajectory", "--config", PATH_CFG)
    assert code == 0
    table = {r[0]: r for r in rows(out)[1:]}
    assert sorted(m for m, r in table.items() if r[1] == "PASS") == sorted(["+++", "-+-", "---"])
    assert float(table["+++"][2]) < 1e-3


def test_trajectory_reverse_mirrors_forward(capsys, tmp_path):
    run(capsys, "trajectory", "--config", PATH_CFG, "--mode", "+++", "--out", tmp_path / "f")
    run(capsys, "trajectory", "--config", PATH_CFG, "--mode", "+++", "--out", tmp_path / "r", "--reverse")
    fwd = (tmp_path / "f" / "trajectory_ppp.csv").read_text().splitlines()
    back = (tmp_path / "r" / "trajectory_ppp.csv").read_text().splitlines()
    strip = lambda line: line.split(",", 1)[1].split(",")[:10]  # noqa: E731
    assert [strip(l) for l in fwd[1:-1]] == [strip(l) for l in back[1:-1][::-1]]


def test_trajectory_branch_lost_exit_4(capsys, tmp_path):
    cfg = tmp_path / "far.cfg"
    cfg.write_text(PATH_CFG.read_text().replace("-9.902, -7.091, 1.081", "60, 0, 0"))
    code, _, err = run(capsys, "trajectory", "--config", cfg, "--mode", "+++")
    assert code == 4 and "branch lost" in err


def test_trajectory_output_is_deterministic(capsys, tmp_path):
    a = run(capsys, "trajectory", "--config", PATH_CFG)
    b = run(capsys, "trajectory", "--config", PATH_CFG)
    assert a == b
