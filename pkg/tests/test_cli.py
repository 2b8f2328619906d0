import numpy as np

from sfvem.cli import main
from sfvem.projectors import ElementVerificationError


def test_run_writes_csv_and_svg(tmp_path, capsys):
    csv = tmp_path / "out.csv"
    svg = tmp_path / "out.svg"
    code = main(["run", "--problem", "test1", "--mesh", "distorted",
                 "--k", "1", "--levels", "2", "--n0", "4",
                 "--csv", str(csv), "--svg", str(svg)])
    assert code == 0
    assert csv.read_text().startswith("h,elements,dofs,error,eta,F,epsilon")
    assert svg.exists()
    out = capsys.readouterr().out
    assert "average rate" in out


def test_bad_arguments_exit_3(capsys):
    assert main(["run", "--problem", "nope", "--csv", "/tmp/x.csv"]) == 3
    assert main(["run", "--problem", "test1", "--k", "7",
                 "--csv", "/tmp/x.csv"]) == 3
    assert main(["run", "--problem", "test2-g1", "--mesh", "voronoi",
                 "--csv", "/tmp/x.csv"]) == 3


def test_missing_mesh_file_exit_3(tmp_path):
    assert main(["run", "--problem", "test1", "--mesh",
                 str(tmp_path / "absent.mesh"), "--levels", "1",
                 "--csv", str(tmp_path / "x.csv")]) == 3


def test_element_verification_failure_exit_2(monkeypatch, tmp_path):
    def explode(*args, **kwargs):
        raise ElementVerificationError("forced failure",
                                       np.zeros((3, 2)))

    monkeypatch.setattr("sfvem.harness.assemble", explode)
    code = main(["run", "--problem", "test1", "--levels", "1", "--n0", "2",
                 "--csv", str(tmp_path / "x.csv")])
    assert code == 2
