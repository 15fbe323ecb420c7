import json
import math
import subprocess
import sys

import numpy as np
import pytest

from treexp import cli
from treexp.expectations import first_total
from treexp.graph import legal_mask
from treexp.instance import Instance, generate
from treexp.laplacian import partition_function


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    return code, capsys.readouterr().out


def write(tmp_path, inst, name="inst.json"):
    path = tmp_path / name
    inst.save(path)
    return path


def uniform_n2(tmp_path):
    return write(tmp_path, Instance(n=2, root_constraint="multi", weights=legal_mask(2)))


def test_gen_twice_identical(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(capsys, "gen", "--seed", 1, "--n", 3, "--out", a)[0] == 0
    assert run(capsys, "gen", "--seed", 1, "--n", 3, "--out", b)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    inst = Instance.load(a)
    assert Instance.loads(a.read_text()).dumps() == a.read_text()
    assert inst.n == 3 and inst.seed == 1


def test_gen_to_stdout(capsys):
    code, out = run(capsys, "gen", "--seed", 2, "--n", 2, "--constraint", "single")
    assert code == 0
    assert Instance.loads(out).root_constraint.value == "single"


def test_compute_entropy_uniform(tmp_path, capsys):
    code, out = run(capsys, "compute", "entropy", "--in", uniform_n2(tmp_path))
    assert code == 0
    assert json.loads(out)["value"] == pytest.approx(math.log(3), rel=1e-15)
    assert "gradient" not in json.loads(out)


def test_compute_uses_17_digits(tmp_path, capsys):
    _, out = run(capsys, "compute", "entropy", "--in", uniform_n2(tmp_path))
    assert f"{math.log(3):.17g}" in out


def test_compute_kl_self(tmp_path, capsys):
    inst = generate(5, 4)
    p = write(tmp_path, inst)
    q = write(tmp_path, Instance(n=4, root_constraint="multi", weights=inst.weights), "q.json")
    code, out = run(capsys, "compute", "kl", "--in", p, "--q", q, "--grad")
    assert code == 0
    assert abs(json.loads(out)["value"]) < 1e-10


def test_compute_ge_at_target(tmp_path, capsys):
    inst = generate(6, 4)
    g = inst.graph()
    target = first_total(g, inst.ge_spec().features) / partition_function(g)
    d = inst.to_dict()
    d["ge"]["target"] = target.tolist()
    code, out = run(capsys, "compute", "ge", "--grad", "--in", write(tmp_path, Instance.from_dict(d)))
    res = json.loads(out)
    assert code == 0 and abs(res["value"]) < 1e-12
    assert np.max(np.abs(res["gradient"])) < 1e-12


@pytest.mark.parametrize("constraint", ["multi", "single"])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_compute_never_crashes_on_generated(tmp_path, capsys, constraint, seed):
    path = tmp_path / "g.json"
    run(capsys, "gen", "--seed", seed, "--n", 1 + 2 * seed, "--constraint", constraint, "--out", path)
    for q in ("z", "marginals", "entropy", "kl", "risk", "ge"):
        code, out = run(capsys, "compute", q, "--in", path, *(["--grad"] if q != "marginals" else []))
        assert code == 0, out
        assert all(np.all(np.isfinite(v)) for v in json.loads(out).values())
    assert run(capsys, "compute", "renyi", "--alpha", 2, "--in", path)[0] == 0
    assert run(capsys, "compute", "lpnorm", "--k", 3, "--in", path)[0] == 0


def test_compute_labeled_marginals(tmp_path, capsys):
    lw = np.stack([legal_mask(2), 2 * legal_mask(2)], axis=2)
    path = write(tmp_path, Instance(n=2, root_constraint="multi", weights=lw.sum(axis=2), labels=2,
                                    labeled_weights=lw))
    code, out = run(capsys, "compute", "marginals", "--in", path)
    m = np.array(json.loads(out)["value"])
    assert code == 0 and m.shape == (3, 3, 2)
    assert m[0, 1].sum() == pytest.approx(2 / 3)
    assert m[0, 1, 1] == pytest.approx(2 * m[0, 1, 0])


def error_of(out):
    obj = json.loads(out)
    assert set(obj) == {"error", "message"}
    return obj["error"]


def test_compute_singular_exit_2(tmp_path, capsys):
    path = write(tmp_path, Instance(n=2, root_constraint="multi", weights=np.zeros((3, 3))))
    code, out = run(capsys, "compute", "entropy", "--in", path)
    assert code == 2 and error_of(out) == "SingularError"


def test_compute_support_exit_2(tmp_path, capsys):
    q = legal_mask(2)
    q[0, 1] = 0.0
    inst = Instance(n=2, root_constraint="multi", weights=legal_mask(2), q_weights=q)
    code, out = run(capsys, "compute", "kl", "--in", write(tmp_path, inst))
    assert code == 2 and error_of(out) == "SupportError"


def test_compute_structural_exit_2(tmp_path, capsys):
    code, out = run(capsys, "compute", "risk", "--in", uniform_n2(tmp_path))
    assert code == 2 and error_of(out) == "StructuralError"
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 1, "root_constraint": "multi", "weights": [[0, 1], [1, 0]]}')
    code, out = run(capsys, "compute", "z", "--in", bad)
    assert code == 2 and error_of(out) == "StructuralError"


def test_compute_usage_and_io_errors(tmp_path, capsys):
    path = uniform_n2(tmp_path)
    assert error_of(run(capsys, "compute", "renyi", "--in", path)[1]) == "UsageError"
    code, out = run(capsys, "compute", "renyi", "--alpha", 1, "--in", path)
    assert code == 2 and error_of(out) == "DomainError"
    code, out = run(capsys, "compute", "z", "--in", tmp_path / "missing.json")
    assert code == 2 and error_of(out) == "IOError"


def test_compute_internal_failure_exit_1(tmp_path, capsys, monkeypatch):
    def broken(*a, **k):
        raise AssertionError("boom")

    monkeypatch.setattr(cli, "shannon_entropy", broken)
    code, out = run(capsys, "compute", "entropy", "--in", uniform_n2(tmp_path))
    assert code == 1 and error_of(out) == "InternalError"


def test_verify_passes(capsys):
    code, out = run(capsys, "verify", "--max-n", 4, "--trials", 20, "--seed", 7)
    assert code == 0
    assert out.strip().endswith("failed 0")


def test_verify_max_n_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["verify", "--max-n", "9"])
    assert exc.value.code == 2


def test_bench_csv(tmp_path, capsys):
    path = tmp_path / "b.csv"
    code, _ = run(capsys, "bench", "--sizes", "4,6", "--reps", 5, "--seed", 3, "--out", path)
    lines = path.read_text().splitlines()
    assert code == 0
    assert lines[0] == "n,algo,ms,reps"
    assert len(lines) == 1 + 2 * 4


def test_bench_rejects_unsorted_sizes(capsys):
    code, out = run(capsys, "bench", "--sizes", "8,4", "--reps", 5)
    assert code == 2 and error_of(out) == "UsageError"


def test_module_entry_point(tmp_path):
    path = uniform_n2(tmp_path)
    proc = subprocess.run([sys.executable, "-m", "treexp", "compute", "z", "--in", str(path)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["value"] == pytest.approx(3.0)


def test_format_json():
    assert cli.format_json({"a": [1.0, 2], "b": None, "c": float("inf")}) == '{"a": [1, 2], "b": null, "c": null}'
    assert json.loads(cli.format_json({"v": 0.1}))["v"] == 0.1
