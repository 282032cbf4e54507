import json

import pytest

from bn2o import gen
from bn2o.cli import main
from bn2o.engine import posteriors, savings_metric
from bn2o.model import CaseEvidence, make_network, parse_network, serialize_case, serialize_network

from suites import incremental_instance

PAIR = "bn2o 1\ndisease d1 0.5\ndisease d2 0.5\nfinding f1\nedge f1 d1 0.8\nedge f1 d2 0.6\n"


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def pair_files(tmp_path):
    return write(tmp_path, "net.txt", PAIR), write(tmp_path, "case.txt", "case 1\n+ f1\n")


def _tsv(out):
    return {line.split("\t")[0]: float(line.split("\t")[1]) for line in out.splitlines() if not line.startswith("#")}


def test_infer_tsv(capsys, pair_files):
    net, case = pair_files
    code, out, _ = run(capsys, "infer", "--net", net, "--case", case)
    assert code == 0
    assert out == "d1\t0.741379310345\nd2\t0.655172413793\n"


@pytest.mark.parametrize("engine", ["quickscore", "oracle"])
def test_engines_agree(capsys, pair_files, engine):
    net, case = pair_files
    _, ref, _ = run(capsys, "infer", "--net", net, "--case", case, "--json")
    _, other, _ = run(capsys, "infer", "--net", net, "--case", case, "--json", "--engine", engine)
    a, b = json.loads(ref), json.loads(other)
    for k in a["marginals"]:
        assert a["marginals"][k] == pytest.approx(b["marginals"][k], abs=1e-9)
    assert a["p_evidence"] == pytest.approx(b["p_evidence"], rel=1e-9)


def test_json_and_tsv_agree(capsys, tmp_path):
    net, case = incremental_instance(4)
    nf = write(tmp_path, "n.txt", serialize_network(net))
    cf = write(tmp_path, "c.txt", serialize_case(case, net))
    _, out, _ = run(capsys, "infer", "--net", nf, "--case", cf)
    _, js, _ = run(capsys, "infer", "--net", nf, "--case", cf, "--json")
    tsv, report = _tsv(out), json.loads(js)
    assert set(tsv) == set(report["marginals"])
    for k, v in report["marginals"].items():
        assert f"{v:.12g}" == f"{tsv[k]:.12g}"
    assert set(report["costs"]) == {"multiplications", "additions", "distributions", "partition_calls", "savings"}


def test_target(capsys, pair_files):
    net, case = pair_files
    code, out, _ = run(capsys, "infer", "--net", net, "--case", case, "--target", "d2")
    assert code == 0 and out == "d2\t0.655172413793\n"
    code, _, err = run(capsys, "infer", "--net", net, "--case", case, "--target", "zz")
    assert code == 1 and "unknown disease zz" in err


def test_quickscore_costs_exceed_recursive_on_chain(capsys, tmp_path):
    net = gen.chain_network(12)
    nf = write(tmp_path, "n.txt", serialize_network(net))
    cf = write(tmp_path, "c.txt", serialize_case(CaseEvidence(tuple(range(12))), net))

    def mults(engine):
        _, out, _ = run(capsys, "infer", "--net", nf, "--case", cf, "--costs", "--engine", engine)
        (line,) = [l for l in out.splitlines() if l.startswith("# multiplications")]
        return int(line.split("\t")[1])

    assert mults("quickscore") > mults("recursive")


def test_time_goes_to_stderr(capsys, pair_files):
    net, case = pair_files
    _, out, err = run(capsys, "infer", "--net", net, "--case", case, "--time")
    assert "time absorption" in err and "time" not in out


def test_exit_codes(capsys, tmp_path, pair_files):
    net, case = pair_files
    assert run(capsys, "infer", "--net", str(tmp_path / "missing"), "--case", case)[0] == 1
    bad = write(tmp_path, "bad.txt", "bn2o 1\ndisease d1 1.5\n")
    code, _, err = run(capsys, "infer", "--net", bad, "--case", case)
    assert code == 1 and "prior out of range" in err and "line 2" in err
    assert run(capsys, "infer", "--net", net)[0] == 1

    zero_net = write(tmp_path, "z.txt", "bn2o 1\ndisease a 0.5\nfinding f\nfinding g\nedge f a 1\nedge g a 0.5\n")
    zero_case = write(tmp_path, "zc.txt", "case 1\n+ g\n- f\n")
    for engine in ("recursive", "quickscore", "oracle"):
        assert run(capsys, "infer", "--net", zero_net, "--case", zero_case, "--engine", engine)[0] == 2

    big = gen.random_network(30, 30, 1, 2, seed=1)
    big_net = write(tmp_path, "big.txt", serialize_network(big))
    big_case = write(tmp_path, "bigc.txt", serialize_case(CaseEvidence(tuple(range(25))), big))
    assert run(capsys, "infer", "--net", big_net, "--case", big_case, "--engine", "quickscore")[0] == 3
    assert run(capsys, "infer", "--net", big_net, "--case", big_case, "--engine", "oracle")[0] == 3


def test_approx_trace_and_metrics(capsys, tmp_path):
    net, case = incremental_instance(5)
    nf = write(tmp_path, "n.txt", serialize_network(net))
    cf = write(tmp_path, "c.txt", serialize_case(case, net))
    code, out, _ = run(capsys, "approx", "--net", nf, "--case", cf, "--metrics")
    assert code == 0
    table, metrics = out.split("\n\n")
    rows = table.splitlines()
    assert rows[0] == "step\tfinding_id\tlep\tkl\tmults"
    assert rows[-1].split("\t")[3] == "0"
    assert [l.split("\t")[0] for l in metrics.splitlines()] == [
        "one_ip", "four_is", "four_ip", "error_top", "lep", "flep",
    ]


def test_approx_given_order(capsys, tmp_path):
    net, case = incremental_instance(5)
    nf = write(tmp_path, "n.txt", serialize_network(net))
    cf = write(tmp_path, "c.txt", serialize_case(case, net))
    ids = [net.findings[j].id for j in reversed(case.positives)]
    good = write(tmp_path, "order.txt", "\n".join(ids))
    code, out, _ = run(capsys, "approx", "--net", nf, "--case", cf, "--order", f"given:{good}")
    assert code == 0
    assert [r.split("\t")[1] for r in out.splitlines()[2:]] == ids
    bad = write(tmp_path, "bad.txt", "\n".join(ids[:-1]))
    assert run(capsys, "approx", "--net", nf, "--case", cf, "--order", f"given:{bad}")[0] == 1
    assert run(capsys, "approx", "--net", nf, "--case", cf, "--order", "sideways")[0] == 1


def test_gen_output_parses_and_is_deterministic(capsys):
    argv = ["gen", "--diseases", "10", "--findings", "15", "--parents", "1:4", "--seed", "3", "--leak-range", "0.01:0.1"]
    code, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert code == 0 and a == b
    net = parse_network(a)
    assert net.n_diseases == 10 and all(1 <= len(f.parents) <= 4 for f in net.findings)
    assert run(capsys, "gen", "--diseases", "3", "--findings", "2", "--parents", "2:9", "--seed", "1")[0] == 1
    assert run(capsys, "gen", "--diseases", "3", "--findings", "2", "--parents", "x", "--seed", "1")[0] == 1


def test_partition_stats_chain3(capsys, tmp_path):
    net = gen.chain_network(3)
    nf = write(tmp_path, "n.txt", serialize_network(net))
    cf = write(tmp_path, "c.txt", "case 1\n+ F1\n+ F2\n+ F3\n")
    code, out, _ = run(capsys, "partition-stats", "--net", nf, "--case", cf)
    lines = out.splitlines()
    assert code == 0
    assert lines[:3] == ["remaining_findings\tpartition_sizes", "3\t3", "2\t1,1"]
    rows = [(int(a), [int(s) for s in b.split(",")]) for a, b in (l.split("\t") for l in lines[1:-1])]
    total = int(lines[-1].split("\t")[1])
    assert total == savings_metric(rows) == posteriors(net, CaseEvidence((0, 1, 2))).cost.savings
    assert total >= 1
