import csv
import json

import numpy as np
import pytest

from conftest import random_matrix
from shillkit import cli, config
from shillkit import dataset as ds
from shillkit.dataset import RatingMatrix

SMALL_LEGUP = dict(epochs=2, hidden=8, dis_hidden=[8, 4], pretrain_steps=10)


@pytest.fixture
def data_file(tmp_path):
    rng = np.random.default_rng(0)
    matrix = RatingMatrix.from_dense(random_matrix(rng, 40, 25, density=0.3))
    path = tmp_path / "ratings.csv"
    ds.save_csv(matrix, path)
    return path


def write_config(tmp_path, data_file, attackers=None, victims=None, extra=""):
    attackers = attackers if attackers is not None else [
        {"name": "average"}, {"name": "segment"}, {"name": "none"},
        dict(name="legup", **SMALL_LEGUP)]
    victims = victims or [{"name": "SVD", "dim": 4, "epochs": 5}, {"name": "SlopeOne"}]

    def table(section, entries):
        out = []
        for entry in entries:
            out.append(f"[[{section}]]")
            out += [f"{k} = {json.dumps(v)}" for k, v in entry.items()]
        return "\n".join(out)

    text = f"""
[dataset]
path = "{data_file.name}"
label = "toy"

[budget]
attack_size = 4
num_targets = 2
num_selected = 2

[detector]
k = 2

[run]
output_dir = "out"
seed = 11
{extra}
{table("attackers", attackers)}
{table("victims", victims)}
"""
    path = tmp_path / "exp.toml"
    path.write_text(text)
    return path


def rows_without_clock(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    col = rows[0].index("wall_clock")
    return [r[:col] + r[col + 1:] for r in rows]


class TestValidate:
    def test_defaults(self, tmp_path, data_file):
        cfg = config.load_config(write_config(tmp_path, data_file))
        legup = next(a for a in cfg.attackers if a.kind == "legup")
        assert legup.params["xi"] == 0.1
        assert cfg.profile_size == ds.average_profile_size(cfg.split.train)
        assert len(cfg.targets) == 2 and len(cfg.selected) == 2
        assert not set(cfg.targets) & set(cfg.selected)
        assert cfg.detector_m == 4

    def test_average_profile_size_rounds(self):
        matrix = RatingMatrix.from_dense(np.array([[1, 2, 3], [4, 0, 0], [5, 5, 0]]))
        assert ds.average_profile_size(matrix) == 2

    def test_out_of_scope(self, tmp_path, data_file):
        path = write_config(tmp_path, data_file, attackers=[{"name": "dcgan"}])
        with pytest.raises(config.ConfigError, match="unsupported \\(out of scope\\)"):
            config.load_config(path)

    def test_empty_attackers(self, tmp_path, data_file):
        with pytest.raises(config.ConfigError, match="at least one"):
            config.load_config(write_config(tmp_path, data_file, attackers=[]))

    def test_collects_all_errors(self, tmp_path, data_file):
        path = write_config(tmp_path, data_file, attackers=[{"name": "x", "kind": "knn"}],
                            victims=[{"name": "v", "kind": "SVD", "bogus": 1}])
        text = path.read_text().replace("attack_size = 4", "attack_size = 0")
        path.write_text(text)
        with pytest.raises(config.ConfigError) as info:
            config.load_config(path)
        assert len(info.value.errors) == 3

    def test_target_selected_overlap(self, tmp_path, data_file):
        path = write_config(tmp_path, data_file)
        path.write_text(path.read_text().replace("num_targets = 2",
                                                 "targets = [1, 2]\nselected = [2, 3]"))
        with pytest.raises(config.ConfigError, match="overlap"):
            config.load_config(path)

    def test_missing_path(self, tmp_path, data_file):
        path = write_config(tmp_path, data_file)
        path.write_text(path.read_text().replace(data_file.name, "nope.csv"))
        with pytest.raises(config.ConfigError, match="does not exist"):
            config.load_config(path)

    def test_env_overrides_output(self, tmp_path, data_file, monkeypatch):
        monkeypatch.setenv(config.OUTPUT_ENV, str(tmp_path / "elsewhere"))
        cfg = config.load_config(write_config(tmp_path, data_file))
        assert cfg.output_dir == str(tmp_path / "elsewhere")

    def test_cli_exit_codes(self, tmp_path, data_file, capsys):
        assert cli.main(["validate", str(write_config(tmp_path, data_file))]) == 0
        bad = write_config(tmp_path, data_file, attackers=[{"name": "wgan"}])
        assert cli.main(["validate", str(bad)]) == 2
        assert "out of scope" in capsys.readouterr().err


class TestSeeds:
    def test_cell_seed_stable(self):
        assert cli.cell_seed(1, "attack", "d", "a", 3) == cli.cell_seed(1, "attack", "d", "a", 3)
        assert cli.cell_seed(1, "attack", "d", "a", 3) != cli.cell_seed(2, "attack", "d", "a", 3)
        assert 0 <= cli.cell_seed(0, "x") < 2**63


class TestRun:
    def test_grid_and_rerun(self, tmp_path, data_file):
        path = write_config(tmp_path, data_file)
        assert cli.main(["run", str(path)]) == 0
        out = tmp_path / "out"
        first = rows_without_clock(out / "report.csv")
        assert len(first) == 1 + 4 * 2 * 2
        assert (out / "loss_curves.json").exists() and (out / "config.json").exists()
        assert len(list((out / "logs").glob("*.log"))) == 4 * 2 + 2 * 2 + 4 * 2 * 2
        fakes = ds.load_matrix(out / "fakes" / f"average__{first[1][3]}.csv")
        assert all(u.startswith("fake_") for u in fakes.user_ids)
        assert cli.main(["run", str(path)]) == 0
        assert rows_without_clock(out / "report.csv") == first

    def test_removing_attacker_keeps_other_cells(self, tmp_path, data_file):
        full = write_config(tmp_path, data_file)
        assert cli.main(["run", str(full)]) == 0
        rows_full = rows_without_clock(tmp_path / "out" / "report.csv")
        sub = tmp_path / "sub"
        sub.mkdir()
        (sub / data_file.name).write_bytes(data_file.read_bytes())
        reduced = write_config(sub, sub / data_file.name,
                               attackers=[dict(name="legup", **SMALL_LEGUP), {"name": "none"}])
        assert cli.main(["run", str(reduced)]) == 0
        rows_sub = rows_without_clock(sub / "out" / "report.csv")
        assert set(map(tuple, rows_sub[1:])) <= set(map(tuple, rows_full[1:]))

    def test_segment_needs_selected(self, tmp_path, data_file):
        path = write_config(tmp_path, data_file, attackers=[{"name": "segment"}])
        path.write_text(path.read_text().replace("num_selected = 2", "selected = []"))
        with pytest.raises(config.ConfigError, match="selected"):
            config.load_config(path)

    def test_failing_cells_named_and_others_written(self, tmp_path, data_file, capsys):
        path = write_config(tmp_path, data_file, attackers=[{"name": "average"}],
                            victims=[{"name": "boom", "kind": "SVD", "lr": 1e3, "epochs": 50},
                                     {"name": "SlopeOne"}])
        assert cli.main(["run", str(path)]) == 1
        err = capsys.readouterr().err
        assert "average/boom/" in err
        rows = rows_without_clock(tmp_path / "out" / "report.csv")
        assert len(rows) == 1 + 2 and all(r[2] == "SlopeOne" for r in rows[1:])


class TestSummarize:
    def write(self, path, rows):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cli.evaluation.REPORT_FIELDS)
            for attacker, target, hr in rows:
                w.writerow(["d", attacker, "SVD", target, 0.0, hr, 0.0, 0.0, 0, 1, 2, 0.0])

    def test_single_attacker_wins(self, tmp_path):
        self.write(tmp_path / "r.csv", [("a", 1, 0.1), ("a", 2, 0.0)])
        table, cells = cli.summarize([tmp_path / "r.csv"])
        assert table == {"a": {"best": 2, "top2": 2}} and cells == 2

    def test_ties(self, tmp_path):
        self.write(tmp_path / "r.csv", [("a", 1, 0.5), ("b", 1, 0.5), ("c", 1, 0.1)])
        table, _ = cli.summarize([tmp_path / "r.csv"])
        assert table["a"] == table["b"] == {"best": 1, "top2": 1}
        assert table["c"] == {"best": 0, "top2": 0}

    def test_accounting(self, tmp_path):
        self.write(tmp_path / "r.csv", [("a", 1, 0.3), ("b", 1, 0.2), ("c", 1, 0.1)])
        table, _ = cli.summarize([tmp_path / "r.csv"])
        assert sum(v["best"] for v in table.values()) == 1
        assert sum(v["top2"] for v in table.values()) == 2

    def test_cli_output(self, tmp_path, capsys):
        self.write(tmp_path / "report.csv", [("a", 1, 0.3)])
        assert cli.main(["summarize", str(tmp_path)]) == 0
        assert "a,1,1,1" in capsys.readouterr().out


class TestDetectProject:
    def test_detect_and_project(self, tmp_path, capsys):
        from oracles import clone_fixture
        dense, truth = clone_fixture(0)
        ids = [f"u{k}" for k in range(200)] + [f"fake_{k}" for k in range(10)]
        matrix = RatingMatrix.from_dense(dense, user_ids=ids)
        path = tmp_path / "m.csv"
        ds.save_csv(matrix, path)
        assert cli.main(["detect", str(path), "--m", "10", "--k", "3"]) == 0
        captured = capsys.readouterr()
        assert "recall=" in captured.err
        flagged = captured.out.split()
        assert len(flagged) == 10 and sum(f.startswith("fake_") for f in flagged) >= 8
        out = tmp_path / "coords.csv"
        assert cli.main(["project", str(path), "--out", str(out)]) == 0
        assert out.read_text().startswith("user_id,x,y,is_fake")

    def test_missing_file(self, tmp_path):
        assert cli.main(["detect", str(tmp_path / "none.csv"), "--m", "1"]) == 2
