import pytest

from qgfmc import cli
from qgfmc.config import ConfigError, RunConfig, dump_config, load_config, parse_config_text
from qgfmc.pipeline import ReliabilityError

TOY = ["space.orbitals=0p1/2,1s1/2", "subspace.n=2", "subspace.dt=1.0", "gfmc.walkers=100",
       "gfmc.steps=200", "target.level=0", "exact.levels=2"]


@pytest.fixture
def toy(data_dir):
    return [f"interaction.file={data_dir / 'toy_4q.int'}", *TOY]


def _sets(items):
    return [a for item in items for a in ("--set", item)]


def test_defaults_validate():
    cfg = load_config()
    assert cfg.orbitals == ["0d5/2", "1s1/2"] and cfg.shots == [100000]


def test_parse_dump_round_trip(toy):
    cfg = load_config(None, toy + ["excitation.modes=0-2,1-3", "shadow.shots=1e3,500", "gfmc.lambda=none"])
    assert cfg.modes == [(0, 2), (1, 3)] and cfg.shots == [1000, 500] and cfg.lam is None
    back = parse_config_text(dump_config(cfg))
    assert back.items() == cfg.items()


def test_config_file_and_comments(tmp_path, data_dir):
    p = tmp_path / "run.cfg"
    p.write_text(f"# toy run\ninteraction.file = {data_dir / 'toy_4q.int'}\nsubspace.n = 3  # short\n")
    assert load_config(str(p)).n == 3


@pytest.mark.parametrize("bad", ["nope.key=1", "gfmc.gamma=2", "mapping.scheme=parity", "subspace.dt=",
                                 "space.particles=x", "interaction.file=/nonexistent.int"])
def test_config_errors(bad):
    with pytest.raises(ConfigError):
        load_config(None, [bad])


def test_set_rejects_unknown_key():
    with pytest.raises(ConfigError):
        RunConfig().set("bogus", "1")


def test_cli_exit_codes(tmp_path, toy, capsys):
    assert cli.main(["exact", "--out", str(tmp_path / "a"), *_sets(toy)]) == cli.EXIT_OK
    assert cli.main(["exact", "--out", str(tmp_path), "--set", "bogus.key=1"]) == cli.EXIT_CONFIG
    assert cli.main(["exact", "--config", str(tmp_path / "missing.cfg")]) == cli.EXIT_CONFIG
    assert cli.main(["exact", "--workers", "0"]) == cli.EXIT_CONFIG
    code = cli.main(["build-ham", "--out", str(tmp_path / "b"), *_sets(toy + ["space.particles=9"])])
    assert code == cli.EXIT_ERROR
    assert "[shell-model]" in capsys.readouterr().err


def test_cli_reliability_exit(tmp_path, toy, monkeypatch):
    def fail(cfg, out):
        raise ReliabilityError("denominator")

    monkeypatch.setitem(cli.COMMANDS, "gfmc", (fail, ""))
    assert cli.main(["gfmc", "--out", str(tmp_path), *_sets(toy)]) == cli.EXIT_RELIABILITY


def test_build_ham_outputs(tmp_path, toy):
    assert cli.main(["build-ham", "--out", str(tmp_path), *_sets(toy)]) == 0
    for name in ("basis.csv", "hamiltonian.csv", "hamiltonian.pauli", "build_ham.json", "config.txt"):
        assert (tmp_path / name).is_file()


def test_pipeline_is_byte_identical(tmp_path, toy):
    outs = []
    for k in range(2):
        d = tmp_path / str(k)
        assert cli.main(["pipeline", "--out", str(d), *_sets(toy)]) == 0
        outs.append((d / "energy_vs_step.csv").read_bytes())
    assert outs[0] == outs[1]
    assert outs[0].startswith(b"# ")


def test_single_element_sweep_gives_one_row(tmp_path, toy):
    sets = toy + ["shadow.shots=200", "sweep.repeats=2"]
    assert cli.main(["sweep-shots", "--out", str(tmp_path), *_sets(sets)]) in (0, cli.EXIT_RELIABILITY)
    lines = (tmp_path / "sweep_shots.csv").read_text().splitlines()
    assert len(lines) == 3  # version line, header, one row
