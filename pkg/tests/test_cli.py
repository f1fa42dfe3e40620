"""Checkpoint persistence, config parsing and the end-to-end CLI pipeline."""

import os

import numpy as np
import pytest

from fptnn.checkpoint import load_checkpoint, save_checkpoint
from fptnn.cli import main
from fptnn.config import (
    default_config,
    dump_config,
    load_config,
    read_domain_file,
    write_domain_file,
)
from fptnn.errors import ConfigError
from fptnn.geometry import Domain
from fptnn.optim import LionState
from fptnn.tffn import TffnModel
from fptnn.trbfn import RbfKind, TrbfnModel


class TestCheckpoint:
    def test_trbfn_round_trip(self, tmp_path, square_domain):
        model = TrbfnModel.initialize(
            square_domain, rank=4,
            kinds=[RbfKind.WENDLAND, RbfKind.INVERSE_MULTIQUADRIC], seed=3,
        )
        path = tmp_path / "model.npz"
        states = {"all": LionState(momentum=np.arange(model.n_params, dtype=np.float32))}
        save_checkpoint(path, model, epoch=17, optimizer_states=states)
        loaded, epoch, loaded_states = load_checkpoint(path)
        assert epoch == 17
        assert isinstance(loaded, TrbfnModel)
        assert loaded.kinds == model.kinds
        np.testing.assert_array_equal(loaded.get_raw_vector(), model.get_raw_vector())
        np.testing.assert_array_equal(loaded.domain.center, model.domain.center)
        np.testing.assert_array_equal(
            loaded_states["all"].momentum, states["all"].momentum
        )
        assert loaded_states["all"].beta2 == states["all"].beta2

    def test_tffn_round_trip(self, tmp_path, square_domain):
        model = TffnModel.initialize(square_domain, rank=3, widths=(1, 6, 6, 1), seed=5)
        path = tmp_path / "model.npz"
        save_checkpoint(path, model, epoch=2)
        loaded, epoch, states = load_checkpoint(path)
        assert isinstance(loaded, TffnModel)
        assert loaded.widths == model.widths
        assert states == {}
        np.testing.assert_array_equal(loaded.get_raw_vector(), model.get_raw_vector())
        # round trip is exact: evaluation agrees bit for bit
        x = np.array([[0.2, -0.3], [1.0, 0.5]])
        np.testing.assert_array_equal(loaded.eval_batch(x), model.eval_batch(x))


class TestConfig:
    def test_defaults_carry_reference_values(self):
        cfg = default_config("ring2d", "trbfn")
        assert cfg["sde"]["step_size"] == 0.001
        assert cfg["sde"]["burnin_steps"] == 1_000_000
        assert cfg["sde"]["terminal_steps"] == 1_500_000
        assert cfg["sde"]["num_trajectories"] == 10
        assert cfg["sde"]["margin_factor"] == 1.1
        assert cfg["train"]["epochs"] == 100_000
        assert cfg["train"]["batch_size"] == 5000
        assert cfg["train"]["w1"] == 50000.0 and cfg["train"]["w2"] == 100.0
        assert cfg["train"]["lr_start"] == 9e-4 and cfg["train"]["lr_end"] == 8e-6
        assert cfg["eval"]["samples"] == 100_000
        assert cfg["eval"]["thresholds"] == [1e-2, 5e-2, 1e-1]

    def test_per_benchmark_defaults(self):
        cfg = default_config("multimode6d", "trbfn")
        assert cfg["train"]["batch_size"] == 40000
        assert cfg["train"]["w1"] == 100.0 and cfg["train"]["w2"] == 100.0
        assert cfg["domain"]["threshold"] == 0.97
        cfg = default_config("unimode6d", "tffn")
        assert cfg["train"]["batch_size"] == 16000
        assert cfg["train"]["lr_start"] == 1e-3
        assert cfg["model"]["precision"] == "double"
        cfg = default_config("multimode10d", "trbfn")
        assert cfg["sde"]["anisotropic"] is True

    def test_overrides_win(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[model]\nbenchmark = ring2d\nfamily = trbfn\nrank = 17\n"
                        "[train]\nepochs = 5\n")
        cfg = load_config(str(path))
        assert cfg["model"]["rank"] == 17
        assert cfg["train"]["epochs"] == 5
        assert cfg["train"]["batch_size"] == 5000  # untouched default

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[train]\nepoch = 5\n")
        with pytest.raises(ConfigError, match="unknown key"):
            load_config(str(path))

    def test_unknown_section_rejected(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[optimizer]\nname = lion\n")
        with pytest.raises(ConfigError, match="unknown config section"):
            load_config(str(path))

    def test_round_trip_identity(self, tmp_path):
        cfg = default_config("unimode4d", "tffn")
        cfg["train"]["epochs"] = 77
        text = dump_config(cfg)
        reparsed = load_config(text=text)
        assert reparsed == cfg
        assert dump_config(reparsed) == text

    def test_bad_value_reported(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[train]\nepochs = soon\n")
        with pytest.raises(ConfigError, match="bad value"):
            load_config(str(path))


class TestDomainFile:
    def test_round_trip(self, tmp_path):
        dom = Domain(np.array([0.25, -1.5]), np.array([2.0, 3.5]))
        path = tmp_path / "domain.txt"
        write_domain_file(str(path), dom, provenance={"seed": 7, "trajectories": 10})
        loaded = read_domain_file(str(path))
        np.testing.assert_array_equal(loaded.center, dom.center)
        np.testing.assert_array_equal(loaded.r, dom.r)

    def test_deterministic_bytes(self, tmp_path):
        dom = Domain(np.array([1 / 3, -2 / 7]), np.array([0.1, 0.2]))
        p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
        write_domain_file(str(p1), dom, provenance={"seed": 1})
        write_domain_file(str(p2), dom, provenance={"seed": 1})
        assert p1.read_bytes() == p2.read_bytes()


TINY_CONFIG = """
[model]
benchmark = ring2d
family = trbfn
rank = 8
num_basis = 2
kinds = wendland
checkpoint = {work}/model.npz

[sde]
burnin_steps = 200
terminal_steps = 500
num_trajectories = 3

[domain]
file = {work}/domain.txt
refined_file = {work}/domain_refined.txt
refine_log = {work}/refine_log.csv
candidates = 0.5,1.0,1.5,2.0
threshold = 0.9

[train]
epochs = {epochs}
batch_size = 64
history = {work}/history.csv

[eval]
samples = 2000
report = {work}/eval.csv
slice_resolution = 5
slice_out = {work}/slice.csv
integral_radii = 0.5,1.0,1.5
integral_out = {work}/integrals.csv
"""


def _write_config(tmp_path, sub, epochs=4):
    work = tmp_path / sub
    work.mkdir(exist_ok=True)
    path = work / "run.ini"
    path.write_text(TINY_CONFIG.format(work=work, epochs=epochs))
    return work, str(path)


def _run_pipeline(cfg_path, seed=3, threads=1):
    base = ["--config", cfg_path, "--seed", str(seed), "--threads", str(threads)]
    for command in ("estimate-domain", "train", "refine", "eval",
                    "export-slice", "integrate-table"):
        assert main([command] + base) == 0


class TestPipeline:
    def test_end_to_end_and_byte_determinism(self, tmp_path, capsys):
        outputs = {}
        for sub, threads in (("a", 1), ("b", 3)):
            work, cfg = _write_config(tmp_path, sub)
            _run_pipeline(cfg, seed=3, threads=threads)
            outputs[sub] = {
                name: (work / name).read_bytes()
                for name in (
                    "domain.txt", "model.npz", "history.csv", "domain_refined.txt",
                    "refine_log.csv", "eval.csv", "slice.csv", "integrals.csv",
                )
            }
        # identical seeds give identical bytes for every stage, at any thread count
        for name in outputs["a"]:
            assert outputs["a"][name] == outputs["b"][name], name

    def test_single_epoch_smoke(self, tmp_path, capsys):
        work, cfg = _write_config(tmp_path, "smoke", epochs=1)
        assert main(["estimate-domain", "--config", cfg, "--seed", "1"]) == 0
        assert main(["train", "--config", cfg, "--seed", "1"]) == 0
        lines = (work / "history.csv").read_text().strip().splitlines()
        assert len(lines) == 2  # header plus exactly one record

    def test_missing_domain_file_fails(self, tmp_path, capsys):
        work, cfg = _write_config(tmp_path, "nodomain")
        assert main(["train", "--config", cfg]) == 1
        err = capsys.readouterr().err
        assert "error" in err

    def test_family_mismatch_detected(self, tmp_path, capsys):
        work, cfg = _write_config(tmp_path, "mismatch")
        assert main(["estimate-domain", "--config", cfg, "--seed", "1"]) == 0
        assert main(["train", "--config", cfg, "--seed", "1"]) == 0
        # rewrite the config to claim the checkpoint holds the other family
        text = (work / "run.ini").read_text().replace("family = trbfn", "family = tffn")
        text = text.replace("rank = 8", "rank = 2")
        (work / "run.ini").write_text(text)
        assert main(["eval", "--config", cfg, "--seed", "1"]) == 1
        assert "checkpoint holds" in capsys.readouterr().err

    def test_out_flag_overrides_path(self, tmp_path, capsys):
        work, cfg = _write_config(tmp_path, "outflag")
        dest = work / "custom_domain.txt"
        assert main([
            "estimate-domain", "--config", cfg, "--seed", "2", "--out", str(dest)
        ]) == 0
        assert dest.exists()

    def test_exact_solution_round_trip_reports_zero_error(self, tmp_path, capsys):
        # identity sanity: evaluating the exact density against itself
        from fptnn.benchmarks import exact_density, full_space_normalizer, get_benchmark
        from fptnn.evaluation import relative_error

        bench = get_benchmark("ring2d")
        norm = full_space_normalizer(bench)
        rows = relative_error(
            lambda x: exact_density(bench, x, norm),
            lambda x: exact_density(bench, x, norm),
            [-2, -2], [2, 2], 1000, [1e-2], 0,
        )
        assert rows[0].rel_error == 0.0

    def test_degenerate_domain_reported(self, tmp_path, capsys):
        # a deterministic contraction collapses every trajectory to a point
        from fptnn.errors import DegenerateDomainError
        from fptnn.geometry import SdeSimConfig, estimate_domain, euler_maruyama
        from fptnn.problem import Problem

        prob = Problem(
            d=1,
            f=lambda x: -np.asarray(x, dtype=float),
            div_f=lambda x: np.full(np.asarray(x).shape[:-1], -1.0),
            D=lambda x: np.zeros(np.asarray(x).shape[:-1] + (1, 1)),
        )
        config = SdeSimConfig(burnin_steps=100, terminal_steps=200, num_trajectories=2)
        xi = euler_maruyama(prob, 0.0, np.zeros((2, 1)), config)
        with pytest.raises(DegenerateDomainError):
            estimate_domain(xi, 1.1)
