import numpy as np
import pytest
from unittest.mock import MagicMock
from PIL import Image

from src.core.config import get_settings
from src.core.errors import GroundSetTooLarge, InstanceError, InvalidRunName, UsageError
from src.core.schemas import InstanceKind, InstanceSpec, ScreeningMode, SolverKind
from src.repositories.instance_repository import InstanceRepository
from src.repositories.run_repository import RunRepository
from src.services.bench_service import BenchService
from src.services.instance_service import InstanceService
from src.services.solve_service import SolveService
from src.services.verify_service import (VIOLATION_KEYS, VerifyService, bounds_agree, l1_closed_form_holds,
                                         negate_gap, random_certificate)
from src.sfm.datagen import expected_edge_count
from src.sfm.functions import ModularOracle, iwata_oracle


# --- solve ---

def test_solve_service_persists_run_files():
    runs = MagicMock()
    service = SolveService(runs)
    summary, report = service.solve(ModularOracle([1.0, -2.0, 3.0]), "modular-3")
    assert summary.minimizer == [1]
    assert summary.value == pytest.approx(-2.0)
    assert summary.final_rejection_ratio == 1.0
    runs.write_trace.assert_called_once()
    runs.write_rejection.assert_called_once_with(report.triggers)
    runs.write_summary.assert_called_once_with(summary)


def test_solve_service_skips_rejection_log_without_screening():
    runs = MagicMock()
    summary, _ = SolveService(runs).solve(iwata_oracle(6), "iwata-6", screening=ScreeningMode.NONE)
    assert summary.screening == ScreeningMode.NONE
    assert summary.n_triggers == 0
    runs.write_rejection.assert_not_called()
    runs.write_summary.assert_called_once()


def test_solve_service_without_repository():
    summary, _ = SolveService().solve(iwata_oracle(6), "iwata-6", solver=SolverKind.FRANK_WOLFE, eps=1e-6)
    assert summary.solver == SolverKind.FRANK_WOLFE
    assert summary.total_time_s == pytest.approx(summary.screen_time_s + summary.solver_time_s)


# --- bench ---

def test_bench_rows_and_baseline():
    runs = MagicMock()
    rows = BenchService(runs).run(iwata_oracle(8), "iwata-8", trials=1)
    assert [r.variant for r in rows] == ["none", "aes", "ies", "iaes"]
    assert rows[0].speedup == pytest.approx(1.0)
    assert len({round(r.value, 9) for r in rows}) == 1
    runs.write_bench.assert_called_once_with(rows)


@pytest.mark.parametrize("variants", [["iaes"], ["aes", "iaes"], ["none", "none"]])
def test_bench_needs_a_baseline_and_a_variant(variants):
    with pytest.raises(UsageError):
        BenchService().run(iwata_oracle(4), "iwata-4", variants=variants)


# --- verify ---

def test_verify_small_audit_passes():
    runs = MagicMock()
    report = VerifyService(runs).run(trials=8, p_max=6, seed=1)
    assert report.passed
    assert set(report.violations) == set(VIOLATION_KEYS)
    runs.write_verify.assert_called_once_with(report)


def test_verify_detects_injected_fault():
    report = VerifyService().run(trials=20, p_max=8, seed=0, inject_fault=True)
    assert report.fault_injected
    assert not report.passed


def test_verify_guards_ground_set_size():
    with pytest.raises(GroundSetTooLarge):
        VerifyService().run(trials=1, p_max=30)
    with pytest.raises(GroundSetTooLarge):
        VerifyService().run(trials=1, p_max=4, oracle=iwata_oracle(6))


def test_verify_limit_comes_from_settings(output_dir, monkeypatch):
    assert VerifyService().brute_force_limit == 22
    monkeypatch.setenv("SFM_BRUTE_FORCE_LIMIT", "6")
    get_settings.cache_clear()
    with pytest.raises(GroundSetTooLarge) as info:
        VerifyService().run(trials=1, p_max=7)
    assert info.value.limit == 6
    assert VerifyService(brute_force_limit=12).run(trials=1, p_max=7).passed


def test_verify_single_oracle():
    report = VerifyService().run(trials=2, p_max=6, oracle=iwata_oracle(5))
    assert report.instances == 2
    assert report.passed


def test_closed_form_helpers():
    rng = np.random.default_rng(0)
    for _ in range(20):
        cert = random_certificate(rng)
        assert bounds_agree(cert)
        assert l1_closed_form_holds(cert, rng, samples=500)
        assert negate_gap(cert).gap == -cert.gap


# --- instances ---

@pytest.mark.parametrize("kind,params,p", [
    (InstanceKind.TWO_MOONS, {"p": 20, "p0": 4}, 20),
    (InstanceKind.GRID, {"height": 4, "width": 5}, 20),
    (InstanceKind.MODULAR, {"p": 5}, 5),
    (InstanceKind.CONCAVE, {"p": 6, "curve": "power", "exponent": 0.7}, 6),
    (InstanceKind.IWATA, {"p": 7}, 7),
    (InstanceKind.RANDOM, {"p": 9, "family": "grid_cut"}, 9),
])
def test_generate_then_load(tmp_path, kind, params, p):
    service = InstanceService()
    spec, stats = service.generate(kind, tmp_path / "inst.json", seed=3, **params)
    assert stats.p == p
    assert (tmp_path / "inst.json").exists()
    for relative in spec.data_paths.values():
        assert (tmp_path / relative).exists()
    loaded_spec, oracle = InstanceService().load(tmp_path / "inst.json")
    assert loaded_spec == spec
    assert oracle.p == p


def test_generated_two_moons_reload_identically(tmp_path):
    service = InstanceService()
    spec, _ = service.generate(InstanceKind.TWO_MOONS, tmp_path / "moons.json", seed=2, p=15, p0=3)
    inline = service.build_oracle(spec.model_copy(update={"data_paths": {}}))
    _, loaded = InstanceService().load(tmp_path / "moons.json")
    masks = np.random.default_rng(0).random((20, 15)) < 0.5
    assert np.allclose(inline.evaluate_batch(masks), loaded.evaluate_batch(masks))


def test_grid_from_image_file(tmp_path):
    pixels = np.zeros((6, 6), dtype=np.uint8)
    pixels[2:4, 2:4] = 220
    Image.fromarray(pixels).save(tmp_path / "disk.pgm")
    spec, stats = InstanceService().generate(InstanceKind.GRID, tmp_path / "seg.json", image=str(tmp_path / "disk.pgm"))
    assert stats.n_edges == expected_edge_count(6, 6)
    assert spec.params["channels"] == 1
    _, oracle = InstanceService().load(tmp_path / "seg.json")
    assert oracle.graph.n_edges == stats.n_edges


def test_grid_with_precomputed_unary(tmp_path):
    repo = InstanceRepository(tmp_path)
    repo.save_vector(np.linspace(-1, 1, 12), "u.csv")
    spec, _ = InstanceService().generate(InstanceKind.GRID, tmp_path / "g.json", height=3, width=4,
                                          unary=str(tmp_path / "u.csv"))
    assert spec.params["unary_model"] == "file"
    _, oracle = InstanceService().load(tmp_path / "g.json")
    assert np.allclose(oracle.unary, np.linspace(-1, 1, 12))
    with pytest.raises(InstanceError):
        InstanceService().generate(InstanceKind.GRID, tmp_path / "h.json", height=2, width=2,
                                   unary=str(tmp_path / "u.csv"))


def test_cut_instance_from_edge_files(tmp_path):
    repo = InstanceRepository(tmp_path)
    spec = InstanceSpec(name="path", kind=InstanceKind.CUT, p=3, data_paths={
        "edges": repo.save_edges(np.array([0, 1]), np.array([1, 2]), np.array([1.0, 1.0]), "edges.csv"),
        "unary": repo.save_vector(np.array([-2.0, 0.0, 0.0]), "unary.csv"),
    })
    repo.save(spec, "path.json")
    _, oracle = InstanceService().load(tmp_path / "path.json")
    assert oracle([0]) == pytest.approx(-1.0)
    assert oracle([0, 1, 2]) == pytest.approx(-2.0)


def test_inline_cut_instance():
    spec = InstanceSpec(kind=InstanceKind.CUT, p=2, params={"edges": [[0, 1, 1.0]], "unary": [-3.0, 2.0]})
    oracle = InstanceService().build_oracle(spec)
    assert oracle([0]) == pytest.approx(-2.0)


@pytest.mark.parametrize("spec", [
    InstanceSpec(kind=InstanceKind.MODULAR, p=4, params={"weights": [1.0, 2.0, 3.0]}),
    InstanceSpec(kind=InstanceKind.MODULAR, p=2),
    InstanceSpec(kind=InstanceKind.CONCAVE, p=3, params={"curve": "cubic"}),
    InstanceSpec(kind=InstanceKind.RANDOM, p=3, params={"family": "matroid"}),
    InstanceSpec(kind=InstanceKind.CONCAVE, p=3, params={"weights": [1.0, 2.0]}),
    InstanceSpec(kind=InstanceKind.MODULAR, p=2, params={"weights": ["a", "b"]}),
    InstanceSpec(kind=InstanceKind.CUT, p=2, params={"edges": [[0, 1]], "unary": [0.0, 0.0]}),
], ids=["size-mismatch", "missing-weights", "unknown-curve", "unknown-family", "concave-weight-length",
        "non-numeric-weights", "edge-without-weight"])
def test_bad_instances(spec):
    with pytest.raises(InstanceError):
        InstanceService().build_oracle(spec)


def test_cut_instances_are_not_generated(tmp_path):
    with pytest.raises(InstanceError):
        InstanceService().generate(InstanceKind.CUT, tmp_path / "c.json")


def test_missing_instance_file(tmp_path):
    with pytest.raises(InstanceError):
        InstanceService().load(tmp_path / "absent.json")
    (tmp_path / "broken.json").write_text('{"kind": "nonsense", "p": 3}')
    with pytest.raises(InstanceError):
        InstanceService().load(tmp_path / "broken.json")


def test_missing_data_file(tmp_path):
    repo = InstanceRepository(tmp_path)
    repo.save(InstanceSpec(kind=InstanceKind.GRID, p=4, data_paths={"image": "gone.pgm"}), "g.json")
    with pytest.raises(InstanceError):
        InstanceService().load(tmp_path / "g.json")


# --- run repository ---

def test_run_repository_lists_and_reads(tmp_path):
    root = RunRepository(tmp_path)
    for name in ("b", "a"):
        SolveService(root.for_run(name)).solve(iwata_oracle(5), f"iwata-{name}")
    (tmp_path / "empty").mkdir()
    assert root.list_runs() == ["a", "b"]
    assert root.list_runs(limit=1, offset=1) == ["b"]
    assert root.get_summary("a").instance == "iwata-a"
    assert root.get_summary("empty") is None
    assert list(root.read_trace("a").columns) == ["iteration", "gap", "dual_norm", "oracle_calls", "elapsed_ns"]


@pytest.mark.parametrize("name", ["../outside", "a/../../outside", "/tmp/absolute", "", "."])
def test_run_repository_stays_under_its_root(tmp_path, name):
    root = RunRepository(tmp_path / "runs")
    with pytest.raises(InvalidRunName):
        root.for_run(name)


def test_run_repository_accepts_nested_names(tmp_path):
    child = RunRepository(tmp_path).for_run("bench/iwata-5")
    assert child.root == (tmp_path / "bench" / "iwata-5").resolve()
