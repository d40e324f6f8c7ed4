import json
import os

import numpy as np
import pytest
from pydantic import ValidationError

from core.exceptions import ConfigFileError, InvalidParameterError, ManifestError, PipelineError
from core.image_ops import to_gray
from schema.adjustment_schema import AdjustmentParams
from schema.run_schema import DatasetEntry, DatasetManifest
from services.pipeline_service import pipeline_service
from services.retinex_service import retinex_service
from storage.image_store import image_store


def _config(out_dir, **overrides):
    base = {"output_dir": str(out_dir), "solver": {"stages": 3}, "finetune_iters": 5}
    base.update(overrides)
    return pipeline_service.load_run_config(None, base)


@pytest.fixture
def benchmark_manifest(tmp_path, distinct_lightness_image, dark_image):
    pair = str(tmp_path / "pair.png")
    single = str(tmp_path / "single.png")
    broken = str(tmp_path / "broken.png")
    image_store.save_image(distinct_lightness_image, pair)
    image_store.save_image(dark_image, single)
    with open(broken, "wb") as fh:
        fh.write(b"not an image at all")
    return DatasetManifest(entries=[
        DatasetEntry(id="pair", low_path=pair, high_path=pair),
        DatasetEntry(id="single", low_path=single),
        DatasetEntry(id="broken", low_path=broken),
    ])


def test_config_precedence(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"solver": {"stages": 4, "lambda": 2.0}, "finetune_enabled": True}))
    config = pipeline_service.load_run_config(str(path), {"solver": {"stages": 2, "gamma": None}})
    assert config.solver.stages == 2
    assert config.solver.lam == 2.0
    assert config.finetune_enabled is True
    assert config.solver.gamma == 0.1


def test_config_errors(tmp_path):
    with pytest.raises(ConfigFileError):
        pipeline_service.load_run_config(str(tmp_path / "missing.json"))
    path = tmp_path / "list.json"
    path.write_text("[1, 2]")
    with pytest.raises(ConfigFileError):
        pipeline_service.load_run_config(str(path))
    with pytest.raises(ValidationError):
        pipeline_service.load_run_config(None, {"solver": {"stages": 0}})


def test_enhance_is_byte_identical_across_runs(tmp_path, dark_png):
    outputs = []
    for name in ("first", "second"):
        config = _config(tmp_path / name, finetune_enabled=True, emit_stage_trace=True)
        result = pipeline_service.cmd_enhance(dark_png, config)
        outputs.append([open(p, "rb").read() for p in result.output_paths()])
    assert len(outputs[0]) == 6
    assert outputs[0] == outputs[1]


def test_zero_alpha_identity_adjustment_reproduces_the_decomposition(tmp_path, dark_png):
    config = _config(tmp_path / "out", adjustment_init=AdjustmentParams.identity().model_dump())
    result = pipeline_service.cmd_enhance(dark_png, config, alpha_override=0.0)
    assert result.alpha == 0.0
    assert not result.finetuned

    final = retinex_service.decompose(image_store.load_image(dark_png), config.solver)[-1]
    assert final.R.max() <= 1.0
    expected = image_store.quantize(np.clip(final.R * final.L[:, :, None], 0, 1)) / 255.0
    np.testing.assert_array_equal(image_store.load_image(result.enhanced_path), expected)


def test_finetuned_output_is_brighter_than_the_input(tmp_path, dark_png):
    config = _config(tmp_path / "out", finetune_enabled=True, finetune_iters=10)
    result = pipeline_service.cmd_enhance(dark_png, config)
    assert result.finetuned
    before = float(np.mean(to_gray(image_store.load_image(dark_png))))
    after = float(np.mean(to_gray(image_store.load_image(result.enhanced_path))))
    assert after > before

    with open(result.report_path) as fh:
        report = json.load(fh)
    assert report["id"] == "dark"
    assert len(report["finetune_trace"]) == 11


def test_alpha_override_wins_over_finetuning(tmp_path, dark_png):
    config = _config(tmp_path / "out", finetune_enabled=True)
    result = pipeline_service.cmd_enhance(dark_png, config, alpha_override=0.3)
    assert result.alpha == 0.3
    assert not result.finetuned


def test_stage_trace_outputs(tmp_path, dark_png):
    config = _config(tmp_path / "out", emit_stage_trace=True, apply_gc=True)
    result = pipeline_service.cmd_enhance(dark_png, config)
    for path in result.output_paths():
        assert os.path.isfile(path)
    assert result.lbs_path.endswith("dark_lbs.png")
    with open(result.trace_path) as fh:
        trace = json.load(fh)
    assert [row["stage"] for row in trace] == [0, 1, 2, 3]
    with open(result.report_path) as fh:
        assert "gc_exponent" in json.load(fh)


def test_enhance_names_the_failing_phase(tmp_path):
    with pytest.raises(PipelineError) as exc:
        pipeline_service.cmd_enhance(str(tmp_path / "missing.png"), _config(tmp_path / "out"))
    assert exc.value.phase == "load"
    assert str(exc.value).startswith("load: ")


def test_benchmark_report(tmp_path, benchmark_manifest):
    config = _config(tmp_path / "out", solver={"stages": 3, "gamma": 0.0},
                     adjustment_init={"refl_gain": 0.0}, apply_gc=True)
    report_path = pipeline_service.cmd_benchmark(benchmark_manifest, config, str(tmp_path / "report.json"))
    with open(report_path) as fh:
        report = json.load(fh)

    rows = report["rows"]
    assert [row["id"] for row in rows] == ["pair", "single", "broken"]
    assert report["failed_entries"] == 1

    pair = rows[0]
    assert pair["paired"] is True
    assert pair["alpha"] == 0.0
    assert pair["psnr"] == 99.0
    assert pair["ssim"] == pytest.approx(1.0, abs=1e-6)
    assert pair["loe_ref"] == 0.0
    for key in ("psnr_gc", "ssim_gc", "loe_gc", "loe_ref_gc", "gc_exponent",
                "adjustment_loss", "decomposition_loss", "loss_lbs"):
        assert key in pair

    single = rows[1]
    assert single["paired"] is False
    assert "loe" in single and "psnr" not in single

    assert rows[2]["error"].startswith("load: ")

    mean = report["mean"]
    assert mean["id"] == "mean"
    for key, value in mean.items():
        if key == "id":
            continue
        values = [row[key] for row in rows if key in row]
        assert value == pytest.approx(sum(values) / len(values))


def _degenerate_manifest(tmp_path, image):
    path = str(tmp_path / "same.png")
    image_store.save_image(image, path)
    return DatasetManifest(entries=[DatasetEntry(id="same", low_path=path, high_path=path)])


def test_degenerate_pair_with_default_adjustment(tmp_path, distinct_lightness_image):
    manifest = _degenerate_manifest(tmp_path, distinct_lightness_image)
    config = _config(tmp_path / "out", solver={"stages": 3, "gamma": 0.0})
    assert config.adjustment_init.refl_gain > 0
    report_path = pipeline_service.cmd_benchmark(manifest, config, str(tmp_path / "report.json"))
    with open(report_path) as fh:
        row = json.load(fh)["rows"][0]
    assert row["alpha"] == 0.0
    assert row["loss_lbs"] == 0.0
    assert row["psnr"] == 99.0
    assert row["ssim"] == pytest.approx(1.0, abs=1e-6)
    assert row["loe_ref"] == 0.0


def test_degenerate_pair_with_default_config_gets_no_brightness_boost(tmp_path, distinct_lightness_image):
    manifest = _degenerate_manifest(tmp_path, distinct_lightness_image)
    config = pipeline_service.load_run_config(None, {"output_dir": str(tmp_path / "out"), "solver": {"stages": 3}})
    image = image_store.load_image(manifest.entries[0].low_path)
    run = pipeline_service.enhance_image(image, config, gt=image)
    assert run.params.alpha == 0.0
    np.testing.assert_array_equal(run.lbs.plane, 0.0)
    # with no boost left, the output is the clipped recomposition of the decomposition
    np.testing.assert_allclose(run.enhanced, np.clip(run.final.R * run.final.L[:, :, None], 0, 1), atol=1e-12)


def test_benchmark_of_empty_manifest_fails(tmp_path):
    with pytest.raises(ManifestError):
        pipeline_service.cmd_benchmark(DatasetManifest(entries=[]), _config(tmp_path / "out"))


def test_mean_row_skips_non_numeric_keys():
    rows = [{"id": "a", "paired": True, "psnr": 10.0, "loe": 2.0},
            {"id": "b", "paired": False, "loe": 4.0, "error": "load: boom"}]
    assert pipeline_service.mean_row(rows) == {"id": "mean", "psnr": 10.0, "loe": 3.0}


def test_stage_sweep(tmp_path, benchmark_manifest):
    config = _config(tmp_path / "out", solver={"stages": 3, "gamma": 0.0}, adjustment_init={"refl_gain": 0.0})
    path = pipeline_service.cmd_stage_sweep(benchmark_manifest, config, [1, 2])
    with open(path) as fh:
        sweep = json.load(fh)
    assert set(sweep["stages"]) == {"1", "2"}
    assert sweep["stages"]["1"]["psnr"] == 99.0

    with pytest.raises(InvalidParameterError):
        pipeline_service.cmd_stage_sweep(benchmark_manifest, config, [0])
