import json

import numpy as np
import pytest

from ctmoco.cli import build_parser, main
from ctmoco.geometry import ScanGeometry
from ctmoco.motion import curve_from_csv
from ctmoco.sweep import SweepConfig
from ctmoco.volume import load_sinogram, load_volume


@pytest.fixture()
def tiny_geometry(tmp_path):
    geom = ScanGeometry(
        n_projections=24,
        detector_rows=32,
        detector_cols=48,
        pixel_spacing_u=4.0,
        pixel_spacing_v=4.0,
    )
    path = tmp_path / "geometry.json"
    path.write_text(geom.to_json())
    return path


class TestParser:
    def test_subcommand_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_simulate_defaults(self):
        args = build_parser().parse_args(["simulate", "--out", "x"])
        assert args.seed == 0
        assert args.f_c is None
        assert args.amp_mm == 5.0

    def test_compensate_stage_parsing(self):
        args = build_parser().parse_args(
            ["compensate", "--sinogram", "s", "--out", "o",
             "--stages", "16:8.0,32:4.0"]
        )
        from ctmoco.cli import _parse_stages

        assert _parse_stages(args.stages) == ((16, 8.0), (32, 4.0))


class TestSimulateReconstruct:
    def test_motion_free_round_trip(self, tmp_path, tiny_geometry):
        sim = tmp_path / "sim"
        assert main([
            "simulate", "--geometry", str(tiny_geometry), "--out", str(sim),
            "--phantom-shape", "24", "--phantom-spacing", "5.0",
        ]) == 0
        sino = load_sinogram(sim / "sinogram.raw")
        assert sino.shape == (24, 32, 48)
        curve = curve_from_csv((sim / "motion_curve.csv").read_text())
        assert not np.any(curve)

        out = tmp_path / "recon.raw"
        assert main([
            "reconstruct", "--geometry", str(tiny_geometry),
            "--sinogram", str(sim / "sinogram.raw"),
            "--shape", "24", "--spacing", "5.0", "--out", str(out),
        ]) == 0
        recon = load_volume(out)
        phantom = load_volume(sim / "phantom.raw")
        # crude fidelity check for the tiny scan
        corr = np.corrcoef(recon.data.ravel(), phantom.data.ravel())[0, 1]
        assert corr > 0.7

    def test_simulated_motion_is_reproducible(self, tmp_path, tiny_geometry):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            main([
                "simulate", "--geometry", str(tiny_geometry), "--out", str(out),
                "--seed", "3", "--f-c", "0.05",
                "--phantom-shape", "16", "--phantom-spacing", "7.5",
            ])
            outs.append(load_sinogram(out / "sinogram.raw").data)
        np.testing.assert_array_equal(outs[0], outs[1])

    def test_reconstruct_with_curve_matches_truth_better(self, tmp_path, tiny_geometry):
        sim = tmp_path / "sim"
        main([
            "simulate", "--geometry", str(tiny_geometry), "--out", str(sim),
            "--seed", "1", "--f-c", "0.1",
            "--phantom-shape", "24", "--phantom-spacing", "5.0",
        ])
        with_curve = tmp_path / "with.raw"
        without = tmp_path / "without.raw"
        main([
            "reconstruct", "--geometry", str(tiny_geometry),
            "--sinogram", str(sim / "sinogram.raw"),
            "--curve", str(sim / "motion_curve.csv"),
            "--shape", "24", "--spacing", "5.0", "--out", str(with_curve),
        ])
        main([
            "reconstruct", "--geometry", str(tiny_geometry),
            "--sinogram", str(sim / "sinogram.raw"),
            "--shape", "24", "--spacing", "5.0", "--out", str(without),
        ])
        phantom = load_volume(sim / "phantom.raw").data.ravel()
        err_with = np.linalg.norm(load_volume(with_curve).data.ravel() - phantom)
        err_without = np.linalg.norm(load_volume(without).data.ravel() - phantom)
        assert err_with < err_without


class TestCompensate:
    def test_writes_result_bundle(self, tmp_path, tiny_geometry):
        sim = tmp_path / "sim"
        main([
            "simulate", "--geometry", str(tiny_geometry), "--out", str(sim),
            "--seed", "0", "--f-c", "0.05",
            "--phantom-shape", "16", "--phantom-spacing", "7.5",
        ])
        out = tmp_path / "comp"
        assert main([
            "compensate", "--geometry", str(tiny_geometry),
            "--sinogram", str(sim / "sinogram.raw"),
            "--nodes", "3", "--budget", "15", "--stages", "16:8.0",
            "--out", str(out),
        ]) == 0
        result = json.loads((out / "result.json").read_text())
        assert result["n_evaluations"] <= 15
        assert result["final_score"] <= result["initial_score"]
        assert result["params"]["n_nodes"] == 3
        curve = curve_from_csv((out / "estimated_curve.csv").read_text())
        assert curve.shape == (6, 24)
        assert load_volume(out / "compensated.raw").shape == (16, 16, 16)


class TestSweepAndPlot:
    def test_sweep_then_plot(self, tmp_path, tiny_geometry):
        cfg = SweepConfig(
            phantom_seeds=(0,),
            n_frequencies=2,
            f_min=0.02,
            f_max=0.2,
            node_counts=(3,),
            geometry=ScanGeometry.from_json(tiny_geometry.read_text()),
            sim_shape=16,
            sim_spacing=7.5,
            eval_shape=16,
            eval_spacing=7.5,
            optimizer={
                "max_evaluations": 10,
                "stages": ((16, 8.0),),
                "stage_budget_weights": (1.0,),
            },
        )
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(cfg.to_json())
        out = tmp_path / "sweep"
        assert main([
            "sweep", "--config", str(cfg_path), "--out", str(out),
        ]) == 0
        assert (out / "records.csv").exists()
        plots = tmp_path / "plots"
        assert main([
            "plot", "--records", str(out / "records.csv"), "--out", str(plots),
        ]) == 0
        assert (plots / "rpe_ratio.svg").exists()
        assert (plots / "ssim_ratio.svg").exists()
