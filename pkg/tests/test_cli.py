"""CLI contracts: flags, exit codes, determinism, file outputs."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from nsegment import dataio
from nsegment.cli import main

from conftest import make_random_image, make_random_label, make_stripe_label


def tree_bytes(root: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


@pytest.fixture
def dataset(tmp_path, gen):
    image_dir = tmp_path / "img"
    label_dir = tmp_path / "ann"
    for i in range(6):
        dataio.save_image(make_random_image(gen, 32, 32), image_dir / f"s{i:02d}.png")
        dataio.save_label(
            make_random_label(gen, 32, 32, num_classes=4), label_dir / f"s{i:02d}.png"
        )
    return tmp_path


class TestAugment:
    def test_writes_epochs_and_manifest(self, dataset):
        out = dataset / "out"
        code = main([
            "augment", "--images", str(dataset / "img"), "--labels", str(dataset / "ann"),
            "--out", str(out), "--mode", "nsegment+", "--epochs", "3", "--seed", "7",
        ])
        assert code == 0
        manifest = dataio.Manifest.read(out / "manifest.jsonl")
        assert manifest.epochs == 3 and manifest.seed == 7
        assert len(manifest.records) == 18
        for record in manifest.records:
            assert (out / record.output_label_path).is_file()

    def test_identical_seeds_identical_trees(self, dataset):
        args = lambda out: [
            "augment", "--images", str(dataset / "img"), "--labels", str(dataset / "ann"),
            "--out", str(out), "--epochs", "2", "--seed", "99",
        ]
        assert main(args(dataset / "o1")) == 0
        assert main(args(dataset / "o2")) == 0
        assert tree_bytes(dataset / "o1") == tree_bytes(dataset / "o2")

    def test_jobs_do_not_change_output(self, dataset):
        base = [
            "augment", "--images", str(dataset / "img"), "--labels", str(dataset / "ann"),
            "--epochs", "2", "--seed", "5",
        ]
        assert main(base + ["--out", str(dataset / "j1"), "--jobs", "1"]) == 0
        assert main(base + ["--out", str(dataset / "j4"), "--jobs", "4"]) == 0
        assert tree_bytes(dataset / "j1") == tree_bytes(dataset / "j4")

    def test_p_zero_copies_inputs(self, dataset):
        out = dataset / "out"
        code = main([
            "augment", "--images", str(dataset / "img"), "--labels", str(dataset / "ann"),
            "--out", str(out), "--p", "0", "--seed", "1",
        ])
        assert code == 0
        manifest = dataio.Manifest.read(out / "manifest.jsonl")
        assert all(not r.applied for r in manifest.records)
        for record in manifest.records:
            original = dataio.load_label(dataset / "ann" / f"{record.sample_id}.png")
            produced = dataio.load_label(out / record.output_label_path)
            assert np.array_equal(original.data, produced.data)

    def test_omega_flag_parses_product(self, dataset):
        out = dataset / "out"
        code = main([
            "augment", "--images", str(dataset / "img"), "--labels", str(dataset / "ann"),
            "--out", str(out), "--omega", "1,15,30,50,100x3,5,10", "--seed", "3",
        ])
        assert code == 0
        manifest = dataio.Manifest.read(out / "manifest.jsonl")
        assert len(manifest.config.omega) == 15

    def test_replay_reproduces_bytes(self, dataset):
        first = dataset / "first"
        main([
            "augment", "--images", str(dataset / "img"), "--labels", str(dataset / "ann"),
            "--out", str(first), "--epochs", "2", "--seed", "123",
        ])
        replayed = dataset / "replayed"
        code = main(["augment", "--replay", str(first / "manifest.jsonl"),
                     "--out", str(replayed)])
        assert code == 0
        assert tree_bytes(first) == tree_bytes(replayed)

    def test_replay_covers_format_and_companions(self, dataset):
        first = dataset / "first"
        main([
            "augment", "--images", str(dataset / "img"), "--labels", str(dataset / "ann"),
            "--out", str(first), "--seed", "31", "--label-format", "pgm",
            "--companions", "cutout,cutmix", "--cutmix-window", "3",
        ])
        replayed = dataset / "replayed"
        code = main(["augment", "--replay", str(first / "manifest.jsonl"),
                     "--out", str(replayed)])
        assert code == 0
        assert tree_bytes(first) == tree_bytes(replayed)

    def test_pgm_format(self, dataset):
        out = dataset / "out"
        code = main([
            "augment", "--images", str(dataset / "img"), "--labels", str(dataset / "ann"),
            "--out", str(out), "--label-format", "pgm", "--seed", "2",
        ])
        assert code == 0
        manifest = dataio.Manifest.read(out / "manifest.jsonl")
        assert all(r.output_label_path.endswith(".pgm") for r in manifest.records)

    def test_companions_write_images(self, dataset):
        out = dataset / "out"
        code = main([
            "augment", "--images", str(dataset / "img"), "--labels", str(dataset / "ann"),
            "--out", str(out), "--companions", "cutout,cutmix,erasing", "--seed", "4",
        ])
        assert code == 0
        assert any((out / "images" / "ep000").glob("*.png"))

    def test_images_out_copy(self, dataset):
        out = dataset / "out"
        main([
            "augment", "--images", str(dataset / "img"), "--labels", str(dataset / "ann"),
            "--out", str(out), "--images-out", "copy", "--seed", "4",
        ])
        assert (out / "images" / "s00.png").read_bytes() == (
            dataset / "img" / "s00.png"
        ).read_bytes()

    def test_env_seed_and_flag_priority(self, dataset, monkeypatch):
        monkeypatch.setenv("NSEG_SEED", "31")
        out_env = dataset / "oenv"
        main(["augment", "--images", str(dataset / "img"), "--labels", str(dataset / "ann"),
              "--out", str(out_env)])
        assert dataio.Manifest.read(out_env / "manifest.jsonl").seed == 31
        out_flag = dataset / "oflag"
        main(["augment", "--images", str(dataset / "img"), "--labels", str(dataset / "ann"),
              "--out", str(out_flag), "--seed", "77"])
        assert dataio.Manifest.read(out_flag / "manifest.jsonl").seed == 77

    def test_config_file_defaults_flags_win(self, dataset):
        cfg = dataset / "cfg.json"
        cfg.write_text(json.dumps({"p": 0.0, "epochs": 2, "seed": 5}))
        out = dataset / "out"
        code = main([
            "augment", "--images", str(dataset / "img"), "--labels", str(dataset / "ann"),
            "--out", str(out), "--config", str(cfg), "--seed", "9",
        ])
        assert code == 0
        manifest = dataio.Manifest.read(out / "manifest.jsonl")
        assert manifest.config.p == 0.0          # from config file
        assert manifest.epochs == 2              # from config file
        assert manifest.seed == 9                # flag wins

    def test_missing_dirs_exit_2(self, dataset):
        code = main(["augment", "--images", str(dataset / "nope"),
                     "--labels", str(dataset / "ann"), "--out", str(dataset / "o")])
        assert code == 2

    def test_bad_flags_exit_1(self, dataset):
        assert main(["augment", "--out", str(dataset / "o")]) == 1
        assert main(["augment", "--images", str(dataset / "img"), "--labels",
                     str(dataset / "ann"), "--out", str(dataset / "o"),
                     "--p", "2.0"]) == 1
        assert main(["augment", "--images", str(dataset / "img"), "--labels",
                     str(dataset / "ann"), "--out", str(dataset / "o"),
                     "--omega", "1,2"]) == 1


class TestPerturb:
    @pytest.fixture
    def label_dir(self, tmp_path):
        root = tmp_path / "labels"
        for i, side in enumerate((12, 16, 20)):
            lab = make_stripe_label(48, 48, [side, side])
            dataio.save_label(lab, root / f"m{i}.png")
        return root

    def test_shift_grid_csv(self, label_dir, tmp_path):
        out = tmp_path / "sweep.csv"
        code = main(["perturb", "--labels", str(label_dir), "--kind", "shift",
                     "--grid", "0,1,2,4,8", "--out", str(out), "--seed", "3"])
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "kind,magnitude,target,mean_mIoU,n_samples"
        assert len(lines) == 6
        first = lines[1].split(",")
        assert first[0] == "shift" and float(first[3]) == pytest.approx(1.0)

    def test_erode_grid_monotone(self, label_dir, tmp_path):
        out = tmp_path / "erode.csv"
        code = main(["perturb", "--labels", str(label_dir), "--kind", "erode",
                     "--grid", "7,15,21", "--out", str(out), "--seed", "3"])
        assert code == 0
        values = [float(line.split(",")[3]) for line in out.read_text().strip().splitlines()[1:]]
        assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))

    def test_even_kernel_normalized(self, label_dir, tmp_path):
        out = tmp_path / "e.csv"
        code = main(["perturb", "--labels", str(label_dir), "--kind", "dilate",
                     "--grid", "14", "--out", str(out), "--seed", "0"])
        assert code == 0
        assert ",15," in out.read_text().splitlines()[1].replace("dilate,", ",", 1)

    def test_invalid_kind_exit_1(self, label_dir):
        assert main(["perturb", "--labels", str(label_dir), "--kind", "melt"]) == 1

    def test_save_perturbed(self, label_dir, tmp_path):
        saved = tmp_path / "saved"
        code = main(["perturb", "--labels", str(label_dir), "--kind", "shift",
                     "--grid", "2", "--out", str(tmp_path / "x.csv"),
                     "--save-perturbed", str(saved), "--seed", "0"])
        assert code == 0
        files = list(saved.rglob("*.png"))
        assert len(files) == 3


class TestEvaluate:
    def test_identical_dirs_score_one(self, tmp_path, gen, capsys):
        root = tmp_path / "labels"
        for i in range(3):
            dataio.save_label(make_random_label(gen, 16, 16, 4), root / f"s{i}.png")
        code = main(["evaluate", "--ref", str(root), "--pred", str(root)])
        assert code == 0
        mean_line = capsys.readouterr().out.strip().splitlines()[-1].split()
        assert mean_line == ["mean", "1.000000"]

    def test_hand_counted_quarter(self, tmp_path, capsys):
        ref = np.zeros((4, 4), dtype=np.uint8)
        ref[:, 2:] = 1
        pred = np.zeros((4, 4), dtype=np.uint8)
        from nsegment.types import LabelMap

        dataio.save_label(LabelMap(ref, 2), tmp_path / "ref" / "a.png")
        dataio.save_label(LabelMap(pred, 2), tmp_path / "pred" / "a.png")
        csv_path = tmp_path / "table.csv"
        code = main(["evaluate", "--ref", str(tmp_path / "ref"),
                     "--pred", str(tmp_path / "pred"), "--classes", "2",
                     "--csv", str(csv_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert out.strip().splitlines()[-1].split() == ["mean", "0.250000"]
        assert "mean,0.250000" in csv_path.read_text()

    def test_mismatched_dims_exit_1(self, tmp_path, gen):
        dataio.save_label(make_random_label(gen, 8, 8), tmp_path / "ref" / "a.png")
        dataio.save_label(make_random_label(gen, 9, 8), tmp_path / "pred" / "a.png")
        code = main(["evaluate", "--ref", str(tmp_path / "ref"),
                     "--pred", str(tmp_path / "pred")])
        assert code == 1

    def test_no_overlap_exit_2(self, tmp_path, gen):
        dataio.save_label(make_random_label(gen, 8, 8), tmp_path / "ref" / "a.png")
        dataio.save_label(make_random_label(gen, 8, 8), tmp_path / "pred" / "b.png")
        code = main(["evaluate", "--ref", str(tmp_path / "ref"),
                     "--pred", str(tmp_path / "pred")])
        assert code == 2


class TestInspect:
    def test_p_zero_disagreement_black(self, tmp_path, gen):
        labels = tmp_path / "labels"
        for i in range(2):
            dataio.save_label(make_random_label(gen, 16, 16, 4), labels / f"s{i}.png")
        out = tmp_path / "panels"
        code = main(["inspect", "--labels", str(labels), "--out", str(out),
                     "--p", "0", "--seed", "1"])
        assert code == 0
        panel = dataio.load_image(out / "s0.png")
        assert panel.shape == (16, 16 * 3 + 4, 3)
        disagreement = panel[:, -16:, :]
        assert not disagreement.any()

    def test_deterministic_bytes(self, tmp_path, gen):
        labels = tmp_path / "labels"
        dataio.save_label(make_random_label(gen, 16, 16, 4), labels / "s.png")
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert main(["inspect", "--labels", str(labels), "--out", str(out),
                         "--seed", "9"]) == 0
        assert (a / "s.png").read_bytes() == (b / "s.png").read_bytes()

    def test_suppressed_class_region_agrees(self, tmp_path):
        from nsegment.pipeline import augment_sample, sample_stream
        from nsegment.types import AugmentConfig, LabelMap, floor_half

        data = np.zeros((64, 64), dtype=np.uint8)
        data[24:34, 24:34] = 1  # area 100 <= theta, inside a big class 0
        lab = LabelMap(data, num_classes=2)
        labels = tmp_path / "labels"
        dataio.save_label(lab, labels / "s.png")
        out = tmp_path / "panels"
        assert main(["inspect", "--labels", str(labels), "--out", str(out),
                     "--p", "1", "--seed", "21"]) == 0
        outcome = augment_sample(None, lab, AugmentConfig(p=1.0, seed=21),
                                 sample_stream(21, 0, 0))
        assert outcome.suppressed_classes == (1,)
        eps = floor_half(outcome.params_used.alpha)
        panel = dataio.load_image(out / "s.png")
        disagreement = panel[:, -64:, :]
        lo = max(24 - eps, 0)
        hi = min(33 + eps, 63)
        assert not disagreement[lo : hi + 1, lo : hi + 1].any()


class TestParser:
    def test_unknown_flag_exit_1(self):
        assert main(["augment", "--bogus"]) == 1

    def test_no_command_exit_1(self):
        assert main([]) == 1

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["--version"])
        assert info.value.code == 0
