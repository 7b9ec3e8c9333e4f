import json
import os

import numpy as np
import pytest

from reviewfuse.bundle import save_bundle
from reviewfuse.cli import main
from reviewfuse.image_encoder import ImageEncoderConfig
from reviewfuse.model import ReviewClassifier
from reviewfuse.text_encoder import TextEncoderConfig
from reviewfuse.training import model_to_bundle


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli_corpus")
    assert main(["gen-data", "--out", str(d), "--n", "60", "--seed", "3"]) == 0
    return d


@pytest.fixture(scope="module")
def trained(tmp_path_factory, corpus_dir):
    d = tmp_path_factory.mktemp("cli_model")
    model_path = str(d / "m.fkit")
    code = main(["train", "--data", str(corpus_dir), "--out", model_path,
                 "--mode", "fused", "--max-epochs", "2", "--patience", "1",
                 "--seed", "1"])
    assert code == 0
    return model_path


class TestGenData:
    def test_balanced_counts_printed(self, capsys, tmp_path):
        code, out, _ = run(capsys, "gen-data", "--out", str(tmp_path / "d"),
                           "--n", "40", "--seed", "7")
        assert code == 0
        assert "fake=12, genuine=12" in out  # 40 * 0.6 = 24 train

    def test_rerun_byte_identical(self, tmp_path):
        for sub in ("a", "b"):
            assert main(["gen-data", "--out", str(tmp_path / sub),
                         "--n", "30", "--seed", "5"]) == 0
        assert (tmp_path / "a" / "train.csv").read_bytes() == \
               (tmp_path / "b" / "train.csv").read_bytes()

    def test_missing_out_is_usage_error(self, capsys):
        code, _, err = run(capsys, "gen-data", "--n", "10")
        assert code == 1
        assert "--out" in err

    def test_config_file_precedence(self, capsys, tmp_path):
        cfg = tmp_path / "gen.json"
        cfg.write_text(json.dumps({"out": str(tmp_path / "d"), "n": 24,
                                   "seed": 2}))
        # flag overrides the file's n
        code, out, _ = run(capsys, "gen-data", "--config", str(cfg),
                           "--n", "12")
        assert code == 0
        assert "train: 8 samples" in out  # round(12 * 0.7) per class sums to 8

    def test_unknown_config_key_rejected(self, capsys, tmp_path):
        cfg = tmp_path / "gen.json"
        cfg.write_text(json.dumps({"out": str(tmp_path / "d"), "bogus": 1}))
        code, _, err = run(capsys, "gen-data", "--config", str(cfg))
        assert code == 1
        assert "bogus" in err


class TestTrain:
    def test_writes_bundle_and_report(self, trained):
        assert os.path.isfile(trained)
        report = json.loads(open(trained + ".report.json").read())
        assert len(report["train_losses"]) >= 1
        assert report["best_epoch"] >= 1

    def test_determinism_identical_outputs(self, tmp_path, corpus_dir):
        outs = []
        for sub in ("a", "b"):
            p = str(tmp_path / f"{sub}.fkit")
            assert main(["train", "--data", str(corpus_dir), "--out", p,
                         "--mode", "text_only", "--max-epochs", "2",
                         "--patience", "1", "--seed", "4"]) == 0
            outs.append(p)
        assert open(outs[0], "rb").read() == open(outs[1], "rb").read()
        assert open(outs[0] + ".report.json").read() == \
               open(outs[1] + ".report.json").read()

    def test_missing_data_dir(self, capsys, tmp_path):
        code, _, err = run(capsys, "train", "--data", str(tmp_path / "nope"),
                           "--out", str(tmp_path / "m.fkit"))
        assert code == 2

    def test_bad_lr_is_usage_error(self, capsys, corpus_dir, tmp_path):
        code, _, _ = run(capsys, "train", "--data", str(corpus_dir),
                         "--out", str(tmp_path / "m.fkit"), "--lr", "-1")
        assert code == 1


class TestEval:
    def test_json_report(self, capsys, corpus_dir, trained):
        code, out, _ = run(capsys, "eval", "--data", str(corpus_dir),
                           "--model", trained, "--format", "json")
        assert code == 0
        payload = json.loads(out[:out.rindex("]") + 1])
        assert payload[0]["split"] == "test"
        assert "pred_genuine" in out

    def test_val_split(self, capsys, corpus_dir, trained):
        code, out, _ = run(capsys, "eval", "--data", str(corpus_dir),
                           "--model", trained, "--split", "val",
                           "--format", "csv")
        assert code == 0
        assert out.startswith("model,accuracy")

    def test_requires_model_or_compare(self, capsys, corpus_dir):
        code, _, err = run(capsys, "eval", "--data", str(corpus_dir))
        assert code == 1 and "--model" in err

    def test_corrupt_model_file(self, capsys, corpus_dir, tmp_path):
        bad = tmp_path / "bad.fkit"
        bad.write_bytes(b"JUNKJUNKJUNK")
        code, _, err = run(capsys, "eval", "--data", str(corpus_dir),
                           "--model", str(bad))
        assert code == 2 and "magic" in err


class TestPredict:
    def _zero_model_path(self, tmp_path, mode="fused"):
        text_cfg = TextEncoderConfig(vocab_size=10, d_model=8, n_layers=1,
                                     n_heads=2, d_ff=16, max_len=8)
        image_cfg = ImageEncoderConfig(input_side=8, stem_channels=4,
                                       stages=[(1, 4, 1), (1, 8, 2)], d_out=8)
        model = ReviewClassifier(mode, text_cfg, image_cfg, d_hidden=8,
                                 dropout_p=0.0, seed=0)
        for t in model.params.values():
            t.data[:] = 0.0
        path = str(tmp_path / "zero.fkit")
        save_bundle(model_to_bundle(model, {
            "vocab_tokens": ["alpha", "beta", "gamma", "delta", "epsilon",
                             "zeta"],
            "preprocess": {"max_len": 8, "crop_side": 8},
        }), path)
        return path

    def _ppm(self, tmp_path):
        from reviewfuse.imageproc import RawImage, save_ppm
        p = str(tmp_path / "img.ppm")
        save_ppm(RawImage(9, 9, np.full((9, 9, 3), 120, dtype=np.uint8)), p)
        return p

    def test_zero_weights_tie_goes_to_fake(self, capsys, tmp_path):
        model = self._zero_model_path(tmp_path)
        code, out, _ = run(capsys, "predict", "--model", model,
                           "--text", "alpha beta", "--image",
                           self._ppm(tmp_path))
        assert code == 0
        assert "label: fake" in out
        assert "p_fake: 0.5000" in out and "p_genuine: 0.5000" in out

    def test_text_only_does_not_need_image(self, capsys, tmp_path):
        model = self._zero_model_path(tmp_path, mode="text_only")
        code, out, _ = run(capsys, "predict", "--model", model,
                           "--text", "gamma delta")
        assert code == 0 and "label: fake" in out

    def test_missing_required_image_is_usage(self, capsys, tmp_path):
        model = self._zero_model_path(tmp_path)
        code, _, err = run(capsys, "predict", "--model", model,
                           "--text", "alpha")
        assert code == 1 and "--image" in err

    def test_probabilities_sum_to_one(self, capsys, corpus_dir, trained,
                                      tmp_path):
        img = str(corpus_dir / "images" / "s000000.ppm")
        code, out, _ = run(capsys, "predict", "--model", trained,
                           "--text", "absolutely amazing best ever",
                           "--image", img)
        assert code == 0
        pf = float(out.split("p_fake: ")[1].split()[0])
        pg = float(out.split("p_genuine: ")[1].split()[0])
        assert abs(pf + pg - 1.0) <= 0.0001

    def test_unreadable_image(self, capsys, tmp_path):
        model = self._zero_model_path(tmp_path)
        code, _, _ = run(capsys, "predict", "--model", model,
                         "--text", "alpha", "--image",
                         str(tmp_path / "missing.ppm"))
        assert code == 2


class TestGradcheckCommand:
    def test_default_passes(self, capsys):
        code, out, _ = run(capsys, "gradcheck")
        assert code == 0
        assert "gradcheck passed" in out
        assert out.count("PASS") == 9

    def test_corrupt_hook_fails(self, capsys):
        code, out, _ = run(capsys, "gradcheck", "--corrupt")
        assert code == 3
        assert "full_model_f32" in out.split("FAILED")[1]


class TestUsage:
    def test_no_command_prints_help(self, capsys):
        code, out, _ = run(capsys)
        assert code == 1
        assert "gen-data" in out

    def test_unknown_flag_fatal(self, capsys):
        code, _, err = run(capsys, "gradcheck", "--wat")
        assert code == 1

    def test_help_lists_flags(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["train", "--help"])
        assert e.value.code == 0
        out = capsys.readouterr().out
        for flag in ("--data", "--out", "--mode", "--lr", "--patience"):
            assert flag in out
