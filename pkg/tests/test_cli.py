import json

import numpy as np
import pytest

from choquet.cli import ConfigError, emit_svg_scatter, load_config, main, svg_transform
from choquet.measures import EmpiricalMeasure, to_csv


def run(tmp_path, *args):
    out = tmp_path / "out"
    code = main([*args, "--out", str(out)])
    result = json.loads((out / "result.json").read_text()) if (out / "result.json").exists() else None
    return code, result, out


def test_oracle_check_defaults(tmp_path, capsys):
    code, result, out = run(tmp_path, "oracle-check")
    assert code == 0
    assert result["scalars"]["vdc"] == pytest.approx(0.6, abs=1e-3)
    assert result["scalars"]["d_ct"] == pytest.approx(1.2, abs=2e-3)
    assert (out / "log.csv").exists()
    assert json.loads(capsys.readouterr().out)["vdc"] == pytest.approx(0.6, abs=1e-3)


def test_oracle_check_same_mean(tmp_path):
    code, result, _ = run(tmp_path, "oracle-check", "--set", "case=\"same_mean\"", "--set", "a=0.5")
    assert code == 0
    assert result["scalars"]["vdc"] == pytest.approx(0.1875, abs=1e-4)
    assert result["scalars"]["degenerate"] is False


def test_unknown_subcommand_exits_1(tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        main(["frobnicate", "--out", str(tmp_path)])
    assert e.value.code == 1


def test_missing_required_keys_named(tmp_path, capsys):
    code, _, _ = run(tmp_path, "vdc")
    assert code == 1
    err = capsys.readouterr().err
    assert "plus" in err and "minus" in err


def test_unknown_key_and_bad_value(tmp_path, capsys):
    assert run(tmp_path, "oracle-check", "--set", "bogus=1")[0] == 1
    assert "bogus" in capsys.readouterr().err
    assert run(tmp_path, "oracle-check", "--set", "case=\"cubic\"")[0] == 1
    assert run(tmp_path, "oracle-check", "--set", "a=-1")[0] == 1
    assert run(tmp_path, "oracle-check", "--set", "noequals")[0] == 1


def test_config_file_and_seed_override(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"a": 0.2}))
    cfg = load_config("oracle-check", path, ["C=2.0"], 7)
    assert cfg["a"] == 0.2 and cfg["C"] == 2.0 and cfg["seed"] == 7
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config("oracle-check", path, [], None)
    with pytest.raises(ConfigError):
        load_config("oracle-check", tmp_path / "missing.json", [], None)


def test_runtime_error_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("1.0\nnot-a-number\n")
    good = tmp_path / "good.csv"
    good.write_text("0.0\n")
    code, _, _ = run(tmp_path, "vdc", "--set", f"plus=\"{bad}\"", "--set", f"minus=\"{good}\"")
    assert code == 2
    assert "run failed" in capsys.readouterr().err


def test_vdc_subcommand_with_exact_value(tmp_path):
    to_csv(np.array([[-1.0], [1.0]]), tmp_path / "spread.csv")
    to_csv(np.array([[0.0]]), tmp_path / "center.csv")
    code, result, out = run(tmp_path, "vdc", "--set", f"plus=\"{tmp_path / 'center.csv'}\"",
                            "--set", f"minus=\"{tmp_path / 'spread.csv'}\"", "--set", "steps=300")
    assert code == 0
    s = result["scalars"]
    assert s["vdc_exact"] == pytest.approx(1.0, abs=1e-12)
    assert s["vdc"] >= 0.9
    assert (out / "log.csv").read_text().startswith("step,objective,regularizer")


def test_portfolio_small_run(tmp_path):
    code, result, out = run(tmp_path, "portfolio", "--set", "steps=20", "--set", "batch=32",
                            "--set", "hidden=4", "--seed", "3")
    assert code == 0 and result["seed"] == 3
    assert 1.0 <= result["scalars"]["z_final"] <= 2.0
    assert (out / "critic.json").exists() and (out / "log.csv").exists()


def test_svg_two_point_transform():
    apply = svg_transform(np.array([[0.0, 0.0], [1.0, 1.0]]))
    np.testing.assert_allclose(apply(np.array([[0.0, 0.0], [1.0, 1.0]])),
                               [[600 * 0.05 / 1.1, 600 - 600 * 0.05 / 1.1],
                                [600 * 1.05 / 1.1, 600 - 600 * 1.05 / 1.1]])


def test_svg_centering_and_degenerate_range():
    pts = np.array([[-2.0, 5.0], [2.0, -5.0]])
    np.testing.assert_allclose(svg_transform(pts)(np.array([[0.0, 0.0]])), [[300.0, 300.0]])
    single = np.array([[3.0, 4.0]])
    np.testing.assert_allclose(svg_transform(single)(single), [[300.0, 300.0]])


def test_svg_file_is_deterministic(tmp_path):
    a = EmpiricalMeasure.uniform(np.random.default_rng(0).normal(size=(20, 2)))
    b = EmpiricalMeasure.uniform(np.random.default_rng(1).normal(size=(10, 2)))
    emit_svg_scatter(a, b, tmp_path / "1.svg")
    emit_svg_scatter(a, b, tmp_path / "2.svg")
    text = (tmp_path / "1.svg").read_text()
    assert text == (tmp_path / "2.svg").read_text()
    assert text.count("<circle") == 30
    assert "#1f77b4" in text and "#d62728" in text
    with pytest.raises(ValueError):
        emit_svg_scatter(EmpiricalMeasure.uniform(np.zeros((2, 1))), None, tmp_path / "3.svg")


TINY_GAN = ["--set", "critic_hidden=4", "--set", "critic_depth=2", "--set", "critic_k=2",
            "--set", "batch=32", "--set", "eval_samples=64", "--set", "critic_epochs=1"]


@pytest.mark.parametrize("extra", [[], ["--set", "warm_start=false", "--set", "vdc_batch=null"]])
def test_dominance_gan_smoke(tmp_path, extra):
    code, result, out = run(tmp_path, "dominance-gan", "--set", "epochs=2", "--set", "baseline_epochs=1",
                            "--set", "vdc_batch=64", *TINY_GAN, *extra)
    assert code == 0
    assert result["scalars"]["vdc_vs_baseline"] >= -1e-9
    assert (out / "samples.svg").exists()


def test_ct_gan_smoke(tmp_path):
    code, result, _ = run(tmp_path, "ct-gan", "--set", "epochs=2", *TINY_GAN)
    assert code == 0
    assert result["scalars"]["ct_init"] >= -2e-9


def test_rates_rejects_bad_batch(tmp_path):
    code, _, _ = run(tmp_path, "rates", "--set", "batch=\"many\"")
    assert code == 1
