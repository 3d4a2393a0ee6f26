import pytest

from spectral_rates.config import (
    DEFAULT_EPS_CONST,
    ExperimentConfig,
    load_config,
    parse_config_text,
    with_overrides,
)
from spectral_rates.errors import ConfigurationError


def test_defaults():
    cfg = ExperimentConfig()
    assert cfg.study == "spectral"
    assert cfg.n_list == (1000, 2000, 4000)
    assert cfg.epsilon_constant == DEFAULT_EPS_CONST["torus2"]
    assert ExperimentConfig(manifold="sphere2").epsilon_constant == 2.0
    assert ExperimentConfig(eps_const=0.7).epsilon_constant == 0.7


def test_parse_config_text():
    text = """
    # acceptance run
    study = poisson
    n_list = 4000, 8000   # sizes
    eps_list = 0.2,0.25,0.32
    eps_const = default
    trials = 5
    """
    values = parse_config_text(text)
    assert values == {
        "study": "poisson",
        "n_list": (4000, 8000),
        "eps_list": (0.2, 0.25, 0.32),
        "eps_const": None,
        "trials": 5,
    }


@pytest.mark.parametrize(
    "text",
    ["study poisson", "colour = blue", "trials = many", "n_list = 1000, x"],
)
def test_parse_config_text_errors(text):
    with pytest.raises(ConfigurationError):
        parse_config_text(text)


def test_load_config_layers(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("study = extension\ntrials = 4\nseed = 11\n", encoding="utf-8")
    cfg = load_config(path, trials=2, kernel=None)
    assert cfg.study == "extension"
    assert cfg.trials == 2
    assert cfg.seed == 11
    assert cfg.kernel == "tent"

    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "missing.cfg")
    with pytest.raises(ConfigurationError):
        load_config(path, colour="blue")


def test_run_id_ignores_runtime_fields():
    cfg = ExperimentConfig(seed=3)
    same = with_overrides(cfg, out_dir="elsewhere", workers=4, log_level="DEBUG")
    assert same.run_id == cfg.run_id
    assert len(cfg.run_id) == 12
    assert with_overrides(cfg, seed=4).run_id != cfg.run_id
    # the resolved constant is what counts
    assert with_overrides(cfg, eps_const=0.5).run_id == cfg.run_id


def test_with_overrides_skips_none():
    cfg = ExperimentConfig()
    assert with_overrides(cfg, trials=None, l=3) == ExperimentConfig(l=3)


def test_echo_is_plain():
    echo = ExperimentConfig(n_list=(10, 20, 40)).echo()
    assert echo["n_list"] == [10, 20, 40]
    assert echo["eps_const"] == 0.5


@pytest.mark.parametrize(
    "changes",
    [
        {"study": "fourier"},
        {"manifold": "klein2"},
        {"kernel": "gaussian"},
        {"n_list": ()},
        {"n_list": (1000, 1000, 2000)},
        {"n_list": (2000, 1000)},
        {"trials": 0},
        {"l": 0},
        {"workers": 0},
        {"eps_const": -1.0},
        {"levels": ()},
        {"levels": (0, 1)},
        {"epsilon": 0.6},
        {"study": "poisson", "eps_list": (0.2, 0.5)},
        {"manifold": "sphere2", "n_list": (300, 1000)},
        {"manifold": "sphere2", "eps_const": 3.0},
    ],
)
def test_validation(changes):
    with pytest.raises(ConfigurationError):
        ExperimentConfig(**changes)


def test_length_scale_checks_follow_the_study():
    # 2 (ln 500 / 500)^(1/6) ≈ 0.96 is still a valid chordal scale
    assert ExperimentConfig(manifold="sphere2", n_list=(500, 1000)).n_list == (500, 1000)
    # studies without a sample graph do not use the scale
    ExperimentConfig(study="plugin", manifold="torus1", n_list=(50,), eps_const=5.0)
    ExperimentConfig(study="lowerbound", manifold="torus1", eps_const=5.0)
    pinned = ExperimentConfig(study="hminus1", epsilon=0.25, eps_const=5.0, n_list=(2000,))
    assert pinned.echo()["epsilon"] == 0.25
    assert pinned.run_id != with_overrides(pinned, epsilon=0.3).run_id
    assert parse_config_text("epsilon = 0.25\nlevels = 1, 2")["levels"] == (1, 2)
