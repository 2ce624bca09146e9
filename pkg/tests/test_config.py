import pytest
from hypothesis import given, strategies as st

from pdlab.config import ConfigError, config_hash, dump_config, parse_config, parse_overrides, with_overrides, with_seed
from pdlab.harness import ExperimentConfig

EXAMPLE = """
# ReLU pair, distinct initialization
data.truth = linear
model.arch = double
model.activation = relu
optim.lr = 0.05
stream.T = 2^16
stream.log2_z = 10   # 1024 batches per window
harness.pairs = 4
harness.init_mode = "distinct"
"""


def test_parse_example():
    cfg = parse_config(EXAMPLE)
    assert cfg.architecture.kind == "double"
    assert cfg.architecture.activation.kind == "relu"
    assert cfg.optimizer.lr == 0.05
    assert cfg.stream.total_examples == 65536
    assert cfg.stream.log2_z == 10
    assert cfg.pairs == 4 and cfg.init_mode == "distinct"


def test_defaults():
    assert parse_config("") == ExperimentConfig()


def test_int_expressions():
    assert parse_config("stream.T = 2**10").stream.total_examples == 1024
    assert parse_config("stream.T = 1_000").stream.total_examples == 1000


@pytest.mark.parametrize(
    "text,match",
    [
        ("foo.bar = 1", "unknown key"),
        ("model.arch", "expected 'key = value'"),
        ("stream.T = many", "stream.T"),
        ("model.activation = smelu", "model.beta: smelu requires beta"),
        ("model.arch = linear\nmodel.arch = double", "duplicate"),
        ("harness.pairs = 0", "harness"),
        ("harness.emulate = maybe", "harness.emulate"),
        ("model.arch = tower\nmodel.widths = 4,0", "model.arch"),
    ],
)
def test_errors_name_the_field(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_error_carries_line_number():
    with pytest.raises(ConfigError) as info:
        parse_config("model.arch = double\nfoo.bar = 1\n")
    assert info.value.line == 2 and info.value.field == "foo.bar"


configs = st.builds(
    lambda arch, act, beta, lr, kind, T, z, seed, pairs, mode, emulate: parse_config(
        f"model.arch = {arch}\nmodel.activation = {act}\n"
        + (f"model.beta = {beta}\n" if act in ("smelu", "swish") else "")
        + f"optim.kind = {kind}\noptim.lr = {lr}\nstream.T = {T}\nstream.log2_z = {z}\n"
        f"stream.master_seed = {seed}\nharness.pairs = {pairs}\nharness.init_mode = {mode}\n"
        f"harness.emulate = {emulate}\n"
    ),
    st.sampled_from(["linear", "single", "double", "tower", "quad_tower", "wide_embedding"]),
    st.sampled_from(["identity", "relu", "smelu", "swish"]),
    st.floats(0.01, 10),
    st.floats(1e-4, 1),
    st.sampled_from(["adagrad", "sgd"]),
    st.integers(1, 2**30),
    st.integers(0, 20),
    st.integers(0, 2**64 - 1),
    st.integers(1, 16),
    st.sampled_from(["identical", "distinct"]),
    st.booleans(),
)


@given(configs)
def test_dump_parse_roundtrip(cfg):
    assert parse_config(dump_config(cfg)) == cfg
    assert config_hash(parse_config(dump_config(cfg))) == config_hash(cfg)


def test_widths_roundtrip():
    cfg = parse_config("model.arch = quad_tower\nmodel.widths = [256, 128]\nmodel.activation = relu")
    assert cfg.architecture.widths == (256, 128)
    assert parse_config(dump_config(cfg)) == cfg


def test_hash_changes_with_content():
    assert config_hash(parse_config("optim.lr = 0.1")) != config_hash(parse_config("optim.lr = 0.2"))


def test_overrides():
    values = parse_overrides(["model.arch=double;model.activation=relu", "optim.lr = 0.5"])
    assert values == {"model.arch": "double", "model.activation": "relu", "optim.lr": 0.5}
    cfg = with_overrides(parse_config("model.arch = double\nmodel.activation = smelu\nmodel.beta = 2"), ["model.arch=single"])
    assert cfg.architecture.kind == "single" and cfg.architecture.activation.beta == 2.0
    assert with_overrides(cfg, None) is cfg


def test_activation_change_drops_stale_beta():
    base = parse_config("model.arch = double\nmodel.activation = smelu\nmodel.beta = 2")
    with pytest.raises(ConfigError):
        with_overrides(base, ["model.activation=swish"])
    assert with_overrides(base, ["model.activation=relu"]).architecture.activation.beta is None


def test_with_seed():
    cfg = with_seed(ExperimentConfig(), 42)
    assert cfg.master_seed == 42
    assert with_seed(cfg, None) is cfg
    with pytest.raises(ConfigError):
        with_seed(cfg, -1)
