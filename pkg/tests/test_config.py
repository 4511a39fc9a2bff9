import pytest

from fracgap.config import SCHEMA, ConfigError, RunConfig, defaults, dump, load, parse_text, validate


def test_defaults_are_the_benchmark():
    cfg = defaults()
    assert cfg.s == 0.25 and cfg.box == [[-4.0, 4.0]] and cfg.g == "sign(x)"
    assert cfg.eps_list == [2.0**-k for k in range(4, 12)]
    validate(cfg)


def test_every_schema_key_is_a_field():
    names = set(RunConfig.__dataclass_fields__)
    assert {k.name for k in SCHEMA} == names


def test_parse_text_values_and_comments():
    cfg = parse_text(
        """
        [problem]
        s = 0.1   ; inline comment
        box = (-2, 2)
        R = 2
        [sweep]
        eps_list = 2**-3, 2**-4, 2**-5
        [construct]
        b = auto
        theta = 0.05
        """
    )
    assert cfg.s == 0.1
    assert cfg.box == [[-2.0, 2.0]]
    assert cfg.eps_list == [0.125, 0.0625, 0.03125]
    assert cfg.b is None and cfg.theta == 0.05


def test_unknown_key_lists_valid_keys():
    with pytest.raises(ConfigError, match="unknown key 'sigma'.*valid keys: \\[problem\\] s, n"):
        parse_text("[problem]\nsigma = 1\n")


def test_unknown_section_rejected():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_text("[solver]\ns = 1\n")


def test_override_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_text("", overrides={"nope": "1"})


def test_overrides_win_over_file(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[problem]\ns = 0.1\n")
    assert load(path, {"s": "0.3"}).s == 0.3


@pytest.mark.parametrize(
    "text, match",
    [
        ("[problem]\ns = 0.6\n", "s must lie"),
        ("[problem]\ns = 0\n", "s must lie"),
        ("[problem]\nn = 3\n", "n must be"),
        ("[problem]\nn = 2\n", "axes"),
        ("[sweep]\neps_list = 2**-5, 2**-4\n", "decreasing"),
        ("[construct]\ncase = middle\n", "case"),
        ("[construct]\nc = 0.3\n", "c must lie"),
        ("[construct]\nb = 2.5\n", "b must lie"),
        ("[grid]\nh_ratio = 4\n", "h_ratio"),
        ("[grid]\nbase_h = 0.3\n", "multiple of base_h"),
        ("[problem]\nomega = blob(1)\n", "unknown name 'blob'"),
        ("[sweep]\nworkers = 0\n", "workers"),
    ],
)
def test_validation_gates(text, match):
    with pytest.raises(ConfigError, match=match):
        validate(parse_text(text))


def test_bad_number_reports_key():
    with pytest.raises(ConfigError, match="\\[problem\\] s"):
        parse_text("[problem]\ns = abc\n")


def test_dump_round_trip():
    cfg = parse_text("[problem]\ns = 0.1\n[construct]\nb = 1.5\ntie_near = auto\n[output]\nplots = false\n")
    again = parse_text(dump(cfg))
    assert again == cfg


def test_shipped_configs_validate():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    files = sorted(root.glob("*.ini"))
    assert len(files) >= 3
    for f in files:
        validate(load(f))
