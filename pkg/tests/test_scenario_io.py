"""Scenario documents: parse, format, round-trip, and validation."""

import numpy as np
import pytest

from crackdyn import (CrackSchedule, Tensor4Field, format_scenario,
                      parse_scenario, scenario_equal, validate_scenario)

from conftest import bar_scenario, growing_scenario

FULL_2D = """\
# full two-dimensional document
[domain]
dim = 2
x = 0 1
y = 0 1
h = 0.125
dirichlet = left right

[crack]
path = (0,0.5) (0.75,0.5)
schedule = linear 0.25 0.15

[material]
elastic = isotropic 2 1
viscous = isotropic 0.5 0.25

[data]
f_x = sin(2*pi*x)*cos(t)
f_y = 0.5*cos(pi*x)*sin(t)
u0_x = 0.1*sin(pi*x)*sin(pi*y)
uD_x = 0
uD_y = 0

[time]
T = 1
dt = 0.01
"""

MINIMAL = """\
[domain]
dim = 2

[time]
T = 0.5
dt = 0.01
"""


class TestParse:
    def test_full_document(self):
        config, issues = parse_scenario(FULL_2D)
        assert issues == []
        assert config.dim == 2
        assert config.h == 0.125
        assert config.domain.dirichlet == ("left", "right")
        assert config.crack_points == ((0.0, 0.5), (0.75, 0.5))
        assert config.schedule.tip(1.0) == pytest.approx(0.4)
        np.testing.assert_array_equal(
            config.elastic.matrix, Tensor4Field.isotropic(2, 2, 1).matrix)
        assert config.f_exprs[1](x=0.0, y=0.0, t=np.pi / 2) \
            == pytest.approx(0.5)
        assert config.u0_exprs[1] is None
        assert config.n_steps == 100

    def test_defaults_from_minimal_document(self):
        config, issues = parse_scenario(MINIMAL)
        assert issues == []
        assert config.crack_points is None and config.schedule is None
        assert config.h == 0.125
        assert config.subintervals == "auto"
        assert config.h15_policy == "warn"
        assert config.horizons == (0.25, 0.5, 1.0, 2.0)
        assert config.sequence_n == (1, 2, 4, 8)
        assert config.seed == 1234
        assert config.f_exprs is None and config.F_exprs is None

    def test_1d_document_with_break_and_table_schedule(self):
        text = """\
[domain]
dim = 1
x = 0 1
h = 0.1
dirichlet = left right

[crack]
break = 0.5
schedule = table (0,0) (0.5,1)

[material]
elastic = identity 2
viscous = matrix 0.5

[data]
f_x = x*cos(t)
F_xx = 0.1*t

[time]
T = 0.5
dt = 0.01
"""
        config, issues = parse_scenario(text)
        assert issues == []
        assert config.dim == 1
        assert config.crack_points == (0.5,)
        assert config.schedule.kind == "table"
        assert config.schedule.tip(0.25) == pytest.approx(0.5)
        assert config.elastic.matrix[0, 0] == 2.0
        assert config.F_exprs[0][0](t=2.0) == pytest.approx(0.2)

    def test_tensor_spellings(self):
        base = MINIMAL + "\n[material]\nelastic = {}\nviscous = identity\n"
        for spelling, want in (
                ("isotropic 2 1", Tensor4Field.isotropic(2, 2, 1)),
                ("identity 3", Tensor4Field.identity(2).scaled(3.0)),
                ("matrix 2 0 0; 0 2 0; 0 0 2",
                 Tensor4Field.identity(2).scaled(2.0))):
            config, issues = parse_scenario(base.format(spelling))
            assert issues == [], (spelling, issues)
            np.testing.assert_allclose(config.elastic.matrix, want.matrix)


class TestParseErrors:
    def collect(self, text):
        config, issues = parse_scenario(text)
        assert config is None
        return {(i.line, i.message) for i in issues}, issues

    def test_every_problem_is_reported_with_its_line(self):
        text = """\
[domain]
dim = 3
h = -1

[time]
T = 1
dt = 0.3
word salad
[nope]
q = 1
"""
        got, issues = self.collect(text)
        lines = sorted(i.line for i in issues)
        assert lines == [2, 3, 7, 8, 9, 10]
        by_line = {i.line: i.message for i in issues}
        assert "dim must be 1 or 2" in by_line[2]
        assert "h must be positive" in by_line[3]
        assert "integer multiple" in by_line[7]
        assert "key = value" in by_line[8]
        assert "unknown section" in by_line[9]
        assert "outside any section" in by_line[10]

    def test_duplicates_and_unknown_keys(self):
        text = """\
[domain]
dim = 2
dim = 1
color = red

[domain]

[time]
T = 1
dt = 0.1
"""
        got, issues = self.collect(text)
        by_line = {i.line: i.message for i in issues}
        assert "duplicate key" in by_line[3]
        assert "unknown key" in by_line[4]
        assert "duplicate section" in by_line[6]

    def test_missing_required_sections(self):
        config, issues = parse_scenario("[material]\nelastic = identity\n")
        assert config is None
        msgs = {i.message for i in issues}
        assert any("[domain]" in m for m in msgs)
        assert any("[time]" in m for m in msgs)
        assert all(i.line == 0 for i in issues)

    def test_dim_gated_keys(self):
        text_1d = """\
[domain]
dim = 1

[data]
f_y = 1

[time]
T = 1
dt = 0.1
"""
        _, issues = self.collect(text_1d)
        assert any("not allowed for dim = 1" in i.message and i.line == 5
                   for i in issues)
        text_2d = """\
[domain]
dim = 2

[crack]
break = 0.5
schedule = linear 0.5 0

[time]
T = 1
dt = 0.1
"""
        _, issues = self.collect(text_2d)
        assert any("not allowed for dim = 2" in i.message for i in issues)
        assert any("needs a path" in i.message for i in issues)

    def test_expression_error_carries_position(self):
        text = MINIMAL + "\n[data]\nf_x = 1 + * 2\n"
        _, issues = self.collect(text)
        bad = [i for i in issues if "f_x" in i.message]
        assert len(bad) == 1
        assert bad[0].line == text.splitlines().index("f_x = 1 + * 2") + 1
        assert "column" in bad[0].message

    def test_malformed_values(self):
        cases = [
            ("[crack]\npath = (0,0.5\nschedule = linear 0.5 0\n",
             "unclosed"),
            ("[crack]\npath = (0,0.5) (0.75,0.5)\nschedule = spline 1\n",
             "unknown schedule kind"),
            ("[material]\nelastic = isotropic 2\n", "isotropic tensor"),
            ("[solver]\nh15 = maybe\n", "allowed: warn, strict, off"),
            ("[experiment]\nhorizons = 0.5 0.25\n", "strictly increase"),
            ("[experiment]\nsequence = 0 1 2\n", "must be positive"),
            ("[solver]\nsubintervals = 0\n", "must be >= 1"),
            ("[domain\n", "malformed section header"),
        ]
        for snippet, needle in cases:
            _, issues = self.collect(MINIMAL + "\n" + snippet)
            assert any(needle in i.message for i in issues), (snippet,
                                                              issues)

    def test_crack_without_schedule_never_opens(self):
        text = MINIMAL + "\n[crack]\npath = (0,0.5) (0.75,0.5)\n"
        config, issues = parse_scenario(text)
        assert issues == []
        assert config.crack_points is not None
        assert config.schedule is None


class TestRoundTrip:
    @pytest.mark.parametrize("factory", [growing_scenario, bar_scenario])
    def test_parse_inverts_format(self, factory):
        config = factory()
        text = format_scenario(config)
        parsed, issues = parse_scenario(text)
        assert issues == []
        assert scenario_equal(parsed, config)

    def test_format_is_idempotent(self):
        config, _ = parse_scenario(FULL_2D)
        once = format_scenario(config)
        twice = format_scenario(parse_scenario(once)[0])
        assert once == twice

    def test_table_schedule_round_trips(self):
        config = growing_scenario(
            schedule=CrackSchedule.from_table([(0.0, 0.25), (0.5, 0.3),
                                               (1.0, 0.4)]))
        parsed, issues = parse_scenario(format_scenario(config))
        assert issues == []
        assert scenario_equal(parsed, config)

    def test_equality_is_sensitive(self):
        config = growing_scenario()
        assert scenario_equal(config, config.with_changes(name="other"))
        assert not scenario_equal(config, config.with_changes(seed=99))
        assert not scenario_equal(config, config.with_changes(
            f_exprs=("sin(2*pi*x)", "0")))
        assert not scenario_equal(config, config.with_changes(
            elastic=Tensor4Field.isotropic(2, 2.0, 1.01)))


class TestValidate:
    def test_default_scenario_is_clean(self):
        rep = validate_scenario(growing_scenario())
        assert rep.ok, rep.issues
        codes = {i.code for i in rep.issues}
        assert "tensor-ok" in codes
        assert "korn" in codes
        assert "crack-speed" in codes

    def test_speed_violation_follows_policy(self):
        fast = growing_scenario(schedule=CrackSchedule.linear(0.25, 0.5))
        warn = validate_scenario(fast)
        assert warn.ok
        assert any(i.code == "crack-speed" and i.level == "warning"
                   for i in warn.issues)
        strict = validate_scenario(fast.with_changes(h15_policy="strict"))
        assert not strict.ok
        off = validate_scenario(fast.with_changes(h15_policy="off"))
        assert off.ok
        assert not any(i.code == "crack-speed" and i.level != "info"
                       for i in off.issues)

    def test_noncoercive_tensor_is_an_error(self):
        bad = growing_scenario(
            viscous=Tensor4Field.isotropic(2, -1.0, -0.5))
        rep = validate_scenario(bad)
        assert not rep.ok
        assert any(i.code == "tensor-coercivity" for i in rep.issues)

    def test_asymmetric_tensor_is_an_error(self):
        mat = np.eye(3)
        mat[0, 1] = 0.5          # symmetric as a matrix is required too
        rep = validate_scenario(growing_scenario(
            elastic=Tensor4Field(mat, 2)))
        assert not rep.ok
        assert any(i.code == "tensor-symmetry" for i in rep.issues)

    def test_boundary_data_without_dirichlet_edges(self):
        from crackdyn import Domain2D
        config = growing_scenario(domain=Domain2D(dirichlet=()),
                                  uD_exprs=("0.1*t", "0"))
        rep = validate_scenario(config)
        assert any(i.code == "dirichlet-data" for i in rep.issues)

    def test_schedule_beyond_path_end(self):
        config = growing_scenario(
            schedule=CrackSchedule.linear(0.25, 0.6))
        rep = validate_scenario(config)
        assert any(i.code == "schedule-range" for i in rep.issues)
