import pytest

from emq.sysfile import (
    Model, SysFileError, bundled_names, bundled_text, load_bundled,
    load_model, loads_model,
)

BASE = bundled_text("free_particle")


def _mutated(old, new, count=1):
    assert BASE.count(old) >= count
    return BASE.replace(old, new, count)


def _expect(text, fragment):
    with pytest.raises(SysFileError) as err:
        loads_model(text, name="t")
    assert fragment in str(err.value)
    return str(err.value)


# ---------------------------------------------------------------------------
# bundled models
# ---------------------------------------------------------------------------

def test_bundled_names_and_loading():
    assert bundled_names() == ("free_particle", "harmonic",
                               "free_particle_lambda")
    for name in bundled_names():
        m = load_bundled(name)
        assert isinstance(m, Model)
        assert m.name == name
        assert m.lattice is not None
        assert m.anomaly_F is not None
        assert {"m", "hbar"} <= set(m.params)


def test_bundled_feature_matrix(free_model, ho_model, lam_model):
    assert free_model.reference_A_z is not None
    assert free_model.sliced_refs is None
    assert free_model.lattice.mode == "real"

    assert ho_model.reference_A_z is None
    assert ho_model.sliced_refs is not None and len(ho_model.sliced_refs) == 3
    assert ho_model.lattice.mode == "imaginary"
    assert ho_model.lattice.duration == 1.0

    assert lam_model.params["lam"] == 0.25


def test_chi_is_pushed_to_the_source_chart(ho_model):
    chi = ho_model.constraint.chi
    assert chi is not None
    source = set(ho_model.system.space.xi) | set(ho_model.system.parameters)
    assert chi.free_symbols() <= source


def test_load_model_from_path(tmp_path):
    p = tmp_path / "copy.sys"
    p.write_text(BASE)
    m = load_model(str(p))
    assert m.name == "copy"
    assert m.path == str(p)


def test_unknown_bundled_name():
    with pytest.raises(KeyError):
        bundled_text("nope")


# ---------------------------------------------------------------------------
# structural errors, with file:line context
# ---------------------------------------------------------------------------

def test_duplicate_section():
    _expect(BASE + "\n[system]\n", "duplicate section [system]")


def test_content_before_any_section():
    msg = _expect("x = 1\n" + BASE, "content before any section")
    assert "<t>:1:" in msg


def test_missing_equals():
    _expect(_mutated("[charges]", "[charges]\njunk line"), "expected 'key = value'")


def test_unknown_section():
    _expect(BASE + "\n[mystery]\nk = 1\n", "unknown section [mystery]")


def test_missing_required_section():
    chopped = BASE.split("[rho]")[0]
    _expect(chopped, "missing required section")


def test_duplicate_key():
    _expect(_mutated("[system]", "[system]\nf_x = 7"), "duplicate key 'f_x'")


def test_missing_velocity():
    _expect(_mutated("f_y = x", "f_q = x"), "missing velocity f_y")


def test_stray_system_key():
    _expect(_mutated("[system]", "[system]\nwobble = 3"),
            "unknown [system] key 'wobble'")


def test_duplicate_charge():
    _expect(_mutated("[rho]", "C1 = x\n[rho]"), "duplicate charge 'C1'")


def test_rho_unknown_charge():
    _expect(_mutated("[rho]\nC1", "[rho]\nC9"), "unknown charge 'C9'")


def test_expression_errors_carry_position():
    msg = _expect(_mutated("f_x = -y", "f_x = -y +"), "<t>:")
    assert any(ch.isdigit() for ch in msg.split("<t>:")[1][:4])


def test_domain_requires_every_phase_variable():
    _expect(_mutated("p_y = -2.0, 2.0\n", "", 1), "missing a range for 'p_y'")


def test_domain_rejects_undeclared_symbols():
    _expect(_mutated("[lattice]", "w9 = 0.0, 1.0\n[lattice]"),
            "undeclared symbol 'w9'")


def test_domain_rejects_empty_range():
    _expect(_mutated("p_y = -2.0, 2.0", "p_y = 2.0, -2.0"), "empty range")


def test_guard_syntax():
    _expect(_mutated("[lattice]", "guard = x^2 within 0, 1\n[lattice]"),
            "guard needs")


def test_darboux_missing_gauge():
    _expect(_mutated("gauge = z : p_z\n", ""), "needs a gauge pair")


def test_darboux_missing_forward():
    _expect(_mutated("p_z = x*p_y - y*p_x - a1*(x^2 + y^2)\n", "", 1),
            "missing forward expression for 'p_z'")


def test_darboux_missing_inverse():
    _expect(_mutated("inv_p_y", "inv_p_q"), "missing inverse expression inv_p_y")


def test_darboux_pair_syntax():
    _expect(_mutated("reduced = zeta : p_zeta", "reduced = zeta p_zeta"),
            "expected '<coord> : <mom>'")


def test_constraint_missing_solution():
    _expect(_mutated("solution =", "solved ="), "[constraint] missing solution")


def test_constraint_bad_eliminate_target():
    _expect(_mutated("eliminate = p_x", "eliminate = bogus"),
            "not a phase-space variable")


def test_lattice_time_beta_conflict():
    _expect(_mutated("time = 1.0", "time = 1.0\nbeta = 2.0"),
            "both time and beta")


def test_lattice_unknown_key():
    _expect(_mutated("time = 1.0", "time = 1.0\nvolume = 2"),
            "unknown [lattice] key")


def test_lattice_missing_duration():
    _expect(_mutated("time = 1.0\n", ""), "[lattice] missing time")


def test_anomaly_stray_key():
    _expect(BASE + "\nextra_thing = 1\n", "unknown [anomaly] key")


def test_sliced_refs_are_all_or_nothing():
    partial = BASE + "\nsliced_constant = p_zeta^2\n"
    _expect(partial, "sliced reference data needs all of")
    full = (BASE + "\nsliced_constant = p_zeta^2\n"
            "sliced_delta_p = zeta\nsliced_delta_q = p_zeta\n")
    m = loads_model(full, name="t")
    assert m.sliced_refs is not None and len(m.sliced_refs) == 3
