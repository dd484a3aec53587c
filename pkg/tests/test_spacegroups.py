"""Knowledge-base fidelity and Hermann-Mauguin grammar tests."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from crysgram.errors import InvalidSpaceGroupError, SymbolGrammarError
from crysgram.grammar import (
    EMPTY_SLOT,
    CrystalSystem,
    Polarity,
    Symmetry,
    all_space_groups,
    crystal_system_of,
    lattice_constraints,
    lookup_space_group,
    split_hm_symbol,
)

SYSTEM_RANGES = [
    (1, 2, CrystalSystem.TRICLINIC),
    (3, 15, CrystalSystem.MONOCLINIC),
    (16, 74, CrystalSystem.ORTHORHOMBIC),
    (75, 142, CrystalSystem.TETRAGONAL),
    (143, 167, CrystalSystem.TRIGONAL),
    (168, 194, CrystalSystem.HEXAGONAL),
    (195, 230, CrystalSystem.CUBIC),
]


def expected_system(number):
    for lo, hi, system in SYSTEM_RANGES:
        if lo <= number <= hi:
            return system
    raise AssertionError(number)


class TestLookup:
    def test_fm3m_record(self):
        # canonical cubic example: rock-salt structure group
        rec = lookup_space_group(225)
        assert rec.full_symbol == "F 4/m -3 2/m"
        assert rec.short_symbol == "Fm-3m"
        assert rec.order == 192
        assert rec.point_group == "m-3m"
        assert rec.crystal_system is CrystalSystem.CUBIC
        assert rec.laue_class == "m-3m"
        assert rec.symmetry is Symmetry.CENTROSYMMETRIC
        assert rec.polarity is Polarity.NON_POLAR
        assert rec.centering == "F"
        assert rec.directional_symbols == ("4/m", "-3", "2/m")

    def test_fm3m_token_strings(self):
        assert lookup_space_group(225).token_strings() == (
            "F4/m-32/m", "225", "192", "m-3m", "cubic", "m-3m",
            "Centrosymmetric", "non-polar", "F", "4/m", "-3", "2/m")

    def test_group_one(self):
        rec = lookup_space_group(1)
        assert rec.crystal_system is CrystalSystem.TRICLINIC
        assert rec.centering == "P"
        assert rec.order == 1
        assert rec.polarity is Polarity.POLAR

    @pytest.mark.parametrize("bad", [0, 231, -5, 10**6])
    def test_out_of_range(self, bad):
        with pytest.raises(InvalidSpaceGroupError):
            lookup_space_group(bad)

    def test_non_integer(self):
        with pytest.raises(InvalidSpaceGroupError):
            lookup_space_group("225")

    def test_lookup_is_pure(self):
        assert lookup_space_group(14) is lookup_space_group(14)


class TestKnowledgeBaseInvariants:
    def test_exactly_230_records(self):
        records = all_space_groups()
        assert len(records) == 230
        assert [r.number for r in records] == list(range(1, 231))

    def test_centering_is_first_symbol_letter(self):
        for rec in all_space_groups():
            assert rec.centering == rec.full_symbol[0]

    def test_crystal_system_ranges(self):
        for rec in all_space_groups():
            assert rec.crystal_system is expected_system(rec.number)

    def test_centrosymmetric_implies_non_polar(self):
        for rec in all_space_groups():
            if rec.symmetry is Symmetry.CENTROSYMMETRIC:
                assert rec.polarity is Polarity.NON_POLAR

    def test_split_matches_stored_fields(self):
        for rec in all_space_groups():
            assert split_hm_symbol(rec.full_symbol) == (
                rec.centering, rec.directional_symbols)

    def test_concatenation_reproduces_symbol(self):
        for rec in all_space_groups():
            joined = rec.centering + "".join(
                p for p in rec.directional_symbols if p != EMPTY_SLOT)
            assert joined == rec.full_symbol.replace(" ", "")

    def test_point_group_census(self):
        # 32 crystal classes, 11 Laue classes over the 230 groups
        records = all_space_groups()
        assert len({r.point_group for r in records}) == 32
        assert len({r.laue_class for r in records}) == 11
        assert sum(r.symmetry is Symmetry.CENTROSYMMETRIC for r in records) == 92
        assert sum(r.polarity is Polarity.POLAR for r in records) == 68

    def test_orders_factor_through_centering(self):
        mult = {"P": 1, "A": 2, "B": 2, "C": 2, "I": 2, "F": 4, "R": 3}
        for rec in all_space_groups():
            assert rec.order % mult[rec.centering] == 0


class TestCrystalSystemOf:
    @pytest.mark.parametrize("number,system", [
        (225, CrystalSystem.CUBIC),
        (1, CrystalSystem.TRICLINIC),
        (168, CrystalSystem.HEXAGONAL),
        (14, CrystalSystem.MONOCLINIC),
        (146, CrystalSystem.TRIGONAL),
    ])
    def test_examples(self, number, system):
        assert crystal_system_of(number) is system

    @given(st.integers(min_value=1, max_value=230))
    def test_matches_record(self, number):
        assert crystal_system_of(number) is lookup_space_group(number).crystal_system

    def test_out_of_range(self):
        with pytest.raises(InvalidSpaceGroupError):
            crystal_system_of(231)


class TestSplitSymbol:
    def test_full_cubic(self):
        assert split_hm_symbol("F 4/m -3 2/m") == ("F", ("4/m", "-3", "2/m"))

    def test_minimal(self):
        assert split_hm_symbol("P1") == ("P", ("1", EMPTY_SLOT, EMPTY_SLOT))

    def test_pmm2(self):
        # hand-split; matches the stored record for group 25
        assert split_hm_symbol("Pmm2") == ("P", ("m", "m", "2"))
        assert split_hm_symbol("Pmm2") == (
            lookup_space_group(25).centering,
            lookup_space_group(25).directional_symbols)

    def test_short_symbols_resolve_via_kb(self):
        assert split_hm_symbol("Fm-3m") == ("F", ("4/m", "-3", "2/m"))
        assert split_hm_symbol("P432") == ("P", ("4", "3", "2"))
        assert split_hm_symbol("P21/c") == ("P", ("1", "21/c", "1"))

    def test_screw_axes_unspaced(self):
        assert split_hm_symbol("P212121")[1] == ("21", "21", "21")

    @pytest.mark.parametrize("bad", ["", "  ", "Q23", "P4/q", "Pmmmm", "P1!"])
    def test_grammar_errors(self, bad):
        with pytest.raises(SymbolGrammarError):
            split_hm_symbol(bad)

    def test_error_names_offender(self):
        with pytest.raises(SymbolGrammarError, match="'!'"):
            split_hm_symbol("P1!")


class TestLatticeConstraints:
    def test_hexagonal(self):
        c = lattice_constraints(CrystalSystem.HEXAGONAL)
        assert c.length_classes == (("a", "b"),)
        assert c.fixed_angles == {"alpha": 90.0, "beta": 90.0, "gamma": 120.0}

    def test_cubic(self):
        c = lattice_constraints(CrystalSystem.CUBIC)
        assert c.length_classes == (("a", "b", "c"),)
        assert c.fixed_angles == {"alpha": 90.0, "beta": 90.0, "gamma": 90.0}

    def test_triclinic_unconstrained(self):
        c = lattice_constraints(CrystalSystem.TRICLINIC)
        assert c.length_classes == ()
        assert c.fixed_angles == {}
        assert c.free_lengths() == ("a", "b", "c")
        assert c.free_angles() == ("alpha", "beta", "gamma")

    def test_violation_reporting(self):
        c = lattice_constraints(CrystalSystem.CUBIC)
        assert c.violations((4.0, 4.0, 4.0), (90.0, 90.0, 90.0)) == []
        problems = c.violations((4.0, 4.2, 4.0), (90.0, 90.0, 92.0))
        assert len(problems) == 2

    def test_accepts_names(self):
        assert lattice_constraints("cubic").length_classes == (("a", "b", "c"),)
