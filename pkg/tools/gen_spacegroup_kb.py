"""Generate the static space-group knowledge base shipped with crysgram.

Writes src/crysgram/grammar/data/spacegroups.tsv (one line per group,
12 tab-separated fields) plus a SHA-256 manifest. All fields derive from
the full Hermann-Mauguin symbol in the standard setting (monoclinic
unique axis b cell choice 1, rhombohedral groups on hexagonal axes):

    centering            first letter of the symbol
    directional symbols  remaining components, padded to 3 with "."
    point group          screw axes -> rotations, glides -> m, then the
                         canonical symbol of the resulting crystal class
    laue class           point group plus inversion (11 classes)
    symmetry/polarity    membership of the point group in the 11
                         centrosymmetric / 10 polar classes
    order                |point group| x centering multiplicity
                         (= multiplicity of the general position)

Run from the repository root:  python tools/gen_spacegroup_kb.py
"""

import hashlib
import pathlib

# Full Hermann-Mauguin symbols for the 230 space groups, standard setting,
# components space-separated, overbars written as leading minus signs.
FULL_SYMBOLS = """\
P 1 | P -1 | P 1 2 1 | P 1 21 1 | C 1 2 1 | P 1 m 1 | P 1 c 1 | C 1 m 1 | C 1 c 1 | P 1 2/m 1
P 1 21/m 1 | C 1 2/m 1 | P 1 2/c 1 | P 1 21/c 1 | C 1 2/c 1 | P 2 2 2 | P 2 2 21 | P 21 21 2 | P 21 21 21 | C 2 2 21
C 2 2 2 | F 2 2 2 | I 2 2 2 | I 21 21 21 | P m m 2 | P m c 21 | P c c 2 | P m a 2 | P c a 21 | P n c 2
P m n 21 | P b a 2 | P n a 21 | P n n 2 | C m m 2 | C m c 21 | C c c 2 | A m m 2 | A b m 2 | A m a 2
A b a 2 | F m m 2 | F d d 2 | I m m 2 | I b a 2 | I m a 2 | P 2/m 2/m 2/m | P 2/n 2/n 2/n | P 2/c 2/c 2/m | P 2/b 2/a 2/n
P 21/m 2/m 2/a | P 2/n 21/n 2/a | P 2/m 2/n 21/a | P 21/c 2/c 2/a | P 21/b 21/a 2/m | P 21/c 21/c 2/n | P 2/b 21/c 21/m | P 21/n 21/n 2/m | P 21/m 21/m 2/n | P 21/b 2/c 21/n
P 21/b 21/c 21/a | P 21/n 21/m 21/a | C 2/m 2/c 21/m | C 2/m 2/c 21/a | C 2/m 2/m 2/m | C 2/c 2/c 2/m | C 2/m 2/m 2/a | C 2/c 2/c 2/a | F 2/m 2/m 2/m | F 2/d 2/d 2/d
I 2/m 2/m 2/m | I 2/b 2/a 2/m | I 2/b 2/c 2/a | I 2/m 2/m 2/a | P 4 | P 41 | P 42 | P 43 | I 4 | I 41
P -4 | I -4 | P 4/m | P 42/m | P 4/n | P 42/n | I 4/m | I 41/a | P 4 2 2 | P 4 21 2
P 41 2 2 | P 41 21 2 | P 42 2 2 | P 42 21 2 | P 43 2 2 | P 43 21 2 | I 4 2 2 | I 41 2 2 | P 4 m m | P 4 b m
P 42 c m | P 42 n m | P 4 c c | P 4 n c | P 42 m c | P 42 b c | I 4 m m | I 4 c m | I 41 m d | I 41 c d
P -4 2 m | P -4 2 c | P -4 21 m | P -4 21 c | P -4 m 2 | P -4 c 2 | P -4 b 2 | P -4 n 2 | I -4 m 2 | I -4 c 2
I -4 2 m | I -4 2 d | P 4/m 2/m 2/m | P 4/m 2/c 2/c | P 4/n 2/b 2/m | P 4/n 2/n 2/c | P 4/m 21/b 2/m | P 4/m 21/n 2/c | P 4/n 21/m 2/m | P 4/n 21/c 2/c
P 42/m 2/m 2/c | P 42/m 2/c 2/m | P 42/n 2/b 2/c | P 42/n 2/n 2/m | P 42/m 21/b 2/c | P 42/m 21/n 2/m | P 42/n 21/m 2/c | P 42/n 21/c 2/m | I 4/m 2/m 2/m | I 4/m 2/c 2/m
I 41/a 2/m 2/d | I 41/a 2/c 2/d | P 3 | P 31 | P 32 | R 3 | P -3 | R -3 | P 3 1 2 | P 3 2 1
P 31 1 2 | P 31 2 1 | P 32 1 2 | P 32 2 1 | R 3 2 | P 3 m 1 | P 3 1 m | P 3 c 1 | P 3 1 c | R 3 m
R 3 c | P -3 1 2/m | P -3 1 2/c | P -3 2/m 1 | P -3 2/c 1 | R -3 2/m | R -3 2/c | P 6 | P 61 | P 65
P 62 | P 64 | P 63 | P -6 | P 6/m | P 63/m | P 6 2 2 | P 61 2 2 | P 65 2 2 | P 62 2 2
P 64 2 2 | P 63 2 2 | P 6 m m | P 6 c c | P 63 c m | P 63 m c | P -6 m 2 | P -6 c 2 | P -6 2 m | P -6 2 c
P 6/m 2/m 2/m | P 6/m 2/c 2/c | P 63/m 2/c 2/m | P 63/m 2/m 2/c | P 2 3 | F 2 3 | I 2 3 | P 21 3 | I 21 3 | P 2/m -3
P 2/n -3 | F 2/m -3 | F 2/d -3 | I 2/m -3 | P 21/a -3 | I 21/a -3 | P 4 3 2 | P 42 3 2 | F 4 3 2 | F 41 3 2
I 4 3 2 | P 43 3 2 | P 41 3 2 | I 41 3 2 | P -4 3 m | F -4 3 m | I -4 3 m | P -4 3 n | F -4 3 c | I -4 3 d
P 4/m -3 2/m | P 4/n -3 2/n | P 42/m -3 2/n | P 42/n -3 2/m | F 4/m -3 2/m | F 4/m -3 2/c | F 41/d -3 2/m | F 41/d -3 2/c | I 4/m -3 2/m | I 41/a -3 2/d
"""

SCREWS = {"21": "2", "31": "3", "32": "3", "41": "4", "42": "4", "43": "4",
          "61": "6", "62": "6", "63": "6", "64": "6", "65": "6"}
GLIDES = set("abcdne")

# reduced directional components -> canonical symbol of the crystal class
CLASS_OF = {
    "1": "1", "-1": "-1",
    "1|2|1": "2", "1|m|1": "m", "1|2/m|1": "2/m",
    "2|2|2": "222", "m|m|2": "mm2", "2/m|2/m|2/m": "mmm",
    "4": "4", "-4": "-4", "4/m": "4/m",
    "4|2|2": "422", "4|m|m": "4mm",
    "-4|2|m": "-42m", "-4|m|2": "-42m",
    "4/m|2/m|2/m": "4/mmm",
    "3": "3", "-3": "-3",
    "3|1|2": "32", "3|2|1": "32", "3|2": "32",
    "3|m|1": "3m", "3|1|m": "3m", "3|m": "3m",
    "-3|1|2/m": "-3m", "-3|2/m|1": "-3m", "-3|2/m": "-3m",
    "6": "6", "-6": "-6", "6/m": "6/m",
    "6|2|2": "622", "6|m|m": "6mm",
    "-6|m|2": "-6m2", "-6|2|m": "-6m2",
    "6/m|2/m|2/m": "6/mmm",
    "2|3": "23", "2/m|-3": "m-3",
    "4|3|2": "432", "-4|3|m": "-43m",
    "4/m|-3|2/m": "m-3m",
}

CLASS_ORDER = {
    "1": 1, "-1": 2, "2": 2, "m": 2, "2/m": 4,
    "222": 4, "mm2": 4, "mmm": 8,
    "4": 4, "-4": 4, "4/m": 8, "422": 8, "4mm": 8, "-42m": 8, "4/mmm": 16,
    "3": 3, "-3": 6, "32": 6, "3m": 6, "-3m": 12,
    "6": 6, "-6": 6, "6/m": 12, "622": 12, "6mm": 12, "-6m2": 12, "6/mmm": 24,
    "23": 12, "m-3": 24, "432": 24, "-43m": 24, "m-3m": 48,
}

LAUE_OF = {
    "1": "-1", "-1": "-1",
    "2": "2/m", "m": "2/m", "2/m": "2/m",
    "222": "mmm", "mm2": "mmm", "mmm": "mmm",
    "4": "4/m", "-4": "4/m", "4/m": "4/m",
    "422": "4/mmm", "4mm": "4/mmm", "-42m": "4/mmm", "4/mmm": "4/mmm",
    "3": "-3", "-3": "-3",
    "32": "-3m", "3m": "-3m", "-3m": "-3m",
    "6": "6/m", "-6": "6/m", "6/m": "6/m",
    "622": "6/mmm", "6mm": "6/mmm", "-6m2": "6/mmm", "6/mmm": "6/mmm",
    "23": "m-3", "m-3": "m-3",
    "432": "m-3m", "-43m": "m-3m", "m-3m": "m-3m",
}

CENTROSYMMETRIC = {"-1", "2/m", "mmm", "4/m", "4/mmm", "-3", "-3m",
                   "6/m", "6/mmm", "m-3", "m-3m"}
POLAR = {"1", "2", "m", "mm2", "4", "4mm", "3", "3m", "6", "6mm"}

SYSTEM_OF_CLASS = {
    "1": "triclinic", "-1": "triclinic",
    "2": "monoclinic", "m": "monoclinic", "2/m": "monoclinic",
    "222": "orthorhombic", "mm2": "orthorhombic", "mmm": "orthorhombic",
    "4": "tetragonal", "-4": "tetragonal", "4/m": "tetragonal",
    "422": "tetragonal", "4mm": "tetragonal", "-42m": "tetragonal",
    "4/mmm": "tetragonal",
    "3": "trigonal", "-3": "trigonal", "32": "trigonal", "3m": "trigonal",
    "-3m": "trigonal",
    "6": "hexagonal", "-6": "hexagonal", "6/m": "hexagonal",
    "622": "hexagonal", "6mm": "hexagonal", "-6m2": "hexagonal",
    "6/mmm": "hexagonal",
    "23": "cubic", "m-3": "cubic", "432": "cubic", "-43m": "cubic",
    "m-3m": "cubic",
}

CENTERING_MULT = {"P": 1, "A": 2, "B": 2, "C": 2, "I": 2, "F": 4, "R": 3}

SYSTEM_RANGES = [
    (1, 2, "triclinic"), (3, 15, "monoclinic"), (16, 74, "orthorhombic"),
    (75, 142, "tetragonal"), (143, 167, "trigonal"),
    (168, 194, "hexagonal"), (195, 230, "cubic"),
]


def reduce_component(comp):
    """Collapse screw axes and glide planes to their point-group element."""
    if "/" in comp:
        rot, mirror = comp.split("/")
        assert mirror in GLIDES or mirror == "m", comp
        return SCREWS.get(rot, rot) + "/m"
    if comp in SCREWS:
        return SCREWS[comp]
    if comp in GLIDES:
        return "m"
    return comp


def system_of_number(number):
    for lo, hi, name in SYSTEM_RANGES:
        if lo <= number <= hi:
            return name
    raise ValueError(number)


def short_symbol(centering, parts, system):
    """Collapse a full symbol to its short Hermann-Mauguin form."""
    def mirror_part(comp):
        return comp.split("/")[1] if "/" in comp else comp

    if system == "triclinic":
        keep = parts
    elif system == "monoclinic":
        keep = [p for p in parts if p != "1"]
    elif system in ("orthorhombic", "cubic"):
        keep = [mirror_part(p) for p in parts]
    else:  # tetragonal, trigonal, hexagonal keep the primary axis in full
        keep = [parts[0]] + [mirror_part(p) for p in parts[1:]]
    return centering + "".join(keep)


def build_records():
    symbols = [s.strip() for s in FULL_SYMBOLS.replace("\n", " | ").split("|")
               if s.strip()]
    assert len(symbols) == 230, len(symbols)
    records = []
    for number, full in enumerate(symbols, start=1):
        tokens = full.split()
        centering, parts = tokens[0], tokens[1:]
        assert centering in CENTERING_MULT, full
        assert 1 <= len(parts) <= 3, full
        reduced = [reduce_component(p) for p in parts]
        point_group = CLASS_OF["|".join(reduced)]
        system = system_of_number(number)
        assert SYSTEM_OF_CLASS[point_group] == system, (number, full, point_group)
        order = CLASS_ORDER[point_group] * CENTERING_MULT[centering]
        laue = LAUE_OF[point_group]
        symmetry = ("Centrosymmetric" if point_group in CENTROSYMMETRIC
                    else "Non-centrosymmetric")
        polarity = "polar" if point_group in POLAR else "non-polar"
        directional = parts + ["."] * (3 - len(parts))
        records.append({
            "number": number,
            "full_symbol": full,
            "short_symbol": short_symbol(centering, parts, system),
            "order": order,
            "point_group": point_group,
            "crystal_system": system,
            "laue_class": laue,
            "symmetry": symmetry,
            "polarity": polarity,
            "centering": centering,
            "directional": directional,
        })
    return records


def cross_check(records):
    # published aggregate counts
    assert sum(r["symmetry"] == "Centrosymmetric" for r in records) == 92
    assert sum(r["polarity"] == "polar" for r in records) == 68
    by_system = {}
    for r in records:
        by_system[r["crystal_system"]] = by_system.get(r["crystal_system"], 0) + 1
    assert by_system == {"triclinic": 2, "monoclinic": 13, "orthorhombic": 59,
                         "tetragonal": 68, "trigonal": 25, "hexagonal": 27,
                         "cubic": 36}, by_system
    assert len({r["point_group"] for r in records}) == 32
    assert len({r["laue_class"] for r in records}) == 11

    spot = {
        1: ("P 1", 1, "1", "triclinic"),
        2: ("P -1", 2, "-1", "triclinic"),
        14: ("P 1 21/c 1", 4, "2/m", "monoclinic"),
        25: ("P m m 2", 4, "mm2", "orthorhombic"),
        62: ("P 21/n 21/m 21/a", 8, "mmm", "orthorhombic"),
        139: ("I 4/m 2/m 2/m", 32, "4/mmm", "tetragonal"),
        146: ("R 3", 9, "3", "trigonal"),
        166: ("R -3 2/m", 36, "-3m", "trigonal"),
        168: ("P 6", 6, "6", "hexagonal"),
        194: ("P 63/m 2/m 2/c", 24, "6/mmm", "hexagonal"),
        225: ("F 4/m -3 2/m", 192, "m-3m", "cubic"),
        227: ("F 41/d -3 2/m", 192, "m-3m", "cubic"),
        230: ("I 41/a -3 2/d", 96, "m-3m", "cubic"),
    }
    for num, (full, order, pg, system) in spot.items():
        r = records[num - 1]
        assert r["full_symbol"] == full, (num, r["full_symbol"])
        assert r["order"] == order, (num, r["order"])
        assert r["point_group"] == pg
        assert r["crystal_system"] == system
    assert records[224]["laue_class"] == "m-3m"
    assert records[224]["symmetry"] == "Centrosymmetric"
    assert records[224]["polarity"] == "non-polar"
    assert records[224]["directional"] == ["4/m", "-3", "2/m"]


def check_against_examples(records):
    """Verify derived short symbols against independent tables in examples/."""
    import re

    root = pathlib.Path(__file__).resolve().parents[1] / "examples"
    hexrd = root / "space_group_symmetry_tables_hermann_mauguin_symb" / \
        "r002__HEXRD__hexrd__symbols.py"
    if hexrd.exists():
        text = hexrd.read_text()
        start = text.index("pstr_spacegroup = [")
        end = text.index("]", start)
        quoted = re.findall(r'"([^"]+)"', text[start:end])
        # the table carries 7 extra rhombohedral-setting entries at the end
        assert len(quoted) >= 230, len(quoted)
        mismatches = []
        for r, hex_sym in zip(records, quoted[:230]):
            mine, theirs = r["short_symbol"].replace(" ", ""), hex_sym.replace(" ", "")
            if r["number"] >= 195:
                # HEXRD writes cubic groups in pre-1983 style (m3m, no overbar)
                mine = mine.replace("-3", "3")
            if mine != theirs:
                mismatches.append((r["number"], r["short_symbol"], hex_sym.strip()))
        if mismatches:
            for m in mismatches:
                print("short-symbol mismatch:", m)
            raise SystemExit(1)
        print("short symbols match HEXRD table (230/230)")

    pyxtal = root / "space_group_symmetry_tables_hermann_mauguin_symb" / \
        "r001__MaterSim__PyXtal__hall.py"
    if pyxtal.exists():
        # default monoclinic settings (":b" / ":b1") carry the full symbol
        checked = 0
        for line in pyxtal.read_text().splitlines():
            m = re.match(r"\s*(\d+):(b1|b)\s+(.+?)\s\s+\S", line + "  .")
            if m:
                num = int(m.group(1))
                sym = " ".join(m.group(3).split())
                r = records[num - 1]
                if 3 <= num <= 15:
                    assert r["full_symbol"] == sym, (num, r["full_symbol"], sym)
                    checked += 1
        print(f"monoclinic full symbols match PyXtal defaults ({checked} checked)")


def main():
    records = build_records()
    cross_check(records)
    check_against_examples(records)

    out_dir = pathlib.Path(__file__).resolve().parents[1] / "src" / "crysgram" / \
        "grammar" / "data"
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [
        "# crysgram space-group knowledge base, format version 1",
        "# standard settings: monoclinic unique axis b cell choice 1;"
        " rhombohedral groups on hexagonal axes",
        "# columns: full_symbol\tnumber\torder\tpoint_group\tcrystal_system"
        "\tlaue_class\tsymmetry\tpolarity\tcentering\tdir0\tdir1\tdir2",
        "# '.' marks an empty directional slot",
    ]
    for r in records:
        lines.append("\t".join([
            r["full_symbol"], str(r["number"]), str(r["order"]),
            r["point_group"], r["crystal_system"], r["laue_class"],
            r["symmetry"], r["polarity"], r["centering"], *r["directional"],
        ]))
    payload = ("\n".join(lines) + "\n").encode("utf-8")
    kb_path = out_dir / "spacegroups.tsv"
    kb_path.write_bytes(payload)
    digest = hashlib.sha256(payload).hexdigest()
    (out_dir / "spacegroups.sha256").write_text(digest + "\n")
    print(f"wrote {kb_path} ({len(records)} records, sha256 {digest[:16]}...)")


if __name__ == "__main__":
    main()
