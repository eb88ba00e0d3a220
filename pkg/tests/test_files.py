import glob
import os

import pytest

from qforge import files
from qforge.errors import ParseError
from qforge.qcsp import EqAtom, RelAtom

SAMPLES = os.path.join(os.path.dirname(__file__), "..", "samples")


def sample_paths(suffix):
    found = sorted(glob.glob(os.path.join(SAMPLES, f"*{suffix}")))
    assert found, f"no bundled samples with suffix {suffix}"
    return found


class TestRoundTrips:
    @pytest.mark.parametrize("path", sample_paths(".alg"))
    def test_algebra_files(self, path):
        text = open(path, encoding="utf-8").read()
        assert files.serialize_algebra(files.parse_algebra(text)) == text

    @pytest.mark.parametrize("path", sample_paths(".struct"))
    def test_structure_files(self, path):
        text = open(path, encoding="utf-8").read()
        assert files.serialize_structure(files.parse_structure(text)) == text

    @pytest.mark.parametrize("path", sample_paths(".sentence"))
    def test_sentence_files(self, path):
        text = open(path, encoding="utf-8").read()
        assert files.serialize_sentence(files.parse_sentence(text)) == text

    @pytest.mark.parametrize("path", sample_paths(".nae"))
    def test_nae_files(self, path):
        text = open(path, encoding="utf-8").read()
        assert files.serialize_nae(files.parse_nae(text)) == text

    @pytest.mark.parametrize("path", sample_paths(".pi2"))
    def test_pi2_files(self, path):
        text = open(path, encoding="utf-8").read()
        assert files.serialize_pi2_nae(files.parse_pi2_nae(text)) == text

    def test_json_mirrors(self):
        alg = files.load_algebra(os.path.join(SAMPLES, "switchable.alg"))
        assert files.algebra_from_json(files.algebra_to_json(alg)).ops.keys() == alg.ops.keys()
        st = files.load_structure(os.path.join(SAMPLES, "pair.struct"))
        back = files.structure_from_json(files.structure_to_json(st))
        assert back.constants == st.constants
        for name, rel in st.relations.items():
            assert back.relation(name).same_tuples(rel)
        phi = files.load_sentence(os.path.join(SAMPLES, "holds.sentence"))
        assert files.sentence_from_json(files.sentence_to_json(phi)) == phi


class TestValidation:
    def test_table_entry_out_of_range(self):
        with pytest.raises(ParseError):
            files.parse_algebra("domain 2\nop f 1\ntable: 0 2\n")

    def test_table_length_mismatch(self):
        with pytest.raises(ParseError):
            files.parse_algebra("domain 2\nop f 1\ntable: 0\n")

    def test_tuple_arity_mismatch(self):
        with pytest.raises(ParseError) as err:
            files.parse_structure("domain 3\nrel q 2 tuples 011\n")
        assert "arity" in str(err.value)

    def test_tuple_element_out_of_range(self):
        with pytest.raises(ParseError):
            files.parse_structure("domain 2\nrel q 2 tuples 02\n")

    def test_error_reports_line(self):
        with pytest.raises(ParseError) as err:
            files.parse_structure("domain 3\nrel q 2 tuples 00\nwheee\n")
        assert err.value.line == 3

    def test_missing_domain(self):
        with pytest.raises(ParseError):
            files.parse_algebra("op f 1\ntable: 0 1\n")

    def test_duplicate_names(self):
        with pytest.raises(ParseError):
            files.parse_algebra("domain 2\nop f 1\ntable: 0 1\nop f 1\ntable: 0 1\n")

    def test_bad_quantifier_line(self):
        with pytest.raises(ParseError):
            files.parse_sentence("forsome x\nmatrix: x=0\n")

    def test_matrix_required(self):
        with pytest.raises(ParseError):
            files.parse_sentence("forall x\n")


class TestFormatDetails:
    def test_comments_and_blank_lines(self):
        alg = files.parse_algebra("# header\n\ndomain 2\nop f 1  # trailing\ntable: 0 1\n")
        assert alg.ops["f"].table == (0, 1)

    def test_multiline_table(self):
        alg = files.parse_algebra("domain 2\nop f 2\ntable: 0 1\n1 0\n")
        assert alg.ops["f"].table == (0, 1, 1, 0)

    def test_arity_zero_tuple_token(self):
        st = files.parse_structure("domain 3\nrel one 0 tuples -\nrel none 0 tuples\n")
        assert st.relation("one").tuples() == {()}
        assert st.relation("none").tuples() == frozenset()
        assert files.parse_structure(files.serialize_structure(st)).relation("one").tuples() == {()}

    def test_structure_kinds(self, d3):
        text = (
            "domain 3\n"
            "rel a 2 tuples 00 12\n"
            "rel b 2 dnf (x0=0&x1=0)|(x0=1&x1=2)\n"
            "rel c 2 qf x0=0&x1=0|x0=1&x1=2\n"
            "const z 2\n"
        )
        st = files.parse_structure(text)
        assert st.relation("a").same_tuples(st.relation("b"))
        assert st.relation("b").same_tuples(st.relation("c"))
        assert st.constants == {"z": 2}

    def test_sentence_atoms(self):
        phi = files.parse_sentence(
            "forall x\nexists y\nmatrix: edge(x,y) & x=y & y=0\n"
        )
        assert phi.prefix == (("forall", "x"), ("exists", "y"))
        assert phi.atoms == (
            RelAtom("edge", ("x", "y")),
            EqAtom("x", "y"),
            EqAtom("y", 0),
        )

    def test_nae_extra_variable(self):
        inst = files.parse_nae("var w\nnae x y z\n")
        assert inst.variables == ("w", "x", "y", "z")
        assert files.parse_nae(files.serialize_nae(inst)) == inst
