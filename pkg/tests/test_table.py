import numpy as np
import pytest

from helpers import DATA, table1, table2
from paradoxcube.errors import EmptyTable, IndexOutOfRange, MissingColumn, NonBinaryLabel, RaggedRow
from paradoxcube.lattice import parse_population, root
from paradoxcube.table import WILDCARD, BaseTable, hash_ids, load_csv, write_csv


def test_table1_shape():
    t = table1()
    assert (t.n_attrs, t.m_labels, t.n_records) == (3, 1, 7)
    assert t.attr_names == ("A", "B", "C")
    assert t.cardinalities == (2, 2, 2)


def test_single_row_csv(tmp_path):
    p = tmp_path / "one.csv"
    p.write_text("A,B,Y\nx,y,1\n")
    t = load_csv(p, ["Y"])
    assert t.n_records == 1
    assert all(d.cardinality == 1 for d in t.dicts)


def test_three_valued_label_rejected(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("A,Y\nx,A\ny,B\nz,C\n")
    with pytest.raises(NonBinaryLabel):
        load_csv(p, ["Y"])
    with pytest.raises(NonBinaryLabel):
        load_csv(p, ["Y"], positive_values={"Y": "A"})


def test_two_valued_label_needs_positive_value(tmp_path):
    p = tmp_path / "yn.csv"
    p.write_text("A,income\nx,<=50K\ny,>50K\n")
    with pytest.raises(NonBinaryLabel):
        load_csv(p, ["income"])
    t = load_csv(p, ["income"], positive_values={"income": ">50K"})
    assert t.label_data[:, 0].tolist() == [0, 1]


def test_boolean_tokens(tmp_path):
    p = tmp_path / "b.csv"
    p.write_text("A,Y\nx,Yes\ny,FALSE\nz,true\nw,0\n")
    assert load_csv(p, ["Y"]).label_data[:, 0].tolist() == [1, 0, 1, 0]


@pytest.mark.parametrize(
    "content, exc",
    [("", EmptyTable), ("A,Y\n", EmptyTable), ("A,Y\nx,1,2\n", RaggedRow)],
)
def test_malformed_files(tmp_path, content, exc):
    p = tmp_path / "f.csv"
    p.write_text(content)
    with pytest.raises(exc):
        load_csv(p, ["Y"])


def test_missing_label_column():
    with pytest.raises(MissingColumn):
        load_csv(DATA / "table1.csv", ["Z"])


def test_drop_missing_and_ignore(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("A,B,N,Y\nx,?,1,1\nx,b,2,0\ny,b,3,1\n")
    t = load_csv(p, ["Y"], drop_missing=["?"], ignore_columns=["N"])
    assert t.attr_names == ("A", "B")
    assert t.n_records == 2


def test_record_matches_examples():
    t = table1()
    assert t.record_matches(0, parse_population(t, "(a1,b1,*)"))
    assert t.record_matches(3, root(3))
    assert not t.record_matches(3, parse_population(t, "(a1,*,*)"))
    with pytest.raises(IndexOutOfRange):
        t.record_matches(7, root(3))


def test_first_appearance_ids_and_round_trip(tmp_path):
    t = table2()
    assert t.dicts[1].values == ("b1", "b2")
    for i in range(t.n_records):
        cats, labels = t.decode_record(i)
        assert [t.dicts[a].encode(v) for a, v in enumerate(cats)] == t.cat_data[i].tolist()
    out = tmp_path / "rt.csv"
    write_csv(t, out)
    again = load_csv(out, ["Y1", "Y2"])
    assert again.checksum() == t.checksum()
    assert [d.values for d in again.dicts] == [d.values for d in t.dicts]


def test_compressed_view_matches_records():
    t = table2()
    c = t.compressed
    assert c.counts.sum() == t.n_records
    for r, row in enumerate(c.rows):
        ids = np.flatnonzero((t.cat_data == row).all(axis=1))
        assert c.counts[r] == ids.size
        assert c.hashes[r] == hash_ids(ids)
        assert c.min_record[r] == ids.min()
        assert c.positives[r].tolist() == t.label_data[ids].sum(axis=0).tolist()


def test_hash_is_order_independent():
    assert hash_ids([3, 1, 2]) == hash_ids([1, 2, 3])
    assert hash_ids([1, 2]) != hash_ids([1, 3])


def test_from_codes_names_values():
    t = BaseTable.from_codes(np.array([[0, 1], [1, 0]]), np.array([[1], [0]]), [2, 2])
    assert t.dicts[0].values == ("a1", "a2")
    assert t.dicts[1].decode(1) == "b2"
    assert WILDCARD == -1
