import io
from datetime import date, datetime, timezone

import pytest

from shilldetect.records import (
    FeedbackRecord,
    LabelSet,
    ParseError,
    TransactionRecord,
    UserProfile,
    consistency_warnings,
    crc32_state,
    format_price,
    format_rfc3339,
    load_label_list,
    parse_feedback,
    parse_price_cents,
    parse_profiles,
    parse_rfc3339,
    parse_transactions,
    write_feedback,
    write_labels,
    write_profiles,
    write_transactions,
)

from oracles import crc32_reference


# ---------------------------------------------------------------------------
# scalars


def test_crc32_known_values():
    assert crc32_state("") == 0x00000000
    assert crc32_state("123456789") == 0xCBF43926
    assert crc32_state("default") == crc32_reference(b"default")


@pytest.mark.parametrize("text", ["", "a", "default", "California", "Züri"])
def test_crc32_matches_bitwise_reference(text):
    assert crc32_state(text) == crc32_reference(text.encode("utf-8"))


def test_parse_price_exact_cents():
    assert parse_price_cents("1.10") == 110
    assert parse_price_cents("0.07") == 7
    assert parse_price_cents("200") == 20000
    assert parse_price_cents("3.5") == 350
    # exact decimal arithmetic: no float rounding drift
    assert parse_price_cents("19.99") == 1999


@pytest.mark.parametrize("bad", ["-1.00", "1.234", "abc", ""])
def test_parse_price_rejects(bad):
    with pytest.raises(ValueError):
        parse_price_cents(bad)


def test_format_price_roundtrip():
    for cents in (0, 7, 99, 100, 1999, 123456):
        assert parse_price_cents(format_price(cents)) == cents


def test_rfc3339_parsing_variants():
    t = parse_rfc3339("2011-03-01T10:00:00Z")
    assert t == datetime(2011, 3, 1, 10, tzinfo=timezone.utc)
    # explicit offset is normalized to UTC
    t2 = parse_rfc3339("2011-03-01T12:00:00+02:00")
    assert t2 == t
    # bare dates mean midnight UTC
    assert parse_rfc3339("2011-03-01") == datetime(2011, 3, 1, tzinfo=timezone.utc)
    with pytest.raises(ValueError):
        parse_rfc3339("2011-03-01T10:00:00")  # naive


def test_format_rfc3339_roundtrip():
    t = datetime(2012, 12, 31, 23, 59, 59, tzinfo=timezone.utc)
    assert parse_rfc3339(format_rfc3339(t)) == t


# ---------------------------------------------------------------------------
# record containers


def test_transaction_amount_and_self_trade():
    t = TransactionRecord("a", "b", "p", 3, 150,
                          datetime(2011, 1, 1, tzinfo=timezone.utc))
    assert t.amount_cents == 450
    assert not t.is_self_trade
    s = TransactionRecord("a", "a", "p", 1, 100,
                          datetime(2011, 1, 1, tzinfo=timezone.utc))
    assert s.is_self_trade


def test_label_set_membership():
    ls = LabelSet(frozenset({"x", "y"}))
    assert "x" in ls and "z" not in ls
    assert len(ls) == 2


# ---------------------------------------------------------------------------
# file parsing


TX_CSV = """buyer_id,seller_id,product_id,quantity,unit_price,timestamp
alice,bob,pear,2,1.50,2011-03-01T10:00:00Z
bob,alice,plum,1,5.00,2011-03-02T10:00:00Z
"""


def test_parse_transactions_csv():
    res = parse_transactions(io.BytesIO(TX_CSV.encode()), "csv")
    assert res.total_rows == 2 and not res.errors
    t = res.records[0]
    assert (t.buyer_id, t.seller_id, t.product_id) == ("alice", "bob", "pear")
    assert t.quantity == 2 and t.unit_price_cents == 150
    assert t.timestamp == datetime(2011, 3, 1, 10, tzinfo=timezone.utc)


def test_parse_transactions_jsonl():
    line = (b'{"buyer_id":"a","seller_id":"b","product_id":"p",'
            b'"quantity":1,"unit_price":"2.25","timestamp":"2011-05-01T00:00:00Z"}\n')
    res = parse_transactions(io.BytesIO(line), "jsonl")
    assert res.records[0].unit_price_cents == 225


def test_parse_transactions_bad_rows_tracked():
    filler = "".join(f"u{i},v{i},p,1,1.00,2011-01-01T00:00:00Z\n" for i in range(9))
    bad = TX_CSV + "x,y,p,0,1.00,2011-01-01T00:00:00Z\n" + filler  # quantity < 1
    res = parse_transactions(io.BytesIO(bad.encode()), "csv")
    assert len(res.records) == 11
    assert len(res.errors) == 1 and res.errors[0].line == 4


def test_parse_transactions_too_many_bad_rows():
    rows = ["buyer_id,seller_id,product_id,quantity,unit_price,timestamp"]
    rows += ["a,b,p,0,1.00,2011-01-01T00:00:00Z"] * 3     # all malformed
    with pytest.raises(ParseError):
        parse_transactions(io.BytesIO("\n".join(rows).encode()), "csv")


def test_parse_transactions_header_mismatch():
    with pytest.raises(ParseError):
        parse_transactions(io.BytesIO(b"foo,bar\n1,2\n"), "csv")


def test_self_trades_parsed_and_counted():
    rows = ("buyer_id,seller_id,product_id,quantity,unit_price,timestamp\n"
            "a,a,p,1,1.00,2011-01-01T00:00:00Z\n")
    res = parse_transactions(io.BytesIO(rows.encode()), "csv")
    assert res.self_trades == 1
    assert res.records[0].is_self_trade


def test_parse_feedback_rating_domain():
    filler = "".join(f"g{i},r{i},0,2011-02-01T00:00:00Z\n" for i in range(8))
    rows = ("giver_id,receiver_id,rating,timestamp\n"
            "a,b,1,2011-01-01T00:00:00Z\n"
            "b,a,-1,2011-01-02T00:00:00Z\n"
            "a,b,2,2011-01-03T00:00:00Z\n" + filler)
    res = parse_feedback(io.BytesIO(rows.encode()), "csv")
    assert [r.rating for r in res.records[:2]] == [1, -1]
    assert len(res.records) == 10
    assert len(res.errors) == 1 and res.errors[0].line == 4


def test_parse_profiles_missing_birth_year_and_duplicates():
    filler = "".join(f"u{i},1970,Iowa,2010-01-0{i % 9 + 1}\n" for i in range(8))
    rows = ("user_id,birth_year,state,registration_date\n"
            "a,1980,Ohio,2010-05-01\n"
            "b,,default,2010-06-01\n"
            "a,1990,Texas,2010-07-01\n" + filler)
    res = parse_profiles(io.BytesIO(rows.encode()), "csv")
    assert len(res.records) == 10
    assert res.records[1].birth_year is None
    assert len(res.errors) == 1   # duplicate user_id
    assert res.records[0].registration_date == date(2010, 5, 1)


def test_load_label_list_dedups():
    ls = load_label_list(io.BytesIO(b"u1\nu2\nu1\n"))
    assert set(ls.shill_ids) == {"u1", "u2"}
    assert ls.duplicates == 1


def test_load_label_list_rejects_malformed():
    with pytest.raises(ParseError):
        load_label_list(io.BytesIO(b"u1\nbad id,\n"))


# ---------------------------------------------------------------------------
# writers round-trip


def test_write_read_roundtrip_csv(tiny_corpus):
    transactions, feedback, profiles, labels = tiny_corpus
    for writer, parser, recs in (
        (write_transactions, parse_transactions, transactions),
        (write_feedback, parse_feedback, feedback),
        (write_profiles, parse_profiles, profiles),
    ):
        for fmt in ("csv", "jsonl"):
            buf = io.StringIO()
            writer(recs, buf, fmt)
            back = parser(io.BytesIO(buf.getvalue().encode()), fmt)
            assert back.records == list(recs), fmt
    buf = io.StringIO()
    write_labels(labels, buf)
    back = load_label_list(io.BytesIO(buf.getvalue().encode()))
    assert back.shill_ids == labels.shill_ids


def test_consistency_warnings_flag_preregistration_trades(tiny_corpus):
    transactions, feedback, profiles, _ = tiny_corpus
    early = [TransactionRecord("alice", "bob", "p", 1, 100,
                               datetime(2009, 1, 1, tzinfo=timezone.utc))]
    warns = consistency_warnings(early, [], profiles)
    assert any("alice" in w for w in warns)
    assert not consistency_warnings(transactions, feedback, profiles)
