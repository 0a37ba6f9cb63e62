from __future__ import annotations

import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from hostingtype.datamodel import NetType, Prefix24, day_index, parse_ip
from hostingtype.errors import AsnConflictError, IngestError
from hostingtype.ingest import AsnDb, load_asn, load_pdns, load_whois, lookup_asn, parse_asn_object, parse_pdns_object

YEAR = oracles.YEAR


def rec(name="a.example.com", ip="1.2.3.4", first=1_600_000_000, last=1_600_086_400, count=5, rrtype="A"):
    return {"name": name, "rrtype": rrtype, "ip": ip, "time_first": first, "time_last": last, "count": count}


def test_load_pdns_single_record(write_lines):
    store = load_pdns(write_lines("p.jsonl", [rec()]), {"com"})
    ip = parse_ip("1.2.3.4")
    assert list(store.by_ip) == [ip]
    (r,) = store.records(ip)
    assert r.name.text == "a.example.com"
    assert (r.time_first, r.time_last, r.count) == (1_600_000_000, 1_600_086_400, 5)


def test_non_a_records_are_counted_and_skipped(write_lines):
    store = load_pdns(write_lines("p.jsonl", [rec(rrtype="AAAA"), rec(rrtype="CNAME"), rec()]))
    assert store.stats.skipped_non_a == 2
    assert store.stats.loaded == 1
    assert len(store) == 1


def test_empty_file_gives_empty_store(write_lines):
    store = load_pdns(write_lines("p.jsonl", []))
    assert len(store) == 0
    assert store.name_sets(parse_ip("1.2.3.4")) == (frozenset(), frozenset(), frozenset())


def test_malformed_lines_skipped_then_fatal_in_strict(write_lines):
    rows = [rec(), "{not json", rec(first=10, last=5), rec(ip="::1"), {"name": "x.com"}, rec(ip="5.6.7.8")]
    path = write_lines("p.jsonl", rows)
    store = load_pdns(path)
    assert store.stats.malformed == 4
    assert len(store.stats.errors) == 4
    assert len(store.by_ip) == 2
    with pytest.raises(IngestError) as exc:
        load_pdns(path, strict=True)
    assert exc.value.line_no == 2


def test_unreadable_file(tmp_path):
    with pytest.raises(IngestError, match="cannot read"):
        load_pdns(tmp_path / "missing.jsonl")


def test_duplicates_merge(write_lines):
    rows = [rec(first=100, last=200, count=2), rec(name="A.EXAMPLE.COM.", first=50, last=150, count=3), rec(first=300, last=400, count=1)]
    store = load_pdns(write_lines("p.jsonl", rows))
    (r,) = store.records(parse_ip("1.2.3.4"))
    assert (r.time_first, r.time_last, r.count) == (50, 400, 6)
    assert store.stats.merged == 2


def test_round_trip_record():
    r = parse_pdns_object(rec(), {"com"})
    assert parse_pdns_object(r.to_json(), {"com"}) == r


def test_prefix_index_consistent(write_lines):
    rows = [rec(ip=f"9.9.9.{i}") for i in range(5)] + [rec(ip="9.9.8.1")]
    store = load_pdns(write_lines("p.jsonl", rows))
    for p, ips in store.by_prefix.items():
        for ip in ips:
            assert ip in store.by_ip
            assert Prefix24.of(ip) == p
    assert len(store.prefix_ips(Prefix24.of(parse_ip("9.9.9.0")))) == 5


def test_daily_apexes_match_record_overlap(write_lines):
    rnd = random.Random(3)
    rows = []
    for _ in range(200):
        first = rnd.randint(0, 40) * 86_400 + rnd.randint(0, 86_399)
        rows.append(rec(name=f"h{rnd.randint(0, 3)}.d{rnd.randint(0, 9)}.com", first=first, last=first + rnd.randint(0, 10 * 86_400)))
    store = load_pdns(write_lines("p.jsonl", rows), {"com"})
    ip = parse_ip("1.2.3.4")
    records = store.records(ip)
    for day in range(0, 55):
        got = store.daily_apexes(ip, day)
        for apex in got:
            assert any(r.name.tld2 == apex and day_index(r.time_first) <= day <= day_index(r.time_last) for r in records)
        expected = {r.name.tld2 for r in records if day_index(r.time_first) <= day <= day_index(r.time_last)}
        assert got == expected


def test_queries_are_pure(write_lines):
    store = load_pdns(write_lines("p.jsonl", [rec(), rec(name="b.other.com")]), {"com"})
    ip = parse_ip("1.2.3.4")
    assert store.name_sets(ip) == store.name_sets(ip)
    assert store.apex_intervals(ip) == store.apex_intervals(ip)
    assert store.ips_for_apex("other.com") == frozenset({ip})


def whois_row(observed, owner="Acme", net="Direct Allocation", start="10.0.0.0", end="10.0.0.255", updated=None):
    return {"range_start": start, "range_end": end, "owner": owner, "net_type": net, "updated": observed if updated is None else updated, "observed": observed}


def test_whois_net_types(write_lines):
    store = load_whois(write_lines("w.jsonl", [whois_row(1, net="Direct Allocation"), whois_row(2, net="ALLOCATED PA")]))
    assert [s.net_type for s in store.snapshots] == [NetType.DIRECT_ALLOCATION, NetType.UNKNOWN]


def test_whois_horizon_filter(write_lines):
    # 2010-06 and 2020-06 snapshots, reference 2021-01: only the later one lies in 10 years
    t2010, t2020, ref = 1_275_350_400, 1_590_969_600, 1_609_459_200
    store = load_whois(write_lines("w.jsonl", [whois_row(t2020), whois_row(t2010)]))
    hist = store.history(parse_ip("10.0.0.7"), ref)
    assert [s.observed for s in hist] == [t2020]


def test_whois_history_sorted_and_bounded(write_lines):
    ref = 2_000_000_000
    obs = [ref - int(y * YEAR) for y in (0.5, 12, 3, 9.99, -1)]
    store = load_whois(write_lines("w.jsonl", [whois_row(o) for o in obs]))
    hist = store.history(parse_ip("10.0.0.1"), ref)
    times = [s.observed for s in hist]
    assert times == sorted(times)
    assert all(ref - 10 * YEAR <= t <= ref for t in times)
    assert len(times) == 3


def test_whois_owner_normalized(write_lines):
    store = load_whois(write_lines("w.jsonl", [whois_row(1, owner="  ACME, Inc. ")]))
    assert store.snapshots[0].owner == "acme inc"


def test_whois_bad_range_is_malformed(write_lines):
    store = load_whois(write_lines("w.jsonl", [whois_row(1, start="10.0.0.9", end="10.0.0.1")]))
    assert store.stats.malformed == 1 and len(store) == 0


def asn(cidr, n, org="Org"):
    return {"cidr": cidr, "asn": n, "org": org}


def test_asn_longest_match(write_lines):
    db = load_asn(write_lines("a.jsonl", [asn("1.2.0.0/16", 1), asn("1.2.3.0/24", 2)]))
    assert lookup_asn(db, parse_ip("1.2.3.4")).asn == 2
    assert lookup_asn(db, parse_ip("1.2.4.4")).asn == 1
    assert lookup_asn(db, parse_ip("9.9.9.9")) is None


def test_asn_default_route(write_lines):
    db = load_asn(write_lines("a.jsonl", [asn("0.0.0.0/0", 3), asn("8.8.8.0/24", 4)]))
    assert db.lookup(parse_ip("200.1.1.1")).asn == 3
    assert db.lookup(parse_ip("8.8.8.8")).asn == 4


def test_asn_conflict(write_lines):
    with pytest.raises(AsnConflictError):
        load_asn(write_lines("a.jsonl", [asn("1.2.3.0/24", 1), asn("1.2.3.0/24", 2)]))
    db = load_asn(write_lines("b.jsonl", [asn("1.2.3.0/24", 1), asn("1.2.3.0/24", 1)]))
    assert len(db) == 1


def test_asn_rejects_ipv6_and_host_bits():
    with pytest.raises(ValueError):
        parse_asn_object(asn("2001:db8::/32", 1))
    with pytest.raises(ValueError):
        parse_asn_object(asn("1.2.3.4/24", 1))


@given(st.lists(st.tuples(st.integers(0, 2**32 - 1), st.integers(0, 32)), min_size=1, max_size=25), st.lists(st.integers(0, 2**32 - 1), min_size=1, max_size=20))
def test_asn_lookup_matches_brute_force(prefixes, probes):
    rows, seen = [], set()
    for i, (v, plen) in enumerate(prefixes):
        base = v & (((1 << 32) - 1) ^ ((1 << (32 - plen)) - 1))
        if (base, plen) in seen:
            continue
        seen.add((base, plen))
        rows.append(asn(f"{oracles_fmt(base)}/{plen}", i))
    db = AsnDb(parse_asn_object(r) for r in rows)
    for v in probes:
        ip = oracles_fmt(v)
        want = oracles.asn_lookup(rows, ip)
        got = db.lookup(parse_ip(ip))
        assert (got is None) == (want is None)
        if got is not None:
            assert got.asn == want["asn"]


def oracles_fmt(v: int) -> str:
    return f"{v >> 24}.{(v >> 16) & 255}.{(v >> 8) & 255}.{v & 255}"
