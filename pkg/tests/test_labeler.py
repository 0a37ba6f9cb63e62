from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from corpora import REFERENCE, SUFFIXES
from hostingtype.datamodel import SharingLabel, parse_ip
from hostingtype.errors import LabelingError
from hostingtype.ingest import PdnsStore, parse_pdns_object
from hostingtype.labeler import (
    DomainWhois,
    LabelDecision,
    RedirectEdge,
    RedirectGraph,
    Rule,
    label_apexes,
    label_corpus,
    label_ip,
    load_domain_whois,
    load_manual,
    load_redirects,
    read_labels_csv,
    write_labels_csv,
)

D, S = SharingLabel.DEDICATED, SharingLabel.SHARED


def store(hosting: dict[str, list[str]]) -> PdnsStore:
    rows = [
        {"name": n, "rrtype": "A", "ip": ip, "time_first": REFERENCE - 100, "time_last": REFERENCE, "count": 1}
        for ip, names in hosting.items()
        for n in names
    ]
    return PdnsStore(parse_pdns_object(r, SUFFIXES) for r in rows)


def reg(*pairs):
    return {d: DomainWhois(d, r) for d, r in pairs}


def private(*domains):
    return {d: DomainWhois(d, None, True) for d in domains}


def test_single_domain():
    s = store({"1.1.1.1": ["a.com", "www.a.com"]})
    d = label_ip(s, parse_ip("1.1.1.1"), {})
    assert (d.label, d.rule) == (D, Rule.SINGLE_DOMAIN)


def test_registrant_match_and_mismatch():
    assert label_apexes(["a.com", "b.com"], reg(("a.com", "acme inc"), ("b.com", "acme inc")), ())[:2] == (D, Rule.REGISTRANT_MATCH)
    assert label_apexes(["a.com", "b.com"], reg(("a.com", "acme"), ("b.com", "globex")), ())[:2] == (S, Rule.REGISTRANT_MISMATCH)


def test_registrant_comparison_ignores_case_and_spaces():
    w = reg(("a.com", "  ACME Inc "), ("b.com", "acme inc"))
    assert label_apexes(["a.com", "b.com"], w, ())[1] is Rule.REGISTRANT_MATCH


def test_redirect_convergence():
    edges = [RedirectEdge("a.com", "c.com"), RedirectEdge("b.com", "c.com")]
    got = label_apexes(["a.com", "b.com", "c.com"], private("a.com", "b.com", "c.com"), edges)
    assert got == (D, Rule.REDIRECT_CONVERGENCE, "c.com")


def test_privacy_without_redirects_is_undecidable():
    assert label_apexes(["a.com", "b.com"], private("a.com", "b.com"), ())[:2] == (None, Rule.UNDECIDABLE)


def test_one_missing_registrant_defers():
    w = reg(("a.com", "acme"), ("b.com", "globex"))
    assert label_apexes(["a.com", "b.com", "c.com"], w, (), manual="shared")[:2] == (S, Rule.MANUAL_ANNOTATION)


def test_no_apex_is_an_error():
    with pytest.raises(LabelingError, match="not a hosting candidate"):
        label_ip(store({}), parse_ip("1.1.1.1"), {})


def test_decision_invariant():
    with pytest.raises(LabelingError):
        LabelDecision(parse_ip("1.1.1.1"), None, Rule.SINGLE_DOMAIN)
    with pytest.raises(LabelingError):
        LabelDecision(parse_ip("1.1.1.1"), D, Rule.UNDECIDABLE)


def test_cycles_and_long_chains_fail_closed():
    g = RedirectGraph([RedirectEdge("a.com", "b.com"), RedirectEdge("b.com", "a.com")])
    assert g.sinks("a.com") is None
    assert g.common_sink(["a.com", "b.com"]) is None
    chain = [RedirectEdge(f"n{i}.com", f"n{i + 1}.com") for i in range(12)]
    g = RedirectGraph(chain)
    assert g.sinks("n2.com") == frozenset({"n12.com"})
    assert g.sinks("n0.com") is None


def test_self_loops_dropped():
    assert len(RedirectGraph([RedirectEdge("a.com", "a.com")])) == 0


def test_label_corpus_summary():
    s = store({"1.1.1.1": ["a.com"], "2.2.2.2": ["b.com", "c.com"], "3.3.3.3": ["d.com", "e.com"]})
    w = {**reg(("b.com", "x"), ("c.com", "x")), **private("d.com", "e.com")}
    ips = [parse_ip(i) for i in ("1.1.1.1", "2.2.2.2", "3.3.3.3", "4.4.4.4")]
    out, summary = label_corpus(s, ips, w)
    assert summary.counts == {"SingleDomain": 1, "RegistrantMatch": 1, "Undecidable": 2}
    assert summary.total == 4 == sum(summary.counts.values())
    assert "not a hosting candidate" in out[3].note


def test_all_manual():
    s = store({"2.2.2.2": ["b.com", "c.com"], "3.3.3.3": ["d.com", "e.com"]})
    ips = [parse_ip("2.2.2.2"), parse_ip("3.3.3.3")]
    out, _ = label_corpus(s, ips, {}, manual={ips[0]: "dedicated", ips[1]: S})
    assert [d.rule for d in out] == [Rule.MANUAL_ANNOTATION] * 2
    assert [d.label for d in out] == [D, S]


apex = st.sampled_from([f"d{i}.com" for i in range(8)])


@given(st.lists(apex, min_size=1, max_size=6, unique=True), st.lists(st.tuples(apex, apex), max_size=12), st.booleans())
def test_redirects_never_override_registrant_rules(apexes, edges, same):
    w = reg(*((a, "acme" if same else a) for a in apexes))
    base = label_apexes(apexes, w, ())
    assert label_apexes(apexes, w, [RedirectEdge(a, b) for a, b in edges]) == base


@given(st.lists(apex, min_size=2, max_size=6, unique=True), st.lists(st.tuples(apex, apex), max_size=12), st.randoms(use_true_random=False))
def test_redirect_outcome_ignores_edge_order(apexes, edges, rnd):
    edges = [RedirectEdge(a, b) for a, b in edges]
    shuffled = list(edges)
    rnd.shuffle(shuffled)
    w = private(*apexes)
    assert label_apexes(apexes, w, edges) == label_apexes(apexes, w, shuffled)


def test_file_round_trip(tmp_path, write_lines):
    w = load_domain_whois(write_lines("w.jsonl", [
        {"domain": "WWW.A.COM", "registrant": "Acme", "privacy_protected": False},
        {"domain": "b.com", "registrant": None, "privacy_protected": True},
        {"domain": "c.com", "registrant": 5},
    ]), SUFFIXES)
    assert set(w) == {"a.com", "b.com"}
    assert w["a.com"].usable and not w["b.com"].usable
    edges = load_redirects(write_lines("r.jsonl", [{"from": "x.a.com", "to": "b.com"}]), SUFFIXES)
    assert edges == [RedirectEdge("a.com", "b.com")]
    manual = load_manual(write_lines("m.jsonl", [{"ip": "1.1.1.1", "label": "Shared"}]))
    assert manual == {parse_ip("1.1.1.1"): S}

    decisions = [LabelDecision(parse_ip("9.0.0.1"), None, Rule.UNDECIDABLE), LabelDecision(parse_ip("1.0.0.1"), D, Rule.SINGLE_DOMAIN)]
    path = tmp_path / "labels.csv"
    write_labels_csv(path, decisions)
    assert path.read_text().splitlines() == ["ip,label,rule", "1.0.0.1,dedicated,SingleDomain", "9.0.0.1,NA,Undecidable"]
    back = read_labels_csv(path)
    assert back[parse_ip("9.0.0.1")].label is None
    assert back[parse_ip("1.0.0.1")].rule is Rule.SINGLE_DOMAIN
