import hashlib
import json
import time

from hypothesis import given, settings
from hypothesis import strategies as st

from mcpgate.audit import (
    GENESIS_PREV,
    OK,
    AuditLog,
    AuditRecord,
    Broken,
    read_log,
    verify_chain,
)
from mcpgate.clock import FakeClock


def oracle_hash(prev_hash: bytes, seq: int, observed_at: int, kind: str, summary: dict) -> bytes:
    """Standalone recomputation of the chained hash, written independently of
    the implementation: sorted-key compact JSON, UTF-8, prev hash prepended."""
    doc = {"kind": kind, "observed_at": observed_at, "seq": seq, "summary": summary}
    payload = json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(prev_hash + payload.encode("utf-8")).digest()


def make_log(entries, clock=None):
    log = AuditLog(clock=clock or FakeClock())
    for kind, summary in entries:
        log.append(kind, summary)
    return log


def test_first_record_uses_genesis_prev_hash():
    log = make_log([("exchange", {"route_id": "r1"})])
    assert log.records()[0].prev_hash == GENESIS_PREV


def test_chain_links_prev_hash():
    log = make_log([("exchange", {"a": "1"}), ("exchange", {"a": "2"})])
    r1, r2 = log.records()
    assert r2.prev_hash == r1.hash


def test_hash_matches_independent_oracle():
    log = make_log([("detection", {"rule_id": "x", "status": "403"})])
    rec = log.records()[0]
    assert rec.hash == oracle_hash(rec.prev_hash, rec.seq, rec.observed_at, rec.kind, rec.summary)


summaries = st.dictionaries(
    st.text(min_size=1, max_size=8), st.text(max_size=16), min_size=0, max_size=4
)


@settings(max_examples=50, deadline=None)
@given(st.lists(summaries, min_size=0, max_size=10))
def test_verify_ok_for_any_append_sequence(all_summaries):
    log = make_log([("exchange", s) for s in all_summaries])
    assert log.verify() == OK


@settings(max_examples=50, deadline=None)
@given(summaries, summaries)
def test_canonical_serialization_injective(s1, s2):
    log1 = make_log([("exchange", s1)])
    log2 = make_log([("exchange", s2)])
    h1, h2 = log1.records()[0].hash, log2.records()[0].hash
    if s1 == s2:
        assert h1 == h2
    else:
        assert h1 != h2


def test_tampering_detected_at_correct_seq():
    log = make_log([("exchange", {"n": str(i)}) for i in range(6)])
    records = log.records()
    k = 3
    tampered = list(records)
    bad = AuditRecord(
        seq=records[k].seq,
        observed_at=records[k].observed_at,
        kind=records[k].kind,
        summary={"n": "999"},
        prev_hash=records[k].prev_hash,
        hash=records[k].hash,
    )
    tampered[k] = bad
    result = verify_chain(tampered)
    assert isinstance(result, Broken) and result.first_bad_seq == k


def test_deleted_record_detected():
    log = make_log([("exchange", {"n": str(i)}) for i in range(5)])
    records = log.records()
    del records[2]
    result = verify_chain(records)
    assert isinstance(result, Broken) and result.first_bad_seq == 2


def test_file_round_trip_and_single_byte_flip(tmp_path):
    path = tmp_path / "audit.log"
    log = AuditLog(str(path), clock=FakeClock())
    for i in range(10):
        log.append("exchange", {"n": str(i)})
    assert verify_chain(read_log(str(path))) == OK

    raw = path.read_bytes()
    # flip one byte inside record 4's summary value
    lines = raw.split(b"\n")
    assert b'"n":"4"' in lines[4]
    lines[4] = lines[4].replace(b'"n":"4"', b'"n":"9"')
    path.write_bytes(b"\n".join(lines))
    result = verify_chain(read_log(str(path)))
    assert isinstance(result, Broken) and result.first_bad_seq == 4


def test_restart_continues_chain(tmp_path):
    path = tmp_path / "audit.log"
    log = AuditLog(str(path), clock=FakeClock())
    log.append("exchange", {"n": "0"})
    log.append("exchange", {"n": "1"})
    log2 = AuditLog(str(path), clock=FakeClock())
    log2.append("exchange", {"n": "2"})
    assert verify_chain(read_log(str(path))) == OK
    assert [r.seq for r in read_log(str(path))] == [0, 1, 2]


def test_ten_thousand_records_verify_under_one_second():
    log = make_log([("exchange", {"n": str(i)}) for i in range(10_000)])
    records = log.records()
    start = time.perf_counter()
    assert verify_chain(records) == OK
    assert time.perf_counter() - start < 1.0


def test_summary_redacts_bearer_tokens():
    log = make_log([("auth_event", {"header": "Bearer sekrit-token-value-123456"})])
    line = log.records()[0].to_json_line()
    assert "sekrit-token-value-123456" not in line


def test_persistence_failure_sets_health_flag(tmp_path):
    log = AuditLog(str(tmp_path / "missing-dir" / "audit.log"), clock=FakeClock())
    rec = log.append("exchange", {"n": "0"})
    assert rec.seq == 0
    assert log.healthy is False
