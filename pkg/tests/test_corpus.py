import json
from datetime import timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from impactrag.corpus import (
    DocumentStore,
    FilterConfig,
    IngestError,
    Source,
    count_hashtags,
    count_urls,
    filter_pipeline,
    ingest,
    is_retweet,
    keyword_match,
    load_store_jsonl,
    parse_timestamp,
    tokenize,
)

from conftest import MINI, doc


def test_parse_timestamp_variants():
    a = parse_timestamp("2017-08-27T15:40:03Z")
    b = parse_timestamp("2017-08-27T15:40:03+00:00")
    c = parse_timestamp("2017-08-27 15:40:03")
    assert a == b == c
    assert c.tzinfo is not None
    assert parse_timestamp("2017-08-27T10:40:03-05:00").astimezone(timezone.utc) == a


def test_document_validation():
    with pytest.raises(ValueError):
        doc("x", "   ")
    with pytest.raises(ValueError):
        doc("x", "flood", zip_code="7706")
    with pytest.raises(ValueError):
        doc("", "flood")


def test_store_rejects_duplicates_and_roundtrips(tmp_path):
    with pytest.raises(ValueError):
        DocumentStore([doc("a", "flood"), doc("a", "rain")])
    store = DocumentStore([doc("a", "flood", zip_code="77096"), doc("b", "rain", Source.CALL_311)])
    path = tmp_path / "docs.jsonl"
    store.write_jsonl(path)
    back = load_store_jsonl(path)
    assert back.docs == store.docs
    assert "a" in back and back["b"].source is Source.CALL_311


def test_tokenize_and_keywords():
    assert tokenize("Flooded! I-10 #Harvey") == ["flooded", "i", "10", "harvey"]
    assert keyword_match("Water FLOOD here", {"flood"})
    # whole tokens only
    assert not keyword_match("floodgate opened", {"flood"})
    # underscores separate tokens
    assert keyword_match("flood_watch", {"flood"})


def test_retweet_detection():
    assert is_retweet("RT @khou: water")
    assert is_retweet("  rt @x hi")
    assert not is_retweet("ART @x")
    assert not is_retweet("RT: no handle")


def test_spam_counters():
    assert count_hashtags("#a #b c#d ##e") == 4
    assert count_urls("http://a HTTPS://b ftp://c") == 2


def test_pipeline_stage_order():
    cfg = FilterConfig(max_hashtags=1)
    raw = [
        doc("rt", "RT @a: flood music"),          # retweet wins over block
        doc("blk", "flood music #a #b"),           # block wins over spam
        doc("none", "nice day #a #b"),             # allow-miss wins over spam
        doc("spam", "flood #a #b"),
        doc("ok", "flood on the road #a"),
    ]
    kept, stats = filter_pipeline(raw, cfg)
    assert [d.doc_id for d in kept] == ["ok"]
    assert (stats.retweets_removed, stats.blocked, stats.no_allow_match, stats.spam_removed, stats.kept) == (1, 1, 1, 1, 1)
    assert stats.is_conserved()


def test_filter_config_validation(tmp_path):
    with pytest.raises(ValueError):
        FilterConfig(allow_keywords=frozenset({"flood"}), block_keywords=frozenset({"flood"}))
    with pytest.raises(ValueError):
        FilterConfig(max_hashtags=0)
    path = tmp_path / "filter.yaml"
    path.write_text("allow_keywords: [Flood, rescue]\nblock_keywords: [music]\nmax_urls: 1\n")
    cfg = FilterConfig.load(path)
    assert cfg.allow_keywords == {"flood", "rescue"}
    assert cfg.max_urls == 1


def test_ingest_fixture_counts_skips():
    store = ingest(MINI / "tweets.jsonl", "jsonl", "tweet")
    assert store.skipped == 1
    assert store["903033982874517505"].zip == "77067"
    header_map = {"id": "case_number", "text": "description", "zip": "zip_code",
                  "timestamp": "created_date", "lat": "latitude", "lon": "longitude"}
    calls = ingest(MINI / "calls_311.csv", "csv", Source.CALL_311, header_map)
    assert len(calls) == 6 and calls.skipped == 1
    assert calls["311-5001"].geo == (29.671, -95.481)


def test_ingest_format_mismatch(tmp_path):
    path = tmp_path / "x.jsonl"
    path.write_text("id,text\n1,flood\n")
    with pytest.raises(IngestError):
        ingest(path, "jsonl", "tweet")
    with pytest.raises(IngestError):
        ingest(path, "parquet", "tweet")
    with pytest.raises(IngestError):
        ingest(tmp_path / "missing.jsonl", "jsonl", "tweet")


def test_ingest_skips_duplicate_ids(tmp_path):
    path = tmp_path / "t.jsonl"
    rows = [{"id": "1", "text": "flood", "timestamp": "2017-08-27T00:00:00Z"}] * 2
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    store = ingest(path, "jsonl", "tweet")
    assert len(store) == 1 and store.skipped == 1


fragments = st.sampled_from(["a", " ", "#", "#x", "RT @", "rt", "@", ":", "flood", "music", "http://x", "\u00e9"])
texts = st.lists(fragments, max_size=12).map("".join)


@settings(max_examples=200, deadline=None)
@given(st.lists(texts, max_size=30))
def test_filter_conservation_property(items):
    raw = [doc(str(i), t) for i, t in enumerate(items) if t.strip()]
    kept, stats = filter_pipeline(raw)
    assert stats.is_conserved()
    assert stats.kept == len(kept)
    # kept docs are a subsequence of the input
    ids = [d.doc_id for d in raw]
    pos = [ids.index(d.doc_id) for d in kept]
    assert pos == sorted(pos)
