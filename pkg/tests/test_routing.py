from hypothesis import given, settings
from hypothesis import strategies as st

from mcpgate.httpmodel import Decision, Headers, HttpExchange
from mcpgate.routing import NamedMiddleware, RouteConfig, route_request, run_chain


def req(host="a.test", path="/"):
    return HttpExchange(method="GET", host=host, path=path, headers=Headers())


TABLE = [
    RouteConfig(id="root", host_rule="a.test", backend_id="b1", path_prefix="/"),
    RouteConfig(id="sse", host_rule="a.test", backend_id="b2", path_prefix="/sse"),
    RouteConfig(id="deep", host_rule="a.test", backend_id="b3", path_prefix="/sse/admin"),
    RouteConfig(id="other", host_rule="b.test", backend_id="b4", path_prefix="/"),
]


def test_unknown_host_is_none():
    assert route_request(req(host="c.test"), TABLE) is None


def test_exact_host_match_required():
    assert route_request(req(host="b.test"), TABLE).id == "other"


def test_longest_prefix_wins():
    assert route_request(req(path="/"), TABLE).id == "root"
    assert route_request(req(path="/sse"), TABLE).id == "sse"
    assert route_request(req(path="/sse/stream"), TABLE).id == "sse"
    assert route_request(req(path="/sse/admin/x"), TABLE).id == "deep"


def test_prefix_is_segment_aware():
    # "/sse" must not cover "/ssex"
    assert route_request(req(path="/ssex"), TABLE).id == "root"


def test_tie_breaks_by_route_id():
    table = [
        RouteConfig(id="zeta", host_rule="a.test", backend_id="b1", path_prefix="/x"),
        RouteConfig(id="alpha", host_rule="a.test", backend_id="b2", path_prefix="/x"),
    ]
    assert route_request(req(path="/x/y"), table).id == "alpha"


path_segments = st.lists(
    st.text(alphabet="abcde", min_size=1, max_size=3), min_size=0, max_size=4
)


@settings(max_examples=100, deadline=None)
@given(path_segments, path_segments)
def test_match_implies_true_segment_prefix(prefix_segs, extra_segs):
    """Property: for any matched route the request path, split on '/', starts
    with the prefix's segments."""
    prefix = "/" + "/".join(prefix_segs) if prefix_segs else "/"
    path = prefix.rstrip("/") + ("/" + "/".join(extra_segs) if extra_segs else "")
    if not path:
        path = "/"
    table = [RouteConfig(id="r", host_rule="a.test", backend_id="b", path_prefix=prefix)]
    matched = route_request(req(path=path), table)
    assert matched is not None
    want = [s for s in prefix.split("/") if s]
    got = [s for s in path.split("/") if s]
    assert got[: len(want)] == want


# -- chain execution --------------------------------------------------------


def mw(decision, calls=None, name="m"):
    def fn(request, route):
        if calls is not None:
            calls.append(name)
        return decision

    return NamedMiddleware(id=name, fn=fn)


def test_all_continue_merges_mutations():
    chain = [
        mw(Decision.proceed([("X-A", "1")]), name="a"),
        mw(Decision.proceed([("X-B", "2")]), name="b"),
    ]
    decision = run_chain(req(), TABLE[0], chain)
    assert not decision.short_circuit
    assert decision.mutations == [("X-A", "1"), ("X-B", "2")]


def test_first_short_circuit_halts():
    calls = []
    chain = [
        mw(Decision.proceed(), calls, "a"),
        mw(Decision.halt(401, body=b"no"), calls, "b"),
        mw(Decision.proceed(), calls, "c"),
    ]
    decision = run_chain(req(), TABLE[0], chain)
    assert decision.short_circuit and decision.status == 401
    assert calls == ["a", "b"]


def test_middleware_exception_becomes_500():
    def boom(request, route):
        raise RuntimeError("kaput")

    seen = []
    chain = [NamedMiddleware(id="boom", fn=boom)]
    decision = run_chain(req(), TABLE[0], chain, on_error=lambda mid, exc: seen.append(mid))
    assert decision.short_circuit and decision.status == 500
    assert seen == ["boom"]
