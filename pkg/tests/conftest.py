import numpy as np
import pytest

from srwalk.graph_model import Graph, UntrainableInstance, two_hop_instance


def dense_stationary(q):
    """Solve p^T Q = p^T with sum(p) = 1 directly (least squares on the stacked system)."""
    n = q.shape[0]
    a = np.vstack([np.eye(n) - q.T, np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    return np.linalg.lstsq(a, b, rcond=None)[0]


def dense_q(graph, seed, strengths, alpha):
    """Transition matrix built entry by entry from its definition."""
    n = graph.node_count
    q = np.zeros((n, n))
    for u in range(n):
        arcs = [i for i in range(graph.arc_count) if graph.src[i] == u]
        if not arcs:
            q[u, seed] = 1.0
            continue
        total = sum(strengths[i] for i in arcs)
        for i in arcs:
            q[u, graph.dst[i]] += (1 - alpha) * strengths[i] / total
        q[u, seed] += alpha
    return q


def central_diff(f, x, step=1e-6):
    x = np.asarray(x, dtype=np.float64)
    out = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e.flat[k] = step
        out.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * step))
    return np.array(out)


def rel_err(analytic, numeric):
    """Max-norm error relative to the larger max-norm of the two."""
    a = np.asarray(analytic, dtype=np.float64)
    b = np.asarray(numeric, dtype=np.float64)
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-12)
    return float(np.max(np.abs(a - b)) / scale)


def random_undirected(rng, n, p_edge, m):
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p_edge]
    edges = np.array(edges, dtype=np.int64).reshape(-1, 2)
    return Graph.from_undirected(n, edges, rng.standard_normal((len(edges), m)))


def random_directed(rng, n, p_arc, m):
    arcs = [(u, v) for u in range(n) for v in range(n) if u != v and rng.random() < p_arc]
    arcs = np.array(arcs, dtype=np.int64).reshape(-1, 2)
    return Graph(n, arcs[:, 0], arcs[:, 1], rng.standard_normal((len(arcs), m)))


def random_instance(rng, n=20, m=3, p_edge=0.2, max_tries=200):
    """Random two-hop instance with nonempty D and L (features are raw normals)."""
    for _ in range(max_tries):
        g = random_undirected(rng, n, p_edge, m)
        seed = int(rng.integers(n))
        if len(g.out_neighbors(seed)) == 0:
            continue
        future = rng.choice(n, size=n // 3, replace=False)
        try:
            return two_hop_instance(g, seed, (), future, min_common=1)
        except UntrainableInstance:
            continue
    raise RuntimeError("could not draw a trainable instance")


def two_path_graph():
    """Two paths s-u1-v1 / s-u2-v1 joined by u1-u2, and s-u3-v2 / s-u4-v2 without the link."""
    s, u1, u2, u3, u4, v1, v2 = range(7)
    edges = [(s, u1), (s, u2), (u1, v1), (u2, v1), (u1, u2), (s, u3), (s, u4), (u3, v2), (u4, v2)]
    return Graph.from_undirected(7, edges, np.zeros((len(edges), 0))), dict(
        s=s, u1=u1, u2=u2, u3=u3, u4=u4, v1=v1, v2=v2
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
