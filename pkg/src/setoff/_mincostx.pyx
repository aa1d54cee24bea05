# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled min-cost flow kernel.

Twin of ``_mincost.py``: same entry point, same two-phase algorithm, same
tie-breaking (the heap always pops the lexicographically smallest
(distance, node) pair and adjacency lists preserve arc insertion order), so
both backends return bit-identical results. Keep the two in lockstep.
"""

from libc.stdlib cimport free, malloc

ctypedef long long i64

cdef i64 INF = (<i64>1) << 62


cdef struct Heap:
    i64* d
    int* u
    int size


cdef inline void heap_push(Heap* h, i64 d, int u) nogil:
    cdef int i = h.size
    cdef int p
    h.size += 1
    while i > 0:
        p = (i - 1) >> 1
        if h.d[p] < d or (h.d[p] == d and h.u[p] <= u):
            break
        h.d[i] = h.d[p]
        h.u[i] = h.u[p]
        i = p
    h.d[i] = d
    h.u[i] = u


cdef inline void heap_pop(Heap* h, i64* out_d, int* out_u) nogil:
    out_d[0] = h.d[0]
    out_u[0] = h.u[0]
    h.size -= 1
    cdef i64 d = h.d[h.size]
    cdef int u = h.u[h.size]
    cdef int i = 0
    cdef int c
    while True:
        c = 2 * i + 1
        if c >= h.size:
            break
        if c + 1 < h.size and (
            h.d[c + 1] < h.d[c] or (h.d[c + 1] == h.d[c] and h.u[c + 1] < h.u[c])
        ):
            c += 1
        if h.d[c] > d or (h.d[c] == d and h.u[c] >= u):
            break
        h.d[i] = h.d[c]
        h.u[i] = h.u[c]
        i = c
    h.d[i] = d
    h.u[i] = u


cdef inline int add_arc(
    int u,
    int v,
    i64 cap,
    int c,
    int* to_,
    i64* res,
    int* cst,
    int* nxt,
    int* first,
    int* tail,
    int* n_arc,
) nogil:
    cdef int i = n_arc[0]
    n_arc[0] = i + 2
    to_[i] = v
    res[i] = cap
    cst[i] = c
    nxt[i] = -1
    if first[u] < 0:
        first[u] = i
    else:
        nxt[tail[u]] = i
    tail[u] = i
    to_[i + 1] = u
    res[i + 1] = 0
    cst[i + 1] = -c
    nxt[i + 1] = -1
    if first[v] < 0:
        first[v] = i + 1
    else:
        nxt[tail[v]] = i + 1
    tail[v] = i + 1
    return i


cdef bint dijkstra(
    int size,
    int src,
    int snk,
    int* first,
    int* nxt,
    int* to_,
    i64* res,
    int* cst,
    i64* pi,
    i64* dist,
    int* pred,
    Heap* h,
) nogil:
    cdef int v, u, i
    cdef i64 d, base, nd
    for v in range(size):
        dist[v] = INF
        pred[v] = -1
    dist[src] = 0
    h.size = 0
    heap_push(h, 0, src)
    while h.size > 0:
        heap_pop(h, &d, &u)
        if d > dist[u]:
            continue
        if u == snk:
            return True
        base = d + pi[u]
        i = first[u]
        while i >= 0:
            if res[i] > 0:
                v = to_[i]
                nd = base + cst[i] - pi[v]
                if nd < dist[v]:
                    dist[v] = nd
                    pred[v] = i
                    heap_push(h, nd, v)
            i = nxt[i]
    return dist[snk] < INF


cdef i64 augment(
    i64 limit,
    int size,
    int src,
    int snk,
    int* to_,
    i64* res,
    int* pred,
    i64* pi,
    i64* dist,
) nogil:
    cdef i64 amt = limit
    cdef int v = snk
    cdef int i, w
    while v != src:
        i = pred[v]
        if res[i] < amt:
            amt = res[i]
        v = to_[i ^ 1]
    v = snk
    while v != src:
        i = pred[v]
        res[i] -= amt
        res[i ^ 1] += amt
        v = to_[i ^ 1]
    cdef i64 d_snk = dist[snk]
    for w in range(size):
        pi[w] += dist[w] if dist[w] < d_snk else d_snk
    return amt


def solve(
    int n,
    ob_tail,
    ob_head,
    ob_cap,
    t_ptr,
    t_node,
    t_cap,
    a_ptr,
    a_node,
    a_cap,
    budget,
):
    """Run both phases and report flows; see the pure-Python twin for docs."""
    cdef int n_ob = len(ob_tail)
    cdef int n_t = len(t_node)
    cdef int n_a = len(a_node)
    cdef int n_stages = len(t_ptr) - 1
    cdef int src = n
    cdef int snk = n + 1
    cdef int size = n + 2
    cdef int max_arcs = n_ob + n + n_t + n_a
    cdef int m2 = 2 * max_arcs + 2

    cdef int* to_ = <int*>malloc(m2 * sizeof(int))
    cdef i64* res = <i64*>malloc(m2 * sizeof(i64))
    cdef int* cst = <int*>malloc(m2 * sizeof(int))
    cdef int* nxt = <int*>malloc(m2 * sizeof(int))
    cdef int* first = <int*>malloc(size * sizeof(int))
    cdef int* tail = <int*>malloc(size * sizeof(int))
    cdef i64* excess = <i64*>malloc(size * sizeof(i64))
    cdef i64* pi = <i64*>malloc(size * sizeof(i64))
    cdef i64* dist = <i64*>malloc(size * sizeof(i64))
    cdef int* pred = <int*>malloc(size * sizeof(int))
    cdef int* ob_arc = <int*>malloc((n_ob + 1) * sizeof(int))
    cdef int* aux_arc = <int*>malloc((n + 1) * sizeof(int))
    cdef int* t_arc = <int*>malloc((n_t + 1) * sizeof(int))
    cdef int* a_arc = <int*>malloc((n_a + 1) * sizeof(int))
    cdef Heap heap
    heap.d = <i64*>malloc((m2 + 4) * sizeof(i64))
    heap.u = <int*>malloc((m2 + 4) * sizeof(int))
    heap.size = 0

    if (
        to_ == NULL or res == NULL or cst == NULL or nxt == NULL
        or first == NULL or tail == NULL or excess == NULL or pi == NULL
        or dist == NULL or pred == NULL or ob_arc == NULL or aux_arc == NULL
        or t_arc == NULL or a_arc == NULL or heap.d == NULL or heap.u == NULL
    ):
        free(to_); free(res); free(cst); free(nxt); free(first); free(tail)
        free(excess); free(pi); free(dist); free(pred); free(ob_arc)
        free(aux_arc); free(t_arc); free(a_arc); free(heap.d); free(heap.u)
        raise MemoryError()

    cdef int n_arc = 0
    cdef int n_aux = 0
    cdef int k, v, u, s, j, i
    cdef i64 cap, remaining, pushed, pi_max, pi_min, d_snk

    try:
        for v in range(size):
            first[v] = -1
            tail[v] = -1
            excess[v] = 0
            pi[v] = 0

        # Obligation arcs enter saturated; the imbalance they leave behind is
        # exactly each node's net position.
        for k in range(n_ob):
            u = ob_tail[k]
            v = ob_head[k]
            cap = ob_cap[k]
            i = add_arc(u, v, cap, -1, to_, res, cst, nxt, first, tail, &n_arc)
            ob_arc[k] = i
            res[i] = 0
            res[i + 1] = cap
            excess[v] += cap
            excess[u] -= cap

        # Phase 1: rebalance the saturation imbalances at minimum cost.
        for v in range(n):
            if excess[v] > 0:
                aux_arc[n_aux] = add_arc(
                    src, v, excess[v], 0, to_, res, cst, nxt, first, tail, &n_arc
                )
                n_aux += 1
            elif excess[v] < 0:
                aux_arc[n_aux] = add_arc(
                    v, snk, -excess[v], 0, to_, res, cst, nxt, first, tail, &n_arc
                )
                n_aux += 1
        while dijkstra(size, src, snk, first, nxt, to_, res, cst, pi, dist, pred, &heap):
            augment(INF, size, src, snk, to_, res, pred, pi, dist)
        for k in range(n_aux):
            i = aux_arc[k]
            res[i] = 0
            res[i ^ 1] = 0

        cycle_ob_flow = [res[ob_arc[k] ^ 1] for k in range(n_ob)]

        # Phase 2: inject liquidity along debt-clearing chains, one currency
        # at a time. A path is worth taking only while its true cost is
        # negative.
        remaining = INF if budget < 0 else <i64>budget
        tender_flow = [0] * n_t
        accept_flow = [0] * n_a
        stage_liquidity = [0] * n_stages
        for s in range(n_stages):
            for j in range(t_ptr[s], t_ptr[s + 1]):
                t_arc[j] = add_arc(
                    src, t_node[j], t_cap[j], 0, to_, res, cst, nxt, first, tail, &n_arc
                )
            for j in range(a_ptr[s], a_ptr[s + 1]):
                cap = a_cap[j]
                if cap < 0:
                    cap = INF
                a_arc[j] = add_arc(
                    a_node[j], snk, cap, 0, to_, res, cst, nxt, first, tail, &n_arc
                )
            if n > 0:
                pi_max = pi[0]
                pi_min = pi[0]
                for v in range(1, n):
                    if pi[v] > pi_max:
                        pi_max = pi[v]
                    if pi[v] < pi_min:
                        pi_min = pi[v]
                pi[src] = pi_max
                pi[snk] = pi_min
            while remaining > 0 and dijkstra(
                size, src, snk, first, nxt, to_, res, cst, pi, dist, pred, &heap
            ):
                if dist[snk] - pi[src] + pi[snk] >= 0:
                    break
                pushed = augment(remaining, size, src, snk, to_, res, pred, pi, dist)
                stage_liquidity[s] += pushed
                remaining -= pushed
            for j in range(t_ptr[s], t_ptr[s + 1]):
                i = t_arc[j]
                tender_flow[j] = res[i ^ 1]
                res[i] = 0
                res[i ^ 1] = 0
            for j in range(a_ptr[s], a_ptr[s + 1]):
                i = a_arc[j]
                accept_flow[j] = res[i ^ 1]
                res[i] = 0
                res[i ^ 1] = 0

        final_ob_flow = [res[ob_arc[k] ^ 1] for k in range(n_ob)]
        return cycle_ob_flow, final_ob_flow, tender_flow, accept_flow, stage_liquidity
    finally:
        free(to_); free(res); free(cst); free(nxt); free(first); free(tail)
        free(excess); free(pi); free(dist); free(pred); free(ob_arc)
        free(aux_arc); free(t_arc); free(a_arc); free(heap.d); free(heap.u)
