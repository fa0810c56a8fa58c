"""Pure-Python rear-stage kernels (fallback for the compiled ``_ckernels``).

Every kernel takes a problem flattened into integer arrays, with tasks
addressed by position ``0..n-1``:

    win_ptr   windows of task ``i`` are ``win_ptr[i]:win_ptr[i+1]`` (sorted)
    win_start, win_end
    dur, prof per-task duration and profit
    ct        ``ct[a][b]`` seconds needed between the end of ``a`` and start of ``b``

and returns ``(starts, ops)`` or ``(profit, starts, ops)`` where ``starts[i]``
is ``-1`` for unplaced tasks and ``ops`` counts inner-loop work.
"""

NEG = -(1 << 62)


def _earliest_start(i, t, win_ptr, win_start, win_end, dur):
    d = dur[i]
    for w in range(win_ptr[i], win_ptr[i + 1]):
        s = win_start[w] if win_start[w] > t else t
        if s + d <= win_end[w]:
            return s
    return -1


def dp_solve(win_ptr, win_start, win_end, dur, prof, ct):
    """Max-profit start times for tasks taken in the given order.

    States are (last placed task, its end, profit). Starting a task as early
    as possible never hurts a successor, so each predecessor state yields at
    most one successor state. State ``y`` dominates ``x`` when it has at least
    the profit and ends early enough that every successor can start no later:
    ``end_y <= end_x`` for the same last task, ``end_y + slack <= end_x``
    otherwise, with ``slack`` the spread of transition times.
    """
    n = len(dur)
    ops = 0
    slack = 0
    if n > 1:
        lo = hi = None
        for a in range(n):
            for b in range(n):
                if a != b:
                    v = ct[a][b]
                    lo = v if lo is None or v < lo else lo
                    hi = v if hi is None or v > hi else hi
        slack = hi - lo

    s_last, s_end, s_prof, s_parent = [-1], [NEG], [0], [-1]
    pool = [0]
    for i in range(n):
        d, p = dur[i], prof[i]
        fresh = []
        for s in pool:
            ops += 1
            k = s_last[s]
            t = NEG if k < 0 else s_end[s] + ct[k][i]
            st = _earliest_start(i, t, win_ptr, win_start, win_end, dur)
            if st >= 0:
                fresh.append(len(s_last))
                s_last.append(i)
                s_end.append(st + d)
                s_prof.append(s_prof[s] + p)
                s_parent.append(s)
        if not fresh:
            continue
        cand = pool + fresh
        cand.sort(key=lambda x: (s_end[x], -s_prof[x], x))
        ops += len(cand)
        keep = []
        best_same = {}
        best_cross = -1
        ptr = 0
        for pos, x in enumerate(cand):
            if x == 0:
                keep.append(x)
                continue
            ex = s_end[x]
            while ptr < pos and s_end[cand[ptr]] + slack <= ex:
                y = cand[ptr]
                if y != 0 and s_prof[y] > best_cross:
                    best_cross = s_prof[y]
                ptr += 1
            px, lx = s_prof[x], s_last[x]
            if best_cross >= px or best_same.get(lx, -1) >= px:
                continue
            keep.append(x)
            if px > best_same.get(lx, -1):
                best_same[lx] = px
        pool = sorted(keep)

    best = 0
    for x in pool:
        if (s_prof[x], -s_end[x], -x) > (s_prof[best], -s_end[best], -best):
            best = x
    starts = [-1] * n
    x = best
    while x > 0:
        starts[s_last[x]] = s_end[x] - dur[s_last[x]]
        x = s_parent[x]
    return s_prof[best], starts, ops


def place_in_order(win_ptr, win_start, win_end, dur, prof, ct):
    """Single pass: each task starts as early as the previous placement allows."""
    n = len(dur)
    starts = [-1] * n
    last, t, ops = -1, NEG, 0
    for i in range(n):
        ops += 1
        st = _earliest_start(i, NEG if last < 0 else t + ct[last][i], win_ptr, win_start, win_end, dur)
        if st >= 0:
            starts[i] = st
            last, t = i, st + dur[i]
    return starts, ops


def _insertion(i, ps, pe, pt, win_ptr, win_start, win_end, dur, ct):
    """Earliest start for ``i`` in a gap of the chronological plan, or -1."""
    d = dur[i]
    ops = 0
    m = len(ps)
    for w in range(win_ptr[i], win_ptr[i + 1]):
        ws, we = win_start[w], win_end[w]
        lo_k, hi_k = 0, m
        while lo_k < hi_k:
            mid = (lo_k + hi_k) // 2
            if ps[mid] < ws:
                lo_k = mid + 1
            else:
                hi_k = mid
        for k in range(lo_k, m + 1):
            ops += 1
            s = ws if k == 0 else max(ws, pe[k - 1] + ct[pt[k - 1]][i])
            if s + d > we:
                break
            if k == m or s + d + ct[i][pt[k]] <= ps[k]:
                return s, we, w, k, ops
    return -1, 0, -1, -1, ops


def hadrt(win_ptr, win_start, win_end, dur, prof, ct, mean_duration, fixed):
    """Residual-density constructive heuristic.

    Tasks with ``fixed[i] >= 0`` are pre-placed at that start. Each round
    scores every still-feasible free task by
    ``(placed + 1) + (ET - window_end) / mean_duration`` where ``ET`` is the
    latest window end among unconsidered tasks, inserts the best one at its
    earliest start, and drops tasks that no longer fit. Ties go to the lower
    position.
    """
    n = len(dur)
    starts = [-1] * n
    remaining = [True] * n
    pinned = sorted((fixed[i], i) for i in range(n) if fixed[i] >= 0)
    ps = [s for s, _ in pinned]
    pe = [s + dur[i] for s, i in pinned]
    pt = [i for _, i in pinned]
    for s, i in pinned:
        starts[i] = s
        remaining[i] = False
    ops = 0
    count = len(pinned)
    while True:
        et = NEG
        for i in range(n):
            if remaining[i]:
                for w in range(win_ptr[i], win_ptr[i + 1]):
                    ops += 1
                    if win_end[w] > et:
                        et = win_end[w]
        best, best_f, best_s, best_k = -1, 0.0, 0, 0
        for i in range(n):
            if not remaining[i]:
                continue
            s, we, _, k, c = _insertion(i, ps, pe, pt, win_ptr, win_start, win_end, dur, ct)
            ops += c
            if s < 0:
                remaining[i] = False
                continue
            f = (count + 1) + (et - we) / mean_duration
            if best < 0 or f > best_f:
                best, best_f, best_s, best_k = i, f, s, k
        if best < 0:
            break
        remaining[best] = False
        starts[best] = best_s
        ps.insert(best_k, best_s)
        pe.insert(best_k, best_s + dur[best])
        pt.insert(best_k, best)
        count += 1
    return starts, ops
