"""Published update schedules, transcribed cell by cell.

Each entry maps ``(variable, (dk, dl))`` relative to the block anchor to
``(count, framed)``; ``framed`` marks unknowns relaxed by that block.
"""

U, V, P = 0, 1, 2


def _col(count, items):
    return {(var, off): (count, framed) for var, off, framed in items}


def _uv(off, framed=False):
    return [(U, off, framed), (V, off, framed)]


STOKES_SCHEDULE = {}
for _count, _items in (
    (0, [(P, (0, 0), True)] + _uv((1, 1), True) + _uv((0, 2)) + _uv((1, 2)) + _uv((2, 1)) + _uv((2, 2))),
    (1, _uv((0, 1), True)),
    (2, _uv((-1, 1)) + _uv((1, 0), True) + _uv((2, 0))),
    (3, _uv((-1, 0), True)),
    (4, _uv((0, -1), True) + _uv((1, -1)) + _uv((-2, 0))),
    (5, _uv((-1, -1), True)),
    (6, _uv((0, -2)) + _uv((-1, -2)) + _uv((-2, -2)) + _uv((-2, -1))),
):
    STOKES_SCHEDULE.update(_col(_count, _items))

E1, E2, E3 = 0, 1, 2
CURLCURL_SCHEDULE = {}
for _count, _items in (
    (0, [(E1, (0, 0), True), (E1, (0, 1), False), (E2, (0, 0), True), (E2, (1, 0), False), (E3, (0, 0), True)]),
    (1, [(E1, (-1, 0), True), (E2, (0, -1), True), (E3, (-1, 0), False), (E3, (-1, -1), True),
         (E3, (0, -1), False)]),
    (2, [(E1, (-1, -1), False), (E2, (-1, -1), False)]),
):
    CURLCURL_SCHEDULE.update(_col(_count, _items))
