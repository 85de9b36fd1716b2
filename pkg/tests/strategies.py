"""Hypothesis strategies for random PiecewiseBV functions."""

from hypothesis import strategies as st

from qidlaws.bv import PiecewiseBV

coord = st.integers(-40, 40).map(lambda k: k / 4)
weight = st.floats(-3, 3, allow_nan=False).filter(lambda w: abs(w) > 1e-3)


@st.composite
def segments(draw):
    left = draw(coord)
    length = draw(st.integers(1, 12)) / 4
    return (left, left + length, draw(weight))


@st.composite
def bv_functions(draw, max_atoms=4, max_segments=3, nondecreasing=False):
    w = weight.map(abs) if nondecreasing else weight
    atoms = draw(st.lists(st.tuples(coord, w), max_size=max_atoms))
    segs = draw(st.lists(segments(), max_size=max_segments))
    if nondecreasing:
        segs = [(a, b, abs(s)) for a, b, s in segs]
    return PiecewiseBV(atoms, segs)
