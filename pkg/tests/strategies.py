"""Hypothesis strategies shared by the test modules."""

import numpy as np
from hypothesis import strategies as st

from liftlab import validate_joint


@st.composite
def joints(draw, max_s=5, max_x=7, min_s=1, min_x=1):
    """Full-support joints with cells bounded away from zero."""
    ns = draw(st.integers(min_s, max_s))
    nx = draw(st.integers(min_x, max_x))
    cells = draw(
        st.lists(st.floats(0.01, 1.0, allow_nan=False), min_size=ns * nx, max_size=ns * nx)
    )
    a = np.array(cells).reshape(ns, nx)
    return validate_joint(a / a.sum())


budgets = st.tuples(st.floats(0.05, 3.0), st.floats(0.05, 3.0))
