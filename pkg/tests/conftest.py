from fractions import Fraction

import pytest

from fpplab.geometry import Box, DomainSpec


@pytest.fixture
def square_spec():
    """Unit square with inlet on the left edge, outlet on the right edge."""
    return DomainSpec.make(
        2,
        [Box.make([0, 0], [1, 1])],
        gamma1=[Box.make(["-0.25", 0], [0, 1])],
        gamma2=[Box.make([1, 0], ["1.25", 1])],
    )


@pytest.fixture
def hourglass_spec():
    """Two unit chambers joined by a neck of width 0.2.

    The neck is 0.6 long so that the chambers' 1/n shells never overlap
    across it at the scales the experiments use (they would for n < 10 with
    a short neck, hiding the pinch entirely).
    """
    return DomainSpec.make(
        2,
        [
            Box.make([0, 0], [1, 1]),
            Box.make([1, "0.41"], ["1.6", "0.61"]),
            Box.make(["1.6", 0], ["2.6", 1]),
        ],
        gamma1=[Box.make(["-0.25", 0], [0, 1])],
        gamma2=[Box.make(["2.6", 0], ["2.85", 1])],
    )
