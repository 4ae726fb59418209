# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, you can obtain one at http://mozilla.org/MPL/2.0/.

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

HINGE = "hinge"
LOGISTIC = "logistic"

LOSS_KINDS = (HINGE, LOGISTIC)


class UnknownLoss(ValueError):
    """Happens when a loss kind isn't hinge or logistic."""


@dataclass(frozen=True)
class Loss:
    """A margin loss l(y, t) that is convex and M-Lipschitz in t.

    Both kinds are 1-Lipschitz in the margin argument.
    """

    kind: str
    lipschitz: float = 1.0

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise UnknownLoss(f"Unknown loss {self.kind!r}")

    def value(self, y, t):
        z = np.asarray(y) * np.asarray(t)
        if self.kind == HINGE:
            return np.maximum(0.0, 1.0 - z)
        return np.logaddexp(0.0, -z)

    def derivative(self, y, t):
        """d/dt l(y, t); for hinge the subgradient that is 0 at the kink."""
        y = np.asarray(y, dtype=float)
        z = y * np.asarray(t)
        if self.kind == HINGE:
            return np.where(z < 1.0, -y, 0.0)
        return -y * expit(-z)

    def to_dict(self):
        return {"kind": self.kind, "lipschitz": self.lipschitz}

    @classmethod
    def from_dict(cls, data):
        return cls(kind=data["kind"], lipschitz=float(data.get("lipschitz", 1.0)))


def get_loss(kind):
    if isinstance(kind, Loss):
        return kind
    return Loss(kind)
