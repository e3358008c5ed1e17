import numpy as _np
from cached_property import cached_property


class frange:
    """
    A grid of ``num`` floats from start to stop, both inclusive, spaced
    linearly or logarithmically. The values are only materialized on first
    use, so grids can be passed around and sliced cheaply.
    Example
    -------
    Step sizes over (0, c] for a grid search, skipping the origin::
        $ etas = frange(0, c, 100_000, include_start=False)
        $ len(etas)  # 100000, etas[0] == c / 100000, etas[-1] == c
    Log-spaced probe radii::
        $ radii = frange(1e-2, 5.0, 20, log=True)
        $ for radius in radii:
        $     print(radius)
    """

    def __init__(self, start, stop, num, log=False, include_start=True):
        """
        Parameters
        ----------
        start : float
            first point (skipped when include_start is False)
        stop : float
            last point
        num : int
            number of points produced
        log : bool
            space the points geometrically; start and stop must be positive
        """
        if num < 1:
            raise ValueError("A grid needs at least one point")
        if log and (start <= 0 or stop <= 0):
            raise ValueError("Log-spaced grids need positive endpoints")
        self.slice = slice(start, stop, int(num))
        self.log = log
        self.include_start = include_start

    @property
    def start(self):
        return self.slice.start

    @property
    def stop(self):
        return self.slice.stop

    @property
    def num(self):
        return self.slice.step

    @property
    def step(self):
        """Spacing between neighbours (a ratio for log grids)."""
        intervals = self.num - 1 if self.include_start else self.num
        if intervals == 0:
            return 0.0
        if self.log:
            return (self.stop / self.start) ** (1 / intervals)
        return (self.stop - self.start) / intervals

    @cached_property
    def array(self):
        return self.get_array()

    def __getitem__(self, idx):
        if idx == -1:
            return self.stop

        return self.array[idx]

    def get_array(self):
        """
        Returns
        -------
        array : ndarray
            The grid points in increasing order of index.
        """
        count = self.num if self.include_start else self.num + 1
        if self.log:
            points = _np.geomspace(self.start, self.stop, count)
        else:
            points = _np.linspace(self.start, self.stop, count)
        return points if self.include_start else points[1:]

    def __len__(self):
        return self.num

    def __iter__(self):
        return iter(self.array.tolist())
