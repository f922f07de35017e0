"""Minimal fully connected feed-forward network recorded on the AD tape.

One hidden layer, tanh activation on every neuron.  The coefficient vector
is flat so optimizer state lines up with it directly; layout is
input->hidden weights row-major, hidden biases, hidden->output weights
row-major, output biases.
"""

from dataclasses import dataclass

import numpy as np

from .ad import Vec, tanh

LANES_PER_INTERSECTION = 12   # 4 incoming roads x 3 lanes
SLOTS_PER_LANE = 5            # nearest vehicles fed per lane


@dataclass(frozen=True)
class NetSpec:
    n_in: int
    n_hidden: int
    n_out: int

    def __post_init__(self):
        if min(self.n_in, self.n_hidden, self.n_out) < 1:
            raise ValueError("all layer sizes must be >= 1")

    @property
    def coefficient_count(self):
        return ((self.n_in + 1) * self.n_hidden
                + (self.n_hidden + 1) * self.n_out)

    def slices(self):
        """(w1, b1, w2, b2) index ranges into the flat coefficient vector."""
        n_w1 = self.n_in * self.n_hidden
        n_b1 = self.n_hidden
        n_w2 = self.n_hidden * self.n_out
        o = 0
        w1 = slice(o, o + n_w1); o += n_w1
        b1 = slice(o, o + n_b1); o += n_b1
        w2 = slice(o, o + n_w2); o += n_w2
        b2 = slice(o, o + self.n_out)
        return w1, b1, w2, b2


def coefficient_count(i, h):
    """Coefficients of the signal-control net on a grid with ``i``
    intersections and ``h`` hidden neurons: (60 i + 1) h + (h + 1) i."""
    if i < 1 or h < 1:
        raise ValueError("need at least one intersection and hidden neuron")
    return (60 * i + 1) * h + (h + 1) * i


def spec_for_grid(i, h):
    """NetSpec for ``i`` intersections: 5 inputs per lane, 12 lanes per
    intersection, one output per intersection."""
    return NetSpec(n_in=SLOTS_PER_LANE * LANES_PER_INTERSECTION * i,
                   n_hidden=h, n_out=i)


def init_standard_normal(spec, seed):
    """Standard-normal coefficient draw, deterministic per seed."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal(spec.coefficient_count)


def forward(spec, params, inputs):
    """Tape-recorded forward pass.

    params: Vec of length spec.coefficient_count (typically registered
    inputs so the simulation gradient reaches the coefficients).
    inputs: Vec of length spec.n_in.  Returns Vec of length spec.n_out,
    each value in (-1, 1).
    """
    if len(inputs) != spec.n_in:
        raise ValueError(f"expected {spec.n_in} inputs, got {len(inputs)}")
    if len(params) != spec.coefficient_count:
        raise ValueError("coefficient vector length mismatch")
    w1, b1, w2, b2 = spec.slices()
    hidden = []
    for j in range(spec.n_hidden):
        row = params[w1][j * spec.n_in:(j + 1) * spec.n_in]
        z = (row * inputs).sum() + params[b1][j]
        hidden.append(tanh(z))
    hidden = Vec.from_vars(hidden)
    outputs = []
    for j in range(spec.n_out):
        row = params[w2][j * spec.n_hidden:(j + 1) * spec.n_hidden]
        z = (row * hidden).sum() + params[b2][j]
        outputs.append(tanh(z))
    return Vec.from_vars(outputs)


def forward_ref(spec, params, inputs):
    """Plain numpy twin of :func:`forward` for reference models."""
    params = np.asarray(params, dtype=np.float64)
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.shape[0] != spec.n_in or params.shape[0] != spec.coefficient_count:
        raise ValueError("shape mismatch")
    w1, b1, w2, b2 = spec.slices()
    W1 = params[w1].reshape(spec.n_hidden, spec.n_in)
    W2 = params[w2].reshape(spec.n_out, spec.n_hidden)
    h = np.tanh(W1 @ inputs + params[b1])
    return np.tanh(W2 @ h + params[b2])


def save_params(path, spec, values):
    """Flat text format: 3 header lines (n_in, n_hidden, n_out), then one
    coefficient per line in layout order."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] != spec.coefficient_count:
        raise ValueError("coefficient vector length mismatch")
    with open(path, "w") as f:
        f.write(f"{spec.n_in}\n{spec.n_hidden}\n{spec.n_out}\n")
        for v in values:
            f.write(f"{float(v)!r}\n")


def load_params(path):
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    spec = NetSpec(int(lines[0]), int(lines[1]), int(lines[2]))
    values = np.array([float(x) for x in lines[3:]], dtype=np.float64)
    if values.shape[0] != spec.coefficient_count:
        raise ValueError("coefficient count does not match header")
    return spec, values
