"""Training kernels with a compiled core and a pure-numpy fallback.

The compiled extension (``codelen._fast``) is selected at import when it is
available; set ``CODELEN_BACKEND=numpy`` or ``CODELEN_BACKEND=fast`` to force
a choice.  Both backends implement the same function set; results agree to
floating-point roundoff, and every backend is individually deterministic
(same inputs, same bytes out), which is what the sender/receiver protocol
relies on.

``blas_single_thread`` pins BLAS pools to one thread so matrix products do
not depend on the host's core count.
"""

from __future__ import annotations

import contextlib
import os

from threadpoolctl import threadpool_limits

from . import numpy_backend

try:
    from codelen import _fast  # type: ignore[attr-defined]
except ImportError:
    _fast = None

_FORCED = os.environ.get("CODELEN_BACKEND", "").strip().lower()
if _FORCED == "numpy":
    _active = numpy_backend
elif _FORCED == "fast":
    if _fast is None:
        raise ImportError(
            "CODELEN_BACKEND=fast but the compiled extension is not available; "
            "reinstall with the extension built or unset CODELEN_BACKEND"
        )
    _active = _fast
else:
    _active = _fast if _fast is not None else numpy_backend

ACT_NONE = numpy_backend.ACT_NONE
ACT_RELU = numpy_backend.ACT_RELU
ACT_TANH = numpy_backend.ACT_TANH


def backend_name() -> str:
    return _active.NAME


def available_backends() -> list[str]:
    names = ["numpy"]
    if _fast is not None:
        names.insert(0, "fast")
    return names


def get_backend(name: str | None = None):
    """Return the active backend module, or a specific one by name."""
    if name is None:
        return _active
    if name == "numpy":
        return numpy_backend
    if name == "fast":
        if _fast is None:
            raise ImportError("compiled backend not built")
        return _fast
    raise ValueError(f"unknown backend {name!r}")


@contextlib.contextmanager
def use_backend(name: str):
    """Temporarily swap the active backend (for tests and benchmarks)."""
    global _active
    previous = _active
    _active = get_backend(name)
    try:
        yield _active
    finally:
        _active = previous


def blas_single_thread():
    """Context manager pinning BLAS thread pools to 1 thread."""
    return threadpool_limits(limits=1, user_api="blas")


def add_bias_act(z, b, kind):
    return _active.add_bias_act(z, b, kind)


def act_backward(da, a, kind):
    return _active.act_backward(da, a, kind)


def colsum(m):
    return _active.colsum(m)


def log_softmax(logits):
    return _active.log_softmax(logits)


def nll_grad(log_probs, labels):
    return _active.nll_grad(log_probs, labels)


def adam_step(p, g, m, v, t, lr, beta1, beta2, eps):
    return _active.adam_step(p, g, m, v, t, lr, beta1, beta2, eps)


def sgd_step(p, g, lr):
    return _active.sgd_step(p, g, lr)
