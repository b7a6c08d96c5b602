"""Kernel backend selection.

Orbit iteration is the only hot loop in the package, so it is isolated
behind a two-function interface with two interchangeable backends:

* ``compiled`` -- Cython extension (scalar C loops, nogil),
* ``pure``     -- NumPy fallback, always available.

``TORUSDYN_KERNEL`` picks one explicitly (``compiled``/``pure``); the
default is the compiled one when the extension imported, else pure.
Results are deterministic within a backend; across backends the last
bits of libm/SIMD trig may differ.
"""

import os

import numpy as np

from . import pure as _pure

try:
    from . import _core as _compiled
except ImportError:
    _compiled = None


class Step:
    """One program step: kind 0 base, 1 affine, 2 inverse-of-base."""

    __slots__ = ("kind", "mat", "trans", "pterms", "qterms")

    def __init__(self, kind, mat=(1, 0, 0, 1), trans=(0.0, 0.0), pterms=(), qterms=()):
        self.kind = kind
        self.mat = tuple(int(v) for v in mat)
        self.trans = (float(trans[0]), float(trans[1]))
        self.pterms = tuple(tuple(float(v) for v in t) for t in pterms)
        self.qterms = tuple(tuple(float(v) for v in t) for t in qterms)


class Program:
    """An immutable step list plus a lazily packed array form."""

    __slots__ = ("steps", "_packed")

    def __init__(self, steps):
        self.steps = tuple(steps)
        self._packed = None

    def packed(self):
        if self._packed is None:
            ns = len(self.steps)
            kinds = np.zeros(ns, dtype=np.int64)
            mats = np.zeros((ns, 4), dtype=np.float64)
            trans = np.zeros((ns, 2), dtype=np.float64)
            poff = np.zeros(ns + 1, dtype=np.int64)
            qoff = np.zeros(ns + 1, dtype=np.int64)
            prows = []
            qrows = []
            for i, s in enumerate(self.steps):
                kinds[i] = s.kind
                mats[i] = s.mat
                trans[i] = s.trans
                prows.extend(s.pterms)
                qrows.extend(s.qterms)
                poff[i + 1] = len(prows)
                qoff[i + 1] = len(qrows)
            pterms = np.array(prows, dtype=np.float64).reshape(len(prows), 4)
            qterms = np.array(qrows, dtype=np.float64).reshape(len(qrows), 4)
            self._packed = (kinds, mats, trans, poff, np.ascontiguousarray(pterms),
                            qoff, np.ascontiguousarray(qterms))
        return self._packed

    def is_affine(self):
        """True when no step involves trig terms (images of lines stay PL)."""
        return all(s.kind == 1 or (not s.pterms and not s.qterms) for s in self.steps)


class _PureBackend:
    name = "pure"

    @staticmethod
    def apply_program(prog, x, y):
        return _pure.apply_program(prog.steps, x, y)

    @staticmethod
    def run_orbits(prog, x0, y0, n, nmid):
        return _pure.run_orbits(prog.steps, x0, y0, n, nmid)


class _CompiledBackend:
    name = "compiled"

    @staticmethod
    def apply_program(prog, x, y):
        return _compiled.apply_program_packed(*prog.packed(), x, y)

    @staticmethod
    def run_orbits(prog, x0, y0, n, nmid):
        return _compiled.run_orbits_packed(*prog.packed(), x0, y0, n, nmid)


def _select():
    choice = os.environ.get("TORUSDYN_KERNEL", "auto")
    if choice == "pure":
        return _PureBackend
    if choice == "compiled":
        if _compiled is None:
            raise ImportError("TORUSDYN_KERNEL=compiled but the extension is not built")
        return _CompiledBackend
    if choice != "auto":
        raise ValueError("TORUSDYN_KERNEL must be 'auto', 'compiled' or 'pure'")
    return _CompiledBackend if _compiled is not None else _PureBackend


backend = _select()


def backend_name():
    return backend.name
