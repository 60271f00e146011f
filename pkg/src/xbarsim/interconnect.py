"""Crossbar readout with nonzero line resistance.

Every crosspoint contributes two nodes, one on the word-line side and one on
the bit-line side, joined by the device conductance; adjacent nodes along a
line are joined by per-segment wire conductances. Ideal sources drive the
word lines (column-0 end, or both ends under double biasing) and ideal
virtual grounds terminate the bit lines (row-(m-1) end, or both ends). The
resulting KCL system is sparse and symmetric positive definite; it is
factorized once per conductance matrix so repeated reads reuse the
factorization. Sides with zero wire resistance collapse to known potentials,
shrinking the unknown set; with both sides ideal the product reduces to
I = V^T G.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import as_matrix, as_vector
from .errors import ParameterError, ShapeError, SolverError

BIAS_SINGLE = "single"
BIAS_DOUBLE = "double"

RESIDUAL_RTOL = 1e-10
RESIDUAL_ABS = 1e-15  # amps, when outputs are all zero


@dataclass(frozen=True)
class LineResistanceParams:
    """Per-segment word/bit line resistances in ohms; (0, 0) means ideal wires."""

    r_word: float = 0.0
    r_bit: float = 0.0
    biasing: str = BIAS_SINGLE

    def __post_init__(self):
        if self.r_word < 0.0 or self.r_bit < 0.0:
            raise ParameterError("line resistances must be >= 0")
        if self.biasing not in (BIAS_SINGLE, BIAS_DOUBLE):
            raise ParameterError(f"biasing must be single or double, got {self.biasing!r}")

    @property
    def ideal(self) -> bool:
        return self.r_word == 0.0 and self.r_bit == 0.0


@dataclass(frozen=True)
class TileSpec:
    """Maximum sub-array size when splitting a crossbar into tiles."""

    max_rows: int
    max_cols: int

    def __post_init__(self):
        if self.max_rows < 1 or self.max_cols < 1:
            raise ParameterError("tile dimensions must be >= 1")


@dataclass
class SolveResult:
    """Bit-line termination currents, crosspoint potentials, and the KCL residual."""

    i_out: np.ndarray
    word_potentials: np.ndarray
    bit_potentials: np.ndarray
    residual: float


def residual_bound(i_out) -> float:
    scale = float(np.max(np.abs(i_out))) if np.size(i_out) else 0.0
    return max(RESIDUAL_RTOL * scale, RESIDUAL_ABS)


class CrossbarSystem:
    """Assembled and factorized KCL system for one conductance matrix.

    Reuse one instance for many input vectors: the matrix depends only on the
    conductances and wire parameters, the right-hand side only on the inputs.
    """

    def __init__(self, g, params: LineResistanceParams, factorize: bool = True):
        g = as_matrix(g, "G")
        if (g < 0.0).any():
            raise ParameterError("device conductances must be non-negative")
        self.g = g
        self.params = params
        self.m, self.n = g.shape
        if params.ideal and not g.any():
            raise SolverError("singular system: all wire resistances and conductances are zero")
        self._lu = None
        self._matrix = None
        self._source_nodes = None   # node index arrays driven by the inputs
        if not params.ideal:
            self._assemble()
            if factorize:
                self._ensure_lu()

    # -- assembly ---------------------------------------------------------

    def _assemble(self):
        m, n = self.m, self.n
        p = self.params
        double = p.biasing == BIAS_DOUBLE
        word_resistive = p.r_word > 0.0
        bit_resistive = p.r_bit > 0.0
        g_w = 1.0 / p.r_word if word_resistive else None
        g_b = 1.0 / p.r_bit if bit_resistive else None

        mn = m * n
        cell = np.arange(mn).reshape(m, n)
        if word_resistive and bit_resistive:
            widx, bidx = cell, cell + mn
            n_unknown = 2 * mn
        elif word_resistive:
            widx, bidx = cell, None
            n_unknown = mn
        else:
            widx, bidx = None, cell
            n_unknown = mn
        self._widx, self._bidx = widx, bidx
        self._n_unknown = n_unknown

        diag = np.zeros(n_unknown)
        rows: list[np.ndarray] = []
        cols: list[np.ndarray] = []
        vals: list[np.ndarray] = []

        def couple(a, b, g_edge):
            rows.append(a)
            cols.append(b)
            vals.append(-g_edge)
            rows.append(b)
            cols.append(a)
            vals.append(-g_edge)
            np.add.at(diag, a, g_edge)
            np.add.at(diag, b, g_edge)

        gd = self.g.ravel()
        if word_resistive and bit_resistive:
            couple(widx.ravel(), bidx.ravel(), gd)
        elif word_resistive:
            # Bit side pinned at 0 V: device conductance only loads the diagonal.
            np.add.at(diag, widx.ravel(), gd)
        else:
            # Word side pinned at the inputs: devices inject current (handled in rhs).
            np.add.at(diag, bidx.ravel(), gd)

        if word_resistive and n > 1:
            a = widx[:, :-1].ravel()
            couple(a, a + 1, np.full(a.size, g_w))
        if bit_resistive and m > 1:
            a = bidx[:-1, :].ravel()
            couple(a, a + n, np.full(a.size, g_b))

        # Source connections (word side) and ground terminations (bit side).
        src_nodes = []
        if word_resistive:
            src_nodes.append(widx[:, 0])
            if double:
                src_nodes.append(widx[:, n - 1])
            for nodes in src_nodes:
                np.add.at(diag, nodes, g_w)
        self._source_nodes = src_nodes
        self._g_w, self._g_b = g_w, g_b

        if bit_resistive:
            np.add.at(diag, bidx[m - 1, :], g_b)
            if double:
                np.add.at(diag, bidx[0, :], g_b)

        all_idx = np.arange(n_unknown)
        rows.append(all_idx)
        cols.append(all_idx)
        vals.append(diag)
        matrix = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n_unknown, n_unknown),
        ).tocsc()
        self._matrix = matrix

    def _ensure_lu(self):
        if self._lu is None:
            try:
                self._lu = spla.splu(self._matrix)
            except RuntimeError as exc:
                raise SolverError(f"sparse factorization failed: {exc}") from exc

    def _rhs(self, v_cols: np.ndarray) -> np.ndarray:
        """Right-hand side for input columns v_cols with shape (m, k)."""
        m, n = self.m, self.n
        k = v_cols.shape[1]
        rhs = np.zeros((self._n_unknown, k))
        if self.params.r_word > 0.0:
            for nodes in self._source_nodes:
                rhs[nodes, :] += self._g_w * v_cols
        else:
            # Devices inject from the pinned word potentials into the bit nodes.
            for j in range(n):
                rhs[self._bidx[:, j], :] += self.g[:, j][:, None] * v_cols
        return rhs

    # -- solving ------------------------------------------------------------

    def solve_many(self, v_cols):
        """Solve for several input vectors (columns of an (m, k) array).

        Returns (i_out (k, n), word potentials (k, m, n), bit potentials
        (k, m, n), residuals (k,)).
        """
        v_cols = np.asarray(v_cols, dtype=np.float64)
        if v_cols.ndim == 1:
            v_cols = v_cols[:, None]
        if v_cols.shape[0] != self.m:
            raise ShapeError(
                f"input length {v_cols.shape[0]} does not match {self.m} word lines"
            )
        if not np.all(np.isfinite(v_cols)):
            raise ValueError("input voltages contain non-finite entries")
        m, n = self.m, self.n
        k = v_cols.shape[1]

        if self.params.ideal:
            i_out = v_cols.T @ self.g
            wp = np.broadcast_to(v_cols.T[:, :, None], (k, m, n)).copy()
            bp = np.zeros((k, m, n))
            return i_out, wp, bp, np.zeros(k)

        self._ensure_lu()
        rhs = self._rhs(v_cols)
        x = self._lu.solve(rhs)
        for attempt in range(3):
            resid = self._matrix @ x - rhs
            worst = np.max(np.abs(resid), axis=0)
            i_out, wp, bp = self._extract(x, v_cols, k)
            bounds = np.array([residual_bound(i_out[s]) for s in range(k)])
            if (worst <= bounds).all():
                break
            if attempt == 2:
                raise SolverError(
                    f"KCL residual {worst.max():.3e} A exceeds the bound "
                    f"{bounds.min():.3e} A after iterative refinement"
                )
            x = x - self._lu.solve(resid)
        return i_out, wp, bp, worst

    def _extract(self, x, v_cols, k):
        m, n = self.m, self.n
        if self.params.r_word > 0.0:
            wp = x[self._widx.ravel(), :].T.reshape(k, m, n)
        else:
            wp = np.broadcast_to(v_cols.T[:, :, None], (k, m, n)).copy()
        if self.params.r_bit > 0.0:
            bp = x[self._bidx.ravel(), :].T.reshape(k, m, n)
            i_out = self._g_b * bp[:, m - 1, :]
            if self.params.biasing == BIAS_DOUBLE:
                i_out = i_out + self._g_b * bp[:, 0, :]
        else:
            bp = np.zeros((k, m, n))
            # Currents into the per-crosspoint virtual grounds, summed per column.
            i_out = np.einsum("kij,ij->kj", wp, self.g)
        return i_out, wp, bp

    def solve(self, v) -> SolveResult:
        v = as_vector(v, "V_applied")
        i_out, wp, bp, worst = self.solve_many(v[:, None])
        return SolveResult(i_out[0], wp[0], bp[0], float(worst[0]))

    def kcl_residual(self, word_potentials, bit_potentials, v) -> float:
        """Max KCL violation (amps) of the given potentials under this system."""
        if self.params.ideal:
            return 0.0
        parts = []
        if self.params.r_word > 0.0:
            parts.append(np.asarray(word_potentials, dtype=np.float64).ravel())
        if self.params.r_bit > 0.0:
            parts.append(np.asarray(bit_potentials, dtype=np.float64).ravel())
        x = np.concatenate(parts)[:, None]
        rhs = self._rhs(np.asarray(v, dtype=np.float64)[:, None])
        return float(np.max(np.abs(self._matrix @ x - rhs)))


def solve_crossbar(g, v_applied, params: LineResistanceParams) -> SolveResult:
    """One-shot nodal solve; see CrossbarSystem for the circuit model."""
    return CrossbarSystem(g, params).solve(v_applied)


def tile_and_solve(g, v_applied, params: LineResistanceParams, tiles: TileSpec) -> np.ndarray:
    """Split the array into independent sub-crossbars and sum currents digitally.

    Row/column blocks are at most (max_rows, max_cols); each block is solved
    as its own crossbar with its own drivers and terminations, and partial
    bit-line currents are summed per output column.
    """
    g = as_matrix(g, "G")
    v = as_vector(v_applied, "V_applied")
    if v.shape[0] != g.shape[0]:
        raise ShapeError(f"input length {v.shape[0]} does not match {g.shape[0]} rows")
    m, n = g.shape
    out = np.zeros(n)
    for r0 in range(0, m, tiles.max_rows):
        r1 = min(r0 + tiles.max_rows, m)
        for c0 in range(0, n, tiles.max_cols):
            c1 = min(c0 + tiles.max_cols, n)
            result = solve_crossbar(g[r0:r1, c0:c1], v[r0:r1], params)
            out[c0:c1] += result.i_out
    return out
