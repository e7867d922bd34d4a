"""Fuchsian Schottky groups: ping-pong disks, word enumeration, Poincare
series and the exponent of convergence delta.

A group of rank g is given by 2g closed disks orthogonal to the unit circle
with pairwise disjoint boundary arcs, and g hyperbolic isometries where
generator k maps the exterior of its source disk onto the interior of its
target disk.  delta = dim_H(Lambda_Gamma) is estimated two independent ways:

* series bisection: smallest s where consecutive word-length shells of
  sum_gamma e^{-s d(o, gamma o)} decay by a factor < 1 - margin;
* orbit-count slope: least squares slope of log #{gamma : d(o, gamma o) <= T}.

Displacements use cosh d(i, gamma i) = ||gamma||_F^2 / 2 in the half-plane.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, GroupDataError, PrecisionError, ReductionError, TruncationError
from .geometry import (
    Isometry,
    as_complex,
    as_vec,
    geodesic_between,
    mobius_boundary_action,
)

DEFAULT_ORBIT_BUDGET = 5_000_000


def _angdiff(a, b):
    """Absolute angular difference on the circle."""
    return np.abs((a - b + np.pi) % (2.0 * np.pi) - np.pi)


@dataclass(frozen=True)
class SchottkyDisk:
    """Disk orthogonal to the unit circle, stored as circle + boundary arc."""

    center: complex
    radius: float
    arc_center: float
    arc_halfwidth: float

    @classmethod
    def from_arc(cls, arc_center, arc_halfwidth):
        p1 = np.exp(1j * (arc_center - arc_halfwidth))
        p2 = np.exp(1j * (arc_center + arc_halfwidth))
        c, r = geodesic_between(as_vec(p1), as_vec(p2))
        if c is None:
            raise GroupDataError("Schottky disk arc cannot be a half-circle")
        return cls(complex(c), float(r), float(arc_center), float(arc_halfwidth))

    def contains(self, w, margin=0.0):
        """Interior membership of complex disk points, vectorized."""
        return np.abs(w - self.center) < self.radius - margin

    def image_under(self, iso: Isometry):
        """Image disk under an isometry (arcs map to arcs)."""
        p_lo = np.exp(1j * (self.arc_center - self.arc_halfwidth))
        p_hi = np.exp(1j * (self.arc_center + self.arc_halfwidth))
        mid = np.exp(1j * self.arc_center)
        q_lo = iso.apply_complex(p_lo)
        q_hi = iso.apply_complex(p_hi)
        q_mid = iso.apply_complex(mid)
        a_lo, a_hi, a_mid = np.angle(q_lo), np.angle(q_hi), np.angle(q_mid)
        half = 0.5 * _angdiff(a_lo, a_hi)
        # pick the arc center on q_mid's side
        cand = 0.5 * (a_lo + a_hi)
        if _angdiff(cand, a_mid) > half:
            cand = cand + np.pi
        return SchottkyDisk.from_arc(cand % (2.0 * np.pi), half)


@dataclass(frozen=True)
class Word:
    """Reduced word over signed generator letters (+k = generator k, 1-based)."""

    letters: tuple

    def __post_init__(self):
        for a, b in zip(self.letters, self.letters[1:]):
            if a == -b:
                raise DomainError(f"word {self.letters} is not reduced")

    def __len__(self):
        return len(self.letters)


@dataclass(frozen=True)
class DeltaEstimate:
    delta: float
    stderr: float
    method: str
    truncation: int
    truncated: bool = False

    def __post_init__(self):
        if not 0.0 <= self.delta:
            raise DomainError("delta estimate must be nonnegative")


class SchottkyGroup:
    """Ping-pong group data: generators, paired disks, basepoint at the origin."""

    def __init__(self, generators, disks, pairing, n=1, validate=True):
        """pairing[k] = (source_disk_index, target_disk_index) for generator k."""
        self.generators = list(generators)
        self.disks = list(disks)
        self.pairing = [tuple(p) for p in pairing]
        self.n = n
        if len(self.disks) != 2 * len(self.generators):
            raise GroupDataError("need exactly 2 disks per generator")
        if sorted(i for p in self.pairing for i in p) != list(range(len(self.disks))):
            raise GroupDataError("pairing must hit every disk exactly once")
        # letter -> (matrix, disk the image lands in, disk the letter frees)
        self._letter_iso = {}
        for k, (src, tgt) in enumerate(self.pairing):
            self._letter_iso[k + 1] = (self.generators[k], tgt, src)
            self._letter_iso[-(k + 1)] = (self.generators[k].inverse(), src, tgt)
        if validate:
            self.validate()

    # -- construction helpers ------------------------------------------------

    @classmethod
    def cyclic(cls, length=2.0):
        """Cyclic group generated by one axis translation (quotient: cylinder)."""
        gamma = Isometry.axis_translation(length)
        r_half = np.exp(-length / 2.0)
        # half-plane circle |z| = r_half -> ball arc around -1
        src = _disk_from_halfplane_circle(r_half, around=-1.0)
        tgt = _disk_from_halfplane_circle(1.0 / r_half, around=+1.0)
        return cls([gamma], [src, tgt], [(0, 1)])

    @classmethod
    def symmetric_pair(cls, length=3.0):
        """Two-generator Fuchsian Schottky group with 4 symmetric disks.

        Generator 1 translates along the (-e1, e1) axis, generator 2 is its
        conjugate by the quarter rotation; disks sit at angles 0, pi/2, pi,
        3pi/2.  length > 2 log(8/pi) keeps the arcs disjoint.
        """
        g1 = Isometry.axis_translation(length)
        rot = Isometry.rotation(np.pi / 2.0)
        g2 = rot.compose(g1).compose(rot.inverse())
        r_half = np.exp(-length / 2.0)
        d_pi = _disk_from_halfplane_circle(r_half, around=-1.0)
        d_0 = _disk_from_halfplane_circle(1.0 / r_half, around=+1.0)
        d_32 = SchottkyDisk.from_arc(
            (d_pi.arc_center + np.pi / 2.0) % (2 * np.pi), d_pi.arc_halfwidth
        )
        d_12 = SchottkyDisk.from_arc(
            (d_0.arc_center + np.pi / 2.0) % (2 * np.pi), d_0.arc_halfwidth
        )
        return cls([g1, g2], [d_pi, d_0, d_32, d_12], [(0, 1), (2, 3)])

    @classmethod
    def trivial(cls):
        """The trivial group (free hyperbolic plane); no disks."""
        grp = cls.__new__(cls)
        grp.generators = []
        grp.disks = []
        grp.pairing = []
        grp.n = 1
        grp._letter_iso = {}
        return grp

    @property
    def rank(self):
        return len(self.generators)

    def letter_isometry(self, letter):
        return self._letter_iso[letter][0]

    def in_fundamental_domain(self, m):
        """True where ball points lie outside all open Schottky disks."""
        w = as_complex(np.asarray(m, dtype=float))
        ok = np.ones(w.shape, dtype=bool)
        for disk in self.disks:
            ok &= ~disk.contains(w)
        return ok

    def max_translation_length(self):
        return max((g.translation_length() for g in self.generators), default=0.0)

    def letter_target_disk(self, letter):
        """Index of the disk containing the image of the letter's ping-pong set."""
        return self._letter_iso[letter][1]

    def word_isometry(self, word: Word):
        mat = np.eye(2)
        for letter in word.letters:
            mat = mat @ self.letter_isometry(letter).matrix
        return Isometry.from_matrix(mat)

    # -- validation ----------------------------------------------------------

    def validate(self, n_samples=64, tol=1e-8):
        """Check disk disjointness and the ping-pong pairing numerically."""
        for i, di in enumerate(self.disks):
            for j in range(i + 1, len(self.disks)):
                dj = self.disks[j]
                gap = _angdiff(di.arc_center, dj.arc_center) - (
                    di.arc_halfwidth + dj.arc_halfwidth
                )
                if gap <= 0:
                    raise GroupDataError(
                        f"disks {i} and {j} overlap (arc gap {gap:.3e})"
                    )
        for k, (src, tgt) in enumerate(self.pairing):
            gen = self.generators[k]
            ds, dt = self.disks[src], self.disks[tgt]
            t = np.linspace(0.0, 2.0 * np.pi, n_samples, endpoint=False)
            rim = ds.center + ds.radius * np.exp(1j * t)
            rim = rim[np.abs(rim) < 1.0 - 1e-9]
            img = gen.apply_complex(rim)
            err = np.max(np.abs(np.abs(img - dt.center) - dt.radius))
            if err > tol:
                raise GroupDataError(
                    f"generator {k} does not map disk {src} rim onto disk {tgt} rim "
                    f"(defect {err:.3e})"
                )
            far = gen.apply_complex(np.array([0.0 + 0.0j]))
            if not dt.contains(far[0]):
                raise GroupDataError(
                    f"generator {k} does not map the exterior of disk {src} "
                    f"into disk {tgt}"
                )

    # -- enumeration -----------------------------------------------------------

    def shells(self, max_len, budget=DEFAULT_ORBIT_BUDGET):
        """Vectorized reduced-word shells up to max_len.

        Returns (list of letter arrays (N_L, L), list of matrix arrays
        (N_L, 2, 2), truncated flag).  Shell 0 is the identity.  The last
        result is cached (repeated series evaluations reuse it).
        """
        cached = getattr(self, "_shell_cache", None)
        if cached is not None and cached[0] == (max_len, budget):
            return cached[1]
        out = self._build_shells(max_len, budget)
        self._shell_cache = ((max_len, budget), out)
        return out

    def _build_shells(self, max_len, budget):
        letters = [np.zeros((1, 0), dtype=np.int64)]
        mats = [np.eye(2)[None]]
        if self.rank == 0:
            return letters, mats, False
        alphabet = np.array(
            [k for k in range(1, self.rank + 1)] + [-k for k in range(1, self.rank + 1)]
        )
        gen_mats = np.stack([self.letter_isometry(a).matrix for a in alphabet])
        total = 1
        truncated = False
        for L in range(1, max_len + 1):
            prev_letters, prev_mats = letters[-1], mats[-1]
            if L == 1:
                new_letters = alphabet[:, None]
                new_mats = gen_mats.copy()
            else:
                last = prev_letters[:, -1]
                ok = alphabet[None, :] != -last[:, None]  # (N_prev, 2g)
                rows, cols = np.nonzero(ok)
                new_letters = np.concatenate(
                    [prev_letters[rows], alphabet[cols][:, None]], axis=1
                )
                new_mats = prev_mats[rows] @ gen_mats[cols]
            if total + len(new_letters) > budget:
                truncated = True
                break
            letters.append(new_letters)
            mats.append(new_mats)
            total += len(new_letters)
        return letters, mats, truncated

    def shell_displacements(self, max_len, budget=DEFAULT_ORBIT_BUDGET):
        """Per-shell arrays of d(o, gamma o) = arccosh(||gamma||_F^2 / 2)."""
        letters, mats, truncated = self.shells(max_len, budget)
        dists = []
        for m in mats:
            frob = np.einsum("nij,nij->n", m, m)
            dists.append(np.arccosh(np.maximum(frob / 2.0, 1.0)))
        return dists, len(letters) - 1, truncated


def _disk_from_halfplane_circle(r, around):
    """Ball disk for the half-plane circle |z| = r; `around` = -1 maps the
    inside region (r < 1), +1 the outside region (r > 1)."""
    from .geometry import cayley

    lo, hi = cayley(np.complex128(-r)), cayley(np.complex128(r))
    a_lo, a_hi = np.angle(lo), np.angle(hi)
    half = 0.5 * _angdiff(a_lo, a_hi)
    center = np.pi if around < 0 else 0.0
    if _angdiff(0.5 * (a_lo + a_hi), center) > np.pi / 2:
        cand = 0.5 * (a_lo + a_hi) + np.pi
    else:
        cand = 0.5 * (a_lo + a_hi)
    # the arc must straddle `center`
    if _angdiff(cand, center) > 1e-9:
        cand = center
    return SchottkyDisk.from_arc(cand % (2 * np.pi), half)


# --------------------------------------------------------------------------
# Word enumeration (iterator form) and Poincare series.
# --------------------------------------------------------------------------


def enumerate_words(grp: SchottkyGroup, max_len, budget=DEFAULT_ORBIT_BUDGET):
    """Yield (Word, Isometry) for every reduced word of length <= max_len."""
    if max_len < 0:
        raise DomainError("max_len must be >= 0")
    letters, mats, truncated = grp.shells(max_len, budget)
    count = 0
    for shell_letters, shell_mats in zip(letters, mats):
        for row, mat in zip(shell_letters, shell_mats):
            count += 1
            yield Word(tuple(int(a) for a in row)), Isometry.from_matrix(mat)
    if truncated:
        raise TruncationError(
            f"orbit budget {budget} exhausted after {count} words", words_yielded=count
        )


def poincare_partial(grp: SchottkyGroup, s, max_len, budget=DEFAULT_ORBIT_BUDGET):
    """Partial Poincare sum over words of length <= max_len and the last
    shell-to-shell ratio as a convergence diagnostic."""
    if s <= 0:
        raise DomainError("Poincare exponent s must be positive")
    dists, reached, _ = grp.shell_displacements(max_len, budget)
    shell_sums = np.array([np.sum(np.exp(-s * d)) for d in dists])
    partial = float(np.sum(shell_sums))
    if len(shell_sums) >= 3 and shell_sums[-2] > 0:
        tail_ratio = float(shell_sums[-1] / shell_sums[-2])
    else:
        tail_ratio = 0.0 if grp.rank == 0 else float("nan")
    return partial, tail_ratio


def estimate_delta(
    grp: SchottkyGroup,
    method="series-bisection",
    max_len=None,
    budget=DEFAULT_ORBIT_BUDGET,
    margin=0.02,
    tol=0.005,
):
    """Estimate the exponent of convergence delta of the Poincare series."""
    if grp.rank == 0:
        return DeltaEstimate(0.0, 0.0, method, 0)
    if max_len is None:
        # largest shell count fitting the budget: 2g (2g-1)^{L-1} words in shell L
        max_len, total = 0, 1
        while max_len < 64:
            nxt = 2 * grp.rank * max(2 * grp.rank - 1, 1) ** max_len
            if total + nxt > budget:
                break
            total += nxt
            max_len += 1
    dists, reached, truncated = grp.shell_displacements(max_len, budget)
    truncated = truncated or (reached < max_len)
    if method == "series-bisection":
        est = _delta_series_bisection(grp, dists, margin, tol)
    elif method == "orbit-count-slope":
        est = _delta_orbit_slope(grp, dists)
    else:
        raise DomainError(f"unknown delta method {method!r}")
    delta, stderr = est
    if truncated:
        stderr += 0.05
    if not delta < grp.n:
        raise PrecisionError(
            f"delta estimate {delta} >= n = {grp.n}: invalid group data or budget"
        )
    return DeltaEstimate(delta, stderr, method, reached, truncated)


def _shell_ratio(dists, s):
    lo = np.sum(np.exp(-s * dists[-2]))
    hi = np.sum(np.exp(-s * dists[-1]))
    return hi / lo


def _delta_series_bisection(grp, dists, margin, tol):
    if len(dists) < 3:
        raise PrecisionError("need at least 2 nontrivial shells for bisection")
    gap = float(np.mean(dists[-1]) - np.mean(dists[-2]))
    lo, hi = 0.0, float(grp.n)
    if _shell_ratio(dists, lo) < 1.0 - margin:
        return 0.0, margin / gap
    while _shell_ratio(dists, hi) >= 1.0 - margin:
        hi *= 2.0
        if hi > 8.0 * grp.n:
            raise PrecisionError("shell ratios do not converge below 1 - margin")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _shell_ratio(dists, mid) < 1.0 - margin:
            hi = mid
        else:
            lo = mid
    delta = 0.5 * (lo + hi)
    return delta, 0.5 * (hi - lo) + margin / gap


def _delta_orbit_slope(grp, dists):
    all_d = np.sort(np.concatenate(dists))
    t_hi = float(np.min(dists[-1]))  # counts complete below the last shell's min
    t_lo = max(0.5 * t_hi, float(np.max(dists[1])) if len(dists) > 1 else 0.0)
    if t_hi <= t_lo:
        t_lo = 0.5 * t_hi
    ts = np.linspace(t_lo, t_hi, 12)
    counts = np.searchsorted(all_d, ts, side="right")
    ys = np.log(counts.astype(float))
    A = np.vstack([ts, np.ones_like(ts)]).T
    coef, res, _, _ = np.linalg.lstsq(A, ys, rcond=None)
    slope = float(coef[0])
    dof = len(ts) - 2
    sigma2 = float(res[0]) / dof if len(res) and dof > 0 else 0.0
    cov = sigma2 * np.linalg.inv(A.T @ A)[0, 0]
    stderr = float(np.sqrt(cov)) + 1.0 / t_hi
    return max(slope, 0.0), stderr


# --------------------------------------------------------------------------
# Fundamental domain reduction and the limit set.
# --------------------------------------------------------------------------


def reduce_to_domain(grp: SchottkyGroup, q, max_steps=200):
    """Reduce a ball point into the standard fundamental domain.

    Returns (q', Word w) with w(q') = q and q' outside all open disks.
    """
    w = complex(as_complex(np.asarray(q, dtype=float)))
    letters = []
    mat = np.eye(2)
    for _ in range(max_steps):
        hit = None
        for j, disk in enumerate(grp.disks):
            if disk.contains(np.array([w]))[0]:
                hit = j
                break
        if hit is None:
            word = Word(tuple(letters))
            return as_vec(np.complex128(w)), word
        letter = _freeing_letter(grp, hit)
        iso = grp.letter_isometry(letter)
        w = complex(iso.apply_complex(np.array([w]))[0])
        # q = s_1^{-1} o ... o s_k^{-1} (q'): first applied map is outermost
        letters.append(-letter)
    raise ReductionError(f"reduction did not terminate in {max_steps} steps")


def _freeing_letter(grp, disk_index):
    """Letter whose isometry maps the interior of the disk outside it."""
    for k, (src, tgt) in enumerate(grp.pairing):
        if disk_index == src:
            return k + 1  # generator maps int(src) -> ext(tgt)
        if disk_index == tgt:
            return -(k + 1)
    raise GroupDataError(f"disk {disk_index} missing from pairing")


def reduce_frames(grp: SchottkyGroup, frames, max_steps=200):
    """Vectorized reduction of frame arrays; returns (frames', word_lengths).

    Covectors ride along automatically since reduction acts by left
    multiplication on frames.
    """
    from .geometry import frame_base_tangent

    frames = np.array(frames, dtype=float)
    flat = frames.reshape(-1, 2, 2)
    nletters = np.zeros(len(flat), dtype=np.int64)
    if grp.rank == 0:
        return frames, nletters.reshape(frames.shape[:-2])
    free_mats = {}
    for j in range(len(grp.disks)):
        letter = _freeing_letter(grp, j)
        free_mats[j] = grp.letter_isometry(letter).matrix
    for _ in range(max_steps):
        w, _ = frame_base_tangent(flat)
        pending = False
        for j, disk in enumerate(grp.disks):
            mask = disk.contains(w)
            if np.any(mask):
                pending = True
                flat[mask] = free_mats[j] @ flat[mask]
                nletters[mask] += 1
        if not pending:
            return flat.reshape(frames.shape), nletters.reshape(frames.shape[:-2])
    raise ReductionError(f"frame reduction did not terminate in {max_steps} steps")


def reduce_boundary(grp: SchottkyGroup, p, max_steps=200):
    """Reduce boundary points (complex, vectorized) into the fundamental arcs.

    Points that fail to leave the disks within max_steps are flagged (limit
    set); returns (points, ok_mask).
    """
    w = np.array(np.atleast_1d(np.asarray(p, dtype=complex)))
    if grp.rank == 0:
        return w, np.ones(w.shape, dtype=bool)
    active = np.ones(w.shape, dtype=bool)
    for _ in range(max_steps):
        pending = False
        for j, disk in enumerate(grp.disks):
            inside = active & (
                _angdiff(np.angle(w), disk.arc_center) < disk.arc_halfwidth
            )
            if np.any(inside):
                pending = True
                letter = _freeing_letter(grp, j)
                iso = grp.letter_isometry(letter)
                w[inside] = iso.apply_complex(w[inside])
                w[inside] /= np.abs(w[inside])
        if not pending:
            return w, np.ones(w.shape, dtype=bool)
    ok = np.ones(w.shape, dtype=bool)
    for disk in grp.disks:
        ok &= _angdiff(np.angle(w), disk.arc_center) >= disk.arc_halfwidth
    return w, ok


def limit_set_sample(grp: SchottkyGroup, depth):
    """Images of the generator fixed points under all words of length <= depth."""
    if depth < 1:
        raise DomainError("depth must be >= 1")
    fixed = []
    for gen in grp.generators:
        p1, p2 = gen.fixed_points()
        fixed.extend([as_complex(p1), as_complex(p2)])
    fixed = np.array(fixed)
    letters, mats, _ = grp.shells(depth)
    pts = []
    for shell_mats in mats:
        pts.append(mobius_boundary_action(shell_mats, fixed).ravel())
    pts = np.unique(np.round(np.concatenate(pts), 14))
    return as_vec(pts)


def refined_arcs(grp: SchottkyGroup, depth):
    """Arcs of the depth-`depth` disk refinement (covers the limit set).

    Returns arrays (centers, halfwidths); depth 1 is the base disks.
    """
    arcs = [(d.arc_center, d.arc_halfwidth, None) for d in grp.disks]
    base = {j: grp.disks[j] for j in range(len(grp.disks))}
    letters, mats, _ = grp.shells(depth - 1)
    out = []
    for shell_letters, shell_mats in zip(letters, mats):
        for row, mat in zip(shell_letters, shell_mats):
            iso = Isometry.from_matrix(mat)
            last = row[-1] if len(row) else None
            for j, disk in base.items():
                # w(D_j) is a depth |w|+1 disk iff the composition is reduced:
                # the freeing letter of D_j must not cancel w's last letter
                if last is not None and _freeing_letter(grp, j) == int(last):
                    continue
                img = disk.image_under(iso) if len(row) else disk
                out.append((img.arc_center, img.arc_halfwidth))
    centers = np.array([c for c, _ in out])
    halfwidths = np.array([h for _, h in out])
    return centers, halfwidths


def boundary_gap_to_limit_set(grp: SchottkyGroup, xi, depth=6):
    """Angular distance from xi to the depth-refined disk cover of Lambda."""
    centers, halfwidths = refined_arcs(grp, depth)
    ang = np.arctan2(np.asarray(xi, dtype=float)[1], np.asarray(xi, dtype=float)[0])
    return float(np.min(_angdiff(ang, centers) - halfwidths))


def box_counting_dimension(points, scales=None):
    """Box-counting slope of boundary points over dyadic angular scales."""
    ang = np.angle(as_complex(np.asarray(points, dtype=float)))
    if scales is None:
        scales = 2.0 ** -np.arange(3, 8)
    ns = []
    for eps in scales:
        bins = np.unique(np.floor(ang / eps))
        ns.append(len(bins))
    ys, xs = np.log(np.array(ns, dtype=float)), np.log(1.0 / np.array(scales))
    A = np.vstack([xs, np.ones_like(xs)]).T
    coef, _, _, _ = np.linalg.lstsq(A, ys, rcond=None)
    return float(coef[0])
