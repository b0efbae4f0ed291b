"""Exact diagnostics by explicit summation over loop groups and error
configurations.

The n-th moment of the corrupted state factorizes into X- and Z-loop
partition functions: tuples of n-1 closed loops per type, weighted by
exp(-mu (sum_s |g_s| + |prod_s g_s|)).  Homologically non-trivial sectors are
selected by defect vectors (one bit per copy and non-contractible cycle);
summing every sector is equivalent to enumerating the full loop group.

The same moment re-expands in error configurations: a base error string C
drawn with its binomial probability and n-1 closed-cycle differences.  Both
expansions are summed here independently, which makes the high/low
temperature duality between them an exact, testable identity:

    2^(n-1) Z_loop[x-type, sector 0, mu(p)] = 2^((n-1) N / 2) Z'_err[z-type, p]

(left side in the spin-model normalization 2^(n-1) Z_loop, right side with
each distinct cycle counted once).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import CapacityError, UnsupportedModeError, VerificationError
from .lattice import ToricCode, gray_masks
from .model import ErrorModel

LOG2 = math.log(2.0)

# Nominal term count (n-1)(L^2+1) for loop-tuple sums; 2^30 is the limit.
MAX_TUPLE_LOG2 = 30
# Error-configuration sums enumerate all 2^N strings times the cycle group.
MAX_ERRCONF_LOG2 = 30

_CHUNK_TARGET = 1 << 21


@dataclass
class PartitionSpec:
    """One loop-model partition function.

    defects: pair of binary vectors (d over cycle 1, d over cycle 2), each of
    length n-1, selecting a topological sector with the corresponding
    non-contractible defect loops multiplied into each copy.  None means the
    full loop group is enumerated (equivalent to summing every sector).
    pinned_region: edge mask; adds the indicator that every flavor
    combination h_r (product of all copies but r) commutes with each
    opposite-type contractible loop inside the region.
    """

    code: ToricCode
    kind: str
    n: int
    mu: float
    defects: tuple[Sequence[int], Sequence[int]] | None = None
    pinned_region: int | None = None


def _group_masks(code: ToricCode, kind: str, contractible_only: bool) -> np.ndarray:
    gens = code.loop_generators(kind, contractible_only=contractible_only)
    out = np.fromiter(gray_masks(gens), dtype=np.uint64, count=1 << len(gens))
    return out


def _char_table(masks: np.ndarray, generators: list[int], region_mask: int) -> np.ndarray:
    """Parity signature of each mask against the generators inside the region.

    The signature is GF(2)-linear, so tuple products can be checked by XOR.
    """
    sig = np.zeros(masks.shape, dtype=np.uint32)
    for k, gen in enumerate(generators):
        g = np.uint64(gen & region_mask)
        bits = (np.bitwise_count(masks & g) & 1).astype(np.uint32)
        sig |= bits << np.uint32(k)
    return sig


def _defect_mask(code: ToricCode, kind: str, d1: int, d2: int) -> int:
    cycles = code.logical_x_masks if kind == "X" else code.logical_z_masks
    mask = 0
    if d1:
        mask ^= cycles[0]
    if d2:
        mask ^= cycles[1]
    return mask


def _check_tuple_capacity(code: ToricCode, n: int):
    if (n - 1) * (code.L ** 2 + 1) > MAX_TUPLE_LOG2:
        raise CapacityError(
            f"loop tuple sum 2^{(n - 1) * (code.L ** 2 + 1)} exceeds 2^{MAX_TUPLE_LOG2} "
            f"(L={code.L}, n={n})")


def _loop_sum(code: ToricCode, kind: str, n: int, mu: float,
              defects=None, pinned_region=None, sign_mask=None):
    """Chunked enumeration of (n-1)-tuples of loops.

    Returns a dict with log-sum-exp accumulations: 'free' (always), 'pinned'
    (when pinned_region is given) and 'pos'/'neg' (split by the commutation
    sign of the first copy against sign_mask, when given).
    """
    _check_tuple_capacity(code, n)
    n_copies = n - 1
    if defects is None:
        base = _group_masks(code, kind, contractible_only=False)
        defect_masks = [0] * n_copies
    else:
        d1, d2 = defects
        if len(d1) != n_copies or len(d2) != n_copies:
            raise ValueError(f"defect vectors must have length n-1 = {n_copies}")
        base = _group_masks(code, kind, contractible_only=True)
        defect_masks = [_defect_mask(code, kind, d1[s], d2[s]) for s in range(n_copies)]

    copy_masks = [base ^ np.uint64(dm) for dm in defect_masks]
    copy_w = [np.bitwise_count(m).astype(np.int64) for m in copy_masks]

    pin_sigs = None
    if pinned_region is not None:
        opposite = "X" if kind == "Z" else "Z"
        gens = code.loop_generators(opposite, contractible_only=True)
        pin_sigs = [_char_table(m, gens, pinned_region) for m in copy_masks]

    sign_m = np.uint64(sign_mask) if sign_mask is not None else None

    group = len(base)
    chunk = max(1, _CHUNK_TARGET // max(1, group ** (n_copies - 1)))

    parts_free, parts_pin, parts_pos, parts_neg = [], [], [], []

    for lo in range(0, group, chunk):
        sl = slice(lo, lo + chunk)
        tm = copy_masks[0][sl]
        tw = copy_w[0][sl]
        sigs = [pin_sigs[0][sl]] if pin_sigs is not None else None
        sgn = None
        if sign_m is not None:
            sgn = (np.bitwise_count(tm & sign_m) & 1).astype(bool)
        for s in range(1, n_copies):
            m_s, w_s = copy_masks[s], copy_w[s]
            width = len(m_s)
            old_size = tm.size
            new_tm = (tm[:, None] ^ m_s[None, :]).ravel()
            tw = (tw[:, None] + w_s[None, :]).ravel()
            if sigs is not None:
                sigs = [np.repeat(a, width) for a in sigs]
                sigs.append(np.tile(pin_sigs[s], old_size))
            if sgn is not None:
                sgn = np.repeat(sgn, width)
            tm = new_tm
        total_w = tw + np.bitwise_count(tm).astype(np.int64)
        if math.isinf(mu):
            logw = np.where(total_w == 0, 0.0, -np.inf)
        else:
            logw = -mu * total_w.astype(np.float64)
        parts_free.append(logsumexp(logw))
        if sigs is not None:
            sig_total = sigs[0].copy()
            for a in sigs[1:]:
                sig_total ^= a
            ok = np.ones(tm.shape, dtype=bool)
            for a in sigs:
                ok &= (sig_total ^ a) == 0
            parts_pin.append(logsumexp(np.where(ok, logw, -np.inf)))
        if sgn is not None:
            parts_pos.append(logsumexp(np.where(~sgn, logw, -np.inf)))
            parts_neg.append(logsumexp(np.where(sgn, logw, -np.inf)))

    out = {"free": float(logsumexp(parts_free))}
    if parts_pin:
        out["pinned"] = float(logsumexp(parts_pin))
    if parts_pos:
        out["pos"] = float(logsumexp(parts_pos))
        out["neg"] = float(logsumexp(parts_neg))
    return out


def partition_function(spec: PartitionSpec) -> float:
    """log Z over loop tuples (defect sign flips and pinning applied)."""
    res = _loop_sum(spec.code, spec.kind, spec.n, spec.mu,
                    defects=spec.defects, pinned_region=spec.pinned_region)
    return res["pinned"] if spec.pinned_region is not None else res["free"]


def _zero_defects(n: int):
    return ([0] * (n - 1), [0] * (n - 1))


def moment_via_loops(code: ToricCode, model: ErrorModel, n: int) -> float:
    """tr rho^n = Z_x Z_z / 2^((n-1) N), both factors in the trivial sector."""
    log_zx = _loop_sum(code, "X", n, model.mu_x, defects=_zero_defects(n))["free"]
    log_zz = _loop_sum(code, "Z", n, model.mu_z, defects=_zero_defects(n))["free"]
    return math.exp(log_zx + log_zz - (n - 1) * code.n_qubits * LOG2)


def dual_path_mask(code: ToricCode, start: tuple[int, int], end: tuple[int, int]) -> int:
    """Edges crossed by a dual-lattice path between two plaquettes (an open
    X string creating a plaquette-defect pair at its ends)."""
    (r1, c1), (r2, c2) = start, end
    mask = 0
    r, c = r1, c1
    while c != c2:
        step = 1 if (c2 - c) % code.L <= code.L // 2 else -1
        if step == 1:
            mask ^= 1 << code.v_edge(r, c + 1)
        else:
            mask ^= 1 << code.v_edge(r, c)
        c = (c + step) % code.L
    while r != r2:
        step = 1 if (r2 - r) % code.L <= code.L // 2 else -1
        if step == 1:
            mask ^= 1 << code.h_edge(r + 1, c)
        else:
            mask ^= 1 << code.h_edge(r, c)
        r = (r + step) % code.L
    return mask


def relative_entropy_via_loops(code: ToricCode, model: ErrorModel, n: int,
                               endpoints: tuple[tuple[int, int], tuple[int, int]]) -> float:
    """D^(n) from the signed loop sum: the anyon-pair string contributes the
    commutation sign of the first-copy Z loop, whose ensemble average is the
    order-parameter two-point function."""
    start, end = endpoints
    if (start[0] % code.L, start[1] % code.L) == (end[0] % code.L, end[1] % code.L):
        raise ValueError("anyon endpoints must be distinct plaquettes")
    string = dual_path_mask(code, start, end)
    res = _loop_sum(code, "Z", n, model.mu_z, defects=_zero_defects(n), sign_mask=string)
    log_z = res["free"]
    corr = math.exp(res["pos"] - log_z) - math.exp(res["neg"] - log_z)
    if corr <= 0.0:
        return math.inf
    return math.log(corr) / (1 - n)


def defect_free_energy(code: ToricCode, kind: str, mu: float, n: int,
                       d1: Sequence[int], d2: Sequence[int]) -> float:
    """Excess free energy of the defect sector (d1, d2) over the trivial one."""
    log_z0 = _loop_sum(code, kind, n, mu, defects=_zero_defects(n))["free"]
    log_zd = _loop_sum(code, kind, n, mu, defects=(list(d1), list(d2)))["free"]
    return log_z0 - log_zd


def coherent_info_via_defects(code: ToricCode, model: ErrorModel, n: int) -> float:
    """I_c^(n) = (1/(n-1)) sum_a log[ sum_d Z_a^(d) / (2^(n-1) Z_a^(0)) ]."""
    total = 0.0
    for kind, mu in (("X", model.mu_x), ("Z", model.mu_z)):
        logs = []
        n_copies = n - 1
        for bits in range(1 << (2 * n_copies)):
            d1 = [(bits >> s) & 1 for s in range(n_copies)]
            d2 = [(bits >> (n_copies + s)) & 1 for s in range(n_copies)]
            logs.append(_loop_sum(code, kind, n, mu, defects=(d1, d2))["free"])
        log_z0 = logs[0]
        total += logsumexp(logs) - log_z0
    return total / (n - 1) - 2 * LOG2


def negativity_via_pinning(code: ToricCode, model: ErrorModel, order: int,
                           region_mask: int) -> float:
    """Renyi negativity of even order as the pinning excess free energy,
    E^(2n) = (log Z_free - log Z_pinned) / (2n - 2).

    Only one error type may be active: the free-loop trace that produces the
    pinning constraints requires the other tension to vanish.
    """
    if order % 2 != 0 or order < 4:
        raise ValueError(f"order must be an even integer >= 4, got {order}")
    if model.p_x > 0.0 and model.p_z > 0.0:
        raise UnsupportedModeError(
            "pinned-negativity mapping requires a single error type "
            "(use the dense oracle or the sign-observable estimator for mixed errors)")
    if model.p_z > 0.0:
        kind, mu = "X", model.mu_x
    else:
        kind, mu = "Z", model.mu_z
    res = _loop_sum(code, kind, order, mu, defects=_zero_defects(order),
                    pinned_region=region_mask)
    return (res["free"] - res["pinned"]) / (order - 2)


# -- error-configuration picture -----------------------------------------


@dataclass
class ErrorConfigSpec:
    """Replicated error-string expansion for one error type.

    kind is the type of the ERROR strings ('Z' strings live on the original
    lattice and pair with the X-loop model under duality).  Every distinct
    closed-cycle difference (including both non-contractible classes) is
    counted exactly once.
    """

    code: ToricCode
    kind: str
    n: int
    p: float


def _errconf_guard(code: ToricCode, n: int):
    log_terms = code.n_qubits + (n - 1) * code.L ** 2 + 2 * (n - 1)
    if log_terms > MAX_ERRCONF_LOG2:
        raise CapacityError(
            f"error-configuration sum 2^{log_terms} exceeds 2^{MAX_ERRCONF_LOG2} "
            f"(L={code.L}, n={n})")


def error_config_partition(spec: ErrorConfigSpec) -> float:
    """log of Z'_n = sum_C P(C) [ sum_cycles P(C + cycle) ]^(n-1).

    The base string C ranges over all 2^N subsets; the per-copy cycle sums
    factorize because copies are independent given C.
    """
    code, n, p = spec.code, spec.n, spec.p
    _errconf_guard(code, n)
    if not 0.0 < p < 0.5:
        raise ValueError(f"error-configuration sum needs p in (0, 1/2), got {p}")
    nq = code.n_qubits
    cycles = _group_masks(code, spec.kind, contractible_only=False)

    log_p, log_q = math.log(p), math.log(1.0 - p)
    strings = np.arange(1 << nq, dtype=np.uint64)
    w = np.bitwise_count(strings).astype(np.float64)
    log_prob_c = w * log_p + (nq - w) * log_q

    inner = np.full(strings.shape, -np.inf)
    for cyc in cycles:
        wd = np.bitwise_count(strings ^ cyc).astype(np.float64)
        inner = np.logaddexp(inner, wd * log_p + (nq - wd) * log_q)

    return float(logsumexp(log_prob_c + (n - 1) * inner))


def moment_via_error_configs(code: ToricCode, model: ErrorModel, n: int) -> float:
    """tr rho^n = 4^(1-n) Z'_z(p_z) Z'_x(p_x) (empty-error factors collapse
    the sum when a rate is zero)."""
    total = (1 - n) * 2 * LOG2
    for kind, p in (("Z", model.p_z), ("X", model.p_x)):
        if p == 0.0:
            # only the empty string and empty cycles survive: Z' = 1
            continue
        total += error_config_partition(ErrorConfigSpec(code, kind, n, p))
    return math.exp(total)


def duality_report(code: ToricCode, p: float, n: int) -> list[dict]:
    """Both orientations of the loop/error-configuration duality at rate p.

    Each row carries log LHS = (n-1) log 2 + log Z_loop (spin normalization)
    and log RHS = (n-1)(N/2) log 2 + log Z'_err, plus their residual.
    """
    rows = []
    nq = code.n_qubits
    for loop_kind, err_kind in (("X", "Z"), ("Z", "X")):
        mu = ErrorModel._tension(p)
        log_loop = _loop_sum(code, loop_kind, n, mu, defects=_zero_defects(n))["free"]
        lhs = (n - 1) * LOG2 + log_loop
        log_err = error_config_partition(ErrorConfigSpec(code, err_kind, n, p))
        rhs = (n - 1) * (nq / 2) * LOG2 + log_err
        rows.append({
            "L": code.L, "n": n, "p": p,
            "loop_kind": loop_kind, "error_kind": err_kind,
            "log_lhs": lhs, "log_rhs": rhs,
            "residual": abs(lhs - rhs) / max(1.0, abs(rhs)),
        })
    return rows


def verify_duality(code: ToricCode, p: float, n: int, tol: float = 1e-10) -> list[dict]:
    rows = duality_report(code, p, n)
    for row in rows:
        if not row["residual"] <= tol:
            raise VerificationError(
                f"duality residual {row['residual']:.3e} exceeds {tol} at "
                f"L={row['L']} n={row['n']} p={row['p']} ({row['loop_kind']} loops)")
    return rows
