"""Seeded Metropolis Monte Carlo for the flavored Ising models.

The moment order n maps to n-1 coupled flavors with the per-bond interaction
-J (sum_s sigma sigma + prod_s sigma sigma); the decoupled single-flavor
variant (the large-n surrogate) and the random-bond model at the Nishimori
coupling reuse the same kernel without the product term.

Chains are reproducible bit for bit: chain k draws every random number from
numpy's PCG64 seeded with SeedSequence(entropy=seed_base, spawn_key=(k,)),
and accumulators merge in chain order regardless of how chains were
dispatched.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .kernels import N_SCAN_PATTERNS, acceptance_table, sweep_block, total_energy
from .model import nishimori_coupling

ENERGY_BOOKKEEPING_TOL = 1e-9
SEED_SCHEME = "numpy SeedSequence(entropy=seed_base, spawn_key=(chain_index,))"

_SWEEP_BATCH = 512


@dataclass
class MCConfig:
    L: int
    n: int                      # moment order; flavors = n - 1 for the flavored model
    p: float
    sweeps_thermalize: int
    sweeps_measure: int
    measure_interval: int = 2
    chain_count: int = 4
    seed_base: int = 1
    model: str = "flavored"     # flavored | decoupled | rbim
    init: str = "up"            # up | random
    n_blocks: int = 16

    def __post_init__(self):
        if self.L < 2:
            raise ConfigError(f"L must be >= 2, got {self.L}")
        if self.model == "flavored" and self.n < 2:
            raise ConfigError(f"moment order must be >= 2, got {self.n}")
        if self.sweeps_thermalize < 0:
            raise ConfigError("sweeps_thermalize must be non-negative")
        for name in ("sweeps_measure", "measure_interval", "chain_count", "n_blocks"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.model not in ("flavored", "decoupled", "rbim"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.model == "rbim":
            if not 0.0 < self.p < 0.5:
                raise ConfigError(f"rbim requires p in (0, 1/2), got {self.p}")
        elif not 0.0 <= self.p < 0.5:
            raise ConfigError(f"p must lie in [0, 1/2), got {self.p}")

    @property
    def flavors(self) -> int:
        return self.n - 1 if self.model == "flavored" else 1

    @property
    def include_product(self) -> bool:
        return self.model == "flavored"

    @property
    def coupling(self) -> float:
        if self.model == "rbim":
            return nishimori_coupling(self.p)
        return -0.5 * math.log(1.0 - 2.0 * self.p)


class SiteRegion:
    """A set of spin-model sites defining a pinned qubit region.

    The qubit region consists of the bonds interior to the site set.  Pinning
    demands that each flavor combination's domain walls restricted to those
    bonds close up: around every spin-lattice plaquette, the parity of
    region-bond wall crossings must be even.  That is the exact indicator the
    free-loop trace produces; for a simply connected block it reduces to
    aligning the boundary ring of sites.
    """

    def __init__(self, name: str, sites: Sequence[tuple[int, int]], L: int):
        self.name = name
        self.L = L
        self.mask = np.zeros((L, L), dtype=bool)
        for r, c in sites:
            self.mask[r % L, c % L] = True
        m = self.mask
        self.bonds_h = m & np.roll(m, -1, axis=1)
        self.bonds_v = m & np.roll(m, -1, axis=0)
        self.ring_components = self._components(self._ring())
        self.constraint_rank = self._constraint_rank()

    def _ring(self) -> np.ndarray:
        m = self.mask
        outside = ~m
        return m & (np.roll(outside, 1, 0) | np.roll(outside, -1, 0)
                    | np.roll(outside, 1, 1) | np.roll(outside, -1, 1))

    def _components(self, ring: np.ndarray) -> list[np.ndarray]:
        L = self.L
        seen = np.zeros((L, L), dtype=bool)
        comps = []
        for r0 in range(L):
            for c0 in range(L):
                if not ring[r0, c0] or seen[r0, c0]:
                    continue
                stack = [(r0, c0)]
                seen[r0, c0] = True
                comp = []
                while stack:
                    r, c = stack.pop()
                    comp.append(r * L + c)
                    for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                        rr, cc = (r + dr) % L, (c + dc) % L
                        if ring[rr, cc] and not seen[rr, cc]:
                            seen[rr, cc] = True
                            stack.append((rr, cc))
                comps.append(np.array(sorted(comp), dtype=np.int64))
        return comps

    def _constraint_rank(self) -> int:
        """GF(2) rank of the wall-closure constraints as linear forms on the
        site spins.  At infinite temperature each flavor combination is
        satisfied with probability 2^-rank, so the free-spin negativity is
        rank * log 2 exactly."""
        L = self.L
        rows = []
        for r in range(L):
            for c in range(L):
                row = 0
                for br, bc, horizontal in (
                        (r, c, True), ((r + 1) % L, c, True),
                        (r, c, False), (r, (c + 1) % L, False)):
                    if horizontal and self.bonds_h[br, bc]:
                        row ^= (1 << (br * L + bc)) | (1 << (br * L + (bc + 1) % L))
                    elif not horizontal and self.bonds_v[br, bc]:
                        row ^= (1 << (br * L + bc)) | (1 << (((br + 1) % L) * L + bc))
                if row:
                    rows.append(row)
        rank = 0
        pivots = []
        for row in rows:
            for piv in pivots:
                row = min(row, row ^ piv)
            if row:
                pivots.append(row)
                pivots.sort(reverse=True)
                rank += 1
        return rank

    def wall_constraints_ok(self, tau: np.ndarray) -> bool:
        """Exact pinning indicator for one flavor combination."""
        dh = (tau != np.roll(tau, -1, axis=1)) & self.bonds_h
        dv = (tau != np.roll(tau, -1, axis=0)) & self.bonds_v
        par = dh ^ np.roll(dh, -1, axis=0) ^ dv ^ np.roll(dv, -1, axis=1)
        return not par.any()

    def free_spin_log_probability(self, order: int) -> float:
        return -(order - 2) * self.constraint_rank * math.log(2.0)

    @property
    def boundary_size(self) -> int:
        return int(sum(len(c) for c in self.ring_components))

    @property
    def n_components(self) -> int:
        return len(self.ring_components)


def block_region(name: str, L: int, r0: int, c0: int, height: int, width: int) -> SiteRegion:
    sites = [(r0 + r, c0 + c) for r in range(height) for c in range(width)]
    return SiteRegion(name, sites, L)


def annulus_region(name: str, L: int, r0: int, c0: int, outer: int, hole: int) -> SiteRegion:
    """Square annulus: outer x outer block minus the centered hole x hole block."""
    lo = (outer - hole) // 2
    sites = [(r0 + r, c0 + c) for r in range(outer) for c in range(outer)
             if not (lo <= r < lo + hole and lo <= c < lo + hole)]
    return SiteRegion(name, sites, L)


def kitaev_preskill_regions(L: int, side: int) -> dict[str, SiteRegion]:
    """Tripartition of a side x side block: A and B the top quadrants, C the
    bottom half.  Then A ~ B, AB ~ C and AC ~ BC up to lattice symmetries, so
    the seven-term combination collapses to 2 E_A - 2 E_AC + E_ABC.
    """
    if side % 2 != 0 or side < 2:
        raise ConfigError(f"tripartition block side must be even and >= 2, got {side}")
    if side >= L:
        raise ConfigError(f"block side {side} does not fit in L={L}")
    h = side // 2
    a = [(r, c) for r in range(h) for c in range(h)]
    b = [(r, c + h) for r in range(h) for c in range(h)]
    cc = [(r + h, c) for r in range(h) for c in range(side)]
    combos = {"A": a, "B": b, "C": cc, "AB": a + b, "BC": b + cc,
              "AC": a + cc, "ABC": a + b + cc}
    return {k: SiteRegion(k, v, L) for k, v in combos.items()}


@dataclass
class ObservableSpec:
    magnetization: bool = True
    correlator_pairs: list[tuple[tuple[int, int], tuple[int, int]]] = field(default_factory=list)
    correlator_seps: list[int] = field(default_factory=list)
    pinning_regions: list[SiteRegion] = field(default_factory=list)
    defect_sectors: list[tuple[tuple[int, ...], tuple[int, ...]]] = field(default_factory=list)


class SpinSystem:
    """Flavored Ising lattice with per-flavor bond signs and tracked energy."""

    def __init__(self, L: int, flavors: int, coupling: float,
                 include_product: bool = True, rng: np.random.Generator | None = None,
                 init: str = "up"):
        self.L = L
        self.flavors = flavors
        self.coupling = coupling
        self.include_product = include_product
        self.rng = rng if rng is not None else np.random.default_rng(0)
        if init == "up":
            self.spins = np.ones((flavors, L, L), dtype=np.int8)
        elif init == "random":
            self.spins = (2 * self.rng.integers(0, 2, size=(flavors, L, L)) - 1).astype(np.int8)
        else:
            raise ValueError(f"unknown init {init!r}")
        self.prod_spins = np.prod(self.spins, axis=0, dtype=np.int64).astype(np.int8)
        self.sign_h = np.ones((flavors, L, L), dtype=np.int8)
        self.sign_v = np.ones((flavors, L, L), dtype=np.int8)
        self.exp_tab = acceptance_table(coupling)
        self._refresh_product_signs()
        self.sweep_count = 0

    def _refresh_product_signs(self):
        self.prod_h = np.prod(self.sign_h, axis=0, dtype=np.int64).astype(np.int8)
        self.prod_v = np.prod(self.sign_v, axis=0, dtype=np.int64).astype(np.int8)
        self.energy = self.recompute_energy()

    def apply_defect_line(self, flavor: int, cycle: int):
        """Flip the flavor's couplings across one non-contractible cut:
        cycle 0 crosses the row L-1 / row 0 seam, cycle 1 the column seam."""
        if cycle == 0:
            self.sign_v[flavor, self.L - 1, :] *= -1
        elif cycle == 1:
            self.sign_h[flavor, :, self.L - 1] *= -1
        else:
            raise ValueError(f"cycle must be 0 or 1, got {cycle}")
        self._refresh_product_signs()

    def apply_bond_disorder(self, p: float):
        """Quenched random bond flips with probability p, all flavors alike."""
        flips_h = self.rng.random((self.L, self.L)) < p
        flips_v = self.rng.random((self.L, self.L)) < p
        self.sign_h *= np.where(flips_h, -1, 1).astype(np.int8)[None, :, :]
        self.sign_v *= np.where(flips_v, -1, 1).astype(np.int8)[None, :, :]
        self._refresh_product_signs()

    def recompute_energy(self) -> float:
        return total_energy(self.spins, self.coupling, self.sign_h, self.sign_v,
                            self.prod_h, self.prod_v, self.include_product)

    def sweeps(self, n: int):
        done = 0
        while done < n:
            batch = min(_SWEEP_BATCH, n - done)
            patterns = self.rng.integers(0, N_SCAN_PATTERNS, size=batch).astype(np.uint8)
            u = self.rng.random((batch, self.flavors, self.L, self.L))
            k = sweep_block(self.spins, self.prod_spins, self.sign_h,
                            self.sign_v, self.prod_h, self.prod_v,
                            self.include_product, self.exp_tab, patterns, u)
            self.energy += 2.0 * self.coupling * k
            done += batch
        self.sweep_count += n


def metropolis_sweep(system: SpinSystem, n: int = 1) -> SpinSystem:
    system.sweeps(n)
    return system


class MomentAccumulator:
    """Per-chain streaming sums, split into jackknife blocks."""

    def __init__(self, n_blocks: int, chain_id: int = 0, meta: dict | None = None):
        self.n_blocks = n_blocks
        self.chain_id = chain_id
        self.meta = meta or {}
        self.counts = np.zeros(n_blocks, dtype=np.int64)
        self.sums: dict[str, np.ndarray] = {}
        self.chain_boundaries = [0, n_blocks]  # merge bookkeeping

    def add(self, block: int, values: dict[str, float]):
        self.counts[block] += 1
        for key, val in values.items():
            if key not in self.sums:
                self.sums[key] = np.zeros(self.n_blocks)
            self.sums[key][block] += val

    def total_count(self) -> int:
        return int(self.counts.sum())

    def mean(self, key: str) -> float:
        return float(self.sums[key].sum() / self.counts.sum())

    def keys(self):
        return sorted(self.sums.keys())

    def to_record(self) -> dict:
        return {
            "chain_id": self.chain_id,
            "meta": self.meta,
            "n_blocks": self.n_blocks,
            "counts": self.counts.tolist(),
            "totals": {k: float(v.sum()) for k, v in sorted(self.sums.items())},
            "sums": {k: v.tolist() for k, v in sorted(self.sums.items())},
        }

    @classmethod
    def from_record(cls, rec: dict) -> "MomentAccumulator":
        acc = cls(rec["n_blocks"], rec["chain_id"], rec.get("meta", {}))
        acc.counts = np.array(rec["counts"], dtype=np.int64)
        acc.sums = {k: np.array(v) for k, v in rec["sums"].items()}
        return acc

    def to_jsonl(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)


def merge_accumulators(accs: list["MomentAccumulator"]) -> "MomentAccumulator":
    """Deterministic merge: blocks concatenated in chain-index order."""
    accs = sorted(accs, key=lambda a: a.chain_id)
    total_blocks = sum(a.n_blocks for a in accs)
    out = MomentAccumulator(total_blocks, chain_id=-1,
                            meta={"merged_from": [a.chain_id for a in accs]})
    keys = sorted({k for a in accs for k in a.sums})
    out.sums = {k: np.zeros(total_blocks) for k in keys}
    pos = 0
    boundaries = [0]
    for a in accs:
        out.counts[pos:pos + a.n_blocks] = a.counts
        for k in keys:
            if k in a.sums:
                out.sums[k][pos:pos + a.n_blocks] = a.sums[k]
        pos += a.n_blocks
        boundaries.append(pos)
    out.chain_boundaries = boundaries
    return out


def _measure(system: SpinSystem, obs: ObservableSpec, cfg: MCConfig) -> dict[str, float]:
    vals: dict[str, float] = {}
    spins = system.spins
    L = system.L
    if obs.magnetization:
        m = float(spins.mean())
        vals["m"] = m
        vals["m2"] = m * m
        vals["m4"] = m ** 4
    if obs.correlator_pairs:
        s1 = spins[0]
        for (i, j) in obs.correlator_pairs:
            key = f"cpair:{i[0]},{i[1]}:{j[0]},{j[1]}"
            vals[key] = float(s1[i[0] % L, i[1] % L] * s1[j[0] % L, j[1] % L])
    if obs.correlator_seps:
        s1 = spins[0].astype(np.float64)
        for r in obs.correlator_seps:
            c_ax0 = float(np.mean(s1 * np.roll(s1, -r, axis=0)))
            c_ax1 = float(np.mean(s1 * np.roll(s1, -r, axis=1)))
            vals[f"csep:{r}"] = 0.5 * (c_ax0 + c_ax1)
    if obs.pinning_regions:
        prod_all = spins[0].copy()
        for s in range(1, system.flavors):
            prod_all *= spins[s]
        taus = [prod_all * spins[s] for s in range(system.flavors)]
        for region in obs.pinning_regions:
            ok = all(region.wall_constraints_ok(tau) for tau in taus)
            vals[f"pin:{region.name}"] = 1.0 if ok else 0.0
    if obs.defect_sectors:
        J = system.coupling
        s_v = spins[:, L - 1, :].astype(np.float64) * spins[:, 0, :]
        s_h = spins[:, :, L - 1].astype(np.float64) * spins[:, :, 0]
        xi_v = system.sign_v[:, L - 1, :]
        xi_h = system.sign_h[:, :, L - 1]
        for idx, (d1, d2) in enumerate(obs.defect_sectors):
            de = 0.0
            for s in range(system.flavors):
                if d1[s]:
                    de += 2.0 * J * float(np.sum(xi_v[s] * s_v[s]))
                if d2[s]:
                    de += 2.0 * J * float(np.sum(xi_h[s] * s_h[s]))
            if system.include_product:
                if sum(d1) % 2:
                    de += 2.0 * J * float(np.sum(system.prod_v[L - 1, :] * np.prod(s_v, axis=0)))
                if sum(d2) % 2:
                    de += 2.0 * J * float(np.sum(system.prod_h[:, L - 1] * np.prod(s_h, axis=0)))
            w = math.exp(-de)
            vals[f"defect:{idx}"] = w
            vals[f"defect_w2:{idx}"] = w * w
            vals[f"defect_de:{idx}"] = de
            vals[f"defect_de2:{idx}"] = de * de
    return vals


def run_chain(config: MCConfig, observables: ObservableSpec,
              chain_id: int = 0, check_energy: bool = True) -> MomentAccumulator:
    ss = np.random.SeedSequence(entropy=config.seed_base, spawn_key=(chain_id,))
    rng = np.random.default_rng(ss)
    system = SpinSystem(config.L, config.flavors, config.coupling,
                        include_product=config.include_product, rng=rng,
                        init=config.init)
    if config.model == "rbim":
        system.apply_bond_disorder(config.p)

    # At zero coupling the Boltzmann measure is uniform and the Metropolis
    # kernel degenerates to a deterministic global flip (every zero-cost
    # proposal is accepted), so the ensemble is sampled directly instead.
    exact_free_sampling = config.coupling == 0.0

    if config.sweeps_thermalize and not exact_free_sampling:
        system.sweeps(config.sweeps_thermalize)

    n_meas = config.sweeps_measure // config.measure_interval
    acc = MomentAccumulator(config.n_blocks, chain_id=chain_id, meta={
        "seed_base": config.seed_base,
        "seed_scheme": SEED_SCHEME,
        "L": config.L, "n": config.n, "p": config.p, "model": config.model,
        "sweeps_thermalize": config.sweeps_thermalize,
        "sweeps_measure": config.sweeps_measure,
        "measure_interval": config.measure_interval,
    })
    for m in range(n_meas):
        if exact_free_sampling:
            system.spins = (2 * rng.integers(0, 2, size=system.spins.shape) - 1).astype(np.int8)
            system.prod_spins = np.prod(system.spins, axis=0, dtype=np.int64).astype(np.int8)
            system.sweep_count += config.measure_interval
        else:
            system.sweeps(config.measure_interval)
        block = min(m * config.n_blocks // max(1, n_meas), config.n_blocks - 1)
        acc.add(block, _measure(system, obs=observables, cfg=config))
    acc.meta["sweep_count"] = system.sweep_count

    if check_energy and not exact_free_sampling:
        drift = abs(system.energy - system.recompute_energy())
        scale = max(1.0, abs(system.energy))
        if drift > ENERGY_BOOKKEEPING_TOL * scale:
            raise RuntimeError(f"energy bookkeeping drifted by {drift}")
    return acc


def run_chains(config: MCConfig, observables: ObservableSpec,
               max_workers: int = 1) -> list[MomentAccumulator]:
    """All chains of the config; results ordered by chain index regardless of
    dispatch (a worker pool is used when max_workers > 1)."""
    ids = list(range(config.chain_count))
    if max_workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            futs = {pool.submit(run_chain, config, observables, cid): cid for cid in ids}
            accs = [f.result() for f in futs]
    else:
        accs = [run_chain(config, observables, cid) for cid in ids]
    return sorted(accs, key=lambda a: a.chain_id)


# -- estimators -------------------------------------------------------------


@dataclass
class EstimateResult:
    value: float
    error: float
    flag: str = "ok"            # ok | undersampled | infinite
    n_samples: int = 0
    n_positive: int = 0


def _jackknife_ratio(acc: MomentAccumulator, fn, keys: list[str]):
    """Jackknife (over blocks) of a smooth function of per-key means."""
    counts = acc.counts.astype(np.float64)
    live = counts > 0
    sums = {k: acc.sums[k] for k in keys}
    tot_c = counts.sum()
    tot = {k: v.sum() for k, v in sums.items()}
    theta = fn({k: tot[k] / tot_c for k in keys})
    loo = []
    for b in np.nonzero(live)[0]:
        cb = tot_c - counts[b]
        loo.append(fn({k: (tot[k] - sums[k][b]) / cb for k in keys}))
    loo = np.array(loo)
    nb = len(loo)
    if nb < 2 or not np.all(np.isfinite(loo)):
        return theta, math.inf
    var = (nb - 1) / nb * float(np.sum((loo - loo.mean()) ** 2))
    return theta, math.sqrt(var)


def binder_per_chain(acc: MomentAccumulator) -> tuple[float, float]:
    return _jackknife_ratio(acc, lambda m: m["m4"] / m["m2"] ** 2, ["m2", "m4"])


def binder_estimate(accs: list[MomentAccumulator]) -> EstimateResult:
    """Binder ratio <m^4>/<m^2>^2, computed per chain and pooled.

    Per-chain evaluation keeps the estimate meaningful in the ordered phase,
    where the flavor-flip symmetry makes chain-pooled moments sector
    dependent while every individual chain gives B -> 1.
    """
    vals = np.array([binder_per_chain(a)[0] for a in accs])
    n = len(vals)
    if n == 1:
        v, e = binder_per_chain(accs[0])
        return EstimateResult(v, e, n_samples=accs[0].total_count())
    err = float(vals.std(ddof=1) / math.sqrt(n))
    within = np.array([binder_per_chain(a)[1] for a in accs])
    floor = float(np.sqrt(np.mean(within ** 2) / n))
    return EstimateResult(float(vals.mean()), max(err, floor),
                          n_samples=sum(a.total_count() for a in accs))


def m2_estimate(accs: list[MomentAccumulator]) -> EstimateResult:
    vals = np.array([a.mean("m2") for a in accs])
    n = len(vals)
    if n == 1:
        v, e = _jackknife_ratio(accs[0], lambda m: m["m2"], ["m2"])
        return EstimateResult(v, e, n_samples=accs[0].total_count())
    return EstimateResult(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n)),
                          n_samples=sum(a.total_count() for a in accs))


def correlator_d_estimate(accs: list[MomentAccumulator], key: str, n: int) -> EstimateResult:
    """D^(n) = log(<corr>) / (1 - n), with the error pushed through the log.

    A non-positive correlator estimate cannot be logged: the diagnostic is
    reported as +inf with the 'infinite' flag (free-spin / undersampled)."""
    acc = merge_accumulators(accs)
    total = acc.total_count()
    corr = acc.mean(key)
    if corr <= 0.0:
        return EstimateResult(math.inf, math.inf, flag="infinite", n_samples=total)
    val, err = _jackknife_ratio(acc, lambda m: math.log(m[key]) / (1 - n)
                                if m[key] > 0 else math.nan, [key])
    if not math.isfinite(err):
        return EstimateResult(val, math.inf, flag="undersampled", n_samples=total)
    return EstimateResult(val, err, n_samples=total)


def pinning_e_estimate(accs: list[MomentAccumulator], region_name: str,
                       order: int, min_count: int = 100) -> EstimateResult:
    """E^(2n) = -log(P) / (2n - 2) from the alignment-indicator probability.

    Rare-event policy: if either indicator outcome was seen fewer than
    min_count times, the log of the mean is biased (low E is under-estimated
    when constraint violations are the rare events, and vice versa), so the
    result is flagged instead of silently trusted."""
    acc = merge_accumulators(accs)
    key = f"pin:{region_name}"
    total = acc.total_count()
    n_pos = int(round(acc.sums[key].sum()))
    if n_pos == 0:
        return EstimateResult(math.inf, math.inf, flag="infinite",
                              n_samples=total, n_positive=0)
    val, err = _jackknife_ratio(acc, lambda m: -math.log(m[key]) / (order - 2)
                                if m[key] > 0 else math.nan, [key])
    flag = "ok"
    if min(n_pos, total - n_pos) < min_count or not math.isfinite(err):
        flag = "undersampled"
    return EstimateResult(val, err, flag=flag, n_samples=total, n_positive=n_pos)


def defect_free_energy_estimate(accs: list[MomentAccumulator], sector: int,
                                min_effective: int = 100) -> EstimateResult:
    """Delta F = -log < e^(-Delta E_d) > in the defect-free ensemble.

    Deep in the ordered phase the reweighting factor is dominated by rare
    fluctuations the ensemble may never visit; the estimate is flagged when
    the effective sample size of the weights is small or when essentially no
    energy fluctuations were observed (the estimator then reports the frozen
    upper bound)."""
    acc = merge_accumulators(accs)
    key = f"defect:{sector}"
    val, err = _jackknife_ratio(acc, lambda m: -math.log(m[key])
                                if m[key] > 0 else math.nan, [key])
    total = acc.total_count()
    if not math.isfinite(val):
        return EstimateResult(math.inf, math.inf, flag="infinite", n_samples=total)
    flag = "ok" if math.isfinite(err) else "undersampled"
    if f"defect_w2:{sector}" in acc.sums:
        sum_w = acc.sums[key].sum()
        sum_w2 = acc.sums[f"defect_w2:{sector}"].sum()
        ess = sum_w * sum_w / sum_w2 if sum_w2 > 0 else 0.0
        mean_de = acc.mean(f"defect_de:{sector}")
        var_de = max(acc.mean(f"defect_de2:{sector}") - mean_de ** 2, 0.0)
        if ess < min_effective or (abs(mean_de) > 0.5 and math.sqrt(var_de) < 0.05):
            flag = "undersampled"
    return EstimateResult(val, err, flag=flag, n_samples=total)
