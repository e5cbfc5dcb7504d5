"""Staggered finite-volume mesh: solid cells on x<0, gas cells on x>0,
interface fixed at x=0.  Scalars live at cell centers, mass flow rates at
cell left faces."""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class StaggeredMesh:
    solid_faces: np.ndarray   # ascending, last = 0
    gas_faces: np.ndarray     # ascending, first = 0
    solid_centers: np.ndarray = field(init=False)
    gas_centers: np.ndarray = field(init=False)
    solid_widths: np.ndarray = field(init=False)
    gas_widths: np.ndarray = field(init=False)

    def __post_init__(self):
        sf = np.asarray(self.solid_faces, dtype=float)
        gf = np.asarray(self.gas_faces, dtype=float)
        if sf[-1] != 0.0 or gf[0] != 0.0:
            raise MeshError("interface face must sit at exactly x=0 on both sides")
        if np.any(np.diff(sf) <= 0) or np.any(np.diff(gf) <= 0):
            raise MeshError("faces must be strictly increasing")
        object.__setattr__(self, "solid_faces", sf)
        object.__setattr__(self, "gas_faces", gf)
        object.__setattr__(self, "solid_centers", 0.5 * (sf[:-1] + sf[1:]))
        object.__setattr__(self, "gas_centers", 0.5 * (gf[:-1] + gf[1:]))
        object.__setattr__(self, "solid_widths", np.diff(sf))
        object.__setattr__(self, "gas_widths", np.diff(gf))

    @property
    def n_solid(self):
        return len(self.solid_centers)

    @property
    def n_gas(self):
        return len(self.gas_centers)

    def to_csv(self, path_or_buf):
        """One face abscissa per line, solid faces then gas faces."""
        buf = path_or_buf if hasattr(path_or_buf, "write") else open(path_or_buf, "w")
        try:
            buf.write("# side,x_face\n")
            for x in self.solid_faces:
                buf.write(f"solid,{float(x)!r}\n")
            for x in self.gas_faces:
                buf.write(f"gas,{float(x)!r}\n")
        finally:
            if buf is not path_or_buf:
                buf.close()

    @classmethod
    def from_csv(cls, path_or_buf):
        buf = path_or_buf if hasattr(path_or_buf, "read") else open(path_or_buf)
        try:
            solid, gas = [], []
            for line in buf:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                side, x = line.split(",")
                (solid if side == "solid" else gas).append(float(x))
        finally:
            if buf is not path_or_buf:
                buf.close()
        return cls(np.array(solid), np.array(gas))


def _march_side(x_prof, T_prof, dT_threshold, min_dx, max_dx):
    """Place face abscissas from 0 outward (increasing |x|) so the
    interpolated temperature changes by at most dT_threshold per interval."""
    faces = [0.0]
    x_end = x_prof[-1]
    interp = lambda x: np.interp(x, x_prof, T_prof)
    while faces[-1] < x_end:
        x0 = faces[-1]
        T0 = interp(x0)
        lo, hi = x0 + min_dx, min(x0 + max_dx, x_end)
        if hi <= lo:
            faces.append(x_end)
            break
        # largest step with |dT| <= threshold, by bisection on the profile
        if abs(interp(hi) - T0) <= dT_threshold:
            step_to = hi
        else:
            a, b = lo, hi
            for _ in range(60):
                m = 0.5 * (a + b)
                if abs(interp(m) - T0) <= dT_threshold:
                    a = m
                else:
                    b = m
            step_to = a
        if step_to - x0 < min_dx:
            step_to = x0 + min_dx
        faces.append(min(step_to, x_end))
    return np.array(faces)


def _extend(faces, target, growth):
    """Append geometrically growing cells until the last face >= target."""
    out = list(faces)
    dx = out[-1] - out[-2] if len(out) > 1 else target / 10.0
    while out[-1] < target:
        dx *= growth
        out.append(out[-1] + dx)
    return np.array(out)


def profile_thickness(x, T, frac=0.99):
    """Abscissa extent over which T covers frac of its total variation."""
    x = np.asarray(x, dtype=float)
    T = np.asarray(T, dtype=float)
    span = T[-1] - T[0]
    if span == 0.0:
        return abs(x[-1] - x[0])
    target = T[0] + frac * span
    idx = np.nonzero((T - target) * np.sign(span) >= 0)[0]
    return abs(x[idx[0]] - x[0]) if len(idx) else abs(x[-1] - x[0])


def adaptive_mesh_from_profile(profile, dT_threshold, extension_factor=10.0,
                               growth=1.2, min_dx=1e-8, max_dx_factor=0.5):
    """Build a mesh adapted to a temperature profile.

    profile: (x, T) arrays spanning both phases (x<0 solid, x>0 gas),
    strictly increasing in x and containing x=0.
    Faces are placed so successive points differ by at most dT_threshold in
    interpolated temperature; each side is then extended with geometrically
    growing cells (ratio `growth`) out to extension_factor times the
    thermal/flame thickness.  dT_threshold may be a scalar or a
    (solid, gas) pair.
    """
    x, T = (np.asarray(a, dtype=float) for a in profile)
    if len(x) == 0:
        raise MeshError("empty profile")
    if np.any(np.diff(x) <= 0):
        raise MeshError("profile abscissas must be strictly increasing")
    dT_s, dT_g = np.broadcast_to(dT_threshold, (2,)).astype(float)
    if dT_s <= 0 or dT_g <= 0:
        raise MeshError("dT_threshold must be > 0")
    mask_s = x <= 0.0
    mask_g = x >= 0.0
    if not mask_s.any() or not mask_g.any():
        raise MeshError("profile must span both sides of x=0")

    # solid side, marched in the +|x| direction then mirrored
    xs, Ts = -x[mask_s][::-1], T[mask_s][::-1]
    th_s = profile_thickness(xs, Ts)
    f_s = _march_side(xs, Ts, dT_s, min_dx, max_dx_factor * max(th_s, min_dx))
    f_s = _extend(f_s, extension_factor * th_s, growth)
    solid_faces = -f_s[::-1]

    xg, Tg = x[mask_g], T[mask_g]
    th_g = profile_thickness(xg, Tg)
    f_g = _march_side(xg, Tg, dT_g, min_dx, max_dx_factor * max(th_g, min_dx))
    gas_faces = _extend(f_g, extension_factor * th_g, growth)
    return StaggeredMesh(solid_faces, gas_faces)


def _extend_exact(faces, target, k):
    """Append exactly k geometrically growing cells reaching `target`."""
    from scipy.optimize import brentq
    x0 = faces[-1]
    dx = faces[-1] - faces[-2]
    rem = target - x0
    if k <= 0 or rem <= 0:
        raise MeshError("no room for the requested extension cells")

    def gap(g):
        return dx * g * (g**k - 1.0) / (g - 1.0) - rem

    if gap(1.0 + 1e-9) >= 0.0:
        # equal cells would already overshoot; shrink toward the profile end
        g = (rem / (k * dx)) if k > 1 else rem / dx
        steps = np.full(k, rem / k)
    else:
        g = brentq(gap, 1.0 + 1e-9, 1e3)
        steps = dx * g ** np.arange(1, k + 1)
    out = x0 + np.cumsum(steps)
    out[-1] = target
    return np.concatenate([faces, out])


def _side_faces_with_count(xp, Tp, n_target, extension_factor, growth,
                           min_dx, max_dx_factor):
    """Faces for one side with exactly n_target cells.

    The threshold for the marched core is found by bisection; the remaining
    cells form a geometric extension whose ratio is solved so the outer
    face lands exactly on extension_factor times the thermal thickness.
    """
    th = profile_thickness(xp, Tp)
    target_x = extension_factor * max(th, min_dx)
    max_dx = max_dx_factor * max(th, min_dx)

    def core(dT):
        return _march_side(xp, Tp, dT, min_dx, max_dx)

    def n_core(dT):
        return len(core(dT)) - 1

    # nominal extension size at the requested growth ratio, refined once
    k = max(3, int(round(np.log(target_x / xp[-1]) / np.log(growth) / 4)))
    for _ in range(3):
        want = n_target - k
        lo, hi = 1e-3, 1e4
        for _ in range(80):
            mid = np.sqrt(lo * hi)
            if n_core(mid) > want:
                lo = mid
            else:
                hi = mid
        dT = hi if n_core(hi) == want else lo
        faces = core(dT)
        rem = target_x - faces[-1]
        dx = faces[-1] - faces[-2]
        k_new = n_target - (len(faces) - 1)
        if k_new >= 1 and rem > 0:
            k_nom = int(np.ceil(np.log1p(rem * (growth - 1.0) / (dx * growth))
                                / np.log(growth)))
            if k_new == k or abs(k_new - k_nom) <= abs(k - k_nom):
                k = k_new
                break
        k = max(1, n_target - (len(faces) - 1))
    k = n_target - (len(faces) - 1)
    return _extend_exact(faces, target_x, k)


def mesh_with_counts(profile, counts, extension_factor=10.0, growth=1.2,
                     min_dx=1e-8, max_dx_factor=0.5):
    """Adapted mesh with exactly (n_solid, n_gas) cells.

    Same construction as adaptive_mesh_from_profile, but the per-side
    temperature thresholds are calibrated internally to yield the requested
    cell counts.
    """
    x, T = (np.asarray(a, dtype=float) for a in profile)
    mask_s = x <= 0.0
    mask_g = x >= 0.0
    if not mask_s.any() or not mask_g.any():
        raise MeshError("profile must span both sides of x=0")
    xs, Ts = -x[mask_s][::-1], T[mask_s][::-1]
    f_s = _side_faces_with_count(xs, Ts, counts[0], extension_factor, growth,
                                 min_dx, max_dx_factor)
    xg, Tg = x[mask_g], T[mask_g]
    f_g = _side_faces_with_count(xg, Tg, counts[1], extension_factor, growth,
                                 min_dx, max_dx_factor)
    return StaggeredMesh(-f_s[::-1], f_g)


# Preset meshes regenerate the documented cell counts from the bundled
# steady profiles.
_PRESETS = {
    "ignition":    dict(profile="baseline", counts=(99, 291)),
    "limit_cycle": dict(profile="unstable", counts=(55, 146)),
}


def load_steady_profile(name):
    """Bundled steady (x, T) profile for a model preset."""
    from .steady import preset_steady
    return preset_steady(name).combined_profile()


def preset_mesh(name):
    """Meshes used by the bundled scenarios, generated from stored steady
    profiles.  'convergence' takes an optional threshold suffix, e.g.
    'convergence:5' for a 5 K threshold."""
    if name.startswith("convergence"):
        dT = float(name.split(":")[1]) if ":" in name else 5.0
        x, T = load_steady_profile("baseline")
        return adaptive_mesh_from_profile((x, T), dT)
    if name not in _PRESETS:
        raise MeshError(f"unknown mesh preset {name!r}")
    entry = _PRESETS[name]
    profile = load_steady_profile(entry["profile"])
    return mesh_with_counts(profile, entry["counts"])
