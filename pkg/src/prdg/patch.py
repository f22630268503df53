"""Element patches grown ring by ring through face neighbours."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# cardinality of S(K) per profile, indexed by degree 2..6
PATCH_SIZES = {
    "example1": {2: 9, 3: 15, 4: 22, 5: 29, 6: 38},
    "example2": {2: 9, 3: 16, 4: 23, 5: 32, 6: 45},
    "example3": {2: 9, 3: 20, 4: 28, 5: 38, 6: 49},
}


class PatchError(ValueError):
    pass


def dim_poly(m: int, dim: int = 2) -> int:
    """Dimension of the space of polynomials of total degree <= m."""
    if dim == 1:
        return m + 1
    if dim == 2:
        return (m + 1) * (m + 2) // 2
    raise ValueError("only 1D and 2D polynomial spaces are supported")


@dataclass(frozen=True)
class Patch:
    owner: int
    members: np.ndarray  # owner first, then in order of addition
    points: np.ndarray   # collocation points of the members

    def __len__(self):
        return len(self.members)


def patch_size_for_degree(m: int, profile: str = "example1", custom: int | None = None) -> int:
    if profile == "custom":
        if custom is None:
            raise PatchError("custom profile needs an explicit patch size")
        if custom < dim_poly(m):
            raise PatchError(f"patch size {custom} is below dim P_{m} = {dim_poly(m)}; "
                             "the least-squares fit would not be unique")
        return int(custom)
    try:
        sizes = PATCH_SIZES[profile]
    except KeyError:
        raise PatchError(f"unknown patch-size profile {profile!r}") from None
    if m not in sizes:
        raise PatchError(f"profile {profile!r} covers degrees 2..6, got {m}")
    return sizes[m]


def grow_patch(adjacency, centers, owner: int, target: int) -> np.ndarray:
    """Collect ``target`` cells around ``owner``.

    Whole rings of face neighbours are added until the count reaches
    ``target``; the last ring is then cut down to the cells closest to the
    owner's center (ties broken by index).  Works on any adjacency graph.
    """
    if target < 1:
        raise PatchError("patch size must be >= 1")
    centers = np.asarray(centers, dtype=float)
    if centers.ndim == 1:
        centers = centers[:, None]
    members = [owner]
    seen = {owner}
    frontier = [owner]
    while len(members) < target:
        ring = sorted({j for i in frontier for j in adjacency[i] if j not in seen})
        if not ring:
            raise PatchError(f"cannot collect {target} cells around cell {owner}: "
                             f"only {len(members)} reachable")
        dist = np.linalg.norm(centers[ring] - centers[owner], axis=1)
        order = sorted(range(len(ring)), key=lambda i: (dist[i], ring[i]))
        ring = [ring[i] for i in order]
        frontier = ring
        seen.update(ring)
        members.extend(ring[: target - len(members)])
    return np.array(members, dtype=np.int64)


def build_patch(mesh, owner: int, target: int, adjacency=None) -> Patch:
    if target > mesh.n_cells:
        raise PatchError(f"patch size {target} exceeds the number of cells ({mesh.n_cells})")
    adjacency = mesh.adjacency() if adjacency is None else adjacency
    members = grow_patch(adjacency, mesh.barycenter, owner, target)
    return Patch(owner, members, mesh.barycenter[members])


def build_patches(mesh, target: int) -> list[Patch]:
    adjacency = mesh.adjacency()
    return [build_patch(mesh, k, target, adjacency) for k in range(mesh.n_cells)]


def is_face_connected(adjacency, members) -> bool:
    members = [int(i) for i in members]
    inside = set(members)
    stack, seen = [members[0]], {members[0]}
    while stack:
        i = stack.pop()
        for j in adjacency[i]:
            if j in inside and j not in seen:
                seen.add(j)
                stack.append(j)
    return seen == inside
