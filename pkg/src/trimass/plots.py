"""Figures written alongside the CSV output of the command-line driver."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import matplotlib.tri as mtri  # noqa: E402
import numpy as np  # noqa: E402


def convergence_figure(rows, path, reference_order: int = 3) -> Path:
    """Log-log plot of error against h, with a reference slope line."""
    h = np.array([r.h for r in rows])
    err = np.array([r.error for r in rows])
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.loglog(h, err, "o-", label="pseudo-mass L")
    base = [r.baseline_error for r in rows]
    if all(b is not None for b in base):
        ax.loglog(h, base, "s--", label="exact mass")
    ax.loglog(h, err[0] * (h / h[0]) ** reference_order, "k:", label=f"h^{reference_order}")
    ax.set_xlabel("h")
    ax.set_ylabel("L2 error")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def projection_figure(projection, path, samples: int = 6) -> Path:
    """Filled contours of u_h over the mesh, sampled on a sub-grid of every element."""
    mesh = projection.mesh
    a, b = np.meshgrid(np.linspace(0, 1, samples), np.linspace(0, 1, samples))
    keep = a + b <= 1 + 1e-12
    lam1, lam2 = a[keep], b[keep]
    r = -1 + 2 * lam2
    s = -1 + 2 * (1 - lam1 - lam2)
    x, y = mesh.to_physical(r, s)
    vals = projection.on_element(r, s)
    tri = mtri.Triangulation(x.ravel(), y.ravel())
    fig, ax = plt.subplots(figsize=(4.5, 4))
    cs = ax.tricontourf(tri, vals.ravel(), levels=20)
    ax.triplot(mtri.Triangulation(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles), lw=0.3, color="k")
    fig.colorbar(cs, ax=ax)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
