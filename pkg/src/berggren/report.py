"""Optional figure rendering next to the delimited output.

Every CSV the command-line tool writes can be accompanied by a PNG
rendering of the same rows (--plot); the CSV stays the primary,
machine-readable artifact and the figures add no information.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = [
    "save_study_plot",
    "save_sweep_plot",
    "save_wavefunction_plot",
]


def save_sweep_plot(rows, exact, path, title) -> None:
    """Energy/width/rms convergence of a scheme sweep.

    rows: dicts with scheme, n_gl, E, Gamma, rms_re, rms_im (failed
    cells absent); exact: (E, Gamma) from direct integration.
    """
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6))
    schemes = sorted({r["scheme"] for r in rows})
    for scheme in schemes:
        sub = sorted((r for r in rows if r["scheme"] == scheme),
                     key=lambda r: r["n_gl"])
        n = [r["n_gl"] for r in sub]
        axes[0].plot(n, [r["E"] for r in sub], "o-", label=scheme)
        axes[1].plot(n, [r["Gamma"] for r in sub], "o-", label=scheme)
        rr = [(r["n_gl"], r["rms_re"]) for r in sub if r["rms_re"] > 0]
        if rr:
            axes[2].semilogy(*zip(*rr), "o-", label=scheme)
    if exact is not None:
        axes[0].axhline(exact[0], color="k", lw=0.8, ls="--", label="exact")
        axes[1].axhline(exact[1], color="k", lw=0.8, ls="--")
    axes[0].set_xlabel("N_GL")
    axes[0].set_ylabel("E (MeV)")
    axes[1].set_xlabel("N_GL")
    axes[1].set_ylabel("Gamma (keV)")
    axes[2].set_xlabel("N_GL")
    axes[2].set_ylabel("rms of Re(u)")
    axes[0].legend(fontsize=8)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_study_plot(results, path) -> None:
    """Quadrature-error curves Delta I(k) per study configuration."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for cfg, rows in results:
        k = [x[0] for x in rows]
        d = [x[1] for x in rows]
        ax.semilogy(k, d, lw=1,
                    label=f"a={cfg.label} kmax={cfg.k_max:g} N={cfg.n_gl}")
    ax.set_xlabel("k (fm$^{-1}$)")
    ax.set_ylabel(r"$\Delta I$")
    ax.legend(fontsize=6, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_wavefunction_plot(r, u, u_exact, path, title) -> None:
    """Reconstructed vs direct-integration radial wave function."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6), sharex=True)
    for ax, part, name in ((axes[0], lambda v: v.real, "Re"),
                           (axes[1], lambda v: v.imag, "Im")):
        ax.plot(r, part(u_exact), "k-", lw=1, label="direct")
        ax.plot(r, part(u), "r--", lw=1, label="reconstructed")
        ax.set_xlabel("r (fm)")
        ax.set_ylabel(f"{name} u(r)")
    axes[0].legend(fontsize=8)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
