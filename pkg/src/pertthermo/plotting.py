"""Optional PNG rendering of the figure panels (needs matplotlib)."""

from __future__ import annotations

from pathlib import Path

from .errors import IoFailure

STYLE = {
    "font.size": 9,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "mathtext.fontset": "stix",
    "savefig.dpi": 200,
}
LABELS = {
    "W1": r"$W^{(1)}$", "w1": r"$w^{(1)}$", "U1": r"$U^{(1)}$",
    "Q2": r"$Q^{(2)}$", "q2": r"$q^{(2)}$", "U2": r"$U^{(2)}$", "U_sum": r"$U^{(1)}+U^{(2)}$",
}


def render_panels(panels, path, omega=None):
    """Draw ``panel_a``, ``panel_b`` and ``panel_c`` side by side into ``path``."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise IoFailure("PNG output needs matplotlib (pip install 'artifact[plot]')",
                        key="--png") from None
    path = Path(path)
    with matplotlib.rc_context(STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(10, 3), constrained_layout=True)
        for ax, (name, cols) in zip(axes, sorted(panels.items())):
            t = cols["t"]
            for c, y in cols.items():
                if c != "t":
                    ax.plot(t, y, label=LABELS.get(c, c))
            ax.set_xlabel(r"$t$")
            ax.set_title(f"({name[-1]})")
            ax.legend(frameon=False)
        if omega is not None:
            fig.suptitle(rf"$\omega = {omega:g}$")
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(path, metadata={"Software": None})
        except OSError as exc:
            raise IoFailure(f"cannot write: {exc.strerror}", key=str(path)) from None
        finally:
            plt.close(fig)
    return path
