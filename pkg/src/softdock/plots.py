"""SVG figures drawn from a trajectory CSV (position, attitude, thruster forces)."""

import numpy as np


def _load(csv_path):
    data = np.genfromtxt(csv_path, delimiter=",", names=True)
    return data


def write_plots(csv_path, out_dir):
    """Write position.svg, attitude.svg and forces.svg; returns the paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # stable SVG bytes across runs
    matplotlib.rcParams["svg.hashsalt"] = "softdock"
    data = _load(csv_path)
    t = data["t"]
    panels = {
        "position.svg": (("px", "py", "pz"), "position [m]"),
        "attitude.svg": (("q1", "q2", "q3"), "quaternion vector part"),
        "forces.svg": (tuple(f"f{i}" for i in range(1, 7)), "thruster force [N]"),
    }
    paths = []
    for fname, (cols, ylabel) in panels.items():
        fig, ax = plt.subplots(figsize=(6.0, 3.5))
        for c in cols:
            ax.plot(t, data[c], label=c, lw=1.0)
        ax.set_xlabel("time [s]")
        ax.set_ylabel(ylabel)
        ax.grid(alpha=0.3)
        ax.legend(ncol=len(cols), fontsize="small")
        fig.tight_layout()
        path = out_dir / fname
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(path)
    return paths
