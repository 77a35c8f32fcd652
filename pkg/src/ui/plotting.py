"""
Static rate-versus-distortion plots from bound and simulation tables
"""
from pathlib import Path
from typing import Dict, List, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from ..utils.console import status  # noqa: E402
from ..utils.errors import ConfigError  # noqa: E402

BOUNDS_REQUIRED = ["plant", "h", "D", "rate_lb_bits", "rate_ub_bits"]
SIMULATE_REQUIRED = ["plant", "h", "D", "rate_bits", "entropy_bits"]

# family -> (column, line style, marker)
FAMILIES = {
    "LB": ("rate_lb_bits", "-", None),
    "UB": ("rate_ub_bits", "--", None),
    "OR": ("rate_bits", "none", "o"),
    "OE": ("entropy_bits", "none", "x"),
}
COLORS = ["tab:blue", "tab:orange", "tab:green", "tab:red", "tab:purple", "tab:brown"]

plt.rcParams["svg.hashsalt"] = "ncs-rate-bounds"
plt.rcParams["svg.fonttype"] = "none"


def _require(frame: pd.DataFrame, columns: Sequence[str], path: str) -> None:
    for column in columns:
        if column not in frame.columns:
            raise ConfigError(f"{path}: missing column '{column}'", field=column)


def load_tables(csv_paths: Sequence[str]) -> pd.DataFrame:
    """Merge bound and simulation tables into one long table of (plant, h, D, family, rate)"""
    parts: List[pd.DataFrame] = []
    for path in csv_paths:
        frame = pd.read_csv(path)
        if "rate_lb_bits" in frame.columns or "phi_prime" in frame.columns:
            _require(frame, BOUNDS_REQUIRED, str(path))
            families = ["LB", "UB"]
        elif {"rate_bits", "entropy_bits", "var_z_hat"} & set(frame.columns):
            _require(frame, SIMULATE_REQUIRED, str(path))
            families = ["OR", "OE"]
        else:
            _require(frame, BOUNDS_REQUIRED, str(path))
        for family in families:
            column = FAMILIES[family][0]
            part = frame[["plant", "h", "D", column]].rename(columns={column: "rate"}).dropna(subset=["rate"])
            parts.append(part.assign(family=family))
    if not parts:
        raise ConfigError("no input tables given")
    return pd.concat(parts, ignore_index=True)


def plot_rates(csv_paths: Sequence[str], out_dir: str, fmt: str = "svg") -> List[Path]:
    """One figure per plant: rate against D, LB/UB/OR/OE curves per delay"""
    table = load_tables(csv_paths)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for plant, rows in sorted(table.groupby("plant"), key=lambda item: str(item[0])):
        fig = rate_figure(rows, str(plant))
        path = out / f"{plant}_rates.{fmt}"
        fig.savefig(path, format=fmt, metadata={"Date": None} if fmt == "svg" else None)
        plt.close(fig)
        status(f"Plot written to {path}", "save")
        written.append(path)
    return written


def rate_figure(rows: pd.DataFrame, title: str):
    """Figure with one line per (h, family) of a long table"""
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    colors: Dict[int, str] = {h: COLORS[i % len(COLORS)] for i, h in enumerate(sorted(rows["h"].unique()))}
    for (h, family), curve in sorted(rows.groupby(["h", "family"]), key=lambda item: item[0]):
        _, style, marker = FAMILIES[family]
        curve = curve.sort_values("D")
        ax.plot(
            curve["D"],
            curve["rate"],
            linestyle=style,
            marker=marker,
            color=colors[h],
            label=f"{family}, h={h}",
        )
    ax.set_xlabel("D")
    ax.set_ylabel("rate (bits/sample)")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize="small", ncol=2)
    fig.tight_layout()
    return fig
