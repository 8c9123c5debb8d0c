//! Matplotlib scripts written next to the CSVs they read. Run them from the
//! output directory: `python3 plot_*.py`.

pub const SYNTHETIC: &str = r#"import csv
import matplotlib.pyplot as plt
import numpy as np


def grid(path):
    with open(path) as f:
        rows = [tuple(map(float, r)) for r in list(csv.reader(f))[1:]]
    xs = sorted({r[0] for r in rows})
    ys = sorted({r[1] for r in rows})
    z = np.zeros((len(xs), len(ys)))
    for a, b, v in rows:
        z[xs.index(a), ys.index(b)] = v
    return xs, ys, z


fig, axes = plt.subplots(1, 3, figsize=(13, 4))
for ax, (name, title) in zip(axes, [("data.csv", "data"), ("surface_true.csv", "true sigma"), ("surface_pred.csv", "fitted sigma")]):
    try:
        xs, ys, z = grid(name)
    except FileNotFoundError:
        ax.set_visible(False)
        continue
    im = ax.imshow(z.T, origin="lower", extent=[xs[0], xs[-1], ys[0], ys[-1]], aspect="auto")
    if name != "data.csv":
        ax.contour(xs, ys, z.T, levels=[0.5], colors="white")
    ax.set_title(title)
    fig.colorbar(im, ax=ax)
fig.tight_layout()
fig.savefig("synthetic.png", dpi=150)
"#;

pub const COAL: &str = r#"import csv
import matplotlib.pyplot as plt

with open("data.csv") as f:
    rows = [tuple(map(float, r)) for r in list(csv.reader(f))[1:]]
years = [r[0] for r in rows]
cumulative = []
total = 0.0
for r in rows:
    total += r[1]
    cumulative.append(total)

with open("summary.csv") as f:
    summary = list(csv.DictReader(f))
best = min(summary, key=lambda r: float(r["nlml"]))["seed"]
with open("surface.csv") as f:
    series = [r for r in csv.DictReader(f) if r["seed"] == best]

fig, ax = plt.subplots(figsize=(9, 4))
ax.step(years, cumulative, where="mid", color="black", label="cumulative disasters")
ax.axvline(1887, color="grey", linestyle="--", label="1887")
ax.set_xlabel("year")
ax.set_ylabel("cumulative count")
ax2 = ax.twinx()
ax2.plot([float(r["year"]) for r in series], [float(r["sigma"]) for r in series], color="tab:red", label="sigma(w1)")
ax2.set_ylim(0, 1)
ax2.set_ylabel("sigma(w1)")
fig.legend(loc="upper left")
fig.tight_layout()
fig.savefig("coal.png", dpi=150)
"#;

pub const BENCHMARK: &str = r#"import csv
from collections import defaultdict
import matplotlib.pyplot as plt

ratio = defaultdict(list)
with open("benchmark.csv") as f:
    for r in csv.DictReader(f):
        if r["strategy"] != "dense":
            ratio[(r["kernels"], r["strategy"])].append((int(r["n"]), float(r["ratio"])))
cost = defaultdict(list)
with open("timings.csv") as f:
    for r in csv.DictReader(f):
        cost[(r["kernels"], r["strategy"])].append((int(r["n"]), float(r["seconds"])))

kernels = sorted({k for k, _ in ratio})
fig, axes = plt.subplots(2, len(kernels), figsize=(6 * len(kernels), 8), squeeze=False)
for col, k in enumerate(kernels):
    for (kk, s), pts in sorted(ratio.items()):
        if kk == k:
            pts.sort()
            axes[0][col].plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=s)
    for (kk, s), pts in sorted(cost.items()):
        if kk == k:
            pts.sort()
            axes[1][col].loglog([p[0] for p in pts], [p[1] for p in pts], marker="o", label=s)
    axes[0][col].set_title(f"{k} kernels: ratio to exact log det")
    axes[1][col].set_title(f"{k} kernels: seconds")
    for ax in (axes[0][col], axes[1][col]):
        ax.set_xlabel("n")
        ax.legend()
fig.tight_layout()
fig.savefig("benchmark.png", dpi=150)
"#;

pub const SLICES: &str = r#"import csv
import matplotlib.pyplot as plt

with open("slices.csv") as f:
    reader = csv.DictReader(f)
    rows = list(reader)
    coords = [c for c in reader.fieldnames if c not in ("midpoint", "slope", "transition", "crossings")]

fig, axes = plt.subplots(1, 2, figsize=(11, 4))
for ax, key in zip(axes, ["midpoint", "slope"]):
    pts = [r for r in rows if r[key] != ""]
    if len(coords) >= 2:
        sc = ax.scatter([float(r[coords[0]]) for r in pts], [float(r[coords[1]]) for r in pts],
                        c=[float(r[key]) for r in pts], cmap="viridis")
        ax.set_xlabel(coords[0])
        ax.set_ylabel(coords[1])
        fig.colorbar(sc, ax=ax)
    elif coords:
        ax.plot([float(r[coords[0]]) for r in pts], [float(r[key]) for r in pts], marker="o")
        ax.set_xlabel(coords[0])
    else:
        ax.bar([0], [float(pts[0][key])] if pts else [0])
    ax.set_title(key)
fig.tight_layout()
fig.savefig("slices.png", dpi=150)
"#;
