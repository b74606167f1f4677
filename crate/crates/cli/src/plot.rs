//! Generated matplotlib script for `trajectory.csv`.

use delay_consensus::sim::DelayProfile;

/// One panel per state component, one curve per agent, sharing the time axis.
pub fn plot_script(agents: usize, state_dim: usize, profiles: &[DelayProfile]) -> String {
    let delays: Vec<String> = profiles
        .iter()
        .enumerate()
        .map(|(k, p)| match p {
            DelayProfile::Constant { value } => format!("tau_{} = {value}", k + 1),
            DelayProfile::Sinusoidal { tau_bar, omega, phase } => {
                format!("tau_{}(t) = {tau_bar}/2 (1 + sin({omega} t + {phase}))", k + 1)
            }
        })
        .collect();
    format!(
        r#"#!/usr/bin/env python3
# Plots trajectory.csv from the same directory; writes trajectory.png.
import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

AGENTS = {agents}
STATE_DIM = {state_dim}
TITLE = "State trajectories with {title}"

here = os.path.dirname(os.path.abspath(__file__))
path = sys.argv[1] if len(sys.argv) > 1 else os.path.join(here, "trajectory.csv")
with open(path, newline="") as f:
    rows = list(csv.DictReader(f))
t = [float(r["t"]) for r in rows]

fig, axes = plt.subplots(STATE_DIM, 1, sharex=True, figsize=(7, 2.6 * STATE_DIM), squeeze=False)
for j in range(STATE_DIM):
    ax = axes[j][0]
    for i in range(AGENTS):
        key = "x_%d_%d" % (i + 1, j + 1)
        ax.plot(t, [float(r[key]) for r in rows], label="agent %d" % (i + 1))
    ax.set_ylabel("$x_{{i%d}}$" % (j + 1))
    ax.grid(True, alpha=0.3)
axes[0][0].legend(loc="upper right")
axes[0][0].set_title(TITLE)
axes[-1][0].set_xlabel("t (s)")
fig.tight_layout()
out = os.path.join(os.path.dirname(os.path.abspath(path)), "trajectory.png")
fig.savefig(out, dpi=150)
print("wrote", out)
"#,
        title = delays.join(", ")
    )
}
