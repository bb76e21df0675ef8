"""Static SVG plots for simulation and comparison reports."""

from __future__ import annotations

import numpy as np


def _mpl():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # deterministic SVG output across reruns
    plt.rcParams["svg.hashsalt"] = "windlq"
    return plt


_SVG_META = {"Date": None}


def plot_power_tracking(traj, path, title="Power tracking"):
    plt = _mpl()
    t = traj["time_s"]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
    ax1.plot(t, traj["p_d_w"] / 1e6, label="desired", lw=1.0, color="k")
    ax1.plot(t, traj["p_w"] / 1e6, label="output", lw=0.8)
    ax1.set_ylabel("power [MW]")
    ax1.legend(loc="best")
    ax1.set_title(title)
    ax2.plot(t, traj["v_true_mps"], label="wind", lw=0.8)
    ax2.plot(t, traj["v_hat_mps"], label="estimate", lw=0.8, ls="--")
    ax2.set_ylabel("wind [m/s]")
    ax2.set_xlabel("time [s]")
    ax2.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, metadata=_SVG_META)
    plt.close(fig)


def plot_actuators(traj, path, title="Actuators"):
    plt = _mpl()
    t = traj["time_s"]
    fig, (ax1, ax2, ax3) = plt.subplots(3, 1, figsize=(9, 7), sharex=True)
    ax1.plot(t, np.degrees(traj["theta_rad"]), lw=0.8)
    ax1.set_ylabel("pitch [deg]")
    ax1.set_title(title)
    ax2.plot(t, traj["m_g_nm"] / 1e3, lw=0.8)
    ax2.set_ylabel("torque [kNm]")
    ax3.plot(t, np.degrees(traj["u1_eff_radps"]), lw=0.6, label="pitch rate [deg/s]")
    ax3.plot(t, traj["u2_eff_nmps"] / 1e3, lw=0.6, label="torque rate [kNm/s]")
    ax3.set_ylabel("rates")
    ax3.set_xlabel("time [s]")
    ax3.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, metadata=_SVG_META)
    plt.close(fig)


def plot_del_comparison(channels, dels_a, dels_b, labels, path,
                        title="Damage-equivalent loads"):
    plt = _mpl()
    x = np.arange(len(channels))
    width = 0.38
    fig, ax = plt.subplots(figsize=(8, 4.5))
    # normalize per channel so differently scaled channels share one axis
    ref = np.array([max(a, b, 1e-300) for a, b in zip(dels_a, dels_b)])
    ax.bar(x - width / 2, np.array(dels_a) / ref, width, label=labels[0])
    ax.bar(x + width / 2, np.array(dels_b) / ref, width, label=labels[1])
    ax.set_xticks(x)
    ax.set_xticklabels(channels, rotation=15)
    ax.set_ylabel("DEL (normalized per channel)")
    ax.set_title(title)
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, metadata=_SVG_META)
    plt.close(fig)
