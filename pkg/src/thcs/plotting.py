"""Figures written next to the CSV/JSON outputs of the command line tools."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "figure.dpi": 100,
}

_LABELS = {
    "energy": r"$E = N^2\|\nabla\psi\|^2 + \|\rho\|^2$",
    "h1_psi": r"$\|\nabla\psi\|$",
    "h2_psi": r"$\|\Delta\psi\|$",
    "h3_psi": r"$\|\nabla\Delta\psi\|$",
    "l2_rho": r"$\|\rho\|$",
    "h1_rho": r"$\|\nabla\rho\|$",
}


def _size(scale=1.0, ratio=0.62):
    width = 6.0 * scale
    return width, width * ratio


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def _positive(t, v):
    keep = v > 0
    return t[keep], v[keep]


def plot_timeseries(records, path, names=("energy", "h1_psi", "h3_psi", "l2_rho", "h1_rho")):
    t = np.array([r.time for r in records])
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=_size())
        for name in names:
            tt, v = _positive(t, np.array([getattr(r, name) for r in records]))
            if len(v):
                ax.semilogy(tt, v, label=_LABELS.get(name, name))
        ax.set_xlabel("t")
        ax.set_ylabel("norm")
        ax.legend(loc="best")
        _save(fig, path)


def plot_decay(report, records, path):
    """Energy against the beta and alpha envelopes, plus fitted norms."""
    t = np.array([r.time for r in records])
    e = np.array([r.energy for r in records])
    cert = report.certificate
    with plt.rc_context(_RC):
        fig, (ax0, ax1) = plt.subplots(1, 2, figsize=_size(1.4, 0.45))
        tt, ee = _positive(t, e)
        if len(ee):
            ax0.semilogy(tt, ee, "k", lw=1.5, label="E(t)")
            e0 = e[0]
            ax0.semilogy(t, e0 * np.exp(-cert.beta_rigorous * (t - t[0])), "C3--",
                         label=rf"$E_0 e^{{-\beta t}}$, $\beta$={cert.beta_rigorous:.3g}")
            ax0.semilogy(t, e0 * np.exp(-cert.alpha * (t - t[0])), "C0:",
                         label=rf"$E_0 e^{{-\alpha t}}$, $\alpha$={cert.alpha:.3g}")
        ax0.set_xlabel("t")
        ax0.set_title("energy envelope")
        ax0.legend(loc="lower left")
        if report.window is not None:
            for ax in (ax0, ax1):
                ax.axvspan(*report.window, color="0.9", zorder=0)
        for j, (name, fit) in enumerate(report.fits.items()):
            if fit is None or name == "energy":
                continue
            v = np.array([getattr(r, name) for r in records])
            tt, vv = _positive(t, v)
            ax1.semilogy(tt, vv, color=f"C{j}", label=f"{_LABELS.get(name, name)}: rate {fit.rate:.3g}")
            tw = np.linspace(*fit.window, 20)
            ax1.semilogy(tw, np.exp(fit.intercept - fit.rate * tw), color=f"C{j}", ls="--", lw=0.8)
        ax1.set_xlabel("t")
        ax1.set_title("norm decay fits")
        if ax1.lines:
            ax1.legend(loc="lower left")
        _save(fig, path)


def plot_averaging(report, path):
    with plt.rc_context(_RC):
        fig, (ax0, ax1) = plt.subplots(1, 2, figsize=_size(1.4, 0.45))
        eta = np.array(report.eta_values)
        err = np.array(report.sup_errors)
        eps, errs = _positive(1.0 / eta, err) if len(eta) else (eta, err)
        if len(errs):
            ax0.loglog(eps, errs, "ko-", label="sup error")
            if report.fitted_order is not None and len(errs) >= 2:
                slope, icpt = np.polyfit(np.log(eps), np.log(errs), 1)
                ref = np.exp(icpt) * eps**slope
                ax0.loglog(eps, ref, "C3--", label=f"slope {report.fitted_order:.3f}")
            ax0.legend(loc="best")
        ax0.set_xlabel(r"$\varepsilon = 1/\eta$")
        ax0.set_ylabel(r"$\sup_t \|z\|_{1/2} + \|\Theta\|_{1/2}$")
        for key, series in report.error_series.items():
            s = np.array(series)
            ax1.plot(s[:, 0], s[:, 1], lw=0.8, label=rf"$\eta$={float(key):g}")
        ax1.set_xlabel("t")
        ax1.set_title("forced minus averaged")
        if ax1.lines:
            ax1.legend(loc="best")
        _save(fig, path)


def plot_audit(report, path):
    names = ["H2 / lap", "L4 ratio"]
    got = [report.h2_ratio_max, report.l4_ratio_max]
    bound = [report.a1, report.a2]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=_size(0.8))
        x = np.arange(len(names))
        ax.bar(x - 0.2, got, 0.4, label="max observed")
        ax.bar(x + 0.2, bound, 0.4, label="constant")
        ax.set_yscale("log")
        ax.set_xticks(x, names)
        ax.legend(loc="best")
        ax.set_title(f"inequality audit, N={report.resolution}, {report.trials} trials")
        _save(fig, path)
