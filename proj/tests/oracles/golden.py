"""Independent high-precision oracle for the frozen values used by the C++ tests.

Everything here is evaluated with mpmath from the raw formulas; nothing imports
or mirrors the C++ implementation. The nu weight is computed two ways: from the
closed-form h integrand and, independently, as the Fisher information of the
biased ToA range pdf with respect to the distance.

Run from the repository root:  python3 tests/oracles/golden.py
"""
import json
import itertools
from pathlib import Path

import mpmath as mp

mp.mp.dps = 50
LIGHT = mp.mpf(299792458)
XI = 10 / mp.log(10)
N0 = mp.mpf(10) ** (mp.mpf(-174) / 10) / 1000  # W/Hz


def q(z):
    return mp.erfc(z / mp.sqrt(2)) / 2


def q_diff(a, b):
    """Q(a) - Q(b) for b > a without cancellation."""
    if a >= 0:
        return q(a) - q(b)
    if b <= 0:
        return q(-b) - q(-a)
    return 1 - q(b) - q(-a)


def sigma(d, s0, d0, alpha):
    return s0 * (mp.mpf(d) / d0) ** (mp.mpf(alpha) / 2)


def h(y, lam, d, s0, d0, alpha):
    s = sigma(d, s0, d0, alpha)
    k = alpha * s / (d * mp.sqrt(2))
    c = lam / (s * mp.sqrt(2))
    num = (mp.exp(-(y + c) ** 2) * (1 + alpha * lam / (2 * d) + k * y)
           - mp.exp(-y ** 2) * (1 + k * y)) ** 2
    return num / q_diff(mp.sqrt(2) * y, mp.sqrt(2) * y + lam / s)


def nu_closed_form(d, lam, s0, d0, alpha):
    s = sigma(d, s0, d0, alpha)
    c = lam / (s * mp.sqrt(2))
    pts = sorted({-c - 14, -c, -c / 2, 0, 14})
    integral = mp.quad(lambda y: h(y, lam, d, s0, d0, alpha), pts)
    return integral / (lam * s * mp.pi * mp.sqrt(2))


def nu_fisher(d, lam, s0, d0, alpha):
    """E[(d/dd log f(rho|d))^2] for the uniform-bias + Gaussian ToA pdf."""
    d = mp.mpf(d)

    def pdf(rho, dd):
        s = sigma(dd, s0, d0, alpha)
        return q_diff((rho - dd - lam) / s, (rho - dd) / s) / lam

    s = sigma(d, s0, d0, alpha)

    def integrand(rho):
        fv = pdf(rho, d)
        if fv == 0:
            return mp.mpf(0)
        df = mp.diff(lambda dd: pdf(rho, dd), d)
        return df ** 2 / fv

    pts = sorted({d - 14 * s, d, d + lam / 2, d + lam, d + lam + 14 * s})
    return mp.quad(integrand, pts)


def gain(f, d, alpha, shadow_db):
    return (4 * mp.pi * f * d / LIGHT) ** (-mp.mpf(alpha)) * mp.exp(-mp.mpf(shadow_db) ** 2 / (2 * XI ** 2))


def peb(anchors, p):
    """anchors: list of ((x, y), nu). Direct 2x2 FIM inverse trace."""
    j = mp.matrix(2, 2)
    for (qx, qy), nu in anchors:
        dx, dy = qx - p[0], qy - p[1]
        r = mp.sqrt(dx * dx + dy * dy)
        ux, uy = dx / r, dy / r
        j[0, 0] += nu * ux * ux
        j[0, 1] += nu * ux * uy
        j[1, 0] += nu * ux * uy
        j[1, 1] += nu * uy * uy
    det = j[0, 0] * j[1, 1] - j[0, 1] * j[1, 0]
    return mp.sqrt((j[0, 0] + j[1, 1]) / det)


def f(x):
    return float(x)


def scalars():
    out = {}
    out["channel_gain_3p5ghz_100m_a3p5_s9"] = f(gain(mp.mpf("3.5e9"), 100, mp.mpf("3.5"), 9))
    out["noise_sigma_1e-4_250m_a3p5"] = f(sigma(250, mp.mpf("1e-4"), 1, mp.mpf("3.5")))
    # y = 0, lambda = sigma, alpha = 0 (sigma0 = 1 m, any d)
    out["h_y0_lam_eq_sigma_a0"] = f(h(0, mp.mpf(1), 100, mp.mpf(1), 1, 0))
    out["h_y-0.7_lam0.5_d120_s1e-3_a3"] = f(h(mp.mpf("-0.7"), mp.mpf("0.5"), 120, mp.mpf("1e-3"), 1, 3))
    out["h_y1.5_lam40sigma_a0"] = f(h(mp.mpf("1.5"), mp.mpf(40), 100, mp.mpf(1), 1, 0))
    out["h_y1.5_gauss_tail_limit"] = f(mp.exp(-2 * mp.mpf("1.5") ** 2) / q(mp.sqrt(2) * mp.mpf("1.5")))
    nu_cases = [
        # d, lambda, sigma0, alpha
        (100, 1, "1e-4", 0),
        (100, 1, "1e-4", "3.5"),
        (250, 1, "1e-4", "3.5"),
        (50, "0.3", "1e-3", "2.5"),
        (10, 1, "1e-2", 3),
        (400, 10, "1e-3", "3.5"),
        (5, 1, "1e-4", "3.5"),
        (1500, 1, "1e-4", "2.5"),
    ]
    rows = []
    for d, lam, s0, a in nu_cases:
        lam, s0, a = mp.mpf(lam), mp.mpf(s0), mp.mpf(a)
        closed = nu_closed_form(d, lam, s0, 1, a)
        fisher = nu_fisher(d, lam, s0, 1, a)
        assert abs(closed - fisher) / fisher < mp.mpf("1e-12"), (d, lam, s0, a, closed, fisher)
        rows.append({"d_m": d, "lambda_m": f(lam), "sigma0_m": f(s0), "alpha": f(a), "nu": f(fisher)})
    out["nu_cases"] = rows
    return out


SMALL_TOPOLOGY = {
    "schema": "loko-topology",
    "version": 1,
    "budget": 2,
    "area": {"width_m": 400.0, "height_m": 400.0},
    "constants": {"light_speed_mps": 299792458.0, "noise_psd_w_per_hz": float(N0)},
    "lte": {"tx_power_w": 30.0, "carrier_freq_hz": 1.8e9, "bandwidth_hz": 2.0e7,
            "pathloss_exp": 3.5, "shadowing_std_db": 6.0,
            "noise_model": {"sigma0_m": 1e-3, "d0_m": 1.0, "alpha_meas": 3.5, "lambda_max_m": 10.0}},
    "nr": {"tx_power_w": 20.0, "carrier_freq_hz": 3.5e9, "bandwidth_hz": 1.0e8,
           "pathloss_exp": 3.5, "shadowing_std_db": 9.0,
           "noise_model": {"sigma0_m": 1e-4, "d0_m": 1.0, "alpha_meas": 3.5, "lambda_max_m": 1.0}},
    "enbs": [{"x_m": 20.0, "y_m": 30.0}, {"x_m": 380.0, "y_m": 60.0}, {"x_m": 210.0, "y_m": 370.0}],
    "candidate_sites": [{"x_m": 120.0, "y_m": 110.0}, {"x_m": 260.0, "y_m": 140.0},
                        {"x_m": 170.0, "y_m": 280.0}, {"x_m": 330.0, "y_m": 300.0}],
    "test_points": [{"x_m": 150.0, "y_m": 150.0}, {"x_m": 250.0, "y_m": 250.0}, {"x_m": 90.0, "y_m": 310.0}],
}


def tier(t):
    nm = t["noise_model"]
    return dict(P=mp.mpf(t["tx_power_w"]), f=mp.mpf(t["carrier_freq_hz"]), W=mp.mpf(t["bandwidth_hz"]),
                a=mp.mpf(t["pathloss_exp"]), sh=mp.mpf(t["shadowing_std_db"]),
                s0=mp.mpf(nm["sigma0_m"]), d0=mp.mpf(nm["d0_m"]), am=mp.mpf(nm["alpha_meas"]),
                lam=mp.mpf(nm["lambda_max_m"]))


def geometry(topo):
    lte, nr = tier(topo["lte"]), tier(topo["nr"])
    n0 = mp.mpf(topo["constants"]["noise_psd_w_per_hz"])
    pos = lambda p: (mp.mpf(p["x_m"]), mp.mpf(p["y_m"]))
    enbs = [pos(p) for p in topo["enbs"]]
    sites = [pos(p) for p in topo["candidate_sites"]]
    tps = [pos(p) for p in topo["test_points"]]
    n_lte = n0 * lte["W"] / lte["P"]
    n_nr = n0 * nr["W"] / nr["P"]
    out = {"test_points": []}
    for p in tps:
        dist = [mp.sqrt((s[0] - p[0]) ** 2 + (s[1] - p[1]) ** 2) for s in sites]
        theta = [mp.atan2(s[1] - p[1], s[0] - p[0]) for s in sites]
        g = [gain(nr["f"], d, nr["a"], nr["sh"]) for d in dist]
        nu = [nu_fisher(d, nr["lam"], nr["s0"], nr["d0"], nr["am"]) for d in dist]
        F = [[0.0] * len(sites) for _ in sites]
        for i, j in itertools.combinations(range(len(sites)), 2):
            F[i][j] = f(nu[i] * nu[j] * mp.sin(theta[j] - theta[i]) ** 2)
        ed = [mp.sqrt((e[0] - p[0]) ** 2 + (e[1] - p[1]) ** 2) for e in enbs]
        eg = [gain(lte["f"], d, lte["a"], lte["sh"]) for d in ed]
        enu = [nu_fisher(d, lte["lam"], lte["s0"], lte["d0"], lte["am"]) for d in ed]
        u = peb(list(zip(enbs, enu)), p)
        c = max(lte["W"] * mp.log(1 + eg[m] / (sum(eg) - eg[m] + n_lte), 2) for m in range(len(enbs)))
        # 5G rate at site 1 with x = (1, 1, 0, 1)
        x = [1, 1, 0, 1]
        interf = sum(g[n] * x[n] for n in range(len(sites)) if n != 1)
        rate = nr["W"] * mp.log(1 + g[1] / (interf + n_nr), 2)
        act = [k for k in range(len(sites)) if x[k]]
        peb5 = peb([(sites[k], nu[k]) for k in act], p)
        out["test_points"].append({
            "distance_m": [f(v) for v in dist], "theta_rad": [f(v) for v in theta],
            "gain": [f(v) for v in g], "nu": [f(v) for v in nu], "F": F,
            "lte_peb_m": f(u), "lte_rate_bps": f(c),
            "nr_rate_site1_x1101_bps": f(rate), "nr_peb_x1101_m": f(peb5),
        })
    return out


def main():
    root = Path(__file__).resolve().parents[1] / "data"
    root.mkdir(parents=True, exist_ok=True)
    (root / "golden_scalars.json").write_text(json.dumps(scalars(), indent=2) + "\n")
    (root / "small_topology.json").write_text(json.dumps(SMALL_TOPOLOGY, indent=2) + "\n")
    (root / "golden_geometry.json").write_text(json.dumps(geometry(SMALL_TOPOLOGY), indent=2) + "\n")


if __name__ == "__main__":
    main()
