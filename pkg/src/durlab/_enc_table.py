"""Tabulated ENC-NEW critical values (recursive scheme).

Generated by tools/gen_enc_table.py (reps=100000, steps=2000, seed=20010301).
"""

LEVELS = (0.90, 0.95, 0.99)

# (k_extra, pi): (q90, q95, q99)
TABLE = {
    (1, 0.1): (0.336, 0.533, 1.021),
    (1, 0.2): (0.476, 0.765, 1.477),
    (1, 0.4): (0.663, 1.073, 2.054),
    (1, 0.6): (0.793, 1.291, 2.498),
    (1, 0.8): (0.890, 1.458, 2.832),
    (1, 1.0): (0.975, 1.596, 3.072),
    (1, 1.2): (1.046, 1.699, 3.324),
    (1, 1.4): (1.107, 1.805, 3.505),
    (1, 1.6): (1.160, 1.886, 3.680),
    (1, 1.8): (1.206, 1.973, 3.829),
    (1, 2.0): (1.245, 2.037, 4.000),
    (1, 2.5): (1.332, 2.181, 4.246),
    (1, 3.0): (1.397, 2.286, 4.495),
    (1, 4.0): (1.520, 2.474, 4.819),
    (1, 5.0): (1.600, 2.611, 5.066),
    (2, 0.1): (0.524, 0.772, 1.327),
    (2, 0.2): (0.741, 1.096, 1.914),
    (2, 0.4): (1.015, 1.511, 2.710),
    (2, 0.6): (1.223, 1.829, 3.221),
    (2, 0.8): (1.368, 2.032, 3.646),
    (2, 1.0): (1.495, 2.239, 3.984),
    (2, 1.2): (1.595, 2.396, 4.288),
    (2, 1.4): (1.682, 2.541, 4.570),
    (2, 1.6): (1.760, 2.663, 4.768),
    (2, 1.8): (1.822, 2.759, 4.951),
    (2, 2.0): (1.889, 2.856, 5.122),
    (2, 2.5): (2.017, 3.063, 5.519),
    (2, 3.0): (2.132, 3.223, 5.798),
    (2, 4.0): (2.301, 3.496, 6.287),
    (2, 5.0): (2.442, 3.683, 6.605),
    (3, 0.1): (0.659, 0.938, 1.547),
    (3, 0.2): (0.928, 1.328, 2.205),
    (3, 0.4): (1.276, 1.848, 3.067),
    (3, 0.6): (1.524, 2.205, 3.697),
    (3, 0.8): (1.701, 2.480, 4.202),
    (3, 1.0): (1.855, 2.708, 4.641),
    (3, 1.2): (2.004, 2.906, 4.951),
    (3, 1.4): (2.124, 3.067, 5.243),
    (3, 1.6): (2.218, 3.219, 5.467),
    (3, 1.8): (2.310, 3.348, 5.656),
    (3, 2.0): (2.374, 3.450, 5.863),
    (3, 2.5): (2.543, 3.701, 6.332),
    (3, 3.0): (2.671, 3.905, 6.673),
    (3, 4.0): (2.891, 4.213, 7.277),
    (3, 5.0): (3.045, 4.444, 7.602),
    (4, 0.1): (0.773, 1.078, 1.748),
    (4, 0.2): (1.088, 1.518, 2.447),
    (4, 0.4): (1.489, 2.089, 3.452),
    (4, 0.6): (1.761, 2.510, 4.175),
    (4, 0.8): (1.980, 2.819, 4.685),
    (4, 1.0): (2.151, 3.075, 5.176),
    (4, 1.2): (2.315, 3.295, 5.492),
    (4, 1.4): (2.456, 3.496, 5.830),
    (4, 1.6): (2.565, 3.664, 6.083),
    (4, 1.8): (2.671, 3.811, 6.303),
    (4, 2.0): (2.746, 3.938, 6.513),
    (4, 2.5): (2.927, 4.204, 7.018),
    (4, 3.0): (3.090, 4.423, 7.403),
    (4, 4.0): (3.339, 4.783, 8.040),
    (4, 5.0): (3.512, 5.072, 8.446),
    (5, 0.1): (0.868, 1.198, 1.890),
    (5, 0.2): (1.217, 1.678, 2.699),
    (5, 0.4): (1.669, 2.327, 3.748),
    (5, 0.6): (1.983, 2.785, 4.508),
    (5, 0.8): (2.207, 3.133, 5.111),
    (5, 1.0): (2.427, 3.435, 5.571),
    (5, 1.2): (2.609, 3.656, 5.995),
    (5, 1.4): (2.752, 3.872, 6.320),
    (5, 1.6): (2.892, 4.052, 6.612),
    (5, 1.8): (3.000, 4.225, 6.897),
    (5, 2.0): (3.094, 4.373, 7.146),
    (5, 2.5): (3.314, 4.693, 7.630),
    (5, 3.0): (3.476, 4.934, 8.102),
    (5, 4.0): (3.765, 5.334, 8.723),
    (5, 5.0): (3.971, 5.625, 9.275),
    (6, 0.1): (0.958, 1.308, 2.058),
    (6, 0.2): (1.343, 1.846, 2.884),
    (6, 0.4): (1.841, 2.536, 4.040),
    (6, 0.6): (2.188, 3.038, 4.859),
    (6, 0.8): (2.441, 3.407, 5.455),
    (6, 1.0): (2.664, 3.753, 6.009),
    (6, 1.2): (2.859, 3.980, 6.481),
    (6, 1.4): (3.032, 4.219, 6.763),
    (6, 1.6): (3.174, 4.406, 7.110),
    (6, 1.8): (3.275, 4.604, 7.393),
    (6, 2.0): (3.381, 4.779, 7.619),
    (6, 2.5): (3.623, 5.109, 8.293),
    (6, 3.0): (3.823, 5.374, 8.697),
    (6, 4.0): (4.132, 5.794, 9.311),
    (6, 5.0): (4.350, 6.083, 9.815),
}


def critical_values(k_extra, pi):
    """Nearest tabulated (k, pi) cell; k beyond the grid uses the largest k."""
    ks = sorted({k for k, _ in TABLE})
    k = min(ks, key=lambda x: abs(x - int(k_extra)))
    pis = sorted({p for kk, p in TABLE if kk == k})
    p = min(pis, key=lambda x: abs(x - float(pi)))
    return TABLE[(k, p)]


def pvalue_range(stat, k_extra, pi):
    q90, q95, q99 = critical_values(k_extra, pi)
    if stat > q99:
        return "<0.01"
    if stat > q95:
        return "<0.05"
    if stat > q90:
        return "<0.10"
    return ">0.10"
