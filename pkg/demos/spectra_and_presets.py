"""Parameter rows of classic methods, their one-line coefficients, and the
closed-form spectra on the two-dimensional quadratic 5e-3 x1^2 + x2^2 (as
f = 1/2 sum a_i x_i^2 with a = (0.01, 2))."""
import warnings

from gm2lab import gm2, objectives, spectral

f = objectives.make_quadratic([0.01, 2.0])
s = 1.0 / f.L
print(f"mu = {f.mu}, L = {f.L}, s = {s}")
print(f"{'row':8s} {'m':>8s} {'n':>8s} {'p':>9s} {'q':>8s}   {'c_mom':>8s} {'c_grad':>8s} {'c_prev':>8s}"
      f"   {'cont':>7s} {'disc':>7s}  guarantee")
# GD (n = 0) is left out: v never feeds back, so the two-step form does not apply
for name in ("Polyak", "HB", "NAG", "TM", "QHM"):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        P = gm2.preset(name, f, s, 0.25 if name == "QHM" else None)
    c = gm2.gm2_one_line_coeffs(P, s)
    cont = spectral.quad_cont_eigs(P, f.diag).worst_rate
    disc = spectral.quad_disc_eigs(P, s, f.diag).worst_rate
    bad = P.discrete_violations(f, s)
    print(f"{name:8s} {P.m:8.4f} {P.n:8.4f} {P.p:9.4f} {P.q:8.4f}   "
          f"{c[0]:8.5f} {c[1]:8.5f} {c[2]:8.5f}   {cont:7.4f} {disc:7.4f}  "
          f"{'1 - q sqrt(s) = %.4f' % (1 - P.q * s ** 0.5) if not bad else 'none (' + bad[0] + ')'}")
