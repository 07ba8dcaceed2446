#include <cmath>

#include "procbench/error.hpp"
#include "procbench/mab.hpp"

namespace procbench {

void UpstreamParams::check() const {
  const double positive[] = {K_d_amm, K_d_gln, K_glc,    K_gln,  KI_amm,  KI_lac, m_glc,    Q_mab_max,
                             Y_amm_gln, Y_lac_glc, Y_X_glc, Y_X_gln, alpha1, alpha2, minus_dH, rho,
                             c_p,     U,       T_in,     eta_rec, eta_ret, pH_opt, omega_mab, avogadro};
  for (double v : positive) {
    if (!(v > 0.0)) throw Error(Errc::ConfigError, "upstream parameters must be positive");
  }
  if (!(n_death > 1.0)) throw Error(Errc::ConfigError, "n_death must exceed 1");
  if (!(GLN_in >= 0.0)) throw Error(Errc::ConfigError, "GLN_in must be nonnegative");
}

double mu_max_of(double T) { return 0.0016 * T - 0.0308; }
double mu_d_max_of(double T) { return -0.0045 * T + 0.1682; }

GrowthRates growth_rates(std::span<const double> s, const UpstreamParams& p) {
  const double T = s[up::T];
  if (!(T >= 33.0 && T <= 37.0)) throw Error(Errc::TemperatureOutOfRange, "growth laws hold for 33..37 degC only");
  const double glc = s[up::GLC1], gln = s[up::GLN1], lac = s[up::LAC1], amm = s[up::AMM1];
  const double f_lim = (glc / (p.K_glc + glc)) * (gln / (p.K_gln + gln));
  const double f_inh = (p.KI_lac / (p.KI_lac + lac)) * (p.KI_amm / (p.KI_amm + amm));
  GrowthRates g;
  g.mu = mu_max_of(T) * f_lim * f_inh;
  g.mu_d = amm > 0.0 ? mu_d_max_of(T) / (1.0 + std::pow(p.K_d_amm / amm, p.n_death)) : 0.0;
  return g;
}

double ph_of_ammonia(double amm) { return 7.1697 - std::log10(0.074028 * amm + 0.968385); }

void upstream_rhs(std::span<const double> s, std::span<const double> a, const UpstreamParams& p,
                  std::span<double> ds) {
  using namespace up;
  const double V1v = s[V1], V2v = s[V2];
  if (V1v <= 1e-6 || V2v <= 1e-6) throw Error(Errc::DegenerateVolume, "bioreactor or separator volume vanished");
  const double Fin = a[F_in], Fr = a[F_r], F1 = a[F_1], F2 = a[F_2];
  if (Fr == 0.0 && F1 > 0.0) throw Error(Errc::ZeroRecycleFlow, "recycle stream needs F_r > 0");

  const GrowthRates g = growth_rates(s, p);
  const double Xv = s[Xv1];

  // F_r * (recycle concentration) = eta * F_1 * (bioreactor concentration).
  auto recycle_cells = [&](double x1) { return p.eta_rec * F1 * x1; };
  auto recycle_solute = [&](double x1) { return p.eta_ret * F1 * x1; };

  ds[V1] = Fin + Fr - F1;
  ds[Xv1] = (g.mu - g.mu_d) * Xv - Fin / V1v * Xv + (recycle_cells(Xv) - Fr * Xv) / V1v;
  ds[Xt1] = g.mu * Xv - Fin / V1v * s[Xt1] + (recycle_cells(s[Xt1]) - Fr * s[Xt1]) / V1v;

  const double rho_cp = p.rho * p.c_p;
  ds[T] = Fin / V1v * (p.T_in - s[T]) + p.minus_dH / rho_cp * (g.mu * Xv / p.avogadro) +
          (p.U / 60.0) / (V1v * rho_cp) * (a[T_c] - s[T]);

  const double Q_glc = g.mu / p.Y_X_glc + p.m_glc;
  const double m_gln = p.alpha1 * s[GLN1] / (p.alpha2 + s[GLN1]);
  const double Q_gln = g.mu / p.Y_X_gln + m_gln;
  const double Q_lac = p.Y_lac_glc * Q_glc;
  const double Q_amm = p.Y_amm_gln * Q_gln;
  const double ph = ph_of_ammonia(s[AMM1]);
  const double z = (ph - p.pH_opt) / p.omega_mab;
  const double Q_mab = p.Q_mab_max * std::exp(-0.5 * z * z);

  ds[GLC1] = -Q_glc * Xv + Fin / V1v * (a[GLC_in] - s[GLC1]) + (recycle_solute(s[GLC1]) - Fr * s[GLC1]) / V1v;
  ds[GLN1] = -Q_gln * Xv - p.K_d_gln * s[GLN1] + Fin / V1v * (p.GLN_in - s[GLN1]) +
             (recycle_solute(s[GLN1]) - Fr * s[GLN1]) / V1v;
  ds[LAC1] = Q_lac * Xv - Fin / V1v * s[LAC1] + (recycle_solute(s[LAC1]) - Fr * s[LAC1]) / V1v;
  ds[AMM1] = Q_amm * Xv + p.K_d_gln * s[GLN1] - Fin / V1v * s[AMM1] +
             (recycle_solute(s[AMM1]) - Fr * s[AMM1]) / V1v;
  ds[MAB1] = Xv * Q_mab - Fin / V1v * s[MAB1] + (recycle_solute(s[MAB1]) - Fr * s[MAB1]) / V1v;

  ds[V2] = F1 - F2 - Fr;
  const std::size_t pairs[][2] = {{Xv1, Xv2},   {Xt1, Xt2},   {GLC1, GLC2}, {GLN1, GLN2},
                                  {LAC1, LAC2}, {AMM1, AMM2}, {MAB1, MAB2}};
  for (const auto& [i1, i2] : pairs) {
    const double eta = (i1 == Xv1 || i1 == Xt1) ? p.eta_rec : p.eta_ret;
    ds[i2] = (F1 * (s[i1] - s[i2]) - (eta * F1 * s[i1] - Fr * s[i2])) / V2v;
  }
}

OdeSystem upstream_system(const UpstreamParams& p) {
  return OdeSystem{up::kStateDim, [p](double, std::span<const double> x, std::span<const double> u,
                                      std::span<double> dxdt) { upstream_rhs(x, u, p, dxdt); }};
}

double economic_objective(std::span<const double> s, std::span<const double> a) {
  return s[up::MAB1] * a[up::F_1] + s[up::MAB2] * a[up::F_2];
}

}  // namespace procbench
