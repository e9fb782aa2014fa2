// Copyright 2026 The afcdepth Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "afc/spectroscopy.hpp"

#include <cmath>
#include <numbers>

#include "afc/errors.hpp"

namespace afc {

PrefactorConvention parse_prefactor_convention(const std::string& name) {
  if (name == "reported") return PrefactorConvention::reported;
  if (name == "as_printed") return PrefactorConvention::as_printed;
  throw ConfigError("unknown prefactor convention '" + name + "' (expected reported or as_printed)");
}

std::string to_string(PrefactorConvention convention) {
  return convention == PrefactorConvention::reported ? "reported" : "as_printed";
}

void validate(const MaterialParams& m) {
  const bool positive = m.n_d > 0 && m.n > 0 && m.Gamma_h > 0 && m.gamma_s > 0 && m.alpha_integral > 0 &&
                        m.L > 0 && m.A > 0 && m.nu > 0;
  if (!positive) throw DomainError("material parameters must all be positive");
  if (m.Gamma_h < m.gamma_s) throw DomainError("homogeneous linewidth below the spontaneous emission rate");
}

double default_beam_area() {
  const double r = 80 * units::um;
  return std::numbers::pi * r * r;
}

MaterialParams tm_linbo3() {
  MaterialParams m;
  m.n_d = 1.89e19;
  m.n = 2.256;
  m.Gamma_h = 10 * units::kHz;
  m.gamma_s = 2.6 * units::kHz;
  m.alpha_integral = 497.0;
  m.L = 6.8 * units::mm;
  m.A = default_beam_area();
  m.nu = units::kSpeedOfLight / (795 * units::nm);
  return m;
}

MaterialParams material_preset(const std::string& name) {
  if (name == "tm_linbo3" || name == "Tm:LiNbO3") return tm_linbo3();
  throw ConfigError("unknown material preset '" + name + "'");
}

MaterialParams load_material(const KeyValues& kv) {
  MaterialParams m = kv.has("preset") ? material_preset(kv.get_string("preset", "")) : MaterialParams{};
  m.n_d = kv.get_double("n_d", m.n_d);
  m.n = kv.get_double("n", m.n);
  m.Gamma_h = kv.get_double("Gamma_h", m.Gamma_h);
  m.gamma_s = kv.get_double("gamma_s", m.gamma_s);
  m.alpha_integral = kv.get_double("alpha_integral", m.alpha_integral);
  m.L = kv.get_double("L", m.L);
  if (kv.has("L_mm")) m.L = kv.get_double("L_mm") * units::mm;
  m.A = kv.get_double("A", m.A);
  if (kv.has("beam_radius_um")) {
    const double r = kv.get_double("beam_radius_um") * units::um;
    m.A = std::numbers::pi * r * r;
  }
  m.nu = kv.get_double("nu", m.nu);
  if (kv.has("wavelength_nm")) m.nu = units::kSpeedOfLight / (kv.get_double("wavelength_nm") * units::nm);
  validate(m);
  return m;
}

double integrated_absorption(const MaterialParams& m) { return m.L * units::kSpeedOfLight * m.alpha_integral; }

double atoms_per_tooth_absorption(const MaterialParams& m, double theta_t, double theta_i) {
  if (!(theta_i > 0.0)) throw DomainError("integrated line absorption must be positive");
  return m.n_d * m.L * m.A * (theta_t / theta_i);
}

double atoms_per_tooth_absorption(const MaterialParams& m, double theta_t) {
  return atoms_per_tooth_absorption(m, theta_t, integrated_absorption(m));
}

double single_atom_depth(const MaterialParams& m, PrefactorConvention convention) {
  validate(m);
  const double sigma = m.nu / units::kSpeedOfLight;  // wavenumber, 1/cm
  const double local_field = (m.n * m.n + 2.0) * (m.n * m.n + 2.0);
  const double pi_power = convention == PrefactorConvention::reported ? std::numbers::pi * std::numbers::pi
                                                                      : std::numbers::pi;
  return local_field / (72.0 * pi_power * m.n * m.A * sigma * sigma) * (m.gamma_s / m.Gamma_h);
}

double atoms_per_tooth_singleion(const MaterialParams& m, double theta_t, PrefactorConvention convention) {
  return theta_t / (m.Gamma_h * single_atom_depth(m, convention));
}

double comb_finesse(double spacing_hz, double tooth_fwhm_hz) {
  if (!(spacing_hz > 0.0) || !(tooth_fwhm_hz > 0.0)) throw DomainError("finesse needs positive spacing and width");
  return spacing_hz / tooth_fwhm_hz;
}

double effective_depth(double d1, double finesse) {
  if (!(finesse > 0.0)) throw DomainError("finesse must be positive");
  return d1 / finesse;
}

}  // namespace afc
