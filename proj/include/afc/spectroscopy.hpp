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


#ifndef AFC_SPECTROSCOPY_HPP
#define AFC_SPECTROSCOPY_HPP

#include <string>

#include "afc/io.hpp"

namespace afc {

/// Unit conversions into the module's working system (cm, s, Hz).
namespace units {
inline constexpr double kSpeedOfLight = 2.99792458e10;  // cm/s
inline constexpr double cm = 1.0;
inline constexpr double mm = 0.1;
inline constexpr double um = 1e-4;
inline constexpr double nm = 1e-7;
inline constexpr double Hz = 1.0;
inline constexpr double kHz = 1e3;
inline constexpr double MHz = 1e6;
inline constexpr double GHz = 1e9;
}  // namespace units

/// Numeric prefactor of the single-atom optical depth: `reported` uses
/// 72 pi^2 (about 1.7e9 atoms per tooth for the Tm:LiNbO3 preset),
/// `as_printed` uses 72 pi (about 5.3e8).
enum class PrefactorConvention { reported, as_printed };

PrefactorConvention parse_prefactor_convention(const std::string& name);
std::string to_string(PrefactorConvention convention);

struct MaterialParams {
  double n_d = 0.0;             // atom density, 1/cm^3
  double n = 1.0;               // refractive index
  double Gamma_h = 0.0;         // homogeneous linewidth, Hz
  double gamma_s = 0.0;         // spontaneous emission rate, Hz
  double alpha_integral = 0.0;  // integral of alpha over wavenumber, 1/cm^2
  double L = 0.0;               // crystal length, cm
  double A = 0.0;               // beam cross-section, cm^2
  double nu = 0.0;              // transition frequency, Hz
};

void validate(const MaterialParams& mat);

/// Default beam cross-section, pi (80 um)^2 in cm^2.
double default_beam_area();

/// Tm:LiNbO3 at 795 nm.
MaterialParams tm_linbo3();
/// Named preset lookup; throws ConfigError for unknown names.
MaterialParams material_preset(const std::string& name);

/// Reads a key-value material file. A `preset` key selects the starting
/// values; other keys override them. Lengths may be given in cm or with
/// a unit suffix in the key (L_mm, beam_radius_um, wavelength_nm).
MaterialParams load_material(const KeyValues& kv);

/// Integrated absorption of the whole line, Theta_i = L c int alpha, Hz.
double integrated_absorption(const MaterialParams& mat);

double atoms_per_tooth_absorption(const MaterialParams& mat, double theta_t, double theta_i);
double atoms_per_tooth_absorption(const MaterialParams& mat, double theta_t);

double single_atom_depth(const MaterialParams& mat,
                         PrefactorConvention convention = PrefactorConvention::reported);
double atoms_per_tooth_singleion(const MaterialParams& mat, double theta_t,
                                 PrefactorConvention convention = PrefactorConvention::reported);

/// Comb bookkeeping.
double comb_finesse(double spacing_hz, double tooth_fwhm_hz);
double effective_depth(double d1, double finesse);

}  // namespace afc

#endif  // AFC_SPECTROSCOPY_HPP
