#pragma once

// Waveform estimation with stationary spectra: the discrete circulant bound,
// its continuum limit
//
//   Q_max = int |h(w)|^2 / (4 S_q / hbar^2 + 1 / S_theta) dw / 2pi,
//
// the Wiener smoother risk of a linear measurement and the noise-floor check
// S_Z / |h_X|^2 >= hbar^2 / (4 S_q).

#include "bcrb/grid_fields.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace bcrb {

using Spectrum = std::function<double(double)>;

/// Piecewise-linear spectrum through (omega, value) samples, constant beyond the ends.
Spectrum tabulated_spectrum(Vec omega, Vec values);
/// Reads a two-column CSV (omega, value) with an optional header line.
Spectrum read_spectrum_csv(const std::string& path);

struct SpectralModel {
  /// Uniform frequency grid symmetric about 0; panel breakpoints for the integrals.
  Vec omega;
  Spectrum s_q;
  /// May return +inf (no prior information) or 0 (perfect prior).
  Spectrum s_theta;
  /// Output noise and transfer function of a linear measurement (wiener_risk, noise_floor_check).
  Spectrum s_z;
  Spectrum hx2;
  /// |h(w)|^2 of the estimated functional; defaults to 1 (instant estimation).
  Spectrum h2;
  double hbar = 1.0;

  /// Checks the grid, nonnegativity and evenness of every supplied spectrum on the grid.
  void validate() const;
  /// Uniform symmetric grid of `nodes` points on [-omega_max, omega_max].
  static Vec symmetric_grid(double omega_max, int nodes);
};

struct TimeDiscretization {
  double T = 1.0;
  int p = 2;
  /// Weight samples h_a at t_a = a dt, a = 0..p-1.
  Vec h;

  double dt() const { return T / p; }
  /// omega_j = omega_0 + 2 pi j / T with omega_0 = -2 pi floor(p/2) / T.
  double omega(int j) const;
  /// h_a = 1/dt at one slot: |h(w)| = 1.
  static TimeDiscretization instant(double T, int p, int slot = 0);
  void validate() const;
};

/// Q_max = u^T (K + G)^{-1} u with u_a = h_a dt, evaluated in the DFT basis
/// that diagonalizes the circulant K and G.
double build_circulant_bound(const TimeDiscretization& disc, const SpectralModel& spectra);

/// Dense circulant K and G in the time basis (small p; for consistency checks).
std::pair<Mat, Mat> circulant_matrices(const TimeDiscretization& disc, const SpectralModel& spectra);

double continuum_qmax(const SpectralModel& spectra);
double wiener_risk(const SpectralModel& spectra);

struct NoiseFloorViolation {
  double omega = 0.0;
  /// S_Z / |h_X|^2
  double noise_floor = 0.0;
  /// hbar^2 / (4 S_q)
  double quantum_limit = 0.0;
  /// quantum_limit / noise_floor (> 1 for a violation)
  double margin = 0.0;
};

/// Frequencies of the grid (ascending) where the measurement noise floor is
/// below the quantum limit.
std::vector<NoiseFloorViolation> noise_floor_check(const SpectralModel& spectra);

}  // namespace bcrb
