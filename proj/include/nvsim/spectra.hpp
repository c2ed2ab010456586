#pragma once

// Synthetic observables built from the spin Hamiltonian and the rate model:
// cw ODMR spectra, Zeeman line scans and level-anti-crossing PL scans.

#include <span>
#include <vector>

#include "nvsim/dynamics.hpp"
#include "nvsim/spin.hpp"

namespace nvsim {

// Drive magnitudes applied to every transition while sweeping frequency.
struct DriveTemplate {
  double ground_rabi = 3.0;     // MHz
  double ground_fwhm = 10.0;    // MHz
  double excited_rabi = 20.0;   // MHz
  double excited_fwhm = 100.0;  // MHz

  void validate() const;
  friend bool operator==(const DriveTemplate&, const DriveTemplate&) = default;
};

struct OdmrSpectrum {
  std::vector<double> frequency;  // MHz
  std::vector<double> pl;         // normalized to the undriven steady state
  std::vector<double> dips;       // detected dip centers, MHz, ascending
  bool near_lac = false;          // some transition is close to zero frequency
};

struct ZeemanPoint {
  double b_gauss{};
  double omega_minus{};
  double omega_plus{};
};

struct LacScan {
  std::vector<double> b_grid;  // gauss
  std::vector<double> pl;      // normalized to the unmixed steady state
  std::vector<double> minima;  // detected PL minima, gauss
  bool trivially_flat = false;
};

// Evenly spaced grid from start to stop inclusive.
std::vector<double> linear_grid(double start, double stop, std::size_t points);
std::vector<double> stepped_grid(double start, double stop, double step);

// Local minima below 1 - threshold, refined by a parabola through the
// minimum and its two neighbours.
std::vector<double> detect_dips(std::span<const double> x, std::span<const double> y,
                                double threshold = 3e-9);

OdmrSpectrum odmr_spectrum(const SpinParams<double>& gs, const SpinParams<double>& es,
                           const RateParams& rp, const DriveTemplate& drives,
                           const FieldVector<double>& field_nv, std::span<const double> grid);

std::vector<ZeemanPoint> zeeman_scan(const SpinParams<double>& params,
                                     std::span<const double> b_grid);

// Field B (sin a, 0, cos a) in the NV frame for misalignment a.
LacScan lac_scan(const SpinParams<double>& gs, const SpinParams<double>& es, const RateParams& rp,
                 std::span<const double> b_grid, double misalignment_deg);

// Strain E for which the chosen transition of a manifold sits at
// target_mhz, found by bisection on [0, D) with full diagonalization.
double calibrate_strain(const SpinParams<double>& params, const FieldVector<double>& field_nv,
                        Transition transition, double target_mhz);

}  // namespace nvsim
