#pragma once

// Shared synthetic fixtures for unit and acceptance tests.

#include <cstdint>
#include <random>
#include <vector>

#include "romdb/analyze.hpp"
#include "romdb/consistency.hpp"
#include "romdb/database.hpp"
#include "romdb/synth.hpp"

namespace fx {

using namespace romdb;

Mat random_mat(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng);
Mat random_spd(Eigen::Index n, std::mt19937_64& rng, double shift = 1.0);

/// Generic ROM with well-scaled random operators; complex fields get random imaginary planes.
Rom random_rom(RomOrder order, ScalarField field, Eigen::Index k, std::uint64_t seed, Eigen::Index n_in = 2,
               Eigen::Index n_out = 2);

/// One reference ROM scrambled by a distinct random orthogonal pair per record
/// (Q = Z when `galerkin`). Points lie on [0, 1] along one axis.
RomDatabase scrambled_database(const Rom& ref, std::size_t count, std::uint64_t seed, bool galerkin);

/// Applies a random orthogonal pair per record (Q = Z when `galerkin`).
RomDatabase scramble(const RomDatabase& db, std::uint64_t seed, bool galerkin);

/// Damped, mass-loaded chain with parameter-dependent stiffness and scatterer
/// position; complex (loss factors) with real bases from the real part.
ChainSpec acoustic_chain(std::size_t base_dofs);
FamilySpec acoustic_family(std::size_t base_dofs, Eigen::Index derivatives, std::vector<double> wavenumbers);

/// Four-point layout with per-point dof counts 41235 / 40965 / 41424 / 40929.
std::vector<ParameterPoint> small_db_points();
FamilySpec small_db_family();
ParameterDomain small_db_domain();
ParameterPoint small_db_target();

/// Lightly damped uniform chain with N = 2000, driven at the free end and
/// observed at the middle and the end.
ChainSpec dgp_chain();
/// Matched band [4 pi, 6 pi] and its endpoints as interpolation wavenumbers.
std::vector<double> dgp_wavenumbers();
std::vector<double> dgp_band_grid(std::size_t points);

/// Two-parameter inverse problem on the acoustic chain: stiffness and scatterer
/// position over [0.9, 1] x [0.1, 0.2], nine measurement wavenumbers. The ROMs
/// keep their natural DGP coordinates (no alignment).
SamplerProblem sampler_problem();

/// Flutter-analog first-order family over (Mach-like, fill-like) axes.
FamilySpec flutter_family();
std::vector<ParameterPoint> flutter_lattice();
ParameterDomain flutter_domain();

/// Max over the grid of |dB(a) - dB(b)| (all outputs).
double max_db_error(const CMat& a, const CMat& b);

}  // namespace fx
