#pragma once

// Flat key=value experiment configuration: one key per line, '#' comments,
// dotted keys addressing every EpisodeConfig field (e.g. gu.kappa=0.5).

#include <cstdint>
#include <string>
#include <vector>

#include "gu/harness.hpp"

namespace gu {

// Grid for the sweep subcommand; an empty list keeps the base value.
struct SweepGrid {
  std::vector<double> kappa;
  std::vector<double> tau;
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<double> rho;
  std::vector<double> overlap;
  bool operator==(const SweepGrid&) const = default;
};

struct ExperimentConfig {
  EpisodeConfig episode;
  std::vector<Variant> compare_variants = {Variant::no_projection, Variant::gu_projection};
  SweepGrid sweep;

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

// Throws std::invalid_argument on unknown or duplicate keys, malformed values,
// and configs that fail validation. Missing keys keep their defaults.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Writes every key; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

struct SweepPoint {
  std::size_t index = 0;
  double kappa = 0.0;
  double tau = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double rho = 0.0;
  double overlap = 0.0;
  EpisodeConfig episode;
};

// Cartesian product of the grid in the order kappa, tau, alpha, beta, rho,
// overlap (last varies fastest).
std::vector<SweepPoint> expand_sweep(const ExperimentConfig& cfg);

}  // namespace gu
