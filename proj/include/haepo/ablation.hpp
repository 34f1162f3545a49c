#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "haepo/harness.hpp"

namespace haepo {

struct AblationCheck {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool passed = false;
};

struct AblationReport {
  // chain-mdp sum, chain-mdp zscore, newsvendor sum, newsvendor zscore
  std::vector<CellResult> cells;
  std::vector<AblationCheck> checks;

  bool passed() const;
};

struct AblationOptions {
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  // Curve values are averaged over this many updates ending at the probe.
  std::size_t window = 10;
  bool record_timing = true;
};

/// Seed-mean return averaged over the `window` updates ending at `update`.
double windowed_mean_return(const CellResult& cell, std::size_t update,
                            std::size_t window);

/// Sum versus z-score normalization on the chain MDP and the newsvendor.
AblationReport run_norm_ablation(const AblationOptions& options = {});

std::string ablation_to_text(const AblationReport& report);

}  // namespace haepo
