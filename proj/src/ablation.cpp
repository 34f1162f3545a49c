#include "haepo/ablation.hpp"

#include <algorithm>
#include <cstdio>

#include "haepo/error.hpp"

namespace haepo {

bool AblationReport::passed() const {
  return !checks.empty() &&
         std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

double windowed_mean_return(const CellResult& cell, std::size_t update,
                            std::size_t window) {
  const auto it = std::find_if(cell.curves.begin(), cell.curves.end(),
                               [](const Curve& c) { return c.name == "mean_return"; });
  if (it == cell.curves.end() || it->points.empty()) {
    throw Error(ErrorCode::Runtime, cell.name + " has no mean_return curve");
  }
  const auto& pts = it->points;
  const std::size_t end = std::min(update, pts.size());
  const std::size_t begin = end > window ? end - window : 0;
  double total = 0.0;
  for (std::size_t i = begin; i < end; ++i) total += pts[i].mean;
  return total / static_cast<double>(end - begin);
}

AblationReport run_norm_ablation(const AblationOptions& options) {
  AblationReport report;
  for (const char* experiment : {"chain-mdp", "newsvendor"}) {
    for (auto mode : {NormalizationMode::Sum, NormalizationMode::ZScore}) {
      ExperimentConfig cfg = default_config(experiment);
      cfg.norm_mode = mode;
      cfg.seeds = options.seeds;
      cfg.record_timing = options.record_timing;
      report.cells.push_back(run_cell(cfg));
    }
  }
  const auto& chain_sum = report.cells[0];
  const auto& chain_z = report.cells[1];
  const auto& news_sum = report.cells[2];
  const auto& news_z = report.cells[3];
  const std::size_t w = options.window;

  auto check = [&](std::string name, double value, double threshold) {
    report.checks.push_back({std::move(name), value, threshold, value >= threshold});
  };
  const std::size_t chain_end = chain_z.config.resolved_updates().value();
  const std::size_t news_end = news_sum.config.resolved_updates().value();
  check("chain zscore return at update 100", windowed_mean_return(chain_z, 100, w), 0.7);
  check("chain final zscore minus sum",
        windowed_mean_return(chain_z, chain_end, w) -
            windowed_mean_return(chain_sum, chain_end, w),
        0.15);
  check("newsvendor sum profit at update 50", windowed_mean_return(news_sum, 50, w), 9.0);
  // Strictly greater: a zero margin does not count.
  const double margin = windowed_mean_return(news_sum, news_end, w) -
                        windowed_mean_return(news_z, news_end, w);
  report.checks.push_back({"newsvendor final sum minus zscore", margin, 0.0, margin > 0.0});
  return report;
}

std::string ablation_to_text(const AblationReport& report) {
  std::string out;
  char line[256];
  for (const auto& c : report.checks) {
    std::snprintf(line, sizeof line, "%-4s %-36s %.4f (threshold %.4g)\n",
                  c.passed ? "ok" : "FAIL", c.name.c_str(), c.value, c.threshold);
    out += line;
  }
  return out;
}

}  // namespace haepo
