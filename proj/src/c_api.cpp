#include "haepo/haepo.h"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <new>
#include <string>

#include "haepo/ablation.hpp"
#include "haepo/error.hpp"
#include "haepo/gradcheck.hpp"
#include "haepo/harness.hpp"
#include "haepo/loss.hpp"

struct haepo_config {
  haepo::ExperimentConfig cfg;
};

struct haepo_sweep {
  haepo::SweepGrid grid;
};

struct haepo_results {
  std::vector<haepo::CellResult> cells;
};

namespace {

thread_local std::string g_last_error;

haepo_status to_status(haepo::ErrorCode code) {
  switch (code) {
    case haepo::ErrorCode::InvalidArgument:
      return HAEPO_ERR_INVALID_ARGUMENT;
    case haepo::ErrorCode::ShapeMismatch:
      return HAEPO_ERR_SHAPE_MISMATCH;
    case haepo::ErrorCode::NonFinite:
      return HAEPO_ERR_NON_FINITE;
    case haepo::ErrorCode::Config:
      return HAEPO_ERR_CONFIG;
    case haepo::ErrorCode::Io:
      return HAEPO_ERR_IO;
    case haepo::ErrorCode::Runtime:
      return HAEPO_ERR_RUNTIME;
  }
  return HAEPO_ERR_INTERNAL;
}

haepo_status fail(haepo_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

template <typename F>
haepo_status guarded(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const haepo::Error& e) {
    return fail(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(HAEPO_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(HAEPO_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(HAEPO_ERR_INTERNAL, "unknown exception");
  }
}

#define HAEPO_REQUIRE(cond)                                                   \
  do {                                                                        \
    if (!(cond)) return fail(HAEPO_ERR_INVALID_ARGUMENT, "null or invalid: " #cond); \
  } while (0)

haepo_status copy_text(const std::string& text, char* buf, size_t capacity,
                       size_t* needed) {
  if (needed) *needed = text.size();
  if (buf && capacity > 0) {
    const size_t n = std::min(capacity - 1, text.size());
    std::memcpy(buf, text.data(), n);
    buf[n] = '\0';
  }
  return HAEPO_OK;
}

haepo::NormalizationMode to_mode(haepo_norm_mode norm) {
  switch (norm) {
    case HAEPO_NORM_SUM:
      return haepo::NormalizationMode::Sum;
    case HAEPO_NORM_ZSCORE:
      return haepo::NormalizationMode::ZScore;
    case HAEPO_NORM_NONE:
      return haepo::NormalizationMode::None;
  }
  throw haepo::Error(haepo::ErrorCode::InvalidArgument, "unknown norm mode");
}

}  // namespace

extern "C" {

const char* haepo_version(void) {
  static const std::string version = haepo::version_string();
  return version.c_str();
}

const char* haepo_last_error(void) { return g_last_error.c_str(); }

const char* haepo_status_string(haepo_status status) {
  switch (status) {
    case HAEPO_OK:
      return "ok";
    case HAEPO_ERR_INVALID_ARGUMENT:
      return "invalid argument";
    case HAEPO_ERR_SHAPE_MISMATCH:
      return "shape mismatch";
    case HAEPO_ERR_NON_FINITE:
      return "non-finite value";
    case HAEPO_ERR_CONFIG:
      return "configuration error";
    case HAEPO_ERR_IO:
      return "i/o error";
    case HAEPO_ERR_RUNTIME:
      return "runtime error";
    case HAEPO_ERR_GATE_FAILED:
      return "acceptance gate failed";
    case HAEPO_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

haepo_status haepo_config_create(const char* experiment, haepo_config** out) {
  return guarded([&] {
    HAEPO_REQUIRE(experiment && out);
    *out = new haepo_config{haepo::default_config(experiment)};
    return HAEPO_OK;
  });
}

haepo_status haepo_config_load(const char* path, haepo_config** out) {
  return guarded([&] {
    HAEPO_REQUIRE(path && out);
    *out = new haepo_config{haepo::load_config_file(path)};
    return HAEPO_OK;
  });
}

haepo_status haepo_config_set(haepo_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    HAEPO_REQUIRE(cfg && key && value);
    haepo::ExperimentConfig next = cfg->cfg;
    haepo::set_config_value(next, key, value);
    cfg->cfg = std::move(next);
    return HAEPO_OK;
  });
}

haepo_status haepo_config_to_text(const haepo_config* cfg, char* buf, size_t capacity,
                                  size_t* needed) {
  return guarded([&] {
    HAEPO_REQUIRE(cfg);
    return copy_text(haepo::config_to_text(cfg->cfg), buf, capacity, needed);
  });
}

void haepo_config_destroy(haepo_config* cfg) { delete cfg; }

haepo_status haepo_sweep_create(const haepo_config* base, haepo_sweep** out) {
  return guarded([&] {
    HAEPO_REQUIRE(base && out);
    auto* sweep = new haepo_sweep{};
    sweep->grid.base = base->cfg;
    *out = sweep;
    return HAEPO_OK;
  });
}

haepo_status haepo_sweep_add_lr(haepo_sweep* sweep, double lr) {
  return guarded([&] {
    HAEPO_REQUIRE(sweep && lr > 0.0);
    sweep->grid.learning_rates.push_back(lr);
    return HAEPO_OK;
  });
}

haepo_status haepo_sweep_add_batch(haepo_sweep* sweep, size_t batch) {
  return guarded([&] {
    HAEPO_REQUIRE(sweep && batch > 0);
    sweep->grid.batch_sizes.push_back(batch);
    return HAEPO_OK;
  });
}

haepo_status haepo_sweep_add_algorithm(haepo_sweep* sweep, const char* algo) {
  return guarded([&] {
    HAEPO_REQUIRE(sweep && algo);
    sweep->grid.algorithms.push_back(haepo::parse_algorithm(algo));
    return HAEPO_OK;
  });
}

haepo_status haepo_sweep_add_norm(haepo_sweep* sweep, const char* norm) {
  return guarded([&] {
    HAEPO_REQUIRE(sweep && norm);
    sweep->grid.norm_modes.push_back(haepo::parse_normalization_mode(norm));
    return HAEPO_OK;
  });
}

void haepo_sweep_destroy(haepo_sweep* sweep) { delete sweep; }

haepo_status haepo_run(const haepo_config* cfg, haepo_results** out) {
  return guarded([&] {
    HAEPO_REQUIRE(cfg && out);
    auto* results = new haepo_results{};
    results->cells.push_back(haepo::run_cell(cfg->cfg));
    *out = results;
    return HAEPO_OK;
  });
}

haepo_status haepo_sweep_run(const haepo_sweep* sweep, haepo_results** out) {
  return guarded([&] {
    HAEPO_REQUIRE(sweep && out);
    *out = new haepo_results{haepo::run_sweep(sweep->grid)};
    return HAEPO_OK;
  });
}

haepo_status haepo_results_emit(const haepo_results* results, const char* out_dir) {
  return guarded([&] {
    HAEPO_REQUIRE(results && out_dir);
    haepo::emit_results(results->cells, out_dir);
    return HAEPO_OK;
  });
}

size_t haepo_results_cell_count(const haepo_results* results) {
  return results ? results->cells.size() : 0;
}

size_t haepo_results_failure_count(const haepo_results* results) {
  if (!results) return 0;
  size_t n = 0;
  for (const auto& cell : results->cells) {
    n += cell.failures.size();
    for (const auto& run : cell.runs) n += run.aborted ? 1 : 0;
  }
  return n;
}

const char* haepo_results_cell_name(const haepo_results* results, size_t cell) {
  if (!results || cell >= results->cells.size()) return "";
  return results->cells[cell].name.c_str();
}

size_t haepo_results_update_count(const haepo_results* results, size_t cell) {
  if (!results || cell >= results->cells.size()) return 0;
  for (const auto& curve : results->cells[cell].curves) {
    if (curve.name == "mean_return") return curve.points.size();
  }
  return 0;
}

haepo_status haepo_results_mean_return(const haepo_results* results, size_t cell,
                                       size_t update, double* out) {
  return guarded([&] {
    HAEPO_REQUIRE(results && out && cell < results->cells.size() && update > 0);
    HAEPO_REQUIRE(update <= haepo_results_update_count(results, cell));
    *out = haepo::windowed_mean_return(results->cells[cell], update, 1);
    return HAEPO_OK;
  });
}

void haepo_results_destroy(haepo_results* results) { delete results; }

haepo_status haepo_loss_evaluate(const double* log_likelihoods,
                                 const double* ref_log_likelihoods, const double* returns,
                                 size_t m, double beta_ent, double lambda_kl,
                                 haepo_norm_mode norm, haepo_loss_terms* terms,
                                 double* grad_L) {
  return guarded([&] {
    HAEPO_REQUIRE(log_likelihoods && ref_log_likelihoods && returns && terms && m > 0);
    const haepo::LossConfig cfg{beta_ent, lambda_kl, to_mode(norm)};
    const auto loss = haepo::haepo_loss(std::span(log_likelihoods, m),
                                        std::span(ref_log_likelihoods, m),
                                        std::span(returns, m), cfg);
    terms->reward = loss.reward_term;
    terms->entropy = loss.entropy_term;
    terms->kl = loss.kl_term;
    terms->total = loss.total;
    terms->degenerate_batch = loss.degenerate_batch ? 1 : 0;
    if (grad_L) std::copy(loss.grad_L.begin(), loss.grad_L.end(), grad_L);
    return HAEPO_OK;
  });
}

haepo_status haepo_pl_weights(const double* log_likelihoods, size_t m, double* weights) {
  return guarded([&] {
    HAEPO_REQUIRE(log_likelihoods && weights && m > 0);
    const auto w = haepo::pl_weights(std::span(log_likelihoods, m));
    std::copy(w.w.begin(), w.w.end(), weights);
    return HAEPO_OK;
  });
}

void haepo_gradcheck_default_options(haepo_gradcheck_options* options) {
  if (!options) return;
  const haepo::GradCheckOptions d;
  *options = {d.min_batch, d.max_batch, d.trials, d.eps,
              d.threshold, d.beta_ent,  d.lambda_kl, d.seed};
}

haepo_status haepo_gradcheck(const haepo_gradcheck_options* options, const char* json_path,
                             haepo_gradcheck_summary* summary) {
  return guarded([&] {
    HAEPO_REQUIRE(options && summary);
    haepo::GradCheckOptions opt;
    opt.min_batch = options->min_batch;
    opt.max_batch = options->max_batch;
    opt.trials = options->trials;
    opt.eps = options->eps;
    opt.threshold = options->threshold;
    opt.beta_ent = options->beta_ent;
    opt.lambda_kl = options->lambda_kl;
    opt.seed = options->seed;
    const auto report = haepo::check_haepo_gradients(opt);
    double* errors[] = {&summary->max_error_new_lp, &summary->max_error_old_lp,
                        &summary->max_error_returns};
    double* norms[] = {&summary->norm_new_lp, &summary->norm_old_lp,
                       &summary->norm_returns};
    for (size_t i = 0; i < 3 && i < report.groups.size(); ++i) {
      *errors[i] = report.groups[i].max_abs_error;
      *norms[i] = report.groups[i].gradient_norm;
    }
    summary->passed = report.passed ? 1 : 0;
    if (json_path) {
      std::FILE* f = std::fopen(json_path, "wb");
      if (!f) return fail(HAEPO_ERR_IO, std::string("cannot open ") + json_path);
      const std::string json = haepo::report_to_json(report);
      const bool ok = std::fwrite(json.data(), 1, json.size(), f) == json.size();
      if (std::fclose(f) != 0 || !ok) {
        return fail(HAEPO_ERR_IO, std::string("cannot write ") + json_path);
      }
    }
    if (!report.passed) return fail(HAEPO_ERR_GATE_FAILED, "gradient error above threshold");
    return HAEPO_OK;
  });
}

haepo_status haepo_ablate_norm(const uint64_t* seeds, size_t seed_count, const char* out_dir,
                               char* report, size_t capacity, size_t* needed) {
  return guarded([&] {
    HAEPO_REQUIRE(seeds && seed_count > 0);
    haepo::AblationOptions opt;
    opt.seeds.assign(seeds, seeds + seed_count);
    const auto result = haepo::run_norm_ablation(opt);
    if (out_dir) haepo::emit_results(result.cells, out_dir);
    copy_text(haepo::ablation_to_text(result), report, capacity, needed);
    if (!result.passed()) return fail(HAEPO_ERR_GATE_FAILED, "normalization ablation check failed");
    return HAEPO_OK;
  });
}

}  // extern "C"
