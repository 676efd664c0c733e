#pragma once

// Serialized forms of a ScenarioResult: versioned JSON, sweep CSVs and a
// short human-readable summary. All output is deterministic text.

#include <bhsim/engine.hpp>
#include <bhsim/scenarios.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace bhsim {

inline constexpr int kReportSchemaVersion = 1;

class ReportError : public std::runtime_error {
 public:
  ReportError(const std::filesystem::path& path, const std::string& what)
      : std::runtime_error(path.string() + ": " + what), path_(path) {}
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

struct ReportOptions {
  bool include_trials = true;
};

std::string result_json(const ScenarioResult& r, const ReportOptions& opts = {});

/// Columns: K,init_bias,history_mode,predicted_direction
std::string threshold_csv(const std::vector<ThresholdPoint>& points);
/// Columns: prefix_n,leak_observed
std::string window_csv(const std::vector<WindowPoint>& points);

std::string summary_text(const ScenarioResult& r);

/// Predictor and BST contents of a simulator as JSON, for debugging.
std::string state_json(const Simulator& sim);

enum class ReportFormat { Json, Csv, Both };

/// Writes result.json and/or sweep.csv plus summary.txt into `dir`, creating
/// it if needed. Returns the written paths. Throws ReportError.
std::vector<std::filesystem::path> emit_report(const ScenarioResult& r,
                                               ReportFormat format,
                                               const std::filesystem::path& dir,
                                               const ReportOptions& opts = {});

}  // namespace bhsim
