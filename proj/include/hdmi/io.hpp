#pragma once

// File formats: header-less integer CSV for confusion matrices, JSON for
// model specifications, estimates and oracle reports.

#include <filesystem>
#include <json.hpp>
#include <string>
#include <string_view>

#include "hdmi/estimators.hpp"
#include "hdmi/models.hpp"
#include "hdmi/oracles.hpp"

namespace hdmi::io {

using json = nlohmann::ordered_json;

/// Carried by every JSON document the library writes.
inline constexpr int kSchemaVersion = 1;

/// k lines of k comma-separated nonnegative integers with equal row sums.
/// Blank lines are ignored. Throws ParseError with a 1-based row/column.
estimators::ConfusionMatrix parse_confusion_csv(std::string_view text);
estimators::ConfusionMatrix read_confusion_csv(const std::filesystem::path& path);
std::string format_confusion_csv(const estimators::ConfusionMatrix& m);

/// Throws IoError.
std::string read_text(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view content);
/// Parses a JSON document; syntax errors become ParseError.
json parse_json(std::string_view text, std::string_view what = "JSON document");

/// Model specification, e.g.
///   {"kind": "multi_logistic", "p": 10, "q": 10, "B": {"scaled_identity": 1.26}}
///   {"kind": "multi_logistic", "B": [[1, 0], [0, 1]]}          (p rows of q entries)
///   {"kind": "gaussian_sequence", "d": 64, "sigma_x": 0.2, "sigma_e": 1}
///   {"kind": "gaussian_sequence", "sigma_x": [1, 2], "sigma_e": [1, 1]}
///   {"kind": "exp_family", "instance": "gaussian_product", "d": 8, "kappa": 0.3}
///   {"kind": "staircase", "k_bins": 20}
/// Throws ConfigError on structural problems and DomainError on invalid values.
models::StimulusResponseModel parse_model(const json& spec);
json model_to_json(const models::StimulusResponseModel& m);

json to_json(const estimators::EstimateRecord& r);
json to_json(const estimators::SmoothedError& e);
json to_json(const oracles::McEstimate& e);
json to_json(const oracles::MomentCheck& m);
json to_json(const oracles::ZMomentReport& r);
json to_json(const oracles::NormalityReport& r);
json to_json(const oracles::ConvergenceRow& r);

/// Shortest round-trippable decimal; "nan"/"inf" for non-finite values.
std::string format_double(double v);

}  // namespace hdmi::io
