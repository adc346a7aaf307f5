#pragma once

#include "gddm/addm.hpp"
#include "gddm/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gddm {

using Json = nlohmann::json;

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Parses a JSON document; syntax errors become ValidationError with the
/// line and column. `source` names the input in messages.
Json parse_json(std::string_view text, const std::string& source);
Json read_json_file(const std::filesystem::path& path);

/// Throws ValidationError naming the first key of `object` not in `allowed`.
void require_known_keys(const Json& object, std::initializer_list<std::string_view> allowed,
                        const std::string& context);

double get_number(const Json& object, std::string_view key, const std::string& context);
double get_number_or(const Json& object, std::string_view key, double fallback,
                     const std::string& context);
std::vector<double> get_numbers(const Json& object, std::string_view key,
                                const std::string& context);

/// Initial condition as {"type": "point" | "discrete" | "uniform" | "beta" |
/// "mixture", ...}.
Json initial_to_json(const InitialCondition& initial);
InitialCondition initial_from_json(const Json& j);

/// Schedule as {"breakpoints", "mu", "sigma", "upper_values", "lower_values",
/// "initial"}. Parsing validates the schedule.
Json schedule_to_json(const StageSchedule& schedule);
StageSchedule schedule_from_json(const Json& j);

Json addm_params_to_json(const AddmParams& p);
/// Missing components keep the values of `fallback`.
AddmParams addm_params_from_json(const Json& j, const AddmParams& fallback = {});

/// Trial datasets: a CSV with columns trial_id, rt, choice (upper, lower or
/// none; rt empty for none) and a sidecar JSON {"trials": {id: design}} where
/// a design is {"fixations": [{"duration", "label"}], "ratings": {"r_A", "r_B"}}
/// or {"schedule": {...}}.
void write_trials(std::span<const TrialRecord> trials, const std::filesystem::path& csv_path,
                  const std::filesystem::path& sidecar_path);
std::vector<TrialRecord> read_trials(const std::filesystem::path& csv_path,
                                     const std::filesystem::path& sidecar_path);

/// Replaces `path` with `contents` via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Provenance record written next to every output.
struct RunManifest {
    std::string command;
    std::string config_path;
    std::uint64_t seed = 0;
    int threads = 1;
    double wall_clock_seconds = 0.0;
    std::vector<std::string> outputs;
    Json settings = Json::object();

    Json to_json() const;
    /// Written atomically to `<output>.manifest.json`.
    void write_next_to(const std::filesystem::path& output) const;
};

std::string library_version();

}  // namespace gddm
