#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <vector>

#include "protonas/search.hpp"

namespace protonas::cli {

nlohmann::ordered_json record_to_json(const CandidateRecord& r);
CandidateRecord record_from_json(const nlohmann::json& j);

// One JSON object per line, trial order.
std::vector<CandidateRecord> read_trial_log(const std::filesystem::path& path);

// Rebuilds the online archive by replaying a trial log.
ParetoArchive replay(std::vector<CandidateRecord> records);

}  // namespace protonas::cli
