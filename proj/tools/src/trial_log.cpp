#include "protonas/cli/trial_log.hpp"

#include <fstream>
#include <string>

#include "protonas/error.hpp"

namespace protonas::cli {

nlohmann::ordered_json record_to_json(const CandidateRecord& r) {
  nlohmann::ordered_json j;
  j["trial"] = r.trial_index;
  j["seed"] = r.seed;
  j["template"] = r.template_id;
  j["genes"] = {{"architecture", r.genes.architecture},
                {"group_depth", r.genes.group_depth},
                {"kernel_stride", r.genes.kernel_stride},
                {"width_multiplier", r.genes.width_multiplier},
                {"pruning_sparsity", r.genes.pruning_sparsity}};
  j["evaluated"] = r.evaluated;
  j["error"] = r.error.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(r.error);
  j["costs"] = {{"flops", r.costs.flops}, {"rom_bytes", r.costs.rom_bytes}, {"ram_bytes", r.costs.ram_bytes}};
  j["feasible"] = r.feasibility.feasible;
  j["violation"] = r.feasibility.violation;
  if (r.proxies) {
    j["proxies"] = {{"meco", r.proxies->meco},
                    {"zico", r.proxies->zico},
                    {"naswot", r.proxies->naswot},
                    {"snip", r.proxies->snip}};
  } else {
    j["proxies"] = nullptr;
  }
  j["objectives"] = r.objectives;
  return j;
}

CandidateRecord record_from_json(const nlohmann::json& j) {
  CandidateRecord r;
  r.trial_index = j.at("trial").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.template_id = j.at("template").get<std::string>();
  const auto& g = j.at("genes");
  r.genes.architecture = g.at("architecture").get<int>();
  r.genes.group_depth = g.at("group_depth").get<std::array<int, kGroupCount>>();
  r.genes.kernel_stride = g.at("kernel_stride").get<std::array<int, kGroupCount>>();
  r.genes.width_multiplier = g.at("width_multiplier").get<double>();
  r.genes.pruning_sparsity = g.at("pruning_sparsity").get<std::array<double, kGroupCount>>();
  r.evaluated = j.at("evaluated").get<bool>();
  if (!j.at("error").is_null()) r.error = j.at("error").get<std::string>();
  const auto& c = j.at("costs");
  r.costs = {c.at("flops").get<std::int64_t>(), c.at("rom_bytes").get<std::int64_t>(),
             c.at("ram_bytes").get<std::int64_t>()};
  r.feasibility = {j.at("feasible").get<bool>(), j.at("violation").get<double>()};
  if (const auto& p = j.at("proxies"); !p.is_null()) {
    r.proxies = ProxyScores{p.at("meco").get<double>(), p.at("zico").get<double>(), p.at("naswot").get<double>(),
                            p.at("snip").get<double>()};
  }
  r.objectives = j.at("objectives").get<Objectives>();
  return r;
}

std::vector<CandidateRecord> read_trial_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open trial log");
  std::vector<CandidateRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path.string(), "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

ParetoArchive replay(std::vector<CandidateRecord> records) {
  ParetoArchive archive;
  for (auto& r : records) archive.add(std::move(r));
  return archive;
}

}  // namespace protonas::cli
