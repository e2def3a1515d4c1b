#pragma once

// JSON forms of the configuration types and the chain export format
// (CSV draws plus a JSON sidecar).

#include <json.hpp>

#include <string>

#include "eload/calendar.hpp"
#include "eload/inference.hpp"

namespace eload {

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const McmcConfig& cfg);
/// Missing keys keep the values of `base`.
McmcConfig mcmc_config_from_json(const nlohmann::json& j, const McmcConfig& base = {});

nlohmann::json to_json(const HyperPriorConfig& cfg);
HyperPriorConfig hyper_prior_from_json(const nlohmann::json& j);

/// `chain.csv` -> `chain.json`.
std::string sidecar_path(const std::string& chain_path);

/// One row per kept draw: alpha.1.., beta.1.., gamma, u, sigma2 and, for
/// informative chains, k.1.., l, q, r. Writes the JSON sidecar next to it.
void save_chain(const std::string& path, const Chain& chain);
Chain load_chain(const std::string& path);

nlohmann::json read_json_file(const std::string& path);
/// Writes through a temporary file renamed into place.
void write_text_atomically(const std::string& path, const std::string& content);

}  // namespace eload
