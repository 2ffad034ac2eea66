#pragma once

#include <json.hpp>

#include "crowdloc/eval.hpp"
#include "crowdloc/synth.hpp"
#include "crowdloc/trainer.hpp"

namespace crowdloc {

// nlohmann ADL hooks. from_json overwrites only the keys present, so partial
// config files inherit the defaults; unknown keys are rejected to catch typos.

void to_json(nlohmann::json& j, const IntRange& r);
void from_json(const nlohmann::json& j, IntRange& r);

void to_json(nlohmann::json& j, const SynthConfig& cfg);
void from_json(const nlohmann::json& j, SynthConfig& cfg);

void to_json(nlohmann::json& j, const AdamConfig& cfg);
void from_json(const nlohmann::json& j, AdamConfig& cfg);

void to_json(nlohmann::json& j, const PAConfig& cfg);
void from_json(const nlohmann::json& j, PAConfig& cfg);

void to_json(nlohmann::json& j, const NetHyper& h);
void from_json(const nlohmann::json& j, NetHyper& h);

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

void to_json(nlohmann::json& j, const LocalizationReport& r);
void to_json(nlohmann::json& j, const CountingReport& r);
void to_json(nlohmann::json& j, const EvalResult& r);
void to_json(nlohmann::json& j, const LossValues& v);
void to_json(nlohmann::json& j, const StepSummary& s);
void to_json(nlohmann::json& j, const EvalRow& row);
void to_json(nlohmann::json& j, const RunReport& report);

}  // namespace crowdloc
