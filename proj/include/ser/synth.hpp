// Synthetic planted-signal panels for tests and acceptance runs.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ser/dates.hpp"
#include "ser/io.hpp"

namespace ser {

struct PlantedEvent {
  std::string subject;  // surface forms; links are derived
  std::string action;
  std::string object;
  double effect = 0.0;  // added to the target when the event occurs
  double prob = 0.1;    // per stock-period occurrence probability
};

struct SynthSpec {
  int stocks = 200;
  int periods = 300;
  int entity_vocab = 500;
  int action_vocab = 50;
  int events_min = 1;
  int events_max = 6;
  std::vector<PlantedEvent> planted;
  double noise_sd = 0.02;
  uint64_t seed = 7;
  Date start = Date::from_ymd(2015, 1, 5);
};

struct SynthData {
  std::vector<RawObservationRow> events;  // target_return populated
  std::vector<ReturnRow> returns;         // next-period realizations
  std::string manifest_json;              // ground truth for tests
};

// target = sum(planted effects present) + N(0, noise_sd); the return file
// realizes each observation's target on the following trading day.
SynthData synth_generate(const SynthSpec& spec);

}  // namespace ser
